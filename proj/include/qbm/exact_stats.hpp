#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "qbm/gibbs.hpp"
#include "qbm/model.hpp"

namespace qbm {

/// Exact sufficient statistics of a Gibbs distribution.
struct ExactStatistics {
  /// log Z, or log Z_x when the visible units are clamped.
  double log_partition = 0.0;
  /// <s_k> for every unit; clamped units report their clamp value.
  std::vector<double> unit_means;
  /// <s_a s_b> for every edge, in model edge order.
  std::vector<double> edge_means;
};

/// Computes exact statistics by enumerating all free units outside an
/// independent set and summing the independent set out analytically. Only the
/// enumerated units count against `cap`.
ExactStatistics exact_statistics(const BoltzmannModel& model, std::size_t cap = kDefaultEnumerationCap);

/// Same, with the visible units clamped to `clamp`. Clamp values may be any
/// reals in [0, 1]; the energy is evaluated multilinearly.
ExactStatistics exact_statistics(const BoltzmannModel& model, std::span<const double> clamp,
                                 std::size_t cap = kDefaultEnumerationCap);

double sigmoid(double x);
/// log(1 + e^x) without overflow.
double softplus(double x);

}  // namespace qbm
