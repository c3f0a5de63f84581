#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace qbm {

/// One amplitude-estimation result.
struct AEOutcome {
  double a_true = 0.0;
  std::size_t L = 1;
  /// sin^2(pi y / L) for the measured grid index y.
  double a_hat = 0.0;
  /// |a_hat - a_true| <= pi (pi + 1) / L.
  bool within_bound = false;
};

struct AEGridPoint {
  /// Grid index y in [0, L/2].
  std::size_t y = 0;
  double a_hat = 0.0;
  double probability = 0.0;
};

/// pi (pi + 1) / L.
double ae_error_bound(std::size_t L);

/// Exact outcome distribution of ideal amplitude estimation with L Grover
/// iterations, with y and L - y merged. Throws DomainError for a outside [0, 1]
/// or L = 0.
std::vector<AEGridPoint> ae_outcome_distribution(double a, std::size_t L);

/// Draws one outcome; deterministic per seed.
AEOutcome sample_ae(double a, std::size_t L, std::uint64_t seed);

/// sin^2((2m + 1) asin(sqrt(p))).
double amplified_probability(double p, std::size_t m);

/// sin^2(asin(sqrt(P_s)) / (2m + 1)). When `p_upper` is given, throws
/// DomainError unless (2m + 1) asin(sqrt(p_upper)) <= pi / 2, the regime where
/// the inversion is unambiguous.
double invert_amplified(double p_s, std::size_t m, double p_upper = 0.0);

/// Largest m with (2m + 1) asin(sqrt(P_u)) <= pi / 2.
std::size_t choose_m(double p_upper);

}  // namespace qbm
