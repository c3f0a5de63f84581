#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>

#include "qbm/dataset.hpp"
#include "qbm/meanfield.hpp"
#include "qbm/model.hpp"
#include "qbm/objective.hpp"

namespace qbm {

struct GeqsOptions {
  double lambda = 0.0;
  /// Kappa for the clamped preparations; defaults to the unclamped kappa.
  std::optional<double> kappa_data;
  /// Number of clamped samples; 0 means one per (expanded) training vector.
  std::size_t data_samples = 0;
  bool use_amplification = false;
  MeanFieldOptions mean_field;
  std::size_t cap = kDefaultEnumerationCap;
};

/// Gradient estimate from simulated Gibbs-state preparation.
///
/// Model moments use `samples_per_expectation` draws from the unclamped
/// post-selected distribution. Clamped draw k uses training vector k mod N of
/// the expanded (binary) dataset. All moments of a side come from the same
/// sample set. Standard errors combine both sides.
GradientEstimate geqs_gradient(const BoltzmannModel& model, const Dataset& data, double kappa,
                               std::size_t samples_per_expectation, std::uint64_t seed,
                               const GeqsOptions& options = {});

/// Expectation of geqs_gradient over its randomness, computed by enumerating
/// the post-selected distributions. Equals exact_gradient when kappa is at
/// least every kappa_min involved.
GradientEstimate geqs_expected_gradient(const BoltzmannModel& model, const Dataset& data, double kappa,
                                        const GeqsOptions& options = {});

struct GeqaeOptions {
  double lambda = 0.0;
  std::optional<double> kappa_data;
  /// Amplitude-estimation iterations; nullopt uses the exact probabilities.
  std::optional<std::size_t> L;
  /// Upper bound on every estimated probability; enables amplification.
  std::optional<double> p_upper;
  MeanFieldOptions mean_field;
  std::size_t cap = kDefaultEnumerationCap;
};

/// Success probabilities seen by amplitude estimation for one component.
struct GeqaeComponent {
  double p1_data = 0.0;
  double p11_data = 0.0;
  double p1_model = 0.0;
  double p11_model = 0.0;
  double estimate = 0.0;
};

/// One derivative (flat parameter index) by the quotient P(11) / P(1) over a
/// uniform superposition of the training vectors, with amplitude-estimation
/// noise applied to every probability. Throws NumericalError when an
/// estimated P(1) is zero.
GeqaeComponent geqae_component(const BoltzmannModel& model, const Dataset& data, double kappa,
                               std::size_t component, std::uint64_t seed, const GeqaeOptions& options = {});

double geqae_gradient(const BoltzmannModel& model, const Dataset& data, double kappa, std::size_t component,
                      std::uint64_t seed, const GeqaeOptions& options = {});

/// Every component, each with its own derived seed.
GradientEstimate geqae_full_gradient(const BoltzmannModel& model, const Dataset& data, double kappa,
                                     std::uint64_t seed, const GeqaeOptions& options = {});

}  // namespace qbm
