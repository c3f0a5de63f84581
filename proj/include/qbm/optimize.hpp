#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qbm/dataset.hpp"
#include "qbm/gibbs.hpp"
#include "qbm/model.hpp"

namespace qbm {

enum class OptimizerKind { ascent, bfgs };

struct TrainerConfig {
  double learning_rate = 0.01;
  /// L2 coefficient applied to the weights.
  double lambda = 0.01;
  std::size_t max_epochs = 100000;
  /// Running-average window of the stopping rule.
  std::size_t window = 100;
  /// Relative change of consecutive window averages that counts as converged.
  double threshold = 1e-5;
  std::size_t min_epochs = 10000;
  OptimizerKind optimizer = OptimizerKind::ascent;
  /// BFGS stops once one iteration changes O_ML by less than this.
  double bfgs_tolerance = 1e-7;
  /// ...and the gradient norm is below this.
  double bfgs_gradient_tolerance = 1e-5;
  std::size_t bfgs_max_iterations = 20000;
  std::uint64_t seed = 0;
  std::size_t cap = kDefaultEnumerationCap;
  /// Record every n-th epoch in the trace (the final epoch is always kept).
  std::size_t trace_every = 1;

  /// Throws ConfigError for invalid settings.
  void validate() const;
};

enum class SourceKind { exact, geqs, geqae, cd_k, exact_noise };

struct GradientSource {
  SourceKind kind = SourceKind::exact;
  /// Standard deviation of the Gaussian noise added per component (exact_noise).
  double sigma_noise = 0.0;
  double kappa = 1.0;
  std::optional<double> kappa_data;
  /// Samples per expectation (geqs).
  std::size_t samples = 1000;
  /// Amplitude-estimation iterations and optional amplification bound (geqae).
  std::optional<std::size_t> L;
  std::optional<double> p_upper;
  /// Gibbs sweeps (cd_k).
  std::size_t cd_steps = 1;
};

struct TracePoint {
  std::size_t epoch = 0;
  double objective = 0.0;
  double gradient_norm = 0.0;
};

struct OptimizeResult {
  BoltzmannModel model;
  std::vector<TracePoint> trace;
  std::size_t epochs = 0;
  bool converged = false;
  /// Exact O_ML at the returned parameters.
  double objective = 0.0;
};

/// Gradient ascent with the running-average stopping rule, or BFGS on exact
/// gradients. Throws NumericalError when the objective or parameters stop
/// being finite.
OptimizeResult optimize(const BoltzmannModel& init, const Dataset& data, const TrainerConfig& config,
                        const GradientSource& source = {});

/// CSV with columns epoch,objective,gradient_norm.
void write_trace_csv(std::ostream& out, const std::vector<TracePoint>& trace,
                     const std::map<std::string, std::string>& metadata);

struct LocalOptimumReport {
  std::size_t trials = 0;
  std::size_t increases = 0;
  double increase_fraction = 0.0;
  double max_increase = 0.0;
  /// One-sided Clopper-Pearson upper bound on the increase probability.
  double upper_bound = 0.0;
  double confidence = 0.99;
  /// upper_bound < 1 - confidence: at the stated confidence, fewer than that
  /// fraction of random directions increase O_ML.
  bool consistent_with_optimum = false;
};

/// Perturbs one uniformly chosen parameter by +-step per trial and counts
/// increases of O_ML.
LocalOptimumReport verify_local_optimum(const BoltzmannModel& model, const Dataset& data, double lambda,
                                        std::size_t n_trials = 459, double step = 1e-3, std::uint64_t seed = 0,
                                        double confidence = 0.99, std::size_t cap = kDefaultEnumerationCap);

/// Largest p with P(Binomial(n, p) <= x) >= 1 - confidence.
double binomial_upper_bound(std::size_t x, std::size_t n, double confidence);

struct OptimaDistance {
  double euclidean = 0.0;
  /// euclidean / |b|.
  double relative = 0.0;
};

/// Distance between flattened parameter vectors. Throws DimensionError when
/// the structures differ.
OptimaDistance optima_distance(const BoltzmannModel& a, const BoltzmannModel& b);

}  // namespace qbm
