#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qbm/gibbs.hpp"
#include "qbm/model.hpp"

namespace qbm {

struct MeanFieldOptions {
  double tol = 1e-10;
  std::size_t max_iter = 10000;
  /// Step fraction of the damped update x <- (1 - damping) x + damping f(x).
  double damping = 0.5;
  /// Random restarts attempted after the deterministic start fails.
  std::size_t restarts = 8;
  std::uint64_t seed = 0;
};

/// Product distribution Q (or Q_x) with its variational log-partition estimate.
struct MeanFieldSolution {
  /// Visible means; empty when the visible units are clamped.
  std::vector<double> mu;
  std::vector<double> nu;
  std::optional<VisibleVector> clamp;
  /// Hedging parameter; sampling uses alpha * m + (1 - alpha) / 2.
  double alpha = 1.0;
  /// Always computed from the unhedged parameters.
  double log_Z_Q = 0.0;
  std::size_t iterations = 0;
  /// Max-norm fixed-point defect of the unhedged parameters.
  double residual = 0.0;

  std::size_t n_visible() const noexcept { return clamp ? clamp->size() : mu.size(); }
  std::size_t n_hidden() const noexcept { return nu.size(); }
  double sampling_mu(std::size_t i) const { return alpha * mu[i] + 0.5 * (1.0 - alpha); }
  double sampling_nu(std::size_t j) const { return alpha * nu[j] + 0.5 * (1.0 - alpha); }
};

/// Damped fixed-point iteration of the mean-field equations (intra-layer
/// edges included in each unit's local field). Throws ConvergenceError
/// carrying the best residual when no attempt reaches `tol`.
MeanFieldSolution solve_mean_field(const BoltzmannModel& model,
                                   const std::optional<VisibleVector>& clamp = std::nullopt,
                                   const MeanFieldOptions& options = {});

/// Max-norm defect |f(m) - m| of the unhedged parameters of `sol`.
double fixed_point_residual(const BoltzmannModel& model, const MeanFieldSolution& sol);

double q_probability(const MeanFieldSolution& sol, const Configuration& config);
double log_q_probability(const MeanFieldSolution& sol, State state);

/// Sum_{v,h} Q (-E - log Q) in closed form from the unhedged parameters.
double log_Z_Q(const BoltzmannModel& model, const MeanFieldSolution& sol);

/// KL(Q || P) by enumeration. `table` must describe the same model and clamp.
double kl_divergence(const MeanFieldSolution& sol, const GibbsTable& table);

/// Replaces the sampling prior by the alpha-mixture with the uniform
/// distribution; log_Z_Q is unchanged.
MeanFieldSolution hedge(const MeanFieldSolution& sol, double alpha);

struct KappaReport {
  /// max e^{-E} / (Z_Q Q): the smallest kappa satisfying the bound everywhere.
  double kappa_min = 0.0;
  /// Sum P^2 / Q.
  double kappa_est = 0.0;
  /// (kappa, Sum of P over configurations whose unclipped acceptance weight
  /// e^{-E} / (kappa Z_Q Q) is at most 1), one pair per grid point.
  std::vector<std::pair<double, double>> bad_mass_curve;
  double kl = 0.0;
};

KappaReport kappa_report(const BoltzmannModel& model, const MeanFieldSolution& sol,
                         std::span<const double> kappa_grid);

/// Smallest kappa whose accepted-without-clipping mass reaches `target_mass`.
double kappa_for_mass(const BoltzmannModel& model, const MeanFieldSolution& sol, double target_mass);

/// Logarithmically spaced grid of `points` values from `lo` to `hi`.
std::vector<double> log_grid(double lo, double hi, std::size_t points);

/// Stable 64-bit FNV-1a digest of the serialized model, as hex.
std::string model_hash(const BoltzmannModel& model);

/// CSV with `# key=value` metadata lines followed by columns kappa,bad_mass.
void write_kappa_csv(std::ostream& out, const KappaReport& report,
                     const std::map<std::string, std::string>& metadata);

}  // namespace qbm
