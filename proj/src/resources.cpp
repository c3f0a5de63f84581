#include "qbm/resources.hpp"

#include <algorithm>
#include <cmath>

#include "qbm/error.hpp"

namespace qbm {

ResourceReport& ResourceReport::operator+=(const ResourceReport& other) {
  state_preparations += other.state_preparations;
  oracle_queries += other.oracle_queries;
  return *this;
}

double amplified_repetitions(double p) {
  if (!(p > 0.0 && p <= 1.0)) throw DomainError("success probability must lie in (0, 1]");
  return std::ceil(M_PI / (4.0 * std::asin(std::sqrt(p))) - 1e-12);
}

ResourceReport resource_report(const BoltzmannModel& model, const ResourceQuery& q) {
  if (!(q.kappa >= 1.0 && q.kappa_x_max >= 1.0)) throw DomainError("kappa values must be at least 1");
  if (!(q.n_train >= 1.0)) throw DomainError("training set size must be positive");
  if (!(q.precision > 0.0 && q.precision < 1.0)) throw DomainError("precision must lie in (0, 1)");
  if (q.mode == EstimatorMode::geqae && !q.delta) throw ConfigError("GEQAE resource estimate requires delta");
  if (q.delta && !(*q.delta > 0.0)) throw DomainError("delta must be positive");

  const double E = static_cast<double>(model.edge_count());
  const double n = q.n_train;
  const double ksum = q.kappa + q.kappa_x_max;
  const double ell = static_cast<double>(std::max<std::size_t>(model.layer_count() - 1, 1));
  const double width = static_cast<double>(std::max(model.n_visible(), model.n_hidden()));
  const double log_m = width * std::log(std::max(width, 1.0));

  ResourceReport r;
  r.success_probability = 1.0 / ksum;
  r.expected_preps_no_amplification = ksum;
  r.expected_preps_with_amplification = amplified_repetitions(r.success_probability);
  r.depth_estimate_geqs = std::log(ksum) + log_m + std::log(ell) + std::log(n);
  r.depth_estimate_geqae = std::sqrt(n * ksum) * (log_m + std::log(ell));
  r.depth_estimate_cd = static_cast<double>(q.cd_steps) * ell * ell * (log_m + std::log(n));
  r.qubit_estimate = model.n_units() + static_cast<std::size_t>(std::ceil(std::log2(1.0 / q.precision) - 1e-12));
  if (q.mode == EstimatorMode::geqs) {
    r.operation_estimate = n * E * (std::sqrt(q.kappa) + std::sqrt(q.kappa_x_max));
    r.operation_estimate_proof_form = n * E * std::sqrt(ksum);
    r.oracle_queries = n * std::sqrt(q.kappa_x_max);
  } else {
    // One derivative costs E (kappa + kappa_x) / delta operations; the full
    // gradient has E derivatives.
    r.oracle_queries = E * ksum / *q.delta;
    r.operation_estimate = E * E * ksum / *q.delta;
    r.operation_estimate_proof_form = r.operation_estimate;
  }
  return r;
}

}  // namespace qbm
