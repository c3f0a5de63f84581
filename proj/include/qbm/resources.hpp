#pragma once

#include <cstddef>
#include <optional>

#include "qbm/model.hpp"

namespace qbm {

/// Cost bookkeeping for simulated state preparation and gradient estimation.
///
/// Fields ending in `_estimate` evaluate asymptotic scaling formulas with unit
/// constants and suppressed polylogarithmic factors. They are comparable point
/// estimates, not gate counts; `formula_estimate` is always true for them.
struct ResourceReport {
  /// Success probability of one preparation attempt.
  double success_probability = 1.0;
  /// 1 / p.
  double expected_preps_no_amplification = 1.0;
  /// ceil(pi / (4 asin(sqrt(p)))).
  double expected_preps_with_amplification = 1.0;
  /// Preparations actually charged by a simulation run.
  double state_preparations = 0.0;
  /// Queries to the training-data oracle.
  double oracle_queries = 0.0;
  double operation_estimate = 0.0;
  /// Same quantity with sqrt(kappa + kappa_x) in place of sqrt(kappa) + sqrt(kappa_x).
  double operation_estimate_proof_form = 0.0;
  double depth_estimate_geqs = 0.0;
  double depth_estimate_geqae = 0.0;
  double depth_estimate_cd = 0.0;
  std::size_t qubit_estimate = 0;
  bool formula_estimate = true;

  /// Adds the realized counters (state_preparations, oracle_queries).
  ResourceReport& operator+=(const ResourceReport& other);
};

enum class EstimatorMode { geqs, geqae };

/// Amplitude-amplification repetition count ceil(pi / (4 asin(sqrt(p)))).
double amplified_repetitions(double p);

struct ResourceQuery {
  double kappa = 1.0;
  /// Largest clamped kappa over the training set.
  double kappa_x_max = 1.0;
  double n_train = 1.0;
  EstimatorMode mode = EstimatorMode::geqs;
  /// Target gradient accuracy; required for GEQAE.
  std::optional<double> delta;
  /// Precision of the acceptance-weight oracle.
  double precision = 0x1.0p-32;
  /// CD sweeps, used only by the CD depth estimate.
  std::size_t cd_steps = 1;
};

/// Evaluates the scaling formulas for `model` (edge count, layer count and
/// widths are read from it). Throws ConfigError when delta is missing in GEQAE
/// mode and DomainError for non-positive parameters.
ResourceReport resource_report(const BoltzmannModel& model, const ResourceQuery& query);

}  // namespace qbm
