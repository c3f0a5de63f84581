#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "qbm/gibbs.hpp"
#include "qbm/meanfield.hpp"
#include "qbm/model.hpp"
#include "qbm/resources.hpp"

namespace qbm {

/// Acceptance weight min(1, e^{-E} / (kappa Z_Q Q)). Throws DomainError for
/// kappa < 1 or Q(config) = 0.
double acceptance_weight(const BoltzmannModel& model, const MeanFieldSolution& sol, double kappa,
                         const Configuration& config);
/// Unclipped log of the same ratio for a packed state.
double log_acceptance_ratio(const BoltzmannModel& model, const MeanFieldSolution& sol, double kappa, State state);

/// Exact description of a simulated mean-field state preparation followed by
/// post-selection on the acceptance qubit.
struct PrepModel {
  BoltzmannModel model;
  MeanFieldSolution sol;
  double kappa = 1.0;
  /// Sum of Q * weight.
  double success_probability = 1.0;
  /// Post-selected distribution in enumeration order of (model, sol.clamp).
  std::vector<double> postselected;
  /// Exact Gibbs distribution in the same order.
  std::vector<double> exact;
  double log_Z = 0.0;
  /// Sum of sqrt(postselected * exact).
  double fidelity_vs_exact = 1.0;
  /// Gibbs mass of configurations whose unclipped weight exceeds 1.
  double bad_mass = 0.0;
  /// (Sum_bad e^{-E} - kappa Z_Q Sum_bad Q) / Z.
  double epsilon = 0.0;

  std::uint64_t size() const noexcept { return postselected.size(); }
  State state(std::uint64_t index) const noexcept {
    if (!sol.clamp) return index;
    return pack_visible(model, *sol.clamp) | (index << model.n_visible());
  }
};

/// Builds the post-selected distribution by enumeration (Q_x and the clamped
/// Gibbs distribution when `sol` is clamped). Throws CapacityError past `cap`.
PrepModel prep_model(const BoltzmannModel& model, const MeanFieldSolution& sol, double kappa,
                     std::size_t cap = kDefaultEnumerationCap);

struct PrepSamples {
  BoltzmannModel model;
  std::vector<State> states;
  /// state_preparations holds the realized repetition total.
  ResourceReport resources;

  std::vector<Configuration> configurations() const;
};

/// Draws i.i.d. samples from the post-selected distribution. Repetition
/// costs are charged as geometric draws with success p, or with the fixed
/// amplitude-amplification count when `use_amplification` is set.
PrepSamples sample_prep(const PrepModel& prep, std::size_t n_samples, std::uint64_t seed,
                        bool use_amplification = false);

/// CSV with columns kappa,success,fidelity,bad_mass,epsilon.
void write_prep_scan_csv(std::ostream& out, const BoltzmannModel& model, const MeanFieldSolution& sol,
                         std::span<const double> kappas, const std::map<std::string, std::string>& metadata);

}  // namespace qbm
