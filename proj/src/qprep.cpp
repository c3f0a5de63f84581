#include "qbm/qprep.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "qbm/error.hpp"
#include "qbm/random.hpp"

namespace qbm {

namespace {

// Log-ratio slack so that kappa == kappa_min (computed through exp/log) counts as exact.
constexpr double kLogSlack = 1e-12;

}  // namespace

double log_acceptance_ratio(const BoltzmannModel& model, const MeanFieldSolution& sol, double kappa, State state) {
  if (!(kappa >= 1.0)) throw DomainError("kappa must be at least 1");
  const double lq = log_q_probability(sol, state);
  if (!std::isfinite(lq)) throw DomainError("configuration has zero mean-field probability");
  return -energy(model, state) - std::log(kappa) - sol.log_Z_Q - lq;
}

double acceptance_weight(const BoltzmannModel& model, const MeanFieldSolution& sol, double kappa,
                         const Configuration& config) {
  const double lr = log_acceptance_ratio(model, sol, kappa, pack(model, config));
  return lr >= 0.0 ? 1.0 : std::exp(lr);
}

PrepModel prep_model(const BoltzmannModel& model, const MeanFieldSolution& sol, double kappa, std::size_t cap) {
  if (!(kappa >= 1.0)) throw DomainError("kappa must be at least 1");
  if (sol.n_visible() != model.n_visible() || sol.n_hidden() != model.n_hidden())
    throw DimensionError("solution dimensions do not match the model");
  const GibbsTable table = gibbs_table(model, sol.clamp, cap);
  PrepModel prep;
  prep.model = model;
  prep.sol = sol;
  prep.kappa = kappa;
  prep.exact = table.probabilities;
  prep.log_Z = table.log_Z;
  prep.postselected.resize(table.size());

  const double log_kzq = std::log(kappa) + sol.log_Z_Q;
  double success = 0.0;
  double bad_e = 0.0;  // Sum_bad e^{-E} / Z
  double bad_q = 0.0;  // kappa Z_Q Sum_bad Q / Z
  for (std::uint64_t i = 0; i < table.size(); ++i) {
    const State s = table.state(i);
    const double lq = log_q_probability(sol, s);
    const double neg_e = -energy(model, s);
    const double lr = neg_e - log_kzq - lq;
    const double q = std::exp(lq);
    double accepted;
    if (lr > kLogSlack) {
      accepted = q;
      prep.bad_mass += table.probabilities[i];
      bad_e += table.probabilities[i];
      bad_q += std::exp(log_kzq + lq - table.log_Z);
    } else {
      accepted = std::exp(neg_e - log_kzq);
    }
    prep.postselected[i] = accepted;
    success += accepted;
  }
  if (!(success > 0.0)) throw NumericalError("post-selection has zero success probability");
  prep.success_probability = std::min(success, 1.0);
  double fidelity = 0.0;
  for (std::uint64_t i = 0; i < table.size(); ++i) {
    prep.postselected[i] /= success;
    fidelity += std::sqrt(prep.postselected[i] * prep.exact[i]);
  }
  prep.fidelity_vs_exact = std::min(fidelity, 1.0);
  prep.epsilon = bad_e - bad_q;
  return prep;
}

std::vector<Configuration> PrepSamples::configurations() const {
  std::vector<Configuration> out;
  out.reserve(states.size());
  for (State s : states) out.push_back(unpack(model, s));
  return out;
}

PrepSamples sample_prep(const PrepModel& prep, std::size_t n_samples, std::uint64_t seed, bool use_amplification) {
  Rng rng(seed);
  std::vector<double> cumulative(prep.size());
  double acc = 0.0;
  for (std::uint64_t i = 0; i < prep.size(); ++i) cumulative[i] = acc += prep.postselected[i];

  const double p = prep.success_probability;
  PrepSamples out;
  out.model = prep.model;
  out.states.reserve(n_samples);
  out.resources.success_probability = p;
  out.resources.expected_preps_no_amplification = 1.0 / p;
  out.resources.expected_preps_with_amplification = amplified_repetitions(p);
  const double log_fail = std::log1p(-std::min(p, 1.0));
  for (std::size_t k = 0; k < n_samples; ++k) {
    const double u = uniform01(rng) * acc;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    if (it == cumulative.end()) --it;
    out.states.push_back(prep.state(static_cast<std::uint64_t>(it - cumulative.begin())));
    if (use_amplification) {
      out.resources.state_preparations += out.resources.expected_preps_with_amplification;
    } else if (p >= 1.0) {
      out.resources.state_preparations += 1.0;
    } else {
      // Inverse-CDF draw from the geometric distribution on {1, 2, ...}.
      const double v = 1.0 - uniform01(rng);
      out.resources.state_preparations += 1.0 + std::floor(std::log(v) / log_fail);
    }
  }
  return out;
}

void write_prep_scan_csv(std::ostream& out, const BoltzmannModel& model, const MeanFieldSolution& sol,
                         std::span<const double> kappas, const std::map<std::string, std::string>& metadata) {
  for (const auto& [k, v] : metadata) out << "# " << k << '=' << v << '\n';
  out << "kappa,success,fidelity,bad_mass,epsilon\n";
  const auto old = out.precision(17);
  for (double kappa : kappas) {
    const PrepModel prep = prep_model(model, sol, kappa);
    out << kappa << ',' << prep.success_probability << ',' << prep.fidelity_vs_exact << ',' << prep.bad_mass << ','
        << prep.epsilon << '\n';
  }
  out.precision(old);
}

}  // namespace qbm
