#include "qbm/meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

#include "qbm/error.hpp"
#include "qbm/exact_stats.hpp"

namespace qbm {

namespace {

// Keeps parameters representable strictly inside (0, 1).
constexpr double kEdge = 1e-15;

double clamp_open(double m) { return std::clamp(m, kEdge, 1.0 - kEdge); }

double bernoulli_entropy(double m) { return -(m * std::log(m) + (1.0 - m) * std::log1p(-m)); }

// Mean value of every unit under the (unhedged) solution.
std::vector<double> unit_values(const BoltzmannModel& model, const MeanFieldSolution& sol) {
  const std::size_t n_v = model.n_visible();
  std::vector<double> m(model.n_units());
  for (std::size_t i = 0; i < n_v; ++i) m[i] = sol.clamp ? double((*sol.clamp)[i]) : sol.mu[i];
  for (std::size_t j = 0; j < model.n_hidden(); ++j) m[n_v + j] = sol.nu[j];
  return m;
}

class FixedPointMap {
 public:
  FixedPointMap(const BoltzmannModel& model, const std::optional<VisibleVector>& clamp)
      : model_(model), first_free_(clamp ? model.n_visible() : 0) {}

  std::size_t first_free() const { return first_free_; }

  void apply(const std::vector<double>& m, std::vector<double>& out) const {
    for (std::size_t k = first_free_; k < m.size(); ++k) {
      double field = model_.unit_bias(k);
      for (const auto& nb : model_.neighbors(k)) field += model_.edges()[nb.edge].w * m[nb.unit];
      out[k] = clamp_open(sigmoid(field));
    }
  }

  double residual(const std::vector<double>& m, std::vector<double>& scratch) const {
    scratch = m;
    apply(m, scratch);
    double r = 0.0;
    for (std::size_t k = first_free_; k < m.size(); ++k) r = std::max(r, std::abs(scratch[k] - m[k]));
    return r;
  }

 private:
  const BoltzmannModel& model_;
  std::size_t first_free_;
};

}  // namespace

MeanFieldSolution solve_mean_field(const BoltzmannModel& model, const std::optional<VisibleVector>& clamp,
                                   const MeanFieldOptions& options) {
  if (clamp && clamp->size() != model.n_visible()) throw DimensionError("clamp length does not match n_v");
  if (!(options.damping > 0.0 && options.damping <= 1.0)) throw DomainError("damping must lie in (0, 1]");
  const std::size_t n = model.n_units();
  const std::size_t n_v = model.n_visible();
  const FixedPointMap map(model, clamp);

  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> uniform(0.05, 0.95);

  double best_residual = std::numeric_limits<double>::infinity();
  std::vector<double> m(n), fm(n);
  for (std::size_t attempt = 0; attempt <= options.restarts; ++attempt) {
    for (std::size_t k = 0; k < n; ++k) {
      if (clamp && k < n_v)
        m[k] = (*clamp)[k];
      else
        m[k] = attempt == 0 ? 0.5 : uniform(rng);
    }
    // First step is undamped: equivalent to starting from f(m0).
    fm = m;
    map.apply(m, fm);
    m = fm;
    for (std::size_t it = 1; it <= options.max_iter; ++it) {
      map.apply(m, fm);
      double res = 0.0;
      for (std::size_t k = map.first_free(); k < n; ++k) res = std::max(res, std::abs(fm[k] - m[k]));
      best_residual = std::min(best_residual, res);
      if (res <= options.tol) {
        MeanFieldSolution sol;
        sol.clamp = clamp;
        if (!clamp) sol.mu.assign(m.begin(), m.begin() + static_cast<std::ptrdiff_t>(n_v));
        sol.nu.assign(m.begin() + static_cast<std::ptrdiff_t>(n_v), m.end());
        sol.iterations = it;
        sol.residual = res;
        sol.log_Z_Q = log_Z_Q(model, sol);
        return sol;
      }
      for (std::size_t k = map.first_free(); k < n; ++k)
        m[k] = (1.0 - options.damping) * m[k] + options.damping * fm[k];
    }
  }
  throw ConvergenceError("mean-field iteration did not converge; best residual " + std::to_string(best_residual),
                         best_residual);
}

double fixed_point_residual(const BoltzmannModel& model, const MeanFieldSolution& sol) {
  const FixedPointMap map(model, sol.clamp);
  std::vector<double> scratch;
  return map.residual(unit_values(model, sol), scratch);
}

double log_q_probability(const MeanFieldSolution& sol, State state) {
  const std::size_t n_v = sol.n_visible();
  double lq = 0.0;
  if (sol.clamp) {
    for (std::size_t i = 0; i < n_v; ++i)
      if (((state >> i) & 1U) != (*sol.clamp)[i]) return -std::numeric_limits<double>::infinity();
  } else {
    for (std::size_t i = 0; i < n_v; ++i) {
      const double m = sol.sampling_mu(i);
      lq += ((state >> i) & 1U) ? std::log(m) : std::log1p(-m);
    }
  }
  for (std::size_t j = 0; j < sol.n_hidden(); ++j) {
    const double m = sol.sampling_nu(j);
    lq += ((state >> (n_v + j)) & 1U) ? std::log(m) : std::log1p(-m);
  }
  return lq;
}

double q_probability(const MeanFieldSolution& sol, const Configuration& config) {
  if (config.v.size() != sol.n_visible() || config.h.size() != sol.n_hidden())
    throw DimensionError("configuration dimensions do not match the solution");
  State s = 0;
  for (std::size_t i = 0; i < config.v.size(); ++i)
    if (config.v[i]) s |= State{1} << i;
  for (std::size_t j = 0; j < config.h.size(); ++j)
    if (config.h[j]) s |= State{1} << (config.v.size() + j);
  return std::exp(log_q_probability(sol, s));
}

double log_Z_Q(const BoltzmannModel& model, const MeanFieldSolution& sol) {
  if (sol.n_visible() != model.n_visible() || sol.n_hidden() != model.n_hidden())
    throw DimensionError("solution dimensions do not match the model");
  const std::vector<double> m = unit_values(model, sol);
  double neg_energy = 0.0;
  for (std::size_t k = 0; k < m.size(); ++k) neg_energy += model.unit_bias(k) * m[k];
  for (const auto& e : model.edges()) neg_energy += e.w * m[e.a] * m[e.b];
  double entropy = 0.0;
  const std::size_t first_free = sol.clamp ? model.n_visible() : 0;
  for (std::size_t k = first_free; k < m.size(); ++k) entropy += bernoulli_entropy(m[k]);
  return neg_energy + entropy;
}

double kl_divergence(const MeanFieldSolution& sol, const GibbsTable& table) {
  if (sol.clamp.has_value() != table.clamp.has_value() || (sol.clamp && *sol.clamp != *table.clamp))
    throw DimensionError("solution and table have different clamps");
  double kl = 0.0;
  for (std::uint64_t i = 0; i < table.size(); ++i) {
    const double lq = log_q_probability(sol, table.state(i));
    const double q = std::exp(lq);
    if (q == 0.0) continue;
    const double lp = -energy(table.model, table.state(i)) - table.log_Z;
    kl += q * (lq - lp);
  }
  return std::max(kl, 0.0);
}

MeanFieldSolution hedge(const MeanFieldSolution& sol, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("hedging parameter must lie in [0, 1]");
  MeanFieldSolution out = sol;
  out.alpha = alpha;
  return out;
}

namespace {

struct RatioTable {
  std::vector<double> ratio;
  std::vector<double> p;
  double kappa_est = 0.0;
  double kl = 0.0;
};

RatioTable ratio_table(const BoltzmannModel& model, const MeanFieldSolution& sol) {
  const GibbsTable table = gibbs_table(model, sol.clamp);
  RatioTable out;
  out.ratio.resize(table.size());
  out.p = table.probabilities;
  for (std::uint64_t i = 0; i < table.size(); ++i) {
    const double lq = log_q_probability(sol, table.state(i));
    const double neg_e = -energy(model, table.state(i));
    out.ratio[i] = std::exp(neg_e - sol.log_Z_Q - lq);
    const double lp = neg_e - table.log_Z;
    out.kappa_est += std::exp(2.0 * lp - lq);
  }
  out.kl = kl_divergence(sol, table);
  return out;
}

}  // namespace

KappaReport kappa_report(const BoltzmannModel& model, const MeanFieldSolution& sol,
                         std::span<const double> kappa_grid) {
  const RatioTable t = ratio_table(model, sol);
  KappaReport report;
  report.kappa_min = *std::max_element(t.ratio.begin(), t.ratio.end());
  report.kappa_est = t.kappa_est;
  report.kl = t.kl;
  for (double kappa : kappa_grid) {
    double mass = 0.0;
    bool all = true;
    for (std::size_t i = 0; i < t.ratio.size(); ++i) {
      if (t.ratio[i] <= kappa)
        mass += t.p[i];
      else
        all = false;
    }
    report.bad_mass_curve.emplace_back(kappa, all ? 1.0 : std::min(mass, 1.0));
  }
  return report;
}

double kappa_for_mass(const BoltzmannModel& model, const MeanFieldSolution& sol, double target_mass) {
  if (!(target_mass >= 0.0 && target_mass <= 1.0)) throw DomainError("target mass must lie in [0, 1]");
  const RatioTable t = ratio_table(model, sol);
  std::vector<std::size_t> order(t.ratio.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return t.ratio[a] < t.ratio[b]; });
  double mass = 0.0;
  for (auto i : order) {
    mass += t.p[i];
    if (mass >= target_mass) return t.ratio[i];
  }
  return t.ratio[order.back()];
}

std::vector<double> log_grid(double lo, double hi, std::size_t points) {
  if (!(lo > 0.0 && hi >= lo) || points == 0) throw DomainError("invalid logarithmic grid");
  std::vector<double> grid(points);
  if (points == 1) {
    grid[0] = lo;
    return grid;
  }
  const double step = std::log(hi / lo) / static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) grid[i] = lo * std::exp(step * static_cast<double>(i));
  grid.back() = hi;
  return grid;
}

std::string model_hash(const BoltzmannModel& model) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : serialize_model(model)) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_kappa_csv(std::ostream& out, const KappaReport& report,
                     const std::map<std::string, std::string>& metadata) {
  for (const auto& [k, v] : metadata) out << "# " << k << '=' << v << '\n';
  out << "# kappa_min=" << report.kappa_min << '\n';
  out << "# kappa_est=" << report.kappa_est << '\n';
  out << "# kl=" << report.kl << '\n';
  out << "kappa,bad_mass\n";
  const auto old = out.precision(17);
  for (const auto& [kappa, mass] : report.bad_mass_curve) out << kappa << ',' << mass << '\n';
  out.precision(old);
}

}  // namespace qbm
