#include "qbm/optimize.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <deque>
#include <ostream>

#include "qbm/cd.hpp"
#include "qbm/error.hpp"
#include "qbm/estimators.hpp"
#include "qbm/objective.hpp"
#include "qbm/random.hpp"

namespace qbm {

void TrainerConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
  if (window == 0) throw ConfigError("stopping window must be positive");
  if (!(threshold >= 0.0)) throw ConfigError("stopping threshold must be non-negative");
  if (max_epochs == 0) throw ConfigError("max_epochs must be positive");
  if (!(bfgs_tolerance > 0.0)) throw ConfigError("BFGS tolerance must be positive");
  if (trace_every == 0) throw ConfigError("trace_every must be positive");
}

namespace {

double norm(const std::vector<double>& g) {
  double s = 0.0;
  for (double x : g) s += x * x;
  return std::sqrt(s);
}

void require_finite(double objective, const std::vector<double>& theta, std::size_t epoch) {
  bool ok = std::isfinite(objective);
  for (double x : theta) ok = ok && std::isfinite(x);
  if (!ok)
    throw NumericalError("training diverged at epoch " + std::to_string(epoch) + " (objective " +
                         std::to_string(objective) + ")");
}

std::vector<double> source_gradient(const BoltzmannModel& model, const Dataset& data, const TrainerConfig& cfg,
                                    const GradientSource& src, std::size_t epoch, Rng& noise_rng,
                                    double* exact_objective) {
  const std::uint64_t seed = derive_seed(cfg.seed, epoch);
  switch (src.kind) {
    case SourceKind::exact:
    case SourceKind::exact_noise: {
      ObjectiveAndGradient og = objective_and_gradient(model, data, cfg.lambda, cfg.cap);
      *exact_objective = og.objective;
      std::vector<double> g = og.gradient.flat();
      if (src.kind == SourceKind::exact_noise)
        for (double& x : g) x += src.sigma_noise * standard_normal(noise_rng);
      return g;
    }
    case SourceKind::geqs: {
      GeqsOptions o;
      o.lambda = cfg.lambda;
      o.kappa_data = src.kappa_data;
      o.cap = cfg.cap;
      return geqs_gradient(model, data, src.kappa, src.samples, seed, o).flat();
    }
    case SourceKind::geqae: {
      GeqaeOptions o;
      o.lambda = cfg.lambda;
      o.kappa_data = src.kappa_data;
      o.L = src.L;
      o.p_upper = src.p_upper;
      o.cap = cfg.cap;
      return geqae_full_gradient(model, data, src.kappa, seed, o).flat();
    }
    case SourceKind::cd_k:
      return cd_k_gradient(model, data, src.cd_steps, seed, cfg.lambda).flat();
  }
  throw ConfigError("unknown gradient source");
}

OptimizeResult run_ascent(const BoltzmannModel& init, const Dataset& data, const TrainerConfig& cfg,
                          const GradientSource& src) {
  OptimizeResult out;
  BoltzmannModel model = init;
  std::vector<double> theta = model.parameters();
  Rng noise_rng(derive_seed(cfg.seed, 0xA5A5A5A5ULL));
  const std::size_t W = cfg.window;
  std::deque<double> recent;  // last 2W objective values
  double sum_new = 0.0, sum_old = 0.0;

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    double objective = std::numeric_limits<double>::quiet_NaN();
    const std::vector<double> g = source_gradient(model, data, cfg, src, epoch, noise_rng, &objective);
    if (std::isnan(objective)) objective = oml_objective(model, data, cfg.lambda, cfg.cap);
    require_finite(objective, theta, epoch);
    if (epoch % cfg.trace_every == 0) out.trace.push_back({epoch, objective, norm(g)});

    // Window sums: sum_new over the last W values, sum_old over the W before.
    recent.push_back(objective);
    sum_new += objective;
    if (recent.size() > W) {
      const double moved = recent[recent.size() - W - 1];
      sum_new -= moved;
      sum_old += moved;
    }
    if (recent.size() > 2 * W) {
      sum_old -= recent.front();
      recent.pop_front();
    }
    out.epochs = epoch + 1;
    if (epoch + 1 >= cfg.min_epochs && recent.size() == 2 * W) {
      const double avg_new = sum_new / static_cast<double>(W);
      const double avg_old = sum_old / static_cast<double>(W);
      if (std::abs(avg_new - avg_old) <= cfg.threshold * std::abs(avg_old)) {
        out.converged = true;
        break;
      }
    }
    for (std::size_t c = 0; c < theta.size(); ++c) theta[c] += cfg.learning_rate * g[c];
    require_finite(objective, theta, epoch);
    model.set_parameters(theta);
  }
  out.model = model;
  out.objective = oml_objective(model, data, cfg.lambda, cfg.cap);
  if (out.trace.empty() || out.trace.back().epoch + 1 != out.epochs)
    out.trace.push_back({out.epochs, out.objective, 0.0});
  return out;
}

OptimizeResult run_bfgs(const BoltzmannModel& init, const Dataset& data, const TrainerConfig& cfg) {
  using Vec = Eigen::VectorXd;
  BoltzmannModel model = init;
  const auto n = static_cast<Eigen::Index>(model.parameter_count());
  auto evaluate = [&](const Vec& x, Vec& grad) {
    model.set_parameters(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
    ObjectiveAndGradient og = objective_and_gradient(model, data, cfg.lambda, cfg.cap);
    const std::vector<double> g = og.gradient.flat();
    grad = -Eigen::Map<const Vec>(g.data(), n);  // minimize -O_ML
    return -og.objective;
  };

  std::vector<double> theta0 = init.parameters();
  Vec x = Eigen::Map<const Vec>(theta0.data(), n);
  Vec g(n);
  double f = evaluate(x, g);
  require_finite(-f, theta0, 0);
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);

  OptimizeResult out;
  out.trace.push_back({0, -f, g.norm()});
  for (std::size_t it = 1; it <= cfg.bfgs_max_iterations; ++it) {
    Vec p = -H * g;
    double slope = g.dot(p);
    if (!(slope < 0.0)) {
      H.setIdentity();
      p = -g;
      slope = -g.squaredNorm();
    }
    double step = 1.0;
    Vec x_new(n), g_new(n);
    double f_new = f;
    bool accepted = false;
    for (int k = 0; k < 60; ++k) {
      x_new = x + step * p;
      f_new = evaluate(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    out.epochs = it;
    if (!accepted) {
      out.converged = g.norm() < cfg.bfgs_gradient_tolerance;
      break;
    }
    const Vec s = x_new - x;
    const Vec y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Vec Hy = H * y;
      H += (rho * rho * y.dot(Hy) + rho) * (s * s.transpose()) - rho * (Hy * s.transpose() + s * Hy.transpose());
    }
    const double change = std::abs(f_new - f);
    x = x_new;
    g = g_new;
    f = f_new;
    if (it % cfg.trace_every == 0) out.trace.push_back({it, -f, g.norm()});
    if (change < cfg.bfgs_tolerance && g.norm() < cfg.bfgs_gradient_tolerance) {
      out.converged = true;
      break;
    }
  }
  std::vector<double> theta(x.data(), x.data() + n);
  require_finite(-f, theta, out.epochs);
  model.set_parameters(theta);
  out.model = model;
  out.objective = -f;
  if (out.trace.back().epoch != out.epochs) out.trace.push_back({out.epochs, -f, g.norm()});
  return out;
}

}  // namespace

OptimizeResult optimize(const BoltzmannModel& init, const Dataset& data, const TrainerConfig& config,
                        const GradientSource& source) {
  config.validate();
  if (data.n_visible() != init.n_visible()) throw DimensionError("data width does not match n_v");
  if (source.kind == SourceKind::exact_noise && !(source.sigma_noise >= 0.0))
    throw ConfigError("noise level must be non-negative");
  const Dataset compact = data.compressed();
  if (config.optimizer == OptimizerKind::bfgs) {
    if (source.kind != SourceKind::exact) throw ConfigError("BFGS requires exact gradients");
    return run_bfgs(init, compact, config);
  }
  return run_ascent(init, compact, config, source);
}

void write_trace_csv(std::ostream& out, const std::vector<TracePoint>& trace,
                     const std::map<std::string, std::string>& metadata) {
  for (const auto& [k, v] : metadata) out << "# " << k << '=' << v << '\n';
  out << "epoch,objective,gradient_norm\n";
  const auto old = out.precision(17);
  for (const auto& t : trace) out << t.epoch << ',' << t.objective << ',' << t.gradient_norm << '\n';
  out.precision(old);
}

double binomial_upper_bound(std::size_t x, std::size_t n, double confidence) {
  if (n == 0 || x > n) throw DomainError("invalid binomial counts");
  if (!(confidence > 0.0 && confidence < 1.0)) throw DomainError("confidence must lie in (0, 1)");
  if (x == n) return 1.0;
  const double alpha = 1.0 - confidence;
  auto cdf = [&](double p) {
    double s = 0.0;
    for (std::size_t k = 0; k <= x; ++k) {
      const double lk = std::lgamma(double(n) + 1) - std::lgamma(double(k) + 1) - std::lgamma(double(n - k) + 1) +
                        double(k) * std::log(p) + double(n - k) * std::log1p(-p);
      s += std::exp(lk);
    }
    return s;
  };
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (cdf(mid) > alpha ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

LocalOptimumReport verify_local_optimum(const BoltzmannModel& model, const Dataset& data, double lambda,
                                        std::size_t n_trials, double step, std::uint64_t seed, double confidence,
                                        std::size_t cap) {
  if (n_trials == 0) throw DomainError("at least one trial is required");
  const Dataset compact = data.compressed();
  const double base = oml_objective(model, compact, lambda, cap);
  const std::vector<double> theta = model.parameters();
  Rng rng(seed);
  LocalOptimumReport report;
  report.trials = n_trials;
  report.confidence = confidence;
  BoltzmannModel probe = model;
  for (std::size_t t = 0; t < n_trials; ++t) {
    const auto c = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(theta.size()));
    const double sign = uniform01(rng) < 0.5 ? -1.0 : 1.0;
    std::vector<double> moved = theta;
    moved[c] += sign * step;
    probe.set_parameters(moved);
    const double delta = oml_objective(probe, compact, lambda, cap) - base;
    if (delta > 0.0) {
      ++report.increases;
      report.max_increase = std::max(report.max_increase, delta);
    }
  }
  report.increase_fraction = static_cast<double>(report.increases) / static_cast<double>(n_trials);
  report.upper_bound = binomial_upper_bound(report.increases, n_trials, confidence);
  report.consistent_with_optimum = report.upper_bound < 1.0 - confidence;
  return report;
}

OptimaDistance optima_distance(const BoltzmannModel& a, const BoltzmannModel& b) {
  if (a.n_visible() != b.n_visible() || a.n_hidden() != b.n_hidden() || a.topology() != b.topology() ||
      a.edge_count() != b.edge_count())
    throw DimensionError("models have different structures");
  for (std::size_t e = 0; e < a.edge_count(); ++e)
    if (a.edges()[e].a != b.edges()[e].a || a.edges()[e].b != b.edges()[e].b)
      throw DimensionError("models have different structures");
  const std::vector<double> pa = a.parameters(), pb = b.parameters();
  double diff = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    diff += (pa[i] - pb[i]) * (pa[i] - pb[i]);
    nb += pb[i] * pb[i];
  }
  OptimaDistance d;
  d.euclidean = std::sqrt(diff);
  d.relative = nb > 0.0 ? d.euclidean / std::sqrt(nb) : (diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
  return d;
}

}  // namespace qbm
