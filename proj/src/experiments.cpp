#include "qbm/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <json.hpp>
#include <mutex>
#include <numeric>
#include <sstream>

#include "qbm/cd.hpp"
#include "qbm/data.hpp"
#include "qbm/error.hpp"
#include "qbm/exact_stats.hpp"
#include "qbm/meanfield.hpp"
#include "qbm/objective.hpp"
#include "qbm/parallel.hpp"
#include "qbm/random.hpp"
#include "qbm/resources.hpp"

namespace qbm {

using nlohmann::json;

std::string_view to_string(Protocol p) {
  switch (p) {
    case Protocol::cd_ml: return "cd-ml";
    case Protocol::ml_cd: return "ml-cd";
    case Protocol::ml_ml: return "ml-ml";
    case Protocol::kappa_scan: return "kappa-scan";
    case Protocol::noise_scan: return "noise-scan";
    case Protocol::full_bm: return "full-bm";
    case Protocol::hedge_scan: return "hedge-scan";
    case Protocol::resources: return "resources";
  }
  return "unknown";
}

Protocol parse_protocol(std::string_view name) {
  for (Protocol p : {Protocol::cd_ml, Protocol::ml_cd, Protocol::ml_ml, Protocol::kappa_scan, Protocol::noise_scan,
                     Protocol::full_bm, Protocol::hedge_scan, Protocol::resources})
    if (to_string(p) == name) return p;
  throw ConfigError("unknown protocol '" + std::string(name) + "'");
}

// ---- configuration ----

namespace {

template <class T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid value for '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const char* where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

void read_trainer(const json& j, TrainerConfig& t) {
  reject_unknown(j,
                 {"learning_rate", "lambda", "max_epochs", "window", "threshold", "min_epochs", "optimizer",
                  "bfgs_tolerance", "bfgs_gradient_tolerance", "bfgs_max_iterations", "cap", "trace_every"},
                 "trainer");
  read(j, "learning_rate", t.learning_rate);
  read(j, "lambda", t.lambda);
  read(j, "max_epochs", t.max_epochs);
  read(j, "window", t.window);
  read(j, "threshold", t.threshold);
  read(j, "min_epochs", t.min_epochs);
  read(j, "bfgs_tolerance", t.bfgs_tolerance);
  read(j, "bfgs_gradient_tolerance", t.bfgs_gradient_tolerance);
  read(j, "bfgs_max_iterations", t.bfgs_max_iterations);
  read(j, "cap", t.cap);
  read(j, "trace_every", t.trace_every);
  if (j.contains("optimizer")) {
    std::string o;
    read(j, "optimizer", o);
    if (o == "ascent")
      t.optimizer = OptimizerKind::ascent;
    else if (o == "bfgs")
      t.optimizer = OptimizerKind::bfgs;
    else
      throw ConfigError("optimizer must be 'ascent' or 'bfgs'");
  }
}

json trainer_json(const TrainerConfig& t) {
  return {{"learning_rate", t.learning_rate},
          {"lambda", t.lambda},
          {"max_epochs", t.max_epochs},
          {"window", t.window},
          {"threshold", t.threshold},
          {"min_epochs", t.min_epochs},
          {"optimizer", t.optimizer == OptimizerKind::bfgs ? "bfgs" : "ascent"},
          {"bfgs_tolerance", t.bfgs_tolerance},
          {"bfgs_gradient_tolerance", t.bfgs_gradient_tolerance},
          {"bfgs_max_iterations", t.bfgs_max_iterations},
          {"cap", t.cap},
          {"trace_every", t.trace_every}};
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown(j,
                 {"protocol", "seed", "model", "data", "trainer", "ml_trainer", "restarts", "cd_k", "verify",
                  "sigmas", "instances", "kappa_grid", "noise_levels", "alphas", "target_mass", "hidden_units",
                  "unit_counts", "n_train", "kappas", "delta"},
                 "config");
  ExperimentConfig c;
  std::string protocol;
  read(j, "protocol", protocol);
  if (!protocol.empty()) c.protocol = parse_protocol(protocol);
  read(j, "seed", c.seed);
  if (j.contains("model")) {
    const json& m = j.at("model");
    reject_unknown(m, {"n_v", "n_h", "topology", "hidden_layers", "weight_sigma", "bias_sigma"}, "model");
    read(m, "n_v", c.model.n_v);
    read(m, "n_h", c.model.n_h);
    if (m.contains("topology")) {
      std::string topology;
      read(m, "topology", topology);
      try {
        c.model.topology = parse_topology(topology);
      } catch (const Error& e) {
        throw ConfigError(e.what());
      }
    }
    read(m, "hidden_layers", c.model.hidden_layers);
    read(m, "weight_sigma", c.model.weight_sigma);
    read(m, "bias_sigma", c.model.bias_sigma);
    if (c.model.topology == Topology::drbm && !m.contains("n_h") && !c.model.hidden_layers.empty())
      c.model.n_h = std::accumulate(c.model.hidden_layers.begin(), c.model.hidden_layers.end(), std::size_t{0});
  }
  if (j.contains("data")) {
    const json& d = j.at("data");
    reject_unknown(d, {"kind", "n_v", "noise", "count", "images", "labels", "digit", "grid"}, "data");
    std::string kind = "synthetic";
    read(d, "kind", kind);
    if (kind == "synthetic")
      c.data.kind = DataSpec::Kind::synthetic;
    else if (kind == "mnist")
      c.data.kind = DataSpec::Kind::mnist;
    else
      throw ConfigError("data.kind must be 'synthetic' or 'mnist'");
    read(d, "n_v", c.data.n_v);
    read(d, "noise", c.data.noise);
    read(d, "count", c.data.count);
    read(d, "images", c.data.images);
    read(d, "labels", c.data.labels);
    read(d, "digit", c.data.digit);
    read(d, "grid", c.data.grid);
    if (c.data.kind == DataSpec::Kind::mnist && !d.contains("count")) c.data.count = 400;
  }
  if (j.contains("trainer")) read_trainer(j.at("trainer"), c.trainer);
  if (j.contains("ml_trainer")) read_trainer(j.at("ml_trainer"), c.ml_trainer);
  read(j, "restarts", c.restarts);
  read(j, "cd_k", c.cd_k);
  read(j, "verify", c.verify);
  read(j, "sigmas", c.sigmas);
  read(j, "instances", c.instances);
  if (j.contains("kappa_grid")) {
    const json& g = j.at("kappa_grid");
    reject_unknown(g, {"lo", "hi", "points"}, "kappa_grid");
    read(g, "lo", c.kappa_lo);
    read(g, "hi", c.kappa_hi);
    read(g, "points", c.kappa_points);
  }
  read(j, "noise_levels", c.noise_levels);
  read(j, "alphas", c.alphas);
  read(j, "target_mass", c.target_mass);
  read(j, "hidden_units", c.hidden_units);
  read(j, "unit_counts", c.unit_counts);
  read(j, "n_train", c.n_train);
  read(j, "kappas", c.kappas);
  read(j, "delta", c.delta);
  c.validate();
  return c;
}

std::string ExperimentConfig::to_json() const {
  json j;
  j["protocol"] = std::string(to_string(protocol));
  j["seed"] = seed;
  j["model"] = {{"n_v", model.n_v},
                {"n_h", model.n_h},
                {"topology", std::string(qbm::to_string(model.topology))},
                {"hidden_layers", model.hidden_layers},
                {"weight_sigma", model.weight_sigma},
                {"bias_sigma", model.bias_sigma}};
  j["data"] = {{"kind", data.kind == DataSpec::Kind::mnist ? "mnist" : "synthetic"},
               {"n_v", data.n_v},
               {"noise", data.noise},
               {"count", data.count},
               {"images", data.images},
               {"labels", data.labels},
               {"digit", data.digit},
               {"grid", data.grid}};
  j["trainer"] = trainer_json(trainer);
  j["ml_trainer"] = trainer_json(ml_trainer);
  j["restarts"] = restarts;
  j["cd_k"] = cd_k;
  j["verify"] = verify;
  j["sigmas"] = sigmas;
  j["instances"] = instances;
  j["kappa_grid"] = {{"lo", kappa_lo}, {"hi", kappa_hi}, {"points", kappa_points}};
  j["noise_levels"] = noise_levels;
  j["alphas"] = alphas;
  j["target_mass"] = target_mass;
  j["hidden_units"] = hidden_units;
  j["unit_counts"] = unit_counts;
  j["n_train"] = n_train;
  j["kappas"] = kappas;
  j["delta"] = delta;
  return j.dump();
}

void ExperimentConfig::validate() const {
  trainer.validate();
  ml_trainer.validate();
  if (model.n_v == 0) throw ConfigError("model.n_v must be positive");
  if (model.topology == Topology::drbm) {
    if (model.hidden_layers.empty()) throw ConfigError("drbm models need hidden_layers");
    if (std::accumulate(model.hidden_layers.begin(), model.hidden_layers.end(), std::size_t{0}) != model.n_h)
      throw ConfigError("hidden_layers must sum to n_h");
  }
  if (!(model.weight_sigma >= 0.0 && model.bias_sigma >= 0.0)) throw ConfigError("sigmas must be non-negative");
  if (cd_k == 0) throw ConfigError("cd_k must be positive");
  if (!(kappa_lo > 0.0 && kappa_hi >= kappa_lo && kappa_points > 0)) throw ConfigError("invalid kappa grid");
  if (!(target_mass > 0.0 && target_mass <= 1.0)) throw ConfigError("target_mass must lie in (0, 1]");
  for (double a : alphas)
    if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("alphas must lie in [0, 1]");
  for (double s : noise_levels)
    if (!(s >= 0.0)) throw ConfigError("noise levels must be non-negative");
  for (double s : sigmas)
    if (!(s >= 0.0)) throw ConfigError("sigmas must be non-negative");
  if (data.kind == DataSpec::Kind::synthetic && !(data.noise >= 0.0 && data.noise <= 0.5))
    throw ConfigError("data.noise must lie in [0, 0.5]");
  if (data.kind == DataSpec::Kind::mnist && (data.images.empty() || data.labels.empty()))
    throw ConfigError("mnist data needs images and labels paths");
  const bool needs_data = protocol == Protocol::cd_ml || protocol == Protocol::ml_cd || protocol == Protocol::ml_ml ||
                          protocol == Protocol::noise_scan || protocol == Protocol::hedge_scan;
  if (needs_data) {
    const std::size_t width = data.kind == DataSpec::Kind::mnist ? data.grid * data.grid : data.n_v;
    if (width != model.n_v) throw ConfigError("data width does not match model.n_v");
    if (restarts == 0 && protocol != Protocol::noise_scan && protocol != Protocol::hedge_scan)
      throw ConfigError("restarts must be positive");
  }
  if ((protocol == Protocol::cd_ml || protocol == Protocol::ml_cd) && model.topology == Topology::full)
    throw ConfigError("contrastive divergence cannot train a full Boltzmann machine");
  if (protocol == Protocol::resources && !(delta > 0.0)) throw ConfigError("delta must be positive");
}

Dataset make_dataset(const DataSpec& spec, std::uint64_t seed) {
  if (spec.kind == DataSpec::Kind::synthetic) return gen_synthetic(spec.n_v, spec.noise, spec.count, seed);
  return subsample_digits(load_idx_images(spec.images), load_idx_labels(spec.labels), spec.digit, spec.grid,
                          spec.count);
}

// ---- statistics ----

Summary summarize(const std::vector<double>& values) {
  Summary s;
  s.n = values.size();
  if (s.n == 0) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(s.n - 1));
  }
  return s;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw DomainError("percentile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

PowerFit fit_power_law(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw DimensionError("fit inputs differ in length");
  double sx = 0, sy = 0, sxx = 0, sxy = 0, n = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0 && y[i] > 0.0)) continue;
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    n += 1;
  }
  if (n < 2 || sxx * n - sx * sx <= 0.0) throw NumericalError("power-law fit needs two distinct positive points");
  PowerFit f;
  f.b = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  f.a = std::exp((sy - f.b * sx) / n);
  return f;
}

// ---- protocols ----

namespace {

// Runs body(i) for every i, capturing the first failure instead of throwing.
// done[i] marks completed indices.
std::exception_ptr run_all(std::size_t n, std::vector<char>& done, const std::function<void(std::size_t)>& body) {
  done.assign(n, 0);
  std::exception_ptr first;
  std::mutex m;
  parallel_for(n, [&](std::size_t i) {
    try {
      body(i);
      done[i] = 1;
    } catch (...) {
      std::lock_guard lock(m);
      if (!first) first = std::current_exception();
    }
  });
  return first;
}

struct Staged {
  BoltzmannModel model;
  double objective = 0.0;
  std::size_t epochs = 0;
};

Staged train_cd(const BoltzmannModel& init, const Dataset& data, const TrainerConfig& trainer, std::size_t k) {
  const LayerwiseResult r = greedy_layerwise_train(init, data, trainer, k);
  Staged s{r.model, oml_objective(r.model, data, trainer.lambda, trainer.cap), 0};
  for (const auto& layer : r.layers) s.epochs += layer.epochs;
  return s;
}

Staged train_ml(const BoltzmannModel& init, const Dataset& data, const TrainerConfig& trainer) {
  const OptimizeResult r = optimize(init, data, trainer);
  return {r.model, r.objective, r.epochs};
}

TrainerConfig seeded(TrainerConfig t, std::uint64_t seed) {
  t.seed = seed;
  return t;
}

CompareResult compare_impl(const ExperimentConfig& c, const Dataset& data, std::exception_ptr& failure) {
  CompareResult out;
  out.protocol = c.protocol;
  std::vector<CompareRow> rows(c.restarts);
  std::vector<char> done;
  failure = run_all(c.restarts, done, [&](std::size_t r) {
    const std::uint64_t seed = derive_seed(c.seed, r);
    const BoltzmannModel init = random_model(c.model, seed);
    const TrainerConfig cd = seeded(c.trainer, derive_seed(seed, 1));
    const TrainerConfig ml = seeded(c.ml_trainer, derive_seed(seed, 2));
    Staged first, second;
    const BoltzmannModel* ml_model = nullptr;
    switch (c.protocol) {
      case Protocol::cd_ml:
        first = train_cd(init, data, cd, c.cd_k);
        second = train_ml(first.model, data, ml);
        ml_model = &second.model;
        break;
      case Protocol::ml_cd:
        first = train_ml(init, data, ml);
        second = train_cd(first.model, data, cd, c.cd_k);
        ml_model = &first.model;
        break;
      default: {
        first = train_ml(init, data, ml);
        TrainerConfig ascent = cd;
        ascent.optimizer = OptimizerKind::ascent;
        second = train_ml(first.model, data, ascent);
        ml_model = &second.model;
        break;
      }
    }
    CompareRow row;
    row.restart = r;
    row.seed = seed;
    row.first_objective = first.objective;
    row.second_objective = second.objective;
    row.improvement_pct = 100.0 * (second.objective - first.objective) / std::abs(first.objective);
    const OptimaDistance d = optima_distance(first.model, second.model);
    row.distance = d.euclidean;
    row.relative_distance = d.relative;
    if (c.verify) {
      const LocalOptimumReport v = verify_local_optimum(*ml_model, data, c.ml_trainer.lambda, 459, 1e-3,
                                                        derive_seed(seed, 3), 0.99, c.ml_trainer.cap);
      row.increase_fraction = v.increase_fraction;
      row.increase_upper_bound = v.upper_bound;
    }
    row.first_epochs = first.epochs;
    row.second_epochs = second.epochs;
    rows[r] = row;
  });
  std::vector<double> f, s;
  for (std::size_t r = 0; r < rows.size(); ++r)
    if (done[r]) {
      out.rows.push_back(rows[r]);
      f.push_back(rows[r].first_objective);
      s.push_back(rows[r].second_objective);
    }
  out.first = summarize(f);
  out.second = summarize(s);
  if (out.first.n > 0) out.mean_improvement_pct = 100.0 * (out.second.mean - out.first.mean) / std::abs(out.first.mean);
  return out;
}

NoiseResult noise_impl(const ExperimentConfig& c, const Dataset& data, std::exception_ptr& failure) {
  NoiseResult out;
  out.sigmas = c.noise_levels;
  const std::size_t L = c.noise_levels.size();
  std::vector<std::vector<NoiseRow>> per_instance(c.instances);
  std::vector<char> done;
  failure = run_all(c.instances, done, [&](std::size_t i) {
    const std::uint64_t seed = derive_seed(c.seed, i);
    const OptimizeResult opt =
        optimize(random_model(c.model, seed), data, seeded(c.ml_trainer, derive_seed(seed, 0)));
    std::vector<NoiseRow> rows;
    for (std::size_t k = 0; k < L; ++k) {
      GradientSource src;
      src.kind = SourceKind::exact_noise;
      src.sigma_noise = c.noise_levels[k];
      TrainerConfig t = seeded(c.trainer, derive_seed(seed, k + 1));
      t.optimizer = OptimizerKind::ascent;
      const OptimizeResult noisy = optimize(opt.model, data, t, src);
      rows.push_back({c.noise_levels[k], i, opt.objective, noisy.objective, std::abs(opt.objective - noisy.objective),
                      noisy.epochs});
    }
    per_instance[i] = std::move(rows);
  });
  std::vector<std::vector<double>> deltas(L);
  for (std::size_t k = 0; k < L; ++k)
    for (std::size_t i = 0; i < c.instances; ++i)
      if (done[i]) {
        out.rows.push_back(per_instance[i][k]);
        deltas[k].push_back(per_instance[i][k].abs_delta);
      }
  std::vector<double> means;
  for (std::size_t k = 0; k < L; ++k) {
    out.per_sigma.push_back(summarize(deltas[k]));
    means.push_back(out.per_sigma.back().mean);
  }
  if (L >= 2 && !out.rows.empty()) out.fit = fit_power_law(c.noise_levels, means);
  return out;
}

std::vector<KappaCurvePoint> build_curve(double group, double sigma, const std::vector<double>& grid,
                                         const std::vector<KappaReport>& reports) {
  std::vector<KappaCurvePoint> out;
  if (reports.empty()) return out;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    std::vector<double> mass;
    for (const auto& r : reports) mass.push_back(r.bad_mass_curve[g].second);
    const Summary s = summarize(mass);
    out.push_back({group, sigma, grid[g], s.mean, percentile(mass, 0.025), percentile(mass, 0.975), s.n});
  }
  return out;
}

MeanFieldOptions mf_options(std::uint64_t seed) {
  MeanFieldOptions o;
  o.seed = seed;
  return o;
}

KappaScanResult kappa_impl(const ExperimentConfig& c, std::exception_ptr& failure) {
  KappaScanResult out;
  const std::vector<double> grid = log_grid(c.kappa_lo, c.kappa_hi, c.kappa_points);
  for (std::size_t si = 0; si < c.sigmas.size(); ++si) {
    ModelSpec spec = c.model;
    spec.weight_sigma = c.sigmas[si];
    std::vector<KappaInstanceRow> rows(c.instances);
    std::vector<KappaReport> reports(c.instances);
    std::vector<char> done;
    std::exception_ptr err = run_all(c.instances, done, [&](std::size_t i) {
      const std::uint64_t seed = derive_seed(derive_seed(c.seed, si), i);
      const BoltzmannModel model = random_model(spec, seed);
      const MeanFieldSolution sol = solve_mean_field(model, std::nullopt, mf_options(seed));
      reports[i] = kappa_report(model, sol, grid);
      rows[i] = {c.sigmas[si],
                 model.n_units(),
                 i,
                 1.0,
                 reports[i].kl,
                 reports[i].kappa_min,
                 reports[i].kappa_est,
                 kappa_for_mass(model, sol, c.target_mass),
                 exact_statistics(model).log_partition,
                 sol.log_Z_Q};
    });
    std::vector<KappaReport> ok;
    for (std::size_t i = 0; i < c.instances; ++i)
      if (done[i]) {
        out.rows.push_back(rows[i]);
        ok.push_back(reports[i]);
      }
    const auto curve = build_curve(c.sigmas[si], c.sigmas[si], grid, ok);
    out.curve.insert(out.curve.end(), curve.begin(), curve.end());
    if (err) {
      failure = err;
      break;
    }
  }
  return out;
}

KappaScanResult hedge_impl(const ExperimentConfig& c, const Dataset& data, std::exception_ptr& failure) {
  KappaScanResult out;
  const std::vector<double> grid = log_grid(c.kappa_lo, c.kappa_hi, c.kappa_points);
  const std::size_t A = c.alphas.size();
  std::vector<std::vector<KappaInstanceRow>> rows(c.instances);
  std::vector<std::vector<KappaReport>> reports(c.instances);
  std::vector<char> done;
  failure = run_all(c.instances, done, [&](std::size_t i) {
    const std::uint64_t seed = derive_seed(c.seed, i);
    const OptimizeResult trained =
        optimize(random_model(c.model, seed), data, seeded(c.ml_trainer, derive_seed(seed, 0)));
    const BoltzmannModel& model = trained.model;
    const MeanFieldSolution sol = solve_mean_field(model, std::nullopt, mf_options(seed));
    const double log_Z = exact_statistics(model).log_partition;
    for (double alpha : c.alphas) {
      const MeanFieldSolution h = hedge(sol, alpha);
      reports[i].push_back(kappa_report(model, h, grid));
      rows[i].push_back({c.model.weight_sigma, model.n_units(), i, alpha, reports[i].back().kl,
                         reports[i].back().kappa_min, reports[i].back().kappa_est,
                         kappa_for_mass(model, h, c.target_mass), log_Z, sol.log_Z_Q});
    }
  });
  for (std::size_t a = 0; a < A; ++a) {
    std::vector<KappaReport> ok;
    for (std::size_t i = 0; i < c.instances; ++i)
      if (done[i]) {
        out.rows.push_back(rows[i][a]);
        ok.push_back(reports[i][a]);
      }
    const auto curve = build_curve(c.alphas[a], c.model.weight_sigma, grid, ok);
    out.curve.insert(out.curve.end(), curve.begin(), curve.end());
  }
  return out;
}

FullBmResult full_training_impl(const ExperimentConfig& c, const Dataset& data, std::exception_ptr& failure) {
  FullBmResult out;
  for (std::size_t hi = 0; hi < c.hidden_units.size(); ++hi) {
    ModelSpec spec = c.model;
    spec.topology = Topology::full;
    spec.n_v = data.n_visible();
    spec.n_h = c.hidden_units[hi];
    spec.hidden_layers.clear();
    std::vector<FullBmRow> rows(c.restarts);
    std::vector<char> done;
    std::exception_ptr err = run_all(c.restarts, done, [&](std::size_t r) {
      const std::uint64_t seed = derive_seed(derive_seed(c.seed, hi), r);
      const OptimizeResult res = optimize(random_model(spec, seed), data, seeded(c.ml_trainer, seed));
      rows[r] = {spec.n_h, r, res.objective, res.epochs};
    });
    std::vector<double> objectives;
    for (std::size_t r = 0; r < c.restarts; ++r)
      if (done[r]) {
        out.rows.push_back(rows[r]);
        objectives.push_back(rows[r].objective);
      }
    out.per_n_h[spec.n_h] = summarize(objectives);
    if (err) {
      failure = err;
      break;
    }
  }
  return out;
}

FullBmResult full_kappa_impl(const ExperimentConfig& c, std::exception_ptr& failure) {
  FullBmResult out;
  const std::vector<double> grid = log_grid(c.kappa_lo, c.kappa_hi, c.kappa_points);
  for (std::size_t ni = 0; ni < c.unit_counts.size() && !failure; ++ni) {
    const std::size_t n = c.unit_counts[ni];
    for (std::size_t si = 0; si < c.sigmas.size() && !failure; ++si) {
      ModelSpec spec;
      spec.topology = Topology::full;
      spec.n_v = n / 2;
      spec.n_h = n - n / 2;
      spec.weight_sigma = c.sigmas[si];
      spec.bias_sigma = c.model.bias_sigma;
      std::vector<KappaReport> reports(c.instances);
      std::vector<KappaInstanceRow> rows(c.instances);
      std::vector<char> done;
      failure = run_all(c.instances, done, [&](std::size_t i) {
        const std::uint64_t seed = derive_seed(derive_seed(derive_seed(c.seed, ni), si), i);
        const BoltzmannModel model = random_model(spec, seed);
        const MeanFieldSolution sol = solve_mean_field(model, std::nullopt, mf_options(seed));
        reports[i] = kappa_report(model, sol, grid);
        rows[i] = {c.sigmas[si], n, i, 1.0, reports[i].kl, reports[i].kappa_min, reports[i].kappa_est,
                   kappa_for_mass(model, sol, c.target_mass), exact_statistics(model).log_partition, sol.log_Z_Q};
      });
      std::vector<KappaReport> ok;
      for (std::size_t i = 0; i < c.instances; ++i)
        if (done[i]) {
          out.kappa.rows.push_back(rows[i]);
          ok.push_back(reports[i]);
        }
      const auto curve = build_curve(static_cast<double>(n), c.sigmas[si], grid, ok);
      out.kappa.curve.insert(out.kappa.curve.end(), curve.begin(), curve.end());
      std::vector<double> ks, bad;
      for (const auto& p : curve)
        if (p.kappa >= 1.0 && 1.0 - p.mean > 1e-12 && 1.0 - p.mean < 1.0) {
          ks.push_back(p.kappa);
          bad.push_back(1.0 - p.mean);
        }
      ExponentRow e{c.sigmas[si], n, 0.0, 0.0};
      if (ks.size() >= 2) {
        const PowerFit f = fit_power_law(ks, bad);
        e.exponent = f.b;
        e.prefactor = f.a;
      }
      out.exponents.push_back(e);
    }
  }
  return out;
}

// ---- CSV output ----

class CsvFile {
 public:
  CsvFile(const std::filesystem::path& path, const ExperimentConfig& c, std::size_t instances) : path_(path) {
    out_ << "# protocol=" << to_string(c.protocol) << '\n';
    out_ << "# seed=" << c.seed << '\n';
    out_ << "# instances=" << instances << '\n';
    out_ << "# config=" << c.to_json() << '\n';
    out_.precision(12);
  }
  std::ostringstream& stream() { return out_; }
  void comment(const std::string& key, const std::string& value) { out_ << "# " << key << '=' << value << '\n'; }
  std::filesystem::path close() {
    std::ofstream f(path_, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + path_.string());
    f << out_.str();
    return path_;
  }

 private:
  std::filesystem::path path_;
  std::ostringstream out_;
};

std::string num(double x) {
  std::ostringstream s;
  s.precision(12);
  s << x;
  return s.str();
}

void write_kappa_outputs(const KappaScanResult& r, const ExperimentConfig& c, const std::filesystem::path& dir,
                         const std::string& prefix, const char* group_name,
                         std::vector<std::filesystem::path>& written) {
  CsvFile inst(dir / (prefix + "_instances.csv"), c, r.rows.size());
  inst.stream() << "sigma,n_units,instance,alpha,kl,kappa_min,kappa_est,kappa_for_target,log_Z,log_Z_Q\n";
  for (const auto& x : r.rows)
    inst.stream() << x.sigma << ',' << x.n_units << ',' << x.instance << ',' << x.alpha << ',' << x.kl << ','
                  << x.kappa_min << ',' << x.kappa_est << ',' << x.kappa_for_target << ',' << x.log_Z << ','
                  << x.log_Z_Q << '\n';
  written.push_back(inst.close());
  CsvFile curve(dir / (prefix + "_curve.csv"), c, r.rows.size());
  curve.stream() << group_name << ",sigma,kappa,mean_mass,lo_2_5,hi_97_5,n\n";
  for (const auto& p : r.curve)
    curve.stream() << p.group << ',' << p.sigma << ',' << p.kappa << ',' << p.mean << ',' << p.lo << ',' << p.hi
                   << ',' << p.n << '\n';
  written.push_back(curve.close());
}

}  // namespace

CompareResult run_compare(const ExperimentConfig& config, const Dataset& data) {
  std::exception_ptr failure;
  CompareResult r = compare_impl(config, data, failure);
  if (failure) std::rethrow_exception(failure);
  return r;
}

NoiseResult run_noise_scan(const ExperimentConfig& config, const Dataset& data) {
  std::exception_ptr failure;
  NoiseResult r = noise_impl(config, data, failure);
  if (failure) std::rethrow_exception(failure);
  return r;
}

KappaScanResult run_kappa_scan(const ExperimentConfig& config) {
  std::exception_ptr failure;
  KappaScanResult r = kappa_impl(config, failure);
  if (failure) std::rethrow_exception(failure);
  return r;
}

KappaScanResult run_hedge_scan(const ExperimentConfig& config, const Dataset& data) {
  std::exception_ptr failure;
  KappaScanResult r = hedge_impl(config, data, failure);
  if (failure) std::rethrow_exception(failure);
  return r;
}

FullBmResult run_full_bm_training(const ExperimentConfig& config, const Dataset& data) {
  std::exception_ptr failure;
  FullBmResult r = full_training_impl(config, data, failure);
  if (failure) std::rethrow_exception(failure);
  return r;
}

FullBmResult run_full_bm_kappa(const ExperimentConfig& config) {
  std::exception_ptr failure;
  FullBmResult r = full_kappa_impl(config, failure);
  if (failure) std::rethrow_exception(failure);
  return r;
}

std::vector<std::filesystem::path> run_experiment(const ExperimentConfig& c, const std::filesystem::path& dir) {
  c.validate();
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  std::exception_ptr failure;
  auto status = [&](CsvFile& f) {
    if (failure) {
      try {
        std::rethrow_exception(failure);
      } catch (const std::exception& e) {
        f.comment("status", std::string("incomplete: ") + e.what());
      }
    }
  };

  switch (c.protocol) {
    case Protocol::cd_ml:
    case Protocol::ml_cd:
    case Protocol::ml_ml: {
      const Dataset data = make_dataset(c.data, derive_seed(c.seed, 0xDA7A));
      const CompareResult r = compare_impl(c, data, failure);
      CsvFile f(dir / ("compare_" + std::string(to_string(c.protocol)) + ".csv"), c, r.rows.size());
      status(f);
      f.comment("mean_first", num(r.first.mean));
      f.comment("sd_first", num(r.first.sd));
      f.comment("mean_second", num(r.second.mean));
      f.comment("sd_second", num(r.second.sd));
      f.comment("mean_improvement_pct", num(r.mean_improvement_pct));
      f.stream() << "restart,seed,first_objective,second_objective,improvement_pct,distance,relative_distance,"
                    "increase_fraction,increase_upper_bound,first_epochs,second_epochs\n";
      for (const auto& x : r.rows)
        f.stream() << x.restart << ',' << x.seed << ',' << x.first_objective << ',' << x.second_objective << ','
                   << x.improvement_pct << ',' << x.distance << ',' << x.relative_distance << ','
                   << x.increase_fraction << ',' << x.increase_upper_bound << ',' << x.first_epochs << ','
                   << x.second_epochs << '\n';
      written.push_back(f.close());
      break;
    }
    case Protocol::noise_scan: {
      const Dataset data = make_dataset(c.data, derive_seed(c.seed, 0xDA7A));
      const NoiseResult r = noise_impl(c, data, failure);
      CsvFile f(dir / "noise_scan.csv", c, r.rows.size());
      status(f);
      f.stream() << "sigma,instance,optimum_objective,noisy_objective,abs_delta,epochs\n";
      for (const auto& x : r.rows)
        f.stream() << x.sigma << ',' << x.instance << ',' << x.optimum_objective << ',' << x.noisy_objective << ','
                   << x.abs_delta << ',' << x.epochs << '\n';
      written.push_back(f.close());
      CsvFile s(dir / "noise_summary.csv", c, r.per_sigma.empty() ? 0 : r.per_sigma.front().n);
      status(s);
      s.comment("fit_a", num(r.fit.a));
      s.comment("fit_b", num(r.fit.b));
      s.stream() << "sigma,mean_abs_delta,sd_abs_delta,n\n";
      for (std::size_t k = 0; k < r.per_sigma.size(); ++k)
        s.stream() << r.sigmas[k] << ',' << r.per_sigma[k].mean << ',' << r.per_sigma[k].sd << ','
                   << r.per_sigma[k].n << '\n';
      written.push_back(s.close());
      break;
    }
    case Protocol::kappa_scan: {
      const KappaScanResult r = kappa_impl(c, failure);
      write_kappa_outputs(r, c, dir, "kappa", "sigma_group", written);
      break;
    }
    case Protocol::hedge_scan: {
      const Dataset data = make_dataset(c.data, derive_seed(c.seed, 0xDA7A));
      const KappaScanResult r = hedge_impl(c, data, failure);
      write_kappa_outputs(r, c, dir, "hedge", "alpha", written);
      break;
    }
    case Protocol::full_bm: {
      FullBmResult train;
      if (!c.hidden_units.empty() && c.restarts > 0) {
        const Dataset data = make_dataset(c.data, derive_seed(c.seed, 0xDA7A));
        train = full_training_impl(c, data, failure);
      }
      CsvFile f(dir / "full_bm_training.csv", c, train.rows.size());
      status(f);
      for (const auto& [n_h, s] : train.per_n_h)
        f.comment("mean_n_h_" + std::to_string(n_h), num(s.mean) + " sd=" + num(s.sd) + " n=" + std::to_string(s.n));
      f.stream() << "n_h,restart,objective,epochs\n";
      for (const auto& x : train.rows)
        f.stream() << x.n_h << ',' << x.restart << ',' << x.objective << ',' << x.epochs << '\n';
      written.push_back(f.close());
      if (!failure && !c.unit_counts.empty()) {
        const FullBmResult k = full_kappa_impl(c, failure);
        write_kappa_outputs(k.kappa, c, dir, "full_bm_kappa", "n_units", written);
        CsvFile e(dir / "full_bm_exponents.csv", c, k.exponents.size());
        status(e);
        e.stream() << "sigma,n_units,exponent,prefactor\n";
        for (const auto& x : k.exponents)
          e.stream() << x.sigma << ',' << x.n_units << ',' << x.exponent << ',' << x.prefactor << '\n';
        written.push_back(e.close());
      }
      break;
    }
    case Protocol::resources: {
      const BoltzmannModel model = structure_of(c.model);
      CsvFile f(dir / "resources.csv", c, c.n_train.size() * c.kappas.size() * 2);
      f.comment("formula_estimate", "true");
      f.stream() << "mode,n_train,kappa,kappa_x_max,delta,operation_estimate,operation_estimate_proof_form,"
                    "oracle_queries,expected_preps_no_amplification,expected_preps_with_amplification,"
                    "depth_geqs,depth_geqae,depth_cd,qubits\n";
      for (EstimatorMode mode : {EstimatorMode::geqs, EstimatorMode::geqae})
        for (double n : c.n_train)
          for (double kappa : c.kappas) {
            ResourceQuery q;
            q.kappa = kappa;
            q.kappa_x_max = kappa;
            q.n_train = n;
            q.mode = mode;
            q.delta = c.delta;
            q.cd_steps = c.cd_k;
            const ResourceReport r = resource_report(model, q);
            f.stream() << (mode == EstimatorMode::geqs ? "geqs" : "geqae") << ',' << n << ',' << kappa << ','
                       << kappa << ',' << c.delta << ',' << r.operation_estimate << ','
                       << r.operation_estimate_proof_form << ',' << r.oracle_queries << ','
                       << r.expected_preps_no_amplification << ',' << r.expected_preps_with_amplification << ','
                       << r.depth_estimate_geqs << ',' << r.depth_estimate_geqae << ',' << r.depth_estimate_cd
                       << ',' << r.qubit_estimate << '\n';
          }
      written.push_back(f.close());
      break;
    }
  }
  if (failure) std::rethrow_exception(failure);
  return written;
}

}  // namespace qbm
