#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qbm/dataset.hpp"
#include "qbm/model.hpp"
#include "qbm/optimize.hpp"

namespace qbm {

enum class Protocol { cd_ml, ml_cd, ml_ml, kappa_scan, noise_scan, full_bm, hedge_scan, resources };

std::string_view to_string(Protocol p);
Protocol parse_protocol(std::string_view name);

struct DataSpec {
  enum class Kind { synthetic, mnist } kind = Kind::synthetic;
  std::size_t n_v = 6;
  double noise = 0.0;
  std::size_t count = 10000;
  std::string images;
  std::string labels;
  int digit = 1;
  std::size_t grid = 3;
};

/// Everything a protocol reads. Unused fields are ignored by a protocol.
struct ExperimentConfig {
  Protocol protocol = Protocol::cd_ml;
  std::uint64_t seed = 1;
  ModelSpec model{6, 4, Topology::drbm, {2, 2}, 0.1325, 1.0};
  DataSpec data;
  /// Used for CD and noisy gradient ascent.
  TrainerConfig trainer;
  /// Used for noiseless ML training.
  TrainerConfig ml_trainer = [] {
    TrainerConfig t;
    t.optimizer = OptimizerKind::bfgs;
    return t;
  }();
  std::size_t restarts = 100;
  std::size_t cd_k = 1;
  bool verify = true;
  std::vector<double> sigmas{0.1325, 0.265, 0.53};
  std::size_t instances = 100;
  double kappa_lo = 1.0;
  double kappa_hi = 1000.0;
  std::size_t kappa_points = 61;
  std::vector<double> noise_levels{0.01, 0.02, 0.05, 0.1, 0.2, 0.5};
  std::vector<double> alphas{0.0, 0.5, 1.0};
  double target_mass = 0.999;
  std::vector<std::size_t> hidden_units{1, 2, 3, 4};
  std::vector<std::size_t> unit_counts{6, 8, 10};
  std::vector<double> n_train{1e2, 1e3, 1e4, 1e5, 1e6};
  std::vector<double> kappas{1.0, 4.0, 16.0, 64.0};
  double delta = 0.01;

  /// Parses JSON text; missing keys keep their defaults. Throws ConfigError.
  static ExperimentConfig from_json(std::string_view text);
  std::string to_json() const;
  void validate() const;
};

Dataset make_dataset(const DataSpec& spec, std::uint64_t seed);

struct Summary {
  std::size_t n = 0;
  double mean = 0.0;
  /// Sample standard deviation (n - 1 denominator); 0 for n < 2.
  double sd = 0.0;
};

Summary summarize(const std::vector<double>& values);
/// Linear-interpolation percentile, q in [0, 1].
double percentile(std::vector<double> values, double q);

struct PowerFit {
  double a = 0.0;
  double b = 0.0;
};

/// Least-squares fit of log y = log a + b log x over the points with y > 0.
PowerFit fit_power_law(const std::vector<double>& x, const std::vector<double>& y);

// ---- CD-ML / ML-CD / ML-ML ----

struct CompareRow {
  std::size_t restart = 0;
  std::uint64_t seed = 0;
  double first_objective = 0.0;
  double second_objective = 0.0;
  /// 100 (second - first) / |first|.
  double improvement_pct = 0.0;
  double distance = 0.0;
  double relative_distance = 0.0;
  double increase_fraction = 0.0;
  double increase_upper_bound = 0.0;
  std::size_t first_epochs = 0;
  std::size_t second_epochs = 0;
};

struct CompareResult {
  Protocol protocol = Protocol::cd_ml;
  std::vector<CompareRow> rows;
  Summary first;
  Summary second;
  /// 100 (mean second - mean first) / |mean first|.
  double mean_improvement_pct = 0.0;
};

/// Two-stage training from `restarts` random initializations. CD stages use
/// greedy layer-wise CD-k with `config.trainer`; ML stages use exact
/// gradients with `config.ml_trainer` (ML-ML runs gradient ascent with
/// `config.trainer` as its second stage).
CompareResult run_compare(const ExperimentConfig& config, const Dataset& data);

// ---- noise scan ----

struct NoiseRow {
  double sigma = 0.0;
  std::size_t instance = 0;
  double optimum_objective = 0.0;
  double noisy_objective = 0.0;
  double abs_delta = 0.0;
  std::size_t epochs = 0;
};

struct NoiseResult {
  std::vector<NoiseRow> rows;
  std::vector<double> sigmas;
  std::vector<Summary> per_sigma;
  PowerFit fit;
};

/// Trains `instances` ML optima, restarts noisy exact-gradient ascent from
/// each at every noise level and fits mean |delta O_ML| = a sigma^b.
NoiseResult run_noise_scan(const ExperimentConfig& config, const Dataset& data);

// ---- kappa scans ----

struct KappaInstanceRow {
  double sigma = 0.0;
  std::size_t n_units = 0;
  std::size_t instance = 0;
  /// Hedging parameter (1 for unhedged scans).
  double alpha = 1.0;
  double kl = 0.0;
  double kappa_min = 0.0;
  double kappa_est = 0.0;
  double kappa_for_target = 0.0;
  double log_Z = 0.0;
  double log_Z_Q = 0.0;
};

struct KappaCurvePoint {
  /// Group key: sigma for kappa scans, alpha for hedge scans, unit count for
  /// full-BM scans.
  double group = 0.0;
  double sigma = 0.0;
  double kappa = 0.0;
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  std::size_t n = 0;
};

struct KappaScanResult {
  std::vector<KappaInstanceRow> rows;
  std::vector<KappaCurvePoint> curve;
};

/// Random instances of `config.model` at each weight sigma.
KappaScanResult run_kappa_scan(const ExperimentConfig& config);

/// ML-trained instances of `config.model` hedged at each alpha.
KappaScanResult run_hedge_scan(const ExperimentConfig& config, const Dataset& data);

// ---- full Boltzmann machines ----

struct FullBmRow {
  std::size_t n_h = 0;
  std::size_t restart = 0;
  double objective = 0.0;
  std::size_t epochs = 0;
};

struct ExponentRow {
  double sigma = 0.0;
  std::size_t n_units = 0;
  /// Fitted f in (1 - good mass) ~ kappa^f.
  double exponent = 0.0;
  double prefactor = 0.0;
};

struct FullBmResult {
  std::vector<FullBmRow> rows;
  std::map<std::size_t, Summary> per_n_h;
  KappaScanResult kappa;
  std::vector<ExponentRow> exponents;
};

/// ML training of full BMs with n_v = data width and each n_h in
/// `config.hidden_units`.
FullBmResult run_full_bm_training(const ExperimentConfig& config, const Dataset& data);
/// Random full BMs over each unit count and sigma, with bad-mass exponent fits.
FullBmResult run_full_bm_kappa(const ExperimentConfig& config);

/// Executes `config.protocol`, writing CSV artifacts into `out_dir`, and
/// returns their paths. Rows completed before a failure are written before
/// the error propagates.
std::vector<std::filesystem::path> run_experiment(const ExperimentConfig& config,
                                                  const std::filesystem::path& out_dir);

}  // namespace qbm
