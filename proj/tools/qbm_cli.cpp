// Command-line front end: data preparation, training and experiment protocols.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "qbm/data.hpp"
#include "qbm/error.hpp"
#include "qbm/experiments.hpp"
#include "qbm/optimize.hpp"
#include "qbm/parallel.hpp"
#include "qbm/random.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::size_t threads = 1;
};

qbm::ExperimentConfig load_config(const Globals& g) {
  qbm::ExperimentConfig c;
  if (!g.config_path.empty()) {
    std::ifstream in(g.config_path);
    if (!in) throw qbm::ConfigError("cannot read config " + g.config_path);
    std::stringstream text;
    text << in.rdbuf();
    c = qbm::ExperimentConfig::from_json(text.str());
  }
  if (g.seed) c.seed = *g.seed;
  return c;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw qbm::ConfigError("cannot write " + path.string());
  f << content;
}

void report(const std::vector<std::filesystem::path>& paths) {
  for (const auto& p : paths) std::cout << p.string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Boltzmann machine training with simulated quantum Gibbs sampling"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "JSON experiment configuration");
  app.add_option("--seed", g.seed, "Override the configured seed");
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads (0 = all cores)")->capture_default_str();

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Write the synthetic training set");
  std::size_t gen_nv = 6, gen_count = 10000;
  double gen_noise = 0.0;
  gen->add_option("--n-v", gen_nv, "Visible units")->capture_default_str();
  gen->add_option("--noise", gen_noise, "Bit-flip probability")->capture_default_str();
  gen->add_option("--count", gen_count, "Number of vectors")->capture_default_str();

  // mnist-prep
  auto* mnist = app.add_subcommand("mnist-prep", "Coarse-grain and binarize one digit class of an IDX archive");
  std::string images, labels;
  int digit = 1;
  std::size_t grid = 3, mnist_count = 400;
  mnist->add_option("--images", images, "IDX image file")->required();
  mnist->add_option("--labels", labels, "IDX label file")->required();
  mnist->add_option("--digit", digit, "Digit to keep")->capture_default_str();
  mnist->add_option("--grid", grid, "Blocks per side")->capture_default_str();
  mnist->add_option("--count", mnist_count, "Number of vectors")->capture_default_str();

  // train
  auto* train = app.add_subcommand("train", "Train one model from the configured initialization");
  std::string source = "exact";
  double sigma_noise = 0.0, kappa = 1.0;
  std::size_t samples = 1000, L = 0;
  bool bfgs = false;
  train->add_option("--source", source, "exact | noise | geqs | geqae | cd")->capture_default_str();
  train->add_option("--sigma-noise", sigma_noise, "Gradient noise for --source noise");
  train->add_option("--kappa", kappa, "Kappa for geqs / geqae");
  train->add_option("--samples", samples, "Samples per expectation for geqs");
  train->add_option("--L", L, "Amplitude-estimation iterations for geqae (0 = exact)");
  train->add_flag("--bfgs", bfgs, "Use BFGS (exact source only)");

  // compare and scans
  auto* compare = app.add_subcommand("compare", "CD-ML, ML-CD or ML-ML comparison");
  std::string protocol;
  compare->add_option("--protocol", protocol, "cd-ml | ml-cd | ml-ml");
  auto* kappa_scan = app.add_subcommand("kappa-scan", "Kappa and KL statistics of random models");
  auto* noise_scan = app.add_subcommand("noise-scan", "Objective error versus gradient noise");
  auto* hedge_scan = app.add_subcommand("hedge-scan", "Kappa requirements of hedged mean-field states");
  auto* full_bm = app.add_subcommand("full-bm", "Full Boltzmann machine training and kappa scaling");
  auto* resources = app.add_subcommand("resources", "Evaluate the cost-scaling formulas");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    qbm::set_thread_count(g.threads);
    const std::filesystem::path out = g.out;
    qbm::ExperimentConfig config = load_config(g);

    if (gen->parsed()) {
      const qbm::Dataset data = qbm::gen_synthetic(gen_nv, gen_noise, gen_count, config.seed);
      std::ostringstream s;
      qbm::write_dataset_csv(s, data,
                             {{"n_v", std::to_string(gen_nv)},
                              {"noise", std::to_string(gen_noise)},
                              {"count", std::to_string(gen_count)},
                              {"seed", std::to_string(config.seed)}});
      write_file(out / "synthetic.csv", s.str());
      report({out / "synthetic.csv"});
    } else if (mnist->parsed()) {
      const qbm::Dataset data =
          qbm::subsample_digits(qbm::load_idx_images(images), qbm::load_idx_labels(labels), digit, grid, mnist_count);
      std::ostringstream s;
      qbm::write_dataset_csv(s, data,
                             {{"digit", std::to_string(digit)},
                              {"grid", std::to_string(grid)},
                              {"count", std::to_string(mnist_count)}});
      write_file(out / "mnist.csv", s.str());
      report({out / "mnist.csv"});
    } else if (train->parsed()) {
      config.validate();
      const qbm::Dataset data = qbm::make_dataset(config.data, qbm::derive_seed(config.seed, 0xDA7A));
      if (data.n_visible() != config.model.n_v) throw qbm::ConfigError("data width does not match model.n_v");
      qbm::GradientSource src;
      if (source == "exact")
        src.kind = qbm::SourceKind::exact;
      else if (source == "noise")
        src.kind = qbm::SourceKind::exact_noise;
      else if (source == "geqs")
        src.kind = qbm::SourceKind::geqs;
      else if (source == "geqae")
        src.kind = qbm::SourceKind::geqae;
      else if (source == "cd")
        src.kind = qbm::SourceKind::cd_k;
      else
        throw qbm::ConfigError("unknown gradient source '" + source + "'");
      src.sigma_noise = sigma_noise;
      src.kappa = kappa;
      src.samples = samples;
      if (L > 0) src.L = L;
      src.cd_steps = config.cd_k;
      qbm::TrainerConfig trainer = bfgs ? config.ml_trainer : config.trainer;
      trainer.optimizer = bfgs ? qbm::OptimizerKind::bfgs : qbm::OptimizerKind::ascent;
      trainer.seed = config.seed;
      const qbm::BoltzmannModel init = qbm::random_model(config.model, config.seed);
      const qbm::OptimizeResult result = qbm::optimize(init, data, trainer, src);
      std::ostringstream trace;
      qbm::write_trace_csv(trace, result.trace,
                           {{"source", source},
                            {"seed", std::to_string(config.seed)},
                            {"converged", result.converged ? "true" : "false"},
                            {"config", config.to_json()}});
      write_file(out / "trace.csv", trace.str());
      write_file(out / "model.json", qbm::serialize_model(result.model));
      std::cout << "objective=" << result.objective << " epochs=" << result.epochs << '\n';
      report({out / "trace.csv", out / "model.json"});
    } else {
      if (compare->parsed()) {
        if (!protocol.empty()) config.protocol = qbm::parse_protocol(protocol);
        if (config.protocol != qbm::Protocol::cd_ml && config.protocol != qbm::Protocol::ml_cd &&
            config.protocol != qbm::Protocol::ml_ml)
          config.protocol = qbm::Protocol::cd_ml;
      } else if (kappa_scan->parsed()) {
        config.protocol = qbm::Protocol::kappa_scan;
      } else if (noise_scan->parsed()) {
        config.protocol = qbm::Protocol::noise_scan;
      } else if (hedge_scan->parsed()) {
        config.protocol = qbm::Protocol::hedge_scan;
      } else if (full_bm->parsed()) {
        config.protocol = qbm::Protocol::full_bm;
      } else if (resources->parsed()) {
        config.protocol = qbm::Protocol::resources;
      }
      report(qbm::run_experiment(config, out));
    }
  } catch (const qbm::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const qbm::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
