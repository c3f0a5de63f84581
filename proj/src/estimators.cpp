#include "qbm/estimators.hpp"

#include <algorithm>
#include <cmath>

#include "qbm/amplitude.hpp"
#include "qbm/error.hpp"
#include "qbm/parallel.hpp"
#include "qbm/qprep.hpp"
#include "qbm/random.hpp"

namespace qbm {

namespace {

// Value of flat component c (edge product or unit value) in a packed state.
double component_value(const BoltzmannModel& model, std::size_t c, State s) {
  if (c < model.edge_count()) {
    const auto& e = model.edges()[c];
    return static_cast<double>(((s >> e.a) & 1U) & ((s >> e.b) & 1U));
  }
  return static_cast<double>((s >> (c - model.edge_count())) & 1U);
}

struct Accumulator {
  std::vector<double> sum, sumsq;
  double n = 0.0;
  explicit Accumulator(std::size_t p) : sum(p, 0.0), sumsq(p, 0.0) {}
  void add(const BoltzmannModel& model, State s) {
    for (std::size_t c = 0; c < sum.size(); ++c) {
      const double x = component_value(model, c, s);
      sum[c] += x;
      sumsq[c] += x * x;
    }
    n += 1.0;
  }
  double mean(std::size_t c) const { return sum[c] / n; }
  double variance(std::size_t c) const {
    if (n < 2.0) return 0.0;
    const double m = mean(c);
    return std::max(0.0, (sumsq[c] - n * m * m) / (n - 1.0));
  }
};

Moments to_moments(const BoltzmannModel& model, const std::vector<double>& flat) {
  Moments m;
  m.edge.assign(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(model.edge_count()));
  m.unit.assign(flat.begin() + static_cast<std::ptrdiff_t>(model.edge_count()), flat.end());
  return m;
}

// Expectation of every flat component under a post-selected distribution.
std::vector<double> prep_expectations(const BoltzmannModel& model, const PrepModel& prep) {
  std::vector<double> out(model.parameter_count(), 0.0);
  for (std::uint64_t i = 0; i < prep.size(); ++i) {
    const double p = prep.postselected[i];
    if (p == 0.0) continue;
    const State s = prep.state(i);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += p * component_value(model, c, s);
  }
  return out;
}

struct DataRows {
  Dataset rows;
  std::vector<double> counts;
};

// Distinct binary rows and the number of clamped draws each receives.
DataRows assign_data_samples(const BoltzmannModel& model, const Dataset& data, std::size_t n_samples) {
  if (data.n_visible() != model.n_visible()) throw DimensionError("data width does not match n_v");
  if (data.empty()) throw DimensionError("dataset is empty");
  if (!data.is_binary()) throw DomainError("sampling estimators require binary data");
  DataRows out;
  out.rows = Dataset(data.n_visible());
  const Dataset compressed = data.compressed();
  const std::vector<std::size_t> expanded = data.expanded_indices();
  // Map each original row to its compressed index by matching contents.
  std::vector<std::size_t> original_to_compressed(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    for (std::size_t r = 0; r < compressed.size(); ++r)
      if (compressed.row(r) == data.row(i)) {
        original_to_compressed[i] = r;
        break;
      }
  for (std::size_t r = 0; r < compressed.size(); ++r) out.rows.add(compressed.row(r));
  out.counts.assign(compressed.size(), 0.0);
  const std::size_t N = expanded.size();
  if (n_samples == 0) n_samples = N;
  const std::size_t full_cycles = n_samples / N;
  for (std::size_t k = 0; k < N; ++k) {
    const std::size_t r = original_to_compressed[expanded[k]];
    out.counts[r] += static_cast<double>(full_cycles) + (k < n_samples % N ? 1.0 : 0.0);
  }
  return out;
}

}  // namespace

GradientEstimate geqs_gradient(const BoltzmannModel& model, const Dataset& data, double kappa,
                               std::size_t samples_per_expectation, std::uint64_t seed, const GeqsOptions& options) {
  if (samples_per_expectation < 2) throw DomainError("at least two samples per expectation are required");
  const double kappa_data = options.kappa_data.value_or(kappa);
  const std::size_t P = model.parameter_count();

  const MeanFieldSolution sol = solve_mean_field(model, std::nullopt, options.mean_field);
  const PrepModel prep = prep_model(model, sol, kappa, options.cap);
  const PrepSamples model_samples =
      sample_prep(prep, samples_per_expectation, derive_seed(seed, 0), options.use_amplification);
  Accumulator model_acc(P);
  for (State s : model_samples.states) model_acc.add(model, s);

  const DataRows rows = assign_data_samples(model, data, options.data_samples);
  std::vector<PrepSamples> data_samples(rows.rows.size());
  parallel_for(rows.rows.size(), [&](std::size_t r) {
    const auto count = static_cast<std::size_t>(rows.counts[r]);
    if (count == 0) return;
    const VisibleVector x = rows.rows.bits(r);
    const MeanFieldSolution sx = solve_mean_field(model, x, options.mean_field);
    const PrepModel px = prep_model(model, sx, kappa_data, options.cap);
    data_samples[r] = sample_prep(px, count, derive_seed(seed, r + 1), options.use_amplification);
  });
  Accumulator data_acc(P);
  ResourceReport resources = model_samples.resources;
  ResourceReport data_resources;
  for (const auto& ds : data_samples) {
    for (State s : ds.states) data_acc.add(model, s);
    data_resources += ds.resources;
  }
  if (data_acc.n < 1.0) throw DomainError("no clamped samples were drawn");
  resources.state_preparations += data_resources.state_preparations;
  resources.oracle_queries += data_resources.state_preparations;

  std::vector<double> d(P), m(P), se(P);
  for (std::size_t c = 0; c < P; ++c) {
    d[c] = data_acc.mean(c);
    m[c] = model_acc.mean(c);
    se[c] = std::sqrt(data_acc.variance(c) / data_acc.n + model_acc.variance(c) / model_acc.n);
  }
  GradientEstimate g =
      gradient_from_moments(model, to_moments(model, d), to_moments(model, m), options.lambda, GradientMethod::geqs);
  g.stderr_flat = std::move(se);
  g.resources = resources;
  return g;
}

GradientEstimate geqs_expected_gradient(const BoltzmannModel& model, const Dataset& data, double kappa,
                                        const GeqsOptions& options) {
  const double kappa_data = options.kappa_data.value_or(kappa);
  const std::size_t P = model.parameter_count();
  const MeanFieldSolution sol = solve_mean_field(model, std::nullopt, options.mean_field);
  const std::vector<double> m = prep_expectations(model, prep_model(model, sol, kappa, options.cap));

  const DataRows rows = assign_data_samples(model, data, options.data_samples);
  std::vector<std::vector<double>> per_row(rows.rows.size());
  parallel_for(rows.rows.size(), [&](std::size_t r) {
    const VisibleVector x = rows.rows.bits(r);
    const MeanFieldSolution sx = solve_mean_field(model, x, options.mean_field);
    per_row[r] = prep_expectations(model, prep_model(model, sx, kappa_data, options.cap));
  });
  double total = 0.0;
  for (double c : rows.counts) total += c;
  std::vector<double> d(P, 0.0);
  for (std::size_t r = 0; r < per_row.size(); ++r)
    for (std::size_t c = 0; c < P; ++c) d[c] += rows.counts[r] / total * per_row[r][c];
  return gradient_from_moments(model, to_moments(model, d), to_moments(model, m), options.lambda,
                               GradientMethod::geqs);
}

namespace {

// Exact success probabilities for every component on both sides.
struct GeqaeTables {
  double p1_data = 0.0;
  std::vector<double> p11_data;
  double p1_model = 0.0;
  std::vector<double> p11_model;
};

GeqaeTables geqae_tables(const BoltzmannModel& model, const Dataset& data, double kappa, const GeqaeOptions& o) {
  const double kappa_data = o.kappa_data.value_or(kappa);
  const std::size_t P = model.parameter_count();
  if (data.n_visible() != model.n_visible()) throw DimensionError("data width does not match n_v");
  if (data.empty()) throw DimensionError("dataset is empty");
  const Dataset rows = data.compressed();
  const double total = rows.total_weight();

  GeqaeTables t;
  const MeanFieldSolution sol = solve_mean_field(model, std::nullopt, o.mean_field);
  const PrepModel prep = prep_model(model, sol, kappa, o.cap);
  t.p1_model = prep.success_probability;
  t.p11_model = prep_expectations(model, prep);
  for (double& x : t.p11_model) x *= t.p1_model;

  std::vector<std::pair<double, std::vector<double>>> per_row(rows.size());
  parallel_for(rows.size(), [&](std::size_t r) {
    const VisibleVector x = rows.bits(r);
    const MeanFieldSolution sx = solve_mean_field(model, x, o.mean_field);
    const PrepModel px = prep_model(model, sx, kappa_data, o.cap);
    per_row[r] = {px.success_probability, prep_expectations(model, px)};
  });
  t.p11_data.assign(P, 0.0);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const double w = rows.weight(r) / total * per_row[r].first;
    t.p1_data += w;
    for (std::size_t c = 0; c < P; ++c) t.p11_data[c] += w * per_row[r].second[c];
  }
  return t;
}

double ae_estimate(double p, std::uint64_t seed, const GeqaeOptions& o) {
  p = std::clamp(p, 0.0, 1.0);
  std::size_t m = 0;
  if (o.p_upper) {
    if (p > *o.p_upper) throw DomainError("probability exceeds the declared upper bound");
    m = choose_m(*o.p_upper);
  }
  const double a = amplified_probability(p, m);
  const double a_hat = o.L ? sample_ae(a, *o.L, seed).a_hat : a;
  return m == 0 ? a_hat : invert_amplified(a_hat, m, *o.p_upper);
}

GeqaeComponent component_from_tables(const BoltzmannModel& model, const GeqaeTables& t, std::size_t c,
                                     std::uint64_t seed, const GeqaeOptions& o) {
  if (o.L && *o.L < 8) throw DomainError("amplitude estimation needs L >= 8");
  GeqaeComponent out;
  out.p1_data = ae_estimate(t.p1_data, derive_seed(seed, 0), o);
  out.p11_data = ae_estimate(t.p11_data[c], derive_seed(seed, 1), o);
  out.p1_model = ae_estimate(t.p1_model, derive_seed(seed, 2), o);
  out.p11_model = ae_estimate(t.p11_model[c], derive_seed(seed, 3), o);
  if (out.p1_data == 0.0 || out.p1_model == 0.0)
    throw NumericalError("estimated success probability is zero; the quotient P(11)/P(1) is undefined");
  const double reg = c < model.edge_count() ? o.lambda * model.edges()[c].w : 0.0;
  out.estimate = out.p11_data / out.p1_data - out.p11_model / out.p1_model - reg;
  return out;
}

}  // namespace

GeqaeComponent geqae_component(const BoltzmannModel& model, const Dataset& data, double kappa,
                               std::size_t component, std::uint64_t seed, const GeqaeOptions& options) {
  if (component >= model.parameter_count()) throw DimensionError("component index out of range");
  return component_from_tables(model, geqae_tables(model, data, kappa, options), component, seed, options);
}

double geqae_gradient(const BoltzmannModel& model, const Dataset& data, double kappa, std::size_t component,
                      std::uint64_t seed, const GeqaeOptions& options) {
  return geqae_component(model, data, kappa, component, seed, options).estimate;
}

GradientEstimate geqae_full_gradient(const BoltzmannModel& model, const Dataset& data, double kappa,
                                     std::uint64_t seed, const GeqaeOptions& options) {
  const GeqaeTables t = geqae_tables(model, data, kappa, options);
  std::vector<double> flat(model.parameter_count());
  for (std::size_t c = 0; c < flat.size(); ++c)
    flat[c] = component_from_tables(model, t, c, derive_seed(seed, c), options).estimate;
  GradientEstimate g = GradientEstimate::from_flat(model, flat, GradientMethod::geqae);
  if (options.L) g.resources.oracle_queries = 2.0 * static_cast<double>(*options.L) * static_cast<double>(flat.size());
  return g;
}

}  // namespace qbm
