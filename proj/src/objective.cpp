#include "qbm/objective.hpp"

#include <cmath>

#include "qbm/error.hpp"
#include "qbm/exact_stats.hpp"
#include "qbm/parallel.hpp"

namespace qbm {

std::string_view to_string(GradientMethod m) {
  switch (m) {
    case GradientMethod::exact: return "exact";
    case GradientMethod::geqs: return "geqs";
    case GradientMethod::geqae: return "geqae";
    case GradientMethod::cd_k: return "cd-k";
  }
  return "unknown";
}

std::vector<double> GradientEstimate::flat() const {
  std::vector<double> out(d_weights);
  out.insert(out.end(), d_visible_bias.begin(), d_visible_bias.end());
  out.insert(out.end(), d_hidden_bias.begin(), d_hidden_bias.end());
  return out;
}

GradientEstimate GradientEstimate::from_flat(const BoltzmannModel& model, const std::vector<double>& flat,
                                             GradientMethod method) {
  if (flat.size() != model.parameter_count()) throw DimensionError("gradient length does not match the model");
  const auto E = static_cast<std::ptrdiff_t>(model.edge_count());
  const auto nv = static_cast<std::ptrdiff_t>(model.n_visible());
  GradientEstimate g;
  g.d_weights.assign(flat.begin(), flat.begin() + E);
  g.d_visible_bias.assign(flat.begin() + E, flat.begin() + E + nv);
  g.d_hidden_bias.assign(flat.begin() + E + nv, flat.end());
  g.method = method;
  return g;
}

GradientEstimate gradient_from_moments(const BoltzmannModel& model, const Moments& data, const Moments& model_side,
                                       double lambda, GradientMethod method) {
  if (data.unit.size() != model.n_units() || model_side.unit.size() != model.n_units() ||
      data.edge.size() != model.edge_count() || model_side.edge.size() != model.edge_count())
    throw DimensionError("moment dimensions do not match the model");
  GradientEstimate g;
  g.method = method;
  g.d_weights.resize(model.edge_count());
  for (std::size_t e = 0; e < model.edge_count(); ++e)
    g.d_weights[e] = data.edge[e] - model_side.edge[e] - lambda * model.edges()[e].w;
  const std::size_t n_v = model.n_visible();
  g.d_visible_bias.resize(n_v);
  g.d_hidden_bias.resize(model.n_hidden());
  for (std::size_t i = 0; i < n_v; ++i) g.d_visible_bias[i] = data.unit[i] - model_side.unit[i];
  for (std::size_t j = 0; j < model.n_hidden(); ++j)
    g.d_hidden_bias[j] = data.unit[n_v + j] - model_side.unit[n_v + j];
  for (double x : g.flat())
    if (!std::isfinite(x)) throw NumericalError("gradient has non-finite components");
  return g;
}

namespace {

struct DataPass {
  double mean_log_Z_x = 0.0;
  Moments moments;
};

DataPass data_pass(const BoltzmannModel& model, const Dataset& data, std::size_t cap, bool want_moments) {
  if (data.n_visible() != model.n_visible()) throw DimensionError("data width does not match n_v");
  if (data.empty()) throw DimensionError("dataset is empty");
  const Dataset rows = data.compressed();
  std::vector<ExactStatistics> stats(rows.size());
  parallel_for(rows.size(), [&](std::size_t r) { stats[r] = exact_statistics(model, rows.row(r), cap); });
  DataPass out;
  out.moments.unit.assign(model.n_units(), 0.0);
  out.moments.edge.assign(model.edge_count(), 0.0);
  const double total = rows.total_weight();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const double w = rows.weight(r) / total;
    out.mean_log_Z_x += w * stats[r].log_partition;
    if (!want_moments) continue;
    for (std::size_t k = 0; k < model.n_units(); ++k) out.moments.unit[k] += w * stats[r].unit_means[k];
    for (std::size_t e = 0; e < model.edge_count(); ++e) out.moments.edge[e] += w * stats[r].edge_means[e];
  }
  return out;
}

}  // namespace

double oml_objective(const BoltzmannModel& model, const Dataset& data, double lambda, std::size_t cap) {
  if (!(lambda >= 0.0)) throw DomainError("lambda must be non-negative");
  const DataPass pass = data_pass(model, data, cap, false);
  const double log_Z = exact_statistics(model, cap).log_partition;
  return pass.mean_log_Z_x - log_Z - 0.5 * lambda * model.weight_norm2();
}

ObjectiveAndGradient objective_and_gradient(const BoltzmannModel& model, const Dataset& data, double lambda,
                                            std::size_t cap) {
  if (!(lambda >= 0.0)) throw DomainError("lambda must be non-negative");
  const DataPass pass = data_pass(model, data, cap, true);
  const ExactStatistics full = exact_statistics(model, cap);
  ObjectiveAndGradient out;
  out.objective = pass.mean_log_Z_x - full.log_partition - 0.5 * lambda * model.weight_norm2();
  out.gradient = gradient_from_moments(model, pass.moments, {full.unit_means, full.edge_means}, lambda,
                                       GradientMethod::exact);
  return out;
}

GradientEstimate exact_gradient(const BoltzmannModel& model, const Dataset& data, double lambda, std::size_t cap) {
  return objective_and_gradient(model, data, lambda, cap).gradient;
}

}  // namespace qbm
