#include "qbm/exact_stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "qbm/error.hpp"

namespace qbm {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

namespace {

bool is_independent(const BoltzmannModel& model, const std::vector<std::size_t>& units,
                    const std::vector<char>& in_set) {
  for (auto u : units)
    for (const auto& nb : model.neighbors(u))
      if (in_set[nb.unit]) return false;
  return true;
}

// Largest of: even-layer free units, odd-layer free units (when independent),
// and a min-degree greedy independent set.
std::vector<char> choose_summed_units(const BoltzmannModel& model, const std::vector<char>& is_free) {
  const std::size_t n = model.n_units();
  std::vector<char> best(n, 0);
  std::size_t best_size = 0;
  auto consider = [&](const std::vector<std::size_t>& units) {
    if (units.size() <= best_size) return;
    std::vector<char> mark(n, 0);
    for (auto u : units) mark[u] = 1;
    if (!is_independent(model, units, mark)) return;
    best = std::move(mark);
    best_size = units.size();
  };
  for (int parity = 0; parity < 2; ++parity) {
    std::vector<std::size_t> units;
    for (std::size_t k = 0; k < n; ++k)
      if (is_free[k] && model.layers()[k] % 2 == parity) units.push_back(k);
    consider(units);
  }
  std::vector<std::size_t> order;
  for (std::size_t k = 0; k < n; ++k)
    if (is_free[k]) order.push_back(k);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return model.neighbors(a).size() < model.neighbors(b).size();
  });
  std::vector<char> mark(n, 0);
  std::vector<std::size_t> greedy;
  for (auto u : order) {
    bool ok = true;
    for (const auto& nb : model.neighbors(u))
      if (mark[nb.unit]) {
        ok = false;
        break;
      }
    if (ok) {
      mark[u] = 1;
      greedy.push_back(u);
    }
  }
  consider(greedy);
  return best;
}

ExactStatistics compute(const BoltzmannModel& model, const double* clamp, std::size_t cap) {
  const std::size_t n = model.n_units();
  const std::size_t n_v = model.n_visible();
  std::vector<char> is_free(n, 1);
  if (clamp)
    for (std::size_t i = 0; i < n_v; ++i) is_free[i] = 0;

  const std::vector<char> summed = choose_summed_units(model, is_free);
  std::vector<std::size_t> enumerated;
  std::vector<std::size_t> summed_units;
  for (std::size_t k = 0; k < n; ++k) {
    if (!is_free[k]) continue;
    (summed[k] ? summed_units : enumerated).push_back(k);
  }
  if (enumerated.size() > cap || enumerated.size() > 62)
    throw CapacityError("exact statistics would enumerate " + std::to_string(enumerated.size()) +
                        " units, above the cap of " + std::to_string(cap));

  // Edges split into those touching a summed unit and the rest.
  std::vector<std::size_t> plain_edges;
  for (std::size_t e = 0; e < model.edge_count(); ++e) {
    const auto& edge = model.edges()[e];
    if (!summed[edge.a] && !summed[edge.b]) plain_edges.push_back(e);
  }
  std::vector<std::size_t> plain_units;
  for (std::size_t k = 0; k < n; ++k)
    if (!summed[k]) plain_units.push_back(k);

  std::vector<double> s(n, 0.0);
  if (clamp)
    for (std::size_t i = 0; i < n_v; ++i) {
      if (!(clamp[i] >= 0.0 && clamp[i] <= 1.0)) throw DomainError("clamp values must lie in [0, 1]");
      s[i] = clamp[i];
    }

  const std::size_t n_sum = summed_units.size();
  std::vector<double> field(n_sum);
  std::vector<double> act(n_sum);

  // Online log-sum-exp; accumulators are scaled by exp(-running_max).
  double running_max = -std::numeric_limits<double>::infinity();
  double total = 0.0;
  std::vector<double> acc_unit(n, 0.0);
  std::vector<double> acc_edge(model.edge_count(), 0.0);

  const std::uint64_t count = std::uint64_t{1} << enumerated.size();
  for (std::uint64_t r = 0; r < count; ++r) {
    for (std::size_t k = 0; k < enumerated.size(); ++k) s[enumerated[k]] = static_cast<double>((r >> k) & 1U);
    double lw = 0.0;
    for (auto k : plain_units) lw += model.unit_bias(k) * s[k];
    for (auto e : plain_edges) {
      const auto& edge = model.edges()[e];
      lw += edge.w * s[edge.a] * s[edge.b];
    }
    for (std::size_t t = 0; t < n_sum; ++t) {
      const std::size_t j = summed_units[t];
      double phi = model.unit_bias(j);
      for (const auto& nb : model.neighbors(j)) phi += model.edges()[nb.edge].w * s[nb.unit];
      field[t] = phi;
      lw += softplus(phi);
    }
    if (lw > running_max) {
      const double scale = std::isfinite(running_max) ? std::exp(running_max - lw) : 0.0;
      total *= scale;
      for (auto& x : acc_unit) x *= scale;
      for (auto& x : acc_edge) x *= scale;
      running_max = lw;
    }
    const double p = std::exp(lw - running_max);
    total += p;
    for (std::size_t t = 0; t < n_sum; ++t) act[t] = sigmoid(field[t]);
    for (auto k : plain_units) acc_unit[k] += p * s[k];
    for (std::size_t t = 0; t < n_sum; ++t) {
      s[summed_units[t]] = act[t];
      acc_unit[summed_units[t]] += p * act[t];
    }
    // With summed units holding their conditional means, every edge moment is
    // a product: no edge joins two summed units.
    for (std::size_t e = 0; e < model.edge_count(); ++e) {
      const auto& edge = model.edges()[e];
      acc_edge[e] += p * s[edge.a] * s[edge.b];
    }
  }

  ExactStatistics out;
  out.log_partition = running_max + std::log(total);
  out.unit_means.resize(n);
  out.edge_means.resize(model.edge_count());
  for (std::size_t k = 0; k < n; ++k) out.unit_means[k] = acc_unit[k] / total;
  for (std::size_t e = 0; e < model.edge_count(); ++e) out.edge_means[e] = acc_edge[e] / total;
  return out;
}

}  // namespace

ExactStatistics exact_statistics(const BoltzmannModel& model, std::size_t cap) {
  return compute(model, nullptr, cap);
}

ExactStatistics exact_statistics(const BoltzmannModel& model, std::span<const double> clamp, std::size_t cap) {
  if (clamp.size() != model.n_visible()) throw DimensionError("clamp length does not match n_v");
  return compute(model, clamp.data(), cap);
}

}  // namespace qbm
