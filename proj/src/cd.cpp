#include "qbm/cd.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "qbm/error.hpp"
#include "qbm/exact_stats.hpp"
#include "qbm/random.hpp"

namespace qbm {

namespace {

// Bipartite layer in dense form.
struct Layer {
  std::size_t n_v = 0;
  std::size_t n_h = 0;
  std::vector<double> W;  // n_v x n_h, row-major
  std::vector<std::size_t> edge_of;  // (i, j) -> model edge index
  std::vector<double> b, d;

  explicit Layer(const BoltzmannModel& model) : n_v(model.n_visible()), n_h(model.n_hidden()) {
    const bool bipartite =
        model.topology() == Topology::rbm || (model.topology() == Topology::drbm && model.layer_count() == 2);
    if (!bipartite) throw InvariantError("contrastive divergence needs a bipartite visible-hidden layer");
    W.assign(n_v * n_h, 0.0);
    edge_of.assign(n_v * n_h, SIZE_MAX);
    for (std::size_t e = 0; e < model.edge_count(); ++e) {
      const auto& edge = model.edges()[e];
      const std::size_t i = edge.a, j = edge.b - n_v;
      W[i * n_h + j] = edge.w;
      edge_of[i * n_h + j] = e;
    }
    b = model.visible_bias();
    d = model.hidden_bias();
  }

  void hidden_probs(const double* v, double* out) const {
    for (std::size_t j = 0; j < n_h; ++j) out[j] = d[j];
    for (std::size_t i = 0; i < n_v; ++i) {
      if (v[i] == 0.0) continue;
      for (std::size_t j = 0; j < n_h; ++j) out[j] += W[i * n_h + j] * v[i];
    }
    for (std::size_t j = 0; j < n_h; ++j) out[j] = sigmoid(out[j]);
  }

  void visible_probs(const double* h, double* out) const {
    for (std::size_t i = 0; i < n_v; ++i) {
      double f = b[i];
      for (std::size_t j = 0; j < n_h; ++j) f += W[i * n_h + j] * h[j];
      out[i] = sigmoid(f);
    }
  }
};

// Accumulates positive-minus-negative statistics in model parameter order.
struct CdAccumulator {
  const Layer& layer;
  std::vector<double> edge, vis, hid;
  double total = 0.0;

  explicit CdAccumulator(const Layer& l) : layer(l), edge(l.n_v * l.n_h, 0.0), vis(l.n_v, 0.0), hid(l.n_h, 0.0) {}

  void add(const double* v, const double* h, double weight) {
    for (std::size_t i = 0; i < layer.n_v; ++i) {
      vis[i] += weight * v[i];
      if (v[i] == 0.0) continue;
      for (std::size_t j = 0; j < layer.n_h; ++j) edge[i * layer.n_h + j] += weight * v[i] * h[j];
    }
    for (std::size_t j = 0; j < layer.n_h; ++j) hid[j] += weight * h[j];
  }

  GradientEstimate finish(const BoltzmannModel& model, double lambda) const {
    std::vector<double> flat(model.parameter_count(), 0.0);
    for (std::size_t ij = 0; ij < edge.size(); ++ij)
      if (layer.edge_of[ij] != SIZE_MAX)
        flat[layer.edge_of[ij]] = edge[ij] / total - lambda * model.edges()[layer.edge_of[ij]].w;
    const std::size_t E = model.edge_count();
    for (std::size_t i = 0; i < layer.n_v; ++i) flat[E + i] = vis[i] / total;
    for (std::size_t j = 0; j < layer.n_h; ++j) flat[E + layer.n_v + j] = hid[j] / total;
    return GradientEstimate::from_flat(model, flat, GradientMethod::cd_k);
  }
};

std::size_t copies_of(const Dataset& batch, std::size_t r) {
  const double w = batch.weight(r);
  if (w != std::floor(w)) throw DomainError("contrastive divergence requires integer multiplicities");
  return static_cast<std::size_t>(w);
}

void check_batch(const BoltzmannModel& model, const Dataset& batch, std::size_t k) {
  if (batch.n_visible() != model.n_visible()) throw DimensionError("batch width does not match n_v");
  if (batch.empty()) throw DimensionError("batch is empty");
  if (k == 0) throw DomainError("k must be at least 1");
}

constexpr std::size_t kTransitionUnitLimit = 14;

// Product-Bernoulli probability of every bit pattern of length n.
void product_table(const double* p, std::size_t n, double* out) {
  const std::size_t count = std::size_t{1} << n;
  for (std::size_t s = 0; s < count; ++s) {
    double q = 1.0;
    for (std::size_t k = 0; k < n; ++k) q *= ((s >> k) & 1U) ? p[k] : 1.0 - p[k];
    out[s] = q;
  }
}

void bits_to_doubles(std::size_t s, std::size_t n, double* out) {
  for (std::size_t k = 0; k < n; ++k) out[k] = static_cast<double>((s >> k) & 1U);
}

}  // namespace

std::vector<double> hidden_activation(const BoltzmannModel& model, const std::vector<double>& v) {
  const Layer layer(model);
  if (v.size() != layer.n_v) throw DimensionError("visible vector has the wrong length");
  std::vector<double> out(layer.n_h);
  layer.hidden_probs(v.data(), out.data());
  return out;
}

GradientEstimate cd_k_gradient_per_chain(const BoltzmannModel& model, const Dataset& batch, std::size_t k,
                                         std::uint64_t seed, double lambda) {
  check_batch(model, batch, k);
  const Layer layer(model);
  Rng rng(seed);
  CdAccumulator pos(layer), neg(layer);
  std::vector<double> a0(layer.n_h), h(layer.n_h), pv(layer.n_v), v(layer.n_v), ph(layer.n_h);
  for (std::size_t r = 0; r < batch.size(); ++r) {
    const std::size_t n = copies_of(batch, r);
    const double* x = batch.row(r).data();
    layer.hidden_probs(x, a0.data());
    pos.add(x, a0.data(), static_cast<double>(n));
    for (std::size_t c = 0; c < n; ++c) {
      ph = a0;
      for (std::size_t step = 0; step < k; ++step) {
        for (std::size_t j = 0; j < layer.n_h; ++j) h[j] = uniform01(rng) < ph[j] ? 1.0 : 0.0;
        layer.visible_probs(h.data(), pv.data());
        for (std::size_t i = 0; i < layer.n_v; ++i) v[i] = uniform01(rng) < pv[i] ? 1.0 : 0.0;
        layer.hidden_probs(v.data(), ph.data());
      }
      neg.add(v.data(), ph.data(), 1.0);
    }
  }
  for (std::size_t r = 0; r < batch.size(); ++r) pos.total += static_cast<double>(copies_of(batch, r));
  neg.total = pos.total;
  GradientEstimate gp = pos.finish(model, lambda);
  const GradientEstimate gn = neg.finish(model, 0.0);
  for (std::size_t e = 0; e < gp.d_weights.size(); ++e) gp.d_weights[e] -= gn.d_weights[e];
  for (std::size_t i = 0; i < gp.d_visible_bias.size(); ++i) gp.d_visible_bias[i] -= gn.d_visible_bias[i];
  for (std::size_t j = 0; j < gp.d_hidden_bias.size(); ++j) gp.d_hidden_bias[j] -= gn.d_hidden_bias[j];
  return gp;
}

GradientEstimate cd_k_gradient(const BoltzmannModel& model, const Dataset& batch, std::size_t k, std::uint64_t seed,
                               double lambda) {
  check_batch(model, batch, k);
  const Layer layer(model);
  if (layer.n_v + layer.n_h > kTransitionUnitLimit) return cd_k_gradient_per_chain(model, batch, k, seed, lambda);

  const std::size_t NV = std::size_t{1} << layer.n_v;
  const std::size_t NH = std::size_t{1} << layer.n_h;
  // act_h[v] = P(h | v) per unit; ph_table[v][h], pv_table[h][v] joint.
  std::vector<double> act_h(NV * layer.n_h), act_v(NH * layer.n_v);
  std::vector<double> ph_table(NV * NH), pv_table(NH * NV);
  std::vector<double> bits(std::max(layer.n_v, layer.n_h));
  for (std::size_t v = 0; v < NV; ++v) {
    bits_to_doubles(v, layer.n_v, bits.data());
    layer.hidden_probs(bits.data(), &act_h[v * layer.n_h]);
    product_table(&act_h[v * layer.n_h], layer.n_h, &ph_table[v * NH]);
  }
  for (std::size_t h = 0; h < NH; ++h) {
    bits_to_doubles(h, layer.n_h, bits.data());
    layer.visible_probs(bits.data(), &act_v[h * layer.n_v]);
    product_table(&act_v[h * layer.n_v], layer.n_v, &pv_table[h * NV]);
  }

  Rng rng(seed);
  CdAccumulator pos(layer), neg(layer);
  std::vector<double> a0(layer.n_h), hdist(NH), vdist(NV), vbits(layer.n_v);
  double total = 0.0;
  for (std::size_t r = 0; r < batch.size(); ++r) {
    const std::size_t n = copies_of(batch, r);
    if (n == 0) continue;
    total += static_cast<double>(n);
    const double* x = batch.row(r).data();
    layer.hidden_probs(x, a0.data());
    pos.add(x, a0.data(), static_cast<double>(n));

    product_table(a0.data(), layer.n_h, hdist.data());
    for (std::size_t step = 0; step < k; ++step) {
      if (step > 0) {
        std::fill(hdist.begin(), hdist.end(), 0.0);
        for (std::size_t v = 0; v < NV; ++v) {
          if (vdist[v] == 0.0) continue;
          for (std::size_t h = 0; h < NH; ++h) hdist[h] += vdist[v] * ph_table[v * NH + h];
        }
      }
      std::fill(vdist.begin(), vdist.end(), 0.0);
      for (std::size_t h = 0; h < NH; ++h) {
        if (hdist[h] == 0.0) continue;
        for (std::size_t v = 0; v < NV; ++v) vdist[v] += hdist[h] * pv_table[h * NV + v];
      }
    }
    // Multinomial counts of v_k over the n chains, drawn as sequential binomials.
    std::uint64_t remaining = n;
    double mass = 0.0;
    for (double p : vdist) mass += p;
    for (std::size_t v = 0; v < NV && remaining > 0; ++v) {
      std::uint64_t c = remaining;
      if (v + 1 < NV) {
        const double p = mass > 0.0 ? std::clamp(vdist[v] / mass, 0.0, 1.0) : 1.0;
        c = std::binomial_distribution<std::uint64_t>(remaining, p)(rng);
      }
      mass -= vdist[v];
      remaining -= c;
      if (c == 0) continue;
      bits_to_doubles(v, layer.n_v, vbits.data());
      neg.add(vbits.data(), &act_h[v * layer.n_h], static_cast<double>(c));
    }
  }
  pos.total = neg.total = total;
  GradientEstimate g = pos.finish(model, lambda);
  const GradientEstimate gn = neg.finish(model, 0.0);
  for (std::size_t e = 0; e < g.d_weights.size(); ++e) g.d_weights[e] -= gn.d_weights[e];
  for (std::size_t i = 0; i < g.d_visible_bias.size(); ++i) g.d_visible_bias[i] -= gn.d_visible_bias[i];
  for (std::size_t j = 0; j < g.d_hidden_bias.size(); ++j) g.d_hidden_bias[j] -= gn.d_hidden_bias[j];
  return g;
}

Dataset propagate_up(const BoltzmannModel& layer_model, const Dataset& data) {
  const Layer layer(layer_model);
  if (data.n_visible() != layer.n_v) throw DimensionError("data width does not match n_v");
  Dataset out(layer.n_h);
  std::vector<double> h(layer.n_h);
  for (std::size_t r = 0; r < data.size(); ++r) {
    layer.hidden_probs(data.row(r).data(), h.data());
    out.add(h, data.weight(r));
  }
  return out;
}

namespace {

std::vector<std::size_t> units_in_layer(const BoltzmannModel& model, std::size_t layer) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < model.n_units(); ++k)
    if (static_cast<std::size_t>(model.layers()[k]) == layer) out.push_back(k);
  return out;
}

}  // namespace

BoltzmannModel extract_layer(const BoltzmannModel& drbm, std::size_t layer) {
  if (drbm.topology() != Topology::drbm && drbm.topology() != Topology::rbm)
    throw InvariantError("layer extraction needs a layered model");
  if (layer == 0 || layer >= drbm.layer_count()) throw DimensionError("layer index out of range");
  const auto lower = units_in_layer(drbm, layer - 1);
  const auto upper = units_in_layer(drbm, layer);
  std::vector<std::size_t> local(drbm.n_units(), SIZE_MAX);
  for (std::size_t i = 0; i < lower.size(); ++i) local[lower[i]] = i;
  for (std::size_t j = 0; j < upper.size(); ++j) local[upper[j]] = lower.size() + j;
  std::vector<Edge> edges;
  for (const auto& e : drbm.edges()) {
    const auto la = static_cast<std::size_t>(drbm.layers()[e.a]);
    const auto lb = static_cast<std::size_t>(drbm.layers()[e.b]);
    if (std::min(la, lb) == layer - 1 && std::max(la, lb) == layer) {
      std::size_t a = local[e.a], b = local[e.b];
      if (a > b) std::swap(a, b);
      edges.push_back({a, b, e.w});
    }
  }
  std::vector<double> b(lower.size()), d(upper.size());
  for (std::size_t i = 0; i < lower.size(); ++i) b[i] = drbm.unit_bias(lower[i]);
  for (std::size_t j = 0; j < upper.size(); ++j) d[j] = drbm.unit_bias(upper[j]);
  std::vector<int> layers(lower.size(), 0);
  layers.resize(lower.size() + upper.size(), 1);
  return BoltzmannModel(lower.size(), upper.size(), Topology::rbm, std::move(layers), std::move(edges), std::move(b),
                        std::move(d));
}

LayerwiseResult greedy_layerwise_train(const BoltzmannModel& drbm, const Dataset& data, const TrainerConfig& trainer,
                                       std::size_t k) {
  if (drbm.topology() != Topology::drbm && drbm.topology() != Topology::rbm)
    throw InvariantError("greedy layer-wise training needs a layered model");
  LayerwiseResult result;
  Dataset current = data;
  GradientSource source;
  source.kind = SourceKind::cd_k;
  source.cd_steps = k;
  for (std::size_t l = 1; l < drbm.layer_count(); ++l) {
    TrainerConfig cfg = trainer;
    cfg.seed = derive_seed(trainer.seed, l);
    OptimizeResult trained = optimize(extract_layer(drbm, l), current, cfg, source);
    if (l + 1 < drbm.layer_count()) current = propagate_up(trained.model, current);
    result.layers.push_back(std::move(trained));
  }

  // Assemble: edges from each layer RBM. A layer's biases come from the RBM in
  // which it is the visible side, so the RBM above supplies the prior over it;
  // the top layer keeps the hidden biases of the last RBM.
  std::vector<double> theta = drbm.parameters();
  const std::size_t E = drbm.edge_count();
  for (std::size_t l = 1; l < drbm.layer_count(); ++l) {
    const BoltzmannModel& rbm = result.layers[l - 1].model;
    const auto lower = units_in_layer(drbm, l - 1);
    const auto upper = units_in_layer(drbm, l);
    std::vector<std::size_t> local(drbm.n_units(), SIZE_MAX);
    for (std::size_t i = 0; i < lower.size(); ++i) local[lower[i]] = i;
    for (std::size_t j = 0; j < upper.size(); ++j) local[upper[j]] = lower.size() + j;
    for (std::size_t e = 0; e < E; ++e) {
      const auto& edge = drbm.edges()[e];
      std::size_t a = local[edge.a], b = local[edge.b];
      if (a == SIZE_MAX || b == SIZE_MAX) continue;
      if (a > b) std::swap(a, b);
      for (const auto& re : rbm.edges())
        if (re.a == a && re.b == b) theta[e] = re.w;
    }
    for (std::size_t i = 0; i < lower.size(); ++i) theta[E + lower[i]] = rbm.unit_bias(i);
    if (l + 1 == drbm.layer_count())
      for (std::size_t j = 0; j < upper.size(); ++j) theta[E + upper[j]] = rbm.unit_bias(lower.size() + j);
  }
  result.model = drbm;
  result.model.set_parameters(theta);
  return result;
}

}  // namespace qbm
