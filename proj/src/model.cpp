#include "qbm/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <utility>

#include <json.hpp>

#include "qbm/error.hpp"

namespace qbm {

std::string_view to_string(Topology t) {
  switch (t) {
    case Topology::rbm:
      return "rbm";
    case Topology::drbm:
      return "drbm";
    case Topology::full:
      return "full";
  }
  return "full";
}

Topology parse_topology(std::string_view name) {
  if (name == "rbm") return Topology::rbm;
  if (name == "drbm") return Topology::drbm;
  if (name == "full") return Topology::full;
  throw InvariantError("unknown topology '" + std::string(name) + "'");
}

BoltzmannModel::BoltzmannModel(std::size_t n_visible, std::size_t n_hidden, Topology topology,
                               std::vector<int> layers, std::vector<Edge> edges,
                               std::vector<double> visible_bias, std::vector<double> hidden_bias)
    : n_v_(n_visible),
      n_h_(n_hidden),
      topology_(topology),
      layers_(std::move(layers)),
      edges_(std::move(edges)),
      b_(std::move(visible_bias)),
      d_(std::move(hidden_bias)) {
  const std::size_t n = n_v_ + n_h_;
  if (b_.size() != n_v_ || d_.size() != n_h_)
    throw InvariantError("bias vector lengths do not match unit counts");
  if (layers_.empty() && n > 0) {
    layers_.assign(n, 1);
    std::fill(layers_.begin(), layers_.begin() + static_cast<std::ptrdiff_t>(n_v_), 0);
  }
  if (layers_.size() != n) throw InvariantError("layer partition length does not match unit count");
  int max_layer = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const bool visible = k < n_v_;
    if (visible != (layers_[k] == 0))
      throw InvariantError("layer 0 must hold exactly the visible units");
    if (layers_[k] < 0) throw InvariantError("negative layer index");
    max_layer = std::max(max_layer, layers_[k]);
  }
  layer_count_ = static_cast<std::size_t>(max_layer) + 1;

  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (auto& e : edges_) {
    if (e.a == e.b) throw InvariantError("self-edge on unit " + std::to_string(e.a));
    if (e.a >= n || e.b >= n) throw InvariantError("edge endpoint out of range");
    if (e.a > e.b) std::swap(e.a, e.b);
    if (!seen.emplace(e.a, e.b).second)
      throw InvariantError("duplicate edge (" + std::to_string(e.a) + "," + std::to_string(e.b) + ")");
    if (!std::isfinite(e.w)) throw InvariantError("non-finite weight");
    const int la = layers_[e.a];
    const int lb = layers_[e.b];
    switch (topology_) {
      case Topology::rbm:
        if (!((la == 0) != (lb == 0)))
          throw InvariantError("rbm models admit only visible-hidden edges");
        break;
      case Topology::drbm:
        if (std::abs(la - lb) != 1)
          throw InvariantError("drbm models admit only edges between adjacent layers");
        break;
      case Topology::full:
        break;
    }
  }
  if (topology_ == Topology::rbm && layer_count_ > 2)
    throw InvariantError("rbm models have a single hidden layer");
  for (double x : b_)
    if (!std::isfinite(x)) throw InvariantError("non-finite visible bias");
  for (double x : d_)
    if (!std::isfinite(x)) throw InvariantError("non-finite hidden bias");
  build_adjacency();
}

void BoltzmannModel::build_adjacency() {
  const std::size_t n = n_units();
  std::vector<std::size_t> degree(n, 0);
  for (const auto& e : edges_) {
    ++degree[e.a];
    ++degree[e.b];
  }
  adj_offset_.assign(n + 1, 0);
  for (std::size_t k = 0; k < n; ++k) adj_offset_[k + 1] = adj_offset_[k] + degree[k];
  adj_.assign(adj_offset_[n], Neighbor{0, 0});
  std::vector<std::size_t> fill(adj_offset_.begin(), adj_offset_.end() - 1);
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    const auto& e = edges_[i];
    adj_[fill[e.a]++] = Neighbor{e.b, i};
    adj_[fill[e.b]++] = Neighbor{e.a, i};
  }
}

std::vector<std::size_t> BoltzmannModel::layer_sizes() const {
  std::vector<std::size_t> sizes(layer_count_, 0);
  for (int l : layers_) ++sizes[static_cast<std::size_t>(l)];
  return sizes;
}

std::span<const BoltzmannModel::Neighbor> BoltzmannModel::neighbors(std::size_t unit) const {
  return {adj_.data() + adj_offset_[unit], adj_offset_[unit + 1] - adj_offset_[unit]};
}

std::vector<double> BoltzmannModel::parameters() const {
  std::vector<double> theta;
  theta.reserve(parameter_count());
  for (const auto& e : edges_) theta.push_back(e.w);
  theta.insert(theta.end(), b_.begin(), b_.end());
  theta.insert(theta.end(), d_.begin(), d_.end());
  return theta;
}

void BoltzmannModel::set_parameters(std::span<const double> theta) {
  if (theta.size() != parameter_count())
    throw DimensionError("parameter vector has length " + std::to_string(theta.size()) +
                         ", expected " + std::to_string(parameter_count()));
  for (double x : theta)
    if (!std::isfinite(x)) throw NumericalError("non-finite model parameter");
  std::size_t i = 0;
  for (auto& e : edges_) e.w = theta[i++];
  for (auto& x : b_) x = theta[i++];
  for (auto& x : d_) x = theta[i++];
}

double BoltzmannModel::weight_norm2() const {
  double s = 0.0;
  for (const auto& e : edges_) s += e.w * e.w;
  return s;
}

double BoltzmannModel::max_abs_weight() const {
  double m = 0.0;
  for (const auto& e : edges_) m = std::max(m, std::abs(e.w));
  return m;
}

bool BoltzmannModel::operator==(const BoltzmannModel& o) const {
  if (n_v_ != o.n_v_ || n_h_ != o.n_h_ || topology_ != o.topology_ || layers_ != o.layers_ ||
      b_ != o.b_ || d_ != o.d_ || edges_.size() != o.edges_.size())
    return false;
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    const auto& x = edges_[i];
    const auto& y = o.edges_[i];
    if (x.a != y.a || x.b != y.b || x.w != y.w) return false;
  }
  return true;
}

BoltzmannModel make_rbm(std::size_t n_v, std::size_t n_h) {
  std::vector<Edge> edges;
  edges.reserve(n_v * n_h);
  for (std::size_t i = 0; i < n_v; ++i)
    for (std::size_t j = 0; j < n_h; ++j) edges.push_back({i, n_v + j, 0.0});
  return BoltzmannModel(n_v, n_h, Topology::rbm, {}, std::move(edges), std::vector<double>(n_v, 0.0),
                        std::vector<double>(n_h, 0.0));
}

BoltzmannModel make_drbm(std::size_t n_v, std::span<const std::size_t> hidden_layers) {
  std::vector<std::size_t> sizes{n_v};
  sizes.insert(sizes.end(), hidden_layers.begin(), hidden_layers.end());
  std::vector<int> layers;
  std::vector<std::size_t> start;
  std::size_t offset = 0;
  for (std::size_t l = 0; l < sizes.size(); ++l) {
    start.push_back(offset);
    for (std::size_t k = 0; k < sizes[l]; ++k) layers.push_back(static_cast<int>(l));
    offset += sizes[l];
  }
  std::vector<Edge> edges;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l)
    for (std::size_t i = 0; i < sizes[l]; ++i)
      for (std::size_t j = 0; j < sizes[l + 1]; ++j)
        edges.push_back({start[l] + i, start[l + 1] + j, 0.0});
  const std::size_t n_h = offset - n_v;
  return BoltzmannModel(n_v, n_h, Topology::drbm, std::move(layers), std::move(edges),
                        std::vector<double>(n_v, 0.0), std::vector<double>(n_h, 0.0));
}

BoltzmannModel make_full(std::size_t n_v, std::size_t n_h) {
  const std::size_t n = n_v + n_h;
  std::vector<Edge> edges;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) edges.push_back({a, b, 0.0});
  return BoltzmannModel(n_v, n_h, Topology::full, {}, std::move(edges), std::vector<double>(n_v, 0.0),
                        std::vector<double>(n_h, 0.0));
}

double energy(const BoltzmannModel& model, const Configuration& config) {
  return energy(model, pack(model, config));
}

double energy(const BoltzmannModel& model, State state) {
  double e = 0.0;
  const std::size_t n = model.n_units();
  for (std::size_t k = 0; k < n; ++k)
    if ((state >> k) & 1U) e -= model.unit_bias(k);
  for (const auto& edge : model.edges())
    if (((state >> edge.a) & (state >> edge.b)) & 1U) e -= edge.w;
  return e;
}

State pack(const BoltzmannModel& model, const Configuration& config) {
  if (config.v.size() != model.n_visible() || config.h.size() != model.n_hidden())
    throw DimensionError("configuration dimensions do not match the model");
  if (model.n_units() > 64) throw CapacityError("packed states hold at most 64 units");
  State s = 0;
  for (std::size_t i = 0; i < config.v.size(); ++i)
    if (config.v[i]) s |= State{1} << i;
  for (std::size_t j = 0; j < config.h.size(); ++j)
    if (config.h[j]) s |= State{1} << (model.n_visible() + j);
  return s;
}

Configuration unpack(const BoltzmannModel& model, State state) {
  Configuration c;
  c.v.resize(model.n_visible());
  c.h.resize(model.n_hidden());
  for (std::size_t i = 0; i < c.v.size(); ++i) c.v[i] = (state >> i) & 1U;
  for (std::size_t j = 0; j < c.h.size(); ++j) c.h[j] = (state >> (model.n_visible() + j)) & 1U;
  return c;
}

State pack_visible(const BoltzmannModel& model, std::span<const std::uint8_t> v) {
  if (v.size() != model.n_visible()) throw DimensionError("visible vector length mismatch");
  State s = 0;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (v[i]) s |= State{1} << i;
  return s;
}

BoltzmannModel structure_of(const ModelSpec& spec) {
  switch (spec.topology) {
    case Topology::rbm:
      return make_rbm(spec.n_v, spec.n_h);
    case Topology::full:
      return make_full(spec.n_v, spec.n_h);
    case Topology::drbm: {
      std::vector<std::size_t> hidden = spec.hidden_layers;
      if (hidden.empty()) hidden.push_back(spec.n_h);
      std::size_t total = 0;
      for (auto s : hidden) {
        if (s == 0) throw InvariantError("empty hidden layer");
        total += s;
      }
      if (total != spec.n_h) throw InvariantError("hidden layer sizes must sum to n_h");
      return make_drbm(spec.n_v, hidden);
    }
  }
  throw InvariantError("invalid topology");
}

BoltzmannModel random_model(const ModelSpec& spec, std::uint64_t seed) {
  if (!(spec.weight_sigma >= 0.0) || !(spec.bias_sigma >= 0.0))
    throw InvariantError("standard deviations must be non-negative");
  BoltzmannModel model = structure_of(spec);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> theta(model.parameter_count());
  const std::size_t n_edges = model.edge_count();
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double sigma = i < n_edges ? spec.weight_sigma : spec.bias_sigma;
    const double z = normal(rng);
    theta[i] = sigma * z;
  }
  model.set_parameters(theta);
  return model;
}

std::string serialize_model(const BoltzmannModel& model) {
  nlohmann::json doc;
  doc["version"] = kModelSchemaVersion;
  doc["topology"] = std::string(to_string(model.topology()));
  doc["n_v"] = model.n_visible();
  doc["n_h"] = model.n_hidden();
  doc["layers"] = model.layers();
  auto edges = nlohmann::json::array();
  for (const auto& e : model.edges()) edges.push_back(nlohmann::json::array({e.a, e.b, e.w}));
  doc["edges"] = std::move(edges);
  doc["b"] = model.visible_bias();
  doc["d"] = model.hidden_bias();
  return doc.dump(2);
}

BoltzmannModel deserialize_model(std::string_view document) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(document);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed model document: ") + e.what());
  }
  try {
    if (!doc.is_object()) throw SchemaError("model document must be an object");
    if (!doc.contains("version")) throw SchemaError("model document lacks a version");
    const int version = doc.at("version").get<int>();
    if (version != kModelSchemaVersion)
      throw SchemaError("unsupported model schema version " + std::to_string(version));
    const auto n_v = doc.at("n_v").get<std::size_t>();
    const auto n_h = doc.at("n_h").get<std::size_t>();
    const Topology topology = parse_topology(doc.value("topology", std::string("full")));
    std::vector<int> layers = doc.value("layers", std::vector<int>{});
    std::vector<Edge> edges;
    for (const auto& row : doc.at("edges")) {
      if (!row.is_array() || row.size() != 3) throw SchemaError("edge entries must be [a, b, w]");
      edges.push_back({row[0].get<std::size_t>(), row[1].get<std::size_t>(), row[2].get<double>()});
    }
    return BoltzmannModel(n_v, n_h, topology, std::move(layers), std::move(edges),
                          doc.at("b").get<std::vector<double>>(), doc.at("d").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed model document: ") + e.what());
  }
}

}  // namespace qbm
