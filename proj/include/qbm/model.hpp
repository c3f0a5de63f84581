#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace qbm {

enum class Topology { rbm, drbm, full };

std::string_view to_string(Topology t);
Topology parse_topology(std::string_view name);

/// Undirected weighted edge between two units; stored with a < b.
struct Edge {
  std::size_t a = 0;
  std::size_t b = 0;
  double w = 0.0;
};

/// Binary assignment of visible and hidden units (entries are 0 or 1).
struct Configuration {
  std::vector<std::uint8_t> v;
  std::vector<std::uint8_t> h;

  bool operator==(const Configuration&) const = default;
};

/// Packed configuration: bit k holds unit k, visible units first.
using State = std::uint64_t;

/// Binary Boltzmann machine.
///
/// Units are indexed 0..n_v-1 (visible) followed by n_v..n_v+n_h-1 (hidden).
/// `layers()[k]` is the layer of unit k; layer 0 is the visible layer. The
/// flat parameter vector is laid out as [edge weights..., b..., d...].
class BoltzmannModel {
 public:
  struct Neighbor {
    std::size_t unit;
    std::size_t edge;
  };

  BoltzmannModel() = default;

  /// Validates every structural invariant; throws InvariantError on failure.
  BoltzmannModel(std::size_t n_visible, std::size_t n_hidden, Topology topology,
                 std::vector<int> layers, std::vector<Edge> edges,
                 std::vector<double> visible_bias, std::vector<double> hidden_bias);

  std::size_t n_visible() const noexcept { return n_v_; }
  std::size_t n_hidden() const noexcept { return n_h_; }
  std::size_t n_units() const noexcept { return n_v_ + n_h_; }
  Topology topology() const noexcept { return topology_; }

  const std::vector<int>& layers() const noexcept { return layers_; }
  /// Number of layers including the visible layer.
  std::size_t layer_count() const noexcept { return layer_count_; }
  /// Sizes of each layer, visible layer first.
  std::vector<std::size_t> layer_sizes() const;

  const std::vector<Edge>& edges() const noexcept { return edges_; }
  std::size_t edge_count() const noexcept { return edges_.size(); }
  std::span<const Neighbor> neighbors(std::size_t unit) const;

  const std::vector<double>& visible_bias() const noexcept { return b_; }
  const std::vector<double>& hidden_bias() const noexcept { return d_; }
  double unit_bias(std::size_t unit) const {
    return unit < n_v_ ? b_[unit] : d_[unit - n_v_];
  }

  std::size_t parameter_count() const noexcept { return edges_.size() + n_units(); }
  std::vector<double> parameters() const;
  void set_parameters(std::span<const double> theta);

  /// Sum of squared edge weights.
  double weight_norm2() const;
  double max_abs_weight() const;

  bool operator==(const BoltzmannModel&) const;

 private:
  void build_adjacency();

  std::size_t n_v_ = 0;
  std::size_t n_h_ = 0;
  Topology topology_ = Topology::full;
  std::vector<int> layers_;
  std::size_t layer_count_ = 1;
  std::vector<Edge> edges_;
  std::vector<double> b_;
  std::vector<double> d_;
  std::vector<std::size_t> adj_offset_;
  std::vector<Neighbor> adj_;
};

/// Complete bipartite visible-hidden RBM with zero parameters.
BoltzmannModel make_rbm(std::size_t n_v, std::size_t n_h);
/// Layered dRBM with complete connections between adjacent layers, zero parameters.
BoltzmannModel make_drbm(std::size_t n_v, std::span<const std::size_t> hidden_layers);
/// Complete graph over all units, zero parameters.
BoltzmannModel make_full(std::size_t n_v, std::size_t n_h);

double energy(const BoltzmannModel& model, const Configuration& config);
double energy(const BoltzmannModel& model, State state);

State pack(const BoltzmannModel& model, const Configuration& config);
Configuration unpack(const BoltzmannModel& model, State state);
/// Packs a visible bit vector into the low n_v bits.
State pack_visible(const BoltzmannModel& model, std::span<const std::uint8_t> v);

struct ModelSpec {
  std::size_t n_v = 0;
  std::size_t n_h = 0;
  Topology topology = Topology::rbm;
  /// Hidden layer sizes for drbm; must sum to n_h. Ignored otherwise.
  std::vector<std::size_t> hidden_layers;
  double weight_sigma = 0.1325;
  double bias_sigma = 1.0;
};

/// Structure per `spec` with weights ~ N(0, weight_sigma^2) and biases ~
/// N(0, bias_sigma^2). Deterministic for a fixed seed.
BoltzmannModel random_model(const ModelSpec& spec, std::uint64_t seed);
/// Zero-parameter model with the structure described by `spec`.
BoltzmannModel structure_of(const ModelSpec& spec);

inline constexpr int kModelSchemaVersion = 1;

std::string serialize_model(const BoltzmannModel& model);
BoltzmannModel deserialize_model(std::string_view document);

}  // namespace qbm
