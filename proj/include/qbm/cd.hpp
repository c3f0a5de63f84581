#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "qbm/dataset.hpp"
#include "qbm/model.hpp"
#include "qbm/objective.hpp"
#include "qbm/optimize.hpp"

namespace qbm {

/// Contrastive-divergence gradient of a bipartite layer on a full batch.
///
/// Every data row (with integer multiplicity) starts k alternating Gibbs
/// sweeps. The positive phase uses P(h | x), the negative phase P(h | v_k).
/// Small layers draw the v_k counts of all copies of a row at once from the
/// exact k-step transition distribution, which is equal in law to running
/// the chains one by one. Throws InvariantError for non-bipartite models.
GradientEstimate cd_k_gradient(const BoltzmannModel& model, const Dataset& batch, std::size_t k,
                               std::uint64_t seed, double lambda = 0.0);

/// Same estimator, always simulating each chain individually.
GradientEstimate cd_k_gradient_per_chain(const BoltzmannModel& model, const Dataset& batch, std::size_t k,
                                         std::uint64_t seed, double lambda = 0.0);

/// P(h_j = 1 | v) for every hidden unit of a bipartite layer.
std::vector<double> hidden_activation(const BoltzmannModel& model, const std::vector<double>& v);

/// Data propagated to the next layer as expected activations P(h | x).
Dataset propagate_up(const BoltzmannModel& layer, const Dataset& data);

/// Bipartite RBM between layers `layer - 1` and `layer` of a dRBM, with the
/// dRBM's weights, the lower layer's biases as visible biases and the upper
/// layer's as hidden biases.
BoltzmannModel extract_layer(const BoltzmannModel& drbm, std::size_t layer);

struct LayerwiseResult {
  BoltzmannModel model;
  std::vector<OptimizeResult> layers;
};

/// Greedy layer-by-layer CD-k training starting from the parameters of
/// `drbm`. Each layer takes its biases from the RBM in which it is the visible
/// side; the top layer takes the hidden biases of the last RBM.
LayerwiseResult greedy_layerwise_train(const BoltzmannModel& drbm, const Dataset& data, const TrainerConfig& trainer,
                                       std::size_t k = 1);

}  // namespace qbm
