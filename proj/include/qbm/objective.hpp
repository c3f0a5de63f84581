#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "qbm/dataset.hpp"
#include "qbm/gibbs.hpp"
#include "qbm/model.hpp"
#include "qbm/resources.hpp"

namespace qbm {

enum class GradientMethod { exact, geqs, geqae, cd_k };

std::string_view to_string(GradientMethod m);

/// Ascent direction of O_ML with respect to every model parameter.
struct GradientEstimate {
  std::vector<double> d_weights;
  std::vector<double> d_visible_bias;
  std::vector<double> d_hidden_bias;
  /// Standard error per parameter in flat parameter order, when estimated.
  std::optional<std::vector<double>> stderr_flat;
  ResourceReport resources;
  GradientMethod method = GradientMethod::exact;

  /// Concatenation in model parameter order [weights, b, d].
  std::vector<double> flat() const;
  static GradientEstimate from_flat(const BoltzmannModel& model, const std::vector<double>& flat,
                                    GradientMethod method);
};

/// Unit and edge expectations of one distribution.
struct Moments {
  std::vector<double> unit;
  std::vector<double> edge;
};

/// data - model per component, minus lambda w on the weights only.
GradientEstimate gradient_from_moments(const BoltzmannModel& model, const Moments& data, const Moments& model_side,
                                       double lambda, GradientMethod method);

/// Mean log marginal likelihood of the data minus (lambda / 2) sum w^2.
double oml_objective(const BoltzmannModel& model, const Dataset& data, double lambda,
                     std::size_t cap = kDefaultEnumerationCap);

GradientEstimate exact_gradient(const BoltzmannModel& model, const Dataset& data, double lambda,
                                std::size_t cap = kDefaultEnumerationCap);

struct ObjectiveAndGradient {
  double objective = 0.0;
  GradientEstimate gradient;
};

/// Both quantities from a single pass over the data.
ObjectiveAndGradient objective_and_gradient(const BoltzmannModel& model, const Dataset& data, double lambda,
                                            std::size_t cap = kDefaultEnumerationCap);

}  // namespace qbm
