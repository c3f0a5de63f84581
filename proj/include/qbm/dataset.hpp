#pragma once

#include <cstddef>
#include <vector>

#include "qbm/gibbs.hpp"

namespace qbm {

/// Training vectors with multiplicities.
///
/// Rows hold values in [0, 1]; ordinary data is binary, while rows propagated
/// through a trained layer carry expected activations.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::size_t n_v) : n_v_(n_v) {}

  static Dataset from_bits(std::size_t n_v, const std::vector<VisibleVector>& rows);

  void add(std::vector<double> row, double weight = 1.0);
  void add_bits(const VisibleVector& row, double weight = 1.0);

  std::size_t n_visible() const noexcept { return n_v_; }
  std::size_t size() const noexcept { return rows_.size(); }
  bool empty() const noexcept { return rows_.empty(); }
  const std::vector<double>& row(std::size_t i) const { return rows_[i]; }
  double weight(std::size_t i) const { return weights_[i]; }
  double total_weight() const;
  bool is_binary() const;
  /// Row i as a bit vector; throws DomainError for non-binary rows.
  VisibleVector bits(std::size_t i) const;

  /// Merges identical rows, summing their weights. Row order follows first
  /// appearance.
  Dataset compressed() const;
  /// Expands integer multiplicities into repeated unit-weight rows.
  std::vector<std::size_t> expanded_indices() const;

 private:
  std::size_t n_v_ = 0;
  std::vector<std::vector<double>> rows_;
  std::vector<double> weights_;
};

}  // namespace qbm
