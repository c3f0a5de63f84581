#include "qbm/dataset.hpp"

#include <cmath>
#include <map>

#include "qbm/error.hpp"

namespace qbm {

Dataset Dataset::from_bits(std::size_t n_v, const std::vector<VisibleVector>& rows) {
  Dataset data(n_v);
  for (const auto& r : rows) data.add_bits(r);
  return data;
}

void Dataset::add(std::vector<double> row, double weight) {
  if (row.size() != n_v_) throw DimensionError("dataset row has the wrong length");
  for (double x : row)
    if (!(x >= 0.0 && x <= 1.0)) throw DomainError("dataset values must lie in [0, 1]");
  if (!(weight > 0.0) || !std::isfinite(weight)) throw DomainError("row weights must be positive");
  rows_.push_back(std::move(row));
  weights_.push_back(weight);
}

void Dataset::add_bits(const VisibleVector& row, double weight) {
  std::vector<double> r(row.size());
  for (std::size_t i = 0; i < row.size(); ++i) r[i] = row[i] ? 1.0 : 0.0;
  add(std::move(r), weight);
}

double Dataset::total_weight() const {
  double s = 0.0;
  for (double w : weights_) s += w;
  return s;
}

bool Dataset::is_binary() const {
  for (const auto& r : rows_)
    for (double x : r)
      if (x != 0.0 && x != 1.0) return false;
  return true;
}

VisibleVector Dataset::bits(std::size_t i) const {
  VisibleVector out(n_v_);
  for (std::size_t k = 0; k < n_v_; ++k) {
    const double x = rows_.at(i)[k];
    if (x != 0.0 && x != 1.0) throw DomainError("row is not binary");
    out[k] = x == 1.0 ? 1 : 0;
  }
  return out;
}

Dataset Dataset::compressed() const {
  Dataset out(n_v_);
  std::map<std::vector<double>, std::size_t> index;
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    auto [it, inserted] = index.emplace(rows_[i], out.rows_.size());
    if (inserted) {
      out.rows_.push_back(rows_[i]);
      out.weights_.push_back(weights_[i]);
    } else {
      out.weights_[it->second] += weights_[i];
    }
  }
  return out;
}

std::vector<std::size_t> Dataset::expanded_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const double w = weights_[i];
    if (w != std::floor(w)) throw DomainError("expansion requires integer multiplicities");
    for (std::size_t c = 0; c < static_cast<std::size_t>(w); ++c) out.push_back(i);
  }
  return out;
}

}  // namespace qbm
