#pragma once

#include <cstddef>
#include <cstdint>
#include <iterator>
#include <optional>
#include <vector>

#include "qbm/model.hpp"

namespace qbm {

using VisibleVector = std::vector<std::uint8_t>;

inline constexpr std::size_t kDefaultEnumerationCap = 24;

/// Exhaustive enumeration of configurations, optionally with the visible units
/// clamped. Configurations are visited in increasing packed-state order, i.e.
/// lexicographically with the highest-indexed unit most significant.
class Enumeration {
 public:
  class iterator {
   public:
    using iterator_category = std::forward_iterator_tag;
    using value_type = Configuration;
    using difference_type = std::ptrdiff_t;
    using pointer = void;
    using reference = Configuration;

    iterator() = default;
    iterator(const Enumeration* owner, std::uint64_t index) : owner_(owner), index_(index) {}
    Configuration operator*() const { return unpack(*owner_->model_, owner_->state(index_)); }
    iterator& operator++() {
      ++index_;
      return *this;
    }
    iterator operator++(int) {
      auto copy = *this;
      ++index_;
      return copy;
    }
    bool operator==(const iterator& o) const { return index_ == o.index_; }

   private:
    const Enumeration* owner_ = nullptr;
    std::uint64_t index_ = 0;
  };

  /// Throws CapacityError when the number of free units exceeds `cap`.
  Enumeration(const BoltzmannModel& model, const std::optional<VisibleVector>& clamp,
              std::size_t cap = kDefaultEnumerationCap);

  std::uint64_t size() const noexcept { return std::uint64_t{1} << free_units_; }
  State state(std::uint64_t index) const noexcept {
    return clamped_ ? (clamp_bits_ | (index << model_->n_visible())) : index;
  }
  iterator begin() const { return {this, 0}; }
  iterator end() const { return {this, size()}; }

 private:
  const BoltzmannModel* model_;
  bool clamped_ = false;
  State clamp_bits_ = 0;
  std::size_t free_units_ = 0;
};

/// Lazily enumerates every configuration (all 2^(n_v+n_h), or the 2^n_h with
/// v fixed to `clamp`). The model must outlive the returned range.
Enumeration enumerate_configurations(const BoltzmannModel& model,
                                     const std::optional<VisibleVector>& clamp = std::nullopt,
                                     std::size_t cap = kDefaultEnumerationCap);

/// Exact Gibbs distribution of a model (or of its hidden units given a clamp).
struct GibbsTable {
  BoltzmannModel model;
  std::optional<VisibleVector> clamp;
  /// Probability of each configuration in enumeration order.
  std::vector<double> probabilities;
  /// log Z, or log Z_x when clamped.
  double log_Z = 0.0;
  /// Packed clamp (zero when unclamped).
  State clamp_bits = 0;

  std::uint64_t size() const noexcept { return probabilities.size(); }
  State state(std::uint64_t index) const noexcept {
    return clamp ? (clamp_bits | (index << model.n_visible())) : index;
  }
};

GibbsTable gibbs_table(const BoltzmannModel& model, const std::optional<VisibleVector>& clamp = std::nullopt,
                       std::size_t cap = kDefaultEnumerationCap);

enum class MomentKind { vh, vv, hh, v, h };

/// Selects <v_i h_j>, <v_i v_j>, <h_i h_j>, <v_i> or <h_i> (j unused for
/// first moments). Indices are within the visible / hidden groups.
struct MomentSelector {
  MomentKind kind = MomentKind::v;
  std::size_t i = 0;
  std::size_t j = 0;
};

double moment(const GibbsTable& table, const MomentSelector& selector);

/// Expectation of s_a s_b (a == b gives <s_a>) with global unit indices.
double unit_moment(const GibbsTable& table, std::size_t a, std::size_t b);

}  // namespace qbm
