#include "qbm/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "qbm/error.hpp"

namespace qbm {

Enumeration::Enumeration(const BoltzmannModel& model, const std::optional<VisibleVector>& clamp,
                         std::size_t cap)
    : model_(&model), clamped_(clamp.has_value()) {
  free_units_ = clamped_ ? model.n_hidden() : model.n_units();
  const std::size_t hard_limit = 62;
  if (free_units_ > cap || free_units_ > hard_limit)
    throw CapacityError("enumeration over " + std::to_string(free_units_) +
                        " free units exceeds the cap of " + std::to_string(std::min(cap, hard_limit)));
  if (clamped_) clamp_bits_ = pack_visible(model, *clamp);
}

Enumeration enumerate_configurations(const BoltzmannModel& model, const std::optional<VisibleVector>& clamp,
                                     std::size_t cap) {
  return Enumeration(model, clamp, cap);
}

GibbsTable gibbs_table(const BoltzmannModel& model, const std::optional<VisibleVector>& clamp, std::size_t cap) {
  GibbsTable table{model, clamp, {}, 0.0, 0};
  const Enumeration configs(table.model, clamp, cap);
  if (clamp) table.clamp_bits = pack_visible(table.model, *clamp);
  const std::uint64_t count = configs.size();
  table.probabilities.resize(count);
  double max_neg_energy = -std::numeric_limits<double>::infinity();
  for (std::uint64_t i = 0; i < count; ++i) {
    const double x = -energy(table.model, configs.state(i));
    table.probabilities[i] = x;
    max_neg_energy = std::max(max_neg_energy, x);
  }
  double sum = 0.0;
  for (auto& p : table.probabilities) {
    p = std::exp(p - max_neg_energy);
    sum += p;
  }
  for (auto& p : table.probabilities) p /= sum;
  table.log_Z = max_neg_energy + std::log(sum);
  return table;
}

double unit_moment(const GibbsTable& table, std::size_t a, std::size_t b) {
  const std::size_t n = table.model.n_units();
  if (a >= n || b >= n) throw DimensionError("moment index out of range");
  const State mask = (State{1} << a) | (State{1} << b);
  double m = 0.0;
  for (std::uint64_t i = 0; i < table.size(); ++i)
    if ((table.state(i) & mask) == mask) m += table.probabilities[i];
  return m;
}

double moment(const GibbsTable& table, const MomentSelector& s) {
  const std::size_t n_v = table.model.n_visible();
  const std::size_t n_h = table.model.n_hidden();
  auto check = [](std::size_t idx, std::size_t limit) {
    if (idx >= limit) throw DimensionError("moment index out of range");
  };
  switch (s.kind) {
    case MomentKind::vh:
      check(s.i, n_v);
      check(s.j, n_h);
      return unit_moment(table, s.i, n_v + s.j);
    case MomentKind::vv:
      check(s.i, n_v);
      check(s.j, n_v);
      return unit_moment(table, s.i, s.j);
    case MomentKind::hh:
      check(s.i, n_h);
      check(s.j, n_h);
      return unit_moment(table, n_v + s.i, n_v + s.j);
    case MomentKind::v:
      check(s.i, n_v);
      return unit_moment(table, s.i, s.i);
    case MomentKind::h:
      check(s.i, n_h);
      return unit_moment(table, n_v + s.i, n_v + s.i);
  }
  throw DimensionError("invalid moment selector");
}

}  // namespace qbm
