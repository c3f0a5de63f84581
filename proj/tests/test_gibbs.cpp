#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "qbm/dataset.hpp"
#include "qbm/error.hpp"
#include "qbm/exact_stats.hpp"
#include "qbm/gibbs.hpp"

using namespace qbm;

namespace {

// Naive oracle: sums e^{-E} directly without any shift.
double naive_log_Z(const BoltzmannModel& m, const std::optional<VisibleVector>& clamp = std::nullopt) {
  double z = 0.0;
  for (const auto& c : enumerate_configurations(m, clamp)) z += std::exp(-energy(m, c));
  return std::log(z);
}

}  // namespace

TEST_CASE("enumeration order and size") {
  const auto m = make_rbm(2, 1);
  std::vector<Configuration> all(enumerate_configurations(m).begin(), enumerate_configurations(m).end());
  REQUIRE(all.size() == 8);
  CHECK(all[0] == Configuration{{0, 0}, {0}});
  CHECK(all[1] == Configuration{{1, 0}, {0}});
  CHECK(all[4] == Configuration{{0, 0}, {1}});
  const VisibleVector x{1, 0};
  std::size_t n = 0;
  for (const auto& c : enumerate_configurations(m, x)) {
    CHECK(c.v == x);
    ++n;
  }
  CHECK(n == 2);
  CHECK_THROWS_AS(Enumeration(make_rbm(20, 10), std::nullopt, 24), CapacityError);
}

TEST_CASE("zero model is uniform") {
  const auto m = make_rbm(3, 2);
  const auto t = gibbs_table(m);
  CHECK(t.log_Z == doctest::Approx(5 * std::log(2.0)));
  for (double p : t.probabilities) CHECK(p == doctest::Approx(1.0 / 32));
}

TEST_CASE("gibbs table matches naive sums") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto m = random_model({3, 3, Topology::full, {}, 0.8, 1.0}, seed);
    const auto t = gibbs_table(m);
    CHECK(t.log_Z == doctest::Approx(naive_log_Z(m)).epsilon(1e-12));
    double s = 0.0;
    for (double p : t.probabilities) s += p;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    const VisibleVector x{1, 0, 1};
    CHECK(gibbs_table(m, x).log_Z == doctest::Approx(naive_log_Z(m, x)).epsilon(1e-12));
  }
}

TEST_CASE("large energies do not overflow") {
  auto m = make_full(2, 2);
  auto theta = m.parameters();
  for (auto& x : theta) x = 400.0;
  m.set_parameters(theta);
  const auto t = gibbs_table(m);
  CHECK(std::isfinite(t.log_Z));
  CHECK(t.probabilities.back() == doctest::Approx(1.0));
}

TEST_CASE("moments") {
  BoltzmannModel m(1, 1, Topology::rbm, {}, {{0, 1, 0.0}}, {std::log(3.0)}, {0.0});
  const auto t = gibbs_table(m);
  CHECK(moment(t, {MomentKind::v, 0, 0}) == doctest::Approx(0.75));
  CHECK(moment(t, {MomentKind::h, 0, 0}) == doctest::Approx(0.5));
  CHECK(moment(t, {MomentKind::vh, 0, 0}) == doctest::Approx(0.375));
  CHECK_THROWS_AS(moment(t, {MomentKind::vh, 2, 0}), DimensionError);
}

TEST_CASE("exact statistics engine agrees with the enumeration oracle") {
  const std::vector<ModelSpec> specs = {{4, 3, Topology::rbm, {}, 0.7, 1.0},
                                        {4, 4, Topology::drbm, {2, 2}, 0.7, 1.0},
                                        {3, 3, Topology::full, {}, 0.7, 1.0}};
  for (const auto& spec : specs)
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto m = random_model(spec, seed);
      const auto t = gibbs_table(m);
      const auto s = exact_statistics(m);
      CHECK(s.log_partition == doctest::Approx(t.log_Z).epsilon(1e-12));
      for (std::size_t k = 0; k < m.n_units(); ++k)
        CHECK(s.unit_means[k] == doctest::Approx(unit_moment(t, k, k)).epsilon(1e-12));
      for (std::size_t e = 0; e < m.edge_count(); ++e)
        CHECK(s.edge_means[e] == doctest::Approx(unit_moment(t, m.edges()[e].a, m.edges()[e].b)).epsilon(1e-12));

      VisibleVector x(m.n_visible());
      for (std::size_t i = 0; i < x.size(); ++i) x[i] = (seed >> i) & 1U;
      std::vector<double> xd(x.begin(), x.end());
      const auto tc = gibbs_table(m, x);
      const auto sc = exact_statistics(m, xd);
      CHECK(sc.log_partition == doctest::Approx(tc.log_Z).epsilon(1e-12));
      for (std::size_t e = 0; e < m.edge_count(); ++e)
        CHECK(sc.edge_means[e] == doctest::Approx(unit_moment(tc, m.edges()[e].a, m.edges()[e].b)).epsilon(1e-12));
    }
}

TEST_CASE("exact statistics input checks") {
  const auto m = make_rbm(3, 2);
  const std::vector<double> short_clamp{1.0, 0.0};
  CHECK_THROWS_AS(exact_statistics(m, short_clamp), DimensionError);
  const std::vector<double> bad{1.0, 0.0, 1.5};
  CHECK_THROWS_AS(exact_statistics(m, bad), DomainError);
  CHECK_THROWS_AS(exact_statistics(make_full(20, 10)), CapacityError);
}

TEST_CASE("dataset compression and expansion") {
  Dataset d = Dataset::from_bits(2, {{1, 0}, {0, 1}, {1, 0}});
  const auto c = d.compressed();
  REQUIRE(c.size() == 2);
  CHECK(c.weight(0) == 2.0);
  CHECK(c.bits(0) == VisibleVector{1, 0});
  CHECK(c.expanded_indices() == std::vector<std::size_t>{0, 0, 1});
  CHECK_THROWS_AS(d.add({0.5}), DimensionError);
  CHECK_THROWS_AS(d.add({0.5, 2.0}), DomainError);
  d.add({0.5, 0.25});
  CHECK_FALSE(d.is_binary());
  CHECK_THROWS_AS(d.bits(3), DomainError);
}
