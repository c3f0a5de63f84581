#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "qbm/error.hpp"
#include "qbm/gibbs.hpp"
#include "qbm/meanfield.hpp"
#include "qbm/qprep.hpp"
#include "qbm/resources.hpp"

using namespace qbm;

namespace {

double total_variation(const std::vector<double>& a, const std::vector<double>& b) {
  double tv = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) tv += std::abs(a[i] - b[i]);
  return 0.5 * tv;
}

BoltzmannModel biased_rbm(std::size_t n_v, std::size_t n_h) {
  auto m = make_rbm(n_v, n_h);
  auto p = m.parameters();
  for (std::size_t k = m.edge_count(); k < p.size(); ++k) p[k] = 0.1 * static_cast<double>(k % 5) - 0.2;
  m.set_parameters(p);
  return m;
}

}  // namespace

TEST_CASE("acceptance weights") {
  const auto flat = biased_rbm(3, 2);
  const auto fs = solve_mean_field(flat);
  for (const auto& c : enumerate_configurations(flat)) CHECK(acceptance_weight(flat, fs, 1.0, c) == doctest::Approx(1.0));

  const auto m = random_model({4, 3, Topology::rbm, {}, 0.6, 1.0}, 21);
  const auto sol = solve_mean_field(m);
  const Configuration c{{1, 0, 1, 0}, {1, 1, 0}};
  double prev = acceptance_weight(m, sol, 1.0, c);
  for (double kappa : {2.0, 4.0, 16.0, 1e3, 1e6}) {
    const double w = acceptance_weight(m, sol, kappa, c);
    CHECK(w <= prev);
    prev = w;
  }
  CHECK(prev < 1e-5);
  CHECK_THROWS_AS(acceptance_weight(m, sol, 0.5, c), DomainError);

  const std::vector<double> grid{1.0};
  const double kmin = kappa_report(m, sol, grid).kappa_min;
  double max_ratio = -INFINITY;
  for (State s = 0; s < 128; ++s) max_ratio = std::max(max_ratio, log_acceptance_ratio(m, sol, kmin, s));
  CHECK(std::abs(std::exp(max_ratio) - 1.0) <= 1e-9);
}

TEST_CASE("exact case: kappa at least kappa_min") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto m = random_model({4, 3, Topology::rbm, {}, 0.8, 1.0}, seed);
    const auto sol = solve_mean_field(m);
    const std::vector<double> grid{1.0};
    const double kmin = kappa_report(m, sol, grid).kappa_min;
    for (double kappa : {kmin, 2.0 * kmin}) {
      const auto prep = prep_model(m, sol, kappa);
      CHECK(total_variation(prep.postselected, prep.exact) < 1e-10);
      CHECK(std::abs(prep.success_probability - std::exp(prep.log_Z - std::log(kappa) - sol.log_Z_Q)) <= 1e-10);
      CHECK(prep.bad_mass == 0.0);
      CHECK(prep.success_probability >= 1.0 / kappa);
    }
  }
  const auto flat = biased_rbm(3, 3);
  CHECK(prep_model(flat, solve_mean_field(flat), 1.0).success_probability == doctest::Approx(1.0));
}

TEST_CASE("fidelity bound when kappa is too small") {
  std::size_t checked = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto m = random_model({6, 4, Topology::rbm, {}, 0.5, 1.0}, 1000 + seed);
    const auto sol = solve_mean_field(m);
    const std::vector<double> grid{1.0};
    const double kmin = kappa_report(m, sol, grid).kappa_min;
    for (double kappa : {std::max(1.0, kmin / 4.0), 1.0}) {
      const auto prep = prep_model(m, sol, kappa);
      // Independent oracle for epsilon and the success expression.
      const auto t = gibbs_table(m);
      double bad_p = 0.0, bad_q = 0.0, good_p = 0.0;
      for (State s = 0; s < t.size(); ++s) {
        const double q = std::exp(log_q_probability(sol, s));
        const double ratio = t.probabilities[s] * std::exp(t.log_Z - sol.log_Z_Q) / (kappa * q);
        if (ratio > 1.0) {
          bad_p += t.probabilities[s];
          bad_q += q;
        } else {
          good_p += t.probabilities[s];
        }
      }
      const double z_ratio = std::exp(sol.log_Z_Q - t.log_Z);
      const double eps = bad_p - kappa * z_ratio * bad_q;
      CHECK(prep.epsilon == doctest::Approx(eps).epsilon(1e-9));
      CHECK(prep.success_probability == doctest::Approx(good_p / (kappa * z_ratio) + bad_q).epsilon(1e-10));
      if (eps <= 1.0) {
        CHECK(prep.fidelity_vs_exact >= 1.0 - eps - 1e-12);
        ++checked;
      }
    }
  }
  CHECK(checked >= 100);
}

TEST_CASE("monotonicity in kappa") {
  const auto m = random_model({4, 4, Topology::rbm, {}, 1.0, 1.0}, 77);
  const auto sol = solve_mean_field(m);
  double prev_s = 2.0, prev_f = -1.0;
  for (double kappa : log_grid(1.0, 50.0, 30)) {
    const auto prep = prep_model(m, sol, kappa);
    CHECK(prep.success_probability <= prev_s + 1e-15);
    CHECK(prep.fidelity_vs_exact >= prev_f - 1e-12);
    prev_s = prep.success_probability;
    prev_f = prep.fidelity_vs_exact;
  }
}

TEST_CASE("clamped preparation uses the clamped distributions") {
  const auto m = random_model({4, 4, Topology::drbm, {2, 2}, 0.8, 1.0}, 5);
  const VisibleVector x{1, 1, 0, 1};
  const auto sx = solve_mean_field(m, x);
  const std::vector<double> grid{1.0};
  const double kmin = kappa_report(m, sx, grid).kappa_min;
  CHECK(kmin > 1.0);
  const auto prep = prep_model(m, sx, kmin);
  CHECK(prep.size() == 16);
  const auto tx = gibbs_table(m, x);
  CHECK(total_variation(prep.postselected, tx.probabilities) < 1e-10);
  CHECK(prep.state(3) == tx.state(3));

  // Clamped RBM hidden units are conditionally independent: Q_x = P_x.
  const auto rbm = random_model({4, 3, Topology::rbm, {}, 0.8, 1.0}, 5);
  const auto rx = solve_mean_field(rbm, x);
  const double rk = kappa_report(rbm, rx, grid).kappa_min;
  CHECK(std::abs(rk - 1.0) <= 1e-12);
  CHECK(prep_model(rbm, rx, std::max(1.0, rk)).fidelity_vs_exact == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sampling moments match the exact table") {
  const auto m = random_model({4, 3, Topology::rbm, {}, 0.8, 1.0}, 8);
  const auto sol = solve_mean_field(m);
  const std::vector<double> grid{1.0};
  const auto prep = prep_model(m, sol, kappa_report(m, sol, grid).kappa_min * 1.5);
  const std::size_t n = 100000;
  const auto samples = sample_prep(prep, n, 123);
  REQUIRE(samples.states.size() == n);
  const auto t = gibbs_table(m);
  for (std::size_t k = 0; k < m.n_units(); ++k) {
    double hits = 0.0;
    for (State s : samples.states) hits += double((s >> k) & 1U);
    const double p = unit_moment(t, k, k);
    const double se = std::sqrt(p * (1.0 - p) / double(n));
    CHECK(std::abs(hits / double(n) - p) <= 4.0 * se);
  }
  CHECK(samples.configurations().size() == n);
  CHECK(sample_prep(prep, 50, 9).states == sample_prep(prep, 50, 9).states);
}

TEST_CASE("repetition cost models") {
  PrepModel prep{make_rbm(1, 1), {}, 1.0, 1.0, {0.25, 0.25, 0.25, 0.25}, {0.25, 0.25, 0.25, 0.25}};
  prep.sol.mu = {0.5};
  prep.sol.nu = {0.5};
  CHECK(sample_prep(prep, 1000, 1).resources.state_preparations == 1000.0);
  CHECK(sample_prep(prep, 1000, 1, true).resources.state_preparations == 1000.0);

  prep.success_probability = 0.01;
  const std::size_t n = 10000;
  const auto plain = sample_prep(prep, n, 2);
  CHECK(std::abs(plain.resources.state_preparations / double(n) - 100.0) <= 10.0);
  const auto amp = sample_prep(prep, n, 2, true);
  CHECK(amp.resources.expected_preps_with_amplification == 8.0);
  CHECK(amp.resources.state_preparations == 8.0 * double(n));
  CHECK(amplified_repetitions(0.01) == std::ceil(M_PI / (4.0 * std::asin(0.1))));
}

TEST_CASE("resource formulas") {
  // 6 x 8 RBM has 48 edges.
  const auto m = make_rbm(6, 8);
  ResourceQuery q;
  q.kappa = 4.0;
  q.kappa_x_max = 4.0;
  q.n_train = 1e4;
  const auto r = resource_report(m, q);
  CHECK(r.operation_estimate == doctest::Approx(1.92e6));
  CHECK(r.operation_estimate_proof_form == doctest::Approx(1e4 * 48 * std::sqrt(8.0)));
  CHECK(r.qubit_estimate == 46);
  CHECK(r.formula_estimate);
  CHECK(r.success_probability == doctest::Approx(1.0 / 8.0));

  q.mode = EstimatorMode::geqae;
  CHECK_THROWS_AS(resource_report(m, q), ConfigError);
  q.delta = 0.01;
  CHECK(resource_report(m, q).operation_estimate == doctest::Approx(48.0 * 48.0 * 8.0 / 0.01));
  q.kappa = 0.5;
  CHECK_THROWS_AS(resource_report(m, q), DomainError);

  ResourceReport a, b;
  a.state_preparations = 3;
  b.state_preparations = 4;
  b.oracle_queries = 2;
  a += b;
  CHECK(a.state_preparations == 7);
  CHECK(a.oracle_queries == 2);
}

TEST_CASE("GEQAE is cheaper exactly when sqrt(N) dominates the edge count") {
  // Matched accuracy: GEQS with N samples per term has error ~ 1/sqrt(N).
  for (std::size_t n_v : {2, 4, 8, 16})
    for (double n_train : {1e2, 1e4, 1e6, 1e8}) {
      const auto m = make_rbm(n_v, n_v);
      const double E = double(m.edge_count());
      ResourceQuery q;
      q.n_train = n_train;
      const double geqs = resource_report(m, q).operation_estimate;
      q.mode = EstimatorMode::geqae;
      q.delta = 1.0 / std::sqrt(n_train);
      const double geqae = resource_report(m, q).operation_estimate;
      if (std::sqrt(n_train) >= 10.0 * E) CHECK(geqae < geqs);
      if (std::sqrt(n_train) <= E / 10.0) CHECK(geqae > geqs);
      CHECK((geqae < geqs) == (std::sqrt(n_train) > E));
    }
}

TEST_CASE("prep scan csv") {
  const auto m = random_model({3, 2, Topology::rbm, {}, 0.5, 1.0}, 3);
  const auto sol = solve_mean_field(m);
  const std::vector<double> kappas{1.0, 2.0};
  std::ostringstream out;
  write_prep_scan_csv(out, m, sol, kappas, {{"seed", "3"}});
  const auto s = out.str();
  CHECK(s.rfind("# seed=3\nkappa,success,fidelity,bad_mass,epsilon\n", 0) == 0);
}
