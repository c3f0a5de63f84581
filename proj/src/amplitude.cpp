#include "qbm/amplitude.hpp"

#include <cmath>

#include "qbm/error.hpp"
#include "qbm/random.hpp"

namespace qbm {

double ae_error_bound(std::size_t L) { return M_PI * (M_PI + 1.0) / static_cast<double>(L); }

std::vector<AEGridPoint> ae_outcome_distribution(double a, std::size_t L) {
  if (!(a >= 0.0 && a <= 1.0)) throw DomainError("amplitude must lie in [0, 1]");
  if (L == 0) throw DomainError("L must be positive");
  const double Ld = static_cast<double>(L);
  const double phase = std::asin(std::sqrt(a)) / M_PI;  // in [0, 1/2]
  std::vector<AEGridPoint> out(L / 2 + 1);
  for (std::size_t y = 0; y <= L / 2; ++y) out[y] = {y, std::pow(std::sin(M_PI * static_cast<double>(y) / Ld), 2), 0.0};
  for (std::size_t y = 0; y < L; ++y) {
    double delta = static_cast<double>(y) / Ld - phase;
    delta -= std::round(delta);
    const double s = std::sin(M_PI * delta);
    double p;
    if (std::abs(s) < 1e-300) {
      p = 1.0;
    } else {
      const double num = std::sin(Ld * M_PI * delta);
      p = num * num / (Ld * Ld * s * s);
    }
    out[y <= L / 2 ? y : L - y].probability += p;
  }
  return out;
}

AEOutcome sample_ae(double a, std::size_t L, std::uint64_t seed) {
  const auto dist = ae_outcome_distribution(a, L);
  Rng rng(seed);
  double total = 0.0;
  for (const auto& g : dist) total += g.probability;
  const double u = uniform01(rng) * total;
  double acc = 0.0;
  std::size_t pick = dist.size() - 1;
  for (std::size_t k = 0; k < dist.size(); ++k) {
    acc += dist[k].probability;
    if (u < acc) {
      pick = k;
      break;
    }
  }
  AEOutcome out;
  out.a_true = a;
  out.L = L;
  out.a_hat = dist[pick].a_hat;
  out.within_bound = std::abs(out.a_hat - a) <= ae_error_bound(L);
  return out;
}

double amplified_probability(double p, std::size_t m) {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("probability must lie in [0, 1]");
  if (m == 0) return p;
  const double s = std::sin(static_cast<double>(2 * m + 1) * std::asin(std::sqrt(p)));
  return s * s;
}

double invert_amplified(double p_s, std::size_t m, double p_upper) {
  if (!(p_s >= 0.0 && p_s <= 1.0)) throw DomainError("probability must lie in [0, 1]");
  const double k = static_cast<double>(2 * m + 1);
  if (p_upper > 0.0 && k * std::asin(std::sqrt(p_upper)) > M_PI / 2 + 1e-12)
    throw DomainError("amplified inversion is ambiguous for this upper bound");
  if (m == 0) return p_s;
  const double s = std::sin(std::asin(std::sqrt(p_s)) / k);
  return s * s;
}

std::size_t choose_m(double p_upper) {
  if (!(p_upper > 0.0 && p_upper <= 1.0)) throw DomainError("upper bound must lie in (0, 1]");
  const double ratio = M_PI / (2.0 * std::asin(std::sqrt(p_upper)));
  auto m = static_cast<std::size_t>(std::floor((ratio - 1.0) / 2.0 + 1e-12));
  while (m > 0 && static_cast<double>(2 * m + 1) * std::asin(std::sqrt(p_upper)) > M_PI / 2 + 1e-12) --m;
  return m;
}

}  // namespace qbm
