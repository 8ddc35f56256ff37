#include "motr/random.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace motr {

Rng::Rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x6d6f7472u};
  engine_.seed(seq);
}

double Rng::uniform() { return uniform_(engine_); }

double Rng::normal() { return normal_(engine_); }

double Rng::exponential() {
  // 1 - U lies in (0, 1], so the log is finite.
  return -std::log1p(-uniform());
}

double Rng::gamma(double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0)) throw std::invalid_argument("gamma: shape and rate must be positive");
  std::gamma_distribution<double> dist(shape, 1.0 / rate);
  return dist(engine_);
}

double Rng::inverse_gamma(double shape, double scale) { return 1.0 / gamma(shape, scale); }

std::vector<double> Rng::dirichlet(const std::vector<double>& concentration) {
  std::vector<double> draw(concentration.size());
  double total = 0.0;
  for (std::size_t j = 0; j < draw.size(); ++j) {
    draw[j] = gamma(concentration[j], 1.0);
    total += draw[j];
  }
  if (!(total > 0.0)) {
    // All components underflowed; fall back to the mean of the distribution.
    total = std::accumulate(concentration.begin(), concentration.end(), 0.0);
    for (std::size_t j = 0; j < draw.size(); ++j) draw[j] = concentration[j] / total;
    return draw;
  }
  for (double& d : draw) d /= total;
  return draw;
}

std::size_t Rng::index(std::size_t n) {
  if (n == 0) throw std::invalid_argument("index: empty range");
  std::uniform_int_distribution<std::size_t> dist(0, n - 1);
  return dist(engine_);
}

std::size_t Rng::categorical(const std::vector<double>& weights) {
  double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0)) throw std::invalid_argument("categorical: weights sum to zero");
  double u = uniform() * total;
  double cum = 0.0;
  std::size_t last = 0;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    if (weights[j] <= 0.0) continue;
    last = j;
    cum += weights[j];
    if (u < cum) return j;
  }
  return last;
}

double sample_lower_truncated_std_normal(double lower, Rng& rng) {
  if (lower <= 0.0) {
    double z;
    do {
      z = rng.normal();
    } while (z < lower);
    return z;
  }
  const double rate = 0.5 * (lower + std::sqrt(lower * lower + 4.0));
  while (true) {
    double z = lower + rng.exponential() / rate;
    double d = z - rate;
    if (rng.uniform() <= std::exp(-0.5 * d * d)) return z;
  }
}

double Rng::truncated_normal_unit(double mean, bool positive) {
  // z = mean + e with e >= -mean (positive side) or e <= -mean (negative side).
  if (positive) return mean + sample_lower_truncated_std_normal(-mean, *this);
  return mean - sample_lower_truncated_std_normal(mean, *this);
}

}  // namespace motr
