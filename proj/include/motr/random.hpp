#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace motr {

// Single random stream owned by one chain. All sampler randomness flows
// through here so that (seed, stream) fully determines a run.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  double uniform();  // U[0,1)
  double normal();   // N(0,1)
  double normal(double mean, double sd) { return mean + sd * normal(); }
  double exponential();                     // Exp(1)
  double gamma(double shape, double rate);  // density ∝ x^(shape-1) exp(-rate x)
  double inverse_gamma(double shape, double scale);
  std::vector<double> dirichlet(const std::vector<double>& concentration);

  // Uniform integer in [0, n).
  std::size_t index(std::size_t n);
  // Index drawn proportionally to nonnegative weights.
  std::size_t categorical(const std::vector<double>& weights);

  // N(mean, 1) restricted to (0, inf) when positive, else (-inf, 0].
  double truncated_normal_unit(double mean, bool positive);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

// Draw from N(0,1) restricted to [lower, inf). Uses naive rejection when the
// bound is at or below zero and an exponential proposal with the optimal
// rate otherwise, so far tails cost O(1) expected draws.
double sample_lower_truncated_std_normal(double lower, Rng& rng);

}  // namespace motr
