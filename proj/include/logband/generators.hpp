#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "logband/instance.hpp"

namespace logband {

// X = Z = {e_1..e_d, cos(0.1) e_1 + sin(0.1) e_2}, theta* = e_1
TransductiveInstance gen_fig1_benchmark(Eigen::Index d);

// Z = X = {e1, e2}, theta* = (r, r - eps)
TransductiveInstance gen_example1(double r, double eps);
// X = {e1, e2, e1 - e2}, Z = {e1, e2}. |e1 - e2| = sqrt(2), so the unit-ball check is waived.
TransductiveInstance gen_example2(double r, double eps);

struct PairwiseInstance {
  TransductiveInstance instance;
  // x_arms[i] = z_arms[first] - z_arms[second]
  std::vector<std::pair<std::size_t, std::size_t>> provenance;
};

// Items are random directions of norm 1/2, so every difference lies in the unit ball.
PairwiseInstance gen_pairwise(std::size_t n_items, Eigen::Index d, std::uint64_t seed, std::size_t cap = 5000,
                              double theta_norm = 1.0);

struct GaussianBurnin {
  std::vector<std::int64_t> prefixes;
  std::vector<double> xi_sq_series;
  std::vector<double> threshold_series;  // 1/gamma(d) at each prefix
  std::optional<std::int64_t> satisfied_at;
  double scale = 1.0;
};

// Arms from N(0, I/d) scaled by c < 1 (and clipped to the unit ball); theta* = s_norm * uniform direction.
GaussianBurnin gen_gaussian_burnin(Eigen::Index d, double s_norm, std::int64_t t, std::uint64_t seed,
                                   double delta = 0.05, int checkpoints = 200);

}  // namespace logband
