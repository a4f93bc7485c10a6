#include "logband/instance.hpp"

#include <cmath>
#include <cstdio>

#include "logband/error.hpp"
#include "logband/kernels.hpp"

namespace logband {

void TransductiveInstance::validate() const {
  if (x_arms.empty() || z_arms.empty()) fail(ErrorCode::InvalidInstance, "empty X or Z");
  if (theta_star.size() == 0 || !theta_star.allFinite()) fail(ErrorCode::InvalidInstance, "bad theta*");
  validate_arms(x_arms, dim(), allow_outside_unit_ball);
  validate_arms(z_arms, dim(), allow_outside_unit_ball);
  best_index();
}

std::size_t TransductiveInstance::best_index() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < z_arms.size(); ++i)
    if (z_arms[i].dot(theta_star) > z_arms[best].dot(theta_star)) best = i;
  const double top = z_arms[best].dot(theta_star);
  for (std::size_t i = 0; i < z_arms.size(); ++i)
    if (i != best && z_arms[i].dot(theta_star) == top) fail(ErrorCode::InvalidInstance, "best item is not unique");
  return best;
}

double TransductiveInstance::min_gap() const {
  const std::size_t b = best_index();
  const double top = z_arms[b].dot(theta_star);
  double g = INFINITY;
  for (std::size_t i = 0; i < z_arms.size(); ++i)
    if (i != b) g = std::min(g, top - z_arms[i].dot(theta_star));
  return g;
}

std::string instance_hash(const TransductiveInstance& inst) {
  std::uint64_t h = fnv1a64(inst.id.data(), inst.id.size());
  auto vec = [&h](const Vec& v) { h = fnv1a64(v.data(), sizeof(double) * static_cast<std::size_t>(v.size()), h); };
  const std::uint64_t sizes[3] = {inst.x_arms.size(), inst.z_arms.size(), static_cast<std::uint64_t>(inst.dim())};
  h = fnv1a64(sizes, sizeof sizes, h);
  for (const auto& x : inst.x_arms) vec(x);
  for (const auto& z : inst.z_arms) vec(z);
  vec(inst.theta_star);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RewardEnv::RewardEnv(Vec theta_star, std::uint64_t seed, std::uint64_t stream)
    : theta_(std::move(theta_star)), rng_(seed, stream) {}

int RewardEnv::pull(const Vec& arm) {
  const double p = link_mu(arm.dot(theta_));
  return rng_.uniform(counter_++) < p ? 1 : 0;
}

std::int64_t RewardEnv::pull_counts(const Vec& arm, std::int64_t n) {
  if (n <= 0) return 0;
  const double p = link_mu(arm.dot(theta_));
  const std::int64_t ones = kernels::count_successes(rng_, counter_, n, p);
  counter_ += static_cast<std::uint64_t>(n);
  return ones;
}

LogisticDataset RewardEnv::sample_allocation(const RoundedAllocation& alloc, int source) {
  LogisticDataset data(theta_.size());
  for (std::size_t i = 0; i < alloc.arms.size(); ++i) {
    if (alloc.counts[i] == 0) continue;
    data.add_counts(alloc.arms[i], alloc.counts[i], pull_counts(alloc.arms[i], alloc.counts[i]), source);
  }
  return data;
}

}  // namespace logband
