#pragma once

#include <cstdint>
#include <string>

#include "logband/design.hpp"
#include "logband/logistic.hpp"
#include "logband/rng.hpp"

namespace logband {

struct TransductiveInstance {
  std::string id;
  ArmList x_arms;
  ArmList z_arms;
  Vec theta_star;
  bool allow_outside_unit_ball = false;

  Eigen::Index dim() const { return theta_star.size(); }
  // throws InvalidInstance on empty sets, dimension mismatch or a tied best item
  void validate() const;
  std::size_t best_index() const;
  double min_gap() const;
};

// hex FNV-1a over id, dimensions and every coordinate
std::string instance_hash(const TransductiveInstance& inst);

// Bernoulli rewards with mean mu(x^T theta*). Draw i is a pure function of (seed, i).
class RewardEnv {
 public:
  RewardEnv(Vec theta_star, std::uint64_t seed, std::uint64_t stream = 0);

  int pull(const Vec& arm);
  std::int64_t pull_counts(const Vec& arm, std::int64_t n);
  LogisticDataset sample_allocation(const RoundedAllocation& alloc, int source);
  std::uint64_t draws() const { return counter_; }
  const Vec& theta_star() const { return theta_; }

 private:
  Vec theta_;
  KeyedRng rng_;
  std::uint64_t counter_ = 0;
};

}  // namespace logband
