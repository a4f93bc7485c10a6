#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "logband/linalg.hpp"
#include "logband/logistic.hpp"
#include "logband/rng.hpp"

namespace logband {

enum class ContextKind { Gaussian, UniformBall, Finite };

// Per-step arm sets. Gaussian: N(0, I/d) clipped to the unit ball.
// Finite: each step draws one of `finite_sets` uniformly.
struct ContextModel {
  Eigen::Index d = 2;
  int k = 2;
  Vec theta_star;
  ContextKind kind = ContextKind::Gaussian;
  std::vector<ArmList> finite_sets;

  void validate() const;
};

// Arm set of step t is a pure function of (seed, t).
class ContextSampler {
 public:
  ContextSampler(const ContextModel& model, std::uint64_t seed);
  ArmList arms(std::int64_t t) const;

 private:
  ContextModel model_;
  std::uint64_t key_;
};

enum class StepBranch { BurnIn, Explore, Exploit, Random };
char branch_code(StepBranch b);

struct StepRecord {
  std::int64_t t = 0;
  int level = 0;  // 0 during burn-in and for the uniform policy
  StepBranch branch = StepBranch::Random;
  int arm = 0;
  int best = 0;
  double regret = 0.0;
  // bucket the step was committed to: 1..S, S+1 for the width bucket, 0 for exploitation
  int bucket = 0;
  int filters = 0;  // branch-(c) passes before the decision
};

struct RegretTrace {
  std::string policy;
  std::int64_t horizon = 0;
  std::int64_t tau = 0;
  int s_levels = 0;
  double alpha = 0.0;
  std::vector<StepRecord> steps;
  std::vector<double> cumulative;
  std::array<std::int64_t, 4> branch_counts{};  // indexed by StepBranch
  std::int64_t filter_passes = 0;
  int separation_events = 0;
  // diagnostics
  double z_linear = 0.0;
  double z_cubic = 0.0;
  double kappa = 0.0;
  double sigma0_sq_empirical = 0.0;
  std::vector<std::vector<std::int64_t>> bucket_steps;  // provenance, same indexing as StepRecord::bucket
};

// Buckets Psi_0..Psi_S and Phi = Psi_{S+1}; each keeps its own samples and estimate.
class BucketState {
 public:
  BucketState(Eigen::Index d, int s_levels, MleOptions mle = {});

  int levels() const { return s_; }
  void add(int bucket, std::int64_t t, const Vec& x, int y);
  const LogisticDataset& data(int bucket) const { return data_[static_cast<std::size_t>(bucket)]; }
  const std::vector<std::int64_t>& steps(int bucket) const { return steps_[static_cast<std::size_t>(bucket)]; }

  // MLE on bucket s alone; refit only after the bucket changed. On separation the
  // last valid estimate (initially zero) is kept and the event counted.
  const Vec& theta(int bucket);
  const Vec& theta_phi() { return theta(s_ + 1); }
  // pseudo-inverse of H^{(s)}(theta_Phi) over the samples of bucket s
  const SymPinv& width_pinv(int bucket);
  int separation_events() const { return separations_; }

 private:
  Eigen::Index d_;
  int s_;
  MleOptions mle_;
  std::vector<LogisticDataset> data_;
  std::vector<std::vector<std::int64_t>> steps_;
  std::vector<Vec> theta_;
  std::vector<bool> theta_dirty_;
  std::vector<SymPinv> pinv_;
  std::vector<bool> pinv_dirty_;
  Vec pinv_at_;
  int separations_ = 0;
};

struct MeanWidth {
  double mean = 0.0;
  double width = 0.0;
};

// m = <x, theta^{(s)}>, w = alpha sqrt(2.2) |x|_{H^{(s)}(theta_Phi)^+}; +inf when x leaves the span
MeanWidth compute_mean_width(const Vec& x, BucketState& buckets, int s, double alpha);

// alpha = 3.5 sqrt(ln(2 (2 + tau) 2 S T K / delta))
double suplogistic_alpha(double tau, int s_levels, std::int64_t horizon, int k, double delta);
// d / kappa^2 + ln^2(K/delta) / (d kappa^2), or with d^3 in the first term
double suplogistic_z(Eigen::Index d, int k, double delta, double kappa, bool cubic);

struct SupLogisticOptions {
  std::optional<double> alpha;
  std::optional<std::int64_t> tau;
  bool keep_buckets = false;
  MleOptions mle;
};

RegretTrace sup_logistic(const ContextModel& model, std::int64_t horizon, double delta, std::uint64_t seed,
                         const SupLogisticOptions& opts = {});
RegretTrace uniform_policy(const ContextModel& model, std::int64_t horizon, std::uint64_t seed);

// mu(max_a x_a^T theta) - mu(x_chosen^T theta), per step
std::vector<double> pseudo_regret(const std::vector<ArmList>& contexts, const std::vector<int>& chosen,
                                  const Vec& theta);

std::string trace_csv(const RegretTrace& trace);
std::string trace_summary_json(const RegretTrace& trace);

}  // namespace logband
