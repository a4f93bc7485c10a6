#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "logband/design.hpp"
#include "logband/instance.hpp"

namespace logband {

enum class EliminationRule { ConfidenceWidth, Threshold };
enum class Termination { Converged, BudgetExceeded, SeparationFailure };

const char* termination_name(Termination t);
const char* elimination_name(EliminationRule r);

struct PureExploreOptions {
  RoundingRule rounding = RoundingRule::Safe;
  EliminationRule elimination = EliminationRule::ConfidenceWidth;
  std::int64_t budget = 1'000'000'000;
  int max_rounds = 64;
  // seeds algorithm-side randomness (the passive baseline's categorical draws)
  std::uint64_t seed = 0;
  FwOptions fw;
};

struct BurnInResult {
  Vec theta0;
  std::int64_t samples_used = 0;
  double n0_formula = 0.0;
  Design design;
  bool separation = false;
  LogisticDataset data;
};

struct RoundLog {
  int k = 0;
  int active_set_size = 0;  // before elimination
  std::int64_t n_k = 0;
  double delta_k = 0.0;
  double design_value = 0.0;
  Design design;
  Theta theta_hat;
  std::vector<std::size_t> eliminated;
  bool separation = false;
  // oracle check with theta*: every active gap estimated within its 3.5-width
  bool event_held = true;
  std::int64_t fit_samples = 0;
  std::vector<int> fit_sources;
};

struct RunResult {
  std::string algorithm;
  std::string instance_id;
  std::uint64_t seed = 0;
  std::size_t recommended = 0;
  std::size_t best = 0;
  bool correct = false;
  std::int64_t total_samples = 0;
  std::int64_t burnin_samples = 0;
  std::vector<RoundLog> rounds;
  Termination terminated = Termination::Converged;
  int separation_events = 0;
};

// n_0 = ceil(3(1+eps) d gamma(d) log(2|X|(2+|X|)/delta) / kappa0), floored at r(eps)
std::int64_t burn_in_samples(const TransductiveInstance& inst, double delta, double epsilon, double kappa0,
                             RoundingRule rule = RoundingRule::Safe, double* formula = nullptr);
BurnInResult burn_in(const TransductiveInstance& inst, double delta, double epsilon, double kappa0,
                     RewardEnv& env, const PureExploreOptions& opts = {});

RunResult rage_glm(const TransductiveInstance& inst, double delta, double epsilon, double kappa0,
                   RewardEnv& env, const PureExploreOptions& opts = {});
RunResult rage_glm_r(const TransductiveInstance& inst, double delta, double epsilon, double kappa0,
                     RewardEnv& env, const PureExploreOptions& opts = {});
RunResult passive(const TransductiveInstance& inst, double delta, double epsilon, double kappa0,
                  RewardEnv& env, const PureExploreOptions& opts = {});
RunResult rage_glm_2(const TransductiveInstance& inst, double delta, double epsilon, double kappa0,
                     double s_star, RewardEnv& env, const PureExploreOptions& opts = {});

// c(S*, eps) = 48 sqrt((1+eps)(2S*+1)^3)
double rage2_c(double s_star, double epsilon);
// r_t = ceil(4^t c^2 f (sqrt(d) log(c^2 4^t (2S*+1) f / d) + sqrt(log(t^2 |Z|^2 / delta)))^2)
double rage2_round_samples(int t, Eigen::Index d, double f, double s_star, double epsilon, double delta,
                           std::size_t z_count);

struct SampleComplexity {
  std::vector<double> beta_k;
  std::vector<double> rho_k;  // pair term only, without 4^k
  double total = 0.0;
  double rho_star = 0.0;
  int k_max = 0;
};

SampleComplexity sample_complexity_bound(const TransductiveInstance& inst, double delta, double epsilon,
                                         const FwOptions& fw = {});

std::string run_to_json(const RunResult& r);
std::string run_csv_header();
std::string run_to_csv(const RunResult& r);

}  // namespace logband
