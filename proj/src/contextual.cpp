#include "logband/contextual.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "logband/confidence.hpp"
#include "logband/error.hpp"

namespace logband {

namespace {

constexpr std::uint64_t kContextStream = 0x636f6e74657874ULL;
constexpr std::uint64_t kRewardStream = 0x726577617264ULL;
constexpr std::uint64_t kPolicyStream = 0x706f6c696379ULL;

int argmax_score(const ArmList& arms, const Vec& theta) {
  int best = 0;
  double top = arms[0].dot(theta);
  for (std::size_t a = 1; a < arms.size(); ++a) {
    const double v = arms[a].dot(theta);
    if (v > top) {
      top = v;
      best = static_cast<int>(a);
    }
  }
  return best;
}

// shared trace bookkeeping for both policies
struct Recorder {
  RegretTrace& tr;
  const Vec& theta;
  Mat ctx_gram;

  Recorder(RegretTrace& t, const Vec& th) : tr(t), theta(th), ctx_gram(Mat::Zero(th.size(), th.size())) {}

  void push(StepRecord rec, const ArmList& arms) {
    rec.best = argmax_score(arms, theta);
    rec.regret = std::max(0.0, link_mu(arms[static_cast<std::size_t>(rec.best)].dot(theta)) -
                                   link_mu(arms[static_cast<std::size_t>(rec.arm)].dot(theta)));
    const double prev = tr.cumulative.empty() ? 0.0 : tr.cumulative.back();
    tr.cumulative.push_back(prev + rec.regret);
    ++tr.branch_counts[static_cast<std::size_t>(rec.branch)];
    tr.filter_passes += rec.filters;
    for (const auto& x : arms) ctx_gram.noalias() += x * x.transpose();
    tr.steps.push_back(rec);
  }

  void finish(int k) {
    if (tr.steps.empty()) return;
    const double n = static_cast<double>(tr.steps.size()) * static_cast<double>(k);
    tr.sigma0_sq_empirical = min_eigenvalue(ctx_gram / n);
  }
};

void check_run(const ContextModel& model, std::int64_t horizon, double delta) {
  model.validate();
  if (horizon < model.d) fail(ErrorCode::InvalidConfig, "horizon T must be at least d");
  if (!(delta > 0.0 && delta < 1.0)) fail(ErrorCode::InvalidConfig, "delta must lie in (0, 1)");
}

}  // namespace

void ContextModel::validate() const {
  if (d < 1) fail(ErrorCode::InvalidConfig, "context dimension must be positive");
  if (k < 1) fail(ErrorCode::InvalidConfig, "number of arms must be positive");
  if (theta_star.size() != d) fail(ErrorCode::InvalidConfig, "theta* dimension mismatch");
  validate_vec(theta_star, "theta*");
  if (kind == ContextKind::Finite) {
    if (finite_sets.empty()) fail(ErrorCode::InvalidConfig, "finite context sampler needs at least one arm set");
    for (const auto& set : finite_sets) {
      if (static_cast<int>(set.size()) != k) fail(ErrorCode::InvalidConfig, "finite arm set must have K arms");
      validate_arms(set, d);
    }
  }
}

ContextSampler::ContextSampler(const ContextModel& model, std::uint64_t seed)
    : model_(model), key_(derive_seed(seed, kContextStream)) {
  model_.validate();
}

ArmList ContextSampler::arms(std::int64_t t) const {
  RngStream rng(key_, static_cast<std::uint64_t>(t));
  const Eigen::Index d = model_.d;
  if (model_.kind == ContextKind::Finite) return model_.finite_sets[rng.index(model_.finite_sets.size())];
  ArmList out;
  out.reserve(static_cast<std::size_t>(model_.k));
  const double sd = 1.0 / std::sqrt(static_cast<double>(d));
  for (int a = 0; a < model_.k; ++a) {
    Vec x(d);
    if (model_.kind == ContextKind::Gaussian) {
      for (Eigen::Index i = 0; i < d; ++i) x(i) = sd * rng.normal();
      const double n = x.norm();
      if (n > 1.0) x /= n;
    } else {
      x = rng.unit_sphere(d) * std::pow(rng.uniform(), 1.0 / static_cast<double>(d));
    }
    out.push_back(std::move(x));
  }
  return out;
}

char branch_code(StepBranch b) {
  switch (b) {
    case StepBranch::BurnIn: return 'u';
    case StepBranch::Explore: return 'a';
    case StepBranch::Exploit: return 'b';
    case StepBranch::Random: return 'r';
  }
  return '?';
}

BucketState::BucketState(Eigen::Index d, int s_levels, MleOptions mle)
    : d_(d), s_(s_levels), mle_(std::move(mle)) {
  if (s_levels < 1) fail(ErrorCode::InvalidConfig, "need at least one bucket level");
  const auto n = static_cast<std::size_t>(s_levels + 2);
  data_.assign(n, LogisticDataset(d));
  steps_.assign(n, {});
  theta_.assign(n, Vec::Zero(d));
  theta_dirty_.assign(n, false);
  pinv_.assign(n, SymPinv());
  pinv_dirty_.assign(n, true);
}

void BucketState::add(int bucket, std::int64_t t, const Vec& x, int y) {
  if (bucket < 0 || bucket > s_ + 1) fail(ErrorCode::InvalidConfig, "bucket index out of range");
  const auto b = static_cast<std::size_t>(bucket);
  data_[b].add(x, y, bucket);
  steps_[b].push_back(t);
  theta_dirty_[b] = true;
  pinv_dirty_[b] = true;
  // every width matrix is evaluated at theta_Phi
  if (bucket == s_ + 1) std::fill(pinv_dirty_.begin(), pinv_dirty_.end(), true);
}

const Vec& BucketState::theta(int bucket) {
  const auto b = static_cast<std::size_t>(bucket);
  if (data_[b].empty()) fail(ErrorCode::EmptyBucket, "bucket " + std::to_string(bucket) + " has no samples");
  if (theta_dirty_[b]) {
    MleOptions o = mle_;
    o.start = theta_[b];
    const MleEstimate est = fit_mle(data_[b], o);
    if (est.separation_detected) {
      ++separations_;
    } else {
      theta_[b] = est.theta.coords;
    }
    theta_dirty_[b] = false;
  }
  return theta_[b];
}

const SymPinv& BucketState::width_pinv(int bucket) {
  const auto b = static_cast<std::size_t>(bucket);
  if (data_[b].empty()) fail(ErrorCode::EmptyBucket, "bucket " + std::to_string(bucket) + " has no samples");
  const Vec& phi = theta_phi();
  if (pinv_dirty_[b]) {
    pinv_[b] = SymPinv(fisher_info(data_[b], phi).matrix);
    pinv_dirty_[b] = false;
  }
  return pinv_[b];
}

MeanWidth compute_mean_width(const Vec& x, BucketState& buckets, int s, double alpha) {
  MeanWidth mw;
  mw.mean = x.dot(buckets.theta(s));
  const SymPinv& p = buckets.width_pinv(s);
  mw.width = p.in_range(x) ? alpha * std::sqrt(kVarianceFactor * p.quad(x))
                           : std::numeric_limits<double>::infinity();
  return mw;
}

double suplogistic_alpha(double tau, int s_levels, std::int64_t horizon, int k, double delta) {
  const double inner = 2.0 * (2.0 + tau) * 2.0 * static_cast<double>(s_levels) * static_cast<double>(horizon) *
                       static_cast<double>(k) / delta;
  return kWidthConstTrue * std::sqrt(std::log(inner));
}

double suplogistic_z(Eigen::Index d, int k, double delta, double kappa, bool cubic) {
  const double dd = static_cast<double>(d);
  const double lk = std::log(static_cast<double>(k) / delta);
  const double k2 = kappa * kappa;
  return (cubic ? dd * dd * dd : dd) / k2 + lk * lk / (dd * k2);
}

RegretTrace sup_logistic(const ContextModel& model, std::int64_t horizon, double delta, std::uint64_t seed,
                         const SupLogisticOptions& opts) {
  check_run(model, horizon, delta);
  if (model.k < 2) fail(ErrorCode::InvalidConfig, "SupLogistic needs K >= 2");
  RegretTrace tr;
  tr.policy = "sup_logistic";
  tr.horizon = horizon;
  const int s_levels = static_cast<int>(std::floor(std::log2(static_cast<double>(horizon))));
  tr.s_levels = s_levels;
  const std::int64_t groups = s_levels + 1;
  std::int64_t tau = opts.tau ? *opts.tau
                              : static_cast<std::int64_t>(
                                    std::ceil(std::sqrt(static_cast<double>(model.d) * static_cast<double>(horizon))));
  if (tau < groups) tau = groups;
  // round up so every bucket gets the same number of burn-in samples
  tau = (tau + groups - 1) / groups * groups;
  tr.tau = tau;
  tr.alpha = opts.alpha ? *opts.alpha : suplogistic_alpha(static_cast<double>(tau), s_levels, horizon, model.k, delta);
  if (!(tr.alpha > 0.0)) fail(ErrorCode::InvalidConfig, "alpha must be positive");
  tr.kappa = kappa_min(model.theta_star, {}, KappaMode::UnitBall);
  tr.z_linear = suplogistic_z(model.d, model.k, delta, tr.kappa, false);
  tr.z_cubic = suplogistic_z(model.d, model.k, delta, tr.kappa, true);

  const ContextSampler sampler(model, seed);
  const KeyedRng reward(seed, kRewardStream);
  const KeyedRng policy(seed, kPolicyStream);
  BucketState buckets(model.d, s_levels, opts.mle);
  Recorder rec(tr, model.theta_star);
  const double exploit_width = 1.0 / std::sqrt(static_cast<double>(horizon));
  tr.steps.reserve(static_cast<std::size_t>(horizon));
  tr.cumulative.reserve(static_cast<std::size_t>(horizon));

  std::vector<int> active;
  std::vector<MeanWidth> mw(static_cast<std::size_t>(model.k));
  for (std::int64_t t = 1; t <= horizon; ++t) {
    const ArmList arms = sampler.arms(t);
    StepRecord step;
    step.t = t;
    if (t <= tau) {
      step.branch = StepBranch::BurnIn;
      step.arm = std::min(model.k - 1,
                          static_cast<int>(policy.uniform(static_cast<std::uint64_t>(t)) * static_cast<double>(model.k)));
      step.bucket = static_cast<int>((t - 1) % groups) + 1;
    } else {
      active.resize(static_cast<std::size_t>(model.k));
      for (int a = 0; a < model.k; ++a) active[static_cast<std::size_t>(a)] = a;
      for (int s = 1;; ++s) {
        if (s > s_levels) fail(ErrorCode::NotConverged, "level walk passed the last bucket");
        const double thr = std::ldexp(1.0, -s);
        int explore = -1;
        bool all_small = true;
        for (int a : active) {
          auto& v = mw[static_cast<std::size_t>(a)];
          v = compute_mean_width(arms[static_cast<std::size_t>(a)], buckets, s, tr.alpha);
          if (v.width > thr && explore < 0) explore = a;
          if (v.width > exploit_width) all_small = false;
        }
        step.level = s;
        if (explore >= 0) {
          step.branch = StepBranch::Explore;
          step.arm = explore;
          step.bucket = s;
          break;
        }
        int top = active.front();
        for (int a : active)
          if (mw[static_cast<std::size_t>(a)].mean > mw[static_cast<std::size_t>(top)].mean) top = a;
        if (all_small) {
          step.branch = StepBranch::Exploit;
          step.arm = top;
          step.bucket = 0;
          break;
        }
        const double cut = mw[static_cast<std::size_t>(top)].mean - 2.0 * thr;
        std::vector<int> next;
        for (int a : active)
          if (mw[static_cast<std::size_t>(a)].mean >= cut) next.push_back(a);
        active.swap(next);
        ++step.filters;
      }
    }
    const Vec& x = arms[static_cast<std::size_t>(step.arm)];
    const int y = reward.uniform(static_cast<std::uint64_t>(t)) < link_mu(x.dot(model.theta_star)) ? 1 : 0;
    buckets.add(step.bucket, t, x, y);
    rec.push(step, arms);
  }
  rec.finish(model.k);
  tr.separation_events = buckets.separation_events();
  if (opts.keep_buckets)
    for (int b = 0; b <= s_levels + 1; ++b) tr.bucket_steps.push_back(buckets.steps(b));
  return tr;
}

RegretTrace uniform_policy(const ContextModel& model, std::int64_t horizon, std::uint64_t seed) {
  model.validate();
  if (horizon < 0) fail(ErrorCode::InvalidConfig, "horizon must be non-negative");
  RegretTrace tr;
  tr.policy = "uniform";
  tr.horizon = horizon;
  tr.kappa = kappa_min(model.theta_star, {}, KappaMode::UnitBall);
  const ContextSampler sampler(model, seed);
  const KeyedRng policy(seed, kPolicyStream);
  Recorder rec(tr, model.theta_star);
  for (std::int64_t t = 1; t <= horizon; ++t) {
    const ArmList arms = sampler.arms(t);
    StepRecord step;
    step.t = t;
    step.branch = StepBranch::Random;
    step.arm = std::min(model.k - 1,
                        static_cast<int>(policy.uniform(static_cast<std::uint64_t>(t)) * static_cast<double>(model.k)));
    rec.push(step, arms);
  }
  rec.finish(model.k);
  return tr;
}

std::vector<double> pseudo_regret(const std::vector<ArmList>& contexts, const std::vector<int>& chosen,
                                  const Vec& theta) {
  if (contexts.size() != chosen.size()) fail(ErrorCode::InvalidConfig, "one chosen arm per context is required");
  std::vector<double> out(contexts.size());
  for (std::size_t t = 0; t < contexts.size(); ++t) {
    const auto& arms = contexts[t];
    const auto c = static_cast<std::size_t>(chosen[t]);
    if (c >= arms.size()) fail(ErrorCode::InvalidConfig, "chosen arm out of range");
    const int best = argmax_score(arms, theta);
    out[t] = std::max(0.0, link_mu(arms[static_cast<std::size_t>(best)].dot(theta)) - link_mu(arms[c].dot(theta)));
  }
  return out;
}

std::string trace_csv(const RegretTrace& trace) {
  std::ostringstream os;
  os.precision(17);
  os << "t,level,branch,arm,regret,cum_regret\n";
  for (std::size_t i = 0; i < trace.steps.size(); ++i) {
    const auto& s = trace.steps[i];
    os << s.t << ',' << s.level << ',' << branch_code(s.branch) << ',' << s.arm << ',' << s.regret << ','
       << trace.cumulative[i] << '\n';
  }
  return os.str();
}

std::string trace_summary_json(const RegretTrace& trace) {
  nlohmann::ordered_json j;
  j["policy"] = trace.policy;
  j["T"] = trace.horizon;
  j["tau"] = trace.tau;
  j["S"] = trace.s_levels;
  j["alpha"] = trace.alpha;
  j["final_regret"] = trace.cumulative.empty() ? 0.0 : trace.cumulative.back();
  j["branch_counts"] = {{"burn_in", trace.branch_counts[0]},
                        {"explore", trace.branch_counts[1]},
                        {"exploit", trace.branch_counts[2]},
                        {"random", trace.branch_counts[3]}};
  j["filter_passes"] = trace.filter_passes;
  j["separation_events"] = trace.separation_events;
  j["kappa"] = trace.kappa;
  j["z_linear"] = trace.z_linear;
  j["z_cubic"] = trace.z_cubic;
  j["sigma0_sq_empirical"] = trace.sigma0_sq_empirical;
  return j.dump(2);
}

}  // namespace logband
