#include "logband/pure_explore.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "json.hpp"
#include "logband/confidence.hpp"
#include "logband/error.hpp"
#include "logband/linalg.hpp"

namespace logband {

namespace {

enum class Variant { Glm, GlmR, Glm2 };

void check_inputs(const TransductiveInstance& inst, double delta, double epsilon, double kappa0) {
  inst.validate();
  if (!(delta > 0.0 && delta <= std::exp(-1.0) + 1e-15)) fail(ErrorCode::InvalidConfig, "delta must lie in (0, 1/e]");
  if (!(epsilon > 0.0 && std::isfinite(epsilon))) fail(ErrorCode::InvalidConfig, "epsilon must be positive");
  if (!(kappa0 > 0.0 && kappa0 <= 0.25)) fail(ErrorCode::InvalidConfig, "kappa0 must lie in (0, 1/4]");
}

std::size_t argmax_active(const ArmList& z, const std::vector<std::size_t>& active, const Vec& theta) {
  std::size_t best = active.front();
  double top = z[best].dot(theta);
  for (std::size_t i : active) {
    const double v = z[i].dot(theta);
    if (v > top) {
      top = v;
      best = i;
    }
  }
  return best;
}

ArmList pick(const ArmList& z, const std::vector<std::size_t>& idx) {
  ArmList out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(z[i]);
  return out;
}

std::vector<int> sources_of(const LogisticDataset& data) {
  std::set<int> s;
  for (const auto& g : data.groups()) s.insert(g.source);
  return {s.begin(), s.end()};
}

// |(z*-z)^T (theta_hat - theta*)| <= 3.5 |z*-z|_{H(theta*)^+} sqrt(log(2(2+t_eff)/delta_k)) for active z
bool event_check(const TransductiveInstance& inst, const std::vector<std::size_t>& active, const LogisticDataset& data,
                 const Vec& theta_hat, double delta_k) {
  const std::size_t star = inst.best_index();
  if (std::find(active.begin(), active.end(), star) == active.end()) return true;
  const FisherMatrix h = fisher_info(data, inst.theta_star);
  SymPinv pinv(h.matrix);
  const double lg = std::sqrt(std::log(2.0 * (2.0 + static_cast<double>(h.t_eff)) / delta_k));
  const Vec err = theta_hat - inst.theta_star;
  for (std::size_t i : active) {
    if (i == star) continue;
    const Vec v = inst.z_arms[star] - inst.z_arms[i];
    if (!pinv.in_range(v)) continue;
    if (std::abs(v.dot(err)) > kWidthConstTrue * std::sqrt(pinv.quad(v)) * lg) return false;
  }
  return true;
}

std::vector<std::size_t> eliminate_by_threshold(const ArmList& z, const std::vector<std::size_t>& active, const Vec& theta,
                                        int k) {
  const std::size_t zhat = argmax_active(z, active, theta);
  const double thr = std::ldexp(1.0, -k);
  std::vector<std::size_t> out;
  for (std::size_t i : active)
    if (i != zhat && theta.dot(z[zhat] - z[i]) >= thr) out.push_back(i);
  return out;
}

std::vector<std::size_t> eliminate_by_width(const TransductiveInstance& inst, const std::vector<std::size_t>& active,
                                            const Vec& theta, const Mat& h, int k, double delta) {
  SymPinv pinv(h);
  const double nz = static_cast<double>(inst.z_arms.size());
  const double nx = static_cast<double>(inst.x_arms.size());
  const double kk = static_cast<double>(k);
  const double lg = std::sqrt(3.0 * std::log(2.0 * nz * (2.0 + nx) * kk * kk / delta));
  std::vector<std::size_t> out;
  for (std::size_t i : active) {
    for (std::size_t j : active) {
      if (i == j) continue;
      const Vec v = inst.z_arms[j] - inst.z_arms[i];
      const double g = v.dot(theta);
      if (g <= 0.0 || !pinv.in_range(v)) continue;
      if (g >= kWidthConstTrue * std::sqrt(pinv.quad(v)) * lg) {
        out.push_back(i);
        break;
      }
    }
  }
  return out;
}

std::vector<std::size_t> remove_all(const std::vector<std::size_t>& active, const std::vector<std::size_t>& gone) {
  std::vector<std::size_t> out;
  for (std::size_t i : active)
    if (std::find(gone.begin(), gone.end(), i) == gone.end()) out.push_back(i);
  return out;
}

void finish(RunResult& res, const TransductiveInstance& inst, const std::vector<std::size_t>& active,
            const Vec& theta) {
  res.recommended = active.size() == 1 ? active.front() : argmax_active(inst.z_arms, active, theta);
  res.correct = res.recommended == res.best;
}

RunResult start(const char* name, const TransductiveInstance& inst, const PureExploreOptions& opts) {
  RunResult res;
  res.algorithm = name;
  res.instance_id = inst.id;
  res.seed = opts.seed;
  res.best = inst.best_index();
  return res;
}

// Shared round loop for the three elimination algorithms.
RunResult run_rage(Variant v, const TransductiveInstance& inst, double delta, double epsilon, double kappa0,
                   double s_star, RewardEnv& env, const PureExploreOptions& opts) {
  check_inputs(inst, delta, epsilon, kappa0);
  const char* name = v == Variant::Glm ? "rage_glm" : v == Variant::GlmR ? "rage_glm_r" : "rage_glm_2";
  RunResult res = start(name, inst, opts);
  const Eigen::Index d = inst.dim();
  const std::size_t nx = inst.x_arms.size(), nz = inst.z_arms.size();
  std::vector<std::size_t> active(nz);
  for (std::size_t i = 0; i < nz; ++i) active[i] = i;

  if (burn_in_samples(inst, delta, epsilon, kappa0, opts.rounding) > opts.budget) {
    res.terminated = Termination::BudgetExceeded;
    finish(res, inst, active, Vec::Zero(d));
    return res;
  }
  BurnInResult b = burn_in(inst, delta, epsilon, kappa0, env, opts);
  res.burnin_samples = b.samples_used;
  res.total_samples = b.samples_used;
  if (b.separation) {
    res.terminated = Termination::SeparationFailure;
    res.separation_events = 1;
    finish(res, inst, active, b.theta0);
    return res;
  }

  const Vec theta0 = b.theta0;
  Vec theta_prev = theta0;
  LogisticDataset cumulative = b.data;
  const double gamma = gamma_d({delta, nx, d});
  const double r_eps = std::ceil(rounding_min_samples(d, epsilon, opts.rounding));
  const double eta = v == Variant::Glm2 ? projected_eta(d, delta, s_star) : 0.0;

  for (int k = 1;; ++k) {
    if (active.size() == 1) break;
    if (k > opts.max_rounds) {
      res.terminated = Termination::BudgetExceeded;
      break;
    }
    const double kk = static_cast<double>(k);
    const double delta_k =
        delta / (2.0 * kk * kk * static_cast<double>(std::max(nz, nx)) * (2.0 + static_cast<double>(nx)));
    const ArmList items = pick(inst.z_arms, active);
    const double pair_scale = std::ldexp(1.0, 2 * k) * kWidthConstTrue * kWidthConstTrue;

    std::vector<DesignObjective> objs;
    if (v == Variant::Glm) objs.push_back(max_direction(theta_prev, inst.x_arms, gamma));
    if (v == Variant::Glm2)
      objs.push_back(max_pair(theta0, items, 1.0));
    else
      objs.push_back(max_pair(theta_prev, items, pair_scale));
    const DesignSolution sol = minimize_design(inst.x_arms, objs, opts.fw);

    double n_real = v == Variant::Glm2
                        ? rage2_round_samples(k, d, sol.value, s_star, epsilon, delta, nz)
                        : 3.0 * (1.0 + epsilon) * sol.value * std::log(1.0 / delta_k);
    n_real = std::max(std::ceil(n_real), r_eps);
    if (!std::isfinite(n_real) || static_cast<double>(res.total_samples) + n_real > static_cast<double>(opts.budget)) {
      res.terminated = Termination::BudgetExceeded;
      break;
    }
    const auto n_k = static_cast<std::int64_t>(n_real);
    const RoundedAllocation alloc = round_design(sol.design, n_k, epsilon, opts.rounding);
    LogisticDataset fresh = env.sample_allocation(alloc, k);
    res.total_samples += n_k;

    if (v == Variant::GlmR) cumulative.append(fresh);
    const LogisticDataset& fit_data = v == Variant::GlmR ? cumulative : fresh;

    RoundLog log;
    log.k = k;
    log.active_set_size = static_cast<int>(active.size());
    log.n_k = n_k;
    log.delta_k = delta_k;
    log.design_value = sol.value;
    log.design = sol.design;
    log.fit_samples = fit_data.size();
    log.fit_sources = sources_of(fit_data);

    Vec theta_hat;
    bool sep = false;
    if (v == Variant::Glm2) {
      theta_hat = fit_projected_mle(fit_data, s_star, eta).theta.coords;
    } else {
      const MleEstimate est = fit_mle(fit_data);
      sep = est.separation_detected;
      theta_hat = est.theta.coords;
    }
    if (sep) {
      // keep the previous estimate for the next design
      ++res.separation_events;
      log.separation = true;
      log.theta_hat = Theta(theta_prev);
      res.rounds.push_back(std::move(log));
      continue;
    }
    log.theta_hat = Theta(theta_hat);
    log.event_held = event_check(inst, active, fit_data, theta_hat, delta_k);

    if (v == Variant::Glm2 || opts.elimination == EliminationRule::Threshold)
      log.eliminated = eliminate_by_threshold(inst.z_arms, active, theta_hat, k);
    else
      log.eliminated = eliminate_by_width(inst, active, theta_hat, fisher_info(fit_data, theta_prev).matrix, k, delta);
    active = remove_all(active, log.eliminated);
    theta_prev = theta_hat;
    res.rounds.push_back(std::move(log));
  }
  finish(res, inst, active, theta_prev);
  return res;
}

}  // namespace

const char* termination_name(Termination t) {
  switch (t) {
    case Termination::Converged: return "Converged";
    case Termination::BudgetExceeded: return "BudgetExceeded";
    case Termination::SeparationFailure: return "SeparationFailure";
  }
  return "?";
}

const char* elimination_name(EliminationRule r) {
  return r == EliminationRule::ConfidenceWidth ? "confidence_width" : "threshold";
}

std::int64_t burn_in_samples(const TransductiveInstance& inst, double delta, double epsilon, double kappa0,
                             RoundingRule rule, double* formula) {
  const Eigen::Index d = inst.dim();
  const double nx = static_cast<double>(inst.x_arms.size());
  const double gamma = gamma_d({delta, inst.x_arms.size(), d});
  const double n0 = 3.0 * (1.0 + epsilon) / kappa0 * static_cast<double>(d) * gamma *
                    std::log(2.0 * nx * (2.0 + nx) / delta);
  if (formula) *formula = n0;
  const double r = rounding_min_samples(d, epsilon, rule);
  return static_cast<std::int64_t>(std::max(std::ceil(n0), std::ceil(r)));
}

BurnInResult burn_in(const TransductiveInstance& inst, double delta, double epsilon, double kappa0, RewardEnv& env,
                     const PureExploreOptions& opts) {
  check_inputs(inst, delta, epsilon, kappa0);
  BurnInResult b;
  b.samples_used = burn_in_samples(inst, delta, epsilon, kappa0, opts.rounding, &b.n0_formula);
  b.design = minimize_design(inst.x_arms, {g_optimal()}, opts.fw).design;
  const RoundedAllocation alloc = round_design(b.design, b.samples_used, epsilon, opts.rounding);
  b.data = env.sample_allocation(alloc, 0);
  const MleEstimate est = fit_mle(b.data);
  b.theta0 = est.theta.coords;
  b.separation = est.separation_detected;
  return b;
}

RunResult rage_glm(const TransductiveInstance& inst, double delta, double epsilon, double kappa0, RewardEnv& env,
                   const PureExploreOptions& opts) {
  return run_rage(Variant::Glm, inst, delta, epsilon, kappa0, 0.0, env, opts);
}

RunResult rage_glm_r(const TransductiveInstance& inst, double delta, double epsilon, double kappa0, RewardEnv& env,
                     const PureExploreOptions& opts) {
  return run_rage(Variant::GlmR, inst, delta, epsilon, kappa0, 0.0, env, opts);
}

RunResult rage_glm_2(const TransductiveInstance& inst, double delta, double epsilon, double kappa0, double s_star,
                     RewardEnv& env, const PureExploreOptions& opts) {
  if (!(s_star > 0.0 && std::isfinite(s_star))) fail(ErrorCode::InvalidConfig, "s_star must be positive");
  return run_rage(Variant::Glm2, inst, delta, epsilon, kappa0, s_star, env, opts);
}

RunResult passive(const TransductiveInstance& inst, double delta, double epsilon, double kappa0, RewardEnv& env,
                  const PureExploreOptions& opts) {
  check_inputs(inst, delta, epsilon, kappa0);
  RunResult res = start("passive", inst, opts);
  const Eigen::Index d = inst.dim();
  const std::size_t nx = inst.x_arms.size(), nz = inst.z_arms.size();
  std::vector<std::size_t> active(nz);
  for (std::size_t i = 0; i < nz; ++i) active[i] = i;

  if (burn_in_samples(inst, delta, epsilon, kappa0, opts.rounding) > opts.budget) {
    res.terminated = Termination::BudgetExceeded;
    finish(res, inst, active, Vec::Zero(d));
    return res;
  }
  BurnInResult b = burn_in(inst, delta, epsilon, kappa0, env, opts);
  res.burnin_samples = b.samples_used;
  res.total_samples = b.samples_used;
  if (b.separation) {
    res.terminated = Termination::SeparationFailure;
    res.separation_events = 1;
    finish(res, inst, active, b.theta0);
    return res;
  }
  Vec theta = b.theta0;
  if (nz == 1) {
    finish(res, inst, active, theta);
    return res;
  }

  const DesignSolution sol = minimize_design(inst.x_arms, {max_pair(b.theta0, inst.z_arms, 1.0)}, opts.fw);
  std::vector<double> cdf(nx);
  double acc = 0.0;
  for (std::size_t i = 0; i < nx; ++i) cdf[i] = (acc += sol.design.weights[static_cast<Eigen::Index>(i)]);
  const KeyedRng draw(derive_seed(opts.seed, 0x7061737369766531ULL), 1);
  std::uint64_t counter = 0;

  LogisticDataset data = b.data;
  for (int k = 1;; ++k) {
    if (k > opts.max_rounds || k > 62) {
      res.terminated = Termination::BudgetExceeded;
      break;
    }
    const std::int64_t m = std::int64_t{1} << k;
    if (res.total_samples + m > opts.budget) {
      res.terminated = Termination::BudgetExceeded;
      break;
    }
    std::vector<std::int64_t> counts(nx, 0);
    for (std::int64_t s = 0; s < m; ++s) {
      const double u = draw.uniform(counter++) * acc;
      auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
      ++counts[std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), nx - 1)];
    }
    for (std::size_t i = 0; i < nx; ++i)
      if (counts[i] > 0) data.add_counts(inst.x_arms[i], counts[i], env.pull_counts(inst.x_arms[i], counts[i]), k);
    res.total_samples += m;

    RoundLog log;
    log.k = k;
    log.active_set_size = static_cast<int>(active.size());
    log.n_k = m;
    const double kk = static_cast<double>(k);
    log.delta_k = delta / (2.0 * kk * kk * static_cast<double>(nz));
    log.design = sol.design;
    log.design_value = sol.value;
    log.fit_samples = data.size();
    log.fit_sources = sources_of(data);

    const MleEstimate est = fit_mle(data);
    if (est.separation_detected) {
      ++res.separation_events;
      log.separation = true;
      log.theta_hat = Theta(theta);
      res.rounds.push_back(std::move(log));
      continue;
    }
    theta = est.theta.coords;
    log.theta_hat = Theta(theta);
    log.event_held = event_check(inst, active, data, theta, log.delta_k);

    const FisherMatrix h = fisher_info(data, theta);
    const ConfidenceParams params{log.delta_k, h.t_eff, d};
    bool certified = burnin_condition(inst.x_arms, h.matrix, params);
    const std::size_t zhat = argmax_active(inst.z_arms, active, theta);
    if (certified) {
      SymPinv pinv(h.matrix);
      const double lg = std::sqrt(std::log(2.0 * (2.0 + static_cast<double>(h.t_eff)) / log.delta_k));
      for (std::size_t i : active) {
        if (i == zhat) continue;
        const Vec v = inst.z_arms[zhat] - inst.z_arms[i];
        if (!pinv.in_range(v) || v.dot(theta) <= kWidthConstEmpirical * std::sqrt(pinv.quad(v)) * lg) {
          certified = false;
          break;
        }
      }
    }
    if (certified) {
      for (std::size_t i : active)
        if (i != zhat) log.eliminated.push_back(i);
      active = {zhat};
    }
    res.rounds.push_back(std::move(log));
    if (certified) break;
  }
  finish(res, inst, active, theta);
  return res;
}

double rage2_c(double s_star, double epsilon) {
  return 48.0 * std::sqrt((1.0 + epsilon) * std::pow(2.0 * s_star + 1.0, 3));
}

double rage2_round_samples(int t, Eigen::Index d, double f, double s_star, double epsilon, double delta,
                           std::size_t z_count) {
  const double c2 = std::pow(rage2_c(s_star, epsilon), 2);
  const double four_t = std::ldexp(1.0, 2 * t);
  const double dd = static_cast<double>(d);
  const double tt = static_cast<double>(t), nz = static_cast<double>(z_count);
  const double inner = std::sqrt(dd) * std::log(c2 * four_t * (2.0 * s_star + 1.0) * f / dd) +
                       std::sqrt(std::log(tt * tt * nz * nz / delta));
  return std::ceil(four_t * c2 * f * inner * inner);
}

SampleComplexity sample_complexity_bound(const TransductiveInstance& inst, double delta, double epsilon,
                                         const FwOptions& fw) {
  inst.validate();
  SampleComplexity out;
  const Eigen::Index d = inst.dim();
  const std::size_t nx = inst.x_arms.size(), nz = inst.z_arms.size();
  const std::size_t star = inst.best_index();
  const Vec& th = inst.theta_star;
  const double top = inst.z_arms[star].dot(th);
  const double dmin = nz > 1 ? inst.min_gap() : 1.0;
  const double gamma = gamma_d({delta, nx, d});
  out.k_max = nz > 1 ? static_cast<int>(std::ceil(std::log2(2.0 / dmin))) : 0;

  for (int k = 1; k <= out.k_max; ++k) {
    const double thr = 2.0 * std::ldexp(1.0, -k);
    ArmList s_k;
    for (const auto& z : inst.z_arms)
      if (top - z.dot(th) <= thr) s_k.push_back(z);
    const double four_k = std::ldexp(1.0, 2 * k);
    double rho = 0.0;
    std::vector<DesignObjective> objs{max_direction(th, inst.x_arms, gamma)};
    if (s_k.size() > 1) {
      rho = minimize_design(inst.x_arms, {max_pair(th, s_k, 1.0)}, fw).value;
      objs.push_back(max_pair(th, s_k, four_k));
    }
    const double beta = minimize_design(inst.x_arms, objs, fw).value;
    out.rho_k.push_back(rho);
    out.beta_k.push_back(beta);
    out.rho_star += four_k * rho;
    const double kk = static_cast<double>(k);
    out.total += beta * std::log(static_cast<double>(std::max(nz, nx)) * kk * kk / delta);
  }
  const double kappa0 = kappa_min(th, inst.x_arms, KappaMode::FiniteSet);
  out.total += static_cast<double>(d) * (1.0 + epsilon) * gamma / kappa0 * std::log(static_cast<double>(nx) / delta);
  out.total += rounding_min_samples(d, epsilon) * std::log(1.0 / dmin);
  return out;
}

std::string run_to_json(const RunResult& r) {
  using nlohmann::ordered_json;
  auto vec = [](const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  ordered_json j;
  j["algorithm"] = r.algorithm;
  j["instance_id"] = r.instance_id;
  j["seed"] = r.seed;
  j["recommended"] = r.recommended;
  j["best"] = r.best;
  j["correct"] = r.correct;
  j["total_samples"] = r.total_samples;
  j["burnin_samples"] = r.burnin_samples;
  j["terminated"] = termination_name(r.terminated);
  j["separation_events"] = r.separation_events;
  ordered_json rounds = ordered_json::array();
  for (const auto& l : r.rounds) {
    ordered_json o;
    o["k"] = l.k;
    o["active_set_size"] = l.active_set_size;
    o["n_k"] = l.n_k;
    o["delta_k"] = l.delta_k;
    o["design_value"] = l.design_value;
    o["design_weights"] = vec(l.design.weights);
    o["theta_hat"] = vec(l.theta_hat.coords);
    o["eliminated"] = l.eliminated;
    o["separation"] = l.separation;
    o["event_held"] = l.event_held;
    o["fit_samples"] = l.fit_samples;
    o["fit_sources"] = l.fit_sources;
    rounds.push_back(std::move(o));
  }
  j["rounds"] = std::move(rounds);
  return j.dump(2);
}

std::string run_csv_header() {
  return "algorithm,instance_id,seed,correct,recommended,total_samples,burnin_samples,rounds,terminated,"
         "separation_events";
}

std::string run_to_csv(const RunResult& r) {
  std::ostringstream os;
  os << r.algorithm << ',' << r.instance_id << ',' << r.seed << ',' << (r.correct ? "true" : "false") << ','
     << r.recommended << ',' << r.total_samples << ',' << r.burnin_samples << ',' << r.rounds.size() << ','
     << termination_name(r.terminated) << ',' << r.separation_events;
  return os.str();
}

}  // namespace logband
