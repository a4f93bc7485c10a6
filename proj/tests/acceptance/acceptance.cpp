// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "logband/bounds.hpp"
#include "logband/confidence.hpp"
#include "logband/contextual.hpp"
#include "logband/design.hpp"
#include "logband/experiment.hpp"
#include "logband/generators.hpp"
#include "logband/linalg.hpp"
#include "logband/logistic.hpp"
#include "logband/pure_explore.hpp"

using namespace logband;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

void info(const std::string& s) { std::printf("    info: %s\n", s.c_str()); std::fflush(stdout); }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double kappa0_of(const TransductiveInstance& inst) {
  return kappa_min(inst.theta_star, inst.x_arms, KappaMode::FiniteSet);
}

Outcome c1_coverage() {
  const CoverageSetup s = build_coverage_setup(3, 2000, 1.0, 0);
  const CoverageReport r = coverage_monte_carlo(s, 0.1, 2000, 20240);
  const bool ok = r.failure_rate_true <= 0.12 && r.var_event_rate >= 0.98;
  return {ok, fmt("failure rate %.4f (limit 0.12), variance event %.4f (limit 0.98), burn-in %s", r.failure_rate_true,
                  r.var_event_rate, r.burnin_satisfied ? "met" : "not met")};
}

Outcome c2_kiefer_wolfowitz() {
  RngStream rng(2, 0);
  const Eigen::Index dims[] = {3, 5, 8};
  double worst = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const Eigen::Index d = dims[rep % 3];
    const std::size_t m = static_cast<std::size_t>(d + 1 + static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(2 * d))));
    ArmList arms;
    for (std::size_t i = 0; i < m; ++i) arms.push_back(rng.unit_sphere(d) * (0.5 + 0.5 * rng.uniform()));
    const double v = minimize_design(arms, {g_optimal()}).value;
    worst = std::max(worst, std::abs(v - static_cast<double>(d)) / static_cast<double>(d));
  }
  return {worst <= 0.01, fmt("worst relative deviation from d: %.2e", worst)};
}

Outcome c3_rounding() {
  RngStream rng(3, 0);
  double worst = std::numeric_limits<double>::infinity();
  for (int rep = 0; rep < 50; ++rep) {
    const Eigen::Index d = 2 + static_cast<Eigen::Index>(rng.index(4));
    const std::size_t m = static_cast<std::size_t>(d) + rng.index(6);
    Design des;
    Vec w(static_cast<Eigen::Index>(m));
    for (std::size_t i = 0; i < m; ++i) {
      des.arms.push_back(rng.unit_sphere(d) * (0.5 + 0.5 * rng.uniform()));
      w(static_cast<Eigen::Index>(i)) = -std::log(rng.uniform());
    }
    des.weights = w / w.sum();
    const Vec th = 2.0 * rng.uniform() * rng.unit_sphere(d);
    const auto n = static_cast<std::int64_t>(std::ceil(rounding_min_samples(d, 0.5)));
    const RoundedAllocation alloc = round_design(des, n, 0.5);
    const Mat h = design_fisher(des, th);
    const Mat diff = allocation_fisher(alloc, th) - (static_cast<double>(n) / 1.5) * h;
    const Mat ha = allocation_fisher(alloc, th);
    worst = std::min(worst, min_eigenvalue(diff) / ha.trace());
  }
  return {worst >= -1e-9, fmt("worst min-eigenvalue / trace: %.3e", worst)};
}

Outcome c4_fig1() {
  const auto inst = gen_fig1_benchmark(10);
  const double k0 = kappa0_of(inst);
  bool all_correct = true;
  std::vector<double> ratios, ratios_r;
  for (std::uint64_t s = 0; s < 10; ++s) {
    PureExploreOptions o;
    o.seed = s;
    RewardEnv ea(inst.theta_star, s), eb(inst.theta_star, s), ec(inst.theta_star, s);
    const RunResult a = rage_glm(inst, 0.05, 0.5, k0, ea, o);
    const RunResult b = rage_glm_r(inst, 0.05, 0.5, k0, eb, o);
    const RunResult c = passive(inst, 0.05, 0.5, k0, ec, o);
    all_correct = all_correct && a.correct && b.correct && c.correct;
    ratios.push_back(static_cast<double>(c.total_samples) / static_cast<double>(a.total_samples));
    ratios_r.push_back(static_cast<double>(c.total_samples) / static_cast<double>(b.total_samples));
    info(fmt("seed %llu: rage_glm %lld, rage_glm_r %lld, passive %lld", static_cast<unsigned long long>(s),
             static_cast<long long>(a.total_samples), static_cast<long long>(b.total_samples),
             static_cast<long long>(c.total_samples)));
  }
  const double med = median(ratios);
  info(fmt("median passive / rage_glm_r = %.3f", median(ratios_r)));
  return {all_correct && med >= 3.0 && med <= 30.0,
          fmt("all correct: %s, median passive / rage_glm = %.3f (bracket [3, 30])", all_correct ? "yes" : "no", med)};
}

double weight_on(const Design& des, const Vec& arm) {
  for (std::size_t i = 0; i < des.arms.size(); ++i)
    if ((des.arms[i] - arm).norm() < 1e-12) return des.weights(static_cast<Eigen::Index>(i));
  return 0.0;
}

Outcome c5_example2() {
  const auto e1 = gen_example1(3.0, 0.1), e2 = gen_example2(3.0, 0.1);
  const Vec diff = e2.x_arms[2];
  // post-burn-in samples, rage_glm_r on both instances
  std::vector<double> post1, post2, mass;
  std::vector<double> post2_glm, mass_glm;
  for (std::uint64_t s = 0; s < 3; ++s) {
    PureExploreOptions o;
    o.seed = s;
    RewardEnv a(e1.theta_star, s), b(e2.theta_star, s), c(e2.theta_star, s);
    const RunResult r1 = rage_glm_r(e1, 0.05, 0.5, kappa0_of(e1), a, o);
    const RunResult r2 = rage_glm_r(e2, 0.05, 0.5, kappa0_of(e2), b, o);
    const RunResult g2 = rage_glm(e2, 0.05, 0.5, kappa0_of(e2), c, o);
    post1.push_back(static_cast<double>(r1.total_samples - r1.burnin_samples));
    post2.push_back(static_cast<double>(r2.total_samples - r2.burnin_samples));
    mass.push_back(r2.rounds.empty() ? 0.0 : weight_on(r2.rounds.front().design, diff));
    post2_glm.push_back(static_cast<double>(g2.total_samples - g2.burnin_samples));
    mass_glm.push_back(g2.rounds.empty() ? 0.0 : weight_on(g2.rounds.front().design, diff));
  }
  const double ratio = median(post1) / median(post2);
  const double m = *std::min_element(mass.begin(), mass.end());
  info(fmt("rage_glm on example 2: round-1 mass on e1-e2 %.3f, post-burn-in ratio %.2f",
           *std::min_element(mass_glm.begin(), mass_glm.end()), median(post1) / median(post2_glm)));
  return {m >= 0.99 && ratio >= 10.0,
          fmt("rage_glm_r: round-1 mass on e1-e2 %.4f (limit 0.99), post-burn-in example1 / example2 = %.2f (limit 10)",
              m, ratio)};
}

Outcome c6_self_concordance() {
  RngStream rng(6, 0);
  double worst = std::numeric_limits<double>::infinity();
  for (int rep = 0; rep < 1000; ++rep) {
    const Eigen::Index d = 3;
    const Vec x = rng.unit_sphere(d) * std::sqrt(rng.uniform());
    const Vec t2 = 3.0 * rng.uniform() * rng.unit_sphere(d);
    Vec step = rng.unit_sphere(d);
    const Vec t1 = t2 + rng.uniform() * step;  // |x^T (t1 - t2)| <= 1
    const double a = x.dot(t1), b = x.dot(t2), dd = std::abs(a - b);
    const double al = alpha_slope(x, t1, t2);
    const Mat xx = x * x.transpose();
    auto slack = [&](const Mat& m) { return min_eigenvalue(m); };
    // G >= H(theta2) / (1 + D), H(theta1) >= H(theta2) / (1 + 2D), and symmetric in the pair
    worst = std::min(worst, slack((al - link_mu_dot(b) / (1 + dd)) * xx));
    worst = std::min(worst, slack((al - link_mu_dot(a) / (1 + dd)) * xx));
    worst = std::min(worst, slack((link_mu_dot(a) - link_mu_dot(b) / (2 * dd + 1)) * xx));
    worst = std::min(worst, slack((link_mu_dot(b) - link_mu_dot(a) / (2 * dd + 1)) * xx));
    if (dd > 0) {
      worst = std::min(worst, al - link_mu_dot(b) * (1 - std::exp(-dd)) / dd);
      worst = std::min(worst, link_mu_dot(b) * (std::exp(dd) - 1) / dd - al);
    }
  }
  return {worst >= -1e-9, fmt("worst slack over 1000 triples: %.3e", worst)};
}

Outcome c7_kl() {
  RngStream rng(7, 0);
  double worst = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    const Eigen::Index d = 2 + static_cast<Eigen::Index>(rng.index(4));
    const std::size_t m = 2 + rng.index(6);
    Design des;
    Vec w(static_cast<Eigen::Index>(m));
    for (std::size_t i = 0; i < m; ++i) {
      des.arms.push_back(rng.unit_sphere(d) * (0.3 + 0.7 * rng.uniform()));
      w(static_cast<Eigen::Index>(i)) = 0.1 + rng.uniform();
    }
    des.weights = w / w.sum();
    const Vec t1 = 4.0 * rng.uniform() * rng.unit_sphere(d), t2 = 4.0 * rng.uniform() * rng.unit_sphere(d);
    double direct = 0.0;
    for (std::size_t i = 0; i < m; ++i)
      direct += des.weights(static_cast<Eigen::Index>(i)) * kl_bernoulli_logistic(des.arms[i], t1, t2);
    const Vec diff = t1 - t2;
    worst = std::max(worst, std::abs(direct - diff.dot(weighted_matrices(des, t1, t2).k * diff)));
  }
  const double r = 3.0, eps = 0.01;
  const double inv = 1.0 / kl_logistic(r, r - eps);
  const double ratio = inv / (std::exp(r) / (2 * eps * eps));
  const bool ok = worst <= 1e-8 && ratio <= 2.0 && ratio >= 0.5;
  return {ok, fmt("identity worst |diff| %.2e (limit 1e-8); 1/KL over e^r/(2 eps^2) = %.4f (limit within 2)", worst,
                  ratio)};
}

Outcome c8_suplogistic() {
  ContextModel m;
  m.d = 5;
  m.k = 10;
  m.kind = ContextKind::Gaussian;
  const std::int64_t horizon = 8192;
  int beats = 0, decays = 0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    m.theta_star = RngStream(800 + s, 0).unit_sphere(5);
    const RegretTrace a = sup_logistic(m, horizon, 0.05, s);
    const RegretTrace u = uniform_policy(m, horizon, s);
    const double reg = a.cumulative.back(), ureg = u.cumulative.back();
    const double avg_t = reg / static_cast<double>(horizon), avg_1k = a.cumulative[1023] / 1024.0;
    beats += reg <= 0.5 * ureg;
    decays += avg_t <= 0.6 * avg_1k;
    info(fmt("seed %llu: regret %.2f, uniform %.2f, avg regret 1024 %.4f -> 8192 %.4f, alpha %.3f, explore %lld, "
             "exploit %lld",
             static_cast<unsigned long long>(s), reg, ureg, avg_1k, avg_t, a.alpha,
             static_cast<long long>(a.branch_counts[static_cast<int>(StepBranch::Explore)]),
             static_cast<long long>(a.branch_counts[static_cast<int>(StepBranch::Exploit)])));
  }
  return {beats >= 9 && decays >= 9,
          fmt("regret <= 0.5 x uniform in %d/10 seeds, average regret decays by 0.6 in %d/10 seeds (need 9)", beats,
              decays)};
}

Outcome c9_floor() {
  HardInstanceOptions o;
  o.n_cap = 64;
  const double eps = 0.5;
  const HardInstance h = build_hard_instance(24, eps, o);
  bool brackets = true;
  for (std::size_t i = 0; i < h.z_arms.size(); ++i) {
    brackets = brackets && std::abs(h.z_arms[i].dot(h.thetas[i]) / h.s_norm - (1 - eps) / (3 + eps)) < 1e-12;
    for (std::size_t j = 0; j < h.z_arms.size(); ++j) {
      if (i == j) continue;
      const double r = h.z_arms[j].dot(h.thetas[i]) / h.s_norm;
      brackets = brackets && r >= -(1 + 3 * eps) / (3 + eps) - 1e-12 && r <= (eps - 1) / (3 + eps) + 1e-12;
    }
  }
  const FloorReport f = moderate_confidence_floor(h);
  const bool exact = f.floor == static_cast<double>(f.n) / 16.0;
  return {brackets && f.kappa_relation_holds && exact,
          fmt("n = %zu, brackets %s, 1/kappa0 = %.1f <= %.1f: %s, floor %.4f", f.n, brackets ? "hold" : "violated",
              f.inv_kappa0, f.inv_kappa0_bound, f.kappa_relation_holds ? "yes" : "no", f.floor)};
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) {
      std::ifstream f(e.path(), std::ios::binary);
      std::stringstream ss;
      ss << f.rdbuf();
      files[fs::relative(e.path(), dir).string()] = ss.str();
    }
  return files;
}

Outcome c10_determinism() {
  const std::vector<std::string> configs = {
      R"({"kind": "coverage", "instance": {"d": 3}, "algorithms": ["fixed_design"], "delta": 0.1, "seeds": [1, 2],
          "params": {"t": 500, "reps": 200}})",
      R"({"kind": "pure-explore", "instance": {"generator": "fig1", "d": 4},
          "algorithms": ["rage_glm", "rage_glm_r", "passive"], "seeds": [0, 1]})",
      R"({"kind": "contextual", "instance": {"d": 3, "k": 5, "theta_norm": 1.0}, "algorithms": ["sup_logistic", "uniform"],
          "seeds": [0, 1], "params": {"horizon": 400, "alpha": 0.5}})",
      R"({"kind": "lower-bound", "instance": {"generator": "fig1", "d": 4}, "algorithms": ["transportation", "hard_instance"],
          "seeds": [0, 1], "params": {"d": 24}})",
      R"({"kind": "gaussian-burnin", "algorithms": ["gaussian_burnin"], "seeds": [0, 1], "params": {"d": 8, "s_norm": 2.0, "t": 2000}})",
  };
  const fs::path root = fs::temp_directory_path() / "logband_acceptance";
  fs::remove_all(root);
  std::size_t compared = 0;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    std::vector<std::map<std::string, std::string>> snaps;
    for (int jobs : {1, 2}) {
      const fs::path dir = root / std::to_string(i);
      fs::remove_all(dir);
      fs::create_directories(dir);
      ExperimentConfig c = parse_config(configs[i]);
      c.out = (dir / "exp").string();
      RunOptions o;
      o.jobs = jobs;
      if (run_experiment(c, o).exit_code != 0) return {false, "run failed for config " + std::to_string(i)};
      snaps.push_back(snapshot(dir));
    }
    if (snaps[0] != snaps[1]) return {false, fmt("outputs differ for kind %s", experiment_kind_name(parse_config(configs[i]).kind))};
    compared += snaps[0].size();
  }
  return {true, fmt("%zu files byte-identical across reruns with 1 and 2 workers, all five kinds", compared)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"coverage of the 3.5-width interval", c1_coverage},
      {"Kiefer-Wolfowitz value", c2_kiefer_wolfowitz},
      {"rounding guarantee", c3_rounding},
      {"benchmark correctness and passive advantage", c4_fig1},
      {"informative-arm effect", c5_example2},
      {"self-concordance sandwich", c6_self_concordance},
      {"KL identity and small-gap scale", c7_kl},
      {"SupLogistic sublinear regret", c8_suplogistic},
      {"hard-instance floor consistency", c9_floor},
      {"determinism", c10_determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %2zu %s  %s: %s [%.1fs]\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first,
                o.detail.c_str(), sec);
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%zu criteria, %d failed\n", criteria.size(), failed);
  return failed ? 1 : 0;
}
