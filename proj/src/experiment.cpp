#include "logband/experiment.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "logband/bounds.hpp"
#include "logband/design.hpp"
#include "logband/error.hpp"
#include "logband/generators.hpp"
#include "logband/logistic.hpp"
#include "logband/pure_explore.hpp"
#include "logband/rng.hpp"

namespace logband {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

struct KindInfo {
  ExperimentKind kind;
  const char* name;
  std::vector<std::string> algorithms;
  std::vector<std::string> columns;
};

const std::vector<KindInfo>& kinds() {
  static const std::vector<KindInfo> table = {
      {ExperimentKind::Coverage,
       "coverage",
       {"fixed_design"},
       {"algorithm", "seed", "t", "reps", "delta", "failure_rate_true", "failure_rate_empirical", "var_event_rate",
        "separations", "xi_sq", "gamma", "burnin_satisfied", "error"}},
      {ExperimentKind::PureExplore,
       "pure-explore",
       {"rage_glm", "rage_glm_r", "passive", "rage_glm_2"},
       {"algorithm", "seed", "instance", "correct", "recommended", "best", "total_samples", "burnin_samples", "rounds",
        "termination", "separation_events", "error"}},
      {ExperimentKind::Contextual,
       "contextual",
       {"sup_logistic", "uniform"},
       {"algorithm", "seed", "horizon", "cumulative_regret", "average_regret", "explore", "exploit", "random",
        "burnin", "separation_events", "error"}},
      {ExperimentKind::LowerBound,
       "lower-bound",
       {"transportation", "hard_instance"},
       {"algorithm", "seed", "instance", "value", "c", "all_converged", "n", "floor", "kappa_relation_holds",
        "error"}},
      {ExperimentKind::GaussianBurnin,
       "gaussian-burnin",
       {"gaussian_burnin"},
       {"algorithm", "seed", "d", "s_norm", "t", "satisfied_at", "final_xi_sq", "final_threshold", "error"}},
  };
  return table;
}

const KindInfo& info(ExperimentKind k) {
  for (const auto& i : kinds())
    if (i.kind == k) return i;
  fail(ErrorCode::InvalidConfig, "unknown experiment kind");
}

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidConfig, std::string("field '") + key + "': " + e.what());
  }
}

struct Row {
  std::vector<std::string> cells;  // without the error column
  std::string run_json;
  std::string error;
};

Row run_coverage(const ExperimentConfig& cfg, const std::string&, std::uint64_t seed) {
  const auto d = get_or<Eigen::Index>(cfg.instance, "d", 3);
  const auto t = get_or<std::int64_t>(cfg.params, "t", 2000);
  const auto reps = get_or<std::int64_t>(cfg.params, "reps", 2000);
  const double norm = get_or<double>(cfg.instance, "theta_norm", 1.0);
  const CoverageSetup setup = build_coverage_setup(d, t, norm, get_or<std::uint64_t>(cfg.instance, "seed", 0));
  const CoverageReport r = coverage_monte_carlo(setup, cfg.delta, reps, seed);
  Row row;
  row.cells = {num(static_cast<double>(r.t)),     num(static_cast<double>(r.reps)), num(r.delta),
               num(r.failure_rate_true),          num(r.failure_rate_empirical),    num(r.var_event_rate),
               num(static_cast<double>(r.separations)), num(r.xi_sq),              num(r.gamma),
               r.burnin_satisfied ? "1" : "0"};
  json j;
  j["t"] = r.t;
  j["reps"] = r.reps;
  j["delta"] = r.delta;
  j["failure_rate_true"] = r.failure_rate_true;
  j["failure_rate_empirical"] = r.failure_rate_empirical;
  j["var_event_rate"] = r.var_event_rate;
  j["separations"] = r.separations;
  j["xi_sq"] = r.xi_sq;
  j["gamma"] = r.gamma;
  j["burnin_satisfied"] = r.burnin_satisfied;
  j["counts"] = setup.counts;
  row.run_json = j.dump(2);
  return row;
}

Row run_pure(const ExperimentConfig& cfg, const std::string& algo, std::uint64_t seed) {
  const TransductiveInstance inst = build_instance(cfg.instance);
  const double k0 = get_or<double>(cfg.params, "kappa0", kappa_min(inst.theta_star, inst.x_arms, KappaMode::FiniteSet));
  PureExploreOptions o;
  o.seed = seed;
  o.budget = cfg.budget;
  if (get_or<std::string>(cfg.params, "elimination", "width") == "threshold") o.elimination = EliminationRule::Threshold;
  RewardEnv env(inst.theta_star, seed);
  RunResult r;
  if (algo == "rage_glm") r = rage_glm(inst, cfg.delta, cfg.epsilon, k0, env, o);
  else if (algo == "rage_glm_r") r = rage_glm_r(inst, cfg.delta, cfg.epsilon, k0, env, o);
  else if (algo == "passive") r = passive(inst, cfg.delta, cfg.epsilon, k0, env, o);
  else r = rage_glm_2(inst, cfg.delta, cfg.epsilon, k0, get_or<double>(cfg.params, "s_star", inst.theta_star.norm()), env, o);
  Row row;
  row.cells = {inst.id,
               r.correct ? "1" : "0",
               std::to_string(r.recommended),
               std::to_string(r.best),
               std::to_string(r.total_samples),
               std::to_string(r.burnin_samples),
               std::to_string(r.rounds.size()),
               termination_name(r.terminated),
               std::to_string(r.separation_events)};
  row.run_json = run_to_json(r);
  return row;
}

Row run_contextual(const ExperimentConfig& cfg, const std::string& algo, std::uint64_t seed) {
  const ContextModel model = build_context_model(cfg.instance);
  const auto horizon = get_or<std::int64_t>(cfg.params, "horizon", 2000);
  RegretTrace tr;
  if (algo == "uniform") {
    tr = uniform_policy(model, horizon, seed);
  } else {
    SupLogisticOptions o;
    if (cfg.params.contains("alpha")) o.alpha = get_or<double>(cfg.params, "alpha", 0.0);
    if (cfg.params.contains("tau")) o.tau = get_or<std::int64_t>(cfg.params, "tau", 0);
    tr = sup_logistic(model, horizon, cfg.delta, seed, o);
  }
  const double total = tr.cumulative.empty() ? 0.0 : tr.cumulative.back();
  Row row;
  row.cells = {std::to_string(tr.horizon),
               num(total),
               num(total / static_cast<double>(std::max<std::int64_t>(1, tr.horizon))),
               std::to_string(tr.branch_counts[static_cast<int>(StepBranch::Explore)]),
               std::to_string(tr.branch_counts[static_cast<int>(StepBranch::Exploit)]),
               std::to_string(tr.branch_counts[static_cast<int>(StepBranch::Random)]),
               std::to_string(tr.branch_counts[static_cast<int>(StepBranch::BurnIn)]),
               std::to_string(tr.separation_events)};
  row.run_json = trace_summary_json(tr);
  return row;
}

Row run_lower(const ExperimentConfig& cfg, const std::string& algo, std::uint64_t seed) {
  Row row;
  if (algo == "transportation") {
    const TransductiveInstance inst = build_instance(cfg.instance);
    LowerBoundOptions o;
    o.exhaustive = get_or<bool>(cfg.params, "exhaustive", false);
    const LowerBoundReport r = transportation_lower_bound(inst, cfg.delta, o);
    row.cells = {inst.id, num(r.value), num(r.c_value), r.all_converged ? "1" : "0", "", "", ""};
    row.run_json = lower_bound_to_json(r);
  } else {
    HardInstanceOptions o;
    o.n_cap = get_or<std::size_t>(cfg.params, "n_cap", 512);
    o.packing_seed = seed;
    if (cfg.params.contains("delta2")) o.delta2 = get_or<double>(cfg.params, "delta2", 0.0);
    const auto d = get_or<Eigen::Index>(cfg.params, "d", 24);
    const HardInstance h = build_hard_instance(d, get_or<double>(cfg.params, "eps", cfg.epsilon), o);
    const FloorReport f = moderate_confidence_floor(h);
    row.cells = {"hard-d" + std::to_string(d), "", "", "", std::to_string(f.n), num(f.floor),
                 f.kappa_relation_holds ? "1" : "0"};
    row.run_json = hard_instance_to_json(h, f);
  }
  return row;
}

Row run_gaussian(const ExperimentConfig& cfg, const std::string&, std::uint64_t seed) {
  const auto d = get_or<Eigen::Index>(cfg.params, "d", 16);
  const double s = get_or<double>(cfg.params, "s_norm", 1.5);
  const auto t = get_or<std::int64_t>(cfg.params, "t", 4000);
  const GaussianBurnin g = gen_gaussian_burnin(d, s, t, seed, cfg.delta, get_or<int>(cfg.params, "checkpoints", 200));
  Row row;
  row.cells = {std::to_string(d),
               num(s),
               std::to_string(t),
               g.satisfied_at ? std::to_string(*g.satisfied_at) : "",
               g.xi_sq_series.empty() ? "" : num(g.xi_sq_series.back()),
               g.threshold_series.empty() ? "" : num(g.threshold_series.back())};
  json j;
  j["d"] = d;
  j["s_norm"] = s;
  j["t"] = t;
  j["scale"] = g.scale;
  j["satisfied_at"] = g.satisfied_at ? json(*g.satisfied_at) : json(nullptr);
  j["prefixes"] = g.prefixes;
  j["xi_sq"] = g.xi_sq_series;
  j["threshold"] = g.threshold_series;
  row.run_json = j.dump(2);
  return row;
}

Row dispatch(const ExperimentConfig& cfg, const std::string& algo, std::uint64_t seed) {
  switch (cfg.kind) {
    case ExperimentKind::Coverage: return run_coverage(cfg, algo, seed);
    case ExperimentKind::PureExplore: return run_pure(cfg, algo, seed);
    case ExperimentKind::Contextual: return run_contextual(cfg, algo, seed);
    case ExperimentKind::LowerBound: return run_lower(cfg, algo, seed);
    case ExperimentKind::GaussianBurnin: return run_gaussian(cfg, algo, seed);
  }
  fail(ErrorCode::InvalidConfig, "unknown experiment kind");
}

void write_file(const fs::path& p, const std::string& body) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorCode::InvalidConfig, "cannot write " + p.string());
  f << body;
}

}  // namespace

const char* experiment_kind_name(ExperimentKind kind) { return info(kind).name; }

std::optional<ExperimentKind> parse_experiment_kind(const std::string& name) {
  for (const auto& i : kinds())
    if (name == i.name) return i.kind;
  return std::nullopt;
}

std::vector<std::string> known_algorithms(ExperimentKind kind) { return info(kind).algorithms; }
std::vector<std::string> summary_columns(ExperimentKind kind) { return info(kind).columns; }

void ExperimentConfig::validate() const {
  if (algorithms.empty()) fail(ErrorCode::InvalidConfig, "algorithm list is empty");
  const auto known = known_algorithms(kind);
  for (const auto& a : algorithms)
    if (std::find(known.begin(), known.end(), a) == known.end())
      fail(ErrorCode::InvalidConfig, "unknown algorithm '" + a + "' for " + experiment_kind_name(kind));
  if (seeds.empty()) fail(ErrorCode::InvalidConfig, "seed list is empty");
  if (!(delta > 0.0 && delta <= std::exp(-1.0))) fail(ErrorCode::InvalidConfig, "delta must lie in (0, 1/e]");
  if (!(epsilon > 0.0)) fail(ErrorCode::InvalidConfig, "epsilon must be positive");
  if (budget < 1) fail(ErrorCode::InvalidConfig, "budget must be positive");
  if (out.empty()) fail(ErrorCode::InvalidConfig, "output prefix is empty");
  if (!instance.is_object() || !params.is_object())
    fail(ErrorCode::InvalidConfig, "instance and params must be objects");
}

json ExperimentConfig::to_json() const {
  json j;
  j["kind"] = experiment_kind_name(kind);
  j["instance"] = instance;
  j["algorithms"] = algorithms;
  j["delta"] = delta;
  j["epsilon"] = epsilon;
  j["seeds"] = seeds;
  j["budget"] = budget;
  j["out"] = out;
  j["params"] = params;
  return j;
}

ExperimentConfig parse_config(const std::string& text, std::optional<ExperimentKind> kind) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidConfig, std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorCode::InvalidConfig, "config must be a JSON object");
  ExperimentConfig c;
  if (j.contains("kind")) {
    const auto k = parse_experiment_kind(get_or<std::string>(j, "kind", ""));
    if (!k) fail(ErrorCode::InvalidConfig, "unknown kind '" + j["kind"].dump() + "'");
    if (kind && *kind != *k)
      fail(ErrorCode::InvalidConfig, std::string("config kind ") + experiment_kind_name(*k) + " does not match " +
                                         experiment_kind_name(*kind));
    c.kind = *k;
  } else if (kind) {
    c.kind = *kind;
  } else {
    fail(ErrorCode::InvalidConfig, "config has no kind");
  }
  c.instance = get_or<json>(j, "instance", json::object());
  c.algorithms = get_or<std::vector<std::string>>(j, "algorithms", {});
  c.delta = get_or<double>(j, "delta", c.delta);
  c.epsilon = get_or<double>(j, "epsilon", c.epsilon);
  c.seeds = get_or<std::vector<std::uint64_t>>(j, "seeds", {});
  c.budget = static_cast<std::int64_t>(get_or<double>(j, "budget", static_cast<double>(c.budget)));
  c.out = get_or<std::string>(j, "out", "");
  c.params = get_or<json>(j, "params", json::object());
  return c;
}

ExperimentConfig load_config(const std::string& path, std::optional<ExperimentKind> kind) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::InvalidConfig, "cannot read config " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), kind);
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string s = cfg.to_json().dump();
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(s.data(), s.size())));
  return buf;
}

TransductiveInstance build_instance(const json& spec) {
  const auto gen = get_or<std::string>(spec, "generator", "fig1");
  if (gen == "fig1") return gen_fig1_benchmark(get_or<Eigen::Index>(spec, "d", 10));
  if (gen == "example1") return gen_example1(get_or<double>(spec, "r", 1.0), get_or<double>(spec, "eps", 0.5));
  if (gen == "example2") return gen_example2(get_or<double>(spec, "r", 1.0), get_or<double>(spec, "eps", 0.5));
  if (gen == "pairwise")
    return gen_pairwise(get_or<std::size_t>(spec, "n_items", 20), get_or<Eigen::Index>(spec, "d", 5),
                        get_or<std::uint64_t>(spec, "seed", 0), get_or<std::size_t>(spec, "cap", 5000),
                        get_or<double>(spec, "theta_norm", 1.0))
        .instance;
  fail(ErrorCode::InvalidConfig, "unknown instance generator '" + gen + "'");
}

ContextModel build_context_model(const json& spec) {
  ContextModel m;
  m.d = get_or<Eigen::Index>(spec, "d", 5);
  m.k = get_or<int>(spec, "k", 10);
  const auto ctx = get_or<std::string>(spec, "context", "gaussian");
  if (ctx == "gaussian") m.kind = ContextKind::Gaussian;
  else if (ctx == "ball") m.kind = ContextKind::UniformBall;
  else fail(ErrorCode::InvalidConfig, "unknown context kind '" + ctx + "'");
  if (m.d < 1) fail(ErrorCode::InvalidConfig, "d must be positive");
  RngStream rng(get_or<std::uint64_t>(spec, "theta_seed", 0), 0x7468657461ULL);
  m.theta_star = get_or<double>(spec, "theta_norm", 2.0) * rng.unit_sphere(m.d);
  m.validate();
  return m;
}

CoverageSetup build_coverage_setup(Eigen::Index d, std::int64_t t, double theta_norm, std::uint64_t seed) {
  if (d < 1 || t < 1) fail(ErrorCode::InvalidConfig, "coverage needs d >= 1 and t >= 1");
  RngStream rng(seed, 0x636f76ULL);
  ArmList arms;
  for (Eigen::Index i = 0; i < d; ++i) arms.push_back(Vec::Unit(d, i));
  for (Eigen::Index i = 0; i < d; ++i) arms.push_back(rng.unit_sphere(d));
  CoverageSetup s;
  s.theta_star = theta_norm * rng.unit_sphere(d);
  s.direction = rng.unit_sphere(d);
  const DesignSolution sol = minimize_design(arms, {g_optimal()});
  const RoundedAllocation alloc = apportion(sol.design, t);
  for (std::size_t i = 0; i < alloc.arms.size(); ++i)
    if (alloc.counts[i] > 0) {
      s.arms.push_back(alloc.arms[i]);
      s.counts.push_back(alloc.counts[i]);
    }
  return s;
}

ExperimentOutcome run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
  cfg.validate();
  ExperimentOutcome out;
  const fs::path prefix(cfg.out);
  const fs::path summary = prefix.string() + ".summary.csv";
  const fs::path manifest = prefix.string() + ".manifest.json";
  const fs::path runs = prefix.string() + ".runs";
  out.summary_path = summary.string();
  out.manifest_path = manifest.string();
  out.runs_dir = runs.string();
  // fail on unwritable paths before doing any work
  std::error_code ec;
  if (prefix.has_parent_path()) fs::create_directories(prefix.parent_path(), ec);
  fs::create_directories(runs, ec);
  if (!fs::is_directory(runs)) fail(ErrorCode::InvalidConfig, "cannot create " + runs.string());
  write_file(summary, "");

  std::vector<std::uint64_t> seeds;
  for (auto s : cfg.seeds) seeds.push_back(s + static_cast<std::uint64_t>(opts.seed_offset));
  struct Job {
    std::string algo;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const auto& a : cfg.algorithms)
    for (auto s : seeds) jobs.push_back({a, s});
  std::vector<Row> rows(jobs.size());
  const int threads = opts.jobs > 0 ? opts.jobs : omp_get_max_threads();

#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    try {
      rows[i] = dispatch(cfg, jobs[i].algo, jobs[i].seed);
    } catch (const Error& e) {
      rows[i].error = e.what();
    } catch (const std::exception& e) {
      rows[i].error = e.what();
    }
  }

  const auto cols = summary_columns(cfg.kind);
  std::string csv;
  for (std::size_t c = 0; c < cols.size(); ++c) csv += (c ? "," : "") + cols[c];
  csv += '\n';
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    Row& r = rows[i];
    // failed runs keep their key and leave the measurement columns empty
    r.cells.resize(cols.size() - 3);
    std::string line = csv_cell(jobs[i].algo) + "," + std::to_string(jobs[i].seed);
    for (const auto& c : r.cells) line += "," + csv_cell(c);
    line += "," + csv_cell(r.error);
    csv += line + '\n';
    if (!r.error.empty()) ++out.failures;
    if (!r.run_json.empty())
      write_file(runs / (jobs[i].algo + "-" + std::to_string(jobs[i].seed) + ".json"), r.run_json + "\n");
  }
  write_file(summary, csv);
  out.rows = jobs.size();

  json m;
  m["kind"] = experiment_kind_name(cfg.kind);
  m["config_hash"] = config_hash(cfg);
  m["library_version"] = kLibraryVersion;
  m["seed_offset"] = opts.seed_offset;
  m["seeds"] = seeds;
  m["algorithms"] = cfg.algorithms;
  m["rows"] = out.rows;
  m["failures"] = out.failures;
  m["summary"] = summary.filename().string();
  m["config"] = cfg.to_json();
  write_file(manifest, m.dump(2) + "\n");
  out.exit_code = out.failures ? 3 : 0;
  return out;
}

}  // namespace logband
