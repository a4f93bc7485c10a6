#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "logband/design.hpp"
#include "logband/error.hpp"
#include "logband/experiment.hpp"
#include "logband/generators.hpp"
#include "logband/logistic.hpp"

using namespace logband;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "logband_test_harness" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      const char c = line[i];
      if (quoted) {
        if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') cur += '"', ++i;
        else if (c == '"') quoted = false;
        else cur += c;
      } else if (c == '"') {
        quoted = true;
      } else if (c == ',') {
        cells.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    cells.push_back(cur);
    rows.push_back(cells);
  }
  return rows;
}

ExperimentConfig pure_config(const fs::path& dir) {
  return parse_config(R"({
    "kind": "pure-explore",
    "instance": {"generator": "example1", "r": 1.0, "eps": 0.5},
    "algorithms": ["rage_glm", "passive"],
    "delta": 0.05,
    "seeds": [0, 1, 2],
    "out": ")" + (dir / "ex1").string() + R"("
  })");
}

}  // namespace

TEST_CASE("generators: benchmark and examples") {
  const auto f = gen_fig1_benchmark(10);
  CHECK(f.z_arms.size() == 11);
  CHECK(f.best_index() == 0);
  CHECK(f.min_gap() == doctest::Approx(1 - std::cos(0.1)).epsilon(1e-12));
  CHECK(f.min_gap() == doctest::Approx(0.0049958347219741794).epsilon(1e-12));

  for (double r : {0.5, 1.0, 3.0}) {
    const auto e1 = gen_example1(r, 0.1);
    const double k0 = kappa_min(e1.theta_star, e1.x_arms, KappaMode::FiniteSet);
    CHECK(k0 == doctest::Approx(link_mu_dot(r)));
    CHECK(1.0 / k0 <= 4.0 * std::exp(r));
  }
  const auto e2 = gen_example2(1.0, 0.2);
  const Vec diff = e2.x_arms[2];
  CHECK(diff.dot(e2.theta_star) == doctest::Approx(0.2));
  // point mass on the difference arm: |e1 - e2|^2_{H^+} = 1/mu'(eps)
  const Design pm{e2.x_arms, Vec::Unit(3, 2)};
  const SymPinv h(design_fisher(pm, e2.theta_star));
  CHECK(h.quad(diff) == doctest::Approx(1.0 / link_mu_dot(0.2)).epsilon(1e-10));
}

TEST_CASE("generators: pairwise provenance and cap") {
  const auto p = gen_pairwise(20, 5, 3, 60);
  CHECK(p.instance.z_arms.size() == 20);
  CHECK(p.instance.x_arms.size() <= 60);
  CHECK(p.provenance.size() == p.instance.x_arms.size());
  for (std::size_t i = 0; i < p.provenance.size(); ++i) {
    const auto [a, b] = p.provenance[i];
    CHECK((p.instance.x_arms[i] - (p.instance.z_arms[a] - p.instance.z_arms[b])).norm() < 1e-15);
    CHECK(p.instance.x_arms[i].norm() <= 1.0 + 1e-12);
  }
  CHECK(gen_pairwise(20, 5, 3).instance.x_arms.size() == 190);
}

TEST_CASE("generators: gaussian burn-in") {
  int mono = 0;
  double sum15 = 0, sum3 = 0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto g = gen_gaussian_burnin(16, 1.5, 20000, s, 0.05, 80);
    auto at = [&](std::int64_t p) {
      for (std::size_t i = 0; i < g.prefixes.size(); ++i)
        if (g.prefixes[i] == p) return g.xi_sq_series[i];
      FAIL("missing checkpoint");
      return 0.0;
    };
    mono += at(5000) >= at(10000) && at(10000) >= at(20000);
    REQUIRE(g.satisfied_at);
    sum15 += static_cast<double>(*g.satisfied_at);
    const auto g3 = gen_gaussian_burnin(16, 3.0, 20000, s, 0.05, 80);
    REQUIRE(g3.satisfied_at);
    sum3 += static_cast<double>(*g3.satisfied_at);
    CHECK(g.threshold_series.back() < g.threshold_series.front());
  }
  CHECK(mono >= 9);
  CHECK(sum3 / sum15 <= std::exp(3.0) / 2);
  CHECK_THROWS_AS(gen_gaussian_burnin(8, 3.0, 100, 0), Error);
}

TEST_CASE("config parsing and validation") {
  const auto dir = scratch("config");
  auto expect_invalid = [](const std::string& text) {
    try {
      parse_config(text).validate();
      FAIL("expected InvalidConfig for " << text);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::InvalidConfig);
    }
  };
  expect_invalid(R"({"kind": "pure-explore", "algorithms": [], "seeds": [0], "out": "x"})");
  expect_invalid(R"({"kind": "pure-explore", "algorithms": ["rage_glm"], "seeds": [], "out": "x"})");
  expect_invalid(R"({"kind": "pure-explore", "algorithms": ["rage_glm"], "seeds": [0], "delta": 0.5, "out": "x"})");
  expect_invalid(R"({"kind": "pure-explore", "algorithms": ["sup_logistic"], "seeds": [0], "out": "x"})");
  expect_invalid(R"({"kind": "nonsense", "algorithms": ["rage_glm"], "seeds": [0], "out": "x"})");
  expect_invalid(R"({"algorithms": ["rage_glm"], "seeds": [0], "out": "x"})");
  expect_invalid(R"({"kind": "pure-explore", "algorithms": ["rage_glm"], "seeds": [0]})");
  expect_invalid("{not json");
  // kind supplied by the caller must agree with the document
  CHECK_THROWS_AS(parse_config(R"({"kind": "coverage"})", ExperimentKind::Contextual), Error);
  CHECK(parse_config(R"({"algorithms": ["uniform"]})", ExperimentKind::Contextual).kind == ExperimentKind::Contextual);

  ExperimentConfig c = pure_config(dir);
  c.algorithms.clear();
  CHECK_THROWS_AS(run_experiment(c), Error);
  CHECK_FALSE(fs::exists(dir / "ex1.summary.csv"));

  // hash is sensitive to the config and stable across parses
  CHECK(config_hash(pure_config(dir)) == config_hash(pure_config(dir)));
  ExperimentConfig d = pure_config(dir);
  d.delta = 0.01;
  CHECK(config_hash(d) != config_hash(pure_config(dir)));
}

TEST_CASE("pure exploration run: outputs, ordering, byte-identical reruns") {
  const auto dir = scratch("pure");
  const ExperimentConfig c = pure_config(dir);
  RunOptions one;
  one.jobs = 1;
  const ExperimentOutcome a = run_experiment(c, one);
  CHECK(a.exit_code == 0);
  CHECK(a.rows == 6);
  const std::string csv1 = slurp(a.summary_path), man1 = slurp(a.manifest_path);
  const std::string run1 = slurp(fs::path(a.runs_dir) / "rage_glm-1.json");

  RunOptions three;
  three.jobs = 3;
  const ExperimentOutcome b = run_experiment(c, three);
  CHECK(slurp(b.summary_path) == csv1);
  CHECK(slurp(b.manifest_path) == man1);
  CHECK(slurp(fs::path(b.runs_dir) / "rage_glm-1.json") == run1);

  const auto rows = read_csv(a.summary_path);
  REQUIRE(rows.size() == 7);
  CHECK(rows[0] == summary_columns(ExperimentKind::PureExplore));
  const std::vector<std::pair<std::string, std::string>> keys = {{"rage_glm", "0"}, {"rage_glm", "1"},
                                                                 {"rage_glm", "2"}, {"passive", "0"},
                                                                 {"passive", "1"},  {"passive", "2"}};
  for (std::size_t i = 0; i < keys.size(); ++i) {
    CHECK(rows[i + 1].size() == rows[0].size());
    CHECK(rows[i + 1][0] == keys[i].first);
    CHECK(rows[i + 1][1] == keys[i].second);
    CHECK(rows[i + 1][3] == "1");  // correct
    CHECK(rows[i + 1].back().empty());
    CHECK(fs::exists(fs::path(a.runs_dir) / (keys[i].first + "-" + keys[i].second + ".json")));
  }
  CHECK(man1.find(config_hash(c)) != std::string::npos);
  CHECK(man1.find(kLibraryVersion) != std::string::npos);

  // the seed offset shifts every seed and is recorded
  RunOptions off;
  off.seed_offset = 10;
  const ExperimentOutcome o = run_experiment(c, off);
  const auto shifted = read_csv(o.summary_path);
  CHECK(shifted[1][1] == "10");
  CHECK(slurp(o.manifest_path).find("\"seed_offset\": 10") != std::string::npos);
  CHECK(fs::exists(fs::path(o.runs_dir) / "passive-12.json"));
}

TEST_CASE("coverage run meets the nominal failure rate") {
  const auto dir = scratch("coverage");
  const ExperimentConfig c = parse_config(R"({
    "kind": "coverage",
    "instance": {"d": 3, "theta_norm": 1.0},
    "algorithms": ["fixed_design"],
    "delta": 0.1,
    "seeds": [7],
    "params": {"t": 2000, "reps": 2000},
    "out": ")" + (dir / "cov").string() + R"("
  })");
  const ExperimentOutcome r = run_experiment(c);
  REQUIRE(r.exit_code == 0);
  const auto rows = read_csv(r.summary_path);
  REQUIRE(rows.size() == 2);
  const auto& cols = rows[0];
  const auto idx = std::find(cols.begin(), cols.end(), "failure_rate_true") - cols.begin();
  CHECK(std::stod(rows[1][static_cast<std::size_t>(idx)]) <= 0.1);
  CHECK(rows[1][3] == "2000");

  const CoverageSetup s = build_coverage_setup(3, 2000, 1.0, 0);
  std::int64_t total = 0;
  for (auto n : s.counts) total += n;
  CHECK(total == 2000);
  CHECK(s.theta_star.norm() == doctest::Approx(1.0));
}

TEST_CASE("module errors are flushed into the error column") {
  const auto dir = scratch("errors");
  const ExperimentConfig c = parse_config(R"({
    "kind": "lower-bound",
    "instance": {"generator": "example1", "r": 1.0, "eps": 0.5},
    "algorithms": ["transportation", "hard_instance"],
    "seeds": [0],
    "params": {"d": 3},
    "out": ")" + (dir / "lb").string() + R"("
  })");
  const ExperimentOutcome r = run_experiment(c);
  CHECK(r.exit_code == 3);
  CHECK(r.failures == 1);
  const auto rows = read_csv(r.summary_path);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == summary_columns(ExperimentKind::LowerBound));
  CHECK(rows[1].back().empty());
  CHECK(std::stod(rows[1][3]) > 0.0);
  CHECK(rows[2][0] == "hard_instance");
  CHECK(rows[2].back().find("InvalidConfig") != std::string::npos);
  CHECK(fs::exists(fs::path(r.runs_dir) / "transportation-0.json"));
  CHECK_FALSE(fs::exists(fs::path(r.runs_dir) / "hard_instance-0.json"));
}

TEST_CASE("column sets depend on the kind only") {
  std::set<std::vector<std::string>> seen;
  for (auto k : {ExperimentKind::Coverage, ExperimentKind::PureExplore, ExperimentKind::Contextual,
                 ExperimentKind::LowerBound, ExperimentKind::GaussianBurnin}) {
    const auto cols = summary_columns(k);
    CHECK(cols.front() == "algorithm");
    CHECK(cols[1] == "seed");
    CHECK(cols.back() == "error");
    seen.insert(cols);
    CHECK(parse_experiment_kind(experiment_kind_name(k)) == k);
  }
  CHECK(seen.size() == 5);
}

TEST_CASE("contextual and burn-in runs") {
  const auto dir = scratch("ctx");
  const ExperimentConfig c = parse_config(R"({
    "kind": "contextual",
    "instance": {"d": 3, "k": 4, "theta_norm": 2.0},
    "algorithms": ["sup_logistic", "uniform"],
    "seeds": [0, 1],
    "params": {"horizon": 300, "alpha": 0.5},
    "out": ")" + (dir / "ctx").string() + R"("
  })");
  const ExperimentOutcome r = run_experiment(c);
  CHECK(r.exit_code == 0);
  const auto rows = read_csv(r.summary_path);
  REQUIRE(rows.size() == 5);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i][2] == "300");
    CHECK(std::stod(rows[i][3]) >= 0.0);
  }

  const ExperimentConfig g = parse_config(R"({
    "kind": "gaussian-burnin",
    "algorithms": ["gaussian_burnin"],
    "seeds": [0],
    "params": {"d": 8, "s_norm": 2.0, "t": 3000},
    "out": ")" + (dir / "gb").string() + R"("
  })");
  const ExperimentOutcome q = run_experiment(g);
  CHECK(q.exit_code == 0);
  CHECK(read_csv(q.summary_path)[1][5] != "");
}
