#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "logband/confidence.hpp"
#include "logband/contextual.hpp"
#include "logband/instance.hpp"

namespace logband {

inline constexpr const char* kLibraryVersion = "0.1.0";

enum class ExperimentKind { Coverage, PureExplore, Contextual, LowerBound, GaussianBurnin };

const char* experiment_kind_name(ExperimentKind kind);
std::optional<ExperimentKind> parse_experiment_kind(const std::string& name);
std::vector<std::string> known_algorithms(ExperimentKind kind);
// column set is a function of the kind only
std::vector<std::string> summary_columns(ExperimentKind kind);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::PureExplore;
  nlohmann::ordered_json instance = nlohmann::ordered_json::object();
  std::vector<std::string> algorithms;
  double delta = 0.05;
  double epsilon = 0.5;
  std::vector<std::uint64_t> seeds;
  std::int64_t budget = 1'000'000'000;
  std::string out;
  nlohmann::ordered_json params = nlohmann::ordered_json::object();

  // throws InvalidConfig
  void validate() const;
  nlohmann::ordered_json to_json() const;
};

// JSON document; `kind` may be omitted when the caller supplies it.
ExperimentConfig parse_config(const std::string& text, std::optional<ExperimentKind> kind = std::nullopt);
ExperimentConfig load_config(const std::string& path, std::optional<ExperimentKind> kind = std::nullopt);
std::string config_hash(const ExperimentConfig& cfg);

// builders shared with the tests
TransductiveInstance build_instance(const nlohmann::ordered_json& spec);
ContextModel build_context_model(const nlohmann::ordered_json& spec);
// basis plus d random unit arms, G-optimal design rounded to t pulls, theta* of the given norm
CoverageSetup build_coverage_setup(Eigen::Index d, std::int64_t t, double theta_norm, std::uint64_t seed);

struct RunOptions {
  int jobs = 0;  // 0: OpenMP default
  std::int64_t seed_offset = 0;
};

struct ExperimentOutcome {
  int exit_code = 0;  // 0 ok, 3 when any run failed
  std::size_t rows = 0;
  std::size_t failures = 0;
  std::string summary_path;
  std::string manifest_path;
  std::string runs_dir;
};

// Rows are ordered by (algorithm, seed) whatever the completion order.
ExperimentOutcome run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {});

}  // namespace logband
