#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "logband/types.hpp"

namespace logband {

struct Design {
  ArmList arms;
  Vec weights;
};

Mat design_gram(const Design& design);
Mat design_fisher(const Design& design, const Vec& theta);

enum class ObjectiveKind { GOptimal, MaxDirectionH, MaxPairH };
const char* objective_name(ObjectiveKind kind);

// GOptimal: max_x x^T A^+ x over the design arms.
// MaxDirectionH: scale * max_v v^T H^+ v over `directions`.
// MaxPairH: scale * max over pairs of `directions` of (z - z')^T H^+ (z - z').
struct DesignObjective {
  ObjectiveKind kind = ObjectiveKind::GOptimal;
  std::optional<Vec> theta;
  ArmList directions;
  double scale = 1.0;
};

DesignObjective g_optimal(double scale = 1.0);
DesignObjective max_direction(const Vec& theta, ArmList dirs, double scale = 1.0);
DesignObjective max_pair(const Vec& theta, ArmList items, double scale = 1.0);

// +inf when a direction leaves the column space of the design matrix.
double eval_objective(const Design& design, const DesignObjective& obj);
double eval_objective(const Design& design, const std::vector<DesignObjective>& objs);

struct FwOptions {
  int max_iters = 5000;
  double rel_tol = 1e-4;
  double support_floor = 1e-9;
  bool line_search = true;
};

struct DesignSolution {
  Design design;
  double value = 0.0;
  double gap = 0.0;
  int iterations = 0;
  bool converged = false;
};

DesignSolution minimize_design(const ArmList& arms, const std::vector<DesignObjective>& objs,
                               const FwOptions& opts = {});

enum class RoundingRule { Safe, Quadratic };

// r(eps): (d(d+1)+2)/eps (safe) or d^2/eps
double rounding_min_samples(Eigen::Index d, double eps, RoundingRule rule = RoundingRule::Safe);

struct RoundedAllocation {
  ArmList arms;
  std::vector<std::int64_t> counts;
  std::int64_t total = 0;
  // min over the support of n_x / (n lambda_x)
  double efficiency = 0.0;
  bool guarantee_holds = false;
};

// Efficient apportionment with no sample-size precondition.
RoundedAllocation apportion(const Design& design, std::int64_t n, double eps = 0.0);
RoundedAllocation round_design(const Design& design, std::int64_t n, double eps,
                               RoundingRule rule = RoundingRule::Safe);
Mat allocation_fisher(const RoundedAllocation& alloc, const Vec& theta);

std::string design_to_csv(const Design& design);
std::string design_to_json(const DesignSolution& sol, ObjectiveKind kind);

}  // namespace logband
