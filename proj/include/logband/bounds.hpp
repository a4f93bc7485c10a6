#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "logband/design.hpp"
#include "logband/instance.hpp"

namespace logband {

struct HardInstance {
  ArmList z_arms;
  ArmList thetas;
  double s_norm = 0.0;
  double epsilon = 0.0;
  double u_angle = 0.0;
  double delta2 = 0.0;
  std::size_t n_target = 0;  // min(n_cap, floor(e^{eps^2 d / 4}))
  std::int64_t rejections = 0;
};

struct HardInstanceOptions {
  std::size_t n_cap = 512;
  std::uint64_t packing_seed = 0;
  std::optional<double> delta2;  // unset: 1 / (2n)
  std::int64_t retry_budget = 100000;
};

// z_i = (cos u, sin u a_i), theta_i = S (-cos u, sin u a_i) with tan u = sqrt(2/(1+eps)),
// S = (3+eps)/(1-eps) log((1-delta2)/delta2) and |a_i^T a_j| <= eps.
HardInstance build_hard_instance(Eigen::Index d, double epsilon, const HardInstanceOptions& opts = {});

struct FloorReport {
  double floor = 0.0;  // n / 16
  std::size_t n = 0;
  double inv_kappa0 = 0.0;
  double inv_kappa0_bound = 0.0;  // 2 (1 + ((1-delta2)/delta2)^{(1+3eps)/(1-eps)})
  bool kappa_relation_holds = false;
};

FloorReport moderate_confidence_floor(const HardInstance& inst);

// KL(Bern(mu(x^T theta1)) || Bern(mu(x^T theta2)))
double kl_bernoulli_logistic(const Vec& x, const Vec& theta1, const Vec& theta2);

struct WeightedMatrices {
  Mat g;  // sum lambda_x alpha(x, theta1, theta2) x x^T
  Mat k;  // sum lambda_x beta(x^T theta1, x^T theta2) x x^T
};

WeightedMatrices weighted_matrices(const Design& design, const Vec& theta1, const Vec& theta2);

struct ProjectionOptions {
  int max_iters = 500;
  double tol = 1e-8;
  double rho = 0.5;
  std::optional<Vec> start;
};

struct AltProjection {
  Vec theta_z;
  double fixed_point_residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Damped fixed point for theta_z, the closest parameter (in the G metric) at which z ties z*.
AltProjection project_alternative(const Design& design, const Vec& theta_star, const Vec& z_star, const Vec& z,
                                  const ProjectionOptions& opts = {});
// theta* - gap H^+ v / |v|^2_{H^+}, v = z* - z, H = H(lambda, theta*)
Vec gaussian_projection(const Design& design, const Vec& theta_star, const Vec& z_star, const Vec& z);

struct LowerBoundOptions {
  int outer_iters = 200;
  double rel_change = 1e-4;
  bool exhaustive = false;
  std::size_t max_alternates = 256;  // used when |Z| > 1000 and not exhaustive
  ProjectionOptions projection;
};

struct LowerBoundReport {
  double value = 0.0;
  double c_value = 0.0;
  double log_term = 0.0;
  double delta = 0.0;
  Design design;
  std::vector<std::size_t> alternates;
  std::vector<double> per_alternate;  // |theta* - theta_z|^2_K at the returned design
  bool all_converged = true;
  int iterations = 0;
  std::string instance_hash;
};

// log(1/(2.4 delta)) / max_lambda min_z |theta* - theta_z|^2_{K(lambda, theta*, theta_z)}; a numeric estimate.
LowerBoundReport transportation_lower_bound(const TransductiveInstance& inst, double delta,
                                            const LowerBoundOptions& opts = {});
// min over alternates at a fixed design
double transportation_c(const TransductiveInstance& inst, const Design& design, const ProjectionOptions& opts = {});

std::string lower_bound_to_json(const LowerBoundReport& r);
std::string hard_instance_to_json(const HardInstance& h, const FloorReport& f);

}  // namespace logband
