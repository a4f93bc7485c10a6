#pragma once

#include <cstdint>
#include <optional>

#include "logband/logistic.hpp"

namespace logband {

inline constexpr double kWidthConstTrue = 3.5;
inline constexpr double kWidthConstEmpirical = 5.2;
inline constexpr double kVarianceFactor = 2.2;

// delta must lie in (0, 1/e].
struct ConfidenceParams {
  double delta = 0.05;
  std::size_t t_eff = 1;
  Eigen::Index d = 1;
};

// gamma(d) = d + ln(6 (2 + t_eff) / delta)
double gamma_d(const ConfidenceParams& p);

// max over arms of x^T H^+ x
double xi_sq(const ArmList& arms, const Mat& h);
bool burnin_condition(const ArmList& arms, const Mat& h, const ConfidenceParams& p);

enum class BoundFamily { FixedDesignTrue, FixedDesignEmpirical, Li17, FauryAnytime };

struct WidthReport {
  BoundFamily bound_family = BoundFamily::FixedDesignTrue;
  double center = 0.0;
  double half_width = 0.0;
  std::optional<bool> burnin_satisfied;
  std::optional<double> xi_sq;
  bool null_space_warning = false;
};

// Fixed-design interval for x^T theta*. c = 3.5 with H at theta*, 5.2 with H at theta-hat.
WidthReport width_fixed_design(const Vec& x, const FisherMatrix& h, const ConfidenceParams& p, bool empirical,
                       const ArmList& design_arms = {});
WidthReport width_li17(const Vec& x, const Mat& v, double kappa, double delta);
double faury_gamma(Eigen::Index d, double s_star, std::int64_t t, double delta);
WidthReport width_faury(const Vec& x, const Mat& h_reg, double s_star, std::int64_t t, double delta);

// (1/k) |x|_{H*^+} <= |x|_{Hhat^+} <= k |x|_{H*^+} for every x, k = sqrt(2.2)
bool variance_event(const Mat& h_hat, const Mat& h_star);

struct CoverageSetup {
  ArmList arms;
  std::vector<std::int64_t> counts;
  Vec theta_star;
  Vec direction;
};

struct CoverageReport {
  std::int64_t t = 0;
  std::int64_t reps = 0;
  double delta = 0.0;
  double failure_rate_true = 0.0;
  double failure_rate_empirical = 0.0;
  double var_event_rate = 0.0;
  std::int64_t separations = 0;
  double xi_sq = 0.0;
  double gamma = 0.0;
  bool burnin_satisfied = false;
};

// Replicate r uses stream derive_seed(seed, r): results do not depend on thread count.
CoverageReport coverage_monte_carlo(const CoverageSetup& setup, double delta, std::int64_t reps,
                                    std::uint64_t seed);
CoverageReport coverage_monte_carlo_serial(const CoverageSetup& setup, double delta,
                                           std::int64_t reps, std::uint64_t seed);

}  // namespace logband
