#include "logband/confidence.hpp"

#include <cmath>

#include "logband/error.hpp"
#include "logband/kernels.hpp"
#include "logband/linalg.hpp"
#include "logband/rng.hpp"

namespace logband {

namespace {

void check_delta(double delta) {
  if (!(delta > 0.0 && delta <= std::exp(-1.0) + 1e-15))
    fail(ErrorCode::InvalidConfig, "delta must lie in (0, 1/e]");
}

}  // namespace

double gamma_d(const ConfidenceParams& p) {
  check_delta(p.delta);
  return static_cast<double>(p.d) + std::log(6.0 * (2.0 + static_cast<double>(p.t_eff)) / p.delta);
}

double xi_sq(const ArmList& arms, const Mat& h) {
  SymPinv pinv(h);
  double m = 0.0;
  for (const auto& x : arms) m = std::max(m, pinv.quad(x));
  return m;
}

bool burnin_condition(const ArmList& arms, const Mat& h, const ConfidenceParams& p) {
  return xi_sq(arms, h) <= 1.0 / gamma_d(p);
}

WidthReport width_fixed_design(const Vec& x, const FisherMatrix& h, const ConfidenceParams& p, bool empirical,
                       const ArmList& design_arms) {
  check_delta(p.delta);
  if (x.size() != h.matrix.rows()) fail(ErrorCode::InvalidInstance, "direction dimension mismatch");
  SymPinv pinv(h.matrix);
  WidthReport r;
  r.bound_family = empirical ? BoundFamily::FixedDesignEmpirical : BoundFamily::FixedDesignTrue;
  r.center = h.at_theta.size() == x.size() ? x.dot(h.at_theta) : 0.0;
  const double c = empirical ? kWidthConstEmpirical : kWidthConstTrue;
  const double q = pinv.quad(x);
  r.half_width = c * std::sqrt(q) * std::sqrt(std::log(2.0 * (2.0 + static_cast<double>(p.t_eff)) / p.delta));
  r.null_space_warning = x.norm() > 0.0 && q == 0.0;
  if (!design_arms.empty()) {
    double m = 0.0;
    for (const auto& a : design_arms) m = std::max(m, pinv.quad(a));
    r.xi_sq = m;
    r.burnin_satisfied = m <= 1.0 / gamma_d(p);
  }
  return r;
}

WidthReport width_li17(const Vec& x, const Mat& v, double kappa, double delta) {
  if (!(kappa > 0.0)) fail(ErrorCode::InvalidConfig, "kappa must be positive");
  if (!(delta > 0.0 && delta < 1.0)) fail(ErrorCode::InvalidConfig, "delta must be in (0,1)");
  WidthReport r;
  r.bound_family = BoundFamily::Li17;
  r.half_width = std::sqrt(SymPinv(v).quad(x)) * std::sqrt(std::log(1.0 / delta)) / kappa;
  return r;
}

double faury_gamma(Eigen::Index d, double s_star, std::int64_t t, double delta) {
  const double dd = static_cast<double>(d);
  const double a = 2.0 * s_star + 1.0;
  return 3.0 * std::sqrt(a) *
         (std::sqrt(dd) * std::log(static_cast<double>(t) * a / (2.0 * dd)) + std::sqrt(std::log(1.0 / delta)));
}

WidthReport width_faury(const Vec& x, const Mat& h_reg, double s_star, std::int64_t t, double delta) {
  const Eigen::Index d = h_reg.rows();
  if (t < 4 * d) fail(ErrorCode::TooFewSamples, "Faury width needs t >= 4d");
  if (!(delta > 0.0 && delta < 1.0)) fail(ErrorCode::InvalidConfig, "delta must be in (0,1)");
  WidthReport r;
  r.bound_family = BoundFamily::FauryAnytime;
  const double norm = std::sqrt(x.dot(h_reg.llt().solve(x)));
  r.half_width = (2.0 + 4.0 * s_star) * faury_gamma(d, s_star, t, delta) * norm;
  return r;
}

bool variance_event(const Mat& h_hat, const Mat& h_star) {
  const Vec ev = generalized_eigenvalues(h_hat, h_star);
  if (ev.size() == 0) return true;
  return ev.minCoeff() >= 1.0 / kVarianceFactor && ev.maxCoeff() <= kVarianceFactor;
}

namespace {

struct Prepared {
  std::int64_t t = 0;
  std::size_t t_eff = 0;
  Mat h_star;
  double width_true = 0.0;
  double log_term = 0.0;
  std::vector<double> probs;
};

Prepared prepare(const CoverageSetup& s, double delta, std::int64_t reps, CoverageReport& rep) {
  if (reps <= 0) fail(ErrorCode::InvalidConfig, "reps must be positive");
  check_delta(delta);
  if (s.arms.empty() || s.arms.size() != s.counts.size())
    fail(ErrorCode::InvalidConfig, "coverage design arms/counts mismatch");
  Prepared p;
  LogisticDataset shape(s.theta_star.size());
  for (std::size_t i = 0; i < s.arms.size(); ++i) {
    if (s.counts[i] < 0) fail(ErrorCode::InvalidConfig, "negative count");
    shape.add_counts(s.arms[i], s.counts[i], 0);
    p.probs.push_back(link_mu(s.arms[i].dot(s.theta_star)));
  }
  p.t = shape.size();
  p.t_eff = shape.distinct_arms();
  p.h_star = fisher_info(shape, s.theta_star).matrix;
  p.log_term = std::sqrt(std::log(2.0 * (2.0 + static_cast<double>(p.t_eff)) / delta));
  p.width_true = kWidthConstTrue * std::sqrt(SymPinv(p.h_star).quad(s.direction)) * p.log_term;
  ConfidenceParams cp{delta, p.t_eff, s.theta_star.size()};
  rep.t = p.t;
  rep.reps = reps;
  rep.delta = delta;
  rep.xi_sq = xi_sq(s.arms, p.h_star);
  rep.gamma = gamma_d(cp);
  rep.burnin_satisfied = rep.xi_sq <= 1.0 / rep.gamma;
  return p;
}

struct ReplicateOutcome {
  bool fail_true = true, fail_emp = true, var_ok = false, separated = false;
};

ReplicateOutcome replicate(const CoverageSetup& s, const Prepared& p, std::uint64_t seed, std::int64_t r) {
  KeyedRng rng(derive_seed(seed, static_cast<std::uint64_t>(r)), 1);
  LogisticDataset data(s.theta_star.size());
  std::uint64_t counter = 0;
  for (std::size_t i = 0; i < s.arms.size(); ++i) {
    std::int64_t ones = 0;
    for (std::int64_t j = 0; j < s.counts[i]; ++j)
      ones += rng.uniform(counter + static_cast<std::uint64_t>(j)) < p.probs[i] ? 1 : 0;
    counter += static_cast<std::uint64_t>(s.counts[i]);
    data.add_counts(s.arms[i], s.counts[i], ones);
  }
  ReplicateOutcome out;
  const MleEstimate est = fit_mle(data);
  if (est.separation_detected || !est.converged) {
    out.separated = true;
    return out;
  }
  const Vec& th = est.theta.coords;
  const double err = std::abs(s.direction.dot(th - s.theta_star));
  const Mat h_hat = fisher_info(data, th).matrix;
  const double width_emp = kWidthConstEmpirical * std::sqrt(SymPinv(h_hat).quad(s.direction)) * p.log_term;
  out.fail_true = err > p.width_true;
  out.fail_emp = err > width_emp;
  out.var_ok = variance_event(h_hat, p.h_star);
  return out;
}

}  // namespace

CoverageReport coverage_monte_carlo(const CoverageSetup& setup, double delta, std::int64_t reps,
                                    std::uint64_t seed) {
  CoverageReport rep;
  const Prepared p = prepare(setup, delta, reps, rep);
  std::int64_t ft = 0, fe = 0, vo = 0, sep = 0;
#pragma omp parallel for schedule(dynamic, 16) reduction(+ : ft, fe, vo, sep)
  for (std::int64_t r = 0; r < reps; ++r) {
    const ReplicateOutcome o = replicate(setup, p, seed, r);
    ft += o.fail_true;
    fe += o.fail_emp;
    vo += o.var_ok;
    sep += o.separated;
  }
  const double n = static_cast<double>(reps);
  rep.failure_rate_true = static_cast<double>(ft) / n;
  rep.failure_rate_empirical = static_cast<double>(fe) / n;
  rep.var_event_rate = static_cast<double>(vo) / n;
  rep.separations = sep;
  return rep;
}

CoverageReport coverage_monte_carlo_serial(const CoverageSetup& setup, double delta,
                                           std::int64_t reps, std::uint64_t seed) {
  CoverageReport rep;
  const Prepared p = prepare(setup, delta, reps, rep);
  std::int64_t ft = 0, fe = 0, vo = 0, sep = 0;
  for (std::int64_t r = 0; r < reps; ++r) {
    const ReplicateOutcome o = replicate(setup, p, seed, r);
    ft += o.fail_true;
    fe += o.fail_emp;
    vo += o.var_ok;
    sep += o.separated;
  }
  const double n = static_cast<double>(reps);
  rep.failure_rate_true = static_cast<double>(ft) / n;
  rep.failure_rate_empirical = static_cast<double>(fe) / n;
  rep.var_event_rate = static_cast<double>(vo) / n;
  rep.separations = sep;
  return rep;
}

}  // namespace logband
