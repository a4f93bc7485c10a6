#include "logband/logistic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "logband/error.hpp"
#include "logband/kernels.hpp"
#include "logband/linalg.hpp"

namespace logband {

double link_mu(double z) {
  if (std::isnan(z)) fail(ErrorCode::NonFiniteInput, "link_mu(NaN)");
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double link_mu_dot(double z) {
  if (std::isnan(z)) fail(ErrorCode::NonFiniteInput, "link_mu_dot(NaN)");
  const double e = std::exp(-std::abs(z));
  const double s = 1.0 + e;
  return e / (s * s);
}

double link_mu_ddot(double z) { return link_mu_dot(z) * (1.0 - 2.0 * link_mu(z)); }

double softplus(double z) {
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

double kappa_min(const Vec& theta, const ArmList& arms, KappaMode mode) {
  if (mode == KappaMode::UnitBall) return link_mu_dot(theta.norm());
  if (arms.empty()) fail(ErrorCode::InvalidInstance, "kappa_min over empty arm set");
  double k = 1.0;
  for (const auto& x : arms) k = std::min(k, link_mu_dot(x.dot(theta)));
  return k;
}

double alpha_slope_scalar(double a, double b) {
  const double diff = a - b;
  if (std::abs(diff) < 1e-10) return link_mu_dot(b);
  // mu(a) - mu(b) = sinh((a-b)/2) / (2 cosh(a/2) cosh(b/2)), free of cancellation
  if (std::abs(a) < 600.0 && std::abs(b) < 600.0) {
    const double num = std::sinh(0.5 * diff);
    return num / (2.0 * std::cosh(0.5 * a) * std::cosh(0.5 * b)) / diff;
  }
  return (link_mu(a) - link_mu(b)) / diff;
}

double alpha_slope(const Vec& x, const Vec& theta1, const Vec& theta2) {
  return alpha_slope_scalar(x.dot(theta1), x.dot(theta2));
}

namespace {

struct GaussLegendre {
  static constexpr int n = 24;
  std::array<double, n> nodes{}, weights{};
  GaussLegendre() {
    for (int i = 0; i < n; ++i) {
      double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
          const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-16) break;
      }
      // map [-1, 1] to [0, 1]
      nodes[i] = 0.5 * (1.0 - x);
      weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
  }
};

const GaussLegendre& gauss_legendre() {
  static const GaussLegendre gl;
  return gl;
}

}  // namespace

double beta_weight(double a, double b) {
  if (std::isnan(a) || std::isnan(b)) fail(ErrorCode::NonFiniteInput, "beta_weight(NaN)");
  const double diff = b - a;
  if (std::abs(diff) < 1e-6) return 0.5 * link_mu_dot(a) + diff * link_mu_ddot(a) / 6.0;
  if (std::abs(diff) < 0.5) {
    const auto& gl = gauss_legendre();
    double s = 0.0;
    for (int i = 0; i < GaussLegendre::n; ++i)
      s += gl.weights[i] * (1.0 - gl.nodes[i]) * link_mu_dot(a + gl.nodes[i] * diff);
    return s;
  }
  return (softplus(b) - softplus(a)) / (diff * diff) - link_mu(a) / diff;
}

double kl_logistic(double a, double b) {
  const double kl = link_mu(a) * (a - b) - softplus(a) + softplus(b);
  return std::max(0.0, kl);
}

void LogisticDataset::add(const Vec& arm, int label, int source) {
  add_counts(arm, 1, label != 0 ? 1 : 0, source);
}

void LogisticDataset::add_counts(const Vec& arm, std::int64_t trials, std::int64_t ones, int source) {
  if (dim_ == 0 && groups_.empty()) dim_ = arm.size();
  if (arm.size() != dim_) fail(ErrorCode::InvalidInstance, "sample dimension mismatch");
  if (trials < 0 || ones < 0 || ones > trials) fail(ErrorCode::InvalidInstance, "bad sample counts");
  if (trials == 0) return;
  groups_.push_back({arm, trials, ones, source});
  total_ += trials;
}

void LogisticDataset::append(const LogisticDataset& other) {
  for (const auto& g : other.groups_) add_counts(g.arm, g.trials, g.ones, g.source);
}

namespace {

bool lex_less(const Vec& a, const Vec& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a(i) < b(i)) return true;
    if (b(i) < a(i)) return false;
  }
  return false;
}

}  // namespace

std::size_t LogisticDataset::distinct_arms() const {
  std::vector<const Vec*> ptrs;
  ptrs.reserve(groups_.size());
  for (const auto& g : groups_) ptrs.push_back(&g.arm);
  std::sort(ptrs.begin(), ptrs.end(), [](const Vec* a, const Vec* b) { return lex_less(*a, *b); });
  std::size_t n = 0;
  for (std::size_t i = 0; i < ptrs.size(); ++i)
    if (i == 0 || lex_less(*ptrs[i - 1], *ptrs[i])) ++n;
  return n;
}

LogisticDataset LogisticDataset::compacted() const {
  std::vector<std::size_t> order(groups_.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return lex_less(groups_[a].arm, groups_[b].arm);
  });
  // first-appearance order of each distinct arm
  std::vector<std::size_t> head(groups_.size());
  std::vector<SampleGroup> merged(groups_.size());
  std::vector<bool> is_head(groups_.size(), false);
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::size_t i = order[k];
    if (k > 0 && !lex_less(groups_[order[k - 1]].arm, groups_[i].arm)) {
      head[i] = head[order[k - 1]];
    } else {
      head[i] = i;
      is_head[i] = true;
      merged[i] = groups_[i];
      merged[i].trials = 0;
      merged[i].ones = 0;
    }
    merged[head[i]].trials += groups_[i].trials;
    merged[head[i]].ones += groups_[i].ones;
  }
  LogisticDataset out(dim_);
  for (std::size_t i = 0; i < groups_.size(); ++i)
    if (is_head[i]) out.add_counts(merged[i].arm, merged[i].trials, merged[i].ones, merged[i].source);
  return out;
}

FisherMatrix fisher_info(const LogisticDataset& data, const Vec& theta) {
  if (data.empty()) fail(ErrorCode::InvalidInstance, "fisher_info on empty dataset");
  if (theta.size() != data.dim()) fail(ErrorCode::InvalidInstance, "theta dimension mismatch");
  FisherMatrix out;
  out.matrix = kernels::fisher_accumulate(data.groups(), theta, data.dim());
  out.at_theta = theta;
  out.sample_count = data.size();
  out.t_eff = data.distinct_arms();
  return out;
}

double log_likelihood(const LogisticDataset& data, const Vec& theta, double ridge) {
  double ll = 0.0;
  for (const auto& g : data.groups()) {
    const double z = g.arm.dot(theta);
    ll += static_cast<double>(g.ones) * z - static_cast<double>(g.trials) * softplus(z);
  }
  return ll - 0.5 * ridge * theta.squaredNorm();
}

namespace {

constexpr double kSaturation = 15.0;

// A label-pure run whose fitted probability is saturated toward its label marks
// a divergent direction; the gradient can look converged there.
bool saturated_pure_run(const LogisticDataset& data, const Vec& theta) {
  for (const auto& g : data.groups()) {
    const double z = g.arm.dot(theta);
    if (g.ones == g.trials && z > kSaturation) return true;
    if (g.ones == 0 && z < -kSaturation) return true;
  }
  return false;
}

}  // namespace

MleEstimate fit_mle(const LogisticDataset& data, const MleOptions& opts) {
  const Eigen::Index d = data.dim();
  MleEstimate est;
  Vec theta = Vec::Zero(d);
  if (opts.start && opts.start->size() == d && opts.start->allFinite()) theta = *opts.start;
  const double scale = std::max<double>(1.0, static_cast<double>(data.size()));

  auto evaluate = [&](const Vec& th) {
    auto p = kernels::likelihood_parts(data.groups(), th, d);
    if (opts.ridge > 0.0) {
      p.loglik -= 0.5 * opts.ridge * th.squaredNorm();
      p.grad -= opts.ridge * th;
      p.neg_hess.diagonal().array() += opts.ridge;
    }
    return p;
  };

  auto parts = evaluate(theta);
  if (!std::isfinite(parts.loglik)) fail(ErrorCode::NonFiniteLikelihood, "log-likelihood at the start point");
  if (opts.record_trace) est.loglik_trace.push_back(parts.loglik);

  int it = 0;
  for (; it < opts.max_iters; ++it) {
    const double gnorm = d > 0 ? parts.grad.cwiseAbs().maxCoeff() / scale : 0.0;
    est.final_gradient_norm = gnorm;
    if (gnorm <= opts.tol && !saturated_pure_run(data, theta)) {
      est.converged = true;
      break;
    }
    if (theta.norm() > opts.guard) break;
    const Vec step = SymPinv(parts.neg_hess).solve(parts.grad);
    double s = 1.0;
    bool accepted = false;
    // below rounding level the likelihood cannot resolve progress; the full
    // step is then accepted when it does not lose likelihood beyond rounding
    const double slack = 1e-13 * (1.0 + std::abs(parts.loglik));
    for (int h = 0; h < 60; ++h, s *= 0.5) {
      const Vec cand = theta + s * step;
      const double ll = log_likelihood(data, cand, opts.ridge);
      if (std::isnan(ll)) fail(ErrorCode::NonFiniteLikelihood, "log-likelihood is NaN");
      if (ll > parts.loglik || (h == 0 && ll >= parts.loglik - slack && step.norm() < 1e-6 * (1.0 + theta.norm()))) {
        theta = cand;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    parts = evaluate(theta);
    if (!std::isfinite(parts.loglik)) fail(ErrorCode::NonFiniteLikelihood, "log-likelihood diverged");
    if (opts.record_trace) est.loglik_trace.push_back(parts.loglik);
  }
  if (!est.converged) {
    est.final_gradient_norm = d > 0 ? parts.grad.cwiseAbs().maxCoeff() / scale : 0.0;
    if (est.final_gradient_norm <= opts.tol && !saturated_pure_run(data, theta)) est.converged = true;
  }
  est.iterations = it;
  est.loglik = parts.loglik;
  est.separation_detected = !est.converged && (theta.norm() > opts.guard || saturated_pure_run(data, theta));
  est.theta = Theta(theta);
  return est;
}

double projected_eta(Eigen::Index d, double delta, double s_star) {
  return (static_cast<double>(d) + std::log(1.0 / delta)) / (s_star + 0.5);
}

Vec projection_map(const LogisticDataset& data, const Vec& theta, double eta) {
  Vec g = eta * theta;
  for (const auto& grp : data.groups())
    g += static_cast<double>(grp.trials) * link_mu(grp.arm.dot(theta)) * grp.arm;
  return g;
}

namespace {

Mat regularized_fisher(const LogisticDataset& data, const Vec& theta, double eta) {
  Mat h = kernels::fisher_accumulate(data.groups(), theta, data.dim());
  h.diagonal().array() += eta;
  return h;
}

}  // namespace

double projection_objective(const LogisticDataset& data, const Vec& theta, const Vec& target,
                            double eta) {
  const Vec r = projection_map(data, theta, eta) - target;
  const Mat h = regularized_fisher(data, theta, eta);
  return r.dot(h.llt().solve(r));
}

ProjectedEstimate fit_projected_mle(const LogisticDataset& data, double s_star, double eta,
                                    double tol, int max_iters) {
  if (!(s_star > 0.0) || !(eta > 0.0)) fail(ErrorCode::InvalidConfig, "projected MLE needs S* > 0, eta > 0");
  MleOptions mo;
  mo.ridge = eta;
  mo.max_iters = 200;
  const MleEstimate ridge = fit_mle(data, mo);
  ProjectedEstimate out;
  out.ridge_theta = ridge.theta.coords;
  if (ridge.theta.coords.norm() <= s_star) {
    out.theta = Theta(ridge.theta.coords, s_star);
    out.converged = true;
    return out;
  }
  const Vec target = projection_map(data, out.ridge_theta, eta);
  auto project = [&](const Vec& v) -> Vec {
    const double n = v.norm();
    return n > s_star ? Vec(v * (s_star / n)) : v;
  };
  auto value_and_grad = [&](const Vec& th, Vec* grad) {
    const Vec r = projection_map(data, th, eta) - target;
    const Mat h = regularized_fisher(data, th, eta);
    const Vec p = h.llt().solve(r);
    if (grad) {
      Vec g = 2.0 * r;
      for (const auto& grp : data.groups()) {
        const double xp = grp.arm.dot(p);
        g -= static_cast<double>(grp.trials) * link_mu_ddot(grp.arm.dot(th)) * xp * xp * grp.arm;
      }
      *grad = g;
    }
    return r.dot(p);
  };

  Vec theta = project(out.ridge_theta);
  Vec grad;
  double val = value_and_grad(theta, &grad);
  double step = 1.0 / std::max(1.0, static_cast<double>(data.size()));
  int it = 0;
  for (; it < max_iters; ++it) {
    bool moved = false;
    Vec cand;
    double cval = val;
    for (int h = 0; h < 80; ++h) {
      cand = project(theta - step * grad);
      const Vec diff = cand - theta;
      cval = value_and_grad(cand, nullptr);
      if (cval <= val + grad.dot(diff) + diff.squaredNorm() / (2.0 * step)) {
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
    const double change = (cand - theta).norm();
    theta = cand;
    val = value_and_grad(theta, &grad);
    step *= 2.0;
    if (change <= tol * std::max(1.0, theta.norm())) {
      out.converged = true;
      break;
    }
  }
  out.iterations = it;
  out.objective = val;
  out.theta = Theta(theta, s_star);
  return out;
}

}  // namespace logband
