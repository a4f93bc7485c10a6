#include "logband/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "json.hpp"
#include "logband/error.hpp"
#include "logband/linalg.hpp"
#include "logband/logistic.hpp"
#include "logband/rng.hpp"

namespace logband {

namespace {

std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

// min over alternates of sum_x lambda_x KL(theta*, theta_z) with warm starts in `thetas`
struct AltEval {
  double c = std::numeric_limits<double>::infinity();
  std::size_t arg = 0;
  std::vector<double> per;
  bool converged = true;
};

AltEval eval_alternates(const TransductiveInstance& inst, const std::vector<std::size_t>& alts, const Design& design,
                        std::vector<Vec>& thetas, const ProjectionOptions& popts) {
  const std::size_t star = inst.best_index();
  const Vec& ts = inst.theta_star;
  AltEval out;
  out.per.resize(alts.size());
  const Mat gram = design_gram(design);
  const SymPinv span(gram);
  for (std::size_t j = 0; j < alts.size(); ++j) {
    const Vec v = inst.z_arms[star] - inst.z_arms[alts[j]];
    double c = 0.0;
    // an unobserved direction admits a zero-cost alternative
    if (span.in_range(v)) {
      ProjectionOptions o = popts;
      o.start = thetas[j];
      AltProjection p = project_alternative(design, ts, inst.z_arms[star], inst.z_arms[alts[j]], o);
      if (!p.converged) {
        out.converged = false;
        p.theta_z = gaussian_projection(design, ts, inst.z_arms[star], inst.z_arms[alts[j]]);
      }
      thetas[j] = p.theta_z;
      for (std::size_t i = 0; i < design.arms.size(); ++i) {
        const double w = design.weights(static_cast<Eigen::Index>(i));
        if (w > 0.0) c += w * kl_logistic(design.arms[i].dot(ts), design.arms[i].dot(p.theta_z));
      }
    }
    out.per[j] = c;
    if (c < out.c) {
      out.c = c;
      out.arg = j;
    }
  }
  return out;
}

std::vector<std::size_t> pick_alternates(const TransductiveInstance& inst, const LowerBoundOptions& opts) {
  const std::size_t star = inst.best_index();
  std::vector<std::size_t> alts;
  for (std::size_t i = 0; i < inst.z_arms.size(); ++i)
    if (i != star) alts.push_back(i);
  if (!opts.exhaustive && inst.z_arms.size() > 1000 && alts.size() > opts.max_alternates) {
    const double top = inst.z_arms[star].dot(inst.theta_star);
    std::stable_sort(alts.begin(), alts.end(), [&](std::size_t a, std::size_t b) {
      return top - inst.z_arms[a].dot(inst.theta_star) < top - inst.z_arms[b].dot(inst.theta_star);
    });
    alts.resize(opts.max_alternates);
    std::sort(alts.begin(), alts.end());
  }
  return alts;
}

}  // namespace

HardInstance build_hard_instance(Eigen::Index d, double epsilon, const HardInstanceOptions& opts) {
  if (d < 4) fail(ErrorCode::InvalidConfig, "hard instance needs d >= 4");
  if (!(epsilon > 0.0 && epsilon <= 0.5)) fail(ErrorCode::InvalidConfig, "hard instance needs eps in (0, 1/2]");
  if (opts.n_cap < 1) fail(ErrorCode::InvalidConfig, "n_cap must be positive");
  HardInstance h;
  h.epsilon = epsilon;
  const double full = std::floor(std::exp(epsilon * epsilon * static_cast<double>(d) / 4.0));
  h.n_target = static_cast<std::size_t>(std::min(static_cast<double>(opts.n_cap), std::max(1.0, full)));
  h.delta2 = opts.delta2 ? *opts.delta2 : 1.0 / (2.0 * static_cast<double>(h.n_target));
  if (!(h.delta2 > 0.0 && h.delta2 < 0.5)) fail(ErrorCode::InvalidConfig, "delta2 must lie in (0, 1/2)");
  h.u_angle = std::atan(std::sqrt(2.0 / (1.0 + epsilon)));
  h.s_norm = (3.0 + epsilon) / (1.0 - epsilon) * std::log((1.0 - h.delta2) / h.delta2);

  RngStream rng(opts.packing_seed, 0x7061636bULL);
  ArmList pack;
  while (pack.size() < h.n_target) {
    bool placed = false;
    for (std::int64_t tries = 0; tries < opts.retry_budget; ++tries) {
      const Vec a = rng.unit_sphere(d - 1);
      bool ok = true;
      for (const auto& b : pack)
        if (std::abs(a.dot(b)) > epsilon) {
          ok = false;
          break;
        }
      if (ok) {
        pack.push_back(a);
        placed = true;
        break;
      }
      ++h.rejections;
    }
    if (!placed)
      fail(ErrorCode::PackingFailed,
           "packing stopped at n = " + std::to_string(pack.size()) + " of " + std::to_string(h.n_target));
  }
  const double cu = std::cos(h.u_angle), su = std::sin(h.u_angle);
  for (const auto& a : pack) {
    Vec z(d), th(d);
    z(0) = cu;
    z.tail(d - 1) = su * a;
    th(0) = -cu;
    th.tail(d - 1) = su * a;
    h.z_arms.push_back(z);
    h.thetas.push_back(h.s_norm * th);
  }
  return h;
}

FloorReport moderate_confidence_floor(const HardInstance& inst) {
  FloorReport f;
  f.n = inst.z_arms.size();
  f.floor = static_cast<double>(f.n) / 16.0;
  double kmin = std::numeric_limits<double>::infinity();
  for (const auto& z : inst.z_arms)
    for (const auto& th : inst.thetas) kmin = std::min(kmin, link_mu_dot(z.dot(th)));
  f.inv_kappa0 = 1.0 / kmin;
  const double e = inst.epsilon;
  f.inv_kappa0_bound = 2.0 * (1.0 + std::pow((1.0 - inst.delta2) / inst.delta2, (1.0 + 3.0 * e) / (1.0 - e)));
  f.kappa_relation_holds = f.inv_kappa0 <= f.inv_kappa0_bound * (1.0 + 1e-12);
  return f;
}

double kl_bernoulli_logistic(const Vec& x, const Vec& theta1, const Vec& theta2) {
  return kl_logistic(x.dot(theta1), x.dot(theta2));
}

WeightedMatrices weighted_matrices(const Design& design, const Vec& theta1, const Vec& theta2) {
  const Eigen::Index d = theta1.size();
  WeightedMatrices m{Mat::Zero(d, d), Mat::Zero(d, d)};
  for (std::size_t i = 0; i < design.arms.size(); ++i) {
    const double w = design.weights(static_cast<Eigen::Index>(i));
    if (w == 0.0) continue;
    const Vec& x = design.arms[i];
    const double a = x.dot(theta1), b = x.dot(theta2);
    const Mat xx = x * x.transpose();
    m.g += w * alpha_slope_scalar(a, b) * xx;
    m.k += w * beta_weight(a, b) * xx;
  }
  return m;
}

AltProjection project_alternative(const Design& design, const Vec& theta_star, const Vec& z_star, const Vec& z,
                                  const ProjectionOptions& opts) {
  const Vec v = z_star - z;
  if (v.norm() == 0.0) fail(ErrorCode::InvalidConfig, "alternative must differ from z*");
  const double gap = v.dot(theta_star);
  AltProjection out;
  Vec theta = opts.start && opts.start->size() == theta_star.size() ? *opts.start : theta_star;
  for (int it = 0; it < opts.max_iters; ++it) {
    const SymPinv g(weighted_matrices(design, theta, theta_star).g);
    if (!g.in_range(v)) fail(ErrorCode::NoSpanningSupport, "design does not observe z* - z");
    const Vec gv = g.solve(v);
    const Vec rhs = theta_star - (gap / v.dot(gv)) * gv;
    out.fixed_point_residual = (rhs - theta).norm();
    out.iterations = it + 1;
    if (out.fixed_point_residual <= opts.tol && std::abs(theta.dot(v)) <= 1e-6) {
      out.converged = true;
      break;
    }
    theta = (1.0 - opts.rho) * theta + opts.rho * rhs;
  }
  out.theta_z = theta;
  return out;
}

Vec gaussian_projection(const Design& design, const Vec& theta_star, const Vec& z_star, const Vec& z) {
  const Vec v = z_star - z;
  const SymPinv h(design_fisher(design, theta_star));
  if (!h.in_range(v)) fail(ErrorCode::NoSpanningSupport, "design does not observe z* - z");
  const Vec hv = h.solve(v);
  return theta_star - (v.dot(theta_star) / v.dot(hv)) * hv;
}

double transportation_c(const TransductiveInstance& inst, const Design& design, const ProjectionOptions& opts) {
  inst.validate();
  LowerBoundOptions lo;
  lo.exhaustive = true;
  const auto alts = pick_alternates(inst, lo);
  if (alts.empty()) return std::numeric_limits<double>::infinity();
  std::vector<Vec> thetas(alts.size(), inst.theta_star);
  return eval_alternates(inst, alts, design, thetas, opts).c;
}

LowerBoundReport transportation_lower_bound(const TransductiveInstance& inst, double delta,
                                            const LowerBoundOptions& opts) {
  inst.validate();
  if (!(delta > 0.0 && delta < 1.0 / 2.4)) fail(ErrorCode::InvalidConfig, "delta must lie in (0, 1/2.4)");
  LowerBoundReport r;
  r.delta = delta;
  r.log_term = std::log(1.0 / (2.4 * delta));
  r.instance_hash = instance_hash(inst);
  r.alternates = pick_alternates(inst, opts);
  const auto m = static_cast<Eigen::Index>(inst.x_arms.size());
  Design design{inst.x_arms, Vec::Constant(m, 1.0 / static_cast<double>(m))};
  if (r.alternates.empty()) {
    r.design = design;
    r.c_value = std::numeric_limits<double>::infinity();
    return r;
  }
  std::vector<Vec> thetas(r.alternates.size(), inst.theta_star);
  AltEval cur = eval_alternates(inst, r.alternates, design, thetas, opts.projection);
  r.all_converged = cur.converged;

  for (int it = 0; it < opts.outer_iters; ++it) {
    r.iterations = it + 1;
    // supergradient of the concave min: per-arm KL of the binding alternate
    const Vec& th = thetas[cur.arg];
    Eigen::Index best = 0;
    double top = -1.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      const Vec& x = inst.x_arms[static_cast<std::size_t>(i)];
      const double k = kl_logistic(x.dot(inst.theta_star), x.dot(th));
      if (k > top) {
        top = k;
        best = i;
      }
    }
    const Vec dir = Vec::Unit(m, best) - design.weights;
    // golden section on the concave segment
    auto at = [&](double g, std::vector<Vec>& warm) {
      Design cand{inst.x_arms, design.weights + g * dir};
      return eval_alternates(inst, r.alternates, cand, warm, opts.projection);
    };
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double lo = 0.0, hi = 1.0;
    std::vector<Vec> warm = thetas;
    double g1 = hi - phi * (hi - lo), g2 = lo + phi * (hi - lo);
    double f1 = at(g1, warm).c, f2 = at(g2, warm).c;
    for (int k = 0; k < 40; ++k) {
      if (f1 < f2) {
        lo = g1;
        g1 = g2;
        f1 = f2;
        g2 = lo + phi * (hi - lo);
        f2 = at(g2, warm).c;
      } else {
        hi = g2;
        g2 = g1;
        f2 = f1;
        g1 = hi - phi * (hi - lo);
        f1 = at(g1, warm).c;
      }
    }
    const double g = 0.5 * (lo + hi);
    std::vector<Vec> next_thetas = thetas;
    AltEval next = at(g, next_thetas);
    if (!(next.c > cur.c)) break;
    const double change = (next.c - cur.c) / cur.c;
    design.weights += g * dir;
    thetas = std::move(next_thetas);
    cur = std::move(next);
    r.all_converged = r.all_converged && cur.converged;
    if (change < opts.rel_change) break;
  }
  r.design = design;
  r.c_value = cur.c;
  r.value = r.log_term / cur.c;
  // report the identity form |theta* - theta_z|^2_K per alternate
  r.per_alternate.resize(r.alternates.size());
  for (std::size_t j = 0; j < r.alternates.size(); ++j) {
    const Vec diff = inst.theta_star - thetas[j];
    r.per_alternate[j] = diff.dot(weighted_matrices(design, inst.theta_star, thetas[j]).k * diff);
  }
  return r;
}

std::string lower_bound_to_json(const LowerBoundReport& r) {
  nlohmann::ordered_json j;
  j["instance_hash"] = r.instance_hash;
  j["delta"] = r.delta;
  j["value"] = r.value;
  j["c"] = r.c_value;
  j["log_term"] = r.log_term;
  std::vector<std::size_t> support;
  std::vector<double> weights;
  for (Eigen::Index i = 0; i < r.design.weights.size(); ++i)
    if (r.design.weights(i) > 1e-9) {
      support.push_back(static_cast<std::size_t>(i));
      weights.push_back(r.design.weights(i));
    }
  j["design_support"] = support;
  j["design_weights"] = weights;
  j["alternates"] = r.alternates;
  j["per_alternate_c"] = r.per_alternate;
  j["all_converged"] = r.all_converged;
  j["iterations"] = r.iterations;
  j["estimate_note"] = "numeric max-min estimate, not a certified bound";
  return j.dump(2);
}

std::string hard_instance_to_json(const HardInstance& h, const FloorReport& f) {
  nlohmann::ordered_json j;
  j["d"] = h.z_arms.empty() ? 0 : h.z_arms.front().size();
  j["epsilon"] = h.epsilon;
  j["n"] = f.n;
  j["n_target"] = h.n_target;
  j["delta2"] = h.delta2;
  j["s_norm"] = h.s_norm;
  j["u_angle"] = h.u_angle;
  j["rejections"] = h.rejections;
  j["floor"] = f.floor;
  j["inv_kappa0"] = f.inv_kappa0;
  j["inv_kappa0_bound"] = f.inv_kappa0_bound;
  j["kappa_relation_holds"] = f.kappa_relation_holds;
  j["capped_note"] = "n is capped; the full family size e^{eps^2 d/4} is not constructed";
  nlohmann::ordered_json z = nlohmann::ordered_json::array();
  for (const auto& v : h.z_arms) z.push_back(to_std(v));
  j["z_arms"] = std::move(z);
  return j.dump(2);
}

}  // namespace logband
