#include "logband/design.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include "json.hpp"
#include <sstream>

#include "logband/error.hpp"
#include "logband/linalg.hpp"
#include "logband/logistic.hpp"

namespace logband {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_design(const Design& d) {
  if (d.arms.empty()) fail(ErrorCode::InvalidInstance, "design has no arms");
  if (static_cast<Eigen::Index>(d.arms.size()) != d.weights.size())
    fail(ErrorCode::InvalidInstance, "design arms/weights size mismatch");
  if ((d.weights.array() < 0.0).any()) fail(ErrorCode::InvalidInstance, "negative design weight");
  if (std::abs(d.weights.sum() - 1.0) > 1e-9) fail(ErrorCode::InvalidInstance, "design weights must sum to 1");
}

Mat weighted_gram(const ArmList& arms, const Vec& w) {
  const Eigen::Index dim = arms.front().size();
  Mat m = Mat::Zero(dim, dim);
  for (std::size_t i = 0; i < arms.size(); ++i) {
    const double wi = w(static_cast<Eigen::Index>(i));
    if (wi != 0.0) m.selfadjointView<Eigen::Lower>().rankUpdate(arms[i], wi);
  }
  return m.selfadjointView<Eigen::Lower>();
}

Vec arm_factors(const ArmList& arms, const std::optional<Vec>& theta) {
  Vec c = Vec::Ones(static_cast<Eigen::Index>(arms.size()));
  if (theta)
    for (std::size_t i = 0; i < arms.size(); ++i) c(static_cast<Eigen::Index>(i)) = link_mu_dot(arms[i].dot(*theta));
  return c;
}

struct Terms {
  ArmList dirs;
  std::vector<double> scale;
};

void add_terms(const ArmList& arms, const DesignObjective& obj, Terms& t) {
  auto push = [&](Vec v) {
    if (v.norm() == 0.0) return;
    t.dirs.push_back(std::move(v));
    t.scale.push_back(obj.scale);
  };
  switch (obj.kind) {
    case ObjectiveKind::GOptimal:
      for (const auto& x : arms) push(x);
      break;
    case ObjectiveKind::MaxDirectionH:
      for (const auto& v : obj.directions) push(v);
      break;
    case ObjectiveKind::MaxPairH:
      for (std::size_t i = 0; i < obj.directions.size(); ++i)
        for (std::size_t j = i + 1; j < obj.directions.size(); ++j) push(obj.directions[i] - obj.directions[j]);
      break;
  }
}

// Parallel directions give proportional terms; keep the dominant one.
void merge_parallel(Terms& t) {
  const std::size_t n = t.dirs.size();
  std::vector<Vec> unit(n);
  for (std::size_t i = 0; i < n; ++i) {
    Vec u = t.dirs[i] / t.dirs[i].norm();
    Eigen::Index lead = 0;
    u.cwiseAbs().maxCoeff(&lead);
    if (u(lead) < 0.0) u = -u;
    unit[i] = std::move(u);
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const Vec &x = unit[a], &y = unit[b];
    for (Eigen::Index k = 0; k < x.size(); ++k)
      if (x(k) != y(k)) return x(k) < y(k);
    return a < b;
  });
  Terms out;
  for (std::size_t idx = 0; idx < n; ++idx) {
    const std::size_t i = order[idx];
    // value of term i is scale_i |dir_i|^2 u^T M^-1 u
    const double w = t.scale[i] * t.dirs[i].squaredNorm();
    if (!out.dirs.empty() && (unit[i] - out.dirs.back()).norm() <= 1e-12) {
      out.scale.back() = std::max(out.scale.back(), w);
      continue;
    }
    out.dirs.push_back(unit[i]);
    out.scale.push_back(w);
  }
  t = std::move(out);
}

// All objectives must induce the same matrix map lambda -> sum lambda_x c_x x x^T.
std::optional<Vec> common_theta(const std::vector<DesignObjective>& objs) {
  if (objs.empty()) fail(ErrorCode::InvalidConfig, "no design objective");
  const bool g = objs.front().kind == ObjectiveKind::GOptimal;
  std::optional<Vec> theta;
  for (const auto& o : objs) {
    if ((o.kind == ObjectiveKind::GOptimal) != g)
      fail(ErrorCode::InvalidConfig, "cannot combine G-optimal and H-weighted objectives");
    if (o.scale < 0.0 || !std::isfinite(o.scale)) fail(ErrorCode::InvalidConfig, "objective scale");
    if (g) continue;
    if (!o.theta) fail(ErrorCode::InvalidConfig, "H-weighted objective needs theta");
    if (!theta) theta = *o.theta;
    else if (theta->size() != o.theta->size() || (*theta - *o.theta).norm() != 0.0)
      fail(ErrorCode::InvalidConfig, "combined objectives use different theta");
  }
  return theta;
}

double eval_terms(const Mat& m, const Terms& t) {
  SymPinv pinv(m);
  double v = 0.0;
  for (std::size_t j = 0; j < t.dirs.size(); ++j) {
    if (!pinv.in_range(t.dirs[j])) return kInf;
    v = std::max(v, t.scale[j] * pinv.quad(t.dirs[j]));
  }
  return v;
}

Mat inverse_spd(const Mat& h) {
  Eigen::LLT<Mat> llt(h);
  if (llt.info() == Eigen::Success) return llt.solve(Mat::Identity(h.rows(), h.cols()));
  return SymPinv(h).matrix();
}

struct Reduced {
  Mat x;   // r x m
  Mat v;   // r x J
  Vec c;   // m
  Vec s;   // J
};

struct FwResult {
  Vec lambda;
  double lower_bound = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Frank-Wolfe on log det with away steps; by Kiefer-Wolfowitz its optimum is G-optimal
// and max_x q_x - r certifies the gap.
FwResult wolfe_goptimal(const Mat& x, const FwOptions& opts) {
  const Eigen::Index r = x.rows(), m = x.cols();
  const double rd = static_cast<double>(r);
  FwResult out;
  out.lower_bound = rd;
  Vec lam = Vec::Constant(m, 1.0 / static_cast<double>(m));
  int it = 0;
  for (; it < opts.max_iters; ++it) {
    const Mat a = x * lam.asDiagonal() * x.transpose();
    const Mat ainv = inverse_spd(a);
    const Vec q = (x.transpose() * ainv).cwiseProduct(x.transpose()).rowwise().sum();
    Eigen::Index i = 0;
    q.maxCoeff(&i);
    Eigen::Index j = -1;
    for (Eigen::Index k = 0; k < m; ++k)
      if (lam(k) > 0.0 && (j < 0 || q(k) < q(j))) j = k;
    if (q(i) <= rd * (1.0 + opts.rel_tol)) {
      out.converged = true;
      break;
    }
    if (!opts.line_search) {
      const double g = 2.0 / (it + 2.0);
      lam *= 1.0 - g;
      lam(i) += g;
      continue;
    }
    if (q(i) - rd >= rd - q(j) || lam(j) >= 1.0) {
      const double g = (q(i) - rd) / (rd * (q(i) - 1.0));
      lam *= 1.0 - g;
      lam(i) += g;
    } else {
      const double amax = lam(j) / (1.0 - lam(j));
      double g = q(j) > 1.0 ? (rd - q(j)) / (rd * (q(j) - 1.0)) : amax;
      g = std::min(g, amax);
      lam *= 1.0 + g;
      lam(j) -= g;
      if (g == amax) lam(j) = 0.0;
    }
  }
  out.lambda = lam;
  out.iterations = it;
  return out;
}

struct BarrierState {
  bool ok = false;
  Vec q;       // term values s_j v_j^T M^-1 v_j
  Mat u;       // m x J, x_a^T M^-1 v_j
  Mat k;       // m x m, x_a^T M^-1 x_b
};

BarrierState barrier_state(const Reduced& red, const Vec& lam, bool derivs) {
  BarrierState st;
  const Mat m = red.x * (lam.cwiseProduct(red.c)).asDiagonal() * red.x.transpose();
  Eigen::LLT<Mat> llt(m);
  if (llt.info() != Eigen::Success) return st;
  const Mat minv_v = llt.solve(red.v);
  st.q = red.s.cwiseProduct(red.v.cwiseProduct(minv_v).colwise().sum().transpose());
  if (!st.q.allFinite()) return st;
  if (derivs) {
    st.u = red.x.transpose() * minv_v;
    st.k = red.x.transpose() * llt.solve(red.x);
  }
  st.ok = true;
  return st;
}

// Log-barrier interior point on the epigraph form
//   min t  s.t.  s_j v_j^T M(lambda)^-1 v_j <= t,  lambda in the simplex,
// with M(lambda) = sum_a lambda_a c_a x_a x_a^T.
FwResult barrier_minimax(const Reduced& red, const FwOptions& opts) {
  const Eigen::Index m = red.x.cols(), nj = red.v.cols();
  FwResult out;
  Vec lam = Vec::Constant(m, 1.0 / static_cast<double>(m));
  BarrierState st = barrier_state(red, lam, false);
  if (!st.ok) fail(ErrorCode::NoSpanningSupport, "design matrix is singular on the arm span");
  // work with unit-scale term values
  const double f0 = st.q.maxCoeff();
  Reduced rs = red;
  rs.s /= f0;
  st.q /= f0;
  double t = 2.0 * st.q.maxCoeff();
  const double mc = static_cast<double>(nj + m);
  double tau = mc;
  int newton = 0;

  auto barrier = [&](const Vec& l, double tt, double tu, const Vec& q) {
    return tu * tt - (tt - q.array()).log().sum() - l.array().log().sum();
  };

  for (int outer = 0; outer < 60 && newton < opts.max_iters; ++outer) {
    for (int inner = 0; inner < 200 && newton < opts.max_iters; ++inner, ++newton) {
      st = barrier_state(rs, lam, true);
      const Vec r = (t - st.q.array()).inverse().matrix();
      const Vec r2 = r.cwiseProduct(r);
      // dq(a, j) = -s_j c_a u_aj^2
      const Mat p = red.c.asDiagonal() * st.u;
      const Mat dq = -(p.cwiseProduct(st.u)) * rs.s.asDiagonal();
      Vec g(m + 1);
      g(0) = tau - r.sum();
      g.tail(m) = dq * r - lam.cwiseInverse();
      // barrier Hessian over (t, lambda), lower triangle; it is positive definite
      Mat h = Mat::Zero(m + 1, m + 1);
      h(0, 0) = r2.sum();
      h.block(1, 0, m, 1) = -dq * r2;
      Mat pw = Mat::Zero(m, m);
      pw.selfadjointView<Eigen::Lower>().rankUpdate(p * (rs.s.cwiseProduct(r)).cwiseSqrt().asDiagonal(), 2.0);
      pw = pw.cwiseProduct(st.k);
      pw.selfadjointView<Eigen::Lower>().rankUpdate(dq * r.asDiagonal());
      pw.diagonal() += lam.cwiseProduct(lam).cwiseInverse();
      h.block(1, 1, m, m).triangularView<Eigen::Lower>() = pw;
      // equality sum(dlambda) = 0 through the Schur complement
      Eigen::LDLT<Mat, Eigen::Lower> fac(h);
      Vec a_row = Vec::Ones(m + 1);
      a_row(0) = 0.0;
      const Vec hg = fac.solve(-g);
      const Vec ha = fac.solve(a_row);
      const Vec step = hg - (a_row.dot(hg) / a_row.dot(ha)) * ha;
      const Vec dl = step.segment(1, m);
      const double dt = step(0);
      const double slope = g.dot(step.head(m + 1));
      if (!std::isfinite(slope) || -slope / 2.0 <= 1e-10) break;
      const double f_now = barrier(lam, t, tau, st.q);
      double a = 1.0;
      bool moved = false;
      for (int ls = 0; ls < 60; ++ls, a *= 0.5) {
        const Vec nl = lam + a * dl;
        const double nt = t + a * dt;
        if ((nl.array() <= 0.0).any()) continue;
        const BarrierState ns = barrier_state(rs, nl, false);
        if (!ns.ok || (nt - ns.q.array() <= 0.0).any()) continue;
        if (barrier(nl, nt, tau, ns.q) <= f_now + 0.25 * a * slope) {
          lam = nl / nl.sum();
          t = nt;
          moved = true;
          break;
        }
      }
      if (!moved) break;
    }
    // certificate valid at any iterate: with pi = r / sum(r), phi = sum_j pi_j q_j is convex and
    // homogeneous of degree -1, so min phi >= 2 phi(lambda) - max_a (-d phi / d lambda_a)
    st = barrier_state(rs, lam, true);
    const double f = st.q.maxCoeff();
    {
      const Vec r = (t - st.q.array()).inverse().matrix();
      const Vec pi = r / r.sum();
      const Vec slope = red.c.cwiseProduct(st.u.cwiseProduct(st.u) * rs.s.cwiseProduct(pi));
      out.lower_bound = std::max(out.lower_bound, 2.0 * pi.dot(st.q) - slope.maxCoeff());
    }
    if (f - out.lower_bound <= 0.5 * opts.rel_tol * f) {
      out.converged = true;
      break;
    }
    tau *= 8.0;
  }
  out.lambda = lam;
  out.lower_bound = std::max(0.0, out.lower_bound) * f0;
  out.iterations = newton;
  return out;
}

// Drops negligible weights when that costs at most `slack` relative objective.
Vec sparsify(const Vec& lam, double slack, const std::function<double(const Vec&)>& value_of) {
  const double base = value_of(lam);
  Vec best = lam;
  for (double cut : {1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7}) {
    Vec w = lam;
    const double thr = cut * lam.maxCoeff();
    for (Eigen::Index i = 0; i < w.size(); ++i)
      if (w(i) < thr) w(i) = 0.0;
    w /= w.sum();
    if (value_of(w) <= base * (1.0 + slack)) {
      best = w;
      break;
    }
  }
  return best;
}

bool all_parallel(const Vec& x, const Terms& t) {
  const double xn = x.norm();
  if (xn == 0.0) return false;
  for (const auto& v : t.dirs) {
    const double c = std::abs(x.dot(v)) / (xn * v.norm());
    if (c < 1.0 - 1e-12) return false;
  }
  return true;
}

}  // namespace

const char* objective_name(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::GOptimal: return "g_optimal";
    case ObjectiveKind::MaxDirectionH: return "max_direction_h";
    case ObjectiveKind::MaxPairH: return "max_pair_h";
  }
  return "unknown";
}

DesignObjective g_optimal(double scale) { return {ObjectiveKind::GOptimal, std::nullopt, {}, scale}; }

DesignObjective max_direction(const Vec& theta, ArmList dirs, double scale) {
  return {ObjectiveKind::MaxDirectionH, theta, std::move(dirs), scale};
}

DesignObjective max_pair(const Vec& theta, ArmList items, double scale) {
  return {ObjectiveKind::MaxPairH, theta, std::move(items), scale};
}

Mat design_gram(const Design& design) {
  check_design(design);
  return weighted_gram(design.arms, design.weights);
}

Mat design_fisher(const Design& design, const Vec& theta) {
  check_design(design);
  return weighted_gram(design.arms, design.weights.cwiseProduct(arm_factors(design.arms, theta)));
}

double eval_objective(const Design& design, const std::vector<DesignObjective>& objs) {
  check_design(design);
  const auto theta = common_theta(objs);
  Terms t;
  for (const auto& o : objs) add_terms(design.arms, o, t);
  if (t.dirs.empty()) return 0.0;
  const Mat m = weighted_gram(design.arms, design.weights.cwiseProduct(arm_factors(design.arms, theta)));
  return eval_terms(m, t);
}

double eval_objective(const Design& design, const DesignObjective& obj) {
  return eval_objective(design, std::vector<DesignObjective>{obj});
}

DesignSolution minimize_design(const ArmList& arms, const std::vector<DesignObjective>& objs,
                               const FwOptions& opts) {
  if (arms.empty()) fail(ErrorCode::InvalidInstance, "design over empty arm set");
  validate_arms(arms, arms.front().size(), true);
  const auto theta = common_theta(objs);
  Terms t;
  for (const auto& o : objs) add_terms(arms, o, t);
  if (objs.front().kind != ObjectiveKind::GOptimal) merge_parallel(t);
  const auto m = static_cast<Eigen::Index>(arms.size());
  const Vec uniform = Vec::Constant(m, 1.0 / static_cast<double>(m));
  DesignSolution sol;
  if (t.dirs.empty()) {
    sol.design = {arms, uniform};
    sol.converged = true;
    return sol;
  }
  const Vec c = arm_factors(arms, theta);
  SymPinv span(weighted_gram(arms, c));
  if (span.rank() == 0) fail(ErrorCode::NoSpanningSupport, "arms span nothing");
  for (const auto& v : t.dirs)
    if (!span.in_range(v)) fail(ErrorCode::NoSpanningSupport, "objective is infinite on every design");

  const Mat& basis = span.basis();
  Reduced red;
  red.x.resize(basis.cols(), m);
  for (Eigen::Index i = 0; i < m; ++i) red.x.col(i) = basis.transpose() * arms[static_cast<std::size_t>(i)];
  red.v.resize(basis.cols(), static_cast<Eigen::Index>(t.dirs.size()));
  red.s.resize(static_cast<Eigen::Index>(t.dirs.size()));
  for (std::size_t j = 0; j < t.dirs.size(); ++j) {
    red.v.col(static_cast<Eigen::Index>(j)) = basis.transpose() * t.dirs[j];
    red.s(static_cast<Eigen::Index>(j)) = t.scale[j];
  }
  red.c = c;

  const bool g_only = objs.front().kind == ObjectiveKind::GOptimal;
  FwResult fw;
  if (g_only) {
    fw = wolfe_goptimal(red.x, opts);
    fw.lower_bound *= red.s.maxCoeff();
  } else {
    fw = barrier_minimax(red, opts);
  }

  auto value_of = [&](const Vec& w) { return eval_terms(weighted_gram(arms, w.cwiseProduct(c)), t); };
  Vec lam = fw.lambda;
  for (Eigen::Index i = 0; i < m; ++i)
    if (lam(i) < opts.support_floor) lam(i) = 0.0;
  lam /= lam.sum();
  // interior iterates keep every weight positive
  if (!g_only) lam = sparsify(lam, 0.25 * opts.rel_tol, value_of);

  double best = value_of(lam);
  const double uni = value_of(uniform);
  if (uni < best) {
    best = uni;
    lam = uniform;
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!all_parallel(arms[static_cast<std::size_t>(i)], t)) continue;
    Vec e = Vec::Zero(m);
    e(i) = 1.0;
    const double v = value_of(e);
    if (v < best) {
      best = v;
      lam = e;
    }
  }
  sol.design = {arms, lam};
  sol.value = best;
  sol.gap = std::max(0.0, best - fw.lower_bound);
  sol.iterations = fw.iterations;
  sol.converged = fw.converged || sol.gap <= opts.rel_tol * best;
  return sol;
}

double rounding_min_samples(Eigen::Index d, double eps, RoundingRule rule) {
  if (!(eps > 0.0)) fail(ErrorCode::InvalidConfig, "rounding epsilon must be positive");
  const double dd = static_cast<double>(d);
  return rule == RoundingRule::Safe ? (dd * (dd + 1.0) + 2.0) / eps : dd * dd / eps;
}

RoundedAllocation apportion(const Design& design, std::int64_t n, double eps) {
  check_design(design);
  if (n < 0) fail(ErrorCode::InvalidConfig, "negative sample count");
  const auto m = static_cast<Eigen::Index>(design.arms.size());
  std::vector<Eigen::Index> support;
  for (Eigen::Index i = 0; i < m; ++i)
    if (design.weights(i) > 0.0) support.push_back(i);
  const double p = static_cast<double>(support.size());
  std::vector<std::int64_t> cnt(static_cast<std::size_t>(m), 0);
  std::int64_t sum = 0;
  for (auto i : support) {
    const double v = std::ceil((static_cast<double>(n) - 0.5 * p) * design.weights(i));
    cnt[static_cast<std::size_t>(i)] = std::max<std::int64_t>(0, static_cast<std::int64_t>(v));
    sum += cnt[static_cast<std::size_t>(i)];
  }
  while (sum < n) {
    Eigen::Index best = support.front();
    double br = kInf;
    for (auto i : support) {
      const double r = static_cast<double>(cnt[static_cast<std::size_t>(i)]) / design.weights(i);
      if (r < br) {
        br = r;
        best = i;
      }
    }
    ++cnt[static_cast<std::size_t>(best)];
    ++sum;
  }
  while (sum > n) {
    Eigen::Index best = -1;
    double br = -kInf;
    for (auto i : support) {
      if (cnt[static_cast<std::size_t>(i)] == 0) continue;
      const double r = static_cast<double>(cnt[static_cast<std::size_t>(i)] - 1) / design.weights(i);
      if (r > br) {
        br = r;
        best = i;
      }
    }
    --cnt[static_cast<std::size_t>(best)];
    --sum;
  }
  RoundedAllocation out;
  out.arms = design.arms;
  out.counts = std::move(cnt);
  out.total = n;
  double eff = kInf;
  for (auto i : support)
    eff = std::min(eff, static_cast<double>(out.counts[static_cast<std::size_t>(i)]) /
                            (static_cast<double>(n) * design.weights(i)));
  out.efficiency = n > 0 ? eff : 0.0;
  out.guarantee_holds = eps > 0.0 && out.efficiency >= 1.0 / (1.0 + eps) - 1e-12;
  return out;
}

RoundedAllocation round_design(const Design& design, std::int64_t n, double eps, RoundingRule rule) {
  check_design(design);
  const double r = rounding_min_samples(design.arms.front().size(), eps, rule);
  if (static_cast<double>(n) < r) fail(ErrorCode::TooFewSamples, "n below r(eps)");
  return apportion(design, n, eps);
}

Mat allocation_fisher(const RoundedAllocation& alloc, const Vec& theta) {
  Vec w(static_cast<Eigen::Index>(alloc.arms.size()));
  for (std::size_t i = 0; i < alloc.arms.size(); ++i)
    w(static_cast<Eigen::Index>(i)) = static_cast<double>(alloc.counts[i]) * link_mu_dot(alloc.arms[i].dot(theta));
  return weighted_gram(alloc.arms, w);
}

std::string design_to_csv(const Design& design) {
  std::ostringstream os;
  os.precision(17);
  os << "arm_id,weight\n";
  for (Eigen::Index i = 0; i < design.weights.size(); ++i) os << i << ',' << design.weights(i) << '\n';
  return os.str();
}

std::string design_to_json(const DesignSolution& sol, ObjectiveKind kind) {
  nlohmann::json j;
  j["objective"] = objective_name(kind);
  j["value"] = sol.value;
  j["fw_gap"] = sol.gap;
  j["iterations"] = sol.iterations;
  j["converged"] = sol.converged;
  nlohmann::json arms = nlohmann::json::array();
  for (const auto& a : sol.design.arms) arms.push_back(std::vector<double>(a.data(), a.data() + a.size()));
  j["arms"] = arms;
  j["weights"] = std::vector<double>(sol.design.weights.data(), sol.design.weights.data() + sol.design.weights.size());
  return j.dump(2);
}

}  // namespace logband
