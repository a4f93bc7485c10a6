#include "logband/generators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "logband/confidence.hpp"
#include "logband/error.hpp"
#include "logband/kernels.hpp"
#include "logband/linalg.hpp"
#include "logband/rng.hpp"

namespace logband {

namespace {

Vec unit(Eigen::Index d, Eigen::Index i) {
  Vec e = Vec::Zero(d);
  e[i] = 1.0;
  return e;
}

std::string num(double v) {
  std::string s = std::to_string(v);
  while (!s.empty() && s.back() == '0') s.pop_back();
  if (!s.empty() && s.back() == '.') s.pop_back();
  return s;
}

}  // namespace

TransductiveInstance gen_fig1_benchmark(Eigen::Index d) {
  if (d < 2) fail(ErrorCode::InvalidConfig, "fig1 benchmark needs d >= 2");
  TransductiveInstance inst;
  inst.id = "fig1-d" + std::to_string(d);
  for (Eigen::Index i = 0; i < d; ++i) inst.x_arms.push_back(unit(d, i));
  Vec extra = Vec::Zero(d);
  extra[0] = std::cos(0.1);
  extra[1] = std::sin(0.1);
  inst.x_arms.push_back(extra);
  inst.z_arms = inst.x_arms;
  inst.theta_star = unit(d, 0);
  inst.validate();
  return inst;
}

TransductiveInstance gen_example1(double r, double eps) {
  if (!(r >= 0.0) || !(eps > 0.0)) fail(ErrorCode::InvalidConfig, "example1 needs r >= 0 and eps > 0");
  TransductiveInstance inst;
  inst.id = "example1-r" + num(r) + "-eps" + num(eps);
  inst.x_arms = {unit(2, 0), unit(2, 1)};
  inst.z_arms = inst.x_arms;
  inst.theta_star = Vec(2);
  inst.theta_star << r, r - eps;
  inst.validate();
  return inst;
}

TransductiveInstance gen_example2(double r, double eps) {
  TransductiveInstance inst = gen_example1(r, eps);
  inst.id = "example2-r" + num(r) + "-eps" + num(eps);
  inst.x_arms.push_back(unit(2, 0) - unit(2, 1));
  inst.allow_outside_unit_ball = true;
  inst.validate();
  return inst;
}

PairwiseInstance gen_pairwise(std::size_t n_items, Eigen::Index d, std::uint64_t seed, std::size_t cap,
                              double theta_norm) {
  if (n_items < 2) fail(ErrorCode::InvalidConfig, "pairwise instance needs at least two items");
  if (d < 1 || cap < 1) fail(ErrorCode::InvalidConfig, "pairwise instance needs d >= 1 and cap >= 1");
  RngStream rng(seed, 0x7061697273ULL);
  PairwiseInstance out;
  TransductiveInstance& inst = out.instance;
  inst.id = "pairwise-n" + std::to_string(n_items) + "-d" + std::to_string(d) + "-s" + std::to_string(seed);
  for (std::size_t i = 0; i < n_items; ++i) inst.z_arms.push_back(0.5 * rng.unit_sphere(d));
  inst.theta_star = theta_norm * rng.unit_sphere(d);

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < n_items; ++i)
    for (std::size_t j = i + 1; j < n_items; ++j) pairs.emplace_back(i, j);
  if (pairs.size() > cap) {
    // partial Fisher-Yates, then restore the canonical order
    for (std::size_t i = 0; i < cap; ++i) std::swap(pairs[i], pairs[i + rng.index(pairs.size() - i)]);
    pairs.resize(cap);
    std::sort(pairs.begin(), pairs.end());
  }
  for (const auto& [i, j] : pairs) inst.x_arms.push_back(inst.z_arms[i] - inst.z_arms[j]);
  out.provenance = std::move(pairs);
  inst.validate();
  return out;
}

GaussianBurnin gen_gaussian_burnin(Eigen::Index d, double s_norm, std::int64_t t, std::uint64_t seed, double delta,
                                   int checkpoints) {
  if (d < 1 || t < 1) fail(ErrorCode::InvalidConfig, "gaussian burn-in needs d >= 1 and t >= 1");
  if (!(s_norm >= 0.0) || static_cast<double>(d) < s_norm * s_norm)
    fail(ErrorCode::InvalidConfig, "gaussian burn-in needs d >= s_norm^2");
  GaussianBurnin out;
  const double dd = static_cast<double>(d);
  out.scale = 1.0 / std::sqrt(1.0 + 4.0 * std::sqrt(2.0 / dd));

  RngStream rng(seed, 0x6761757373ULL);
  const Vec theta = s_norm * rng.unit_sphere(d);
  ArmList xs;
  xs.reserve(static_cast<std::size_t>(t));
  for (std::int64_t s = 0; s < t; ++s) {
    Vec x(d);
    for (Eigen::Index i = 0; i < d; ++i) x[i] = rng.normal() / std::sqrt(dd);
    x *= out.scale;
    const double n = x.norm();
    if (n > 1.0) x /= n;
    xs.push_back(std::move(x));
  }

  const std::int64_t step = std::max<std::int64_t>(1, t / std::max(1, checkpoints));
  Mat h = Mat::Zero(d, d);
  std::int64_t next = std::min<std::int64_t>(t, std::max<std::int64_t>(d, step));
  for (std::int64_t s = 0; s < t; ++s) {
    const Vec& x = xs[static_cast<std::size_t>(s)];
    h.noalias() += link_mu_dot(x.dot(theta)) * x * x.transpose();
    if (s + 1 != next) continue;
    const Mat hp = SymPinv(h).matrix();
    const double xi = kernels::max_quad_form(hp, xs, static_cast<std::size_t>(s + 1));
    const double thr = 1.0 / gamma_d({delta, static_cast<std::size_t>(s + 1), d});
    out.prefixes.push_back(s + 1);
    out.xi_sq_series.push_back(xi);
    out.threshold_series.push_back(thr);
    if (!out.satisfied_at && xi <= thr) out.satisfied_at = s + 1;
    next = std::min(t, next + step);
  }
  return out;
}

}  // namespace logband
