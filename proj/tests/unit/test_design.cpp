#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>

#include "logband/design.hpp"
#include "logband/error.hpp"
#include "logband/linalg.hpp"
#include "logband/logistic.hpp"
#include "logband/rng.hpp"

using namespace logband;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

ArmList basis(Eigen::Index d) {
  ArmList a;
  for (Eigen::Index i = 0; i < d; ++i) a.push_back(Vec::Unit(d, i));
  return a;
}

Design uniform(const ArmList& arms) {
  const auto m = static_cast<Eigen::Index>(arms.size());
  return {arms, Vec::Constant(m, 1.0 / static_cast<double>(m))};
}

ArmList random_arms(std::size_t m, Eigen::Index d, RngStream& rng) {
  ArmList a;
  for (std::size_t i = 0; i < m; ++i) a.push_back(rng.unit_sphere(d) * (0.5 + 0.5 * rng.uniform()));
  return a;
}

Vec random_simplex(std::size_t m, RngStream& rng) {
  Vec w(static_cast<Eigen::Index>(m));
  for (auto& x : w) x = -std::log(rng.uniform());
  return w / w.sum();
}

// explicit dense-inverse evaluation of the pair objective
double pair_value_dense(const ArmList& arms, const Vec& w, const Vec& th, const ArmList& z) {
  Mat h = Mat::Zero(th.size(), th.size());
  for (std::size_t i = 0; i < arms.size(); ++i)
    h += w(static_cast<Eigen::Index>(i)) * link_mu_dot(arms[i].dot(th)) * arms[i] * arms[i].transpose();
  const Mat inv = h.inverse();
  double v = 0;
  for (std::size_t i = 0; i < z.size(); ++i)
    for (std::size_t j = i + 1; j < z.size(); ++j) v = std::max(v, (z[i] - z[j]).dot(inv * (z[i] - z[j])));
  return v;
}

}  // namespace

TEST_CASE("gram and fisher") {
  const auto b = basis(4);
  CHECK((design_gram(uniform(b)) - Mat::Identity(4, 4) / 4.0).norm() <= 1e-15);
  Design point{{v2(0.6, 0.8)}, Vec::Ones(1)};
  CHECK((design_gram(point) - v2(0.6, 0.8) * v2(0.6, 0.8).transpose()).norm() <= 1e-15);
  CHECK((design_fisher(uniform(b), Vec::Zero(4)) - 0.25 * design_gram(uniform(b))).norm() <= 1e-15);
  const Vec th = v2(1.0, 2.0);
  CHECK((design_fisher(point, th) - link_mu_dot(2.2) * design_gram(point)).norm() <= 1e-15);

  RngStream rng(3);
  for (int rep = 0; rep < 50; ++rep) {
    const auto arms = random_arms(5, 3, rng);
    const Design d{arms, random_simplex(5, rng)};
    const Vec t = 2 * rng.unit_sphere(3);
    const double k0 = kappa_min(t, arms, KappaMode::FiniteSet);
    const Mat diff = design_fisher(d, t) - k0 * design_gram(d);
    CHECK(min_eigenvalue(diff) >= -1e-10);
  }

  // categorical sampling oracle
  const auto arms = random_arms(4, 3, rng);
  const Design d{arms, random_simplex(4, rng)};
  Mat acc = Mat::Zero(3, 3);
  Vec cum(4);
  double c = 0;
  for (int i = 0; i < 4; ++i) cum(i) = (c += d.weights(i));
  const int n = 1000000;
  for (int s = 0; s < n; ++s) {
    const double u = rng.uniform();
    int k = 0;
    while (k < 3 && u > cum(k)) ++k;
    acc += arms[static_cast<std::size_t>(k)] * arms[static_cast<std::size_t>(k)].transpose();
  }
  CHECK((acc / n - design_gram(d)).cwiseAbs().maxCoeff() <= 3e-3);
}

TEST_CASE("objective evaluation") {
  CHECK(eval_objective(uniform(basis(3)), g_optimal()) == doctest::Approx(3.0).epsilon(1e-14));
  const Vec x = v2(0.6, 0.8);
  Design point{{x, v2(1, 0)}, v2(1, 0)};
  CHECK(eval_objective(point, max_direction(Vec::Zero(2), {x})) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(std::isinf(eval_objective(point, max_direction(Vec::Zero(2), {v2(0, 1)}))));
  CHECK(std::isinf(eval_objective(point, g_optimal())));

  RngStream rng(5);
  const auto arms = random_arms(5, 3, rng);
  const Vec w = random_simplex(5, rng);
  const Vec th = rng.unit_sphere(3);
  const auto z = random_arms(4, 3, rng);
  const double ours = eval_objective(Design{arms, w}, max_pair(th, z));
  CHECK(std::abs(ours - pair_value_dense(arms, w, th, z)) <= 1e-10 * ours);
}

TEST_CASE("G-optimal: basis and Kiefer-Wolfowitz value") {
  const auto sol = minimize_design(basis(4), {g_optimal()});
  CHECK(sol.value == doctest::Approx(4.0).epsilon(1e-3));
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(std::abs(sol.design.weights(i) - 0.25) <= 1e-3);

  RngStream rng(11);
  for (int rep = 0; rep < 10; ++rep) {
    const auto arms = random_arms(8, 3, rng);
    const auto s = minimize_design(arms, {g_optimal()});
    CHECK(s.value >= 3.0 - 1e-6);
    CHECK(s.value <= 3.0 * 1.01);
    CHECK(s.gap >= 0.0);
    CHECK(s.converged);
    CHECK(s.gap <= 1e-4 * s.value);
  }
}

TEST_CASE("two-arm pair design matches the closed form") {
  // min over lambda of |e1 - e2|^2_{H^-1} = (w1^-1/2 + w2^-1/2)^2
  for (double r : {0.0, 1.0, 3.0}) {
    const Vec th = v2(r, r - 0.2);
    const auto sol = minimize_design({v2(1, 0), v2(0, 1)}, {max_pair(th, {v2(1, 0), v2(0, 1)})});
    const double w1 = link_mu_dot(r), w2 = link_mu_dot(r - 0.2);
    const double expect = std::pow(1 / std::sqrt(w1) + 1 / std::sqrt(w2), 2);
    CHECK(sol.value == doctest::Approx(expect).epsilon(1e-4));
    CHECK(sol.design.weights(0) == doctest::Approx((1 / std::sqrt(w1)) / (1 / std::sqrt(w1) + 1 / std::sqrt(w2))).epsilon(1e-2));
  }
}

TEST_CASE("example-2 pair design concentrates on the difference arm") {
  for (double r : {1.0, 3.0, 5.0}) {
    const Vec th = v2(r, r - 0.1);
    const ArmList x{v2(1, 0), v2(0, 1), v2(1, -1)};
    const auto sol = minimize_design(x, {max_pair(th, {v2(1, 0), v2(0, 1)})});
    CHECK(sol.design.weights(2) >= 0.99);
    CHECK(sol.value == doctest::Approx(1.0 / link_mu_dot(0.1)).epsilon(1e-4));
  }
}

TEST_CASE("pair design against a simplex grid oracle") {
  RngStream rng(17);
  for (int rep = 0; rep < 5; ++rep) {
    const auto arms = random_arms(3, 2, rng);
    const auto z = random_arms(3, 2, rng);
    const Vec th = 2 * rng.unit_sphere(2);
    const auto sol = minimize_design(arms, {max_pair(th, z, 3.0)});
    double grid = std::numeric_limits<double>::infinity();
    const int n = 400;
    for (int i = 1; i < n; ++i)
      for (int j = 1; i + j < n; ++j) {
        Vec w(3);
        w << double(i) / n, double(j) / n, double(n - i - j) / n;
        grid = std::min(grid, 3.0 * pair_value_dense(arms, w, th, z));
      }
    CHECK(sol.value <= grid * (1 + 1e-9));
    CHECK(sol.value >= grid * (1 - 2e-2));
  }
}

TEST_CASE("combined objective dominance") {
  RngStream rng(23);
  for (int rep = 0; rep < 10; ++rep) {
    const auto arms = random_arms(7, 3, rng);
    const auto z = random_arms(5, 3, rng);
    const Vec th = rng.unit_sphere(3);
    const std::vector<DesignObjective> objs{max_direction(th, arms, 12.0), max_pair(th, z, 50.0)};
    const auto sol = minimize_design(arms, objs);
    CHECK(sol.gap >= 0.0);
    CHECK(sol.value <= eval_objective(uniform(arms), objs) + 1e-12);
    CHECK(sol.value == doctest::Approx(eval_objective(sol.design, objs)).epsilon(1e-12));
    for (std::size_t i = 0; i < arms.size(); ++i) {
      Vec w = Vec::Zero(7);
      w(static_cast<Eigen::Index>(i)) = 1;
      CHECK(sol.value <= eval_objective(Design{arms, w}, objs));
    }
  }
}

TEST_CASE("design solver errors") {
  CHECK_THROWS_AS(minimize_design({v2(1, 0), v2(2, 0) / 2.5}, {max_direction(Vec::Zero(2), {v2(0, 1)})}), Error);
  CHECK_THROWS_AS(minimize_design({v2(1, 0)}, {g_optimal(), max_direction(Vec::Zero(2), {v2(1, 0)})}), Error);
}

TEST_CASE("rounding") {
  CHECK(rounding_min_samples(3, 0.5) == doctest::Approx(28.0));
  CHECK(rounding_min_samples(3, 0.5, RoundingRule::Quadratic) == doctest::Approx(18.0));
  const Design two{{v2(1, 0), v2(0, 1)}, v2(0.5, 0.5)};
  auto a = apportion(two, 10);
  CHECK(a.counts == std::vector<std::int64_t>{5, 5});
  Design three{{v2(1, 0), v2(0, 1), v2(0.6, 0.8)}, Vec(3)};
  three.weights << 0.5, 0.3, 0.2;
  CHECK(apportion(three, 10).counts == std::vector<std::int64_t>{5, 3, 2});
  three.weights = Vec::Constant(3, 1.0 / 3.0);
  CHECK(apportion(three, 10).counts == std::vector<std::int64_t>{4, 3, 3});
  Design point{{v2(1, 0), v2(0, 1)}, v2(1, 0)};
  CHECK(round_design(point, 100, 0.5).counts == std::vector<std::int64_t>{100, 0});
  CHECK_THROWS_AS(round_design(two, 15, 0.5), Error);

  RngStream rng(31);
  for (int rep = 0; rep < 30; ++rep) {
    const auto arms = random_arms(6, 3, rng);
    Vec w = random_simplex(6, rng);
    if (rep % 3 == 0) w(0) = 0.0, w /= w.sum();
    const Design d{arms, w};
    const auto n = static_cast<std::int64_t>(std::ceil(rounding_min_samples(3, 0.5)));
    const auto alloc = round_design(d, n, 0.5);
    std::int64_t sum = 0;
    for (std::size_t i = 0; i < 6; ++i) {
      sum += alloc.counts[i];
      if (w(static_cast<Eigen::Index>(i)) == 0.0) CHECK(alloc.counts[i] == 0);
    }
    CHECK(sum == n);
    CHECK(alloc.guarantee_holds);
    for (int k = 0; k < 3; ++k) {
      const Vec th = k == 0 ? Vec::Zero(3) : Vec(2 * rng.unit_sphere(3));
      const Mat h = design_fisher(d, th);
      const Mat diff = allocation_fisher(alloc, th) - (static_cast<double>(n) / 1.5) * h;
      CHECK(min_eigenvalue(diff) >= -1e-9 * h.norm() * n);
    }
  }
}
