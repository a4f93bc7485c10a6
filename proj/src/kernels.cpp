#include "logband/kernels.hpp"

#include <omp.h>

#include <algorithm>

namespace logband::kernels {

namespace {

constexpr std::size_t kChunks = 64;
constexpr std::size_t kParallelMinWork = 1 << 14;

struct Range {
  std::size_t begin, end;
};

Range chunk_range(std::size_t n, std::size_t chunks, std::size_t c) {
  const std::size_t base = n / chunks, extra = n % chunks;
  const std::size_t b = c * base + std::min(c, extra);
  return {b, b + base + (c < extra ? 1 : 0)};
}

std::size_t chunk_count(std::size_t n) { return std::max<std::size_t>(1, std::min(n, kChunks)); }

}  // namespace

int max_threads() { return omp_get_max_threads(); }
void set_threads(int n) { omp_set_num_threads(std::max(1, n)); }

Mat fisher_accumulate(const std::vector<SampleGroup>& groups, const Vec& theta, Eigen::Index dim) {
  const std::size_t n = groups.size();
  const std::size_t chunks = chunk_count(n);
  std::vector<Mat> partial(chunks, Mat::Zero(dim, dim));
  const bool par = n * static_cast<std::size_t>(dim * dim) >= kParallelMinWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::size_t c = 0; c < chunks; ++c) {
    const Range r = chunk_range(n, chunks, c);
    Mat& acc = partial[c];
    for (std::size_t i = r.begin; i < r.end; ++i) {
      const auto& g = groups[i];
      const double w = static_cast<double>(g.trials) * link_mu_dot(g.arm.dot(theta));
      acc.selfadjointView<Eigen::Lower>().rankUpdate(g.arm, w);
    }
  }
  Mat out = Mat::Zero(dim, dim);
  for (const auto& p : partial) out += p;
  return out.selfadjointView<Eigen::Lower>();
}

LikelihoodParts likelihood_parts(const std::vector<SampleGroup>& groups, const Vec& theta,
                                 Eigen::Index dim) {
  const std::size_t n = groups.size();
  const std::size_t chunks = chunk_count(n);
  std::vector<LikelihoodParts> partial(chunks);
  const bool par = n * static_cast<std::size_t>(dim * dim) >= kParallelMinWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::size_t c = 0; c < chunks; ++c) {
    const Range r = chunk_range(n, chunks, c);
    LikelihoodParts acc{0.0, Vec::Zero(dim), Mat::Zero(dim, dim)};
    for (std::size_t i = r.begin; i < r.end; ++i) {
      const auto& g = groups[i];
      const double z = g.arm.dot(theta);
      const double nt = static_cast<double>(g.trials);
      const double k = static_cast<double>(g.ones);
      acc.loglik += k * z - nt * softplus(z);
      acc.grad += (k - nt * link_mu(z)) * g.arm;
      acc.neg_hess.selfadjointView<Eigen::Lower>().rankUpdate(g.arm, nt * link_mu_dot(z));
    }
    partial[c] = std::move(acc);
  }
  LikelihoodParts out{0.0, Vec::Zero(dim), Mat::Zero(dim, dim)};
  for (const auto& p : partial) {
    out.loglik += p.loglik;
    out.grad += p.grad;
    out.neg_hess += p.neg_hess;
  }
  out.neg_hess = out.neg_hess.selfadjointView<Eigen::Lower>();
  return out;
}

std::int64_t count_successes(const KeyedRng& rng, std::uint64_t counter0, std::int64_t n, double p) {
  std::int64_t ones = 0;
#pragma omp parallel for schedule(static) reduction(+ : ones) if (n >= 1 << 16)
  for (std::int64_t i = 0; i < n; ++i)
    ones += rng.uniform(counter0 + static_cast<std::uint64_t>(i)) < p ? 1 : 0;
  return ones;
}

Vec quad_forms(const Mat& m, const ArmList& vs, std::size_t count) {
  Vec out(static_cast<Eigen::Index>(count));
  const bool par = count * static_cast<std::size_t>(m.rows() * m.rows()) >= kParallelMinWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::size_t i = 0; i < count; ++i)
    out(static_cast<Eigen::Index>(i)) = vs[i].dot(m * vs[i]);
  return out;
}

double max_quad_form(const Mat& m, const ArmList& vs, std::size_t count) {
  if (count == 0) return 0.0;
  return quad_forms(m, vs, count).maxCoeff();
}

namespace reference {

Mat fisher_accumulate(const std::vector<SampleGroup>& groups, const Vec& theta, Eigen::Index dim) {
  Mat out = Mat::Zero(dim, dim);
  for (const auto& g : groups) {
    const double w = link_mu_dot(g.arm.dot(theta));
    for (std::int64_t s = 0; s < g.trials; ++s) out += w * g.arm * g.arm.transpose();
  }
  return out;
}

LikelihoodParts likelihood_parts(const std::vector<SampleGroup>& groups, const Vec& theta,
                                 Eigen::Index dim) {
  LikelihoodParts out{0.0, Vec::Zero(dim), Mat::Zero(dim, dim)};
  for (const auto& g : groups) {
    const double z = g.arm.dot(theta);
    for (std::int64_t s = 0; s < g.trials; ++s) {
      const double y = s < g.ones ? 1.0 : 0.0;
      out.loglik += y > 0 ? -softplus(-z) : -softplus(z);
      out.grad += (y - link_mu(z)) * g.arm;
      out.neg_hess += link_mu_dot(z) * g.arm * g.arm.transpose();
    }
  }
  return out;
}

std::int64_t count_successes(const KeyedRng& rng, std::uint64_t counter0, std::int64_t n, double p) {
  std::int64_t ones = 0;
  for (std::int64_t i = 0; i < n; ++i)
    if (rng.uniform(counter0 + static_cast<std::uint64_t>(i)) < p) ++ones;
  return ones;
}

Vec quad_forms(const Mat& m, const ArmList& vs, std::size_t count) {
  Vec out(static_cast<Eigen::Index>(count));
  for (std::size_t i = 0; i < count; ++i) {
    double s = 0.0;
    for (Eigen::Index a = 0; a < m.rows(); ++a)
      for (Eigen::Index b = 0; b < m.cols(); ++b) s += vs[i](a) * m(a, b) * vs[i](b);
    out(static_cast<Eigen::Index>(i)) = s;
  }
  return out;
}

double max_quad_form(const Mat& m, const ArmList& vs, std::size_t count) {
  if (count == 0) return 0.0;
  return quad_forms(m, vs, count).maxCoeff();
}

}  // namespace reference

}  // namespace logband::kernels
