#pragma once

#include <cstdint>
#include <vector>

#include "logband/logistic.hpp"
#include "logband/rng.hpp"

// Data-parallel kernels. Work is split into chunks that depend only on the
// input size, so results are bit-identical for every thread count.
namespace logband::kernels {

struct LikelihoodParts {
  double loglik = 0.0;
  Vec grad;
  Mat neg_hess;
};

Mat fisher_accumulate(const std::vector<SampleGroup>& groups, const Vec& theta, Eigen::Index dim);
LikelihoodParts likelihood_parts(const std::vector<SampleGroup>& groups, const Vec& theta,
                                 Eigen::Index dim);
std::int64_t count_successes(const KeyedRng& rng, std::uint64_t counter0, std::int64_t n, double p);
// values v_i^T M v_i for the first `count` vectors
Vec quad_forms(const Mat& m, const ArmList& vs, std::size_t count);
double max_quad_form(const Mat& m, const ArmList& vs, std::size_t count);

int max_threads();
void set_threads(int n);

namespace reference {
// Per-sample serial loops, kept as test oracles and benchmark baselines.
Mat fisher_accumulate(const std::vector<SampleGroup>& groups, const Vec& theta, Eigen::Index dim);
LikelihoodParts likelihood_parts(const std::vector<SampleGroup>& groups, const Vec& theta,
                                 Eigen::Index dim);
std::int64_t count_successes(const KeyedRng& rng, std::uint64_t counter0, std::int64_t n, double p);
Vec quad_forms(const Mat& m, const ArmList& vs, std::size_t count);
double max_quad_form(const Mat& m, const ArmList& vs, std::size_t count);
}  // namespace reference

}  // namespace logband::kernels
