#include "logband/linalg.hpp"

#include <cmath>

#include "logband/error.hpp"

namespace logband {

void validate_vec(const Vec& v, const char* what) {
  if (!v.allFinite()) fail(ErrorCode::NonFiniteInput, std::string(what) + " has non-finite entries");
}

void validate_arms(const ArmList& arms, Eigen::Index dim, bool allow_outside_unit_ball) {
  for (const auto& x : arms) {
    if (x.size() != dim) fail(ErrorCode::InvalidInstance, "arm dimension mismatch");
    if (!x.allFinite()) fail(ErrorCode::InvalidInstance, "arm has non-finite entries");
    if (!allow_outside_unit_ball && x.norm() > 1.0 + kUnitBallSlack)
      fail(ErrorCode::InvalidInstance, "arm outside the unit ball");
  }
}

SymPinv::SymPinv(const Mat& m, double rel_cutoff) : dim_(m.rows()) {
  if (m.rows() != m.cols()) fail(ErrorCode::InvalidInstance, "pinv of non-square matrix");
  if (!m.allFinite()) fail(ErrorCode::NonFiniteInput, "pinv of non-finite matrix");
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(m));
  const Vec& ev = es.eigenvalues();
  lambda_max_ = dim_ > 0 ? ev.maxCoeff() : 0.0;
  Eigen::Index keep = 0;
  const double cut = rel_cutoff * lambda_max_;
  for (Eigen::Index i = 0; i < dim_; ++i)
    if (lambda_max_ > 0.0 && ev(i) > cut) ++keep;
  basis_.resize(dim_, keep);
  values_.resize(keep);
  Eigen::Index j = 0;
  for (Eigen::Index i = 0; i < dim_; ++i) {
    if (lambda_max_ > 0.0 && ev(i) > cut) {
      basis_.col(j) = es.eigenvectors().col(i);
      values_(j) = ev(i);
      ++j;
    }
  }
}

double SymPinv::quad(const Vec& v) const {
  const Vec c = basis_.transpose() * v;
  return (c.array().square() / values_.array()).sum();
}

Vec SymPinv::solve(const Vec& v) const {
  const Vec c = basis_.transpose() * v;
  return basis_ * (c.array() / values_.array()).matrix();
}

Mat SymPinv::matrix() const {
  return basis_ * values_.cwiseInverse().asDiagonal() * basis_.transpose();
}

bool SymPinv::in_range(const Vec& v, double rel_tol) const {
  const double n = v.norm();
  if (n == 0.0) return true;
  const Vec resid = v - basis_ * (basis_.transpose() * v);
  return resid.norm() <= rel_tol * n;
}

Mat symmetrize(const Mat& m) { return 0.5 * (m + m.transpose()); }

double min_eigenvalue(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

Vec generalized_eigenvalues(const Mat& a, const Mat& b) {
  SymPinv pb(b);
  // B^{+1/2} restricted to range(B)
  const Mat half = pb.basis() * pb.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal();
  const Mat c = half.transpose() * a * half;
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(c), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

}  // namespace logband
