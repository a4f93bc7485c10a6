#pragma once

#include "logband/types.hpp"

namespace logband {

inline constexpr double kPinvRelCutoff = 1e-10;

// Moore-Penrose pseudo-inverse of a symmetric PSD matrix via eigendecomposition.
// Eigenvalues below kPinvRelCutoff * lambda_max are treated as zero.
class SymPinv {
 public:
  SymPinv() = default;
  explicit SymPinv(const Mat& m, double rel_cutoff = kPinvRelCutoff);

  Eigen::Index dim() const { return dim_; }
  Eigen::Index rank() const { return basis_.cols(); }
  double lambda_max() const { return lambda_max_; }

  // v^T M^+ v
  double quad(const Vec& v) const;
  // M^+ v
  Vec solve(const Vec& v) const;
  Mat matrix() const;
  // true when v lies in the column space of M up to a relative tolerance.
  bool in_range(const Vec& v, double rel_tol = 1e-8) const;

  const Mat& basis() const { return basis_; }
  const Vec& eigenvalues() const { return values_; }

 private:
  Eigen::Index dim_ = 0;
  double lambda_max_ = 0.0;
  Mat basis_;
  Vec values_;
};

double min_eigenvalue(const Mat& m);
Mat symmetrize(const Mat& m);

// Eigenvalues of B^{-1/2} A B^{-1/2} restricted to range(B); A, B symmetric PSD.
Vec generalized_eigenvalues(const Mat& a, const Mat& b);

}  // namespace logband
