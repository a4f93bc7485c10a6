#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "logband/types.hpp"

namespace logband {

// Logistic link and derivatives; all stable for large |z|.
double link_mu(double z);
double link_mu_dot(double z);
double link_mu_ddot(double z);
double softplus(double z);

enum class KappaMode { UnitBall, FiniteSet };

// UnitBall: mu_dot(|theta|). FiniteSet: min over arms of mu_dot(x^T theta).
double kappa_min(const Vec& theta, const ArmList& arms, KappaMode mode);

// Secant slope (mu(x^T t1) - mu(x^T t2)) / (x^T t1 - x^T t2).
double alpha_slope(const Vec& x, const Vec& theta1, const Vec& theta2);
double alpha_slope_scalar(double a, double b);

// beta(a, b) = int_0^1 (1 - v) mu_dot(a + v (b - a)) dv
double beta_weight(double a, double b);

// KL(Bern(mu(a)) || Bern(mu(b)))
double kl_logistic(double a, double b);

struct SampleGroup {
  Vec arm;
  std::int64_t trials = 0;
  std::int64_t ones = 0;
  int source = 0;
};

// Binary-label samples stored as runs of identical arms.
class LogisticDataset {
 public:
  explicit LogisticDataset(Eigen::Index dim = 0) : dim_(dim) {}

  void add(const Vec& arm, int label, int source = 0);
  void add_counts(const Vec& arm, std::int64_t trials, std::int64_t ones, int source = 0);
  void append(const LogisticDataset& other);
  // merge runs sharing an arm vector; keeps the first run's source tag
  LogisticDataset compacted() const;

  Eigen::Index dim() const { return dim_; }
  std::int64_t size() const { return total_; }
  std::size_t distinct_arms() const;
  bool empty() const { return total_ == 0; }
  const std::vector<SampleGroup>& groups() const { return groups_; }

 private:
  Eigen::Index dim_;
  std::int64_t total_ = 0;
  std::vector<SampleGroup> groups_;
};

struct FisherMatrix {
  Mat matrix;
  Vec at_theta;
  std::int64_t sample_count = 0;
  std::size_t t_eff = 0;
};

FisherMatrix fisher_info(const LogisticDataset& data, const Vec& theta);

struct MleOptions {
  double tol = 1e-10;       // on the sample-averaged gradient, infinity norm
  int max_iters = 100;
  double guard = 50.0;      // separation guard on |theta|
  double ridge = 0.0;       // penalty ridge/2 |theta|^2
  bool record_trace = false;
  // initial point; zero when unset or of the wrong size
  std::optional<Vec> start;
};

struct MleEstimate {
  Theta theta;
  int iterations = 0;
  double final_gradient_norm = 0.0;
  double loglik = 0.0;
  bool converged = false;
  bool separation_detected = false;
  std::vector<double> loglik_trace;
};

// Damped Newton from opts.start (default zero); pseudo-inverse steps keep theta in the data span.
MleEstimate fit_mle(const LogisticDataset& data, const MleOptions& opts = {});

double log_likelihood(const LogisticDataset& data, const Vec& theta, double ridge = 0.0);

struct ProjectedEstimate {
  Theta theta;
  Vec ridge_theta;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
};

double projected_eta(Eigen::Index d, double delta, double s_star);

// argmin over |theta| <= s_star of |g(theta) - g(theta_ridge)|_{H(eta, theta)^{-1}}
ProjectedEstimate fit_projected_mle(const LogisticDataset& data, double s_star, double eta,
                                    double tol = 1e-8, int max_iters = 5000);
double projection_objective(const LogisticDataset& data, const Vec& theta, const Vec& target,
                            double eta);
Vec projection_map(const LogisticDataset& data, const Vec& theta, double eta);

}  // namespace logband
