#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

namespace logband {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using ArmList = std::vector<Vec>;

inline constexpr double kUnitBallSlack = 1e-9;

// Parameter vector, optionally tagged with a known norm bound S*.
struct Theta {
  Vec coords;
  std::optional<double> norm_bound;

  Theta() = default;
  explicit Theta(Vec c, std::optional<double> bound = std::nullopt)
      : coords(std::move(c)), norm_bound(bound) {}
  Eigen::Index dim() const { return coords.size(); }
};

// Checks finiteness, common dimension and (unless allowed) the unit-ball bound.
void validate_arms(const ArmList& arms, Eigen::Index dim, bool allow_outside_unit_ball = false);
void validate_vec(const Vec& v, const char* what);

}  // namespace logband
