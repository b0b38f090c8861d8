#pragma once

#include <cmath>
#include <optional>

namespace hallab::geometry {

// Planar agent configuration. yaw is kept in (-pi, pi]; `held` is only
// populated by the successive-navigation task.
struct Pose {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;
  std::optional<bool> held;
};

// Goal configuration expressed in the agent's ego frame: x forward,
// y left, counterclockwise-positive rotation.
struct RelativeConfig {
  double forward = 0.0;
  double lateral = 0.0;
  double dyaw = 0.0;
  std::optional<bool> held;
};

// Maps any finite angle into (-pi, pi].
double wrap_angle(double a);

// Goal pose expressed in the agent's frame. Throws std::invalid_argument
// when exactly one of the poses carries a held flag.
RelativeConfig relative_config(const Pose& agent, const Pose& goal);

// Inclusive closeness predicate: planar distance within pos_tol, wrapped
// yaw difference within yaw_tol, and held flags equal when both present.
bool config_close(const Pose& a, const Pose& b, double pos_tol, double yaw_tol);

constexpr double kDefaultPosTol = 0.4;
constexpr double kDefaultYawTol = 0.3;

}  // namespace hallab::geometry
