#include "hallab/geometry.hpp"

#include <stdexcept>

namespace hallab::geometry {

double wrap_angle(double a) {
  if (!std::isfinite(a)) {
    throw std::invalid_argument("wrap_angle: non-finite angle");
  }
  // remainder() returns a value in [-pi, pi]; fold -pi onto +pi to keep
  // the half-open (-pi, pi] convention.
  double r = std::remainder(a, 2.0 * M_PI);
  if (r <= -M_PI) {
    r = M_PI;
  }
  return r;
}

RelativeConfig relative_config(const Pose& agent, const Pose& goal) {
  if (agent.held.has_value() != goal.held.has_value()) {
    throw std::invalid_argument("relative_config: mismatched held-flag presence");
  }
  const double dx = goal.x - agent.x;
  const double dy = goal.y - agent.y;
  const double c = std::cos(agent.yaw);
  const double s = std::sin(agent.yaw);
  RelativeConfig out;
  out.forward = c * dx + s * dy;
  out.lateral = -s * dx + c * dy;
  out.dyaw = wrap_angle(goal.yaw - agent.yaw);
  out.held = goal.held;
  return out;
}

bool config_close(const Pose& a, const Pose& b, double pos_tol, double yaw_tol) {
  if (pos_tol <= 0.0 || yaw_tol <= 0.0) {
    throw std::invalid_argument("config_close: tolerances must be positive");
  }
  if (a.held.has_value() && b.held.has_value() && *a.held != *b.held) {
    return false;
  }
  const double dist = std::hypot(a.x - b.x, a.y - b.y);
  const double dyaw = std::fabs(wrap_angle(a.yaw - b.yaw));
  return dist <= pos_tol && dyaw <= yaw_tol;
}

}  // namespace hallab::geometry
