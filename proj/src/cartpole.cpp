#include "safespec/cartpole.hpp"

#include <cmath>
#include <stdexcept>

namespace safespec {

CartPoleState cartpole_step(const CartPoleWorld& w, const CartPoleState& s, double force) {
  const double f = std::clamp(force, -w.force_limit, w.force_limit);
  const double total_mass = w.mass_cart + w.mass_pole;
  const double pml = w.mass_pole * w.half_length;

  const double sin_t = std::sin(s.theta);
  const double cos_t = std::cos(s.theta);

  const double temp = (f + pml * s.theta_dot * s.theta_dot * sin_t) / total_mass;
  const double theta_acc =
      (w.gravity * sin_t - cos_t * temp) /
      (w.half_length * (4.0 / 3.0 - w.mass_pole * cos_t * cos_t / total_mass));
  const double x_acc = temp - pml * theta_acc * cos_t / total_mass;

  CartPoleState n;
  n.x_dot = s.x_dot + w.dt * x_acc;
  n.x = s.x + w.dt * n.x_dot;
  n.theta_dot = s.theta_dot + w.dt * theta_acc;
  n.theta = s.theta + w.dt * n.theta_dot;

  if (!std::isfinite(n.x) || !std::isfinite(n.x_dot) || !std::isfinite(n.theta) ||
      !std::isfinite(n.theta_dot))
    throw std::runtime_error("cart-pole integration produced a non-finite state");
  return n;
}

Distances distances(const CartPoleWorld& w, const CartPoleState& s) {
  Distances d;
  d.d_goal = std::fabs(s.x - w.goal_pos);
  if (!w.obstacle) {
    d.d_obstacle = 1e9;
    return d;
  }
  const double tip_x = s.x + 2.0 * w.half_length * std::sin(s.theta);
  const double tip_y = 2.0 * w.half_length * std::cos(s.theta);
  const auto& o = *w.obstacle;
  const double dx = std::max({o.x_min - tip_x, 0.0, tip_x - o.x_max});
  const double dy = std::max({o.y_min - tip_y, 0.0, tip_y - o.y_max});
  d.d_obstacle = std::hypot(dx, dy);
  return d;
}

double cartpole_energy(const CartPoleWorld& w, const CartPoleState& s) {
  const double total_mass = w.mass_cart + w.mass_pole;
  const double pml = w.mass_pole * w.half_length;
  // uniform rod pivoted at the cart: I about the pivot = (4/3) m l^2
  const double kinetic = 0.5 * total_mass * s.x_dot * s.x_dot +
                         pml * s.x_dot * s.theta_dot * std::cos(s.theta) +
                         0.5 * (4.0 / 3.0) * pml * w.half_length * s.theta_dot * s.theta_dot;
  const double potential = pml * w.gravity * std::cos(s.theta);
  return kinetic + potential;
}

std::vector<std::string> CartPoleEnv::obs_names() const {
  std::vector<std::string> names{"x", "x_dot", "theta", "theta_dot", "dist_goal"};
  if (world_.obstacle) names.push_back("dist_obstacle");
  return names;
}

std::vector<double> CartPoleEnv::observe() const {
  const Distances d = distances(world_, state_);
  std::vector<double> obs{state_.x, state_.x_dot, state_.theta, state_.theta_dot, d.d_goal};
  if (world_.obstacle) obs.push_back(d.d_obstacle);
  return obs;
}

std::vector<double> CartPoleEnv::reset(Rng& rng) {
  std::uniform_real_distribution<double> dist(-world_.start_noise, world_.start_noise);
  state_.x = dist(rng);
  state_.x_dot = dist(rng);
  state_.theta = dist(rng);
  state_.theta_dot = dist(rng);
  return observe();
}

std::vector<double> CartPoleEnv::step(std::span<const double> action, Rng&) {
  if (action.empty()) throw std::invalid_argument("cart-pole expects a 1-d force action");
  state_ = cartpole_step(world_, state_, action[0]);
  return observe();
}

std::vector<double> CartPoleEnv::observation_from_core(std::span<const double> core) const {
  if (core.size() < 4) throw std::invalid_argument("cart-pole core state has 4 dimensions");
  CartPoleState s{core[0], core[1], core[2], core[3]};
  const Distances d = distances(world_, s);
  std::vector<double> obs{s.x, s.x_dot, s.theta, s.theta_dot, d.d_goal};
  if (world_.obstacle) obs.push_back(d.d_obstacle);
  return obs;
}

CartPoleWorld cartpole_obstacle_world() {
  CartPoleWorld w;
  w.goal_pos = 1.5;
  w.obstacle = ObstacleRect{0.4, 0.8, 0.85, 1.05};
  return w;
}

CartPoleWorld cartpole_balance_world() {
  CartPoleWorld w;
  w.goal_pos = 0.0;
  w.obstacle.reset();
  return w;
}

std::string cartpole_obstacle_task_text() {
  // The collision predicate carries a 1 cm clearance: the unsigned distance
  // is never negative, so "d > 0" alone could not register a violation under
  // the inclusive f >= 0 satisfaction rule.
  return "task cartpole_obstacle\n"
         "state x x_dot theta theta_dot dist_goal dist_obstacle\n"
         "const theta_max = 0.33\n"
         "const theta_comf = 0.1\n"
         "const x_lim = 2.4\n"
         "const eps = 0.1\n"
         "const clearance = 0.01\n"
         "ensure abs(theta) <= theta_max      bounds [-2.9, 0.33]\n"
         "ensure dist_obstacle >= clearance   bounds [-0.01, 4.0]\n"
         "ensure abs(x) <= x_lim              bounds [-1.0, 2.4]\n"
         "conquer dist_goal <= eps            bounds [-3.8, 0.1]\n"
         "encourage abs(theta) <= theta_comf  bounds [-0.4, 0.1]\n";
}

std::string cartpole_balance_task_text() {
  return "task cartpole_balance\n"
         "state x x_dot theta theta_dot dist_goal\n"
         "const theta_max = 0.33\n"
         "const theta_comf = 0.1\n"
         "const x_lim = 2.4\n"
         "const eps = 0.1\n"
         "ensure abs(theta) <= theta_max      bounds [-2.9, 0.33]\n"
         "ensure abs(x) <= x_lim              bounds [-1.0, 2.4]\n"
         "conquer dist_goal <= eps            bounds [-2.3, 0.1]\n"
         "encourage abs(theta) <= theta_comf  bounds [-0.4, 0.1]\n";
}

}  // namespace safespec
