#pragma once

#include <optional>

#include "safespec/env.hpp"

namespace safespec {

struct CartPoleState {
  double x = 0.0;          // cart position (m)
  double x_dot = 0.0;      // cart velocity (m/s)
  double theta = 0.0;      // pole angle from vertical (rad)
  double theta_dot = 0.0;  // angular velocity (rad/s)
};

struct ObstacleRect {
  double x_min, x_max;  // horizontal span (m)
  double y_min, y_max;  // height span above the track (m)
};

struct CartPoleWorld {
  // requirement thresholds
  double theta_max = 0.33;
  double theta_comf = 0.1;
  double x_lim = 2.4;
  double goal_pos = 1.5;
  double goal_eps = 0.1;
  std::optional<ObstacleRect> obstacle;

  // physics
  double mass_cart = 1.0;
  double mass_pole = 0.1;
  double half_length = 0.5;
  double gravity = 9.8;
  double force_limit = 10.0;
  double dt = 0.02;

  double start_noise = 0.05;  // reset draws each state component from U(-noise, noise)
};

// One dt of frictionless cart-pole dynamics, semi-implicit Euler. The force
// is clamped to the world's limit. Deterministic.
CartPoleState cartpole_step(const CartPoleWorld& w, const CartPoleState& s, double force);

// d_goal = |x - G|; d_obstacle = Euclidean distance from the pole tip to the
// obstacle rectangle, 0 inside (infinity stand-in when no obstacle).
struct Distances {
  double d_goal;
  double d_obstacle;
};
Distances distances(const CartPoleWorld& w, const CartPoleState& s);

// Total mechanical energy (kinetic + pole potential); conserved by the true
// dynamics when no force is applied.
double cartpole_energy(const CartPoleWorld& w, const CartPoleState& s);

class CartPoleEnv : public Env {
 public:
  explicit CartPoleEnv(CartPoleWorld world) : world_(world) {}

  std::vector<std::string> obs_names() const override;
  int core_dim() const override { return 4; }
  int action_dim() const override { return 1; }
  bool discrete_actions() const override { return false; }

  std::vector<double> reset(Rng& rng) override;
  std::vector<double> step(std::span<const double> action, Rng& rng) override;
  std::vector<double> observation_from_core(std::span<const double> core) const override;

  const CartPoleWorld& world() const { return world_; }
  const CartPoleState& state() const { return state_; }

 private:
  std::vector<double> observe() const;

  CartPoleWorld world_;
  CartPoleState state_;
};

// Built-in worlds: "cartpole-obstacle" is the full task with the hanging
// obstacle; "cartpole-balance" keeps the pole balanced near a goal at the
// track center, no obstacle.
CartPoleWorld cartpole_obstacle_world();
CartPoleWorld cartpole_balance_world();

// Task sources matching the built-in worlds' observation layout.
std::string cartpole_obstacle_task_text();
std::string cartpole_balance_task_text();

}  // namespace safespec
