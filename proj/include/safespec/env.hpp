#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "safespec/util.hpp"

namespace safespec {

// Simulation interface. Observations put the dynamic (integrated) state
// first; derived observables follow and are reconstructable from the core
// via observation_from_core. Instances hold per-episode state and are not
// shared across threads.
class Env {
 public:
  virtual ~Env() = default;

  virtual std::vector<std::string> obs_names() const = 0;
  virtual int obs_dim() const { return static_cast<int>(obs_names().size()); }
  virtual int core_dim() const = 0;
  virtual int action_dim() const = 0;
  virtual bool discrete_actions() const = 0;
  virtual int num_actions() const { return 0; }

  virtual std::vector<double> reset(Rng& rng) = 0;
  virtual std::vector<double> step(std::span<const double> action, Rng& rng) = 0;

  virtual std::vector<double> observation_from_core(std::span<const double> core) const = 0;
};

}  // namespace safespec
