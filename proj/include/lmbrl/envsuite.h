// Copyright 2026 The lmbrl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LMBRL_ENVSUITE_H_
#define LMBRL_ENVSUITE_H_

#include <string>
#include <vector>

#include <Eigen/Core>

#include "lmbrl/planner.h"
#include "lmbrl/rng.h"

namespace lmbrl {

enum class EnvFamily { kTiltedPendulum, kSlopeCar };

std::string FamilyName(EnvFamily family);
EnvFamily ParseFamily(const std::string& name);

// One environment instance. Hidden parameters (tilt, mass, friction) are
// never exposed through observations.
struct EnvSpec {
  EnvFamily family = EnvFamily::kTiltedPendulum;
  int env_id = 0;
  // gravity direction, degrees; positive tilts forward
  double tilt_deg = 0.0;
  double mass = 1.0;
  // pendulum: viscous joint damping b; slope-car: velocity damping
  double friction = 0.05;
  int episode_length = 200;
  double action_low = -2.0;
  double action_high = 2.0;
  double dt = 0.05;
  // std of the Gaussian velocity perturbation added each step
  double process_noise = 1e-3;
  // std of the initial-state perturbation
  double init_noise = 0.01;
  // longest integration sub-interval; each step uses ceil(dt / this)
  double integration_step = 1e-4;

  static EnvSpec Pendulum(double tilt_deg, int env_id = 0);
  static EnvSpec SlopeCar(double tilt_deg, int env_id = 0);

  void Validate() const;
  int observation_dim() const;
  int action_dim() const { return 1; }
  ActionBounds bounds() const;
};

// Physical state: pendulum (angle from world-upright, angular velocity);
// slope-car (position, velocity).
struct EnvState {
  Eigen::Vector2d physical = Eigen::Vector2d::Zero();
  int step = 0;
};

struct StepResult {
  EnvState state;
  double reward = 0.0;
};

EnvState Reset(const EnvSpec& spec, Rng& rng);

// Pendulum: (sin angle, cos angle, angular velocity). Slope-car: (x, v).
Eigen::VectorXd Observe(const EnvSpec& spec, const EnvState& state);

// Semi-implicit Euler on sub-intervals no longer than integration_step; the
// process-noise draw is taken from `rng` when spec.process_noise > 0.
// Actions are clipped.
StepResult Step(const EnvSpec& spec, const EnvState& state,
                const Eigen::VectorXd& action, Rng& rng);

// Reward as a function of the next observation and the action. Shared by the
// simulator and the planner, so it reads only observable quantities.
// Pendulum: -(angle^2 + 0.1 omega^2 + 0.001 u^2), angle measured to the
// world upright. Slope-car: forward progress v * dt.
BatchRewardFn RewardFunction(const EnvSpec& spec);
double Reward(const EnvSpec& spec, const Eigen::VectorXd& next_observation,
              const Eigen::VectorXd& action);

// Total mechanical energy per unit mass in the tilted frame (pendulum).
double PendulumEnergy(const EnvSpec& spec, const EnvState& state);

enum class SplitKind { kFiveTrain, kTwoTrain };

struct EnvSplit {
  std::vector<EnvSpec> train;
  std::vector<EnvSpec> test;
};

// Five-environment split: train tilts {-12,-6,0,6,12}, test
// {-15,-9,-3,3,9,15}. Two-environment split trains on {-6, 6} only. Train
// env ids are 0..K-1 and test ids continue from 100.
EnvSplit MakeSplit(SplitKind kind, const EnvSpec& prototype);

// Environment whose hidden parameters switch from `before` to `after` at
// step `switch_step`. Observations do not reveal the switch.
class DynamicEnvironment {
 public:
  DynamicEnvironment(EnvSpec before, EnvSpec after, int switch_step);

  const EnvSpec& before() const { return before_; }
  const EnvSpec& after() const { return after_; }
  int switch_step() const { return switch_step_; }
  // spec governing the transition taken at `step`
  const EnvSpec& Active(int step) const;

  EnvState Reset(Rng& rng) const;
  StepResult Step(const EnvState& state, const Eigen::VectorXd& action,
                  Rng& rng) const;

 private:
  EnvSpec before_;
  EnvSpec after_;
  int switch_step_;
};

}  // namespace lmbrl

#endif  // LMBRL_ENVSUITE_H_
