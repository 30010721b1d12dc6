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

#include "lmbrl/envsuite.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace lmbrl {
namespace {

constexpr double kGravity = 9.81;
constexpr double kPi = std::numbers::pi;
// slope-car track height h(x) = kTrackAmplitude * (1 - cos(kTrackFrequency x))
constexpr double kTrackAmplitude = 0.6;
constexpr double kTrackFrequency = 1.0;

double Radians(double deg) { return deg * kPi / 180.0; }

// wrap to (-pi, pi]
double WrapAngle(double a) {
  double w = std::remainder(a, 2.0 * kPi);
  return w <= -kPi ? w + 2.0 * kPi : w;
}

double Acceleration(const EnvSpec& spec, double q, double v, double u) {
  const double tilt = Radians(spec.tilt_deg);
  switch (spec.family) {
    case EnvFamily::kTiltedPendulum:
      // m l^2 q'' = m g l sin(q - tilt) - b q' + u with l = 1, q = 0 upright
      return (spec.mass * kGravity * std::sin(q - tilt) - spec.friction * v +
              u) /
             spec.mass;
    case EnvFamily::kSlopeCar: {
      const double slope =
          kTrackAmplitude * kTrackFrequency * std::sin(kTrackFrequency * q);
      return kGravity * (std::sin(tilt) - std::cos(tilt) * slope) +
             (u - spec.friction * v) / spec.mass;
    }
  }
  return 0.0;
}

}  // namespace

std::string FamilyName(EnvFamily family) {
  return family == EnvFamily::kTiltedPendulum ? "tilted-pendulum" : "slope-car";
}

EnvFamily ParseFamily(const std::string& name) {
  if (name == "tilted-pendulum") return EnvFamily::kTiltedPendulum;
  if (name == "slope-car") return EnvFamily::kSlopeCar;
  throw std::invalid_argument("unknown environment family '" + name + "'");
}

EnvSpec EnvSpec::Pendulum(double tilt_deg, int env_id) {
  EnvSpec s;
  s.family = EnvFamily::kTiltedPendulum;
  s.env_id = env_id;
  s.tilt_deg = tilt_deg;
  return s;
}

EnvSpec EnvSpec::SlopeCar(double tilt_deg, int env_id) {
  EnvSpec s;
  s.family = EnvFamily::kSlopeCar;
  s.env_id = env_id;
  s.tilt_deg = tilt_deg;
  s.friction = 0.2;
  s.action_low = -5.0;
  s.action_high = 5.0;
  return s;
}

void EnvSpec::Validate() const {
  if (!(tilt_deg >= -30.0 && tilt_deg <= 30.0)) {
    throw std::invalid_argument("env spec: tilt must lie in [-30, 30] degrees");
  }
  if (!(dt > 0.0) || episode_length < 1 || !(integration_step > 0.0) || !(mass > 0.0) ||
      !(action_low < action_high) || !(process_noise >= 0.0) ||
      !(init_noise >= 0.0) || !(friction >= 0.0)) {
    throw std::invalid_argument("env spec: invalid physical parameters");
  }
}

int EnvSpec::observation_dim() const {
  return family == EnvFamily::kTiltedPendulum ? 3 : 2;
}

ActionBounds EnvSpec::bounds() const {
  return {Eigen::VectorXd::Constant(1, action_low),
          Eigen::VectorXd::Constant(1, action_high)};
}

EnvState Reset(const EnvSpec& spec, Rng& rng) {
  spec.Validate();
  EnvState s;
  const double rest = spec.family == EnvFamily::kTiltedPendulum ? kPi : 0.0;
  s.physical[0] = rest + spec.init_noise * rng.Normal();
  s.physical[1] = spec.init_noise * rng.Normal();
  if (spec.family == EnvFamily::kTiltedPendulum) {
    s.physical[0] = WrapAngle(s.physical[0]);
  }
  s.step = 0;
  return s;
}

Eigen::VectorXd Observe(const EnvSpec& spec, const EnvState& state) {
  if (spec.family == EnvFamily::kTiltedPendulum) {
    return Eigen::Vector3d(std::sin(state.physical[0]),
                           std::cos(state.physical[0]), state.physical[1]);
  }
  return state.physical;
}

StepResult Step(const EnvSpec& spec, const EnvState& state,
                const Eigen::VectorXd& action, Rng& rng) {
  if (action.size() != 1) {
    throw std::invalid_argument("step: expected a 1-D action");
  }
  const double u = std::clamp(action[0], spec.action_low, spec.action_high);
  double q = state.physical[0];
  double v = state.physical[1];
  const int substeps =
      std::max(1, static_cast<int>(std::ceil(spec.dt / spec.integration_step - 1e-9)));
  const double h = spec.dt / substeps;
  for (int i = 0; i < substeps; ++i) {
    v += h * Acceleration(spec, q, v, u);
    q += h * v;
  }
  if (spec.process_noise > 0.0) v += spec.process_noise * rng.Normal();
  if (!std::isfinite(q) || !std::isfinite(v)) {
    throw std::runtime_error("step: non-finite state in " +
                             FamilyName(spec.family) + " at step " +
                             std::to_string(state.step));
  }
  if (spec.family == EnvFamily::kTiltedPendulum) q = WrapAngle(q);

  StepResult r;
  r.state.physical = {q, v};
  r.state.step = state.step + 1;
  r.reward = Reward(spec, Observe(spec, r.state), Eigen::VectorXd::Constant(1, u));
  return r;
}

BatchRewardFn RewardFunction(const EnvSpec& spec) {
  if (spec.family == EnvFamily::kTiltedPendulum) {
    return [](const Eigen::MatrixXd& next, const Eigen::MatrixXd& actions) {
      Eigen::VectorXd r(next.cols());
      for (Eigen::Index i = 0; i < next.cols(); ++i) {
        const double angle = std::atan2(next(0, i), next(1, i));
        r[i] = -(angle * angle + 0.1 * next(2, i) * next(2, i) +
                 0.001 * actions(0, i) * actions(0, i));
      }
      return r;
    };
  }
  const double dt = spec.dt;
  return [dt](const Eigen::MatrixXd& next, const Eigen::MatrixXd&) {
    return Eigen::VectorXd(next.row(1).transpose() * dt);
  };
}

double Reward(const EnvSpec& spec, const Eigen::VectorXd& next_observation,
              const Eigen::VectorXd& action) {
  return RewardFunction(spec)(next_observation, action)[0];
}

double PendulumEnergy(const EnvSpec& spec, const EnvState& state) {
  const double rel = state.physical[0] - Radians(spec.tilt_deg);
  return 0.5 * state.physical[1] * state.physical[1] +
         kGravity * std::cos(rel);
}

EnvSplit MakeSplit(SplitKind kind, const EnvSpec& prototype) {
  const std::vector<double> train_tilts =
      kind == SplitKind::kFiveTrain ? std::vector<double>{-12, -6, 0, 6, 12}
                                    : std::vector<double>{-6, 6};
  const std::vector<double> test_tilts = {-15, -9, -3, 3, 9, 15};
  EnvSplit split;
  for (size_t i = 0; i < train_tilts.size(); ++i) {
    EnvSpec s = prototype;
    s.tilt_deg = train_tilts[i];
    s.env_id = static_cast<int>(i);
    split.train.push_back(s);
  }
  for (size_t i = 0; i < test_tilts.size(); ++i) {
    EnvSpec s = prototype;
    s.tilt_deg = test_tilts[i];
    s.env_id = 100 + static_cast<int>(i);
    split.test.push_back(s);
  }
  return split;
}

DynamicEnvironment::DynamicEnvironment(EnvSpec before, EnvSpec after,
                                       int switch_step)
    : before_(std::move(before)), after_(std::move(after)),
      switch_step_(switch_step) {
  before_.Validate();
  after_.Validate();
  if (before_.family != after_.family) {
    throw std::invalid_argument("dynamic environment: families differ (" +
                                FamilyName(before_.family) + " vs " +
                                FamilyName(after_.family) + ")");
  }
  if (before_.dt != after_.dt || before_.action_low != after_.action_low ||
      before_.action_high != after_.action_high) {
    throw std::invalid_argument(
        "dynamic environment: specs differ in dt or action bounds");
  }
  if (switch_step < 0) {
    throw std::invalid_argument("dynamic environment: negative switch step");
  }
}

const EnvSpec& DynamicEnvironment::Active(int step) const {
  return step < switch_step_ ? before_ : after_;
}

EnvState DynamicEnvironment::Reset(Rng& rng) const {
  return lmbrl::Reset(Active(0), rng);
}

StepResult DynamicEnvironment::Step(const EnvState& state,
                                    const Eigen::VectorXd& action,
                                    Rng& rng) const {
  return lmbrl::Step(Active(state.step), state, action, rng);
}

}  // namespace lmbrl
