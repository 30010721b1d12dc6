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

#ifndef LMBRL_PLANNER_H_
#define LMBRL_PLANNER_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lmbrl/dynamics_model.h"
#include "lmbrl/latent.h"
#include "lmbrl/rng.h"

namespace lmbrl {

struct PlannerConfig {
  int population = 500;
  double elite_fraction = 0.1;
  int iterations = 5;
  int horizon = 25;
  int particles = 20;
  double variance_floor = 1e-3;
  // weight of the previous distribution when refitting
  double momentum = 0.1;
  uint64_t seed = 0;

  int num_elites() const;
  void Validate() const;
};

struct ActionBounds {
  Eigen::VectorXd low;
  Eigen::VectorXd high;

  int dim() const { return static_cast<int>(low.size()); }
  Eigen::MatrixXd Clip(const Eigen::MatrixXd& actions) const;
};

// Per-timestep independent Gaussians over actions; column t is step t.
struct CemDistribution {
  Eigen::MatrixXd mean;
  Eigen::MatrixXd variance;

  int horizon() const { return static_cast<int>(mean.cols()); }

  // zero mean, variance (range / 2)^2
  static CemDistribution Initial(const ActionBounds& bounds, int horizon);
  // Drops step 0 and appends the initial proposal at the end.
  CemDistribution Shifted(const ActionBounds& bounds) const;
};

// Rewards for a batch of transitions: columns of predicted next states and
// the actions that produced them.
using BatchRewardFn = std::function<Eigen::VectorXd(
    const Eigen::MatrixXd& next_states, const Eigen::MatrixXd& actions)>;

// Scores a population of action sequences; each is (action_dim x horizon).
using SequenceScorer =
    std::function<Eigen::VectorXd(std::span<const Eigen::MatrixXd> sequences)>;

// Per-timestep elite mean and population variance plus `variance_floor`,
// blended with `previous` by `momentum` when given.
CemDistribution RefitCem(std::span<const Eigen::MatrixXd> elites,
                         double variance_floor,
                         const CemDistribution* previous = nullptr,
                         double momentum = 0.0);

struct CemResult {
  CemDistribution distribution;
  Eigen::VectorXd first_action;
  // best score seen up to and including each iteration
  std::vector<double> best_scores;
  Eigen::MatrixXd best_sequence;
};

class PlanningError : public std::runtime_error {
 public:
  PlanningError(const std::string& what, Eigen::MatrixXd sequence)
      : std::runtime_error(what), sequence_(std::move(sequence)) {}
  const Eigen::MatrixXd& sequence() const { return sequence_; }

 private:
  Eigen::MatrixXd sequence_;
};

// Cross-entropy optimization of an action sequence. The best sequence found
// so far is carried into every population, so best_scores is
// non-decreasing. Throws PlanningError if every score is non-finite.
CemResult CemOptimize(const SequenceScorer& scorer, CemDistribution initial,
                      const ActionBounds& bounds, const PlannerConfig& config,
                      Rng& rng);

// Trajectory-sampling estimate of the expected return of each sequence.
// Every sequence gets `particles` particles starting at `state`; each
// particle draws one latent from `posterior` and one ensemble member, both
// fixed for the whole horizon, and is propagated by sampling the member's
// Gaussian at every step.
Eigen::VectorXd RolloutExpectedRewards(
    const DynamicsModel& model, const DiagGaussian* posterior,
    const Eigen::VectorXd& state, std::span<const Eigen::MatrixXd> sequences,
    int particles, const BatchRewardFn& reward, Rng& rng);

double RolloutExpectedReward(const DynamicsModel& model,
                             const DiagGaussian* posterior,
                             const Eigen::VectorXd& state,
                             const Eigen::MatrixXd& sequence, int particles,
                             const BatchRewardFn& reward, Rng& rng);

// One MPC decision: CEM over trajectory-sampling rollouts of `model` from
// `state`, starting from `initial` (or the default proposal).
CemResult CemPlan(const DynamicsModel& model, const DiagGaussian* posterior,
                  const Eigen::VectorXd& state, const BatchRewardFn& reward,
                  const ActionBounds& bounds, const PlannerConfig& config,
                  Rng& rng, const CemDistribution* initial = nullptr);

// Model-predictive controller: CEM over TS rollouts with warm starting.
class MpcPlanner {
 public:
  MpcPlanner(PlannerConfig config, ActionBounds bounds);

  const PlannerConfig& config() const { return config_; }
  const ActionBounds& bounds() const { return bounds_; }

  // Forget the warm start (call at episode start).
  void Reset();

  // First action of the final CEM distribution for the current state.
  Eigen::VectorXd Plan(const DynamicsModel& model,
                       const DiagGaussian* posterior,
                       const Eigen::VectorXd& state,
                       const BatchRewardFn& reward, Rng& rng);

 private:
  PlannerConfig config_;
  ActionBounds bounds_;
  std::optional<CemDistribution> previous_;
};

}  // namespace lmbrl

#endif  // LMBRL_PLANNER_H_
