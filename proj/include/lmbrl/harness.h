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

#ifndef LMBRL_HARNESS_H_
#define LMBRL_HARNESS_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lmbrl/agent.h"
#include "lmbrl/config.h"
#include "lmbrl/envsuite.h"
#include "lmbrl/latent.h"
#include "lmbrl/results.h"

namespace lmbrl {

using LogFn = std::function<void(const std::string&)>;

struct EpisodeOptions {
  // uniform random actions instead of MPC
  bool random_policy = false;
  // online posterior update after every step
  bool adapt = false;
};

struct EpisodeOutcome {
  double reward = 0.0;
  Dataset transitions;
  std::vector<double> step_rewards;
  std::vector<Eigen::VectorXd> observations;
  std::vector<Eigen::VectorXd> actions;
  // posterior after the update at each step (adapting runs only)
  std::vector<DiagGaussian> posteriors;
  std::optional<DiagGaussian> final_posterior;
  int failed_updates = 0;
};

// Runs one episode. `model` may be null only with a random policy;
// `posterior` is null for agents without latents. Transitions are labelled
// with `env_id`.
EpisodeOutcome RunEpisode(const Ensemble* model,
                          std::optional<DiagGaussian> posterior,
                          const DynamicEnvironment& env, int env_id,
                          const ExperimentConfig& config,
                          const EpisodeOptions& options, Rng& env_rng,
                          Rng& agent_rng);

// Deterministic stream for environment noise, shared by every agent kind so
// that all agents face identical initial states and perturbations.
Rng EnvironmentRng(uint64_t seed, int env_id, int episode);

// Thrown when training cannot persist a checkpoint; carries the records
// produced so far.
class TrainingAborted : public std::runtime_error {
 public:
  TrainingAborted(const std::string& what, ResultSet partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const ResultSet& partial() const { return partial_; }

 private:
  ResultSet partial_;
};

struct TrainingOutput {
  ResultSet results;
  Agent agent;
  // agent snapshots keyed by per-environment episode count
  std::map<int, Agent> checkpoints;
};

// Learning loop for one agent and seed. Episode m of every training
// environment is run before episode m + 1 of any (round-robin). The first
// episode per environment uses random actions; every later one is preceded
// by a training round (unless config.learn is false). With
// `checkpoint_root`, snapshots are also written to
// <root>/<agent>/seed_<seed>/episode_<m>.
TrainingOutput RunTraining(const ExperimentConfig& config, uint64_t seed,
                           const std::filesystem::path* checkpoint_root = nullptr,
                           const LogFn& log = nullptr);

std::filesystem::path CheckpointDir(const std::filesystem::path& root,
                                    AgentKind agent, uint64_t seed, int episode);

struct AdaptationOptions {
  // online posterior updates; requires a latent agent
  bool adapt = true;
  // start from the learned posterior of each env instead of the test prior
  bool start_from_learned = false;
  Phase phase = Phase::kTest;
  bool record_steps = false;
  // overrides the record agent name (defaults to the agent kind, with a
  // "-frozen" suffix for a latent agent that does not adapt)
  std::string label;
};

// Runs config.test_episodes episodes per environment with the model frozen.
// The latent posterior starts from the standard prior at every episode and,
// when adapting, is updated online after every step.
// Throws std::invalid_argument if adaptation is requested for an agent
// without latents.
ResultSet RunTestAdaptation(const Agent& agent, const std::vector<EnvSpec>& envs,
                            const ExperimentConfig& config, uint64_t seed,
                            const AdaptationOptions& options,
                            const LogFn& log = nullptr);

// Environment id used for the switching environment.
inline constexpr int kDynamicEnvId = 200;

DynamicEnvironment MakeDynamicEnvironment(const ExperimentConfig& config);

// Test adaptation on the switching environment (phase kDynamic, with step
// records).
ResultSet RunDynamicAdaptation(const Agent& agent,
                               const ExperimentConfig& config, uint64_t seed,
                               bool adapt, const LogFn& log = nullptr);

// Mean episode reward of a uniform random policy, per environment.
std::map<int, double> RandomPolicyBaselines(const std::vector<EnvSpec>& envs,
                                            int rollouts, uint64_t seed);

// B_k from random rollouts and R_k from the best seed-averaged mean reward in
// `records` for the given phase.
std::map<int, Baseline> MakeBaselines(const std::map<int, double>& random_means,
                                      const std::vector<RewardRecord>& records,
                                      Phase phase);

}  // namespace lmbrl

#endif  // LMBRL_HARNESS_H_
