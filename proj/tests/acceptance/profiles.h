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

#ifndef LMBRL_TESTS_ACCEPTANCE_PROFILES_H_
#define LMBRL_TESTS_ACCEPTANCE_PROFILES_H_

#include "lmbrl/config.h"

namespace lmbrl::testing {

// Desk-scale experiment profile used by the learning criteria. Mirrors
// configs/desk.json.
inline ExperimentConfig DeskProfile(AgentKind agent) {
  ExperimentConfig c;
  c.env = EnvSpec::Pendulum(0.0);
  c.env.episode_length = 100;
  c.env.dt = 0.1;
  c.split = SplitKind::kFiveTrain;
  c.agent = agent;
  c.episodes_per_env = 10;
  c.checkpoints = {3, 6, 10};
  c.seeds = {0, 1, 2, 3, 4};
  c.planner.population = 500;
  c.planner.elite_fraction = 0.1;
  c.planner.iterations = 2;
  c.planner.horizon = 10;
  c.planner.particles = 4;
  c.model.members = 5;
  c.model.hidden = {32, 32};
  c.model.latent_dim = agent == AgentKind::kLatent ? 2 : 0;
  c.model.batch_size = 64;
  c.model.train_unit = TrainUnit::kGradientSteps;
  c.model.train_rounds = 200;
  c.test_prior = TestPrior::kTrainingMoments;
  c.test_episodes = 2;
  c.baseline_rollouts = 50;
  return c;
}

}  // namespace lmbrl::testing

#endif  // LMBRL_TESTS_ACCEPTANCE_PROFILES_H_
