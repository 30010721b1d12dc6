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

#ifndef LMBRL_AGENT_H_
#define LMBRL_AGENT_H_

#include <filesystem>
#include <map>
#include <vector>

#include "lmbrl/config.h"
#include "lmbrl/ensemble.h"
#include "lmbrl/latent.h"
#include "lmbrl/rng.h"

namespace lmbrl {

// Learned state of one agent: its dynamics model(s), collected data and,
// for the latent agent, one posterior per environment.
//
// The specialist keeps an independent model and dataset per environment.
// Generalist and latent agents share one model (key 0) over all
// environments; only the latent agent feeds e_k to it.
class Agent {
 public:
  Agent() = default;
  Agent(AgentKind kind, const EnsembleConfig& model_config, int state_dim,
        int action_dim, const std::vector<int>& env_ids, Rng& rng);

  AgentKind kind() const { return kind_; }
  bool has_latent() const { return kind_ == AgentKind::kLatent; }
  int state_dim() const { return state_dim_; }
  int action_dim() const { return action_dim_; }
  const EnsembleConfig& model_config() const { return model_config_; }

  // Throws std::out_of_range if the agent has no model for `env_id` (a
  // specialist asked about an environment it was not built for).
  const Ensemble& model(int env_id) const;
  Ensemble& model(int env_id);
  const Dataset& data(int env_id) const;
  bool Knows(int env_id) const;

  PosteriorSet& posteriors() { return posteriors_; }
  const PosteriorSet& posteriors() const { return posteriors_; }

  int episodes_seen(int env_id) const;
  void CountEpisode(int env_id) { ++episodes_seen_[env_id]; }

  void AddData(const Dataset& transitions);

  // One training round of the model responsible for `env_id` on all of that
  // model's data.
  TrainReport Train(int env_id, Rng& rng);

  // Directory with agent.json, model_<key>/ and data_<key>.log.
  void Save(const std::filesystem::path& dir) const;
  static Agent Load(const std::filesystem::path& dir);

 private:
  int Key(int env_id) const;

  AgentKind kind_ = AgentKind::kLatent;
  EnsembleConfig model_config_;
  int state_dim_ = 0;
  int action_dim_ = 0;
  std::map<int, Ensemble> models_;
  std::map<int, Dataset> data_;
  PosteriorSet posteriors_;
  std::map<int, int> episodes_seen_;
};

}  // namespace lmbrl

#endif  // LMBRL_AGENT_H_
