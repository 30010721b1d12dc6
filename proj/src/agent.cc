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

#include "lmbrl/agent.h"

#include <fstream>
#include <stdexcept>
#include <string>

#include "json.hpp"

namespace lmbrl {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr int kSharedKey = 0;

json VectorJson(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd JsonVector(const json& j) {
  std::vector<double> v = j.get<std::vector<double>>();
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

Agent::Agent(AgentKind kind, const EnsembleConfig& model_config, int state_dim,
             int action_dim, const std::vector<int>& env_ids, Rng& rng)
    : kind_(kind),
      model_config_(model_config),
      state_dim_(state_dim),
      action_dim_(action_dim) {
  if (kind_ != AgentKind::kLatent) model_config_.latent_dim = 0;
  if (kind_ == AgentKind::kLatent && model_config_.latent_dim < 1) {
    throw std::invalid_argument("agent: latent agent needs latent_dim >= 1");
  }
  posteriors_ = PosteriorSet(model_config_.latent_dim);
  if (kind_ == AgentKind::kSpecialist) {
    for (int id : env_ids) {
      models_.emplace(id, Ensemble(model_config_, state_dim, action_dim, rng));
      data_.emplace(id, Dataset(state_dim, action_dim));
    }
  } else {
    models_.emplace(kSharedKey,
                    Ensemble(model_config_, state_dim, action_dim, rng));
    data_.emplace(kSharedKey, Dataset(state_dim, action_dim));
  }
  if (has_latent()) {
    for (int id : env_ids) posteriors_.Ensure(id);
  }
}

int Agent::Key(int env_id) const {
  if (kind_ != AgentKind::kSpecialist) return kSharedKey;
  if (models_.count(env_id) == 0) {
    throw std::out_of_range("specialist has no model for environment " +
                            std::to_string(env_id));
  }
  return env_id;
}

bool Agent::Knows(int env_id) const {
  return kind_ != AgentKind::kSpecialist || models_.count(env_id) > 0;
}

const Ensemble& Agent::model(int env_id) const { return models_.at(Key(env_id)); }
Ensemble& Agent::model(int env_id) { return models_.at(Key(env_id)); }
const Dataset& Agent::data(int env_id) const { return data_.at(Key(env_id)); }

int Agent::episodes_seen(int env_id) const {
  auto it = episodes_seen_.find(env_id);
  return it == episodes_seen_.end() ? 0 : it->second;
}

void Agent::AddData(const Dataset& transitions) {
  for (const Transition& t : transitions.transitions()) {
    data_.at(Key(t.env_id)).Append(t);
    if (has_latent()) posteriors_.Ensure(t.env_id);
  }
}

TrainReport Agent::Train(int env_id, Rng& rng) {
  const int key = Key(env_id);
  return models_.at(key).Train(data_.at(key),
                               has_latent() ? &posteriors_ : nullptr,
                               model_config_.train_rounds, rng);
}

void Agent::Save(const fs::path& dir) const {
  fs::create_directories(dir);
  json meta;
  meta["format"] = "lmbrl-agent";
  meta["version"] = 1;
  meta["kind"] = AgentName(kind_);
  meta["state_dim"] = state_dim_;
  meta["action_dim"] = action_dim_;
  meta["latent_dim"] = model_config_.latent_dim;
  std::vector<int> keys;
  for (const auto& [key, model] : models_) {
    keys.push_back(key);
    model.Save(dir / ("model_" + std::to_string(key)));
    std::ofstream out(dir / ("data_" + std::to_string(key) + ".log"));
    data_.at(key).Save(out);
    if (!out) {
      throw std::runtime_error("agent: failed to write data for model " +
                               std::to_string(key));
    }
  }
  meta["model_keys"] = keys;
  json posteriors = json::array();
  for (int id : posteriors_.env_ids()) {
    const DiagGaussian& q = posteriors_.at(id);
    posteriors.push_back({{"env_id", id},
                          {"mean", VectorJson(q.mean)},
                          {"logvar", VectorJson(q.logvar)}});
  }
  meta["posteriors"] = posteriors;
  json seen = json::array();
  for (const auto& [id, n] : episodes_seen_) seen.push_back({id, n});
  meta["episodes_seen"] = seen;
  std::ofstream out(dir / "agent.json");
  out << meta.dump(2) << "\n";
  if (!out) throw std::runtime_error("agent: failed to write " + dir.string());
}

Agent Agent::Load(const fs::path& dir) {
  std::ifstream in(dir / "agent.json");
  if (!in) throw std::runtime_error("agent: no agent.json in " + dir.string());
  json meta = json::parse(in);
  if (meta.value("format", "") != "lmbrl-agent" || meta.value("version", 0) != 1) {
    throw std::runtime_error("agent: unsupported checkpoint format");
  }
  Agent agent;
  agent.kind_ = ParseAgent(meta.at("kind"));
  agent.state_dim_ = meta.at("state_dim");
  agent.action_dim_ = meta.at("action_dim");
  for (int key : meta.at("model_keys").get<std::vector<int>>()) {
    agent.models_.emplace(key,
                          Ensemble::Load(dir / ("model_" + std::to_string(key))));
    std::ifstream data_in(dir / ("data_" + std::to_string(key) + ".log"));
    if (!data_in) {
      throw std::runtime_error("agent: missing data for model " +
                               std::to_string(key));
    }
    agent.data_.emplace(key, Dataset::Load(data_in));
  }
  if (agent.models_.empty()) throw std::runtime_error("agent: no models");
  agent.model_config_ = agent.models_.begin()->second.config();
  agent.posteriors_ = PosteriorSet(agent.model_config_.latent_dim);
  for (const auto& p : meta.at("posteriors")) {
    DiagGaussian q{JsonVector(p.at("mean")), JsonVector(p.at("logvar"))};
    q.Validate();
    agent.posteriors_.Set(p.at("env_id"), std::move(q));
  }
  for (const auto& s : meta.at("episodes_seen")) {
    agent.episodes_seen_[s.at(0).get<int>()] = s.at(1).get<int>();
  }
  return agent;
}

}  // namespace lmbrl
