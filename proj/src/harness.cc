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

#include "lmbrl/harness.h"

#include <algorithm>
#include <span>
#include <sstream>
#include <utility>

#include "lmbrl/inference.h"
#include "lmbrl/planner.h"

namespace lmbrl {
namespace {

uint64_t Mix(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

uint64_t Combine(uint64_t seed, int a, int b, uint64_t salt) {
  return Mix(Mix(Mix(seed ^ salt) + static_cast<uint64_t>(a)) +
             static_cast<uint64_t>(b));
}

constexpr uint64_t kEnvSalt = 0x656e76ULL;
constexpr uint64_t kAgentSalt = 0x6167656e74ULL;
constexpr int kTestEpisodeOffset = 1000;

void Log(const LogFn& log, const std::string& line) {
  if (log) log(line);
}

PosteriorRecord MakePosteriorRecord(const std::string& agent,
                                    const EnvSpec& spec, uint64_t seed,
                                    int episode, int t, const DiagGaussian& q) {
  return {agent, spec.env_id, spec.tilt_deg, seed, episode, t, q.mean,
          q.variance()};
}

}  // namespace

Rng EnvironmentRng(uint64_t seed, int env_id, int episode) {
  return Rng(Combine(seed, env_id, episode, kEnvSalt));
}

EpisodeOutcome RunEpisode(const Ensemble* model,
                          std::optional<DiagGaussian> posterior,
                          const DynamicEnvironment& env, int env_id,
                          const ExperimentConfig& config,
                          const EpisodeOptions& options, Rng& env_rng,
                          Rng& agent_rng) {
  if (model == nullptr && !options.random_policy) {
    throw std::invalid_argument("episode: MPC needs a model");
  }
  if (options.adapt && !posterior) {
    throw std::invalid_argument("episode: adaptation needs a posterior");
  }
  const EnvSpec& spec = env.before();
  const ActionBounds bounds = spec.bounds();
  const BatchRewardFn reward = RewardFunction(spec);
  MpcPlanner planner(config.planner, bounds);

  EpisodeOutcome out;
  out.transitions = Dataset(spec.observation_dim(), spec.action_dim());
  EnvState state = env.Reset(env_rng);
  for (int t = 0; t < spec.episode_length; ++t) {
    Eigen::VectorXd obs = Observe(env.Active(t), state);
    Eigen::VectorXd action(spec.action_dim());
    if (options.random_policy) {
      for (int i = 0; i < action.size(); ++i) {
        action[i] = agent_rng.Uniform(bounds.low[i], bounds.high[i]);
      }
    } else {
      action = planner.Plan(*model, posterior ? &*posterior : nullptr, obs,
                            reward, agent_rng);
    }
    action = bounds.Clip(action);
    StepResult step = env.Step(state, action, env_rng);
    state = step.state;
    Eigen::VectorXd next_obs = Observe(env.Active(t), state);
    Transition tr{env_id, obs, action, next_obs};
    out.reward += step.reward;
    out.step_rewards.push_back(step.reward);
    out.observations.push_back(obs);
    out.actions.push_back(action);
    if (options.adapt) {
      OnlineUpdateResult update = OnlineUpdate(
          *model, *posterior, std::span<const Transition>(&tr, 1),
          config.online, agent_rng);
      if (update.ok) {
        posterior = std::move(update.posterior);
      } else {
        ++out.failed_updates;
      }
      out.posteriors.push_back(*posterior);
    }
    out.transitions.Append(std::move(tr));
  }
  out.final_posterior = std::move(posterior);
  return out;
}

std::filesystem::path CheckpointDir(const std::filesystem::path& root,
                                    AgentKind agent, uint64_t seed,
                                    int episode) {
  return root / AgentName(agent) / ("seed_" + std::to_string(seed)) /
         ("episode_" + std::to_string(episode));
}

TrainingOutput RunTraining(const ExperimentConfig& config, uint64_t seed,
                           const std::filesystem::path* checkpoint_root,
                           const LogFn& log) {
  config.Validate();
  const EnvSplit split = config.Split();
  std::vector<int> ids;
  for (const EnvSpec& spec : split.train) ids.push_back(spec.env_id);

  Rng master(seed);
  Rng init_rng = master.Split();
  Rng agent_rng = master.Split();
  const EnvSpec& proto = split.train.front();

  TrainingOutput out;
  out.agent = Agent(config.agent, config.model, proto.observation_dim(),
                    proto.action_dim(), ids, init_rng);
  Agent& agent = out.agent;
  const std::string name = AgentName(config.agent);

  for (int m = 1; m <= config.episodes_per_env; ++m) {
    for (const EnvSpec& spec : split.train) {
      const int id = spec.env_id;
      const bool random = m == 1;
      if (!random && config.learn) agent.Train(id, agent_rng);
      std::optional<DiagGaussian> q;
      if (agent.has_latent()) q = agent.posteriors().at(id);
      EpisodeOptions options;
      options.random_policy = random;
      options.adapt = agent.has_latent() && !random;
      DynamicEnvironment env(spec, spec, spec.episode_length);
      Rng env_rng = EnvironmentRng(seed, id, m);
      EpisodeOutcome episode =
          RunEpisode(random ? nullptr : &agent.model(id), std::move(q), env,
                     id, config, options, env_rng, agent_rng);
      agent.AddData(episode.transitions);
      agent.CountEpisode(id);
      if (agent.has_latent() && episode.final_posterior) {
        agent.posteriors().Set(id, *episode.final_posterior);
        out.results.posteriors.push_back(
            MakePosteriorRecord(name, spec, seed, m, spec.episode_length,
                                *episode.final_posterior));
      }
      RewardRecord record;
      record.agent = name;
      record.env_id = id;
      record.tilt_deg = spec.tilt_deg;
      record.seed = seed;
      record.episode = m;
      record.reward = episode.reward;
      record.phase = Phase::kTrain;
      out.results.rewards.push_back(record);
      std::ostringstream line;
      line << name << " seed " << seed << " env " << id << " episode " << m
           << " reward " << episode.reward;
      Log(log, line.str());
    }
    if (std::find(config.checkpoints.begin(), config.checkpoints.end(), m) !=
        config.checkpoints.end()) {
      out.checkpoints.insert_or_assign(m, agent);
      if (checkpoint_root != nullptr) {
        const auto dir = CheckpointDir(*checkpoint_root, config.agent, seed, m);
        try {
          agent.Save(dir);
        } catch (const std::exception& e) {
          throw TrainingAborted("checkpoint write failed at " + dir.string() +
                                    ": " + e.what(),
                                out.results);
        }
      }
    }
  }
  if (agent.has_latent()) {
    for (const EnvSpec& spec : split.train) {
      const DiagGaussian& q = agent.posteriors().at(spec.env_id);
      out.results.embeddings.push_back(
          {name, spec.env_id, spec.tilt_deg, seed, "train", q.mean,
           q.variance()});
    }
  }
  return out;
}

namespace {

ResultSet RunFrozen(const Agent& agent,
                    const std::vector<std::pair<DynamicEnvironment, int>>& envs,
                    const ExperimentConfig& config, uint64_t seed,
                    const AdaptationOptions& options, const LogFn& log) {
  if (options.adapt && !agent.has_latent()) {
    throw std::invalid_argument("adaptation requested for the " +
                                AgentName(agent.kind()) +
                                " agent, which has no latent variables");
  }
  std::string name = options.label;
  if (name.empty()) {
    name = AgentName(agent.kind());
    if (agent.has_latent() && !options.adapt) name += "-frozen";
  }
  ResultSet out;
  for (const auto& [env, id] : envs) {
    if (!agent.Knows(id)) {
      throw std::invalid_argument(AgentName(agent.kind()) +
                                  " agent has no model for environment " +
                                  std::to_string(id));
    }
    const EnvSpec& shown = env.after();
    std::optional<DiagGaussian> last;
    for (int ep = 1; ep <= config.test_episodes; ++ep) {
      std::optional<DiagGaussian> q;
      if (agent.has_latent()) {
        if (options.start_from_learned && agent.posteriors().Contains(id)) {
          q = agent.posteriors().at(id);
        } else if (config.test_prior == TestPrior::kTrainingMoments) {
          q = agent.posteriors().MomentMatch();
        } else {
          q = DiagGaussian::Standard(agent.model_config().latent_dim);
        }
      }
      Rng env_rng = EnvironmentRng(seed, id, kTestEpisodeOffset + ep);
      Rng agent_rng(Combine(seed, id, kTestEpisodeOffset + ep, kAgentSalt));
      EpisodeOptions episode_options;
      episode_options.adapt = options.adapt;
      EpisodeOutcome episode =
          RunEpisode(&agent.model(id), std::move(q), env, id, config,
                     episode_options, env_rng, agent_rng);
      RewardRecord record;
      record.agent = name;
      record.env_id = id;
      record.tilt_deg = shown.tilt_deg;
      record.seed = seed;
      record.episode = ep;
      record.reward = episode.reward;
      record.phase = options.phase;
      out.rewards.push_back(record);
      for (size_t t = 0; t < episode.posteriors.size(); ++t) {
        PosteriorRecord p = MakePosteriorRecord(
            name, shown, seed, ep, static_cast<int>(t) + 1,
            episode.posteriors[t]);
        p.env_id = id;
        out.posteriors.push_back(std::move(p));
      }
      if (options.record_steps) {
        for (size_t t = 0; t < episode.step_rewards.size(); ++t) {
          out.steps.push_back({name, id, shown.tilt_deg, seed, ep,
                               static_cast<int>(t), episode.observations[t],
                               episode.actions[t], episode.step_rewards[t]});
        }
      }
      if (options.adapt) last = episode.final_posterior;
      std::ostringstream line;
      line << name << " seed " << seed << " " << PhaseName(options.phase)
           << " env " << id << " episode " << ep << " reward "
           << episode.reward;
      Log(log, line.str());
    }
    if (last) {
      out.embeddings.push_back({name, id, shown.tilt_deg, seed, "test",
                                last->mean, last->variance()});
    }
  }
  return out;
}

}  // namespace

ResultSet RunTestAdaptation(const Agent& agent, const std::vector<EnvSpec>& envs,
                            const ExperimentConfig& config, uint64_t seed,
                            const AdaptationOptions& options, const LogFn& log) {
  std::vector<std::pair<DynamicEnvironment, int>> wrapped;
  for (const EnvSpec& spec : envs) {
    wrapped.emplace_back(DynamicEnvironment(spec, spec, spec.episode_length),
                         spec.env_id);
  }
  return RunFrozen(agent, wrapped, config, seed, options, log);
}

DynamicEnvironment MakeDynamicEnvironment(const ExperimentConfig& config) {
  EnvSpec before = config.env;
  before.tilt_deg = config.dynamic_tilt_before;
  before.env_id = kDynamicEnvId;
  EnvSpec after = config.env;
  after.tilt_deg = config.dynamic_tilt_after;
  after.env_id = kDynamicEnvId;
  return DynamicEnvironment(before, after, config.ResolvedSwitchStep());
}

ResultSet RunDynamicAdaptation(const Agent& agent,
                               const ExperimentConfig& config, uint64_t seed,
                               bool adapt, const LogFn& log) {
  AdaptationOptions options;
  options.adapt = adapt;
  options.phase = Phase::kDynamic;
  options.record_steps = true;
  return RunFrozen(agent, {{MakeDynamicEnvironment(config), kDynamicEnvId}},
                   config, seed, options, log);
}

std::map<int, double> RandomPolicyBaselines(const std::vector<EnvSpec>& envs,
                                            int rollouts, uint64_t seed) {
  if (rollouts < 1) throw std::invalid_argument("baselines: rollouts < 1");
  ExperimentConfig config;
  EpisodeOptions options;
  options.random_policy = true;
  std::map<int, double> out;
  for (const EnvSpec& spec : envs) {
    DynamicEnvironment env(spec, spec, spec.episode_length);
    double total = 0.0;
    for (int r = 0; r < rollouts; ++r) {
      Rng env_rng(Combine(seed, spec.env_id, r, kEnvSalt ^ 0xb5));
      Rng agent_rng(Combine(seed, spec.env_id, r, kAgentSalt ^ 0xb5));
      total += RunEpisode(nullptr, std::nullopt, env, spec.env_id, config,
                          options, env_rng, agent_rng)
                   .reward;
    }
    out[spec.env_id] = total / rollouts;
  }
  return out;
}

std::map<int, Baseline> MakeBaselines(const std::map<int, double>& random_means,
                                      const std::vector<RewardRecord>& records,
                                      Phase phase) {
  const std::map<int, double> best = BestMeanRewards(records, phase);
  std::map<int, Baseline> out;
  for (const auto& [id, b] : random_means) {
    auto it = best.find(id);
    if (it == best.end()) continue;
    out[id] = {b, it->second};
  }
  return out;
}

}  // namespace lmbrl
