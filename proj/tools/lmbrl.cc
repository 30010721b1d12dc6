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

// Command-line front end: train, adapt, eval, export, selftest.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lmbrl/agent.h"
#include "lmbrl/config.h"
#include "lmbrl/harness.h"
#include "lmbrl/inference.h"
#include "lmbrl/nnet.h"
#include "lmbrl/results.h"
#include "lmbrl/tape.h"

namespace lmbrl {
namespace {

namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitIncomplete = 2;

void Log(const std::string& line) {
  std::fprintf(stderr, "%s\n", line.c_str());
  std::fflush(stderr);
}

// Relative output paths are placed under $LMBRL_OUTPUT_ROOT when it is set.
fs::path ResolveOutput(const std::string& requested) {
  fs::path out(requested);
  const char* root = std::getenv("LMBRL_OUTPUT_ROOT");
  if (root != nullptr && *root != '\0' && out.is_relative()) return fs::path(root) / out;
  return out;
}

ExportFormat ParseFormat(const std::string& name) {
  if (name == "csv") return ExportFormat::kCsv;
  if (name == "jsonl") return ExportFormat::kJsonl;
  if (name == "all") return ExportFormat::kAll;
  throw std::invalid_argument("unknown format '" + name + "'");
}

struct CommonOptions {
  std::string config;
  std::vector<uint64_t> seeds;
  std::string agent;
  std::string out;
};

void AddCommon(CLI::App* cmd, CommonOptions* o, bool with_agent) {
  cmd->add_option("-c,--config", o->config, "experiment config (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("-s,--seeds", o->seeds, "seed list, overrides the config")->delimiter(',');
  if (with_agent) {
    cmd->add_option("-a,--agent", o->agent, "agent kind: specialist, generalist, latent");
  }
  cmd->add_option("-o,--out", o->out, "output directory (default: config output_dir)");
}

ExperimentConfig LoadConfig(const CommonOptions& o) {
  ExperimentConfig c = o.config.empty() ? ExperimentConfig() : ExperimentConfig::Load(o.config);
  if (!o.seeds.empty()) c.seeds = o.seeds;
  if (!o.agent.empty()) {
    c.agent = ParseAgent(o.agent);
    if (c.agent == AgentKind::kLatent && c.model.latent_dim < 1) c.model.latent_dim = 2;
  }
  c.Validate();
  return c;
}

fs::path OutputDir(const CommonOptions& o, const ExperimentConfig& c) {
  return ResolveOutput(o.out.empty() ? c.output_dir : o.out);
}

int Train(const CommonOptions& o, const std::string& format) {
  const ExperimentConfig c = LoadConfig(o);
  const fs::path out = OutputDir(o, c);
  const fs::path checkpoints = out / "checkpoints";
  ResultSet all;
  for (uint64_t seed : c.seeds) {
    try {
      TrainingOutput run = RunTraining(c, seed, &checkpoints, Log);
      all.Append(run.results);
    } catch (const TrainingAborted& e) {
      Log(std::string("training aborted: ") + e.what());
      all.Append(e.partial());
      ExportResults(all, c, out, ParseFormat(format));
      return kExitIncomplete;
    }
  }
  ExportResults(all, c, out, ParseFormat(format));
  Log("wrote " + out.string());
  return kExitOk;
}

struct AdaptFlags {
  std::string checkpoint;
  bool dynamic = false;
  bool frozen = false;
  bool from_learned = false;
  bool steps = false;
  std::string test_prior;
};

int Adapt(const CommonOptions& o, const AdaptFlags& f, const std::string& format) {
  ExperimentConfig c = LoadConfig(o);
  if (!f.test_prior.empty()) c.test_prior = ParseTestPrior(f.test_prior);
  const Agent agent = Agent::Load(f.checkpoint);
  const fs::path out = OutputDir(o, c);
  ResultSet all;
  for (uint64_t seed : c.seeds) {
    if (f.dynamic) {
      all.Append(RunDynamicAdaptation(agent, c, seed, !f.frozen, Log));
    } else {
      AdaptationOptions options;
      options.adapt = !f.frozen && agent.has_latent();
      options.start_from_learned = f.from_learned;
      options.record_steps = f.steps;
      std::vector<EnvSpec> envs;
      for (const EnvSpec& s : c.Split().test) {
        if (agent.Knows(s.env_id)) envs.push_back(s);
      }
      if (envs.empty()) {
        Log("the " + AgentName(agent.kind()) + " agent has no model for any test environment");
        return kExitError;
      }
      all.Append(RunTestAdaptation(agent, envs, c, seed, options, Log));
    }
  }
  ExportResults(all, c, out, ParseFormat(format));
  Log("wrote " + out.string());
  return kExitOk;
}

ExperimentConfig ManifestConfig(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw std::runtime_error("no manifest.json in " + dir.string());
  return ExperimentConfig::FromJson(nlohmann::json::parse(in).at("config"));
}

// Merges result directories, normalizes rewards and prints a summary.
int Eval(const std::vector<std::string>& inputs, const CommonOptions& o,
         const std::string& format, int rollouts) {
  ResultSet all;
  std::optional<ExperimentConfig> config;
  for (const std::string& in : inputs) {
    all.Append(LoadResults(in));
    ExperimentConfig c = ManifestConfig(in);
    if (!config) config = c;
  }
  if (!o.config.empty()) config = ExperimentConfig::Load(o.config);
  if (!config) throw std::runtime_error("eval: no inputs");
  if (rollouts > 0) config->baseline_rollouts = rollouts;

  std::vector<EnvSpec> envs;
  const EnvSplit split = config->Split();
  envs.insert(envs.end(), split.train.begin(), split.train.end());
  envs.insert(envs.end(), split.test.begin(), split.test.end());
  const std::map<int, double> random =
      RandomPolicyBaselines(envs, config->baseline_rollouts, config->seeds.front());

  // dynamic-phase rewards stay raw: there is no random baseline for the switch
  std::vector<RewardRecord> rewards;
  for (Phase phase : {Phase::kTrain, Phase::kTest, Phase::kDynamic}) {
    std::vector<RewardRecord> subset;
    for (const auto& r : all.rewards) {
      if (r.phase == phase) subset.push_back(r);
    }
    if (phase != Phase::kDynamic) {
      const std::map<int, Baseline> baselines = MakeBaselines(random, subset, phase);
      for (auto& r : subset) {
        const auto it = baselines.find(r.env_id);
        if (it != baselines.end() && it->second.reference_mean != it->second.random_mean) {
          r = NormalizeRewards({r}, baselines).front();
        }
      }
    }
    rewards.insert(rewards.end(), subset.begin(), subset.end());
  }
  all.rewards = rewards;

  using Key = std::tuple<std::string, Phase>;
  std::map<Key, int> last_episode;
  for (const auto& r : all.rewards) {
    int& e = last_episode[{r.agent, r.phase}];
    e = std::max(e, r.episode);
  }
  std::map<Key, std::vector<double>> raw, norm;
  for (const auto& r : all.rewards) {
    const Key key{r.agent, r.phase};
    if (r.episode != last_episode[key]) continue;
    raw[key].push_back(r.reward);
    if (std::isfinite(r.normalized)) norm[key].push_back(r.normalized);
  }
  auto mean = [](const std::vector<double>& v) {
    double total = 0.0;
    for (double x : v) total += x;
    return total / static_cast<double>(v.size());
  };
  std::printf("%-18s %-8s %7s %12s %26s %12s %22s\n", "agent", "phase", "episode",
              "reward", "95% CI", "normalized", "95% CI");
  for (const auto& [key, values] : raw) {
    auto [lo, hi] = BootstrapCi(values);
    std::printf("%-18s %-8s %7d %12.3f   [%10.3f, %10.3f]", std::get<0>(key).c_str(),
                PhaseName(std::get<1>(key)).c_str(), last_episode[key], mean(values), lo,
                hi);
    if (auto it = norm.find(key); it != norm.end()) {
      auto [nlo, nhi] = BootstrapCi(it->second);
      std::printf(" %12.4f   [%8.4f, %8.4f]", mean(it->second), nlo, nhi);
    }
    std::printf("\n");
  }
  if (!o.out.empty()) {
    const fs::path out = ResolveOutput(o.out);
    ExportResults(all, *config, out, ParseFormat(format));
    Log("wrote " + out.string());
  }
  return kExitOk;
}

int Export(const std::string& input, const std::string& out, const std::string& format) {
  const ResultSet rs = LoadResults(input);
  const ExperimentConfig c = ManifestConfig(input);
  const fs::path dest = ResolveOutput(out);
  for (const auto& p : ExportResults(rs, c, dest, ParseFormat(format))) {
    std::printf("%s\n", p.string().c_str());
  }
  return kExitOk;
}

// Quick end-to-end health check on a tiny problem.
int SelfTest() {
  int failures = 0;
  auto check = [&](const std::string& name, bool ok) {
    std::printf("%s %s\n", ok ? "PASS" : "FAIL", name.c_str());
    failures += !ok;
  };

  Rng rng(1);
  const std::vector<int> widths = {6};
  NetParams p = NetParams::Random(3, widths, 2, rng);
  const Eigen::MatrixXd x = rng.NormalMatrix(3, 4), y = rng.NormalMatrix(2, 4);
  auto nll = [&] {
    double total = 0.0;
    for (int i = 0; i < 4; ++i) total += GaussianNll(Forward(p, x.col(i)), y.col(i));
    return total;
  };
  Tape tape;
  TapeNet net = RecordForward(tape, p, tape.Constant(x), true);
  tape.Backward(RecordGaussianNll(tape, net.mean, net.logvar, tape.Constant(y)));
  double& w = p.hidden[0].weight(0, 0);
  const double saved = w;
  w = saved + 1e-5;
  const double up = nll();
  w = saved - 1e-5;
  const double down = nll();
  w = saved;
  const double g = tape.grad(net.blocks[0])(0, 0);
  check("network gradient", std::abs(g - (up - down) / 2e-5) < 1e-6 * std::max(1.0, std::abs(g)));

  ExperimentConfig c;
  c.env.episode_length = 10;
  c.train_tilts = {-6.0, 6.0};
  c.episodes_per_env = 2;
  c.checkpoints = {2};
  c.seeds = {0};
  c.planner.population = 20;
  c.planner.iterations = 1;
  c.planner.horizon = 3;
  c.planner.particles = 2;
  c.model.members = 2;
  c.model.hidden = {8};
  c.model.train_rounds = 1;
  c.online.iterations = 3;
  c.test_episodes = 1;
  TrainingOutput a = RunTraining(c, 7);
  TrainingOutput b = RunTraining(c, 7);
  check("training completes", a.results.rewards.size() == 4);
  check("training is reproducible", a.results.rewards == b.results.rewards);

  const fs::path dir = fs::temp_directory_path() / "lmbrl_selftest";
  fs::remove_all(dir);
  ExportResults(a.results, c, dir);
  check("results round trip", LoadResults(dir).rewards == a.results.rewards);
  a.agent.Save(dir / "agent");
  const Agent loaded = Agent::Load(dir / "agent");
  std::vector<EnvSpec> one = {c.Split().test[2]};
  AdaptationOptions options;
  check("checkpoint adaptation",
        RunTestAdaptation(loaded, one, c, 0, options).posteriors.size() == 10);
  fs::remove_all(dir);
  return failures == 0 ? kExitOk : kExitError;
}

}  // namespace
}  // namespace lmbrl

int main(int argc, char** argv) {
  using namespace lmbrl;
  CLI::App app{"Latent-variable model-based RL experiments"};
  app.require_subcommand(1);
  std::string format = "all";

  CommonOptions train_opts;
  CLI::App* train = app.add_subcommand("train", "train agents on the training environments");
  AddCommon(train, &train_opts, true);
  train->add_option("--format", format, "csv, jsonl or all");

  CommonOptions adapt_opts;
  AdaptFlags adapt_flags;
  CLI::App* adapt = app.add_subcommand("adapt", "evaluate a checkpoint on test environments");
  AddCommon(adapt, &adapt_opts, false);
  adapt->add_option("--checkpoint", adapt_flags.checkpoint, "agent checkpoint directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  adapt->add_flag("--dynamic", adapt_flags.dynamic, "use the switching environment");
  adapt->add_flag("--frozen", adapt_flags.frozen, "keep the posterior at its start value");
  adapt->add_flag("--from-learned", adapt_flags.from_learned,
                  "start from the learned posterior where one exists");
  adapt->add_flag("--steps", adapt_flags.steps, "record per-step observations");
  adapt->add_option("--test-prior", adapt_flags.test_prior,
                    "starting posterior: standard or training_moments");
  adapt->add_option("--format", format, "csv, jsonl or all");

  CommonOptions eval_opts;
  std::vector<std::string> eval_inputs;
  int rollouts = 0;
  CLI::App* eval = app.add_subcommand("eval", "merge result directories and normalize rewards");
  eval->add_option("results", eval_inputs, "result directories")->required()->check(
      CLI::ExistingDirectory);
  eval->add_option("-c,--config", eval_opts.config, "config overriding the manifest");
  eval->add_option("-o,--out", eval_opts.out, "write merged, normalized results here");
  eval->add_option("--rollouts", rollouts, "random-policy rollouts per environment");
  eval->add_option("--format", format, "csv, jsonl or all");

  std::string export_in, export_out;
  CLI::App* exp = app.add_subcommand("export", "re-export a result directory");
  exp->add_option("results", export_in, "result directory")->required()->check(
      CLI::ExistingDirectory);
  exp->add_option("-o,--out", export_out, "destination directory")->required();
  exp->add_option("--format", format, "csv, jsonl or all");

  app.add_subcommand("selftest", "run a quick end-to-end check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  }
  try {
    if (*train) return Train(train_opts, format);
    if (*adapt) return Adapt(adapt_opts, adapt_flags, format);
    if (*eval) return Eval(eval_inputs, eval_opts, format, rollouts);
    if (*exp) return Export(export_in, export_out, format);
    return SelfTest();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitError;
  }
}
