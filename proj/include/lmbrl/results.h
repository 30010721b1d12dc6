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

#ifndef LMBRL_RESULTS_H_
#define LMBRL_RESULTS_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "lmbrl/config.h"

namespace lmbrl {

enum class Phase { kTrain, kTest, kDynamic };

std::string PhaseName(Phase phase);
Phase ParsePhase(const std::string& name);

struct RewardRecord {
  std::string agent;
  int env_id = 0;
  double tilt_deg = 0.0;
  uint64_t seed = 0;
  int episode = 0;
  double reward = 0.0;
  Phase phase = Phase::kTrain;
  // filled by NormalizeRewards
  double normalized = std::numeric_limits<double>::quiet_NaN();

  // NaN normalized values compare equal to each other.
  bool operator==(const RewardRecord& other) const;
};

// One online-posterior snapshot (after the update at step t).
struct PosteriorRecord {
  std::string agent;
  int env_id = 0;
  double tilt_deg = 0.0;
  uint64_t seed = 0;
  int episode = 0;
  int t = 0;
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
};

// Per-step trajectory dump.
struct StepRecord {
  std::string agent;
  int env_id = 0;
  double tilt_deg = 0.0;
  uint64_t seed = 0;
  int episode = 0;
  int t = 0;
  Eigen::VectorXd observation;
  Eigen::VectorXd action;
  double reward = 0.0;
};

// Final posterior mean per (agent, env, seed), for latent-embedding plots.
struct EmbeddingRecord {
  std::string agent;
  int env_id = 0;
  double tilt_deg = 0.0;
  uint64_t seed = 0;
  std::string source;  // "train" or "test"
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
};

struct ResultSet {
  std::vector<RewardRecord> rewards;
  std::vector<PosteriorRecord> posteriors;
  std::vector<StepRecord> steps;
  std::vector<EmbeddingRecord> embeddings;

  void Append(const ResultSet& other);
};

// Per-environment normalization anchors: B_k (random-policy mean) and R_k
// (reference mean mapped to 1).
struct Baseline {
  double random_mean = 0.0;
  double reference_mean = 1.0;
};

// r_hat = (r - B_k) / (R_k - B_k). Throws std::invalid_argument naming the
// environment when R_k == B_k or an env has no baseline.
std::vector<RewardRecord> NormalizeRewards(std::vector<RewardRecord> records,
                                           const std::map<int, Baseline>& baselines);

// R_k: for each env, the best seed-averaged mean reward over all
// (agent, episode) groups of the given phase.
std::map<int, double> BestMeanRewards(const std::vector<RewardRecord>& records,
                                      Phase phase);

// Seed-averaged reward of `agent` at `episode` per env (episode <= 0 means
// that agent's last episode).
std::map<int, double> AgentMeanRewards(const std::vector<RewardRecord>& records,
                                       const std::string& agent, Phase phase,
                                       int episode);

// Percentile bootstrap CI of the mean.
std::pair<double, double> BootstrapCi(const std::vector<double>& values,
                                      int n_boot = 500, double level = 0.95,
                                      uint64_t seed = 0);

// CSV codecs; floats are written at round-trip precision.
void WriteRewardsCsv(const std::vector<RewardRecord>& records, std::ostream& out);
std::vector<RewardRecord> ReadRewardsCsv(std::istream& in);
void WritePosteriorsJsonl(const std::vector<PosteriorRecord>& records,
                          std::ostream& out);
std::vector<PosteriorRecord> ReadPosteriorsJsonl(std::istream& in);

enum class ExportFormat { kCsv, kJsonl, kAll };

// Writes rewards, learning curves (seed mean + bootstrap CI), posterior
// trajectories, step dumps and embeddings into `dir`, then manifest.json
// with the config hash and seeds. The manifest is written last, and the
// directory is probed for writability before anything is written.
std::vector<std::filesystem::path> ExportResults(
    const ResultSet& results, const ExperimentConfig& config,
    const std::filesystem::path& dir, ExportFormat format = ExportFormat::kAll);

// Reads back a directory written by ExportResults.
ResultSet LoadResults(const std::filesystem::path& dir);

}  // namespace lmbrl

#endif  // LMBRL_RESULTS_H_
