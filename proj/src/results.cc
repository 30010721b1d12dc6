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

#include "lmbrl/results.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "json.hpp"

namespace lmbrl {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::ostream& Precise(std::ostream& out) {
  out.precision(std::numeric_limits<double>::max_digits10);
  return out;
}

std::vector<std::string> SplitCsv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double ParseDouble(const std::string& s) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  size_t used = 0;
  double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument("bad number '" + s + "'");
  return v;
}

json VectorJson(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd JsonVector(const json& j) {
  std::vector<double> v = j.get<std::vector<double>>();
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

double Mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

void WriteVectorCells(std::ostream& out, const Eigen::VectorXd& v, int width) {
  for (int i = 0; i < width; ++i) {
    out << ',';
    if (i < v.size()) out << v[i];
  }
}

}  // namespace

std::string PhaseName(Phase phase) {
  switch (phase) {
    case Phase::kTrain:
      return "train";
    case Phase::kTest:
      return "test";
    case Phase::kDynamic:
      return "dynamic";
  }
  return "unknown";
}

Phase ParsePhase(const std::string& name) {
  if (name == "train") return Phase::kTrain;
  if (name == "test") return Phase::kTest;
  if (name == "dynamic") return Phase::kDynamic;
  throw std::invalid_argument("unknown phase '" + name + "'");
}

bool RewardRecord::operator==(const RewardRecord& o) const {
  const bool same_normalized =
      (std::isnan(normalized) && std::isnan(o.normalized)) ||
      normalized == o.normalized;
  return agent == o.agent && env_id == o.env_id && tilt_deg == o.tilt_deg &&
         seed == o.seed && episode == o.episode && reward == o.reward &&
         phase == o.phase && same_normalized;
}

void ResultSet::Append(const ResultSet& other) {
  rewards.insert(rewards.end(), other.rewards.begin(), other.rewards.end());
  posteriors.insert(posteriors.end(), other.posteriors.begin(),
                    other.posteriors.end());
  steps.insert(steps.end(), other.steps.begin(), other.steps.end());
  embeddings.insert(embeddings.end(), other.embeddings.begin(),
                    other.embeddings.end());
}

std::vector<RewardRecord> NormalizeRewards(
    std::vector<RewardRecord> records, const std::map<int, Baseline>& baselines) {
  for (auto& r : records) {
    auto it = baselines.find(r.env_id);
    if (it == baselines.end()) {
      throw std::invalid_argument("normalize: no baseline for environment " +
                                  std::to_string(r.env_id));
    }
    const double span = it->second.reference_mean - it->second.random_mean;
    if (span == 0.0 || !std::isfinite(span)) {
      throw std::invalid_argument(
          "normalize: reference equals random baseline for environment " +
          std::to_string(r.env_id));
    }
    r.normalized = (r.reward - it->second.random_mean) / span;
  }
  return records;
}

std::map<int, double> BestMeanRewards(const std::vector<RewardRecord>& records,
                                      Phase phase) {
  std::map<std::tuple<int, std::string, int>, std::vector<double>> groups;
  for (const auto& r : records) {
    if (r.phase != phase) continue;
    groups[{r.env_id, r.agent, r.episode}].push_back(r.reward);
  }
  std::map<int, double> best;
  for (const auto& [key, values] : groups) {
    const int env = std::get<0>(key);
    const double m = Mean(values);
    auto it = best.find(env);
    if (it == best.end() || m > it->second) best[env] = m;
  }
  return best;
}

std::map<int, double> AgentMeanRewards(const std::vector<RewardRecord>& records,
                                       const std::string& agent, Phase phase,
                                       int episode) {
  std::map<int, int> last;
  if (episode <= 0) {
    for (const auto& r : records) {
      if (r.agent == agent && r.phase == phase) {
        last[r.env_id] = std::max(last[r.env_id], r.episode);
      }
    }
  }
  std::map<int, std::vector<double>> groups;
  for (const auto& r : records) {
    if (r.agent != agent || r.phase != phase) continue;
    const int want = episode > 0 ? episode : last[r.env_id];
    if (r.episode == want) groups[r.env_id].push_back(r.reward);
  }
  std::map<int, double> out;
  for (const auto& [env, values] : groups) out[env] = Mean(values);
  return out;
}

std::pair<double, double> BootstrapCi(const std::vector<double>& values,
                                      int n_boot, double level, uint64_t seed) {
  if (values.empty()) throw std::invalid_argument("bootstrap: no values");
  if (n_boot < 1 || !(level > 0.0 && level < 1.0)) {
    throw std::invalid_argument("bootstrap: invalid n_boot or level");
  }
  std::mt19937_64 engine(seed);
  std::uniform_int_distribution<size_t> pick(0, values.size() - 1);
  std::vector<double> means(n_boot);
  for (int b = 0; b < n_boot; ++b) {
    double s = 0.0;
    for (size_t i = 0; i < values.size(); ++i) s += values[pick(engine)];
    means[b] = s / static_cast<double>(values.size());
  }
  std::sort(means.begin(), means.end());
  // linear interpolation between order statistics
  auto quantile = [&means](double q) {
    const double pos = q * static_cast<double>(means.size() - 1);
    const size_t lo = static_cast<size_t>(std::floor(pos));
    const size_t hi = std::min(lo + 1, means.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return means[lo] + frac * (means[hi] - means[lo]);
  };
  const double alpha = 0.5 * (1.0 - level);
  return {quantile(alpha), quantile(1.0 - alpha)};
}

void WriteRewardsCsv(const std::vector<RewardRecord>& records, std::ostream& out) {
  Precise(out);
  out << "agent,env_id,tilt_deg,seed,episode,phase,reward,normalized\n";
  for (const auto& r : records) {
    out << r.agent << ',' << r.env_id << ',' << r.tilt_deg << ',' << r.seed
        << ',' << r.episode << ',' << PhaseName(r.phase) << ',' << r.reward
        << ',';
    if (!std::isnan(r.normalized)) out << r.normalized;
    out << '\n';
  }
}

std::vector<RewardRecord> ReadRewardsCsv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) ||
      line != "agent,env_id,tilt_deg,seed,episode,phase,reward,normalized") {
    throw std::runtime_error("rewards csv: unexpected header");
  }
  std::vector<RewardRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = SplitCsv(line);
    if (f.size() != 8) throw std::runtime_error("rewards csv: bad row '" + line + "'");
    RewardRecord r;
    r.agent = f[0];
    r.env_id = std::stoi(f[1]);
    r.tilt_deg = ParseDouble(f[2]);
    r.seed = std::stoull(f[3]);
    r.episode = std::stoi(f[4]);
    r.phase = ParsePhase(f[5]);
    r.reward = ParseDouble(f[6]);
    r.normalized = ParseDouble(f[7]);
    out.push_back(std::move(r));
  }
  return out;
}

void WritePosteriorsJsonl(const std::vector<PosteriorRecord>& records,
                          std::ostream& out) {
  for (const auto& p : records) {
    json j = {{"agent", p.agent},       {"env_id", p.env_id},
              {"tilt_deg", p.tilt_deg}, {"seed", p.seed},
              {"episode", p.episode},   {"t", p.t},
              {"mean", VectorJson(p.mean)},
              {"variance", VectorJson(p.variance)}};
    out << j.dump() << '\n';
  }
}

std::vector<PosteriorRecord> ReadPosteriorsJsonl(std::istream& in) {
  std::vector<PosteriorRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    PosteriorRecord p;
    p.agent = j.at("agent");
    p.env_id = j.at("env_id");
    p.tilt_deg = j.at("tilt_deg");
    p.seed = j.at("seed");
    p.episode = j.at("episode");
    p.t = j.at("t");
    p.mean = JsonVector(j.at("mean"));
    p.variance = JsonVector(j.at("variance"));
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<fs::path> ExportResults(const ResultSet& results,
                                    const ExperimentConfig& config,
                                    const fs::path& dir, ExportFormat format) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  {
    const fs::path probe = dir / ".write_probe";
    std::ofstream p(probe);
    if (ec || !p) {
      throw std::runtime_error("export: cannot write to " + dir.string());
    }
    p.close();
    fs::remove(probe, ec);
  }

  std::vector<fs::path> written;
  auto open = [&](const std::string& name) {
    fs::path path = dir / name;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("export: cannot open " + path.string());
    Precise(out);
    written.push_back(path);
    return out;
  };
  const bool csv = format != ExportFormat::kJsonl;
  const bool jsonl = format != ExportFormat::kCsv;

  if (csv) {
    std::ofstream out = open("rewards.csv");
    WriteRewardsCsv(results.rewards, out);
  }
  if (jsonl) {
    std::ofstream out = open("rewards.jsonl");
    for (const auto& r : results.rewards) {
      json j = {{"agent", r.agent},      {"env_id", r.env_id},
                {"tilt_deg", r.tilt_deg}, {"seed", r.seed},
                {"episode", r.episode},  {"phase", PhaseName(r.phase)},
                {"reward", r.reward}};
      if (!std::isnan(r.normalized)) j["normalized"] = r.normalized;
      out << j.dump() << '\n';
    }
  }

  // learning curves: seed statistics per (agent, phase, env, episode)
  if (csv) {
    std::map<std::tuple<std::string, std::string, int, int>,
             std::pair<std::vector<double>, std::vector<double>>>
        groups;
    std::map<std::tuple<std::string, std::string, int, int>, double> tilts;
    for (const auto& r : results.rewards) {
      auto key = std::make_tuple(r.agent, PhaseName(r.phase), r.env_id, r.episode);
      groups[key].first.push_back(r.reward);
      if (!std::isnan(r.normalized)) groups[key].second.push_back(r.normalized);
      tilts[key] = r.tilt_deg;
    }
    std::ofstream out = open("learning_curves.csv");
    out << "agent,phase,env_id,tilt_deg,episode,n,reward_mean,reward_ci_low,"
           "reward_ci_high,normalized_mean,normalized_ci_low,normalized_ci_high\n";
    for (const auto& [key, values] : groups) {
      const auto& [agent, phase, env, episode] = key;
      auto [lo, hi] = BootstrapCi(values.first);
      out << agent << ',' << phase << ',' << env << ',' << tilts[key] << ','
          << episode << ',' << values.first.size() << ',' << Mean(values.first)
          << ',' << lo << ',' << hi << ',';
      if (!values.second.empty()) {
        auto [nlo, nhi] = BootstrapCi(values.second);
        out << Mean(values.second) << ',' << nlo << ',' << nhi;
      } else {
        out << ",,";
      }
      out << '\n';
    }
  }

  int latent_width = 0;
  for (const auto& p : results.posteriors) {
    latent_width = std::max<int>(latent_width, p.mean.size());
  }
  for (const auto& e : results.embeddings) {
    latent_width = std::max<int>(latent_width, e.mean.size());
  }
  if (jsonl || !results.posteriors.empty()) {
    std::ofstream out = open("posteriors.jsonl");
    WritePosteriorsJsonl(results.posteriors, out);
  }
  if (csv) {
    std::ofstream out = open("posteriors.csv");
    out << "agent,env_id,tilt_deg,seed,episode,t";
    for (int i = 0; i < latent_width; ++i) out << ",mean_" << i;
    for (int i = 0; i < latent_width; ++i) out << ",var_" << i;
    out << '\n';
    for (const auto& p : results.posteriors) {
      out << p.agent << ',' << p.env_id << ',' << p.tilt_deg << ',' << p.seed
          << ',' << p.episode << ',' << p.t;
      WriteVectorCells(out, p.mean, latent_width);
      WriteVectorCells(out, p.variance, latent_width);
      out << '\n';
    }

    std::ofstream emb = open("embeddings.csv");
    emb << "agent,env_id,tilt_deg,seed,source";
    for (int i = 0; i < latent_width; ++i) emb << ",mean_" << i;
    for (int i = 0; i < latent_width; ++i) emb << ",var_" << i;
    emb << '\n';
    for (const auto& e : results.embeddings) {
      emb << e.agent << ',' << e.env_id << ',' << e.tilt_deg << ',' << e.seed
          << ',' << e.source;
      WriteVectorCells(emb, e.mean, latent_width);
      WriteVectorCells(emb, e.variance, latent_width);
      emb << '\n';
    }

    int obs_width = 0;
    int act_width = 0;
    for (const auto& s : results.steps) {
      obs_width = std::max<int>(obs_width, s.observation.size());
      act_width = std::max<int>(act_width, s.action.size());
    }
    std::ofstream steps = open("steps.csv");
    steps << "agent,env_id,tilt_deg,seed,episode,t";
    for (int i = 0; i < obs_width; ++i) steps << ",s_" << i;
    for (int i = 0; i < act_width; ++i) steps << ",a_" << i;
    steps << ",reward\n";
    for (const auto& s : results.steps) {
      steps << s.agent << ',' << s.env_id << ',' << s.tilt_deg << ',' << s.seed
            << ',' << s.episode << ',' << s.t;
      WriteVectorCells(steps, s.observation, obs_width);
      WriteVectorCells(steps, s.action, act_width);
      steps << ',' << s.reward << '\n';
    }
  }
  if (jsonl) {
    std::ofstream out = open("embeddings.jsonl");
    for (const auto& e : results.embeddings) {
      json j = {{"agent", e.agent},       {"env_id", e.env_id},
                {"tilt_deg", e.tilt_deg}, {"seed", e.seed},
                {"source", e.source},     {"mean", VectorJson(e.mean)},
                {"variance", VectorJson(e.variance)}};
      out << j.dump() << '\n';
    }
  }

  json manifest;
  manifest["format"] = "lmbrl-results";
  manifest["version"] = 1;
  manifest["config_hash"] = HashToHex(config.Hash());
  manifest["seeds"] = config.seeds;
  manifest["config"] = config.ToJson();
  std::vector<std::string> names;
  for (const auto& p : written) names.push_back(p.filename().string());
  manifest["files"] = names;
  manifest["counts"] = {{"rewards", results.rewards.size()},
                        {"posteriors", results.posteriors.size()},
                        {"steps", results.steps.size()},
                        {"embeddings", results.embeddings.size()}};
  {
    std::ofstream out = open("manifest.json");
    out << manifest.dump(2) << '\n';
    if (!out) throw std::runtime_error("export: failed writing manifest");
  }
  return written;
}

ResultSet LoadResults(const fs::path& dir) {
  ResultSet out;
  if (std::ifstream in(dir / "rewards.csv"); in) {
    out.rewards = ReadRewardsCsv(in);
  } else if (std::ifstream jin(dir / "rewards.jsonl"); jin) {
    std::string line;
    while (std::getline(jin, line)) {
      if (line.empty()) continue;
      json j = json::parse(line);
      RewardRecord r;
      r.agent = j.at("agent");
      r.env_id = j.at("env_id");
      r.tilt_deg = j.at("tilt_deg");
      r.seed = j.at("seed");
      r.episode = j.at("episode");
      r.phase = ParsePhase(j.at("phase"));
      r.reward = j.at("reward");
      if (j.contains("normalized")) r.normalized = j.at("normalized");
      out.rewards.push_back(std::move(r));
    }
  } else {
    throw std::runtime_error("load results: no rewards file in " + dir.string());
  }
  if (std::ifstream in(dir / "posteriors.jsonl"); in) {
    out.posteriors = ReadPosteriorsJsonl(in);
  }
  if (std::ifstream in(dir / "embeddings.jsonl"); in) {
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      json j = json::parse(line);
      EmbeddingRecord e;
      e.agent = j.at("agent");
      e.env_id = j.at("env_id");
      e.tilt_deg = j.at("tilt_deg");
      e.seed = j.at("seed");
      e.source = j.at("source");
      e.mean = JsonVector(j.at("mean"));
      e.variance = JsonVector(j.at("variance"));
      out.embeddings.push_back(std::move(e));
    }
  }
  return out;
}

}  // namespace lmbrl
