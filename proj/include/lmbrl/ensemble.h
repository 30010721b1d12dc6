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

#ifndef LMBRL_ENSEMBLE_H_
#define LMBRL_ENSEMBLE_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "lmbrl/dynamics_model.h"
#include "lmbrl/latent.h"
#include "lmbrl/nnet.h"
#include "lmbrl/rng.h"

namespace lmbrl {

struct Transition {
  int env_id = 0;
  Eigen::VectorXd state;
  Eigen::VectorXd action;
  Eigen::VectorXd next_state;
};

// Append-only transition store.
class Dataset {
 public:
  Dataset() = default;
  Dataset(int state_dim, int action_dim)
      : state_dim_(state_dim), action_dim_(action_dim) {}

  int state_dim() const { return state_dim_; }
  int action_dim() const { return action_dim_; }
  size_t size() const { return transitions_.size(); }
  bool empty() const { return transitions_.empty(); }
  const Transition& operator[](size_t i) const { return transitions_[i]; }
  std::span<const Transition> transitions() const { return transitions_; }

  // Throws std::invalid_argument on wrong dimensions or non-finite values.
  void Append(Transition t);
  void Append(const Dataset& other);

  std::vector<int> env_ids() const;
  Dataset Filter(int env_id) const;

  // Text log, one record per line, with a versioned header:
  //   # lmbrl-transitions v1 state_dim=S action_dim=A
  //   env_id s_1..s_S a_1..a_A s'_1..s'_S
  // Values are written at round-trip precision.
  void Save(std::ostream& out) const;
  static Dataset Load(std::istream& in);

 private:
  int state_dim_ = 0;
  int action_dim_ = 0;
  std::vector<Transition> transitions_;
};

// Per-dimension affine standardization.
struct Normalizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;

  static Normalizer Identity(int dim);
  // Columns are samples; stddev floored at `floor`.
  static Normalizer Fit(const Eigen::MatrixXd& samples, double floor = 1e-6);

  Eigen::MatrixXd Normalize(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd Denormalize(const Eigen::MatrixXd& z) const;
};

enum class TrainUnit { kEpochs, kGradientSteps };

struct EnsembleConfig {
  int members = 5;
  std::vector<int> hidden = {128, 128, 128};
  // 0 gives a model without latent input (specialist / generalist).
  int latent_dim = 2;
  LogVarBounds logvar_bounds;
  int batch_size = 64;
  // Length of one incremental training round, counted in `train_unit`.
  int train_rounds = 10;
  TrainUnit train_unit = TrainUnit::kEpochs;
  AdamConfig theta_optimizer;
  AdamConfig phi_optimizer;
  double stddev_floor = 1e-6;
};

struct GaussianMixture {
  std::vector<GaussianPrediction> components;

  // equal weights
  Eigen::VectorXd Mean() const;
  // law of total variance
  Eigen::VectorXd Variance() const;
};

struct TrainReport {
  // average per-transition NLL (normalized targets) over the final pass
  std::vector<double> member_loss;
  // hash of each member's shuffle order, [member][epoch]
  std::vector<std::vector<uint64_t>> shuffle_fingerprints;
  int64_t gradient_steps = 0;
};

// Deep ensemble of probabilistic delta-state networks. Member k maps the
// normalized (state, action) concatenated with the latent e_k to a Gaussian
// over the normalized state change.
class Ensemble : public DynamicsModel {
 public:
  Ensemble() = default;
  Ensemble(const EnsembleConfig& config, int state_dim, int action_dim,
           Rng& rng);
  // Explicit members; normalizers default to identity.
  Ensemble(const EnsembleConfig& config, int state_dim, int action_dim,
           std::vector<NetParams> members);

  int state_dim() const override { return state_dim_; }
  int action_dim() const override { return action_dim_; }
  int latent_dim() const override { return config_.latent_dim; }
  int num_members() const override { return static_cast<int>(members_.size()); }

  const EnsembleConfig& config() const { return config_; }
  const NetParams& member(int k) const { return members_.at(k); }
  NetParams& member(int k) { return members_.at(k); }
  const Normalizer& input_normalizer() const { return input_norm_; }
  const Normalizer& target_normalizer() const { return target_norm_; }
  void set_normalizers(Normalizer input, Normalizer target);

  // Distribution over s_{t+1} = s_t + delta under one member.
  GaussianPrediction PredictMember(int k, const Eigen::VectorXd& state,
                                   const Eigen::VectorXd& action,
                                   const Eigen::VectorXd& latent) const;
  GaussianMixture PredictMixture(const Eigen::VectorXd& state,
                                 const Eigen::VectorXd& action,
                                 const Eigen::VectorXd& latent) const;

  void PredictNext(int member, const Eigen::MatrixXd& states,
                   const Eigen::MatrixXd& actions,
                   const Eigen::MatrixXd& latents, Eigen::MatrixXd* mean,
                   Eigen::MatrixXd* variance) const override;

  // Network input columns for the given batch: normalized (s, a) over latent.
  Eigen::MatrixXd NetworkInputs(const Eigen::MatrixXd& states,
                                const Eigen::MatrixXd& actions,
                                const Eigen::MatrixXd& latents) const;

  // Refreshes normalization from `data` and trains every member on its own
  // reshuffled pass over the full dataset for `rounds` units of
  // config().train_unit. With latents, the posterior of every env in `data`
  // is optimized jointly with the networks. Throws if an env in `data` has
  // no posterior.
  TrainReport Train(const Dataset& data, PosteriorSet* posteriors, int rounds,
                    Rng& rng);

  // Mean per-transition NLL of s_{t+1} in state units, averaged over members,
  // with e_k at each env's posterior mean.
  double MeanNll(const Dataset& data, const PosteriorSet* posteriors) const;

  // Directory with member_<k>.bin, normalizers.txt and ensemble.json.
  void Save(const std::filesystem::path& dir) const;
  static Ensemble Load(const std::filesystem::path& dir);

 private:
  void CheckInputs(const Eigen::VectorXd& state, const Eigen::VectorXd& action,
                   const Eigen::VectorXd& latent) const;

  EnsembleConfig config_;
  int state_dim_ = 0;
  int action_dim_ = 0;
  std::vector<NetParams> members_;
  std::vector<AdamState> optimizers_;
  Normalizer input_norm_;
  Normalizer target_norm_;
};

}  // namespace lmbrl

#endif  // LMBRL_ENSEMBLE_H_
