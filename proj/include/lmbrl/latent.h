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

#ifndef LMBRL_LATENT_H_
#define LMBRL_LATENT_H_

#include <map>
#include <vector>

#include <Eigen/Core>

#include "lmbrl/nnet.h"
#include "lmbrl/rng.h"
#include "lmbrl/tape.h"

namespace lmbrl {

// Diagonal Gaussian parameterized by (mean, log variance). Used both for the
// variational posterior q(e_k) and for priors.
struct DiagGaussian {
  Eigen::VectorXd mean;
  Eigen::VectorXd logvar;

  static DiagGaussian Standard(int dim);

  int dim() const { return static_cast<int>(mean.size()); }
  Eigen::VectorXd variance() const { return logvar.array().exp(); }
  Eigen::VectorXd stddev() const { return (0.5 * logvar.array()).exp(); }

  // Throws std::invalid_argument on mismatched dims or non-finite values.
  void Validate() const;
};

using VariationalPosterior = DiagGaussian;

struct LatentSample {
  Eigen::VectorXd value;
  Eigen::VectorXd noise;
};

// value = mean + stddev * noise with noise ~ N(0, I).
LatentSample SampleLatent(const DiagGaussian& q, Rng& rng);

// Closed-form KL(q || p) for diagonal Gaussians.
double KlDiagGaussian(const DiagGaussian& q, const DiagGaussian& p);

// KL(q || p) recorded on a tape; q is given by (mean, logvar) values of shape
// (d x k), p by constant vectors broadcast over the k columns.
Tape::Var RecordKl(Tape& tape, Tape::Var q_mean, Tape::Var q_logvar,
                   const Eigen::VectorXd& p_mean,
                   const Eigen::VectorXd& p_logvar);

// Per-environment posteriors with their optimizer state. One shared set is
// used by every ensemble member.
class PosteriorSet {
 public:
  explicit PosteriorSet(int latent_dim = 0) : latent_dim_(latent_dim) {}

  int latent_dim() const { return latent_dim_; }
  bool Contains(int env_id) const { return entries_.count(env_id) > 0; }

  // Inserts the standard-normal prior for `env_id` if absent.
  void Ensure(int env_id);
  void Set(int env_id, DiagGaussian q);
  const DiagGaussian& at(int env_id) const;
  DiagGaussian& at(int env_id);
  AdamState& optimizer(int env_id);

  std::vector<int> env_ids() const;
  size_t size() const { return entries_.size(); }

  // Single Gaussian with the mean and covariance diagonal of the equally
  // weighted mixture of all posteriors. Throws std::logic_error when empty.
  DiagGaussian MomentMatch() const;

 private:
  struct Entry {
    DiagGaussian posterior;
    AdamState optimizer;
  };
  Entry& Find(int env_id);
  const Entry& Find(int env_id) const;

  int latent_dim_;
  std::map<int, Entry> entries_;
};

}  // namespace lmbrl

#endif  // LMBRL_LATENT_H_
