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

#include "lmbrl/latent.h"

#include <cmath>
#include <stdexcept>
#include <string>

namespace lmbrl {

DiagGaussian DiagGaussian::Standard(int dim) {
  return {Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Zero(dim)};
}

void DiagGaussian::Validate() const {
  if (mean.size() != logvar.size()) {
    throw std::invalid_argument("gaussian: mean has dimension " +
                                std::to_string(mean.size()) +
                                " but logvar has " +
                                std::to_string(logvar.size()));
  }
  if (!mean.allFinite() || !logvar.allFinite()) {
    throw std::invalid_argument("gaussian: non-finite parameters");
  }
}

LatentSample SampleLatent(const DiagGaussian& q, Rng& rng) {
  LatentSample s;
  s.noise = rng.NormalVector(q.dim());
  s.value = q.mean + q.stddev().cwiseProduct(s.noise);
  return s;
}

double KlDiagGaussian(const DiagGaussian& q, const DiagGaussian& p) {
  if (q.dim() != p.dim()) {
    throw std::invalid_argument("kl: dimensions " + std::to_string(q.dim()) +
                                " and " + std::to_string(p.dim()));
  }
  double kl = 0.0;
  for (int d = 0; d < q.dim(); ++d) {
    double ratio = std::exp(q.logvar[d] - p.logvar[d]);
    double diff = p.mean[d] - q.mean[d];
    kl += ratio + diff * diff * std::exp(-p.logvar[d]) - 1.0 +
          (p.logvar[d] - q.logvar[d]);
  }
  return 0.5 * kl;
}

Tape::Var RecordKl(Tape& tape, Tape::Var q_mean, Tape::Var q_logvar,
                   const Eigen::VectorXd& p_mean,
                   const Eigen::VectorXd& p_logvar) {
  const Eigen::Index cols = tape.value(q_mean).cols();
  Eigen::MatrixXd pm = p_mean.replicate(1, cols);
  Eigen::MatrixXd plv = p_logvar.replicate(1, cols);
  Eigen::MatrixXd inv_pv = (-plv.array()).exp().matrix();
  Tape::Var plv_var = tape.Constant(plv);
  Tape::Var ratio = tape.Exp(tape.Sub(q_logvar, plv_var));
  Tape::Var diff2 = tape.Square(tape.Sub(q_mean, tape.Constant(pm)));
  Tape::Var scaled = tape.Mul(diff2, tape.Constant(inv_pv));
  Tape::Var logs = tape.Sub(plv_var, q_logvar);
  Tape::Var total = tape.Sum(tape.Add(tape.Add(ratio, scaled), logs));
  return tape.Scale(
      tape.AddScalar(total, -static_cast<double>(tape.value(q_mean).size())),
      0.5);
}

void PosteriorSet::Ensure(int env_id) {
  if (!Contains(env_id)) {
    entries_[env_id].posterior = DiagGaussian::Standard(latent_dim_);
  }
}

void PosteriorSet::Set(int env_id, DiagGaussian q) {
  if (q.dim() != latent_dim_) {
    throw std::invalid_argument("posterior set: latent dimension " +
                                std::to_string(q.dim()) + ", expected " +
                                std::to_string(latent_dim_));
  }
  entries_[env_id].posterior = std::move(q);
}

PosteriorSet::Entry& PosteriorSet::Find(int env_id) {
  auto it = entries_.find(env_id);
  if (it == entries_.end()) {
    throw std::out_of_range("no posterior for environment " +
                            std::to_string(env_id));
  }
  return it->second;
}

const PosteriorSet::Entry& PosteriorSet::Find(int env_id) const {
  auto it = entries_.find(env_id);
  if (it == entries_.end()) {
    throw std::out_of_range("no posterior for environment " +
                            std::to_string(env_id));
  }
  return it->second;
}

const DiagGaussian& PosteriorSet::at(int env_id) const {
  return Find(env_id).posterior;
}
DiagGaussian& PosteriorSet::at(int env_id) { return Find(env_id).posterior; }
AdamState& PosteriorSet::optimizer(int env_id) {
  return Find(env_id).optimizer;
}

DiagGaussian PosteriorSet::MomentMatch() const {
  if (entries_.empty()) {
    throw std::logic_error("posterior set: moment match of an empty set");
  }
  const double n = static_cast<double>(entries_.size());
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(latent_dim_);
  for (const auto& [id, e] : entries_) mean += e.posterior.mean;
  mean /= n;
  Eigen::VectorXd var = Eigen::VectorXd::Zero(latent_dim_);
  for (const auto& [id, e] : entries_) {
    var += e.posterior.variance() +
           (e.posterior.mean - mean).array().square().matrix();
  }
  var /= n;
  return {mean, var.array().log().matrix()};
}

std::vector<int> PosteriorSet::env_ids() const {
  std::vector<int> ids;
  for (const auto& [id, e] : entries_) ids.push_back(id);
  return ids;
}

}  // namespace lmbrl
