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

#ifndef LMBRL_DYNAMICS_MODEL_H_
#define LMBRL_DYNAMICS_MODEL_H_

#include <Eigen/Core>

namespace lmbrl {

// Set of one-step Gaussian transition models the planner propagates
// particles through. Inputs are column-per-particle.
class DynamicsModel {
 public:
  virtual ~DynamicsModel() = default;

  virtual int state_dim() const = 0;
  virtual int action_dim() const = 0;
  // 0 when the model takes no latent input
  virtual int latent_dim() const = 0;
  virtual int num_members() const = 0;

  // Predictive mean and variance of the next state under member `member`.
  virtual void PredictNext(int member, const Eigen::MatrixXd& states,
                           const Eigen::MatrixXd& actions,
                           const Eigen::MatrixXd& latents,
                           Eigen::MatrixXd* mean,
                           Eigen::MatrixXd* variance) const = 0;
};

}  // namespace lmbrl

#endif  // LMBRL_DYNAMICS_MODEL_H_
