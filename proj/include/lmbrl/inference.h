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

#ifndef LMBRL_INFERENCE_H_
#define LMBRL_INFERENCE_H_

#include <span>
#include <string>

#include <Eigen/Core>

#include "lmbrl/ensemble.h"
#include "lmbrl/latent.h"
#include "lmbrl/rng.h"

namespace lmbrl {

struct ElboEstimate {
  double value = 0.0;
  double expected_log_likelihood = 0.0;
  double kl = 0.0;
  Eigen::VectorXd grad_mean;    // d ELBO / d q.mean
  Eigen::VectorXd grad_logvar;  // d ELBO / d q.logvar
};

// Monte Carlo ELBO of one environment's transitions,
//   E_{e~q, theta~E}[ sum_t log p_theta(s'_t | s_t, a_t, e) ] - KL(q || prior),
// with the member average taken outside the log. `noise` holds one standard
// normal column per sample; sample j uses e = q.mean + q.stddev * noise.col(j)
// for every transition. Log-likelihoods are in state units.
ElboEstimate EstimateElbo(const Ensemble& ensemble, const DiagGaussian& q,
                          std::span<const Transition> transitions,
                          const DiagGaussian& prior,
                          const Eigen::MatrixXd& noise);

// n standard-normal columns of dimension `dim`, one Latin-hypercube stratum
// per column in every row.
Eigen::MatrixXd StratifiedNormal(int dim, int n, Rng& rng);

// ELBO with `n_samples` fresh draws, stratified per latent dimension (Latin
// hypercube on the normal quantiles).
double Elbo(const Ensemble& ensemble, const DiagGaussian& q,
            std::span<const Transition> transitions, const DiagGaussian& prior,
            int n_samples, Rng& rng);

struct OnlineUpdateConfig {
  int iterations = 60;
  double learning_rate = 5e-3;
  // reparameterized draws per iteration
  int samples = 1;
};

struct OnlineUpdateResult {
  DiagGaussian posterior;
  bool ok = true;
  std::string diagnostics;
};

// Fits q to maximize E_q[log p_theta(D_t | e)] - KL(q || prior) with the
// ensemble held fixed, starting from q = prior. Only `recent` is read; the
// returned posterior is the prior for the next call. On a non-finite
// objective the prior is returned unchanged with ok = false.
OnlineUpdateResult OnlineUpdate(const Ensemble& ensemble,
                                const DiagGaussian& prior,
                                std::span<const Transition> recent,
                                const OnlineUpdateConfig& config, Rng& rng);

}  // namespace lmbrl

#endif  // LMBRL_INFERENCE_H_
