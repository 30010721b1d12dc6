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

#ifndef LMBRL_TESTS_CONJUGATE_MODEL_H_
#define LMBRL_TESTS_CONJUGATE_MODEL_H_

#include <cmath>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "lmbrl/ensemble.h"
#include "lmbrl/nnet.h"

namespace lmbrl::testing {

// Linear-Gaussian toy model in a scalar latent e:
//   y = s' - s = c * e + noise,  noise ~ N(0, sigma2).
// Realized as an ensemble of identical linear members with state, action and
// latent inputs, so the Gaussian posterior over e is available in closed form.
struct ConjugateModel {
  double c = 1.0;
  double raw_logvar = 0.0;

  Ensemble MakeEnsemble(int members = 2) const {
    NetParams p = NetParams::Zeros(3, {}, 1);
    p.mean_head.weight(0, 2) = c;
    p.logvar_head.bias(0, 0) = raw_logvar;
    EnsembleConfig config;
    config.latent_dim = 1;
    config.hidden = {};
    return Ensemble(config, 1, 1, std::vector<NetParams>(members, p));
  }

  double noise_variance() const {
    return std::exp(BoundLogVar(raw_logvar, LogVarBounds{}));
  }

  static Transition Observation(double y, int env_id = 0) {
    return {env_id, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1),
            Eigen::VectorXd::Constant(1, y)};
  }

  struct Posterior {
    double mean;
    double variance;
  };

  Posterior Analytic(double prior_mean, double prior_var,
                     const std::vector<double>& ys) const {
    const double s2 = noise_variance();
    double precision = 1.0 / prior_var;
    double shift = prior_mean / prior_var;
    for (double y : ys) {
      precision += c * c / s2;
      shift += c * y / s2;
    }
    return {shift / precision, 1.0 / precision};
  }

  // log N(y; c m0 1, s2 I + c^2 v0 1 1^T)
  double LogMarginal(double prior_mean, double prior_var,
                     const std::vector<double>& ys) const {
    const int n = static_cast<int>(ys.size());
    Eigen::MatrixXd cov = noise_variance() * Eigen::MatrixXd::Identity(n, n);
    cov.array() += c * c * prior_var;
    Eigen::VectorXd r(n);
    for (int i = 0; i < n; ++i) r[i] = ys[i] - c * prior_mean;
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    const double logdet =
        2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    return -0.5 * (r.dot(llt.solve(r)) + logdet + n * std::log(2 * M_PI));
  }
};

}  // namespace lmbrl::testing

#endif  // LMBRL_TESTS_CONJUGATE_MODEL_H_
