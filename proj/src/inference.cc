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

#include "lmbrl/inference.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "lmbrl/nnet.h"
#include "lmbrl/tape.h"

namespace lmbrl {

ElboEstimate EstimateElbo(const Ensemble& ensemble, const DiagGaussian& q,
                          std::span<const Transition> transitions,
                          const DiagGaussian& prior,
                          const Eigen::MatrixXd& noise) {
  const int d = ensemble.latent_dim();
  if (d == 0) throw std::invalid_argument("elbo: model has no latent input");
  if (q.dim() != d || prior.dim() != d || noise.rows() != d) {
    throw std::invalid_argument("elbo: latent dimension mismatch");
  }
  if (noise.cols() < 1) throw std::invalid_argument("elbo: no samples");
  for (const auto& t : transitions) {
    if (t.env_id != transitions.front().env_id) {
      throw std::invalid_argument("elbo: transitions span several environments");
    }
  }

  Tape tape;
  Tape::Var mean = tape.Parameter(q.mean);
  Tape::Var logvar = tape.Parameter(q.logvar);
  Tape::Var kl = RecordKl(tape, mean, logvar, prior.mean, prior.logvar);

  ElboEstimate out;
  Tape::Var objective = tape.Scale(kl, -1.0);
  const int n = static_cast<int>(transitions.size());
  const int samples = static_cast<int>(noise.cols());
  if (n > 0) {
    const int s_dim = ensemble.state_dim();
    const int cols = n * samples;
    Eigen::MatrixXd states(s_dim, cols);
    Eigen::MatrixXd actions(ensemble.action_dim(), cols);
    Eigen::MatrixXd deltas(s_dim, cols);
    Eigen::MatrixXd tiled_noise(d, cols);
    for (int s = 0; s < samples; ++s) {
      for (int t = 0; t < n; ++t) {
        const int c = s * n + t;
        states.col(c) = transitions[t].state;
        actions.col(c) = transitions[t].action;
        deltas.col(c) = transitions[t].next_state - transitions[t].state;
        tiled_noise.col(c) = noise.col(s);
      }
    }
    const Normalizer& tn = ensemble.target_normalizer();
    Eigen::MatrixXd sa = ensemble.NetworkInputs(
        states, actions, Eigen::MatrixXd::Zero(d, cols));
    Tape::Var base = tape.Constant(sa.topRows(sa.rows() - d));
    std::vector<int> zeros(cols, 0);
    Tape::Var latent = tape.Add(
        tape.GatherCols(mean, zeros),
        tape.Mul(tape.Exp(tape.Scale(tape.GatherCols(logvar, zeros), 0.5)),
                 tape.Constant(std::move(tiled_noise))));
    Tape::Var inputs = tape.ConcatRows(base, latent);
    Tape::Var target = tape.Constant(tn.Normalize(deltas));
    // change of variables back to state units
    const double log_jacobian = tn.stddev.array().log().sum() * cols;

    Tape::Var nll_total{};
    for (int k = 0; k < ensemble.num_members(); ++k) {
      TapeNet net = RecordForward(tape, ensemble.member(k), inputs, false);
      Tape::Var nll = RecordGaussianNll(tape, net.mean, net.logvar, target);
      nll_total = k == 0 ? nll : tape.Add(nll_total, nll);
    }
    Tape::Var expected_ll = tape.Scale(
        tape.AddScalar(nll_total, log_jacobian * ensemble.num_members()),
        -1.0 / (ensemble.num_members() * samples));
    out.expected_log_likelihood = tape.scalar(expected_ll);
    objective = tape.Add(expected_ll, objective);
  }
  tape.Backward(objective);
  out.value = tape.scalar(objective);
  out.kl = tape.scalar(kl);
  out.grad_mean = tape.grad(mean).col(0);
  out.grad_logvar = tape.grad(logvar).col(0);
  return out;
}

Eigen::MatrixXd StratifiedNormal(int dim, int n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("elbo: n_samples must be >= 1");
  const boost::math::normal_distribution<double> normal;
  Eigen::MatrixXd out(dim, n);
  std::vector<int> strata(n);
  for (int i = 0; i < dim; ++i) {
    std::iota(strata.begin(), strata.end(), 0);
    std::shuffle(strata.begin(), strata.end(), rng.engine());
    for (int j = 0; j < n; ++j) {
      double u = (strata[j] + rng.Uniform(0.0, 1.0)) / n;
      u = std::clamp(u, 1e-300, 1.0 - 1e-16);
      out(i, j) = boost::math::quantile(normal, u);
    }
  }
  return out;
}

double Elbo(const Ensemble& ensemble, const DiagGaussian& q,
            std::span<const Transition> transitions, const DiagGaussian& prior,
            int n_samples, Rng& rng) {
  return EstimateElbo(ensemble, q, transitions, prior,
                      StratifiedNormal(q.dim(), n_samples, rng))
      .value;
}

OnlineUpdateResult OnlineUpdate(const Ensemble& ensemble,
                                const DiagGaussian& prior,
                                std::span<const Transition> recent,
                                const OnlineUpdateConfig& config, Rng& rng) {
  prior.Validate();
  OnlineUpdateResult result;
  result.posterior = prior;
  DiagGaussian q = prior;
  AdamState state;
  AdamConfig adam;
  adam.learning_rate = config.learning_rate;
  const int d = q.dim();
  for (int it = 0; it < config.iterations; ++it) {
    ElboEstimate est = EstimateElbo(ensemble, q, recent, prior,
                                    rng.NormalMatrix(d, config.samples));
    if (!std::isfinite(est.value) || !est.grad_mean.allFinite() ||
        !est.grad_logvar.allFinite()) {
      std::ostringstream msg;
      msg << "online update: non-finite objective at iteration " << it
          << " (elbo=" << est.value << ", kl=" << est.kl << ", mean=["
          << q.mean.transpose() << "], logvar=[" << q.logvar.transpose()
          << "])";
      result.ok = false;
      result.diagnostics = msg.str();
      return result;
    }
    // ascend the ELBO
    std::vector<ParamRef> refs = {{"posterior.mean", q.mean.data(), d},
                                  {"posterior.logvar", q.logvar.data(), d}};
    std::vector<Eigen::MatrixXd> grads = {-est.grad_mean, -est.grad_logvar};
    AdamStep(refs, grads, state, adam);
  }
  if (!q.mean.allFinite() || !q.logvar.allFinite()) {
    result.ok = false;
    result.diagnostics = "online update: posterior became non-finite";
    return result;
  }
  result.posterior = std::move(q);
  return result;
}

}  // namespace lmbrl
