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

#include "lmbrl/planner.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

namespace lmbrl {

int PlannerConfig::num_elites() const {
  return std::max(2, static_cast<int>(std::lround(population * elite_fraction)));
}

void PlannerConfig::Validate() const {
  if (population < 2 || iterations < 1 || horizon < 1 || particles < 1 ||
      !(elite_fraction > 0.0 && elite_fraction <= 1.0) ||
      !(variance_floor >= 0.0) || !(momentum >= 0.0 && momentum < 1.0) ||
      num_elites() > population) {
    throw std::invalid_argument("planner config: invalid values");
  }
}

Eigen::MatrixXd ActionBounds::Clip(const Eigen::MatrixXd& actions) const {
  Eigen::MatrixXd out(actions.rows(), actions.cols());
  for (Eigen::Index j = 0; j < actions.cols(); ++j) {
    out.col(j) = actions.col(j).cwiseMax(low).cwiseMin(high);
  }
  return out;
}

CemDistribution CemDistribution::Initial(const ActionBounds& bounds,
                                         int horizon) {
  CemDistribution d;
  d.mean = Eigen::MatrixXd::Zero(bounds.dim(), horizon);
  Eigen::VectorXd half_range = 0.5 * (bounds.high - bounds.low);
  d.variance = half_range.cwiseAbs2().replicate(1, horizon);
  return d;
}

CemDistribution CemDistribution::Shifted(const ActionBounds& bounds) const {
  CemDistribution init = Initial(bounds, horizon());
  CemDistribution d = init;
  if (horizon() > 1) {
    d.mean.leftCols(horizon() - 1) = mean.rightCols(horizon() - 1);
  }
  return d;
}

CemDistribution RefitCem(std::span<const Eigen::MatrixXd> elites,
                         double variance_floor,
                         const CemDistribution* previous, double momentum) {
  if (elites.size() < 2) {
    throw std::invalid_argument("refit: need at least 2 elites, got " +
                                std::to_string(elites.size()));
  }
  const double n = static_cast<double>(elites.size());
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(elites[0].rows(), elites[0].cols());
  for (const auto& e : elites) {
    if (e.rows() != mean.rows() || e.cols() != mean.cols()) {
      throw std::invalid_argument("refit: elites differ in shape");
    }
    mean += e;
  }
  mean /= n;
  Eigen::MatrixXd var = Eigen::MatrixXd::Zero(mean.rows(), mean.cols());
  for (const auto& e : elites) var += (e - mean).cwiseAbs2();
  var /= n;

  CemDistribution out;
  if (previous != nullptr && momentum > 0.0) {
    out.mean = momentum * previous->mean + (1.0 - momentum) * mean;
    out.variance = momentum * previous->variance + (1.0 - momentum) * var;
  } else {
    out.mean = std::move(mean);
    out.variance = std::move(var);
  }
  out.variance.array() += variance_floor;
  return out;
}

CemResult CemOptimize(const SequenceScorer& scorer, CemDistribution initial,
                      const ActionBounds& bounds, const PlannerConfig& config,
                      Rng& rng) {
  config.Validate();
  if (initial.mean.rows() != bounds.dim()) {
    throw std::invalid_argument("cem: proposal and bounds differ in dimension");
  }
  CemResult result;
  result.distribution = std::move(initial);
  const int elites_n = config.num_elites();
  double best = -std::numeric_limits<double>::infinity();

  std::vector<Eigen::MatrixXd> population(config.population);
  std::vector<int> order(config.population);
  for (int it = 0; it < config.iterations; ++it) {
    const CemDistribution& dist = result.distribution;
    Eigen::MatrixXd stddev = dist.variance.cwiseSqrt();
    for (int i = 0; i < config.population; ++i) {
      population[i] = bounds.Clip(
          dist.mean +
          stddev.cwiseProduct(rng.NormalMatrix(dist.mean.rows(), dist.mean.cols())));
    }
    if (result.best_sequence.size() > 0) population[0] = result.best_sequence;

    Eigen::VectorXd scores = scorer(population);
    if (scores.size() != config.population) {
      throw std::invalid_argument("cem: scorer returned wrong number of scores");
    }
    bool any_finite = false;
    for (Eigen::Index i = 0; i < scores.size(); ++i) {
      if (std::isfinite(scores[i])) {
        any_finite = true;
      } else {
        scores[i] = -std::numeric_limits<double>::infinity();
      }
    }
    if (!any_finite) {
      throw PlanningError("cem: every rollout score is non-finite (iteration " +
                              std::to_string(it) + ")",
                          population[0]);
    }
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + elites_n, order.end(),
                      [&scores](int a, int b) { return scores[a] > scores[b]; });
    if (scores[order[0]] > best) {
      best = scores[order[0]];
      result.best_sequence = population[order[0]];
    }
    result.best_scores.push_back(best);
    std::vector<Eigen::MatrixXd> elites;
    elites.reserve(elites_n);
    for (int i = 0; i < elites_n; ++i) elites.push_back(population[order[i]]);
    result.distribution =
        RefitCem(elites, config.variance_floor, &dist, config.momentum);
  }
  result.first_action = bounds.Clip(result.distribution.mean.col(0));
  return result;
}

Eigen::VectorXd RolloutExpectedRewards(
    const DynamicsModel& model, const DiagGaussian* posterior,
    const Eigen::VectorXd& state, std::span<const Eigen::MatrixXd> sequences,
    int particles, const BatchRewardFn& reward, Rng& rng) {
  if (particles < 1) throw std::invalid_argument("rollout: particles < 1");
  if (state.size() != model.state_dim()) {
    throw std::invalid_argument("rollout: state dimension mismatch");
  }
  const int latent_dim = model.latent_dim();
  if (latent_dim > 0 && posterior == nullptr) {
    throw std::invalid_argument("rollout: latent model needs a posterior");
  }
  const int num_seq = static_cast<int>(sequences.size());
  if (num_seq == 0) return {};
  const int horizon = static_cast<int>(sequences[0].cols());
  const int n = num_seq * particles;

  // (member, sequence) per particle, grouped by member so each member
  // predicts one contiguous block of columns
  std::vector<std::pair<int, int>> slots(n);
  for (int i = 0; i < n; ++i) slots[i] = {rng.Index(model.num_members()), i / particles};
  std::stable_sort(slots.begin(), slots.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<int> block_start(model.num_members() + 1, 0);
  for (const auto& s : slots) ++block_start[s.first + 1];
  std::partial_sum(block_start.begin(), block_start.end(), block_start.begin());

  Eigen::MatrixXd latents(latent_dim, n);
  if (latent_dim > 0) {
    Eigen::VectorXd sd = posterior->stddev();
    latents = (rng.NormalMatrix(latent_dim, n).array().colwise() * sd.array())
                  .matrix()
                  .colwise() +
              posterior->mean;
  }

  Eigen::MatrixXd states = state.replicate(1, n);
  Eigen::MatrixXd actions(model.action_dim(), n);
  Eigen::MatrixXd next(model.state_dim(), n);
  Eigen::VectorXd returns = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd mean;
  Eigen::MatrixXd var;
  for (int t = 0; t < horizon; ++t) {
    for (int i = 0; i < n; ++i) actions.col(i) = sequences[slots[i].second].col(t);
    for (int m = 0; m < model.num_members(); ++m) {
      const int begin = block_start[m];
      const int count = block_start[m + 1] - begin;
      if (count == 0) continue;
      model.PredictNext(m, states.middleCols(begin, count),
                        actions.middleCols(begin, count),
                        latent_dim > 0 ? Eigen::MatrixXd(latents.middleCols(begin, count))
                                       : Eigen::MatrixXd(0, count),
                        &mean, &var);
      next.middleCols(begin, count) =
          mean + var.cwiseMax(0.0).cwiseSqrt().cwiseProduct(
                     rng.NormalMatrix(mean.rows(), mean.cols()));
    }
    returns += reward(next, actions);
    states.swap(next);
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(num_seq);
  for (int i = 0; i < n; ++i) out[slots[i].second] += returns[i];
  return out / static_cast<double>(particles);
}

double RolloutExpectedReward(const DynamicsModel& model,
                             const DiagGaussian* posterior,
                             const Eigen::VectorXd& state,
                             const Eigen::MatrixXd& sequence, int particles,
                             const BatchRewardFn& reward, Rng& rng) {
  std::vector<Eigen::MatrixXd> one = {sequence};
  return RolloutExpectedRewards(model, posterior, state, one, particles,
                                reward, rng)[0];
}

CemResult CemPlan(const DynamicsModel& model, const DiagGaussian* posterior,
                  const Eigen::VectorXd& state, const BatchRewardFn& reward,
                  const ActionBounds& bounds, const PlannerConfig& config,
                  Rng& rng, const CemDistribution* initial) {
  CemDistribution start = initial != nullptr
                              ? *initial
                              : CemDistribution::Initial(bounds, config.horizon);
  SequenceScorer scorer = [&](std::span<const Eigen::MatrixXd> seqs) {
    return RolloutExpectedRewards(model, posterior, state, seqs,
                                  config.particles, reward, rng);
  };
  return CemOptimize(scorer, std::move(start), bounds, config, rng);
}

MpcPlanner::MpcPlanner(PlannerConfig config, ActionBounds bounds)
    : config_(std::move(config)), bounds_(std::move(bounds)) {
  config_.Validate();
}

void MpcPlanner::Reset() { previous_.reset(); }

Eigen::VectorXd MpcPlanner::Plan(const DynamicsModel& model,
                                 const DiagGaussian* posterior,
                                 const Eigen::VectorXd& state,
                                 const BatchRewardFn& reward, Rng& rng) {
  CemDistribution start = previous_ ? previous_->Shifted(bounds_)
                                    : CemDistribution::Initial(bounds_, config_.horizon);
  CemResult r = CemPlan(model, posterior, state, reward, bounds_, config_, rng,
                        &start);
  previous_ = r.distribution;
  return r.first_action;
}

}  // namespace lmbrl
