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
#include <numbers>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "lmbrl/dynamics_model.h"
#include "lmbrl/latent.h"
#include "lmbrl/rng.h"

namespace lmbrl {
namespace {

// s' = s + a + member_offset * member + latent_gain * e (first latent dim),
// with per-dimension noise variance `variance`.
class ToyModel : public DynamicsModel {
 public:
  ToyModel(int members, double member_offset, double variance,
           int latent_dim = 0, double latent_gain = 0.0)
      : members_(members),
        member_offset_(member_offset),
        variance_(variance),
        latent_dim_(latent_dim),
        latent_gain_(latent_gain) {}

  int state_dim() const override { return 1; }
  int action_dim() const override { return 1; }
  int latent_dim() const override { return latent_dim_; }
  int num_members() const override { return members_; }

  void PredictNext(int member, const Eigen::MatrixXd& states,
                   const Eigen::MatrixXd& actions, const Eigen::MatrixXd& latents,
                   Eigen::MatrixXd* mean, Eigen::MatrixXd* variance) const override {
    *mean = states + actions;
    mean->array() += member_offset_ * member;
    if (latent_dim_ > 0) *mean += latent_gain_ * latents.topRows(1);
    *variance = Eigen::MatrixXd::Constant(states.rows(), states.cols(), variance_);
  }

 private:
  int members_;
  double member_offset_;
  double variance_;
  int latent_dim_;
  double latent_gain_;
};

ActionBounds Box(int dim, double lo, double hi) {
  return {Eigen::VectorXd::Constant(dim, lo), Eigen::VectorXd::Constant(dim, hi)};
}

PlannerConfig Paper() {
  PlannerConfig c;
  c.population = 500;
  c.elite_fraction = 0.1;
  c.iterations = 5;
  return c;
}

BatchRewardFn Constant(double r) {
  return [r](const Eigen::MatrixXd& next, const Eigen::MatrixXd&) {
    return Eigen::VectorXd::Constant(next.cols(), r);
  };
}

TEST(PlannerConfigTest, Validation) {
  PlannerConfig c = Paper();
  EXPECT_EQ(c.num_elites(), 50);
  EXPECT_NO_THROW(c.Validate());
  c.population = 1;
  EXPECT_THROW(c.Validate(), std::invalid_argument);
  c = Paper();
  c.elite_fraction = 0.0;
  EXPECT_THROW(c.Validate(), std::invalid_argument);
  c = Paper();
  c.momentum = 1.0;
  EXPECT_THROW(c.Validate(), std::invalid_argument);
  c = Paper();
  c.horizon = 0;
  EXPECT_THROW(c.Validate(), std::invalid_argument);
}

TEST(RefitTest, IdenticalElitesGiveFloorVariance) {
  Eigen::MatrixXd e(2, 3);
  e << 1, 2, 3, -1, -2, -3;
  std::vector<Eigen::MatrixXd> elites(4, e);
  CemDistribution d = RefitCem(elites, 1e-3);
  EXPECT_TRUE(d.mean.isApprox(e, 1e-15));
  EXPECT_TRUE((d.variance.array() == 1e-3).all());
}

TEST(RefitTest, PopulationVarianceConvention) {
  std::vector<Eigen::MatrixXd> elites = {Eigen::MatrixXd::Constant(1, 1, 0.0),
                                         Eigen::MatrixXd::Constant(1, 1, 2.0)};
  CemDistribution d = RefitCem(elites, 1e-3);
  EXPECT_DOUBLE_EQ(d.mean(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(d.variance(0, 0), 1.0 + 1e-3);
}

TEST(RefitTest, PermutationInvariant) {
  Rng rng(1);
  std::vector<Eigen::MatrixXd> elites;
  for (int i = 0; i < 7; ++i) elites.push_back(rng.NormalMatrix(2, 4));
  CemDistribution a = RefitCem(elites, 1e-3);
  std::reverse(elites.begin(), elites.end());
  std::swap(elites[1], elites[4]);
  CemDistribution b = RefitCem(elites, 1e-3);
  EXPECT_TRUE(a.mean.isApprox(b.mean, 1e-14));
  EXPECT_TRUE(a.variance.isApprox(b.variance, 1e-14));
}

TEST(RefitTest, MomentumBlendsWithPrevious) {
  CemDistribution prev{Eigen::MatrixXd::Constant(1, 1, 4.0),
                       Eigen::MatrixXd::Constant(1, 1, 2.0)};
  std::vector<Eigen::MatrixXd> elites = {Eigen::MatrixXd::Constant(1, 1, 0.0),
                                         Eigen::MatrixXd::Constant(1, 1, 2.0)};
  CemDistribution d = RefitCem(elites, 0.0, &prev, 0.25);
  EXPECT_DOUBLE_EQ(d.mean(0, 0), 0.25 * 4.0 + 0.75 * 1.0);
  EXPECT_DOUBLE_EQ(d.variance(0, 0), 0.25 * 2.0 + 0.75 * 1.0);
}

TEST(RefitTest, TooFewElitesThrows) {
  std::vector<Eigen::MatrixXd> one = {Eigen::MatrixXd::Zero(1, 1)};
  EXPECT_THROW(RefitCem(one, 1e-3), std::invalid_argument);
}

TEST(CemTest, QuadraticConvergesOnEverySeed) {
  for (uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    ActionBounds bounds = Box(2, -1.0, 1.0);
    Eigen::MatrixXd target = 0.8 * (2.0 * Eigen::MatrixXd::Random(2, 3));
    target = target.cwiseMax(-0.8).cwiseMin(0.8);
    SequenceScorer scorer = [&](std::span<const Eigen::MatrixXd> seqs) {
      Eigen::VectorXd s(seqs.size());
      for (size_t i = 0; i < seqs.size(); ++i) s[i] = -(seqs[i] - target).squaredNorm();
      return s;
    };
    CemResult r = CemOptimize(scorer, CemDistribution::Initial(bounds, 3), bounds,
                              Paper(), rng);
    EXPECT_LT((r.distribution.mean - target).norm(), 0.05) << "seed " << seed;
  }
}

TEST(CemTest, BestScoreIsMonotone) {
  Rng rng(2);
  ActionBounds bounds = Box(1, -2.0, 2.0);
  SequenceScorer scorer = [](std::span<const Eigen::MatrixXd> seqs) {
    Eigen::VectorXd s(seqs.size());
    for (size_t i = 0; i < seqs.size(); ++i) {
      s[i] = -std::abs(std::sin(3.0 * seqs[i].sum())) - 0.1 * seqs[i].squaredNorm();
    }
    return s;
  };
  PlannerConfig c = Paper();
  c.iterations = 8;
  c.population = 60;
  CemResult r = CemOptimize(scorer, CemDistribution::Initial(bounds, 4), bounds, c, rng);
  ASSERT_EQ(r.best_scores.size(), 8u);
  for (size_t i = 1; i < r.best_scores.size(); ++i) {
    EXPECT_GE(r.best_scores[i], r.best_scores[i - 1]);
  }
}

TEST(CemTest, EveryProposalRespectsBounds) {
  Rng rng(3);
  ActionBounds bounds = Box(2, -0.5, 1.5);
  bool inside = true;
  SequenceScorer scorer = [&](std::span<const Eigen::MatrixXd> seqs) {
    Eigen::VectorXd s(seqs.size());
    for (size_t i = 0; i < seqs.size(); ++i) {
      inside = inside && seqs[i].minCoeff() >= -0.5 && seqs[i].maxCoeff() <= 1.5;
      s[i] = seqs[i].sum();
    }
    return s;
  };
  CemResult r = CemOptimize(scorer, CemDistribution::Initial(bounds, 5), bounds,
                            Paper(), rng);
  EXPECT_TRUE(inside);
  EXPECT_GE(r.first_action.minCoeff(), -0.5);
  EXPECT_LE(r.first_action.maxCoeff(), 1.5);
}

TEST(CemTest, AllNonFiniteScoresRaise) {
  Rng rng(4);
  ActionBounds bounds = Box(1, -1.0, 1.0);
  SequenceScorer scorer = [](std::span<const Eigen::MatrixXd> seqs) {
    return Eigen::VectorXd::Constant(seqs.size(), NAN);
  };
  try {
    CemOptimize(scorer, CemDistribution::Initial(bounds, 2), bounds, Paper(), rng);
    FAIL() << "expected PlanningError";
  } catch (const PlanningError& e) {
    EXPECT_EQ(e.sequence().rows(), 1);
    EXPECT_EQ(e.sequence().cols(), 2);
  }
}

TEST(CemPlanTest, OneStepAnalyticOptimum) {
  ToyModel model(2, 0.0, 0.0);
  ActionBounds bounds = Box(1, -2.0, 2.0);
  BatchRewardFn reward = [](const Eigen::MatrixXd& next, const Eigen::MatrixXd&) {
    return Eigen::VectorXd(-(next.row(0).array() - 1.0).square().matrix().transpose());
  };
  PlannerConfig c = Paper();
  c.horizon = 1;
  c.particles = 1;
  Rng rng(5);
  CemResult r = CemPlan(model, nullptr, Eigen::VectorXd::Zero(1), reward, bounds, c, rng);
  EXPECT_NEAR(r.first_action[0], 1.0, 0.05);
}

// Second moment of N(0, v) clipped to [-c, c].
double ClippedSecondMoment(double v, double c) {
  const double s = std::sqrt(v);
  const double z = c / s;
  const double cdf = 0.5 * std::erfc(-z / std::sqrt(2.0));
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  return v * (2.0 * cdf - 1.0) - 2.0 * c * s * pdf + 2.0 * c * c * (1.0 - cdf);
}

TEST(CemPlanTest, FlatRewardOnlyShrinksThroughClipping) {
  ToyModel model(2, 0.0, 0.0);
  ActionBounds bounds = Box(1, -1.0, 1.0);
  PlannerConfig c = Paper();
  c.horizon = 3;
  c.particles = 1;
  // elites are a random subset, so each refit sees the clipped proposal
  const int n = c.num_elites();
  double expected = 1.0;
  for (int i = 0; i < c.iterations; ++i) {
    const double fit = ClippedSecondMoment(expected, 1.0) * (n - 1) / n;
    expected = c.momentum * expected + (1.0 - c.momentum) * fit + c.variance_floor;
  }
  double total = 0.0;
  int count = 0;
  for (uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    CemResult r = CemPlan(model, nullptr, Eigen::VectorXd::Zero(1), Constant(0.0),
                          bounds, c, rng);
    EXPECT_LT(std::abs(r.first_action[0]), 0.5) << "seed " << seed;
    total += r.distribution.variance.sum();
    count += static_cast<int>(r.distribution.variance.size());
  }
  EXPECT_NEAR(total / count, expected, 0.15 * expected);
}

TEST(CemPlanTest, SeedDeterministic) {
  ToyModel model(3, 0.1, 0.05);
  ActionBounds bounds = Box(1, -1.0, 1.0);
  BatchRewardFn reward = [](const Eigen::MatrixXd& next, const Eigen::MatrixXd&) {
    return Eigen::VectorXd(-next.row(0).array().square().matrix().transpose());
  };
  PlannerConfig c = Paper();
  c.horizon = 4;
  c.particles = 3;
  Rng a(6), b(6);
  Eigen::VectorXd s = Eigen::VectorXd::Constant(1, 0.7);
  EXPECT_EQ(CemPlan(model, nullptr, s, reward, bounds, c, a).first_action,
            CemPlan(model, nullptr, s, reward, bounds, c, b).first_action);
}

TEST(RolloutTest, ConstantRewardSumsToHorizon) {
  ToyModel model(3, 0.2, 0.3);
  Rng rng(7);
  Eigen::MatrixXd seq = Eigen::MatrixXd::Zero(1, 6);
  EXPECT_DOUBLE_EQ(RolloutExpectedReward(model, nullptr, Eigen::VectorXd::Zero(1),
                                         seq, 10, Constant(1.0), rng),
                   6.0);
}

TEST(RolloutTest, DegeneratePropagationMatchesSingleRollout) {
  ToyModel model(4, 0.0, 0.0);
  Rng rng(8);
  Eigen::MatrixXd seq(1, 3);
  seq << 0.5, -0.2, 0.1;
  BatchRewardFn reward = [](const Eigen::MatrixXd& next, const Eigen::MatrixXd&) {
    return Eigen::VectorXd(next.row(0).transpose());
  };
  // states 0.5, 0.3, 0.4
  EXPECT_NEAR(RolloutExpectedReward(model, nullptr, Eigen::VectorXd::Zero(1), seq,
                                    25, reward, rng),
              1.2, 1e-14);
}

TEST(RolloutTest, VarianceScalesInverselyWithParticles) {
  ToyModel model(2, 0.0, 0.5);
  Eigen::MatrixXd seq = Eigen::MatrixXd::Zero(1, 4);
  BatchRewardFn reward = [](const Eigen::MatrixXd& next, const Eigen::MatrixXd&) {
    return Eigen::VectorXd(next.row(0).transpose());
  };
  auto spread = [&](int particles) {
    Rng rng(9 + particles);
    std::vector<double> v;
    for (int r = 0; r < 200; ++r) {
      v.push_back(RolloutExpectedReward(model, nullptr, Eigen::VectorXd::Zero(1), seq,
                                        particles, reward, rng));
    }
    double m = 0.0;
    for (double x : v) m += x;
    m /= v.size();
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / (v.size() - 1);
  };
  EXPECT_LT(spread(1000), spread(1) / 500.0);
}

TEST(RolloutTest, MemberAssignmentIsFixedForTheHorizon) {
  ToyModel model(5, 1.0, 0.0);
  Rng rng(10);
  const int h = 6;
  std::vector<Eigen::MatrixXd> seen;
  BatchRewardFn reward = [&](const Eigen::MatrixXd& next, const Eigen::MatrixXd&) {
    seen.push_back(next);
    return Eigen::VectorXd::Zero(next.cols());
  };
  std::vector<Eigen::MatrixXd> seqs(7, Eigen::MatrixXd::Zero(1, h));
  RolloutExpectedRewards(model, nullptr, Eigen::VectorXd::Zero(1), seqs, 9, reward, rng);
  ASSERT_EQ(seen.size(), static_cast<size_t>(h));
  std::vector<int> used(5, 0);
  for (Eigen::Index j = 0; j < seen[0].cols(); ++j) {
    const double member = seen[0](0, j);
    ++used[static_cast<int>(member)];
    for (int t = 1; t < h; ++t) {
      EXPECT_DOUBLE_EQ(seen[t](0, j), (t + 1) * member) << "particle " << j;
    }
  }
  for (int u : used) EXPECT_GT(u, 0);
}

TEST(RolloutTest, LatentDrawDrivesPrediction) {
  ToyModel model(2, 0.0, 0.01, 2, 1.0);
  Eigen::MatrixXd seq = Eigen::MatrixXd::Zero(1, 5);
  BatchRewardFn reward = [](const Eigen::MatrixXd& next, const Eigen::MatrixXd&) {
    return Eigen::VectorXd(next.row(0).transpose());
  };
  DiagGaussian up{Eigen::Vector2d(1.0, 0.0), Eigen::Vector2d::Constant(std::log(0.01))};
  DiagGaussian down{Eigen::Vector2d(-1.0, 0.0), Eigen::Vector2d::Constant(std::log(0.01))};
  Rng rng(11);
  std::vector<double> a, b;
  for (int r = 0; r < 30; ++r) {
    a.push_back(RolloutExpectedReward(model, &up, Eigen::VectorXd::Zero(1), seq, 20,
                                      reward, rng));
    b.push_back(RolloutExpectedReward(model, &down, Eigen::VectorXd::Zero(1), seq, 20,
                                      reward, rng));
  }
  auto stats = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= v.size();
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::make_pair(m, std::sqrt(s / (v.size() - 1)));
  };
  auto [ma, sa] = stats(a);
  auto [mb, sb] = stats(b);
  EXPECT_GT(ma - mb, 3.0 * std::max(sa, sb));
  EXPECT_THROW(RolloutExpectedReward(model, nullptr, Eigen::VectorXd::Zero(1), seq, 2,
                                     reward, rng),
               std::invalid_argument);
}

TEST(MpcPlannerTest, WarmStartShiftsPreviousSolution) {
  CemDistribution d{Eigen::MatrixXd(1, 3), Eigen::MatrixXd::Constant(1, 3, 0.01)};
  d.mean << 0.1, 0.2, 0.3;
  ActionBounds bounds = Box(1, -2.0, 2.0);
  CemDistribution s = d.Shifted(bounds);
  EXPECT_DOUBLE_EQ(s.mean(0, 0), 0.2);
  EXPECT_DOUBLE_EQ(s.mean(0, 1), 0.3);
  EXPECT_DOUBLE_EQ(s.mean(0, 2), 0.0);
  EXPECT_DOUBLE_EQ(s.variance(0, 0), 4.0);
}

TEST(MpcPlannerTest, ReachesTargetUnderKnownModel) {
  ToyModel model(2, 0.0, 0.0);
  ActionBounds bounds = Box(1, -0.5, 0.5);
  PlannerConfig c = Paper();
  c.horizon = 5;
  c.particles = 1;
  c.iterations = 3;
  MpcPlanner planner(c, bounds);
  BatchRewardFn reward = [](const Eigen::MatrixXd& next, const Eigen::MatrixXd&) {
    return Eigen::VectorXd(-(next.row(0).array() - 2.0).square().matrix().transpose());
  };
  Rng rng(12);
  Eigen::VectorXd s = Eigen::VectorXd::Zero(1);
  for (int t = 0; t < 10; ++t) {
    Eigen::VectorXd a = planner.Plan(model, nullptr, s, reward, rng);
    ASSERT_LE(std::abs(a[0]), 0.5);
    s += a;
  }
  EXPECT_NEAR(s[0], 2.0, 0.1);
}

}  // namespace
}  // namespace lmbrl
