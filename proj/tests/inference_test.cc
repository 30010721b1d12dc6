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

#include <cmath>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "conjugate_model.h"
#include "lmbrl/ensemble.h"
#include "lmbrl/latent.h"
#include "lmbrl/rng.h"

#include <boost/math/distributions/normal.hpp>

namespace lmbrl {
namespace {

using testing::ConjugateModel;

DiagGaussian Scalar(double mean, double var) {
  return {Eigen::VectorXd::Constant(1, mean),
          Eigen::VectorXd::Constant(1, std::log(var))};
}

std::vector<double> Draws(double e_true, const ConjugateModel& model, int n,
                          Rng& rng) {
  std::vector<double> ys;
  for (int i = 0; i < n; ++i) {
    ys.push_back(model.c * e_true + std::sqrt(model.noise_variance()) * rng.Normal());
  }
  return ys;
}

std::vector<Transition> AsTransitions(const std::vector<double>& ys) {
  std::vector<Transition> out;
  for (double y : ys) out.push_back(ConjugateModel::Observation(y));
  return out;
}

OnlineUpdateConfig PreciseOnline() {
  OnlineUpdateConfig c;
  c.iterations = 1500;
  c.learning_rate = 1e-2;
  c.samples = 16;
  return c;
}

TEST(ElboTest, PriorWithNoDataIsZero) {
  ConjugateModel model;
  Ensemble e = model.MakeEnsemble();
  Rng rng(1);
  DiagGaussian prior = DiagGaussian::Standard(1);
  EXPECT_EQ(Elbo(e, prior, {}, prior, 10, rng), 0.0);
}

TEST(ElboTest, NoDataGivesNegativeKl) {
  ConjugateModel model;
  Ensemble e = model.MakeEnsemble();
  Rng rng(2);
  DiagGaussian prior = DiagGaussian::Standard(1);
  DiagGaussian q = Scalar(0.7, 0.4);
  EXPECT_NEAR(Elbo(e, q, {}, prior, 10, rng), -KlDiagGaussian(q, prior), 1e-14);
}

TEST(ElboTest, RejectsTransitionsFromSeveralEnvironments) {
  ConjugateModel model;
  Ensemble e = model.MakeEnsemble();
  Rng rng(3);
  std::vector<Transition> mixed = {ConjugateModel::Observation(0.1, 0),
                                   ConjugateModel::Observation(0.2, 1)};
  DiagGaussian prior = DiagGaussian::Standard(1);
  EXPECT_THROW(Elbo(e, prior, mixed, prior, 4, rng), std::invalid_argument);
}

TEST(ElboTest, RejectsModelWithoutLatent) {
  Rng rng(4);
  EnsembleConfig c;
  c.latent_dim = 0;
  c.hidden = {4};
  Ensemble e(c, 1, 1, rng);
  DiagGaussian prior = DiagGaussian::Standard(1);
  EXPECT_THROW(Elbo(e, prior, {}, prior, 4, rng), std::invalid_argument);
}

TEST(ElboTest, ConjugatePosteriorMaximizesElbo) {
  ConjugateModel model{1.3, 0.0};
  Ensemble e = model.MakeEnsemble();
  Rng rng(5);
  std::vector<double> ys = Draws(0.6, model, 8, rng);
  std::vector<Transition> data = AsTransitions(ys);
  DiagGaussian prior = DiagGaussian::Standard(1);
  ConjugateModel::Posterior exact = model.Analytic(0.0, 1.0, ys);
  const Eigen::MatrixXd noise = StratifiedNormal(1, 4000, rng);
  const double best =
      EstimateElbo(e, Scalar(exact.mean, exact.variance), data, prior, noise).value;
  const double log_evidence = model.LogMarginal(0.0, 1.0, ys);
  EXPECT_NEAR(best, log_evidence, 1e-3);
  for (int i = 0; i < 100; ++i) {
    DiagGaussian q = Scalar(exact.mean, exact.variance);
    q.mean[0] += 0.3 * rng.Normal();
    q.logvar[0] += 0.3 * rng.Normal();
    const double value = EstimateElbo(e, q, data, prior, noise).value;
    EXPECT_LE(value, best) << "perturbation " << i;
    EXPECT_LE(value, log_evidence) << "perturbation " << i;
  }
}

TEST(ElboTest, EstimatorSpreadShrinksWithSamples) {
  ConjugateModel model{1.0, 0.0};
  Ensemble e = model.MakeEnsemble();
  Rng rng(6);
  std::vector<Transition> data = AsTransitions(Draws(1.0, model, 5, rng));
  DiagGaussian prior = DiagGaussian::Standard(1);
  DiagGaussian q = Scalar(0.2, 0.5);
  auto spread = [&](int n) {
    std::vector<double> v;
    for (int r = 0; r < 200; ++r) v.push_back(Elbo(e, q, data, prior, n, rng));
    double m = 0.0;
    for (double x : v) m += x;
    m /= v.size();
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / (v.size() - 1));
  };
  const double small = spread(10);
  const double large = spread(1000);
  EXPECT_GT(small, 0.0);
  EXPECT_LT(large, 0.1 * small);
}

TEST(ElboTest, StratifiedDrawsCoverEveryStratum) {
  Rng rng(7);
  const int n = 50;
  Eigen::MatrixXd z = StratifiedNormal(2, n, rng);
  boost::math::normal_distribution<double> normal;
  for (int i = 0; i < 2; ++i) {
    std::vector<int> hits(n, 0);
    for (int j = 0; j < n; ++j) {
      ++hits[static_cast<int>(boost::math::cdf(normal, z(i, j)) * n)];
    }
    for (int h : hits) EXPECT_EQ(h, 1);
  }
}

TEST(ElboTest, ReparameterizedGradientsMatchFiniteDifferences) {
  for (uint64_t seed : {1, 2, 3}) {
    Rng rng(seed);
    EnsembleConfig config;
    config.members = 3;
    config.hidden = {8, 8};
    config.latent_dim = 2;
    Ensemble e(config, 2, 1, rng);
    std::vector<Transition> data;
    for (int i = 0; i < 6; ++i) {
      data.push_back({0, rng.NormalMatrix(2, 1), rng.NormalMatrix(1, 1),
                      rng.NormalMatrix(2, 1)});
    }
    DiagGaussian prior = DiagGaussian::Standard(2);
    DiagGaussian q{rng.NormalMatrix(2, 1), 0.3 * rng.NormalMatrix(2, 1)};
    const Eigen::MatrixXd noise = rng.NormalMatrix(2, 5);
    ElboEstimate est = EstimateElbo(e, q, data, prior, noise);
    auto value = [&](const DiagGaussian& g) {
      return EstimateElbo(e, g, data, prior, noise).value;
    };
    for (int i = 0; i < 2; ++i) {
      for (int which = 0; which < 2; ++which) {
        DiagGaussian up = q, down = q;
        Eigen::VectorXd& pu = which == 0 ? up.mean : up.logvar;
        Eigen::VectorXd& pd = which == 0 ? down.mean : down.logvar;
        pu[i] += 1e-5;
        pd[i] -= 1e-5;
        const double numeric = (value(up) - value(down)) / 2e-5;
        const double analytic = which == 0 ? est.grad_mean[i] : est.grad_logvar[i];
        EXPECT_LT(std::abs(numeric - analytic),
                  1e-3 * std::max(1.0, std::abs(numeric)))
            << "seed " << seed << (which == 0 ? " mean " : " logvar ") << i;
      }
    }
  }
}

TEST(OnlineUpdateTest, UninformativeLikelihoodKeepsPrior) {
  ConjugateModel model{0.0, 0.0};
  Ensemble e = model.MakeEnsemble();
  Rng rng(8);
  DiagGaussian prior = Scalar(0.4, 0.3);
  std::vector<Transition> data = {ConjugateModel::Observation(1.5)};
  OnlineUpdateResult r = OnlineUpdate(e, prior, data, OnlineUpdateConfig{}, rng);
  ASSERT_TRUE(r.ok);
  EXPECT_LT(KlDiagGaussian(r.posterior, prior), 1e-3);
}

TEST(OnlineUpdateTest, ChainedUpdatesRecoverConjugatePosterior) {
  ConjugateModel model{1.0, 0.0};
  Ensemble e = model.MakeEnsemble();
  Rng rng(9);
  std::vector<double> ys = Draws(0.8, model, 20, rng);
  DiagGaussian q = DiagGaussian::Standard(1);
  for (double y : ys) {
    std::vector<Transition> one = {ConjugateModel::Observation(y)};
    OnlineUpdateResult r = OnlineUpdate(e, q, one, PreciseOnline(), rng);
    ASSERT_TRUE(r.ok) << r.diagnostics;
    q = r.posterior;
  }
  ConjugateModel::Posterior exact = model.Analytic(0.0, 1.0, ys);
  EXPECT_LT(std::abs(q.mean[0] - exact.mean) / std::abs(exact.mean), 0.05);
  EXPECT_LT(std::abs(q.variance()[0] - exact.variance) / exact.variance, 0.05);
}

TEST(OnlineUpdateTest, ChainingMatchesBatchUpdate) {
  ConjugateModel model{0.8, -0.5};
  Ensemble e = model.MakeEnsemble();
  Rng rng(10);
  std::vector<double> a = Draws(-0.7, model, 4, rng);
  std::vector<double> b = Draws(-0.7, model, 4, rng);
  std::vector<double> both = a;
  both.insert(both.end(), b.begin(), b.end());
  DiagGaussian prior = DiagGaussian::Standard(1);
  OnlineUpdateResult first = OnlineUpdate(e, prior, AsTransitions(a), PreciseOnline(), rng);
  OnlineUpdateResult chained =
      OnlineUpdate(e, first.posterior, AsTransitions(b), PreciseOnline(), rng);
  OnlineUpdateResult batch =
      OnlineUpdate(e, prior, AsTransitions(both), PreciseOnline(), rng);
  ASSERT_TRUE(first.ok && chained.ok && batch.ok);
  EXPECT_LT(std::abs(chained.posterior.mean[0] - batch.posterior.mean[0]),
            0.1 * std::abs(batch.posterior.mean[0]));
  EXPECT_LT(std::abs(chained.posterior.variance()[0] - batch.posterior.variance()[0]),
            0.1 * batch.posterior.variance()[0]);
}

TEST(OnlineUpdateTest, NonFiniteObjectiveReturnsPrior) {
  ConjugateModel model{1.0, 0.0};
  Ensemble e = model.MakeEnsemble();
  Rng rng(11);
  DiagGaussian prior = Scalar(0.2, 0.5);
  std::vector<Transition> data = {ConjugateModel::Observation(1e200)};
  OnlineUpdateResult r = OnlineUpdate(e, prior, data, OnlineUpdateConfig{}, rng);
  EXPECT_FALSE(r.ok);
  EXPECT_FALSE(r.diagnostics.empty());
  EXPECT_EQ(r.posterior.mean, prior.mean);
  EXPECT_EQ(r.posterior.logvar, prior.logvar);
}

TEST(OnlineUpdateTest, IsSeedDeterministic) {
  ConjugateModel model{1.0, 0.0};
  Ensemble e = model.MakeEnsemble();
  std::vector<Transition> data = {ConjugateModel::Observation(0.9)};
  Rng a(12), b(12);
  DiagGaussian prior = DiagGaussian::Standard(1);
  EXPECT_EQ(OnlineUpdate(e, prior, data, OnlineUpdateConfig{}, a).posterior.mean,
            OnlineUpdate(e, prior, data, OnlineUpdateConfig{}, b).posterior.mean);
}

}  // namespace
}  // namespace lmbrl
