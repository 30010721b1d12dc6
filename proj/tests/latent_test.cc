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

#include <gtest/gtest.h>

#include "lmbrl/rng.h"
#include "lmbrl/tape.h"

namespace lmbrl {
namespace {

DiagGaussian Make(std::initializer_list<double> mean,
                  std::initializer_list<double> logvar) {
  DiagGaussian g;
  g.mean = Eigen::Map<const Eigen::VectorXd>(mean.begin(), mean.size());
  g.logvar = Eigen::Map<const Eigen::VectorXd>(logvar.begin(), logvar.size());
  return g;
}

DiagGaussian RandomGaussian(int d, Rng& rng) {
  DiagGaussian g;
  g.mean = rng.NormalMatrix(d, 1);
  g.logvar = 0.5 * rng.NormalMatrix(d, 1);
  return g;
}

double LogDensity(const DiagGaussian& g, const Eigen::VectorXd& x) {
  const Eigen::ArrayXd var = g.variance().array();
  return -0.5 * ((x - g.mean).array().square() / var + var.log() +
                 std::log(2 * M_PI))
                    .sum();
}

TEST(LatentTest, DegenerateSampleEqualsMean) {
  Rng rng(1);
  DiagGaussian q = Make({0.3, -1.2}, {-30.0, -30.0});
  LatentSample s = SampleLatent(q, rng);
  EXPECT_LT((s.value - q.mean).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(LatentTest, SampleIsMeanPlusScaledNoise) {
  Rng rng(2);
  DiagGaussian q = Make({1.0, 2.0}, {0.5, -0.7});
  LatentSample s = SampleLatent(q, rng);
  EXPECT_TRUE(s.value.isApprox(
      q.mean + q.stddev().cwiseProduct(s.noise), 1e-14));
}

TEST(LatentTest, StandardNormalMoments) {
  Rng rng(3);
  DiagGaussian q = DiagGaussian::Standard(1);
  const int n = 100000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = SampleLatent(q, rng).value[0];
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / n;
  EXPECT_LT(std::abs(mean), 0.02);
  EXPECT_LT(std::abs(sum_sq / n - mean * mean - 1.0), 0.05);
}

TEST(LatentTest, SamplingIsSeedDeterministic) {
  DiagGaussian q = Make({0.0, 1.0}, {0.0, 0.2});
  Rng a(17), b(17);
  EXPECT_EQ(SampleLatent(q, a).value, SampleLatent(q, b).value);
}

TEST(LatentTest, KlOfIdenticalIsZero) {
  DiagGaussian p = DiagGaussian::Standard(2);
  EXPECT_EQ(KlDiagGaussian(p, p), 0.0);
  Rng rng(4);
  DiagGaussian q = RandomGaussian(3, rng);
  EXPECT_LT(std::abs(KlDiagGaussian(q, q)), 1e-12);
}

TEST(LatentTest, KlUnitShiftIsHalf) {
  EXPECT_NEAR(KlDiagGaussian(Make({1.0, 0.0}, {0.0, 0.0}),
                             DiagGaussian::Standard(2)),
              0.5, 1e-15);
}

TEST(LatentTest, KlIsNonNegative) {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    EXPECT_GE(KlDiagGaussian(RandomGaussian(3, rng), RandomGaussian(3, rng)), 0.0);
  }
}

TEST(LatentTest, KlMatchesMonteCarlo) {
  Rng rng(6);
  for (int pair = 0; pair < 3; ++pair) {
    DiagGaussian q = RandomGaussian(2, rng);
    DiagGaussian p = RandomGaussian(2, rng);
    const int n = 1000000;
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd x = SampleLatent(q, rng).value;
      total += LogDensity(q, x) - LogDensity(p, x);
    }
    const double closed = KlDiagGaussian(q, p);
    EXPECT_LT(std::abs(total / n - closed), 0.01 * closed + 1e-3)
        << "pair " << pair;
  }
}

TEST(LatentTest, KlDimensionMismatchThrows) {
  EXPECT_THROW(KlDiagGaussian(DiagGaussian::Standard(2), DiagGaussian::Standard(3)),
               std::invalid_argument);
}

TEST(LatentTest, RecordedKlMatchesClosedFormAndGradients) {
  Rng rng(7);
  DiagGaussian q = RandomGaussian(3, rng);
  DiagGaussian p = RandomGaussian(3, rng);
  Tape tape;
  Tape::Var m = tape.Parameter(q.mean);
  Tape::Var lv = tape.Parameter(q.logvar);
  Tape::Var kl = RecordKl(tape, m, lv, p.mean, p.logvar);
  EXPECT_NEAR(tape.scalar(kl), KlDiagGaussian(q, p), 1e-12);
  tape.Backward(kl);
  const Eigen::ArrayXd pv = p.variance().array();
  Eigen::VectorXd dm = ((q.mean - p.mean).array() / pv).matrix();
  Eigen::VectorXd dlv = (0.5 * (q.variance().array() / pv - 1.0)).matrix();
  EXPECT_TRUE(tape.grad(m).col(0).isApprox(dm, 1e-12));
  EXPECT_TRUE(tape.grad(lv).col(0).isApprox(dlv, 1e-12));
}

TEST(LatentTest, ValidateRejectsBadPosteriors) {
  EXPECT_THROW(Make({0.0, 1.0}, {0.0}).Validate(), std::invalid_argument);
  EXPECT_THROW(Make({NAN}, {0.0}).Validate(), std::invalid_argument);
  EXPECT_THROW(Make({0.0}, {INFINITY}).Validate(), std::invalid_argument);
  EXPECT_NO_THROW(Make({0.0}, {-3.0}).Validate());
}

TEST(LatentTest, PosteriorSetStartsAtPrior) {
  PosteriorSet set(2);
  EXPECT_FALSE(set.Contains(4));
  set.Ensure(4);
  ASSERT_TRUE(set.Contains(4));
  EXPECT_TRUE(set.at(4).mean.isZero(0.0));
  EXPECT_TRUE(set.at(4).logvar.isZero(0.0));
  set.at(4).mean[0] = 1.0;
  set.Ensure(4);
  EXPECT_EQ(set.at(4).mean[0], 1.0);
  EXPECT_EQ(set.env_ids(), std::vector<int>{4});
}

TEST(LatentTest, MomentMatchOfMixture) {
  PosteriorSet set(2);
  EXPECT_THROW(set.MomentMatch(), std::logic_error);
  DiagGaussian a = DiagGaussian::Standard(2);
  a.mean << 1.0, 0.0;
  a.logvar << 0.0, std::log(4.0);
  DiagGaussian b = DiagGaussian::Standard(2);
  b.mean << -1.0, 2.0;
  b.logvar << std::log(3.0), 0.0;
  set.Set(0, a);
  set.Set(7, b);
  DiagGaussian m = set.MomentMatch();
  EXPECT_NEAR(m.mean[0], 0.0, 1e-12);
  EXPECT_NEAR(m.mean[1], 1.0, 1e-12);
  // (1 + 3) / 2 + 1 and (4 + 1) / 2 + 1
  EXPECT_NEAR(m.variance()[0], 3.0, 1e-12);
  EXPECT_NEAR(m.variance()[1], 3.5, 1e-12);
  PosteriorSet single(2);
  single.Set(3, a);
  EXPECT_TRUE(single.MomentMatch().mean.isApprox(a.mean));
  EXPECT_TRUE(single.MomentMatch().logvar.isApprox(a.logvar));
}

TEST(LatentTest, PosteriorSetRejectsWrongDimensionAndUnknownEnv) {
  PosteriorSet set(2);
  EXPECT_THROW(set.Set(0, DiagGaussian::Standard(3)), std::invalid_argument);
  EXPECT_THROW(set.at(9), std::out_of_range);
}

}  // namespace
}  // namespace lmbrl
