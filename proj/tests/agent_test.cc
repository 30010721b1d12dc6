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

#include "lmbrl/agent.h"

#include <filesystem>
#include <stdexcept>

#include <gtest/gtest.h>

#include "tiny_config.h"

namespace lmbrl {
namespace {

namespace fs = std::filesystem;

Dataset Transitions(int env_id, int n, uint64_t seed) {
  Rng rng(seed);
  Dataset d(3, 1);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd s = rng.NormalVector(3);
    Eigen::VectorXd a = rng.NormalVector(1);
    Eigen::VectorXd next = s + 0.1 * rng.NormalVector(3);
    d.Append({env_id, s, a, next});
  }
  return d;
}

Agent Make(AgentKind kind, std::vector<int> ids = {0, 1}) {
  ExperimentConfig c = testing::TinyConfig(kind);
  Rng rng(1);
  return Agent(kind, c.model, 3, 1, ids, rng);
}

TEST(AgentTest, SpecialistHasOneModelPerEnvironment) {
  Agent a = Make(AgentKind::kSpecialist);
  EXPECT_TRUE(a.Knows(0));
  EXPECT_TRUE(a.Knows(1));
  EXPECT_FALSE(a.Knows(102));
  EXPECT_NE(&a.model(0), &a.model(1));
  EXPECT_THROW(a.model(102), std::out_of_range);
  EXPECT_EQ(a.model(0).latent_dim(), 0);
}

TEST(AgentTest, SharedModelAgentsKnowEveryEnvironment) {
  for (AgentKind kind : {AgentKind::kGeneralist, AgentKind::kLatent}) {
    Agent a = Make(kind);
    EXPECT_TRUE(a.Knows(104));
    EXPECT_EQ(&a.model(0), &a.model(104));
  }
}

TEST(AgentTest, LatentDimensionFollowsKind) {
  ExperimentConfig c = testing::TinyConfig(AgentKind::kLatent);
  Rng rng(2);
  Agent g(AgentKind::kGeneralist, c.model, 3, 1, {0}, rng);
  EXPECT_EQ(g.model(0).latent_dim(), 0);
  EXPECT_FALSE(g.has_latent());
  Agent l(AgentKind::kLatent, c.model, 3, 1, {0, 1}, rng);
  EXPECT_EQ(l.model(0).latent_dim(), 2);
  EXPECT_EQ(l.posteriors().size(), 2u);
  EXPECT_EQ(l.posteriors().at(1).mean, Eigen::VectorXd::Zero(2));
}

TEST(AgentTest, DataIsRoutedByModel) {
  Agent s = Make(AgentKind::kSpecialist);
  Dataset mixed = Transitions(0, 5, 3);
  mixed.Append(Transitions(1, 7, 4));
  s.AddData(mixed);
  EXPECT_EQ(s.data(0).size(), 5u);
  EXPECT_EQ(s.data(1).size(), 7u);
  Agent g = Make(AgentKind::kGeneralist);
  g.AddData(mixed);
  EXPECT_EQ(g.data(0).size(), 12u);
  Agent l = Make(AgentKind::kLatent, {0});
  l.AddData(mixed);
  EXPECT_TRUE(l.posteriors().Contains(1));
}

TEST(AgentTest, TrainingChangesOnlyTheResponsibleModel) {
  Agent s = Make(AgentKind::kSpecialist);
  s.AddData(Transitions(0, 40, 5));
  s.AddData(Transitions(1, 40, 6));
  const Eigen::MatrixXd before0 = s.model(0).member(0).hidden[0].weight;
  const Eigen::MatrixXd before1 = s.model(1).member(0).hidden[0].weight;
  Rng rng(7);
  s.Train(0, rng);
  EXPECT_NE(s.model(0).member(0).hidden[0].weight, before0);
  EXPECT_EQ(s.model(1).member(0).hidden[0].weight, before1);
}

TEST(AgentTest, SaveLoadRoundTrip) {
  Agent a = Make(AgentKind::kLatent);
  a.AddData(Transitions(0, 30, 8));
  a.AddData(Transitions(1, 30, 9));
  Rng rng(10);
  a.Train(0, rng);
  a.CountEpisode(0);
  a.CountEpisode(0);
  DiagGaussian q{Eigen::Vector2d(0.25, -1.0), Eigen::Vector2d(-3.0, -4.5)};
  a.posteriors().Set(1, q);
  fs::path dir = fs::temp_directory_path() / "lmbrl_agent_test";
  fs::remove_all(dir);
  a.Save(dir);
  Agent b = Agent::Load(dir);
  EXPECT_EQ(b.kind(), AgentKind::kLatent);
  EXPECT_EQ(b.episodes_seen(0), 2);
  EXPECT_EQ(b.episodes_seen(1), 0);
  EXPECT_EQ(b.posteriors().at(1).mean, q.mean);
  EXPECT_EQ(b.posteriors().at(1).logvar, q.logvar);
  EXPECT_EQ(b.data(0).size(), 60u);
  Eigen::VectorXd s = Eigen::Vector3d(0.1, 0.9, -0.3);
  Eigen::VectorXd u = Eigen::VectorXd::Constant(1, 0.5);
  for (int k = 0; k < 2; ++k) {
    auto pa = a.model(0).PredictMember(k, s, u, q.mean);
    auto pb = b.model(0).PredictMember(k, s, u, q.mean);
    EXPECT_EQ(pa.mean, pb.mean);
    EXPECT_EQ(pa.logvar, pb.logvar);
  }
  fs::remove_all(dir);
}

TEST(AgentTest, LoadRejectsMissingDirectory) {
  EXPECT_ANY_THROW(Agent::Load(fs::temp_directory_path() / "lmbrl_no_such_agent"));
}

}  // namespace
}  // namespace lmbrl
