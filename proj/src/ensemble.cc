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

#include "lmbrl/ensemble.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

#include "json.hpp"

namespace lmbrl {
namespace {

using nlohmann::json;

void CheckVector(const Eigen::VectorXd& v, int dim, const char* what) {
  if (v.size() != dim) {
    throw std::invalid_argument(std::string(what) + ": expected dimension " +
                                std::to_string(dim) + ", got " +
                                std::to_string(v.size()));
  }
}

json VectorToJson(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd JsonToVector(const json& j) {
  std::vector<double> v = j.get<std::vector<double>>();
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

uint64_t Fingerprint(const std::vector<int>& order) {
  uint64_t h = 1469598103934665603ULL;
  for (int i : order) {
    h ^= static_cast<uint64_t>(i);
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

void Dataset::Append(Transition t) {
  if (state_dim_ == 0 && action_dim_ == 0 && transitions_.empty()) {
    state_dim_ = static_cast<int>(t.state.size());
    action_dim_ = static_cast<int>(t.action.size());
  }
  CheckVector(t.state, state_dim_, "transition state");
  CheckVector(t.action, action_dim_, "transition action");
  CheckVector(t.next_state, state_dim_, "transition next_state");
  if (!t.state.allFinite() || !t.action.allFinite() ||
      !t.next_state.allFinite()) {
    throw std::invalid_argument("transition: non-finite component");
  }
  transitions_.push_back(std::move(t));
}

void Dataset::Append(const Dataset& other) {
  for (const auto& t : other.transitions_) Append(t);
}

std::vector<int> Dataset::env_ids() const {
  std::set<int> ids;
  for (const auto& t : transitions_) ids.insert(t.env_id);
  return {ids.begin(), ids.end()};
}

Dataset Dataset::Filter(int env_id) const {
  Dataset out(state_dim_, action_dim_);
  for (const auto& t : transitions_) {
    if (t.env_id == env_id) out.transitions_.push_back(t);
  }
  return out;
}

void Dataset::Save(std::ostream& out) const {
  out << "# lmbrl-transitions v1 state_dim=" << state_dim_
      << " action_dim=" << action_dim_ << "\n";
  out.precision(std::numeric_limits<double>::max_digits10);
  for (const auto& t : transitions_) {
    out << t.env_id;
    for (double v : t.state) out << ' ' << v;
    for (double v : t.action) out << ' ' << v;
    for (double v : t.next_state) out << ' ' << v;
    out << '\n';
  }
  if (!out) throw std::runtime_error("dataset: write failed");
}

Dataset Dataset::Load(std::istream& in) {
  std::string header;
  std::getline(in, header);
  int s = 0;
  int a = 0;
  if (std::sscanf(header.c_str(), "# lmbrl-transitions v1 state_dim=%d action_dim=%d",
                  &s, &a) != 2 ||
      s <= 0 || a <= 0) {
    throw std::runtime_error("dataset: unrecognized header '" + header + "'");
  }
  Dataset d(s, a);
  std::string line;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    Transition t;
    t.state.resize(s);
    t.action.resize(a);
    t.next_state.resize(s);
    row >> t.env_id;
    for (int i = 0; i < s; ++i) row >> t.state[i];
    for (int i = 0; i < a; ++i) row >> t.action[i];
    for (int i = 0; i < s; ++i) row >> t.next_state[i];
    if (!row) {
      throw std::runtime_error("dataset: malformed record on line " +
                               std::to_string(line_no));
    }
    d.Append(std::move(t));
  }
  return d;
}

Normalizer Normalizer::Identity(int dim) {
  return {Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim)};
}

Normalizer Normalizer::Fit(const Eigen::MatrixXd& samples, double floor) {
  Normalizer n;
  n.mean = samples.rowwise().mean();
  Eigen::MatrixXd centered = samples.colwise() - n.mean;
  n.stddev = (centered.array().square().rowwise().sum() /
              static_cast<double>(std::max<Eigen::Index>(samples.cols(), 1)))
                 .sqrt()
                 .max(floor)
                 .matrix();
  return n;
}

Eigen::MatrixXd Normalizer::Normalize(const Eigen::MatrixXd& x) const {
  return (x.colwise() - mean).array().colwise() / stddev.array();
}

Eigen::MatrixXd Normalizer::Denormalize(const Eigen::MatrixXd& z) const {
  return (z.array().colwise() * stddev.array()).matrix().colwise() + mean;
}

Eigen::VectorXd GaussianMixture::Mean() const {
  if (components.empty()) throw std::logic_error("mixture: no components");
  Eigen::VectorXd m = Eigen::VectorXd::Zero(components.front().mean.size());
  for (const auto& c : components) m += c.mean;
  return m / static_cast<double>(components.size());
}

Eigen::VectorXd GaussianMixture::Variance() const {
  Eigen::VectorXd m = Mean();
  Eigen::VectorXd v = Eigen::VectorXd::Zero(m.size());
  for (const auto& c : components) {
    v += c.variance() + (c.mean - m).cwiseAbs2();
  }
  return v / static_cast<double>(components.size());
}

Ensemble::Ensemble(const EnsembleConfig& config, int state_dim, int action_dim,
                   Rng& rng)
    : config_(config), state_dim_(state_dim), action_dim_(action_dim) {
  if (config.members < 2) {
    throw std::invalid_argument("ensemble needs at least 2 members");
  }
  const int in = state_dim + action_dim + config.latent_dim;
  for (int k = 0; k < config.members; ++k) {
    NetParams p = NetParams::Random(in, config.hidden, state_dim, rng);
    p.bounds = config.logvar_bounds;
    members_.push_back(std::move(p));
  }
  optimizers_.resize(members_.size());
  input_norm_ = Normalizer::Identity(state_dim + action_dim);
  target_norm_ = Normalizer::Identity(state_dim);
}

Ensemble::Ensemble(const EnsembleConfig& config, int state_dim, int action_dim,
                   std::vector<NetParams> members)
    : config_(config),
      state_dim_(state_dim),
      action_dim_(action_dim),
      members_(std::move(members)) {
  if (members_.size() < 2) {
    throw std::invalid_argument("ensemble needs at least 2 members");
  }
  config_.members = static_cast<int>(members_.size());
  const int in = state_dim + action_dim + config.latent_dim;
  for (const auto& m : members_) {
    m.Validate();
    if (m.input_dim() != in || m.output_dim() != state_dim ||
        m.hidden_widths() != members_.front().hidden_widths()) {
      throw std::invalid_argument(
          "ensemble members must share an architecture with input " +
          std::to_string(in) + " and output " + std::to_string(state_dim));
    }
  }
  config_.hidden = members_.front().hidden_widths();
  optimizers_.resize(members_.size());
  input_norm_ = Normalizer::Identity(state_dim + action_dim);
  target_norm_ = Normalizer::Identity(state_dim);
}

void Ensemble::set_normalizers(Normalizer input, Normalizer target) {
  if (input.mean.size() != state_dim_ + action_dim_ ||
      target.mean.size() != state_dim_) {
    throw std::invalid_argument("ensemble: normalizer dimensions");
  }
  input_norm_ = std::move(input);
  target_norm_ = std::move(target);
}

void Ensemble::CheckInputs(const Eigen::VectorXd& state,
                           const Eigen::VectorXd& action,
                           const Eigen::VectorXd& latent) const {
  CheckVector(state, state_dim_, "predict state");
  CheckVector(action, action_dim_, "predict action");
  CheckVector(latent, latent_dim(), "predict latent");
}

Eigen::MatrixXd Ensemble::NetworkInputs(const Eigen::MatrixXd& states,
                                        const Eigen::MatrixXd& actions,
                                        const Eigen::MatrixXd& latents) const {
  const Eigen::Index n = states.cols();
  if (states.rows() != state_dim_ || actions.rows() != action_dim_ ||
      actions.cols() != n ||
      (latent_dim() > 0 && (latents.rows() != latent_dim() ||
                            latents.cols() != n))) {
    throw std::invalid_argument("ensemble: batch dimension mismatch");
  }
  Eigen::MatrixXd in(state_dim_ + action_dim_ + latent_dim(), n);
  in.topRows(state_dim_) =
      (states.colwise() - input_norm_.mean.head(state_dim_)).array().colwise() /
      input_norm_.stddev.head(state_dim_).array();
  in.middleRows(state_dim_, action_dim_) =
      (actions.colwise() - input_norm_.mean.tail(action_dim_))
          .array()
          .colwise() /
      input_norm_.stddev.tail(action_dim_).array();
  if (latent_dim() > 0) in.bottomRows(latent_dim()) = latents;
  return in;
}

void Ensemble::PredictNext(int member, const Eigen::MatrixXd& states,
                           const Eigen::MatrixXd& actions,
                           const Eigen::MatrixXd& latents,
                           Eigen::MatrixXd* mean,
                           Eigen::MatrixXd* variance) const {
  if (member < 0 || member >= num_members()) {
    throw std::out_of_range("ensemble: member " + std::to_string(member) +
                            " of " + std::to_string(num_members()));
  }
  BatchPrediction p =
      ForwardBatch(members_[member], NetworkInputs(states, actions, latents));
  *mean = states + target_norm_.Denormalize(p.mean);
  *variance = p.logvar.array().exp().colwise() *
              target_norm_.stddev.array().square();
}

GaussianPrediction Ensemble::PredictMember(int k, const Eigen::VectorXd& state,
                                           const Eigen::VectorXd& action,
                                           const Eigen::VectorXd& latent) const {
  CheckInputs(state, action, latent);
  Eigen::MatrixXd mean;
  Eigen::MatrixXd var;
  PredictNext(k, state, action, latent, &mean, &var);
  return {mean.col(0), var.col(0).array().log().matrix()};
}

GaussianMixture Ensemble::PredictMixture(const Eigen::VectorXd& state,
                                         const Eigen::VectorXd& action,
                                         const Eigen::VectorXd& latent) const {
  GaussianMixture mix;
  for (int k = 0; k < num_members(); ++k) {
    mix.components.push_back(PredictMember(k, state, action, latent));
  }
  return mix;
}

TrainReport Ensemble::Train(const Dataset& data, PosteriorSet* posteriors,
                            int rounds, Rng& rng) {
  if (data.empty()) throw std::invalid_argument("train: empty dataset");
  if (data.state_dim() != state_dim_ || data.action_dim() != action_dim_) {
    throw std::invalid_argument("train: dataset dimensions do not match model");
  }
  const int n = static_cast<int>(data.size());
  const int sa = state_dim_ + action_dim_;
  Eigen::MatrixXd raw_inputs(sa, n);
  Eigen::MatrixXd deltas(state_dim_, n);
  for (int i = 0; i < n; ++i) {
    const Transition& t = data[i];
    raw_inputs.col(i).head(state_dim_) = t.state;
    raw_inputs.col(i).tail(action_dim_) = t.action;
    deltas.col(i) = t.next_state - t.state;
  }
  input_norm_ = Normalizer::Fit(raw_inputs, config_.stddev_floor);
  target_norm_ = Normalizer::Fit(deltas, config_.stddev_floor);
  const Eigen::MatrixXd inputs = input_norm_.Normalize(raw_inputs);
  const Eigen::MatrixXd targets = target_norm_.Normalize(deltas);

  // latent bookkeeping: column k of the stacked posterior matrices is env_ids[k]
  const int d = latent_dim();
  std::vector<int> env_ids;
  std::vector<int> env_col(n, 0);
  std::vector<double> env_count;
  if (d > 0) {
    if (posteriors == nullptr) {
      throw std::invalid_argument("train: latent model needs posteriors");
    }
    env_ids = data.env_ids();
    for (int id : env_ids) {
      if (!posteriors->Contains(id)) {
        throw std::invalid_argument("train: environment " +
                                    std::to_string(id) +
                                    " has no posterior");
      }
    }
    env_count.assign(env_ids.size(), 0.0);
    for (int i = 0; i < n; ++i) {
      auto it = std::lower_bound(env_ids.begin(), env_ids.end(), data[i].env_id);
      env_col[i] = static_cast<int>(it - env_ids.begin());
      env_count[env_col[i]] += 1.0;
    }
  }

  TrainReport report;
  report.member_loss.assign(members_.size(), 0.0);
  report.shuffle_fingerprints.resize(members_.size());
  if (rounds <= 0) return report;

  const int batch = std::min(config_.batch_size, n);
  const int batches_per_epoch = (n + batch - 1) / batch;
  int epochs = rounds;
  int64_t step_budget = std::numeric_limits<int64_t>::max();
  if (config_.train_unit == TrainUnit::kGradientSteps) {
    step_budget = rounds;
    epochs = (rounds + batches_per_epoch - 1) / batches_per_epoch;
  }

  std::vector<Rng> streams;
  for (size_t k = 0; k < members_.size(); ++k) streams.push_back(rng.Split());
  std::vector<int64_t> steps_done(members_.size(), 0);

  std::vector<int> order(n);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    for (size_t k = 0; k < members_.size(); ++k) {
      Rng& stream = streams[k];
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), stream.engine());
      report.shuffle_fingerprints[k].push_back(Fingerprint(order));
      double loss_sum = 0.0;
      int loss_batches = 0;
      for (int start = 0; start < n && steps_done[k] < step_budget;
           start += batch) {
        const int b = std::min(batch, n - start);
        Eigen::MatrixXd xb(sa, b);
        Eigen::MatrixXd yb(state_dim_, b);
        std::vector<int> cols(b);
        for (int j = 0; j < b; ++j) {
          xb.col(j) = inputs.col(order[start + j]);
          yb.col(j) = targets.col(order[start + j]);
          cols[j] = env_col[order[start + j]];
        }

        Tape tape;
        Tape::Var in = tape.Constant(std::move(xb));
        Tape::Var mu_all{};
        Tape::Var lv_all{};
        Eigen::MatrixXd kl_weight;
        if (d > 0) {
          Eigen::MatrixXd mu(d, env_ids.size());
          Eigen::MatrixXd lv(d, env_ids.size());
          for (size_t e = 0; e < env_ids.size(); ++e) {
            mu.col(e) = posteriors->at(env_ids[e]).mean;
            lv.col(e) = posteriors->at(env_ids[e]).logvar;
          }
          mu_all = tape.Parameter(std::move(mu));
          lv_all = tape.Parameter(std::move(lv));
          Tape::Var mu_b = tape.GatherCols(mu_all, cols);
          Tape::Var lv_b = tape.GatherCols(lv_all, cols);
          Tape::Var noise = tape.Constant(stream.NormalMatrix(d, b));
          Tape::Var latent = tape.Add(
              mu_b, tape.Mul(tape.Exp(tape.Scale(lv_b, 0.5)), noise));
          in = tape.ConcatRows(in, latent);
          // sum over the batch of KL_k / N_k is an unbiased per-sample share
          // of sum_k KL_k
          kl_weight.resize(d, b);
          for (int j = 0; j < b; ++j) {
            kl_weight.col(j).setConstant(1.0 / env_count[cols[j]]);
          }
          Tape::Var kl_terms = tape.AddScalar(
              tape.Sub(tape.Add(tape.Exp(lv_b), tape.Square(mu_b)), lv_b),
              -1.0);
          kl_weight *= 0.5;
          Tape::Var kl = tape.Sum(tape.Mul(kl_terms, tape.Constant(kl_weight)));
          TapeNet net = RecordForward(tape, members_[k], in, true);
          Tape::Var nll = RecordGaussianNll(tape, net.mean, net.logvar,
                                            tape.Constant(std::move(yb)));
          Tape::Var loss = tape.Scale(tape.Add(nll, kl), 1.0 / b);
          tape.Backward(loss);
          loss_sum += tape.scalar(nll) / b;

          AdamStep(members_[k].Blocks(), CollectGradients(tape, net),
                   optimizers_[k], config_.theta_optimizer);
          const Eigen::MatrixXd& g_mu = tape.grad(mu_all);
          const Eigen::MatrixXd& g_lv = tape.grad(lv_all);
          std::vector<bool> present(env_ids.size(), false);
          for (int c : cols) present[c] = true;
          for (size_t e = 0; e < env_ids.size(); ++e) {
            if (!present[e]) continue;
            DiagGaussian& q = posteriors->at(env_ids[e]);
            std::vector<ParamRef> refs = {
                {"posterior.mean", q.mean.data(), d},
                {"posterior.logvar", q.logvar.data(), d}};
            std::vector<Eigen::MatrixXd> g = {g_mu.col(e), g_lv.col(e)};
            AdamStep(refs, g, posteriors->optimizer(env_ids[e]),
                     config_.phi_optimizer);
          }
        } else {
          TapeNet net = RecordForward(tape, members_[k], in, true);
          Tape::Var nll = RecordGaussianNll(tape, net.mean, net.logvar,
                                            tape.Constant(std::move(yb)));
          Tape::Var loss = tape.Scale(nll, 1.0 / b);
          tape.Backward(loss);
          loss_sum += tape.scalar(loss);
          AdamStep(members_[k].Blocks(), CollectGradients(tape, net),
                   optimizers_[k], config_.theta_optimizer);
        }
        ++loss_batches;
        ++steps_done[k];
        ++report.gradient_steps;
      }
      if (loss_batches > 0) report.member_loss[k] = loss_sum / loss_batches;
    }
  }
  return report;
}

double Ensemble::MeanNll(const Dataset& data,
                         const PosteriorSet* posteriors) const {
  if (data.empty()) return 0.0;
  const int n = static_cast<int>(data.size());
  Eigen::MatrixXd s(state_dim_, n);
  Eigen::MatrixXd a(action_dim_, n);
  Eigen::MatrixXd e(latent_dim(), n);
  Eigen::MatrixXd next(state_dim_, n);
  for (int i = 0; i < n; ++i) {
    s.col(i) = data[i].state;
    a.col(i) = data[i].action;
    next.col(i) = data[i].next_state;
    if (latent_dim() > 0) {
      if (posteriors == nullptr) {
        throw std::invalid_argument("nll: latent model needs posteriors");
      }
      e.col(i) = posteriors->at(data[i].env_id).mean;
    }
  }
  double total = 0.0;
  for (int k = 0; k < num_members(); ++k) {
    Eigen::MatrixXd mean;
    Eigen::MatrixXd var;
    PredictNext(k, s, a, e, &mean, &var);
    for (int i = 0; i < n; ++i) {
      total += GaussianNll({mean.col(i), var.col(i).array().log().matrix()},
                           next.col(i));
    }
  }
  return total / (static_cast<double>(n) * num_members());
}

void Ensemble::Save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  json meta = {
      {"format", "lmbrl-ensemble"},
      {"version", 1},
      {"state_dim", state_dim_},
      {"action_dim", action_dim_},
      {"latent_dim", config_.latent_dim},
      {"members", num_members()},
      {"hidden", config_.hidden},
      {"batch_size", config_.batch_size},
      {"train_rounds", config_.train_rounds},
      {"train_unit",
       config_.train_unit == TrainUnit::kEpochs ? "epochs" : "steps"},
      {"theta_lr", config_.theta_optimizer.learning_rate},
      {"phi_lr", config_.phi_optimizer.learning_rate},
      {"logvar_min", config_.logvar_bounds.min},
      {"logvar_max", config_.logvar_bounds.max},
  };
  std::ofstream(dir / "ensemble.json") << meta.dump(2) << "\n";
  json norms = {{"input_mean", VectorToJson(input_norm_.mean)},
                {"input_stddev", VectorToJson(input_norm_.stddev)},
                {"target_mean", VectorToJson(target_norm_.mean)},
                {"target_stddev", VectorToJson(target_norm_.stddev)}};
  std::ofstream(dir / "normalizers.json") << norms.dump(2) << "\n";
  for (int k = 0; k < num_members(); ++k) {
    std::ofstream out(dir / ("member_" + std::to_string(k) + ".bin"),
                      std::ios::binary);
    SaveNetParams(members_[k], out);
    if (!out) {
      throw std::runtime_error("ensemble: failed to write member " +
                               std::to_string(k));
    }
  }
}

Ensemble Ensemble::Load(const std::filesystem::path& dir) {
  std::ifstream meta_in(dir / "ensemble.json");
  if (!meta_in) {
    throw std::runtime_error("ensemble: no ensemble.json in " + dir.string());
  }
  json meta = json::parse(meta_in);
  if (meta.at("format") != "lmbrl-ensemble" || meta.at("version") != 1) {
    throw std::runtime_error("ensemble: unsupported checkpoint format");
  }
  EnsembleConfig config;
  config.latent_dim = meta.at("latent_dim");
  config.hidden = meta.at("hidden").get<std::vector<int>>();
  config.batch_size = meta.at("batch_size");
  config.train_rounds = meta.at("train_rounds");
  config.train_unit = meta.at("train_unit") == "epochs"
                          ? TrainUnit::kEpochs
                          : TrainUnit::kGradientSteps;
  config.theta_optimizer.learning_rate = meta.at("theta_lr");
  config.phi_optimizer.learning_rate = meta.at("phi_lr");
  config.logvar_bounds = {meta.at("logvar_min"), meta.at("logvar_max")};
  const int members = meta.at("members");
  std::vector<NetParams> nets;
  for (int k = 0; k < members; ++k) {
    std::ifstream in(dir / ("member_" + std::to_string(k) + ".bin"),
                     std::ios::binary);
    if (!in) {
      throw std::runtime_error("ensemble: missing member " + std::to_string(k));
    }
    nets.push_back(LoadNetParams(in));
  }
  Ensemble e(config, meta.at("state_dim"), meta.at("action_dim"),
             std::move(nets));
  std::ifstream norm_in(dir / "normalizers.json");
  json norms = json::parse(norm_in);
  e.set_normalizers(
      {JsonToVector(norms.at("input_mean")),
       JsonToVector(norms.at("input_stddev"))},
      {JsonToVector(norms.at("target_mean")),
       JsonToVector(norms.at("target_stddev"))});
  return e;
}

}  // namespace lmbrl
