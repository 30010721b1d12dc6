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

#include "lmbrl/nnet.h"

#include <cmath>
#include <cstring>
#include <istream>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace lmbrl {
namespace {

constexpr char kMagic[8] = {'L', 'M', 'B', 'R', 'L', 'N', 'E', 'T'};
constexpr uint32_t kCheckpointVersion = 1;

double SoftplusScalar(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

// Rescales the lower softplus so the saturated upper value lands on max.
double LowerScale(const LogVarBounds& b) {
  return (b.max - b.min) / SoftplusScalar(b.max - b.min);
}

Layer MakeLayer(int in, int out, Activation activation) {
  Layer l;
  l.weight = Eigen::MatrixXd::Zero(out, in);
  l.bias = Eigen::MatrixXd::Zero(out, 1);
  l.activation = activation;
  return l;
}

void Apply(const Layer& layer, const Eigen::MatrixXd& in,
           Eigen::MatrixXd* out) {
  out->noalias() = layer.weight * in;
  out->colwise() += layer.bias.col(0);
  if (layer.activation == Activation::kSwish) {
    // exp(-x) overflows to inf for very negative x, giving x * 0 = 0
    out->array() *= (1.0 + (-out->array()).exp()).inverse();
  }
}

template <typename T>
void WritePod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T ReadPod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("net checkpoint: truncated stream");
  return v;
}

void WriteLayer(std::ostream& out, const Layer& l) {
  WritePod<int32_t>(out, l.out());
  WritePod<int32_t>(out, l.in());
  WritePod<int32_t>(out, static_cast<int32_t>(l.activation));
  out.write(reinterpret_cast<const char*>(l.weight.data()),
            static_cast<std::streamsize>(l.weight.size() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(l.bias.data()),
            static_cast<std::streamsize>(l.bias.size() * sizeof(double)));
}

Layer ReadLayer(std::istream& in) {
  int32_t rows = ReadPod<int32_t>(in);
  int32_t cols = ReadPod<int32_t>(in);
  int32_t act = ReadPod<int32_t>(in);
  if (rows <= 0 || cols <= 0 || rows > (1 << 20) || cols > (1 << 20) ||
      (act != 0 && act != 1)) {
    throw std::runtime_error("net checkpoint: corrupt layer header");
  }
  Layer l = MakeLayer(cols, rows, static_cast<Activation>(act));
  in.read(reinterpret_cast<char*>(l.weight.data()),
          static_cast<std::streamsize>(l.weight.size() * sizeof(double)));
  in.read(reinterpret_cast<char*>(l.bias.data()),
          static_cast<std::streamsize>(l.bias.size() * sizeof(double)));
  if (!in) throw std::runtime_error("net checkpoint: truncated layer data");
  return l;
}

}  // namespace

int NetParams::input_dim() const {
  return hidden.empty() ? mean_head.in() : hidden.front().in();
}

int NetParams::output_dim() const { return mean_head.out(); }

int NetParams::num_parameters() const {
  int n = 0;
  for (const auto& l : hidden) n += l.weight.size() + l.bias.size();
  n += mean_head.weight.size() + mean_head.bias.size();
  n += logvar_head.weight.size() + logvar_head.bias.size();
  return n;
}

std::vector<int> NetParams::hidden_widths() const {
  std::vector<int> w;
  for (const auto& l : hidden) w.push_back(l.out());
  return w;
}

void NetParams::Validate() const {
  auto check = [](const Layer& l, const std::string& name) {
    if (l.bias.rows() != l.weight.rows() || l.bias.cols() != 1) {
      throw std::invalid_argument(name + ": bias shape does not match weight");
    }
    if (!l.weight.allFinite() || !l.bias.allFinite()) {
      throw std::invalid_argument(name + ": non-finite parameter");
    }
  };
  int width = input_dim();
  for (size_t i = 0; i < hidden.size(); ++i) {
    std::string name = "hidden." + std::to_string(i);
    check(hidden[i], name);
    if (hidden[i].in() != width) {
      throw std::invalid_argument(name + ": expects input width " +
                                  std::to_string(hidden[i].in()) +
                                  " but previous layer emits " +
                                  std::to_string(width));
    }
    width = hidden[i].out();
  }
  check(mean_head, "mean");
  check(logvar_head, "logvar");
  if (mean_head.in() != width || logvar_head.in() != width) {
    throw std::invalid_argument("heads expect input width " +
                                std::to_string(width));
  }
  if (mean_head.out() != logvar_head.out()) {
    throw std::invalid_argument("mean and logvar heads differ in width");
  }
  if (!(bounds.min < bounds.max)) {
    throw std::invalid_argument("logvar bounds are empty");
  }
}

std::vector<ParamRef> NetParams::Blocks() {
  std::vector<ParamRef> out;
  auto add = [&out](const std::string& name, Eigen::MatrixXd& m) {
    out.push_back({name, m.data(), m.size()});
  };
  for (size_t i = 0; i < hidden.size(); ++i) {
    add("hidden." + std::to_string(i) + ".weight", hidden[i].weight);
    add("hidden." + std::to_string(i) + ".bias", hidden[i].bias);
  }
  add("mean.weight", mean_head.weight);
  add("mean.bias", mean_head.bias);
  add("logvar.weight", logvar_head.weight);
  add("logvar.bias", logvar_head.bias);
  return out;
}

NetParams NetParams::Zeros(int input_dim, std::span<const int> hidden_widths,
                           int output_dim) {
  NetParams p;
  int width = input_dim;
  for (int w : hidden_widths) {
    p.hidden.push_back(MakeLayer(width, w, Activation::kSwish));
    width = w;
  }
  p.mean_head = MakeLayer(width, output_dim, Activation::kIdentity);
  p.logvar_head = MakeLayer(width, output_dim, Activation::kIdentity);
  return p;
}

NetParams NetParams::Random(int input_dim, std::span<const int> hidden_widths,
                            int output_dim, Rng& rng) {
  NetParams p = Zeros(input_dim, hidden_widths, output_dim);
  auto fill = [&rng](Layer& l) {
    double bound = 1.0 / std::sqrt(static_cast<double>(l.in()));
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) {
      l.weight.data()[i] = rng.Uniform(-bound, bound);
    }
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) {
      l.bias.data()[i] = rng.Uniform(-bound, bound);
    }
  };
  for (auto& l : p.hidden) fill(l);
  fill(p.mean_head);
  fill(p.logvar_head);
  return p;
}

double BoundLogVar(double raw, const LogVarBounds& bounds) {
  double upper = bounds.max - SoftplusScalar(bounds.max - raw);
  return std::min(
      bounds.max,
      bounds.min + LowerScale(bounds) * SoftplusScalar(upper - bounds.min));
}

BatchPrediction ForwardBatch(const NetParams& params,
                             const Eigen::MatrixXd& inputs) {
  if (inputs.rows() != params.input_dim()) {
    throw std::invalid_argument(
        "forward: expected input dimension " +
        std::to_string(params.input_dim()) + ", got " +
        std::to_string(inputs.rows()));
  }
  Eigen::MatrixXd h = inputs;
  Eigen::MatrixXd next;
  for (const auto& layer : params.hidden) {
    Apply(layer, h, &next);
    h.swap(next);
  }
  BatchPrediction out;
  Apply(params.mean_head, h, &out.mean);
  Apply(params.logvar_head, h, &out.logvar);
  const LogVarBounds b = params.bounds;
  auto softplus = [](const Eigen::ArrayXXd& z) -> Eigen::ArrayXXd {
    return z.max(0.0) + (1.0 + (-z.abs()).exp()).log();
  };
  Eigen::ArrayXXd upper = b.max - softplus(b.max - out.logvar.array());
  out.logvar =
      (b.min + LowerScale(b) * softplus(upper - b.min)).min(b.max).matrix();
  return out;
}

GaussianPrediction Forward(const NetParams& params,
                           const Eigen::VectorXd& input) {
  BatchPrediction b = ForwardBatch(params, input);
  return {b.mean.col(0), b.logvar.col(0)};
}

double GaussianNll(const GaussianPrediction& pred,
                   const Eigen::VectorXd& target) {
  if (pred.mean.size() != target.size() ||
      pred.logvar.size() != target.size()) {
    throw std::invalid_argument(
        "gaussian_nll: prediction has dimension " +
        std::to_string(pred.mean.size()) + ", target " +
        std::to_string(target.size()));
  }
  double total = 0.0;
  for (Eigen::Index d = 0; d < target.size(); ++d) {
    double r = target[d] - pred.mean[d];
    total += r * r * std::exp(-pred.logvar[d]) + pred.logvar[d] +
             std::log(2.0 * std::numbers::pi);
  }
  return 0.5 * total;
}

TapeNet RecordForward(Tape& tape, const NetParams& params, Tape::Var inputs,
                      bool params_require_grad) {
  if (tape.value(inputs).rows() != params.input_dim()) {
    throw std::invalid_argument(
        "forward: expected input dimension " +
        std::to_string(params.input_dim()) + ", got " +
        std::to_string(tape.value(inputs).rows()));
  }
  TapeNet net;
  auto leaf = [&](const Eigen::MatrixXd& m) {
    Tape::Var v = params_require_grad ? tape.Parameter(m) : tape.Constant(m);
    net.blocks.push_back(v);
    return v;
  };
  auto linear = [&](const Layer& l, Tape::Var x) {
    Tape::Var w = leaf(l.weight);
    Tape::Var b = leaf(l.bias);
    Tape::Var y = tape.AddBias(tape.MatMul(w, x), b);
    return l.activation == Activation::kSwish ? tape.Swish(y) : y;
  };
  Tape::Var h = inputs;
  for (const auto& layer : params.hidden) h = linear(layer, h);
  net.mean = linear(params.mean_head, h);
  Tape::Var raw = linear(params.logvar_head, h);
  const LogVarBounds& b = params.bounds;
  Tape::Var upper = tape.AddScalar(
      tape.Scale(tape.Softplus(tape.AddScalar(tape.Scale(raw, -1.0), b.max)),
                 -1.0),
      b.max);
  net.logvar = tape.AddScalar(
      tape.Scale(tape.Softplus(tape.AddScalar(upper, -b.min)), LowerScale(b)),
      b.min);
  return net;
}

Tape::Var RecordGaussianNll(Tape& tape, Tape::Var mean, Tape::Var logvar,
                            Tape::Var target) {
  Tape::Var sq = tape.Square(tape.Sub(target, mean));
  Tape::Var weighted = tape.Mul(sq, tape.Exp(tape.Scale(logvar, -1.0)));
  Tape::Var total = tape.Sum(tape.Add(weighted, logvar));
  double n = static_cast<double>(tape.value(mean).size());
  return tape.AddScalar(tape.Scale(total, 0.5),
                        0.5 * n * std::log(2.0 * std::numbers::pi));
}

std::vector<Eigen::MatrixXd> CollectGradients(const Tape& tape,
                                              const TapeNet& net) {
  std::vector<Eigen::MatrixXd> grads;
  grads.reserve(net.blocks.size());
  for (Tape::Var v : net.blocks) grads.push_back(tape.grad(v));
  return grads;
}

void AdamStep(std::span<const ParamRef> params,
              std::span<const Eigen::MatrixXd> grads, AdamState& state,
              const AdamConfig& config) {
  if (params.size() != grads.size()) {
    throw std::invalid_argument("adam: " + std::to_string(params.size()) +
                                " parameter blocks but " +
                                std::to_string(grads.size()) + " gradients");
  }
  for (size_t i = 0; i < params.size(); ++i) {
    if (grads[i].size() != params[i].size) {
      throw std::invalid_argument("adam: gradient shape mismatch for " +
                                  params[i].name);
    }
    if (!grads[i].allFinite()) {
      throw std::domain_error("adam: non-finite gradient in " +
                              params[i].name);
    }
  }
  if (state.first_moment.size() != params.size()) {
    state.first_moment.clear();
    state.second_moment.clear();
    for (const auto& p : params) {
      state.first_moment.push_back(Eigen::VectorXd::Zero(p.size));
      state.second_moment.push_back(Eigen::VectorXd::Zero(p.size));
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(config.beta1, state.step);
  const double c2 = 1.0 - std::pow(config.beta2, state.step);
  for (size_t i = 0; i < params.size(); ++i) {
    Eigen::Map<Eigen::VectorXd> w(params[i].data, params[i].size);
    auto g = grads[i].reshaped();
    Eigen::VectorXd& m = state.first_moment[i];
    Eigen::VectorXd& v = state.second_moment[i];
    m = config.beta1 * m + (1.0 - config.beta1) * g;
    v = config.beta2 * v + (1.0 - config.beta2) * g.cwiseAbs2();
    w.array() -= config.learning_rate * (m.array() / c1) /
                 ((v.array() / c2).sqrt() + config.epsilon);
  }
}

void SaveNetParams(const NetParams& params, std::ostream& out) {
  out.write(kMagic, sizeof(kMagic));
  WritePod<uint32_t>(out, kCheckpointVersion);
  WritePod<double>(out, params.bounds.min);
  WritePod<double>(out, params.bounds.max);
  WritePod<uint32_t>(out, static_cast<uint32_t>(params.hidden.size()));
  for (const auto& l : params.hidden) WriteLayer(out, l);
  WriteLayer(out, params.mean_head);
  WriteLayer(out, params.logvar_head);
  if (!out) throw std::runtime_error("net checkpoint: write failed");
}

NetParams LoadNetParams(std::istream& in) {
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("net checkpoint: bad magic");
  }
  uint32_t version = ReadPod<uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("net checkpoint: unsupported version " +
                             std::to_string(version));
  }
  NetParams p;
  p.bounds.min = ReadPod<double>(in);
  p.bounds.max = ReadPod<double>(in);
  uint32_t n = ReadPod<uint32_t>(in);
  if (n > 64) throw std::runtime_error("net checkpoint: too many layers");
  for (uint32_t i = 0; i < n; ++i) p.hidden.push_back(ReadLayer(in));
  p.mean_head = ReadLayer(in);
  p.logvar_head = ReadLayer(in);
  p.Validate();
  return p;
}

}  // namespace lmbrl
