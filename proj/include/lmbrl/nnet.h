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

#ifndef LMBRL_NNET_H_
#define LMBRL_NNET_H_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lmbrl/rng.h"
#include "lmbrl/tape.h"

namespace lmbrl {

enum class Activation : int32_t { kIdentity = 0, kSwish = 1 };

// weight is (out x in), bias is (out x 1)
struct Layer {
  Eigen::MatrixXd weight;
  Eigen::MatrixXd bias;
  Activation activation = Activation::kIdentity;

  int in() const { return static_cast<int>(weight.cols()); }
  int out() const { return static_cast<int>(weight.rows()); }
};

struct LogVarBounds {
  double min = -8.0;
  double max = 4.0;
};

// Mutable view of one parameter block, addressed by a stable name.
struct ParamRef {
  std::string name;
  double* data = nullptr;
  Eigen::Index size = 0;
};

// Feed-forward trunk with two linear heads: delta-state mean and
// log-variance. The log-variance head is squashed into [bounds.min,
// bounds.max] with a softplus bound so it never reaches either edge.
struct NetParams {
  std::vector<Layer> hidden;
  Layer mean_head;
  Layer logvar_head;
  LogVarBounds bounds;

  int input_dim() const;
  int output_dim() const;
  int num_parameters() const;
  std::vector<int> hidden_widths() const;

  // Throws std::invalid_argument on inconsistent layer chaining or
  // non-finite values.
  void Validate() const;

  // Parameter blocks in a fixed order: hidden.{i}.weight, hidden.{i}.bias,
  // mean.weight, mean.bias, logvar.weight, logvar.bias.
  std::vector<ParamRef> Blocks();

  static NetParams Zeros(int input_dim, std::span<const int> hidden_widths,
                         int output_dim);
  // Fan-in scaled uniform init, U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  static NetParams Random(int input_dim, std::span<const int> hidden_widths,
                          int output_dim, Rng& rng);
};

struct GaussianPrediction {
  Eigen::VectorXd mean;
  Eigen::VectorXd logvar;

  Eigen::VectorXd variance() const { return logvar.array().exp(); }
};

// Column-per-sample predictions.
struct BatchPrediction {
  Eigen::MatrixXd mean;
  Eigen::MatrixXd logvar;
};

double BoundLogVar(double raw, const LogVarBounds& bounds);

GaussianPrediction Forward(const NetParams& params,
                           const Eigen::VectorXd& input);
BatchPrediction ForwardBatch(const NetParams& params,
                             const Eigen::MatrixXd& inputs);

// 0.5 * sum_d [ (target_d - mean_d)^2 / var_d + logvar_d + log(2 pi) ]
double GaussianNll(const GaussianPrediction& pred,
                   const Eigen::VectorXd& target);

// Network recorded on a tape. `blocks` matches NetParams::Blocks() order.
struct TapeNet {
  Tape::Var mean;
  Tape::Var logvar;
  std::vector<Tape::Var> blocks;
};

// Records the forward pass of `params` on `inputs` (in x n). Parameters are
// recorded as tape parameters when `params_require_grad`, else constants.
TapeNet RecordForward(Tape& tape, const NetParams& params, Tape::Var inputs,
                      bool params_require_grad);

// Summed Gaussian NLL over all entries of a batch; `target` is a constant of
// the same shape as the prediction.
Tape::Var RecordGaussianNll(Tape& tape, Tape::Var mean, Tape::Var logvar,
                            Tape::Var target);

// Gradient set of a recorded network, one matrix per parameter block.
std::vector<Eigen::MatrixXd> CollectGradients(const Tape& tape,
                                              const TapeNet& net);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<Eigen::VectorXd> first_moment;
  std::vector<Eigen::VectorXd> second_moment;
  int64_t step = 0;
};

// One Adam update of `params` in place. Moments are lazily sized on first
// use. Throws std::domain_error naming the block if a gradient is not finite;
// in that case nothing is modified.
void AdamStep(std::span<const ParamRef> params,
              std::span<const Eigen::MatrixXd> grads, AdamState& state,
              const AdamConfig& config);

// Binary checkpoint: magic, version, layer-shape header, raw IEEE doubles.
void SaveNetParams(const NetParams& params, std::ostream& out);
NetParams LoadNetParams(std::istream& in);

}  // namespace lmbrl

#endif  // LMBRL_NNET_H_
