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

#ifndef LMBRL_TAPE_H_
#define LMBRL_TAPE_H_

#include <vector>

#include <Eigen/Core>

namespace lmbrl {

// Reverse-mode gradient tape over dense matrices.
//
// Values are recorded in evaluation order; Backward() walks the record in
// reverse and accumulates adjoints. The op set is exactly what the
// feed-forward networks, the Gaussian likelihood and the variational terms
// need. A tape is single-use: record, call Backward() once, read gradients.
class Tape {
 public:
  struct Var {
    int id = -1;
  };

  Var Constant(Eigen::MatrixXd value);
  Var Parameter(Eigen::MatrixXd value);

  Var MatMul(Var a, Var b);
  // x (r x n) + bias (r x 1) broadcast over columns
  Var AddBias(Var x, Var bias);
  Var Add(Var a, Var b);
  Var Sub(Var a, Var b);
  Var Mul(Var a, Var b);  // elementwise
  Var Scale(Var a, double s);
  Var AddScalar(Var a, double s);
  Var Exp(Var a);
  Var Square(Var a);
  Var Softplus(Var a);
  Var Swish(Var a);  // x * sigmoid(x)
  Var Sum(Var a);    // -> 1 x 1
  Var ConcatRows(Var top, Var bottom);
  // out.col(j) = src.col(index[j])
  Var GatherCols(Var src, std::vector<int> index);

  const Eigen::MatrixXd& value(Var v) const;
  double scalar(Var v) const;

  // Accumulates d loss / d value for every recorded value. `loss` must be
  // 1 x 1.
  void Backward(Var loss);

  // Gradient of the last Backward() loss with respect to `v`. Throws if `v`
  // was not recorded on this tape or Backward() has not run.
  const Eigen::MatrixXd& grad(Var v) const;

  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  enum class Op {
    kLeaf,
    kMatMul,
    kAddBias,
    kAdd,
    kSub,
    kMul,
    kScale,
    kAddScalar,
    kExp,
    kSquare,
    kSoftplus,
    kSwish,
    kSum,
    kConcatRows,
    kGatherCols,
  };
  struct Node {
    Op op = Op::kLeaf;
    int a = -1;
    int b = -1;
    double scalar = 0.0;
    bool needs_grad = false;
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;
    std::vector<int> index;
  };

  Var Push(Node node);
  const Node& At(Var v, const char* what) const;
  bool NeedsGrad(int a, int b = -1) const;

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace lmbrl

#endif  // LMBRL_TAPE_H_
