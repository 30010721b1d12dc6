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

#include "lmbrl/tape.h"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace lmbrl {
namespace {

double Sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double SoftplusScalar(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

void CheckSameShape(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                    const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(
        std::string(op) + ": shape mismatch " + std::to_string(a.rows()) +
        "x" + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
        "x" + std::to_string(b.cols()));
  }
}

}  // namespace

Tape::Var Tape::Push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

const Tape::Node& Tape::At(Var v, const char* what) const {
  if (v.id < 0 || v.id >= static_cast<int>(nodes_.size())) {
    throw std::out_of_range(std::string(what) + ": value " +
                            std::to_string(v.id) + " is not on this tape");
  }
  return nodes_[v.id];
}

bool Tape::NeedsGrad(int a, int b) const {
  return (a >= 0 && nodes_[a].needs_grad) || (b >= 0 && nodes_[b].needs_grad);
}

Tape::Var Tape::Constant(Eigen::MatrixXd value) {
  Node n;
  n.value = std::move(value);
  return Push(std::move(n));
}

Tape::Var Tape::Parameter(Eigen::MatrixXd value) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = true;
  return Push(std::move(n));
}

Tape::Var Tape::MatMul(Var a, Var b) {
  const auto& x = At(a, "MatMul");
  const auto& y = At(b, "MatMul");
  if (x.value.cols() != y.value.rows()) {
    throw std::invalid_argument("MatMul: inner dimensions " +
                                std::to_string(x.value.cols()) + " and " +
                                std::to_string(y.value.rows()));
  }
  Node n;
  n.op = Op::kMatMul;
  n.a = a.id;
  n.b = b.id;
  n.value.noalias() = x.value * y.value;
  n.needs_grad = NeedsGrad(a.id, b.id);
  return Push(std::move(n));
}

Tape::Var Tape::AddBias(Var x, Var bias) {
  const auto& xv = At(x, "AddBias");
  const auto& bv = At(bias, "AddBias");
  if (bv.value.cols() != 1 || bv.value.rows() != xv.value.rows()) {
    throw std::invalid_argument("AddBias: bias must be " +
                                std::to_string(xv.value.rows()) + "x1");
  }
  Node n;
  n.op = Op::kAddBias;
  n.a = x.id;
  n.b = bias.id;
  n.value = xv.value.colwise() + bv.value.col(0);
  n.needs_grad = NeedsGrad(x.id, bias.id);
  return Push(std::move(n));
}

Tape::Var Tape::Add(Var a, Var b) {
  CheckSameShape(At(a, "Add").value, At(b, "Add").value, "Add");
  Node n;
  n.op = Op::kAdd;
  n.a = a.id;
  n.b = b.id;
  n.value = nodes_[a.id].value + nodes_[b.id].value;
  n.needs_grad = NeedsGrad(a.id, b.id);
  return Push(std::move(n));
}

Tape::Var Tape::Sub(Var a, Var b) {
  CheckSameShape(At(a, "Sub").value, At(b, "Sub").value, "Sub");
  Node n;
  n.op = Op::kSub;
  n.a = a.id;
  n.b = b.id;
  n.value = nodes_[a.id].value - nodes_[b.id].value;
  n.needs_grad = NeedsGrad(a.id, b.id);
  return Push(std::move(n));
}

Tape::Var Tape::Mul(Var a, Var b) {
  CheckSameShape(At(a, "Mul").value, At(b, "Mul").value, "Mul");
  Node n;
  n.op = Op::kMul;
  n.a = a.id;
  n.b = b.id;
  n.value = nodes_[a.id].value.cwiseProduct(nodes_[b.id].value);
  n.needs_grad = NeedsGrad(a.id, b.id);
  return Push(std::move(n));
}

Tape::Var Tape::Scale(Var a, double s) {
  Node n;
  n.op = Op::kScale;
  n.a = a.id;
  n.scalar = s;
  n.value = At(a, "Scale").value * s;
  n.needs_grad = NeedsGrad(a.id);
  return Push(std::move(n));
}

Tape::Var Tape::AddScalar(Var a, double s) {
  Node n;
  n.op = Op::kAddScalar;
  n.a = a.id;
  n.value = At(a, "AddScalar").value.array() + s;
  n.needs_grad = NeedsGrad(a.id);
  return Push(std::move(n));
}

Tape::Var Tape::Exp(Var a) {
  Node n;
  n.op = Op::kExp;
  n.a = a.id;
  n.value = At(a, "Exp").value.array().exp();
  n.needs_grad = NeedsGrad(a.id);
  return Push(std::move(n));
}

Tape::Var Tape::Square(Var a) {
  Node n;
  n.op = Op::kSquare;
  n.a = a.id;
  n.value = At(a, "Square").value.array().square();
  n.needs_grad = NeedsGrad(a.id);
  return Push(std::move(n));
}

Tape::Var Tape::Softplus(Var a) {
  Node n;
  n.op = Op::kSoftplus;
  n.a = a.id;
  n.value = At(a, "Softplus").value.unaryExpr(&SoftplusScalar);
  n.needs_grad = NeedsGrad(a.id);
  return Push(std::move(n));
}

Tape::Var Tape::Swish(Var a) {
  Node n;
  n.op = Op::kSwish;
  n.a = a.id;
  n.value = At(a, "Swish").value.unaryExpr(
      [](double x) { return x * Sigmoid(x); });
  n.needs_grad = NeedsGrad(a.id);
  return Push(std::move(n));
}

Tape::Var Tape::Sum(Var a) {
  Node n;
  n.op = Op::kSum;
  n.a = a.id;
  n.value = Eigen::MatrixXd::Constant(1, 1, At(a, "Sum").value.sum());
  n.needs_grad = NeedsGrad(a.id);
  return Push(std::move(n));
}

Tape::Var Tape::ConcatRows(Var top, Var bottom) {
  const auto& t = At(top, "ConcatRows").value;
  const auto& b = At(bottom, "ConcatRows").value;
  if (t.cols() != b.cols()) {
    throw std::invalid_argument("ConcatRows: column counts " +
                                std::to_string(t.cols()) + " and " +
                                std::to_string(b.cols()));
  }
  Node n;
  n.op = Op::kConcatRows;
  n.a = top.id;
  n.b = bottom.id;
  n.value.resize(t.rows() + b.rows(), t.cols());
  n.value.topRows(t.rows()) = t;
  n.value.bottomRows(b.rows()) = b;
  n.needs_grad = NeedsGrad(top.id, bottom.id);
  return Push(std::move(n));
}

Tape::Var Tape::GatherCols(Var src, std::vector<int> index) {
  const auto& s = At(src, "GatherCols").value;
  Node n;
  n.op = Op::kGatherCols;
  n.a = src.id;
  n.value.resize(s.rows(), static_cast<Eigen::Index>(index.size()));
  for (size_t j = 0; j < index.size(); ++j) {
    if (index[j] < 0 || index[j] >= s.cols()) {
      throw std::out_of_range("GatherCols: column " +
                              std::to_string(index[j]) + " out of range");
    }
    n.value.col(j) = s.col(index[j]);
  }
  n.index = std::move(index);
  n.needs_grad = NeedsGrad(src.id);
  return Push(std::move(n));
}

const Eigen::MatrixXd& Tape::value(Var v) const { return At(v, "value").value; }

double Tape::scalar(Var v) const {
  const auto& m = value(v);
  if (m.size() != 1) throw std::invalid_argument("scalar: value is not 1x1");
  return m(0, 0);
}

void Tape::Backward(Var loss) {
  const Node& l = At(loss, "Backward");
  if (l.value.size() != 1) {
    throw std::invalid_argument("Backward: loss must be a 1x1 value");
  }
  if (backward_done_) {
    throw std::logic_error("Backward: tape has already been consumed");
  }
  for (auto& n : nodes_) n.grad.setZero(n.value.rows(), n.value.cols());
  nodes_[loss.id].grad(0, 0) = 1.0;

  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.needs_grad || n.op == Op::kLeaf) continue;
    const Eigen::MatrixXd& g = n.grad;
    auto accumulate = [&](int id) -> Eigen::MatrixXd* {
      if (id < 0 || !nodes_[id].needs_grad) return nullptr;
      return &nodes_[id].grad;
    };
    Eigen::MatrixXd* ga = accumulate(n.a);
    Eigen::MatrixXd* gb = accumulate(n.b);
    const Eigen::MatrixXd& av = nodes_[n.a].value;
    switch (n.op) {
      case Op::kLeaf:
        break;
      case Op::kMatMul: {
        const Eigen::MatrixXd& bv = nodes_[n.b].value;
        if (ga) ga->noalias() += g * bv.transpose();
        if (gb) gb->noalias() += av.transpose() * g;
        break;
      }
      case Op::kAddBias:
        if (ga) *ga += g;
        if (gb) *gb += g.rowwise().sum();
        break;
      case Op::kAdd:
        if (ga) *ga += g;
        if (gb) *gb += g;
        break;
      case Op::kSub:
        if (ga) *ga += g;
        if (gb) *gb -= g;
        break;
      case Op::kMul:
        if (ga) *ga += g.cwiseProduct(nodes_[n.b].value);
        if (gb) *gb += g.cwiseProduct(av);
        break;
      case Op::kScale:
        if (ga) *ga += n.scalar * g;
        break;
      case Op::kAddScalar:
        if (ga) *ga += g;
        break;
      case Op::kExp:
        if (ga) *ga += g.cwiseProduct(n.value);
        break;
      case Op::kSquare:
        if (ga) *ga += 2.0 * g.cwiseProduct(av);
        break;
      case Op::kSoftplus:
        if (ga) *ga += g.cwiseProduct(av.unaryExpr(&Sigmoid));
        break;
      case Op::kSwish:
        if (ga) {
          *ga += g.cwiseProduct(av.unaryExpr([](double x) {
            double s = Sigmoid(x);
            return s + x * s * (1.0 - s);
          }));
        }
        break;
      case Op::kSum:
        if (ga) ga->array() += g(0, 0);
        break;
      case Op::kConcatRows:
        if (ga) *ga += g.topRows(av.rows());
        if (gb) *gb += g.bottomRows(nodes_[n.b].value.rows());
        break;
      case Op::kGatherCols:
        if (ga) {
          for (size_t j = 0; j < n.index.size(); ++j) {
            ga->col(n.index[j]) += g.col(j);
          }
        }
        break;
    }
  }
  backward_done_ = true;
}

const Eigen::MatrixXd& Tape::grad(Var v) const {
  const Node& n = At(v, "grad");
  if (!backward_done_) {
    throw std::logic_error("grad: Backward() has not been run on this tape");
  }
  if (!n.needs_grad) {
    throw std::invalid_argument("grad: value " + std::to_string(v.id) +
                                " does not carry a gradient");
  }
  return n.grad;
}

}  // namespace lmbrl
