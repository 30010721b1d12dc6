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

#ifndef LMBRL_RNG_H_
#define LMBRL_RNG_H_

#include <cmath>
#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace lmbrl {

// Seeded random stream. Every stochastic operation in the library takes one
// of these explicitly so that runs are reproducible from a seed.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : engine_(seed) {}

  double Normal() { return normal_(engine_); }
  double Uniform(double low, double high) {
    return std::uniform_real_distribution<double>(low, high)(engine_);
  }
  // uniform integer in [0, n)
  int Index(int n) {
    return std::uniform_int_distribution<int>(0, n - 1)(engine_);
  }

  Eigen::MatrixXd NormalMatrix(Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd out(rows, cols);
    FillNormal(out.data(), out.size());
    return out;
  }

  // Box-Muller on raw engine output; faster than repeated Normal() for bulk
  // draws. Uses its own stream of engine outputs, so mixing it with Normal()
  // is fine but the two are not interchangeable draw-for-draw.
  void FillNormal(double* out, Eigen::Index n) {
    constexpr double kScale = 1.0 / 9007199254740992.0;  // 2^-53
    constexpr double kTwoPi = 6.283185307179586;
    Eigen::Index i = 0;
    while (i < n) {
      double u1 = (static_cast<double>(engine_() >> 11) + 0.5) * kScale;
      double u2 = static_cast<double>(engine_() >> 11) * kScale;
      double r = std::sqrt(-2.0 * std::log(u1));
      out[i++] = r * std::cos(kTwoPi * u2);
      if (i < n) out[i++] = r * std::sin(kTwoPi * u2);
    }
  }
  Eigen::VectorXd NormalVector(Eigen::Index n) {
    Eigen::VectorXd out(n);
    FillNormal(out.data(), n);
    return out;
  }

  // Derive an independent child stream, e.g. one per ensemble member.
  Rng Split() { return Rng(engine_() ^ 0x9e3779b97f4a7c15ULL); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

}  // namespace lmbrl

#endif  // LMBRL_RNG_H_
