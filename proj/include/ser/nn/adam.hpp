// Copyright 2026 The serlab Authors.
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

#pragma once

#include <vector>

#include "ser/nn/tensor.hpp"

namespace ser::nn {

template <typename Scalar>
struct AdamState {
  long step = 0;
  Scalar lr = Scalar(5.0e-5);
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar eps = Scalar(1e-8);
  std::vector<Vector<Scalar>> m;
  std::vector<Vector<Scalar>> v;
};

/// One bias-corrected Adam update of `params` using their gradient buffers.
/// Moment buffers are allocated on the first call and shape-checked afterwards.
template <typename Scalar>
void adam_step(const std::vector<Tensor<Scalar>*>& params, AdamState<Scalar>& state) {
  if (state.m.empty() && state.v.empty()) {
    for (const auto* p : params) {
      state.m.push_back(Vector<Scalar>::Zero(p->numel()));
      state.v.push_back(Vector<Scalar>::Zero(p->numel()));
    }
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ShapeError("adam: state tracks " + std::to_string(state.m.size()) + " tensors, got " +
                     std::to_string(params.size()));
  }
  ++state.step;
  const Scalar c1 = Scalar(1) - std::pow(state.beta1, static_cast<Scalar>(state.step));
  const Scalar c2 = Scalar(1) - std::pow(state.beta2, static_cast<Scalar>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    const auto& g = p.grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (m.size() != p.numel() || v.size() != p.numel()) {
      throw ShapeError("adam: moment size mismatch for tensor " + std::to_string(i));
    }
    m = state.beta1 * m + (Scalar(1) - state.beta1) * g;
    v = state.beta2 * v + (Scalar(1) - state.beta2) * g.cwiseAbs2();
    p.data().array() -=
        state.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + state.eps);
  }
}

}  // namespace ser::nn
