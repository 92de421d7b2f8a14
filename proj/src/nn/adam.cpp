// Copyright 2026 The flexff Authors.
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

#include "flexff/nn/adam.hpp"

#include <cmath>

#include "flexff/common/error.hpp"
#include "flexff/simd/kernels.hpp"

namespace flexff::nn {

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads,
               double lr, const AdamHyper& hyper) {
  require(params.size() == grads.size() && state.m.size() == params.size() &&
              state.v.size() == params.size(),
          "shape_mismatch", "adam_step: params, grads and moments must have equal size");
  ++state.step;
  const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));
  simd::kernels().adam_update(params.data(), grads.data(), state.m.data(), state.v.data(),
                              params.size(), lr / bc1, hyper.beta1, hyper.beta2, 1.0 / bc2,
                              hyper.eps);
}

}  // namespace flexff::nn
