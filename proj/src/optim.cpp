// Copyright 2026 The effmp Authors
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

#include "effmp/optim.hpp"

#include <cmath>

#include "effmp/errors.hpp"

namespace effmp
{

void adam_step(
  std::vector<Tensor> & params, AdamState & state, double lr, double beta1, double beta2,
  double eps)
{
  if (state.m.empty()) {
    for (const auto & p : params) {
      state.m.push_back(Mat::Zero(p.value().rows(), p.value().cols()));
      state.v.push_back(Mat::Zero(p.value().rows(), p.value().cols()));
    }
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ValidationError("optimizer state does not match the parameter list");
  }
  for (const auto & p : params) {
    if (!p.has_grad()) {
      throw Error("missing gradient for a parameter in adam_step");
    }
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Mat & g = params[i].grad();
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g.cwiseProduct(g);
    const Mat m_hat = state.m[i] / bc1;
    const Mat v_hat = state.v[i] / bc2;
    const Mat update = (m_hat.array() / (v_hat.array().sqrt() + eps)).matrix() * lr;
    params[i].assign_value(params[i].value() - update);
  }
}

double plateau_scheduler(PlateauState & state, double metric, double factor, int patience)
{
  if (!std::isfinite(metric)) {
    throw ValidationError("plateau scheduler metric must be finite");
  }
  if (state.best - metric >= state.min_delta) {
    state.best = metric;
    state.bad = 0;
  } else {
    ++state.bad;
    if (state.bad >= patience) {
      state.lr *= factor;
      state.bad = 0;
    }
  }
  return state.lr;
}

}  // namespace effmp
