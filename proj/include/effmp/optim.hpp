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

#pragma once

#include <limits>
#include <vector>

#include "effmp/tensor.hpp"

namespace effmp
{

/// First/second moments aligned with the parameter list given to adam_step.
struct AdamState
{
  long step = 0;
  std::vector<Mat> m;
  std::vector<Mat> v;
};

/// Standard Adam update with bias correction. Every parameter must carry an
/// accumulated gradient; grads are left untouched (call zero_grad between steps).
void adam_step(
  std::vector<Tensor> & params, AdamState & state, double lr, double beta1 = 0.9,
  double beta2 = 0.999, double eps = 1e-8);

struct PlateauState
{
  double lr = 0.0;
  double best = std::numeric_limits<double>::infinity();
  int bad = 0;           // consecutive evaluations without improvement
  double min_delta = 1e-4;
};

/// Multiplies lr by `factor` whenever the metric fails to improve by at least
/// min_delta for `patience` consecutive evaluations. Returns the new lr.
double plateau_scheduler(PlateauState & state, double metric, double factor, int patience);

}  // namespace effmp
