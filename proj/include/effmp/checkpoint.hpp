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

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "effmp/tensor.hpp"

namespace effmp
{

std::string base64_encode(const std::vector<std::uint8_t> & bytes);
std::vector<std::uint8_t> base64_decode(const std::string & text);

/// One `<name> <shape> <base64>` record: values are 64-bit little-endian.
struct CheckpointRecord
{
  std::string name;
  Shape shape;
  std::vector<double> values;  // row-major
};

/// `CKPT v1` file: header lines (embedded model config, its hash, optimizer
/// step and scheduler state) followed by parameter and moment records.
struct Checkpoint
{
  std::string config_line;
  long step = 0;
  double lr = 0.0;
  double sched_best = std::numeric_limits<double>::infinity();
  int sched_bad = 0;
  int stop_bad = 0;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<CheckpointRecord> records;

  std::uint64_t config_hash() const;
  const CheckpointRecord * find(const std::string & name) const;
};

void save_checkpoint(const Checkpoint & ckpt, const std::filesystem::path & path);
Checkpoint load_checkpoint(const std::filesystem::path & path);

}  // namespace effmp
