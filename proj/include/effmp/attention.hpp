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

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "effmp/rng.hpp"
#include "effmp/tensor.hpp"

namespace effmp
{

struct MhsaConfig
{
  int model_dim = 48;
  int heads = 4;

  int head_dim() const;  // model_dim / heads, validated
};

/// Set-attention block: attention followed by a pointwise feed-forward.
/// No positional encoding, layer normalization or residual connections.
struct SetBlockConfig
{
  int model_dim = 48;
  int heads = 4;
  int hidden_dim = 128;

  MhsaConfig attention() const { return {model_dim, heads}; }
};

/// Ordered (name, tensor) pairs; the order defines the checkpoint layout.
using NamedParams = std::vector<std::pair<std::string, Tensor>>;

/// Uniform(-s, s) with s = 1/sqrt(fan_in).
Tensor init_linear_weight(int fan_in, int fan_out, Rng & rng);
Tensor init_bias(int size);

struct LinearParams
{
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]

  static LinearParams init(int in, int out, Rng & rng);
  NamedParams named(const std::string & prefix) const;
};

/// Query/key/value/output projections of one attention block.
struct AttentionParams
{
  LinearParams q, k, v, o;

  static AttentionParams init(int model_dim, Rng & rng);
  NamedParams named(const std::string & prefix) const;
};

struct FeedForwardParams
{
  LinearParams in, out;

  static FeedForwardParams init(int dim, int hidden, Rng & rng);
  NamedParams named(const std::string & prefix) const;
};

struct SetBlockParams
{
  AttentionParams attn;
  FeedForwardParams ff;

  static SetBlockParams init(const SetBlockConfig & cfg, Rng & rng);
  NamedParams named(const std::string & prefix) const;
};

/// Fused-gate LSTM cell parameters, gate order i, f, g, o. The forget-gate
/// bias starts at 1.
struct LstmParams
{
  Tensor w_ih;  // [input_dim, 4*hidden]
  Tensor w_hh;  // [hidden, 4*hidden]
  Tensor bias;  // [4*hidden]

  static LstmParams init(int input_dim, int hidden_dim, Rng & rng);
  NamedParams named(const std::string & prefix) const;
  int hidden_dim() const { return static_cast<int>(w_hh.shape()[0]); }
};

Tensor linear(const Tensor & x, const LinearParams & p);

/// Scaled dot-product attention of q rows over kv rows (1/sqrt(head_dim) per
/// head, heads concatenated, output projection). `kv_mask`, when given, is a
/// 0/1 vector over kv rows; masked rows get -1e9 score logits.
Tensor cross_attention(
  const Tensor & q, const Tensor & kv, const MhsaConfig & cfg, const AttentionParams & params,
  const std::optional<Tensor> & kv_mask = std::nullopt);

/// Self-attention: cross_attention of x over itself. Permutation-equivariant.
Tensor mhsa(
  const Tensor & x, const MhsaConfig & cfg, const AttentionParams & params,
  const std::optional<Tensor> & mask = std::nullopt);

Tensor set_attention_block(const Tensor & x, const SetBlockConfig & cfg,
                           const SetBlockParams & params);

/// One LSTM step. x is [input_dim] or [batch, input_dim]; h and c match with
/// hidden_dim columns. Returns (h', c').
std::pair<Tensor, Tensor> lstm_step(
  const Tensor & x, const Tensor & h, const Tensor & c, const LstmParams & params);

}  // namespace effmp
