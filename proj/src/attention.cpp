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

#include "effmp/attention.hpp"

#include <cmath>

#include "effmp/errors.hpp"

namespace effmp
{

int MhsaConfig::head_dim() const
{
  if (heads < 1 || model_dim % heads != 0) {
    throw ValidationError("model_dim " + std::to_string(model_dim) +
                          " not divisible by heads " + std::to_string(heads));
  }
  return model_dim / heads;
}

Tensor init_linear_weight(int fan_in, int fan_out, Rng & rng)
{
  const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> values(static_cast<std::size_t>(fan_in) * fan_out);
  for (auto & v : values) {
    v = uniform_in(rng, -s, s);
  }
  return Tensor::from_values({fan_in, fan_out}, std::move(values), true);
}

Tensor init_bias(int size)
{
  return Tensor::zeros({size}, true);
}

LinearParams LinearParams::init(int in, int out, Rng & rng)
{
  return {init_linear_weight(in, out, rng), init_bias(out)};
}

NamedParams LinearParams::named(const std::string & prefix) const
{
  return {{prefix + ".w", weight}, {prefix + ".b", bias}};
}

AttentionParams AttentionParams::init(int model_dim, Rng & rng)
{
  return {LinearParams::init(model_dim, model_dim, rng),
          LinearParams::init(model_dim, model_dim, rng),
          LinearParams::init(model_dim, model_dim, rng),
          LinearParams::init(model_dim, model_dim, rng)};
}

NamedParams AttentionParams::named(const std::string & prefix) const
{
  NamedParams out;
  auto append = [&out](NamedParams items) {
    for (auto & item : items) {
      out.push_back(std::move(item));
    }
  };
  append(q.named(prefix + ".q"));
  append(k.named(prefix + ".k"));
  append(v.named(prefix + ".v"));
  append(o.named(prefix + ".o"));
  return out;
}

FeedForwardParams FeedForwardParams::init(int dim, int hidden, Rng & rng)
{
  return {LinearParams::init(dim, hidden, rng), LinearParams::init(hidden, dim, rng)};
}

NamedParams FeedForwardParams::named(const std::string & prefix) const
{
  NamedParams items = in.named(prefix + ".ff1");
  for (auto & item : out.named(prefix + ".ff2")) {
    items.push_back(std::move(item));
  }
  return items;
}

SetBlockParams SetBlockParams::init(const SetBlockConfig & cfg, Rng & rng)
{
  return {AttentionParams::init(cfg.model_dim, rng),
          FeedForwardParams::init(cfg.model_dim, cfg.hidden_dim, rng)};
}

NamedParams SetBlockParams::named(const std::string & prefix) const
{
  NamedParams out = attn.named(prefix + ".attn");
  for (auto & item : ff.named(prefix)) {
    out.push_back(std::move(item));
  }
  return out;
}

LstmParams LstmParams::init(int input_dim, int hidden_dim, Rng & rng)
{
  LstmParams p{init_linear_weight(input_dim, 4 * hidden_dim, rng),
               init_linear_weight(hidden_dim, 4 * hidden_dim, rng),
               init_bias(4 * hidden_dim)};
  // Forget-gate bias 1 keeps early memories open.
  Mat b = p.bias.value();
  for (int i = hidden_dim; i < 2 * hidden_dim; ++i) {
    b(0, i) = 1.0;
  }
  p.bias.assign_value(b);
  return p;
}

NamedParams LstmParams::named(const std::string & prefix) const
{
  return {{prefix + ".w_ih", w_ih}, {prefix + ".w_hh", w_hh}, {prefix + ".b", bias}};
}

Tensor linear(const Tensor & x, const LinearParams & p)
{
  return add(matmul(x, p.weight), p.bias);
}

Tensor cross_attention(
  const Tensor & q, const Tensor & kv, const MhsaConfig & cfg, const AttentionParams & params,
  const std::optional<Tensor> & kv_mask)
{
  const int hd = cfg.head_dim();
  if (q.rank() != 2 || kv.rank() != 2) {
    throw ShapeError("attention inputs must be rank 2");
  }
  if (q.shape()[1] != cfg.model_dim || kv.shape()[1] != cfg.model_dim) {
    throw ShapeError("attention input width != model_dim");
  }
  const Tensor qp = linear(q, params.q);
  const Tensor kp = linear(kv, params.k);
  const Tensor vp = linear(kv, params.v);

  std::optional<Tensor> mask_bias;
  if (kv_mask.has_value()) {
    // 0/1 keep-mask over kv rows -> additive -1e9 on masked logits.
    mask_bias = scale(add_scalar(*kv_mask, -1.0), 1e9);
  }

  std::vector<Tensor> head_outputs;
  head_outputs.reserve(static_cast<std::size_t>(cfg.heads));
  for (int h = 0; h < cfg.heads; ++h) {
    const Tensor qh = slice(qp, 1, h * hd, hd);
    const Tensor kh = slice(kp, 1, h * hd, hd);
    const Tensor vh = slice(vp, 1, h * hd, hd);
    Tensor scores = scale(matmul(qh, transpose(kh)), 1.0 / std::sqrt(static_cast<double>(hd)));
    if (mask_bias.has_value()) {
      scores = add(scores, *mask_bias);  // broadcast over query rows
    }
    const Tensor weights = softmax(scores, 1);
    head_outputs.push_back(matmul(weights, vh));
  }
  return linear(concat(head_outputs, 1), params.o);
}

Tensor mhsa(
  const Tensor & x, const MhsaConfig & cfg, const AttentionParams & params,
  const std::optional<Tensor> & mask)
{
  return cross_attention(x, x, cfg, params, mask);
}

Tensor set_attention_block(const Tensor & x, const SetBlockConfig & cfg,
                           const SetBlockParams & params)
{
  const Tensor attended = mhsa(x, cfg.attention(), params.attn);
  return linear(relu(linear(attended, params.ff.in)), params.ff.out);
}

std::pair<Tensor, Tensor> lstm_step(
  const Tensor & x, const Tensor & h, const Tensor & c, const LstmParams & params)
{
  const int hidden = params.hidden_dim();
  const Tensor gates = add(add(matmul(x, params.w_ih), matmul(h, params.w_hh)), params.bias);
  const int axis = gates.rank() == 2 ? 1 : 0;
  const Tensor i = sigmoid(slice(gates, axis, 0, hidden));
  const Tensor f = sigmoid(slice(gates, axis, hidden, hidden));
  const Tensor g = tanh(slice(gates, axis, 2 * hidden, hidden));
  const Tensor o = sigmoid(slice(gates, axis, 3 * hidden, hidden));
  const Tensor c_next = add(mul(f, c), mul(i, g));
  const Tensor h_next = mul(o, tanh(c_next));
  return {h_next, c_next};
}

}  // namespace effmp
