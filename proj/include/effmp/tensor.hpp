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

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace effmp
{

// 64-bit scalars everywhere: the models are tiny and gradient checks stay clean.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Shape = std::vector<Eigen::Index>;

std::string shape_to_string(const Shape & shape);

/// Dense value with reverse-mode gradient support. A Tensor is a cheap shared
/// handle to its node; ops build a define-by-run graph that lives as long as
/// some output references it. Supported ranks are 0 (scalar), 1 (vector) and
/// 2 (matrix); every shape this toolkit needs is a set of vectors.
///
/// Storage is row-major: rank-1 values occupy one row, rank-2 values are laid
/// out row by row. Axis 0 always indexes the leading dimension of the logical
/// shape.
class Tensor
{
public:
  struct Node
  {
    Mat value;
    Mat grad;  // empty until backward touches the node
    Shape shape;
    bool requires_grad = false;  // set on leaves; propagated through ops
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node &)> backward_fn;  // reads node.grad, accumulates into parents
    const char * op = "leaf";

    bool is_leaf() const { return parents.empty(); }
  };
  using NodePtr = std::shared_ptr<Node>;

  Tensor() = default;

  static Tensor scalar(double v, bool requires_grad = false);
  static Tensor zeros(const Shape & shape, bool requires_grad = false);
  static Tensor full(const Shape & shape, double v, bool requires_grad = false);
  /// Row-major values, |values| must equal the shape's element count.
  static Tensor from_values(const Shape & shape, std::vector<double> values,
                            bool requires_grad = false);
  static Tensor from_matrix(const Mat & m, bool requires_grad = false);  // rank 2
  static Tensor vector(std::vector<double> values, bool requires_grad = false);  // rank 1

  bool defined() const { return node_ != nullptr; }
  const Shape & shape() const;
  int rank() const { return static_cast<int>(shape().size()); }
  Eigen::Index numel() const;
  const Mat & value() const;
  double scalar_value() const;  // requires numel() == 1
  double at(Eigen::Index i) const;                   // rank 0/1
  double at(Eigen::Index i, Eigen::Index j) const;   // rank 2

  bool requires_grad() const;
  bool has_grad() const;
  const Mat & grad() const;  // throws if no gradient has been accumulated
  void zero_grad();

  /// In-place value update for parameters; shape must match.
  void assign_value(const Mat & m);

  std::vector<double> values_row_major() const;

  NodePtr node() const { return node_; }
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}

private:
  NodePtr node_;
};

/// Nodes reachable from a root, topologically ordered (inputs first).
using ComputeGraph = std::vector<Tensor::Node *>;

ComputeGraph topological_order(const Tensor & root);

/// Accumulates d(loss)/d(leaf) into the grad of every requires_grad leaf.
/// Repeated calls without zero_grad accumulate additively. The loss must be
/// a scalar produced through the graph.
void backward(const Tensor & loss);

// Elementwise binary ops. Shapes must match, or one operand's shape must be a
// suffix of the other's (leading-dimension broadcast, e.g. matrix + row bias).
Tensor add(const Tensor & a, const Tensor & b);
Tensor sub(const Tensor & a, const Tensor & b);
Tensor mul(const Tensor & a, const Tensor & b);

Tensor scale(const Tensor & a, double s);
Tensor add_scalar(const Tensor & a, double s);
Tensor neg(const Tensor & a);

Tensor matmul(const Tensor & a, const Tensor & b);
Tensor transpose(const Tensor & a);
Tensor concat(const std::vector<Tensor> & parts, int axis);
Tensor slice(const Tensor & a, int axis, Eigen::Index start, Eigen::Index len);
Tensor reshape(const Tensor & a, const Shape & shape);

// Reductions; no axis reduces over all elements to a scalar.
Tensor sum(const Tensor & a, std::optional<int> axis = std::nullopt);
Tensor mean(const Tensor & a, std::optional<int> axis = std::nullopt);
Tensor max(const Tensor & a, std::optional<int> axis = std::nullopt);

Tensor exp(const Tensor & a);
Tensor log(const Tensor & a);
Tensor tanh(const Tensor & a);
Tensor sigmoid(const Tensor & a);
Tensor sqrt(const Tensor & a);
Tensor relu(const Tensor & a);

/// Max-shifted, so inputs with magnitude up to 1e4 (and masked -1e9 logits)
/// stay finite.
Tensor softmax(const Tensor & a, int axis);
Tensor logsumexp(const Tensor & a, std::optional<int> axis = std::nullopt);

inline Tensor operator+(const Tensor & a, const Tensor & b) { return add(a, b); }
inline Tensor operator-(const Tensor & a, const Tensor & b) { return sub(a, b); }
inline Tensor operator*(const Tensor & a, const Tensor & b) { return mul(a, b); }
inline Tensor operator*(const Tensor & a, double s) { return scale(a, s); }
inline Tensor operator*(double s, const Tensor & a) { return scale(a, s); }
inline Tensor operator-(const Tensor & a) { return neg(a); }

}  // namespace effmp
