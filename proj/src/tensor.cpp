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

#include "effmp/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "effmp/errors.hpp"

namespace effmp
{

namespace
{

using Node = Tensor::Node;
using NodePtr = Tensor::NodePtr;

std::pair<Eigen::Index, Eigen::Index> internal_dims(const Shape & shape)
{
  switch (shape.size()) {
    case 0:
      return {1, 1};
    case 1:
      return {1, shape[0]};
    case 2:
      return {shape[0], shape[1]};
    default:
      throw ShapeError("rank " + std::to_string(shape.size()) + " tensors are not supported");
  }
}

Eigen::Index element_count(const Shape & shape)
{
  Eigen::Index n = 1;
  for (const auto d : shape) {
    n *= d;
  }
  return n;
}

void check_shape(const Shape & shape)
{
  if (shape.size() > 2) {
    throw ShapeError("rank " + std::to_string(shape.size()) + " tensors are not supported");
  }
  for (const auto d : shape) {
    if (d < 1) {
      throw ShapeError("dimensions must be >= 1, got " + shape_to_string(shape));
    }
  }
}

NodePtr make_leaf(const Shape & shape, Mat value, bool requires_grad)
{
  auto node = std::make_shared<Node>();
  node->shape = shape;
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  return node;
}

Tensor make_op(const Shape & shape, Mat value, std::vector<NodePtr> parents,
               std::function<void(Node &)> backward_fn, const char * op)
{
  auto node = std::make_shared<Node>();
  node->shape = shape;
  node->value = std::move(value);
  node->op = op;
  for (const auto & p : parents) {
    node->requires_grad = node->requires_grad || p->requires_grad;
  }
  node->parents = std::move(parents);
  if (node->requires_grad) {
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor(node);
}

void accumulate(Node & target, const Mat & g)
{
  if (!target.requires_grad) {
    return;
  }
  if (target.grad.size() == 0) {
    target.grad = Mat::Zero(target.value.rows(), target.value.cols());
  }
  target.grad += g;
}

[[noreturn]] void shape_fail(const char * op, const Shape & a, const Shape & b)
{
  throw ShapeError(std::string(op) + " on shapes " + shape_to_string(a) + " and " +
                   shape_to_string(b));
}

/// True when `small` equals the trailing dimensions of `big`.
bool is_suffix(const Shape & small, const Shape & big)
{
  if (small.size() > big.size()) {
    return false;
  }
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

/// Replicates a (possibly smaller) operand to the internal dims of `shape`.
Mat expand_to(const Mat & m, const Shape & from, const Shape & to)
{
  if (from == to) {
    return m;
  }
  const auto [rows, cols] = internal_dims(to);
  if (from.empty()) {
    return Mat::Constant(rows, cols, m(0, 0));
  }
  // from is rank 1 [cols], to is rank 2 [rows, cols]
  return m.replicate(rows, 1);
}

/// Sums a full-shaped gradient down to an operand's broadcast shape.
Mat reduce_to(const Mat & g, const Shape & from, const Shape & to)
{
  if (from == to) {
    return g;
  }
  if (to.empty()) {
    Mat r(1, 1);
    r(0, 0) = g.sum();
    return r;
  }
  return g.colwise().sum();
}

struct BinaryOperands
{
  Shape out_shape;
  Mat a;  // expanded to out_shape
  Mat b;
};

BinaryOperands align(const char * op, const Tensor & a, const Tensor & b)
{
  const Shape & sa = a.shape();
  const Shape & sb = b.shape();
  Shape out;
  if (sa == sb) {
    out = sa;
  } else if (is_suffix(sb, sa)) {
    out = sa;
  } else if (is_suffix(sa, sb)) {
    out = sb;
  } else {
    shape_fail(op, sa, sb);
  }
  return {out, expand_to(a.value(), sa, out), expand_to(b.value(), sb, out)};
}

Tensor unary_elementwise(const Tensor & a, const char * op, Mat value,
                         std::function<Mat(const Mat & y, const Mat & g)> vjp)
{
  NodePtr pa = a.node();
  Mat y = value;
  return make_op(
    a.shape(), std::move(value), {pa},
    [pa, y = std::move(y), vjp = std::move(vjp)](Node & self) {
      accumulate(*pa, vjp(y, self.grad));
    },
    op);
}

/// Iteration over the reduction/normalization lanes of an axis op. For a
/// rank-2 tensor, axis 0 lanes are columns and axis 1 lanes are rows; a
/// rank-1 tensor has a single lane.
struct LaneView
{
  Eigen::Index count = 0;   // number of lanes
  Eigen::Index length = 0;  // elements per lane
  bool lanes_are_rows = false;

  static LaneView of(const Shape & shape, int axis)
  {
    const auto [rows, cols] = internal_dims(shape);
    if (shape.size() <= 1) {
      if (axis != 0) {
        throw ShapeError("axis " + std::to_string(axis) + " out of range for " +
                         shape_to_string(shape));
      }
      return {1, cols, true};
    }
    if (axis == 0) {
      return {cols, rows, false};
    }
    if (axis == 1) {
      return {rows, cols, true};
    }
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " +
                     shape_to_string(shape));
  }

  double get(const Mat & m, Eigen::Index lane, Eigen::Index i) const
  {
    return lanes_are_rows ? m(lane, i) : m(i, lane);
  }
  void add(Mat & m, Eigen::Index lane, Eigen::Index i, double v) const
  {
    (lanes_are_rows ? m(lane, i) : m(i, lane)) += v;
  }
};

/// Output shape of reducing `shape` along `axis`.
Shape reduced_shape(const Shape & shape, std::optional<int> axis)
{
  if (!axis.has_value() || shape.size() <= 1) {
    return {};
  }
  if (*axis == 0) {
    return {shape[1]};
  }
  if (*axis == 1) {
    return {shape[0]};
  }
  throw ShapeError("axis " + std::to_string(*axis) + " out of range for " +
                   shape_to_string(shape));
}

}  // namespace

std::string shape_to_string(const Shape & shape)
{
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    out << (i ? "," : "") << shape[i];
  }
  out << ']';
  return out.str();
}

Tensor Tensor::scalar(double v, bool requires_grad)
{
  Mat m(1, 1);
  m(0, 0) = v;
  return Tensor(make_leaf({}, std::move(m), requires_grad));
}

Tensor Tensor::zeros(const Shape & shape, bool requires_grad)
{
  check_shape(shape);
  const auto [r, c] = internal_dims(shape);
  return Tensor(make_leaf(shape, Mat::Zero(r, c), requires_grad));
}

Tensor Tensor::full(const Shape & shape, double v, bool requires_grad)
{
  check_shape(shape);
  const auto [r, c] = internal_dims(shape);
  return Tensor(make_leaf(shape, Mat::Constant(r, c, v), requires_grad));
}

Tensor Tensor::from_values(const Shape & shape, std::vector<double> values, bool requires_grad)
{
  check_shape(shape);
  const auto [r, c] = internal_dims(shape);
  if (static_cast<Eigen::Index>(values.size()) != r * c) {
    throw ShapeError("value count " + std::to_string(values.size()) + " does not fill " +
                     shape_to_string(shape));
  }
  Mat m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) {
      m(i, j) = values[static_cast<std::size_t>(i) * c + j];
    }
  }
  return Tensor(make_leaf(shape, std::move(m), requires_grad));
}

Tensor Tensor::from_matrix(const Mat & m, bool requires_grad)
{
  return Tensor(make_leaf({m.rows(), m.cols()}, m, requires_grad));
}

Tensor Tensor::vector(std::vector<double> values, bool requires_grad)
{
  const Shape shape{static_cast<Eigen::Index>(values.size())};
  return from_values(shape, std::move(values), requires_grad);
}

const Shape & Tensor::shape() const
{
  if (!node_) {
    throw Error("use of an undefined tensor");
  }
  return node_->shape;
}

Eigen::Index Tensor::numel() const
{
  return element_count(shape());
}

const Mat & Tensor::value() const
{
  if (!node_) {
    throw Error("use of an undefined tensor");
  }
  return node_->value;
}

double Tensor::scalar_value() const
{
  if (numel() != 1) {
    throw ShapeError("scalar_value on shape " + shape_to_string(shape()));
  }
  return value()(0, 0);
}

double Tensor::at(Eigen::Index i) const
{
  if (rank() > 1) {
    throw ShapeError("1-index access on shape " + shape_to_string(shape()));
  }
  return value()(0, i);
}

double Tensor::at(Eigen::Index i, Eigen::Index j) const
{
  if (rank() != 2) {
    throw ShapeError("2-index access on shape " + shape_to_string(shape()));
  }
  return value()(i, j);
}

bool Tensor::requires_grad() const
{
  return node_ && node_->requires_grad;
}

bool Tensor::has_grad() const
{
  return node_ && node_->grad.size() != 0;
}

const Mat & Tensor::grad() const
{
  if (!has_grad()) {
    throw Error("tensor has no accumulated gradient");
  }
  return node_->grad;
}

void Tensor::zero_grad()
{
  if (node_) {
    node_->grad.resize(0, 0);
  }
}

void Tensor::assign_value(const Mat & m)
{
  if (!node_) {
    throw Error("use of an undefined tensor");
  }
  if (m.rows() != node_->value.rows() || m.cols() != node_->value.cols()) {
    throw ShapeError("assign_value with mismatched dimensions");
  }
  node_->value = m;
}

std::vector<double> Tensor::values_row_major() const
{
  const Mat & m = value();
  std::vector<double> out(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      out[static_cast<std::size_t>(i) * m.cols() + j] = m(i, j);
    }
  }
  return out;
}

ComputeGraph topological_order(const Tensor & root)
{
  ComputeGraph order;
  if (!root.defined()) {
    return order;
  }
  std::unordered_set<Node *> visited;
  // Iterative post-order; graphs from unrolled decoders get deep.
  std::vector<std::pair<Node *, std::size_t>> stack{{root.node().get(), 0}};
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto & [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node * parent = node->parents[next++].get();
      if (visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

void backward(const Tensor & loss)
{
  if (!loss.defined()) {
    throw Error("backward on an undefined tensor");
  }
  if (loss.numel() != 1) {
    throw Error("backward requires a scalar loss, got shape " + shape_to_string(loss.shape()));
  }
  ComputeGraph order = topological_order(loss);
  // Intermediate grads are per-call scratch; leaf grads accumulate across calls.
  for (Node * n : order) {
    if (!n->is_leaf()) {
      n->grad.resize(0, 0);
    }
  }
  accumulate(*loss.node(), Mat::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node * n = *it;
    if (n->backward_fn && n->grad.size() != 0) {
      n->backward_fn(*n);
    }
  }
}

Tensor add(const Tensor & a, const Tensor & b)
{
  auto ops = align("add", a, b);
  NodePtr pa = a.node();
  NodePtr pb = b.node();
  const Shape out = ops.out_shape;
  return make_op(
    out, ops.a + ops.b, {pa, pb},
    [pa, pb, out](Node & self) {
      accumulate(*pa, reduce_to(self.grad, out, pa->shape));
      accumulate(*pb, reduce_to(self.grad, out, pb->shape));
    },
    "add");
}

Tensor sub(const Tensor & a, const Tensor & b)
{
  auto ops = align("sub", a, b);
  NodePtr pa = a.node();
  NodePtr pb = b.node();
  const Shape out = ops.out_shape;
  return make_op(
    out, ops.a - ops.b, {pa, pb},
    [pa, pb, out](Node & self) {
      accumulate(*pa, reduce_to(self.grad, out, pa->shape));
      accumulate(*pb, -reduce_to(self.grad, out, pb->shape));
    },
    "sub");
}

Tensor mul(const Tensor & a, const Tensor & b)
{
  auto ops = align("mul", a, b);
  NodePtr pa = a.node();
  NodePtr pb = b.node();
  const Shape out = ops.out_shape;
  Mat av = ops.a;
  Mat bv = ops.b;
  return make_op(
    out, av.cwiseProduct(bv), {pa, pb},
    [pa, pb, out, av, bv](Node & self) {
      accumulate(*pa, reduce_to(self.grad.cwiseProduct(bv), out, pa->shape));
      accumulate(*pb, reduce_to(self.grad.cwiseProduct(av), out, pb->shape));
    },
    "mul");
}

Tensor scale(const Tensor & a, double s)
{
  NodePtr pa = a.node();
  return make_op(
    a.shape(), a.value() * s, {pa},
    [pa, s](Node & self) { accumulate(*pa, Mat(self.grad * s)); }, "scale");
}

Tensor add_scalar(const Tensor & a, double s)
{
  NodePtr pa = a.node();
  return make_op(
    a.shape(), (a.value().array() + s).matrix(), {pa},
    [pa](Node & self) { accumulate(*pa, self.grad); }, "add_scalar");
}

Tensor neg(const Tensor & a)
{
  return scale(a, -1.0);
}

Tensor matmul(const Tensor & a, const Tensor & b)
{
  const Shape & sa = a.shape();
  const Shape & sb = b.shape();
  NodePtr pa = a.node();
  NodePtr pb = b.node();
  const Mat & av = a.value();
  const Mat & bv = b.value();

  if (sa.size() == 2 && sb.size() == 2) {
    if (sa[1] != sb[0]) {
      shape_fail("matmul", sa, sb);
    }
    return make_op(
      {sa[0], sb[1]}, av * bv, {pa, pb},
      [pa, pb, av, bv](Node & self) {
        accumulate(*pa, Mat(self.grad * bv.transpose()));
        accumulate(*pb, Mat(av.transpose() * self.grad));
      },
      "matmul");
  }
  if (sa.size() == 1 && sb.size() == 2) {
    if (sa[0] != sb[0]) {
      shape_fail("matmul", sa, sb);
    }
    return make_op(
      {sb[1]}, av * bv, {pa, pb},
      [pa, pb, av, bv](Node & self) {
        accumulate(*pa, Mat(self.grad * bv.transpose()));
        accumulate(*pb, Mat(av.transpose() * self.grad));
      },
      "matmul");
  }
  if (sa.size() == 2 && sb.size() == 1) {
    if (sa[1] != sb[0]) {
      shape_fail("matmul", sa, sb);
    }
    // (m x k) . [k] -> [m], stored as a row.
    return make_op(
      {sa[0]}, (av * bv.transpose()).transpose(), {pa, pb},
      [pa, pb, av, bv](Node & self) {
        accumulate(*pa, Mat(self.grad.transpose() * bv));
        accumulate(*pb, Mat(self.grad * av));
      },
      "matmul");
  }
  if (sa.size() == 1 && sb.size() == 1) {
    if (sa[0] != sb[0]) {
      shape_fail("matmul", sa, sb);
    }
    Mat out(1, 1);
    out(0, 0) = av.cwiseProduct(bv).sum();
    return make_op(
      {}, std::move(out), {pa, pb},
      [pa, pb, av, bv](Node & self) {
        const double g = self.grad(0, 0);
        accumulate(*pa, Mat(bv * g));
        accumulate(*pb, Mat(av * g));
      },
      "matmul");
  }
  shape_fail("matmul", sa, sb);
}

Tensor transpose(const Tensor & a)
{
  if (a.rank() != 2) {
    throw ShapeError("transpose requires rank 2, got " + shape_to_string(a.shape()));
  }
  NodePtr pa = a.node();
  return make_op(
    {a.shape()[1], a.shape()[0]}, a.value().transpose(), {pa},
    [pa](Node & self) { accumulate(*pa, Mat(self.grad.transpose())); }, "transpose");
}

Tensor concat(const std::vector<Tensor> & parts, int axis)
{
  if (parts.empty()) {
    throw ShapeError("concat of zero tensors");
  }
  // Scalars stack into a vector along axis 0.
  std::vector<Shape> shapes;
  for (const auto & p : parts) {
    Shape s = p.shape();
    if (s.empty() && axis == 0) {
      s = {1};
    }
    shapes.push_back(std::move(s));
  }
  const std::size_t rank = shapes[0].size();
  if (axis < 0 || static_cast<std::size_t>(axis) >= rank) {
    throw ShapeError("concat axis " + std::to_string(axis) + " out of range");
  }
  Eigen::Index along = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (shapes[i].size() != rank) {
      shape_fail("concat", shapes[0], shapes[i]);
    }
    for (std::size_t d = 0; d < rank; ++d) {
      if (d != static_cast<std::size_t>(axis) && shapes[i][d] != shapes[0][d]) {
        shape_fail("concat", shapes[0], shapes[i]);
      }
    }
    along += shapes[i][axis];
  }
  Shape out_shape = shapes[0];
  out_shape[axis] = along;
  const auto [rows, cols] = internal_dims(out_shape);
  Mat out(rows, cols);
  const bool stack_rows = rank == 2 && axis == 0;
  Eigen::Index offset = 0;
  std::vector<Eigen::Index> offsets;
  std::vector<Eigen::Index> extents;
  std::vector<NodePtr> parents;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const Mat & v = parts[i].value();
    const Eigen::Index extent = shapes[i][axis];
    if (stack_rows) {
      out.middleRows(offset, extent) = v;
    } else {
      out.middleCols(offset, extent) = v;
    }
    offsets.push_back(offset);
    extents.push_back(extent);
    parents.push_back(parts[i].node());
    offset += extent;
  }
  return make_op(
    out_shape, std::move(out), parents,
    [parents, offsets, extents, stack_rows](Node & self) {
      for (std::size_t i = 0; i < parents.size(); ++i) {
        const Mat g = stack_rows ? Mat(self.grad.middleRows(offsets[i], extents[i]))
                                 : Mat(self.grad.middleCols(offsets[i], extents[i]));
        accumulate(*parents[i], g);
      }
    },
    "concat");
}

Tensor slice(const Tensor & a, int axis, Eigen::Index start, Eigen::Index len)
{
  const Shape & s = a.shape();
  if (s.empty() || axis < 0 || static_cast<std::size_t>(axis) >= s.size()) {
    throw ShapeError("slice axis " + std::to_string(axis) + " out of range for " +
                     shape_to_string(s));
  }
  if (start < 0 || len < 1 || start + len > s[axis]) {
    throw ShapeError("slice [" + std::to_string(start) + ", " + std::to_string(start + len) +
                     ") out of range for " + shape_to_string(s));
  }
  Shape out_shape = s;
  out_shape[axis] = len;
  const bool row_slice = s.size() == 2 && axis == 0;
  NodePtr pa = a.node();
  Mat out = row_slice ? Mat(a.value().middleRows(start, len)) : Mat(a.value().middleCols(start, len));
  return make_op(
    out_shape, std::move(out), {pa},
    [pa, row_slice, start, len](Node & self) {
      if (!pa->requires_grad) {
        return;
      }
      Mat g = Mat::Zero(pa->value.rows(), pa->value.cols());
      if (row_slice) {
        g.middleRows(start, len) = self.grad;
      } else {
        g.middleCols(start, len) = self.grad;
      }
      accumulate(*pa, g);
    },
    "slice");
}

Tensor reshape(const Tensor & a, const Shape & shape)
{
  check_shape(shape);
  if (element_count(shape) != a.numel()) {
    throw ShapeError("reshape " + shape_to_string(a.shape()) + " -> " + shape_to_string(shape));
  }
  const auto [rows, cols] = internal_dims(shape);
  NodePtr pa = a.node();
  // Row-major storage makes reshape a flat copy.
  Mat out = Eigen::Map<const Mat>(a.value().data(), rows, cols);
  const Shape in_shape = a.shape();
  return make_op(
    shape, std::move(out), {pa},
    [pa, in_shape](Node & self) {
      const auto [r, c] = internal_dims(in_shape);
      accumulate(*pa, Mat(Eigen::Map<const Mat>(self.grad.data(), r, c)));
    },
    "reshape");
}

Tensor sum(const Tensor & a, std::optional<int> axis)
{
  NodePtr pa = a.node();
  const Shape in_shape = a.shape();
  if (!axis.has_value() || in_shape.size() <= 1) {
    if (axis.has_value() && in_shape.size() == 1 && *axis != 0) {
      throw ShapeError("axis " + std::to_string(*axis) + " out of range for " +
                       shape_to_string(in_shape));
    }
    Mat out(1, 1);
    out(0, 0) = a.value().sum();
    return make_op(
      {}, std::move(out), {pa},
      [pa](Node & self) {
        accumulate(*pa, Mat(Mat::Constant(pa->value.rows(), pa->value.cols(), self.grad(0, 0))));
      },
      "sum");
  }
  const Shape out_shape = reduced_shape(in_shape, axis);
  const int ax = *axis;
  Mat out = ax == 0 ? Mat(a.value().colwise().sum()) : Mat(a.value().rowwise().sum().transpose());
  return make_op(
    out_shape, std::move(out), {pa},
    [pa, ax](Node & self) {
      const Eigen::Index r = pa->value.rows();
      const Eigen::Index c = pa->value.cols();
      accumulate(*pa, ax == 0 ? Mat(self.grad.replicate(r, 1))
                              : Mat(self.grad.transpose().replicate(1, c)));
    },
    "sum");
}

Tensor mean(const Tensor & a, std::optional<int> axis)
{
  const Shape in_shape = a.shape();
  const double count = !axis.has_value() || in_shape.size() <= 1
                         ? static_cast<double>(a.numel())
                         : static_cast<double>(in_shape[*axis == 0 ? 0 : 1]);
  return scale(sum(a, axis), 1.0 / count);
}

Tensor max(const Tensor & a, std::optional<int> axis)
{
  NodePtr pa = a.node();
  const Shape in_shape = a.shape();
  if (!axis.has_value() || in_shape.size() <= 1) {
    if (axis.has_value() && in_shape.size() == 1 && *axis != 0) {
      throw ShapeError("axis " + std::to_string(*axis) + " out of range for " +
                       shape_to_string(in_shape));
    }
    Eigen::Index mr = 0;
    Eigen::Index mc = 0;
    Mat out(1, 1);
    out(0, 0) = a.value().maxCoeff(&mr, &mc);
    return make_op(
      {}, std::move(out), {pa},
      [pa, mr, mc](Node & self) {
        Mat g = Mat::Zero(pa->value.rows(), pa->value.cols());
        g(mr, mc) = self.grad(0, 0);
        accumulate(*pa, g);
      },
      "max");
  }
  const Shape out_shape = reduced_shape(in_shape, axis);
  const LaneView lanes = LaneView::of(in_shape, *axis);
  Mat out(1, lanes.count);
  std::vector<Eigen::Index> argmax(static_cast<std::size_t>(lanes.count), 0);
  for (Eigen::Index lane = 0; lane < lanes.count; ++lane) {
    double best = lanes.get(a.value(), lane, 0);
    for (Eigen::Index i = 1; i < lanes.length; ++i) {
      const double v = lanes.get(a.value(), lane, i);
      if (v > best) {
        best = v;
        argmax[static_cast<std::size_t>(lane)] = i;
      }
    }
    out(0, lane) = best;
  }
  return make_op(
    out_shape, std::move(out), {pa},
    [pa, lanes, argmax](Node & self) {
      Mat g = Mat::Zero(pa->value.rows(), pa->value.cols());
      for (Eigen::Index lane = 0; lane < lanes.count; ++lane) {
        lanes.add(g, lane, argmax[static_cast<std::size_t>(lane)], self.grad(0, lane));
      }
      accumulate(*pa, g);
    },
    "max");
}

Tensor exp(const Tensor & a)
{
  return unary_elementwise(a, "exp", a.value().array().exp().matrix(),
                           [](const Mat & y, const Mat & g) { return Mat(g.cwiseProduct(y)); });
}

Tensor log(const Tensor & a)
{
  if ((a.value().array() <= 0.0).any()) {
    throw DomainError("log of a non-positive value");
  }
  Mat x = a.value();
  NodePtr pa = a.node();
  return make_op(
    a.shape(), a.value().array().log().matrix(), {pa},
    [pa, x](Node & self) { accumulate(*pa, Mat(self.grad.cwiseQuotient(x))); }, "log");
}

Tensor tanh(const Tensor & a)
{
  return unary_elementwise(a, "tanh", a.value().array().tanh().matrix(),
                           [](const Mat & y, const Mat & g) {
                             return Mat(g.cwiseProduct(Mat((1.0 - y.array().square()).matrix())));
                           });
}

Tensor sigmoid(const Tensor & a)
{
  // Stable in both tails.
  Mat y = a.value();
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
      const double x = y(i, j);
      if (x >= 0.0) {
        y(i, j) = 1.0 / (1.0 + std::exp(-x));
      } else {
        const double e = std::exp(x);
        y(i, j) = e / (1.0 + e);
      }
    }
  }
  return unary_elementwise(a, "sigmoid", std::move(y), [](const Mat & y2, const Mat & g) {
    return Mat(g.cwiseProduct(Mat((y2.array() * (1.0 - y2.array())).matrix())));
  });
}

Tensor sqrt(const Tensor & a)
{
  if ((a.value().array() < 0.0).any()) {
    throw DomainError("sqrt of a negative value");
  }
  return unary_elementwise(a, "sqrt", a.value().array().sqrt().matrix(),
                           [](const Mat & y, const Mat & g) {
                             return Mat((g.array() / (2.0 * y.array())).matrix());
                           });
}

Tensor relu(const Tensor & a)
{
  Mat x = a.value();
  NodePtr pa = a.node();
  return make_op(
    a.shape(), a.value().cwiseMax(0.0), {pa},
    [pa, x](Node & self) {
      accumulate(*pa, Mat(self.grad.cwiseProduct(Mat((x.array() > 0.0).cast<double>().matrix()))));
    },
    "relu");
}

Tensor softmax(const Tensor & a, int axis)
{
  const Shape in_shape = a.shape();
  const LaneView lanes = LaneView::of(in_shape, axis);
  Mat y = a.value();
  for (Eigen::Index lane = 0; lane < lanes.count; ++lane) {
    double m = lanes.get(y, lane, 0);
    for (Eigen::Index i = 1; i < lanes.length; ++i) {
      m = std::fmax(m, lanes.get(y, lane, i));
    }
    double total = 0.0;
    for (Eigen::Index i = 0; i < lanes.length; ++i) {
      const double e = std::exp(lanes.get(y, lane, i) - m);
      (lanes.lanes_are_rows ? y(lane, i) : y(i, lane)) = e;
      total += e;
    }
    for (Eigen::Index i = 0; i < lanes.length; ++i) {
      (lanes.lanes_are_rows ? y(lane, i) : y(i, lane)) /= total;
    }
  }
  NodePtr pa = a.node();
  Mat saved = y;
  return make_op(
    in_shape, std::move(y), {pa},
    [pa, saved, lanes](Node & self) {
      Mat g = self.grad;
      for (Eigen::Index lane = 0; lane < lanes.count; ++lane) {
        double inner = 0.0;
        for (Eigen::Index i = 0; i < lanes.length; ++i) {
          inner += lanes.get(g, lane, i) * lanes.get(saved, lane, i);
        }
        for (Eigen::Index i = 0; i < lanes.length; ++i) {
          const double v = lanes.get(saved, lane, i) * (lanes.get(g, lane, i) - inner);
          (lanes.lanes_are_rows ? g(lane, i) : g(i, lane)) = v;
        }
      }
      accumulate(*pa, g);
    },
    "softmax");
}

Tensor logsumexp(const Tensor & a, std::optional<int> axis)
{
  const Shape in_shape = a.shape();
  NodePtr pa = a.node();
  if (!axis.has_value() && in_shape.size() == 2) {
    // Reduce over everything: treat the matrix as one lane.
    return logsumexp(reshape(a, {a.numel()}), 0);
  }
  const int ax = axis.value_or(0);
  const LaneView lanes = LaneView::of(in_shape, ax);
  const Shape out_shape = reduced_shape(in_shape, in_shape.size() <= 1 ? std::nullopt
                                                                       : std::optional<int>(ax));
  Mat out(1, std::max<Eigen::Index>(lanes.count, 1));
  Mat weights = a.value();
  for (Eigen::Index lane = 0; lane < lanes.count; ++lane) {
    double m = lanes.get(weights, lane, 0);
    for (Eigen::Index i = 1; i < lanes.length; ++i) {
      m = std::fmax(m, lanes.get(weights, lane, i));
    }
    double total = 0.0;
    for (Eigen::Index i = 0; i < lanes.length; ++i) {
      total += std::exp(lanes.get(weights, lane, i) - m);
    }
    const double lse = m + std::log(total);
    out(0, lane) = lse;
    for (Eigen::Index i = 0; i < lanes.length; ++i) {
      const double w = std::exp(lanes.get(weights, lane, i) - lse);
      (lanes.lanes_are_rows ? weights(lane, i) : weights(i, lane)) = w;
    }
  }
  return make_op(
    out_shape, std::move(out), {pa},
    [pa, weights, lanes](Node & self) {
      Mat g = Mat::Zero(pa->value.rows(), pa->value.cols());
      for (Eigen::Index lane = 0; lane < lanes.count; ++lane) {
        const double gl = self.grad(0, lane);
        for (Eigen::Index i = 0; i < lanes.length; ++i) {
          lanes.add(g, lane, i, gl * lanes.get(weights, lane, i));
        }
      }
      accumulate(*pa, g);
    },
    "logsumexp");
}

}  // namespace effmp
