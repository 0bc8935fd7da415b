// Copyright 2026 The racg Authors.
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

// Tape-based reverse-mode differentiation over dense row-major matrices.
//
// A Graph records every operation applied to its Vars. Nodes that do not
// depend on a trainable Parameter carry no backward closure, so a Graph built
// with record=false (or over frozen parameters) costs only the forward pass.
// Calling backward() accumulates into Parameter::grad.

#ifndef RACG_AUTODIFF_HPP_
#define RACG_AUTODIFF_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace racg::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  bool frozen = false;

  Parameter() = default;
  Parameter(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)),
        grad(Matrix::Zero(value.rows(), value.cols())) {}
  void zero_grad() { grad.setZero(); }
};

class Graph;

class Var {
 public:
  Var() = default;
  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
  Graph* graph() const { return graph_; }
  int id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* g, int id) : graph_(g), id_(id) {}
  Graph* graph_ = nullptr;
  int id_ = -1;
};

class Graph {
 public:
  // training toggles dropout; rng feeds dropout masks.
  explicit Graph(bool record = true, bool training = false,
                 std::mt19937_64* rng = nullptr);
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var param(Parameter& p);
  Var constant(Matrix m);

  // Reverse sweep from a 1x1 root. seed scales the root gradient.
  void backward(Var root, double seed = 1.0);

  bool recording() const { return record_; }
  bool training() const { return training_; }
  std::mt19937_64* rng() const { return rng_; }
  std::size_t size() const { return nodes_.size(); }

  // Operation plumbing.
  using BackFn = std::function<void(Graph&, int self)>;
  Var push(Matrix value, std::initializer_list<Var> parents, BackFn fn);
  Var push(Matrix value, std::span<const Var> parents, BackFn fn);
  const Matrix& value(int id) const {
    const Node& n = nodes_[id];
    return n.param ? n.param->value : n.value;
  }
  const Matrix& grad(int id) const { return nodes_[id].grad; }
  bool needs_grad(int id) const { return nodes_[id].needs_grad; }
  // Adds into a node's gradient, allocating it on first use.
  Matrix& grad_acc(int id);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    BackFn backward;
    Parameter* param = nullptr;
    bool needs_grad = false;
  };
  std::vector<Node> nodes_;
  bool record_;
  bool training_;
  std::mt19937_64* rng_;
};

// --- operations -----------------------------------------------------------

Var matmul(Var a, Var b);
// a * b^T
Var matmul_nt(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
// Adds a 1xC row to every row of a.
Var add_row(Var a, Var row);
Var scale(Var a, double s);
Var gelu(Var a);
Var exp(Var a);
// Row-wise layer normalization with affine 1xC gain and bias.
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
// Row-wise softmax. causal masks entries above the diagonal.
Var softmax_rows(Var a, bool causal = false);
// Rows of table selected by ids.
Var gather_rows(Var table, std::span<const std::int32_t> ids);
Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
Var concat_cols(std::span<const Var> parts);
Var dropout(Var a, double p);
// Per-row log-softmax evaluated at the given target column; returns Rx1.
Var pick_log_softmax(Var logits, std::span<const std::int32_t> targets);
Var sum(Var a);
// Divides each row by its L2 norm. Throws NumericError on a zero row.
Var l2_normalize_rows(Var a);
// Row-wise inner products of equally shaped a and b; returns Rx1.
Var rowwise_dot(Var a, Var b);
// Dot product of two 1xC rows; returns 1x1.
Var dot(Var a, Var b);

}  // namespace racg::nn

#endif  // RACG_AUTODIFF_HPP_
