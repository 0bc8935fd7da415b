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

#include "racg/autodiff.hpp"

#include <cmath>
#include <limits>

#include "racg/common.hpp"

namespace racg::nn {

const Matrix& Var::value() const { return graph_->value(id_); }

Graph::Graph(bool record, bool training, std::mt19937_64* rng)
    : record_(record), training_(training), rng_(rng) {
  nodes_.reserve(512);
}

Var Graph::param(Parameter& p) {
  Node n;
  n.param = &p;
  n.needs_grad = record_ && !p.frozen;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Graph::constant(Matrix m) {
  Node n;
  n.value = std::move(m);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Graph::push(Matrix value, std::initializer_list<Var> parents, BackFn fn) {
  return push(std::move(value), std::span<const Var>(parents.begin(), parents.size()),
              std::move(fn));
}

Var Graph::push(Matrix value, std::span<const Var> parents, BackFn fn) {
  Node n;
  n.value = std::move(value);
  if (record_) {
    for (const Var& p : parents) {
      if (nodes_[p.id()].needs_grad) {
        n.needs_grad = true;
        break;
      }
    }
  }
  if (n.needs_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Matrix& Graph::grad_acc(int id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) {
    const Matrix& v = value(id);
    n.grad = Matrix::Zero(v.rows(), v.cols());
  }
  return n.grad;
}

void Graph::backward(Var root, double seed) {
  if (!record_) return;
  Node& r = nodes_[root.id()];
  if (!r.needs_grad) return;
  grad_acc(root.id()).array() += seed;
  for (int i = root.id(); i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.needs_grad || n.grad.size() == 0) continue;
    if (n.param) {
      n.param->grad += n.grad;
    } else if (n.backward) {
      n.backward(*this, i);
    }
  }
}

// ---------------------------------------------------------------------------

namespace {

inline bool ng(Graph& g, Var v) { return g.needs_grad(v.id()); }

}  // namespace

Var matmul(Var a, Var b) {
  Graph& g = *a.graph();
  Matrix out = a.value() * b.value();
  return g.push(std::move(out), {a, b}, [a, b](Graph& g, int self) {
    const Matrix& gy = g.grad(self);
    if (ng(g, a)) g.grad_acc(a.id()).noalias() += gy * g.value(b.id()).transpose();
    if (ng(g, b)) g.grad_acc(b.id()).noalias() += g.value(a.id()).transpose() * gy;
  });
}

Var matmul_nt(Var a, Var b) {
  Graph& g = *a.graph();
  Matrix out = a.value() * b.value().transpose();
  return g.push(std::move(out), {a, b}, [a, b](Graph& g, int self) {
    const Matrix& gy = g.grad(self);
    if (ng(g, a)) g.grad_acc(a.id()).noalias() += gy * g.value(b.id());
    if (ng(g, b)) g.grad_acc(b.id()).noalias() += gy.transpose() * g.value(a.id());
  });
}

Var add(Var a, Var b) {
  Graph& g = *a.graph();
  return g.push(a.value() + b.value(), {a, b}, [a, b](Graph& g, int self) {
    const Matrix& gy = g.grad(self);
    if (ng(g, a)) g.grad_acc(a.id()) += gy;
    if (ng(g, b)) g.grad_acc(b.id()) += gy;
  });
}

Var sub(Var a, Var b) {
  Graph& g = *a.graph();
  return g.push(a.value() - b.value(), {a, b}, [a, b](Graph& g, int self) {
    const Matrix& gy = g.grad(self);
    if (ng(g, a)) g.grad_acc(a.id()) += gy;
    if (ng(g, b)) g.grad_acc(b.id()) -= gy;
  });
}

Var mul(Var a, Var b) {
  Graph& g = *a.graph();
  Matrix out = a.value().cwiseProduct(b.value());
  return g.push(std::move(out), {a, b}, [a, b](Graph& g, int self) {
    const Matrix& gy = g.grad(self);
    if (ng(g, a)) g.grad_acc(a.id()) += gy.cwiseProduct(g.value(b.id()));
    if (ng(g, b)) g.grad_acc(b.id()) += gy.cwiseProduct(g.value(a.id()));
  });
}

Var add_row(Var a, Var row) {
  Graph& g = *a.graph();
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  return g.push(std::move(out), {a, row}, [a, row](Graph& g, int self) {
    const Matrix& gy = g.grad(self);
    if (ng(g, a)) g.grad_acc(a.id()) += gy;
    if (ng(g, row)) g.grad_acc(row.id()) += gy.colwise().sum();
  });
}

Var scale(Var a, double s) {
  Graph& g = *a.graph();
  return g.push(a.value() * s, {a}, [a, s](Graph& g, int self) {
    g.grad_acc(a.id()) += g.grad(self) * s;
  });
}

Var gelu(Var a) {
  // tanh approximation
  Graph& g = *a.graph();
  constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
  const Matrix& x = a.value();
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double v = x.data()[i];
    double t = std::tanh(kC * (v + 0.044715 * v * v * v));
    out.data()[i] = 0.5 * v * (1.0 + t);
  }
  return g.push(std::move(out), {a}, [a](Graph& g, int self) {
    const Matrix& x = g.value(a.id());
    const Matrix& gy = g.grad(self);
    Matrix& gx = g.grad_acc(a.id());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      double v = x.data()[i];
      double u = kC * (v + 0.044715 * v * v * v);
      double t = std::tanh(u);
      double du = kC * (1.0 + 3.0 * 0.044715 * v * v);
      double d = 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du;
      gx.data()[i] += gy.data()[i] * d;
    }
  });
}

Var exp(Var a) {
  Graph& g = *a.graph();
  Matrix out = a.value().array().exp().matrix();
  return g.push(std::move(out), {a}, [a](Graph& g, int self) {
    g.grad_acc(a.id()) += g.grad(self).cwiseProduct(g.value(self));
  });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  Graph& g = *x.graph();
  const Matrix& xv = x.value();
  const Eigen::Index rows = xv.rows(), cols = xv.cols();
  Matrix xhat(rows, cols);
  Eigen::VectorXd inv_std(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    double mean = xv.row(r).mean();
    double var = (xv.row(r).array() - mean).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (xv.row(r).array() - mean) * inv_std(r);
  }
  Matrix out = xhat;
  out.array().rowwise() *= gain.value().row(0).array();
  out.rowwise() += bias.value().row(0);
  return g.push(std::move(out), {x, gain, bias},
                [x, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                    Graph& g, int self) {
                  const Matrix& gy = g.grad(self);
                  if (ng(g, gain)) g.grad_acc(gain.id()) += gy.cwiseProduct(xhat).colwise().sum();
                  if (ng(g, bias)) g.grad_acc(bias.id()) += gy.colwise().sum();
                  if (ng(g, x)) {
                    Matrix gxhat = gy;
                    gxhat.array().rowwise() *= g.value(gain.id()).row(0).array();
                    Matrix& gx = g.grad_acc(x.id());
                    const double n = static_cast<double>(gy.cols());
                    for (Eigen::Index r = 0; r < gy.rows(); ++r) {
                      double m1 = gxhat.row(r).mean();
                      double m2 = gxhat.row(r).dot(xhat.row(r)) / n;
                      gx.row(r).array() += inv_std(r) * (gxhat.row(r).array() - m1 -
                                                         xhat.row(r).array() * m2);
                    }
                  }
                });
}

Var softmax_rows(Var a, bool causal) {
  Graph& g = *a.graph();
  const Matrix& x = a.value();
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    Eigen::Index limit = causal ? std::min<Eigen::Index>(r + 1, x.cols()) : x.cols();
    double mx = x.row(r).head(limit).maxCoeff();
    double z = 0.0;
    for (Eigen::Index c = 0; c < limit; ++c) {
      double e = std::exp(x(r, c) - mx);
      y(r, c) = e;
      z += e;
    }
    for (Eigen::Index c = 0; c < limit; ++c) y(r, c) /= z;
    for (Eigen::Index c = limit; c < x.cols(); ++c) y(r, c) = 0.0;
  }
  return g.push(std::move(y), {a}, [a](Graph& g, int self) {
    const Matrix& y = g.value(self);
    const Matrix& gy = g.grad(self);
    Matrix& gx = g.grad_acc(a.id());
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      double s = gy.row(r).dot(y.row(r));
      gx.row(r).array() += y.row(r).array() * (gy.row(r).array() - s);
    }
  });
}

Var gather_rows(Var table, std::span<const std::int32_t> ids) {
  Graph& g = *table.graph();
  const Matrix& t = table.value();
  Matrix out(static_cast<Eigen::Index>(ids.size()), t.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= t.rows())
      throw DataError("token id " + std::to_string(ids[i]) + " outside embedding table");
    out.row(static_cast<Eigen::Index>(i)) = t.row(ids[i]);
  }
  std::vector<std::int32_t> idv(ids.begin(), ids.end());
  return g.push(std::move(out), {table}, [table, idv = std::move(idv)](Graph& g, int self) {
    const Matrix& gy = g.grad(self);
    Matrix& gt = g.grad_acc(table.id());
    for (std::size_t i = 0; i < idv.size(); ++i)
      gt.row(idv[i]) += gy.row(static_cast<Eigen::Index>(i));
  });
}

Var slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
  Graph& g = *a.graph();
  Matrix out = a.value().middleRows(start, count);
  return g.push(std::move(out), {a}, [a, start, count](Graph& g, int self) {
    g.grad_acc(a.id()).middleRows(start, count) += g.grad(self);
  });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  Graph& g = *a.graph();
  Matrix out = a.value().middleCols(start, count);
  return g.push(std::move(out), {a}, [a, start, count](Graph& g, int self) {
    g.grad_acc(a.id()).middleCols(start, count) += g.grad(self);
  });
}

Var concat_cols(std::span<const Var> parts) {
  Graph& g = *parts.front().graph();
  Eigen::Index rows = parts.front().rows(), cols = 0;
  for (const Var& p : parts) cols += p.cols();
  Matrix out(rows, cols);
  Eigen::Index off = 0;
  for (const Var& p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    off += p.cols();
  }
  std::vector<Var> pv(parts.begin(), parts.end());
  return g.push(std::move(out), parts, [pv](Graph& g, int self) {
    const Matrix& gy = g.grad(self);
    Eigen::Index off = 0;
    for (const Var& p : pv) {
      Eigen::Index c = g.value(p.id()).cols();
      if (g.needs_grad(p.id())) g.grad_acc(p.id()) += gy.middleCols(off, c);
      off += c;
    }
  });
}

Var dropout(Var a, double p) {
  Graph& g = *a.graph();
  if (!g.training() || p <= 0.0 || g.rng() == nullptr) return a;
  const Matrix& x = a.value();
  Matrix mask(x.rows(), x.cols());
  const double keep = 1.0 - p;
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    double u = static_cast<double>((*g.rng())() >> 11) * 0x1.0p-53;
    mask.data()[i] = u < keep ? 1.0 / keep : 0.0;
  }
  Matrix out = x.cwiseProduct(mask);
  return g.push(std::move(out), {a}, [a, mask = std::move(mask)](Graph& g, int self) {
    g.grad_acc(a.id()) += g.grad(self).cwiseProduct(mask);
  });
}

Var pick_log_softmax(Var logits, std::span<const std::int32_t> targets) {
  Graph& g = *logits.graph();
  const Matrix& x = logits.value();
  if (static_cast<Eigen::Index>(targets.size()) != x.rows())
    throw DataError("pick_log_softmax: target count does not match rows");
  Matrix out(x.rows(), 1);
  Eigen::VectorXd lse(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double mx = x.row(r).maxCoeff();
    lse(r) = mx + std::log((x.row(r).array() - mx).exp().sum());
    out(r, 0) = x(r, targets[r]) - lse(r);
  }
  std::vector<std::int32_t> tv(targets.begin(), targets.end());
  return g.push(std::move(out), {logits},
                [logits, tv = std::move(tv), lse = std::move(lse)](Graph& g, int self) {
                  const Matrix& x = g.value(logits.id());
                  const Matrix& gy = g.grad(self);
                  Matrix& gx = g.grad_acc(logits.id());
                  for (Eigen::Index r = 0; r < x.rows(); ++r) {
                    double w = gy(r, 0);
                    gx.row(r).array() -= w * (x.row(r).array() - lse(r)).exp();
                    gx(r, tv[r]) += w;
                  }
                });
}

Var sum(Var a) {
  Graph& g = *a.graph();
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return g.push(std::move(out), {a}, [a](Graph& g, int self) {
    g.grad_acc(a.id()).array() += g.grad(self)(0, 0);
  });
}

Var l2_normalize_rows(Var a) {
  Graph& g = *a.graph();
  const Matrix& x = a.value();
  Matrix y(x.rows(), x.cols());
  Eigen::VectorXd norms(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double n = x.row(r).norm();
    if (!(n > 0.0) || !std::isfinite(n))
      throw NumericError("cannot normalize a zero or non-finite embedding");
    norms(r) = n;
    y.row(r) = x.row(r) / n;
  }
  return g.push(std::move(y), {a}, [a, norms = std::move(norms)](Graph& g, int self) {
    const Matrix& y = g.value(self);
    const Matrix& gy = g.grad(self);
    Matrix& gx = g.grad_acc(a.id());
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      double d = gy.row(r).dot(y.row(r));
      gx.row(r) += (gy.row(r) - d * y.row(r)) / norms(r);
    }
  });
}

Var rowwise_dot(Var a, Var b) {
  Graph& g = *a.graph();
  Matrix out = a.value().cwiseProduct(b.value()).rowwise().sum();
  return g.push(std::move(out), {a, b}, [a, b](Graph& g, int self) {
    const Matrix& gy = g.grad(self);
    if (ng(g, a)) {
      Matrix t = g.value(b.id());
      t.array().colwise() *= gy.col(0).array();
      g.grad_acc(a.id()) += t;
    }
    if (ng(g, b)) {
      Matrix t = g.value(a.id());
      t.array().colwise() *= gy.col(0).array();
      g.grad_acc(b.id()) += t;
    }
  });
}

Var dot(Var a, Var b) { return rowwise_dot(a, b); }

}  // namespace racg::nn
