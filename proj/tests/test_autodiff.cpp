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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "racg/autodiff.hpp"
#include "racg/common.hpp"

using namespace racg;
using namespace racg::nn;

namespace {

Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
  return m;
}

using Builder = std::function<Var(Graph&, std::vector<Var>&)>;

// Projects the op output onto fixed random weights and compares the tape
// gradient of every parameter entry with central differences.
void check_gradients(std::vector<Parameter>& params, const Builder& build, double tol = 1e-6) {
  std::mt19937_64 rng(99);
  Matrix proj;
  auto forward = [&](bool backward) {
    Graph g(true);
    std::vector<Var> vars;
    for (auto& p : params) vars.push_back(g.param(p));
    Var out = build(g, vars);
    if (proj.size() == 0) proj = random_matrix(rng, out.rows(), out.cols());
    Var obj = sum(mul(out, g.constant(proj)));
    if (backward) g.backward(obj);
    return obj.scalar();
  };
  for (auto& p : params) p.zero_grad();
  forward(true);
  const double h = 1e-5;
  for (auto& p : params) {
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      const double keep = p.value.data()[i];
      p.value.data()[i] = keep + h;
      const double up = forward(false);
      p.value.data()[i] = keep - h;
      const double down = forward(false);
      p.value.data()[i] = keep;
      const double fd = (up - down) / (2 * h);
      const double an = p.grad.data()[i];
      CHECK_MESSAGE(std::fabs(fd - an) <= tol * std::max(1.0, std::fabs(fd)),
                    p.name << "[" << i << "] fd=" << fd << " analytic=" << an);
    }
  }
}

std::vector<Parameter> make_params(std::initializer_list<std::pair<Eigen::Index, Eigen::Index>> shapes,
                                   std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  std::vector<Parameter> out;
  int k = 0;
  for (auto [r, c] : shapes) out.emplace_back("p" + std::to_string(k++), random_matrix(rng, r, c));
  return out;
}

}  // namespace

TEST_CASE("matmul family gradients") {
  auto ps = make_params({{3, 4}, {4, 2}});
  check_gradients(ps, [](Graph&, std::vector<Var>& v) { return matmul(v[0], v[1]); });
  auto qs = make_params({{3, 4}, {5, 4}});
  check_gradients(qs, [](Graph&, std::vector<Var>& v) { return matmul_nt(v[0], v[1]); });
  auto self = make_params({{3, 3}});
  check_gradients(self, [](Graph&, std::vector<Var>& v) { return matmul(v[0], v[0]); });
}

TEST_CASE("elementwise gradients") {
  auto ps = make_params({{2, 3}, {2, 3}});
  check_gradients(ps, [](Graph&, std::vector<Var>& v) { return add(v[0], v[1]); });
  check_gradients(ps, [](Graph&, std::vector<Var>& v) { return sub(v[0], v[1]); });
  check_gradients(ps, [](Graph&, std::vector<Var>& v) { return mul(v[0], v[1]); });
  check_gradients(ps, [](Graph&, std::vector<Var>& v) { return scale(v[0], -2.5); });
  check_gradients(ps, [](Graph&, std::vector<Var>& v) { return gelu(v[0]); });
  check_gradients(ps, [](Graph&, std::vector<Var>& v) { return exp(v[1]); });
  auto rs = make_params({{4, 3}, {1, 3}});
  check_gradients(rs, [](Graph&, std::vector<Var>& v) { return add_row(v[0], v[1]); });
}

TEST_CASE("normalization and softmax gradients") {
  auto ps = make_params({{3, 5}, {1, 5}, {1, 5}});
  check_gradients(ps, [](Graph&, std::vector<Var>& v) { return layer_norm(v[0], v[1], v[2]); });
  auto s = make_params({{4, 4}});
  check_gradients(s, [](Graph&, std::vector<Var>& v) { return softmax_rows(v[0]); });
  check_gradients(s, [](Graph&, std::vector<Var>& v) { return softmax_rows(v[0], true); });
  auto n = make_params({{3, 4}});
  check_gradients(n, [](Graph&, std::vector<Var>& v) { return l2_normalize_rows(v[0]); });
}

TEST_CASE("indexing gradients") {
  auto ps = make_params({{5, 3}});
  std::vector<std::int32_t> ids = {4, 0, 4, 2};
  check_gradients(ps, [&](Graph&, std::vector<Var>& v) { return gather_rows(v[0], ids); });
  check_gradients(ps, [](Graph&, std::vector<Var>& v) { return slice_rows(v[0], 1, 3); });
  check_gradients(ps, [](Graph&, std::vector<Var>& v) { return slice_cols(v[0], 1, 2); });
  auto qs = make_params({{2, 3}, {2, 1}, {2, 2}});
  check_gradients(qs, [](Graph&, std::vector<Var>& v) {
    std::vector<Var> parts = {v[0], v[1], v[2]};
    return concat_cols(parts);
  });
}

TEST_CASE("reduction gradients") {
  auto ps = make_params({{4, 6}});
  std::vector<std::int32_t> targets = {5, 0, 3, 3};
  check_gradients(ps, [&](Graph&, std::vector<Var>& v) { return pick_log_softmax(v[0], targets); });
  check_gradients(ps, [](Graph&, std::vector<Var>& v) { return sum(v[0]); });
  auto qs = make_params({{3, 4}, {3, 4}});
  check_gradients(qs, [](Graph&, std::vector<Var>& v) { return rowwise_dot(v[0], v[1]); });
  auto rs = make_params({{1, 4}, {1, 4}});
  check_gradients(rs, [](Graph&, std::vector<Var>& v) { return dot(v[0], v[1]); });
}

TEST_CASE("composite expression gradients") {
  auto ps = make_params({{3, 4}, {4, 4}, {1, 4}});
  check_gradients(ps, [](Graph&, std::vector<Var>& v) {
    Var h = gelu(add_row(matmul(v[0], v[1]), v[2]));
    Var a = softmax_rows(matmul_nt(h, h), true);
    return l2_normalize_rows(add(matmul(a, h), v[0]));
  });
}

TEST_CASE("forward values") {
  Graph g(false);
  Matrix a(1, 3);
  a << 1000.0, 1001.0, 1002.0;
  Var s = softmax_rows(g.constant(a));
  CHECK(s.value().sum() == doctest::Approx(1.0));
  CHECK(std::isfinite(s.value()(0, 0)));
  Matrix v(1, 2);
  v << 3.0, 4.0;
  Var n = l2_normalize_rows(g.constant(v));
  CHECK(n.value()(0, 0) == doctest::Approx(0.6));
  CHECK(n.value()(0, 1) == doctest::Approx(0.8));
  CHECK_THROWS_AS(l2_normalize_rows(g.constant(Matrix::Zero(1, 3))), NumericError);
  Matrix c(2, 2);
  c << 1.0, 5.0, 2.0, 3.0;
  Var causal = softmax_rows(g.constant(c), true);
  CHECK(causal.value()(0, 0) == doctest::Approx(1.0));
  CHECK(causal.value()(0, 1) == 0.0);
}

TEST_CASE("frozen and constant inputs receive no gradient") {
  Parameter p("p", Matrix::Constant(2, 2, 1.0));
  Parameter q("q", Matrix::Constant(2, 2, 2.0));
  q.frozen = true;
  Graph g(true);
  Var out = sum(mul(g.param(p), g.param(q)));
  g.backward(out);
  CHECK(p.grad(0, 0) == doctest::Approx(2.0));
  CHECK(q.grad.isZero());
}

TEST_CASE("dropout is identity outside training and scales kept entries") {
  Matrix x = Matrix::Constant(20, 20, 1.0);
  Graph eval_graph(true, false);
  CHECK(dropout(eval_graph.constant(x), 0.5).value() == x);
  std::mt19937_64 rng(3);
  Graph train_graph(true, true, &rng);
  Matrix y = dropout(train_graph.constant(x), 0.5).value();
  int zeros = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double v = y.data()[i];
    CHECK((v == 0.0 || v == doctest::Approx(2.0)));
    zeros += v == 0.0;
  }
  CHECK(zeros > 120);
  CHECK(zeros < 280);
}

TEST_CASE("backward seed scales gradients linearly") {
  Parameter p("p", Matrix::Constant(1, 3, 0.5));
  Graph g(true);
  g.backward(sum(exp(g.param(p))), 3.0);
  CHECK(p.grad(0, 1) == doctest::Approx(3.0 * std::exp(0.5)));
}
