#include <doctest.h>

#include "mkp/autodiff/ops.hpp"
#include "mkp/core/error.hpp"
#include "support/finite_difference.hpp"

#include <random>

using namespace mkp;
using mkp::testing::max_relative_error;

namespace {

using Mat = Matrix<double>;

Mat row(std::initializer_list<double> v) {
  Mat m(1, static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) m(0, i++) = x;
  return m;
}

struct Fixture {
  std::mt19937_64 rng{42};
  ParameterStore<double> store;
};

}  // namespace

TEST_CASE("sigmoid derivative at zero is one quarter") {
  ParameterStore<double> store;
  auto& x = store.add("x", 1, 1);
  Graph<double> g;
  g.backward(sum(sigmoid(g.parameter(x))));
  CHECK(x.grad(0, 0) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("softmax backward of uniform input with uniform upstream is zero") {
  ParameterStore<double> store;
  auto& x = store.add("x", 1, 5);
  x.value.setConstant(0.3);
  Graph<double> g;
  g.backward(sum(softmax(g.parameter(x))));
  CHECK(x.grad.cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("softmax rows sum to one") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 5.0);
  Graph<double> g(false);
  Mat m(4, 9);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  Var<double> y = softmax(g.constant(m));
  for (Eigen::Index r = 0; r < 4; ++r) CHECK(std::abs(y.value().row(r).sum() - 1.0) < 1e-9);
}

TEST_CASE("maxpool backward routes to the first maximal row") {
  ParameterStore<double> store;
  auto& x = store.add("x", 3, 2);
  x.value << 1, 5, 4, 5, 4, 2;
  Graph<double> g;
  Var<double> pooled = maxpool_columns(g.parameter(x));
  CHECK(pooled.value()(0, 0) == 4);
  CHECK(pooled.value()(0, 1) == 5);
  g.backward(sum(pooled));
  Mat expected(3, 2);
  expected << 0, 1, 1, 0, 0, 0;
  CHECK(x.grad == expected);
}

TEST_CASE("gradients accumulate across multiple uses of a parameter") {
  ParameterStore<double> store;
  auto& x = store.add("x", 1, 1);
  x.value(0, 0) = 3.0;
  Graph<double> g;
  Var<double> v = g.parameter(x);
  g.backward(sum(cmul(v, v) + v));
  CHECK(x.grad(0, 0) == doctest::Approx(7.0));
}

TEST_CASE("shape errors name the primitive") {
  Graph<double> g;
  Var<double> a = g.constant(Mat::Zero(2, 3));
  Var<double> b = g.constant(Mat::Zero(2, 3));
  try {
    matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("matmul") != std::string::npos);
  }
  CHECK_THROWS_AS(add_row(a, g.constant(Mat::Zero(1, 2))), ShapeError);
  CHECK_THROWS_AS(g.backward(a), ShapeError);
}

TEST_CASE("every primitive matches central finite differences") {
  Fixture f;
  auto& a = f.store.add_uniform("a", 3, 4, 1.0, f.rng);
  auto& b = f.store.add_uniform("b", 4, 3, 1.0, f.rng);
  auto& r = f.store.add_uniform("r", 1, 4, 1.0, f.rng);
  auto& s = f.store.add_uniform("s", 1, 1, 1.0, f.rng);
  auto& w = f.store.add_uniform("w", 3, 1, 1.0, f.rng);
  auto& p = f.store.add_uniform("p", 1, 6, 1.0, f.rng);
  auto& table = f.store.add_uniform("table", 5, 4, 1.0, f.rng);
  const Mat target = Mat::Constant(3, 4, 0.2);

  using Builder = mkp::testing::LossBuilder;
  std::vector<std::pair<const char*, Builder>> cases = {
      {"matmul", [&](Graph<double>& g) { return sum(g.parameter(a) * g.parameter(b)); }},
      {"transpose", [&](Graph<double>& g) {
         return sum(cmul(transpose(g.parameter(a)), g.parameter(b)));
       }},
      {"add_row", [&](Graph<double>& g) {
         return sum(tanh(add_row(g.parameter(a), g.parameter(r))));
       }},
      {"add_scalar", [&](Graph<double>& g) {
         return sum(tanh(add_scalar(g.parameter(a), g.parameter(s))));
       }},
      {"cmul", [&](Graph<double>& g) {
         return sum(cmul(g.parameter(a), tanh(g.parameter(a))));
       }},
      {"scale_by", [&](Graph<double>& g) {
         return sum(tanh(scale_by(g.parameter(a), g.parameter(s))));
       }},
      {"scale_rows", [&](Graph<double>& g) {
         return sum(tanh(scale_rows(g.parameter(a), g.parameter(w))));
       }},
      {"sigmoid", [&](Graph<double>& g) {
         return sum(cmul(sigmoid(g.parameter(a)), g.constant(target)));
       }},
      {"relu", [&](Graph<double>& g) {
         return sum(cmul(relu(g.parameter(a)), g.parameter(a)));
       }},
      {"one_minus", [&](Graph<double>& g) {
         return sum(cmul(one_minus(g.parameter(a)), g.parameter(a)));
       }},
      {"softmax", [&](Graph<double>& g) {
         return sum(cmul(softmax(g.parameter(a)), g.constant(target * 3.0 + Mat::Identity(3, 4))));
       }},
      {"layernorm", [&](Graph<double>& g) {
         return sum(cmul(layernorm(g.parameter(a), 1e-5), tanh(g.parameter(a))));
       }},
      {"maxpool", [&](Graph<double>& g) {
         return sum(tanh(maxpool_columns(g.parameter(a))));
       }},
      {"concat_slice", [&](Graph<double>& g) {
         Var<double> c = concat_cols<double>({g.parameter(a), g.parameter(w)});
         Var<double> d = concat_rows<double>({c, slice_rows(c, 1, 2)});
         return sum(tanh(slice_cols(d, 1, 3)));
       }},
      {"gather_scatter", [&](Graph<double>& g) {
         Var<double> gathered = gather_cols(g.parameter(p), {5, 0, 0, 2});
         return sum(tanh(scatter_cols(gathered, {1, 1, 0, 3}, 4)));
       }},
      {"embedding", [&](Graph<double>& g) {
         return sum(tanh(embedding(g, table, {4, 1, 1})));
       }},
      {"mse", [&](Graph<double>& g) { return mse(g.parameter(a), g.constant(target)); }},
      {"neg_log_nll", [&](Graph<double>& g) {
         Var<double> dist = softmax(g.parameter(p));
         return add(nll(dist, 2, 1e-12), sum(neg_log(dist, 1e-12)));
       }},
      {"mean", [&](Graph<double>& g) { return mean(tanh(g.parameter(a))); }},
  };
  for (const auto& [name, build] : cases) {
    CAPTURE(name);
    CHECK(max_relative_error(f.store, build) < 1e-6);
  }
}

TEST_CASE("random composite graph with 30 parameters matches finite differences") {
  Fixture f;
  auto& w1 = f.store.add_uniform("w1", 3, 4, 0.8, f.rng);
  auto& b1 = f.store.add_uniform("b1", 1, 4, 0.8, f.rng);
  auto& w2 = f.store.add_uniform("w2", 4, 3, 0.8, f.rng);
  auto& b2 = f.store.add_uniform("b2", 1, 2, 0.8, f.rng);
  CHECK(f.store.num_elements() == 30);
  Mat x(2, 3);
  x << 0.3, -0.7, 1.1, 0.5, 0.2, -0.4;
  auto build = [&](Graph<double>& g) {
    Var<double> h = tanh(add_row(g.constant(x) * g.parameter(w1), g.parameter(b1)));
    Var<double> o = layernorm(h * g.parameter(w2), 1e-5);
    Var<double> pooled = maxpool_columns(sigmoid(o));
    Var<double> dist = softmax(add(slice_cols(pooled, 0, 2), g.parameter(b2)));
    return nll(dist, 1, 1e-12);
  };
  CHECK(max_relative_error(f.store, build) < 1e-6);
}

TEST_CASE("untracked graphs record values without gradients") {
  ParameterStore<double> store;
  auto& x = store.add("x", 1, 2);
  x.value << 1.0, 2.0;
  Graph<double> g(false);
  Var<double> y = sum(g.parameter(x));
  CHECK(y.scalar() == 3.0);
  g.backward(y);
  CHECK(x.grad.isZero());
}
