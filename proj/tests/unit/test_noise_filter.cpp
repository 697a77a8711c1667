#include <doctest.h>

#include "mkp/core/error.hpp"
#include "mkp/model/noise_filter.hpp"
#include "support/finite_difference.hpp"
#include "support/tiny_model.hpp"

#include <cmath>
#include <random>

using namespace mkp;
using Mat = Matrix<double>;

namespace {

Mat random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
  return m;
}

double sigmoid_ref(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Step-by-step multi-head attention written with explicit loops.
Mat attention_oracle(const MultiHeadWeights<double>& w, const Mat& q, const Mat& keys,
                     const Mat& values) {
  const Eigen::Index d = q.cols(), n = keys.rows(), hs = d / w.heads;
  Mat Q = q * w.wq->value + w.bq->value;
  Mat K = keys * w.wk->value;
  Mat V = values * w.wv->value;
  for (Eigen::Index i = 0; i < n; ++i) {
    K.row(i) += w.bk->value;
    V.row(i) += w.bv->value;
  }
  Mat joined(1, d);
  for (int h = 0; h < w.heads; ++h) {
    std::vector<double> score(static_cast<std::size_t>(n));
    double top = -1e300;
    for (Eigen::Index i = 0; i < n; ++i) {
      double s = 0;
      for (Eigen::Index j = 0; j < hs; ++j) s += Q(0, h * hs + j) * K(i, h * hs + j);
      score[static_cast<std::size_t>(i)] = s / std::sqrt(static_cast<double>(hs));
      top = std::max(top, score[static_cast<std::size_t>(i)]);
    }
    double z = 0;
    for (auto& s : score) z += (s = std::exp(s - top));
    for (Eigen::Index j = 0; j < hs; ++j) {
      double acc = 0;
      for (Eigen::Index i = 0; i < n; ++i) acc += score[static_cast<std::size_t>(i)] / z * V(i, h * hs + j);
      joined(0, h * hs + j) = acc;
    }
  }
  return joined * w.wo->value + w.bo->value;
}

struct FilterFixture {
  std::mt19937_64 rng{17};
  ParameterStore<double> store;
  NoiseFilterWeights<double> w;
  Mat M_T, H_I;

  explicit FilterFixture(int d1 = 4, int d2 = 2, int heads = 2, int d_ffn = 5, double range = 0.4) {
    NoiseFilterWeights<double>::declare(store, d1, d2, d_ffn, range, rng);
    w = NoiseFilterWeights<double>::bind(store, heads);
    M_T = random_matrix(rng, 1, d1);
    H_I = random_matrix(rng, 49, d1);
  }
};

}  // namespace

TEST_CASE("multihead attention matches a loop oracle") {
  std::mt19937_64 rng(3);
  ParameterStore<double> store;
  MultiHeadWeights<double>::declare(store, "att", 4, 0.5, rng);
  auto w = MultiHeadWeights<double>::bind(store, "att", 2);
  Mat q = random_matrix(rng, 1, 4), kv = random_matrix(rng, 3, 4);
  Graph<double> g(false);
  Mat out = multihead_cross_attention(g, w, g.constant(q), g.constant(kv), g.constant(kv)).value();
  CHECK((out - attention_oracle(w, q, kv, kv)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("multihead attention trivial cases") {
  std::mt19937_64 rng(3);
  ParameterStore<double> store;
  MultiHeadWeights<double>::declare(store, "att", 4, 0.5, rng);
  auto w = MultiHeadWeights<double>::bind(store, "att", 2);
  Mat q = random_matrix(rng, 1, 4);
  SUBCASE("one position passes its projected value") {
    Mat kv = random_matrix(rng, 1, 4);
    Graph<double> g(false);
    Mat out = multihead_cross_attention(g, w, g.constant(q), g.constant(kv), g.constant(kv)).value();
    Mat expected = (kv * w.wv->value + w.bv->value) * w.wo->value + w.bo->value;
    CHECK((out - expected).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("zero projections give the output bias") {
    for (auto* p : {w.wq, w.bq, w.wk, w.bk, w.wv, w.bv, w.wo}) p->value.setZero();
    Mat kv = random_matrix(rng, 5, 4);
    Graph<double> g(false);
    CHECK(multihead_cross_attention(g, w, g.constant(q), g.constant(kv), g.constant(kv)).value() ==
          w.bo->value);
  }
  SUBCASE("indivisible head split") {
    auto bad = MultiHeadWeights<double>::bind(store, "att", 3);
    Mat kv = random_matrix(rng, 2, 4);
    Graph<double> g(false);
    CHECK_THROWS_AS(multihead_cross_attention(g, bad, g.constant(q), g.constant(kv), g.constant(kv)),
                    ConfigError);
  }
}

TEST_CASE("match_score") {
  FilterFixture f;
  SUBCASE("composed oracle") {
    Graph<double> g(false);
    MatchResult<double> m = match_score(g, f.w, g.constant(f.M_T), g.constant(f.H_I));
    Mat H_c = attention_oracle(f.w.attention, f.M_T, f.H_I, f.H_I);
    const double expected = sigmoid_ref((H_c * f.w.fc_weight->value)(0, 0) + f.w.fc_bias->value(0, 0));
    CHECK((m.H_c.value() - H_c).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(std::abs(m.s_c.scalar() - expected) < 1e-12);
    CHECK(m.s_c.scalar() > 0.0);
    CHECK(m.s_c.scalar() < 1.0);
  }
  SUBCASE("zero fc gives one half") {
    f.w.fc_weight->value.setZero();
    f.w.fc_bias->value.setZero();
    Graph<double> g(false);
    CHECK(match_score(g, f.w, g.constant(f.M_T), g.constant(f.H_I)).s_c.scalar() == 0.5);
  }
  SUBCASE("clamped logits keep s_c inside the open interval") {
    // sigmoid(-30) = 9.357623e-14, so the bound is just under 1e-13.
    f.w.fc_weight->value.setZero();
    for (double bias : {1e6, -1e6}) {
      f.w.fc_bias->value(0, 0) = bias;
      Graph<double> g(false);
      const double s = match_score(g, f.w, g.constant(f.M_T), g.constant(f.H_I)).s_c.scalar();
      CHECK(std::min(s, 1.0 - s) == doctest::Approx(9.357622968840175e-14).epsilon(1e-3));
      CHECK(std::isfinite(std::log(s)));
      CHECK(std::isfinite(std::log(1.0 - s)));
    }
  }
}

TEST_CASE("correlation_scores in bypass mode") {
  FilterFixture f;
  const CorrelationOptions bypass{true, true};
  SUBCASE("zero text projection leaves s_c everywhere") {
    f.w.text_proj->value.setZero();
    Graph<double> g(false);
    auto c = correlation_scores(g, f.w, g.constant(f.M_T), g.constant(f.H_I),
                                g.constant(Mat::Constant(1, 1, 0.37)), bypass);
    CHECK(c.A.value().isApproxToConstant(0.37, 0.0));
    CHECK((c.A.value().array() == 0.37).all());
  }
  SUBCASE("dot-product oracle with s_c = 0") {
    Graph<double> g(false);
    auto c = correlation_scores(g, f.w, g.constant(f.M_T), g.constant(f.H_I),
                                g.constant(Mat::Zero(1, 1)), bypass);
    Mat t = f.M_T * f.w.text_proj->value;
    Mat r = f.H_I * f.w.region_proj->value;
    double worst = 0;
    for (int l = 0; l < 49; ++l) {
      const double dot = (t(0, 0) * r(l, 0) + t(0, 1) * r(l, 1)) / std::sqrt(2.0);
      worst = std::max(worst, std::abs(dot - c.A.value()(0, l)));
    }
    CHECK(worst < 1e-12);
  }
  SUBCASE("shifting s_c shifts every score") {
    Graph<double> g(false);
    auto a = correlation_scores(g, f.w, g.constant(f.M_T), g.constant(f.H_I),
                                g.constant(Mat::Constant(1, 1, 0.2)), bypass);
    auto b = correlation_scores(g, f.w, g.constant(f.M_T), g.constant(f.H_I),
                                g.constant(Mat::Constant(1, 1, 0.45)), bypass);
    CHECK(((b.A.value() - a.A.value()).array() - 0.25).abs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("correlation_scores applies the 49-wide FFN") {
  FilterFixture f;
  Graph<double> g(false);
  auto c = correlation_scores(g, f.w, g.constant(f.M_T), g.constant(f.H_I),
                              g.constant(Mat::Constant(1, 1, 0.6)));
  Mat raw = (f.M_T * f.w.text_proj->value) * (f.H_I * f.w.region_proj->value).transpose() / std::sqrt(2.0);
  raw.array() += 0.6;
  Mat hidden = (raw * f.w.ffn1_weight->value + f.w.ffn1_bias->value).array().tanh().matrix();
  Mat expected = hidden * f.w.ffn2_weight->value + f.w.ffn2_bias->value;
  REQUIRE(c.A.cols() == 49);
  CHECK((c.A.value() - expected).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(c.A.value().allFinite());
  CHECK_THROWS_AS(correlation_scores(g, f.w, g.constant(f.M_T), g.constant(f.H_I),
                                     g.constant(Mat::Constant(1, 1, NAN))),
                  NumericError);
}

TEST_CASE("filter_image gating") {
  FilterFixture f;
  Graph<double> g(false);
  SUBCASE("zero scores halve the features exactly") {
    auto out = filter_image(g.constant(Mat::Zero(1, 49)), g.constant(f.H_I));
    CHECK(out.H.value() == 0.5 * f.H_I);
  }
  SUBCASE("saturated scores") {
    Mat A(1, 49);
    for (int r = 0; r < 49; ++r) A(0, r) = r % 2 ? 30.0 : -30.0;
    Mat H = filter_image(g.constant(A), g.constant(f.H_I)).H.value();
    for (int r = 0; r < 49; ++r) {
      const double ratio = H.row(r).norm() / f.H_I.row(r).norm();
      if (r % 2) CHECK(ratio >= 1.0 - 1e-13);
      else CHECK(ratio <= 1e-13);
    }
  }
  SUBCASE("gate ratio equals sigmoid and increases with the score") {
    Mat A(1, 49);
    for (int r = 0; r < 49; ++r) A(0, r) = -3.0 + 0.125 * r;
    auto out = filter_image(g.constant(A), g.constant(f.H_I));
    double prev = 0.0;
    for (int r = 0; r < 49; ++r) {
      const double ratio = out.H.value()(r, 1) / f.H_I(r, 1);
      CHECK(ratio == doctest::Approx(sigmoid_ref(A(0, r))).epsilon(1e-12));
      CHECK(out.gate.value()(0, r) > 0.0);
      CHECK(out.gate.value()(0, r) < 1.0);
      CHECK(ratio > prev);
      prev = ratio;
    }
  }
  CHECK_THROWS_AS(filter_image(g.constant(Mat::Zero(1, 48)), g.constant(f.H_I)), ShapeError);
}

TEST_CASE("gt_correlation_scores") {
  std::mt19937_64 rng(12);
  ParameterStore<double> store;
  TextEncoderWeights<double>::declare(store, 10, 4, 4, 0.4, rng);
  NoiseFilterWeights<double>::declare(store, 4, 2, 5, 0.4, rng);
  auto text = TextEncoderWeights<double>::bind(store);
  auto w = NoiseFilterWeights<double>::bind(store, 2);
  const Vocabulary vocab = Vocabulary::from_words({"a", "b", "x"});
  Mat H_I = random_matrix(rng, 49, 4);
  const double s_c = 0.31;

  auto input_scores = [&](const MultiModalSample& sample) {
    Graph<double> g(false);
    EncodedInput in = concat_input(sample, vocab);
    TextEncoding<double> enc = encode_text(g, text, embed(g, text, in));
    return correlation_scores(g, w, enc.M, g.constant(H_I), g.constant(Mat::Constant(1, 1, s_c)), {})
        .A.value();
  };

  SUBCASE("target text equal to the input reproduces A") {
    MultiModalSample sample;
    sample.source = {"a", "b"};
    Mat A = input_scores(sample);
    Mat A_gt = gt_correlation_scores<double>({{"b"}, {"a"}}, vocab, text, w, H_I, s_c, {});
    CHECK(A_gt == A);
  }
  SUBCASE("single word") {
    MultiModalSample sample;
    sample.source = {"x"};
    Graph<double> g(false);
    Mat A = input_scores(sample);
    Mat A_gt = gt_correlation_scores<double>({{"x"}}, vocab, text, w, H_I, s_c, {});
    CHECK(mse(g.constant(A), g.constant(A_gt)).scalar() == 0.0);
  }
  SUBCASE("keyphrase order does not matter") {
    Mat ab = gt_correlation_scores<double>({{"a"}, {"b"}}, vocab, text, w, H_I, s_c, {});
    Mat ba = gt_correlation_scores<double>({{"b"}, {"a"}}, vocab, text, w, H_I, s_c, {});
    CHECK(ab == ba);
  }
  CHECK_THROWS_AS(gt_correlation_scores<double>({}, vocab, text, w, H_I, s_c, {}), NoTarget);
}

TEST_CASE("noise filter gradients match finite differences") {
  FilterFixture f(4, 3, 2, 4, 0.5);
  Mat probe = random_matrix(f.rng, 49, 4);
  auto loss = [&](Graph<double>& g) {
    Var<double> M = g.constant(f.M_T), H = g.constant(f.H_I);
    MatchResult<double> m = match_score(g, f.w, M, H);
    CorrelationState<double> c = correlation_scores(g, f.w, M, H, m.s_c);
    FilteredImage<double> out = filter_image(c.A, H);
    return add(sum(cmul(out.H, g.constant(probe))), neg_log(m.s_c, 1e-12));
  };
  CHECK(mkp::testing::max_relative_error(f.store, loss, 1e-5) < 1e-4);
}
