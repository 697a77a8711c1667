#include <doctest.h>

#include "mkp/core/error.hpp"
#include "mkp/model/image_encoder.hpp"
#include "mkp/model/text_encoder.hpp"
#include "support/finite_difference.hpp"
#include "support/tiny_model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

using namespace mkp;
using Mat = Matrix<double>;

namespace {

struct TextFixture {
  std::mt19937_64 rng{5};
  ParameterStore<double> store;
  TextEncoderWeights<double> w;

  explicit TextFixture(int vocab = 12, int d_emb = 4, int d1 = 6) {
    TextEncoderWeights<double>::declare(store, vocab, d_emb, d1, 0.5, rng);
    w = TextEncoderWeights<double>::bind(store);
  }
};

// Plain-loop GRU with the packed [z | r | n] layout.
Mat gru_oracle(const Mat& x, const Mat& h, const Mat& W, const Mat& U, const Mat& b, const Mat& c) {
  const Eigen::Index n = h.cols();
  Mat gx = x * W + b;
  Mat gh = h * U + c;
  Mat out(1, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double z = 1.0 / (1.0 + std::exp(-(gx(0, j) + gh(0, j))));
    const double r = 1.0 / (1.0 + std::exp(-(gx(0, n + j) + gh(0, n + j))));
    const double cand = std::tanh(gx(0, 2 * n + j) + r * gh(0, 2 * n + j));
    out(0, j) = (1 - z) * cand + z * h(0, j);
  }
  return out;
}

Mat bigru_oracle(const Mat& emb, const TextEncoderWeights<double>& w) {
  const Eigen::Index len = emb.rows();
  const int h = w.forward.hidden;
  Mat H(len, 2 * h);
  Mat state = Mat::Zero(1, h);
  for (Eigen::Index i = 0; i < len; ++i) {
    state = gru_oracle(emb.row(i), state, w.forward.input->value, w.forward.recurrent->value,
                       w.forward.input_bias->value, w.forward.recurrent_bias->value);
    H.block(i, 0, 1, h) = state;
  }
  state = Mat::Zero(1, h);
  for (Eigen::Index i = len - 1; i >= 0; --i) {
    state = gru_oracle(emb.row(i), state, w.backward.input->value, w.backward.recurrent->value,
                       w.backward.input_bias->value, w.backward.recurrent_bias->value);
    H.block(i, h, 1, h) = state;
  }
  return H;
}

}  // namespace

TEST_CASE("embed adds word and type rows") {
  TextFixture f;
  const std::vector<int> tokens{5, 7, 4, 9};
  const std::vector<int> types{0, 0, 1, 1};
  SUBCASE("zero type table gives word embeddings") {
    f.w.type_embedding->value.setZero();
    Graph<double> g(false);
    Mat e = embed(g, f.w, tokens, types).value();
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      CHECK(e.row(static_cast<Eigen::Index>(i)) == f.w.word_embedding->value.row(tokens[i]));
    }
  }
  SUBCASE("zero word table gives type embeddings") {
    f.w.word_embedding->value.setZero();
    Graph<double> g(false);
    Mat e = embed(g, f.w, tokens, types).value();
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      CHECK(e.row(static_cast<Eigen::Index>(i)) == f.w.type_embedding->value.row(types[i]));
    }
  }
  SUBCASE("out of range ids") {
    Graph<double> g(false);
    CHECK_THROWS_AS(embed(g, f.w, {12}, {0}), IndexError);
    CHECK_THROWS_AS(embed(g, f.w, {1}, {3}), IndexError);
    CHECK_THROWS_AS(embed(g, f.w, {1, 2}, {0}), ShapeError);
  }
}

TEST_CASE("default embedding width") { CHECK(ModelConfig{}.d_emb == 200); }

TEST_CASE("dropout on embeddings only in training mode") {
  TextFixture f;
  std::mt19937_64 rng(1);
  ForwardContext eval_ctx{false, 0.5, &rng};
  ForwardContext train_ctx{true, 0.5, &rng};
  Graph<double> g(false);
  Mat plain = embed(g, f.w, {5, 6, 7}, {0, 0, 0}).value();
  CHECK(embed(g, f.w, {5, 6, 7}, {0, 0, 0}, eval_ctx).value() == plain);
  Mat dropped = embed(g, f.w, {5, 6, 7}, {0, 0, 0}, train_ctx).value();
  for (Eigen::Index i = 0; i < plain.size(); ++i) {
    const double v = dropped.data()[i];
    CHECK((v == 0.0 || v == doctest::Approx(2.0 * plain.data()[i]).epsilon(1e-15)));
  }
}

TEST_CASE("encode_text matches a loop oracle") {
  TextFixture f;
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> tok(0, 11), typ(0, 2);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<int> tokens, types;
    for (int i = 0; i < 1 + trial * 2; ++i) {
      tokens.push_back(tok(rng));
      types.push_back(typ(rng));
    }
    Graph<double> g(false);
    Var<double> e = embed(g, f.w, tokens, types);
    TextEncoding<double> enc = encode_text(g, f.w, e);
    Mat expected = bigru_oracle(e.value(), f.w);
    REQUIRE(enc.H.rows() == static_cast<Eigen::Index>(tokens.size()));
    REQUIRE(enc.H.cols() == 6);
    CHECK((enc.H.value() - expected).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(enc.M.value() == enc.H.value().colwise().maxCoeff());
    for (Eigen::Index i = 0; i < enc.H.rows(); ++i) {
      CHECK(((enc.M.value() - enc.H.value().row(i)).array() >= 0).all());
    }
  }
}

TEST_CASE("encode_text with zero recurrent parameters yields zero states") {
  TextFixture f;
  for (auto* gru : {&f.w.forward, &f.w.backward}) {
    gru->input->value.setZero();
    gru->recurrent->value.setZero();
    gru->input_bias->value.setZero();
    gru->recurrent_bias->value.setZero();
  }
  Graph<double> g(false);
  TextEncoding<double> enc = encode_text(g, f.w, embed(g, f.w, {5, 6, 7}, {0, 1, 2}));
  CHECK(enc.H.value().isZero(0.0));
  CHECK(enc.M.value().isZero(0.0));
}

TEST_CASE("encode_text single token and empty input") {
  TextFixture f;
  Graph<double> g(false);
  TextEncoding<double> enc = encode_text(g, f.w, embed(g, f.w, {5}, {0}));
  CHECK(enc.H.rows() == 1);
  CHECK(enc.M.value() == enc.H.value());
  CHECK_THROWS_AS(encode_text(g, f.w, embed(g, f.w, std::vector<int>{}, std::vector<int>{})), EmptyInput);
}

TEST_CASE("pooled vector is invariant to row permutation") {
  TextFixture f;
  Graph<double> g(false);
  TextEncoding<double> enc = encode_text(g, f.w, embed(g, f.w, {3, 8, 5, 10}, {0, 0, 1, 2}));
  Mat H = enc.H.value();
  Mat shuffled(H.rows(), H.cols());
  const std::vector<int> perm{2, 0, 3, 1};
  for (std::size_t i = 0; i < perm.size(); ++i) shuffled.row(static_cast<Eigen::Index>(i)) = H.row(perm[i]);
  CHECK(maxpool_columns(g.constant(shuffled)).value() == enc.M.value());
}

TEST_CASE("with d1 = 300 each direction has 150 units") {
  std::mt19937_64 rng(1);
  ParameterStore<double> store;
  TextEncoderWeights<double>::declare(store, 10, 4, 300, 0.1, rng);
  auto w = TextEncoderWeights<double>::bind(store);
  CHECK(w.forward.hidden == 150);
  CHECK(w.backward.hidden == 150);
}

TEST_CASE("text encoder gradients match finite differences") {
  TextFixture f(8, 3, 4);
  const std::vector<int> tokens{1, 4, 7, 2, 4};
  const std::vector<int> types{0, 0, 1, 2, 2};
  Mat probe(1, 4);
  probe << 0.3, -1.2, 0.7, 2.0;
  auto loss = [&](Graph<double>& g) {
    TextEncoding<double> enc = encode_text(g, f.w, embed(g, f.w, tokens, types));
    return add(sum(cmul(enc.M, g.constant(probe))), mean(tanh(enc.H)));
  };
  CHECK(mkp::testing::max_relative_error(f.store, loss) < 1e-6);
}

TEST_CASE("pretrained embeddings fill known words") {
  std::mt19937_64 rng(1);
  ParameterStore<double> store;
  TextEncoderWeights<double>::declare(store, 7, 3, 4, 0.1, rng);
  auto w = TextEncoderWeights<double>::bind(store);
  const Vocabulary vocab = Vocabulary::from_words({"cat", "dog"});
  const std::string path = "pretrained_test_embeddings.txt";
  {
    std::ofstream out(path);
    out << "cat 1 2 3\nzebra 4 5 6\n";
  }
  const Mat before = w.word_embedding->value;
  CHECK(load_pretrained_embeddings(*w.word_embedding, vocab, path) == 1);
  CHECK(w.word_embedding->value.row(*vocab.find("cat")) == (Mat(1, 3) << 1, 2, 3).finished());
  CHECK(w.word_embedding->value.row(*vocab.find("dog")) == before.row(*vocab.find("dog")));
  {
    std::ofstream out(path);
    out << "cat 1 2\n";
  }
  CHECK_THROWS_AS(load_pretrained_embeddings(*w.word_embedding, vocab, path), ParseError);
  std::remove(path.c_str());
}

// Image encoder.

namespace {

struct ImageFixture {
  std::mt19937_64 rng{21};
  ParameterStore<double> store;
  ImageEncoderWeights<double> w;

  explicit ImageFixture(int d1 = 4) {
    ImageEncoderWeights<double>::declare(store, d1, 0.1, rng);
    w = ImageEncoderWeights<double>::bind(store);
  }
};

}  // namespace

TEST_CASE("project_image matches a triple-loop product") {
  ImageFixture f;
  std::mt19937_64 rng(4);
  auto grid = mkp::testing::random_grid(rng);
  Graph<double> g(false);
  Mat H = project_image(g, f.w, *grid).value();
  REQUIRE(H.rows() == 49);
  REQUIRE(H.cols() == 4);
  double worst = 0;
  for (int r = 0; r < 49; ++r) {
    for (int j = 0; j < 4; ++j) {
      double acc = f.w.bias->value(0, j);
      for (int k = 0; k < kFeatureDim; ++k) acc += static_cast<double>((*grid)(r, k)) * f.w.weight->value(k, j);
      worst = std::max(worst, std::abs(acc - H(r, j)));
    }
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("project_image trivial cases") {
  ImageFixture f;
  std::mt19937_64 rng(4);
  auto grid = mkp::testing::random_grid(rng);
  SUBCASE("zero weight gives the bias on every row") {
    f.w.weight->value.setZero();
    Graph<double> g(false);
    Mat H = project_image(g, f.w, *grid).value();
    for (int r = 0; r < 49; ++r) CHECK(H.row(r) == f.w.bias->value);
  }
  SUBCASE("zero input and bias") {
    f.w.bias->value.setZero();
    Graph<double> g(false);
    CHECK(project_image(g, f.w, FeatureGrid::Zero(49, 512)).value().isZero(0.0));
  }
}

TEST_CASE("project_image is linear without bias") {
  ImageFixture f;
  f.w.bias->value.setZero();
  std::mt19937_64 rng(8);
  auto x = mkp::testing::random_grid(rng);
  auto y = mkp::testing::random_grid(rng);
  const float a = 0.75f, b = -2.0f;
  FeatureGrid combo = a * *x + b * *y;
  Graph<double> g(false);
  Mat lhs = project_image(g, f.w, combo).value();
  Mat rhs = a * project_image(g, f.w, *x).value() + b * project_image(g, f.w, *y).value();
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-5);  // combo rounded to float
}

TEST_CASE("project_image rejects bad input") {
  ImageFixture f;
  Graph<double> g(false);
  CHECK_THROWS_AS(project_image(g, f.w, FeatureGrid::Zero(48, 512)), ShapeError);
  CHECK_THROWS_AS(project_image(g, f.w, FeatureGrid::Zero(49, 511)), ShapeError);
  FeatureGrid bad = FeatureGrid::Zero(49, 512);
  bad(3, 100) = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(project_image(g, f.w, bad), NumericError);
  bad(3, 100) = std::numeric_limits<float>::infinity();
  CHECK_THROWS_AS(project_image(g, f.w, bad), NumericError);
}

TEST_CASE("project_image gradients match finite differences") {
  ImageFixture f(3);
  std::mt19937_64 rng(2);
  auto grid = mkp::testing::random_grid(rng, 0.2f);
  auto loss = [&](Graph<double>& g) { return mean(tanh(project_image(g, f.w, *grid))); };
  CHECK(mkp::testing::max_relative_error(f.store, loss) < 1e-6);
}
