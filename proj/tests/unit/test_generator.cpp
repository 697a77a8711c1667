#include <doctest.h>

#include "mkp/core/error.hpp"
#include "mkp/data/text.hpp"
#include "mkp/model/generator.hpp"
#include "mkp/model/model.hpp"
#include "support/finite_difference.hpp"
#include "support/tiny_model.hpp"

#include <cmath>
#include <map>
#include <functional>
#include <random>
#include <set>

using namespace mkp;
using Mat = Matrix<double>;

namespace {

Mat random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
  return m;
}

Mat softmax_oracle(const Mat& x) {
  Mat e = (x.array() - x.maxCoeff()).exp().matrix();
  return e / e.sum();
}

struct GenFixture {
  std::mt19937_64 rng{31};
  ParameterStore<double> store;
  GeneratorWeights<double> w;
  int vocab = 9, d_emb = 3, d1 = 4, d_att = 5;

  explicit GenFixture(double range = 0.5) {
    GeneratorWeights<double>::declare(store, vocab, d_emb, d1, d_att, range, rng);
    w = GeneratorWeights<double>::bind(store);
  }
};

Mat random_distribution(std::mt19937_64& rng, Eigen::Index n) {
  std::uniform_real_distribution<double> u(0.01, 1.0);
  Mat p(1, n);
  for (Eigen::Index i = 0; i < n; ++i) p(0, i) = u(rng);
  return p / p.sum();
}

}  // namespace

TEST_CASE("init_decoder") {
  GenFixture f;
  Mat M = random_matrix(f.rng, 1, 4);
  Graph<double> g(false);
  CHECK((init_decoder(g, f.w, g.constant(M)).value() - (M * f.w.init->value).array().tanh().matrix())
            .cwiseAbs()
            .maxCoeff() < 1e-12);
  CHECK(init_decoder(g, f.w, g.constant(Mat::Zero(1, 4))).value().isZero(0.0));
  f.w.init->value.setZero();
  CHECK(init_decoder(g, f.w, g.constant(M)).value().isZero(0.0));
}

TEST_CASE("decoder_step attention") {
  GenFixture f;
  Mat y = random_matrix(f.rng, 1, 3), s = random_matrix(f.rng, 1, 4);
  SUBCASE("single position") {
    Graph<double> g(false);
    Mat H = random_matrix(f.rng, 1, 4);
    auto st = decoder_step(g, f.w, g.constant(y), g.constant(s), prepare_memory(g, f.w, g.constant(H)));
    CHECK(st.alpha.value()(0, 0) == 1.0);
    CHECK(st.c.value() == H);
  }
  SUBCASE("zero scoring vector is uniform") {
    f.w.attention_vec->value.setZero();
    Graph<double> g(false);
    Mat H = random_matrix(f.rng, 6, 4);
    auto st = decoder_step(g, f.w, g.constant(y), g.constant(s), prepare_memory(g, f.w, g.constant(H)));
    for (int i = 0; i < 6; ++i) CHECK(st.alpha.value()(0, i) == doctest::Approx(1.0 / 6).epsilon(1e-15));
  }
  SUBCASE("oracle from the pre-update state") {
    Graph<double> g(false);
    Mat H = random_matrix(f.rng, 5, 4);
    auto st = decoder_step(g, f.w, g.constant(y), g.constant(s), prepare_memory(g, f.w, g.constant(H)));
    Mat scores(1, 5);
    for (int i = 0; i < 5; ++i) {
      Mat joined(1, 8);
      joined << s, H.row(i);
      scores(0, i) = ((joined * f.w.attention->value).array().tanh().matrix() * f.w.attention_vec->value)(0, 0);
    }
    Mat alpha = softmax_oracle(scores);
    CHECK((st.alpha.value() - alpha).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((st.c.value() - alpha * H).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(std::abs(st.alpha.value().sum() - 1.0) < 1e-12);
  }
  SUBCASE("zero GRU halves the state") {
    for (auto* p : {f.w.gru.input, f.w.gru.recurrent, f.w.gru.input_bias, f.w.gru.recurrent_bias}) {
      p->value.setZero();
    }
    Graph<double> g(false);
    Mat H = random_matrix(f.rng, 3, 4);
    auto st = decoder_step(g, f.w, g.constant(y), g.constant(s), prepare_memory(g, f.w, g.constant(H)));
    CHECK(st.s.value() == 0.5 * s);
  }
  SUBCASE("empty memory") {
    Graph<double> g(false);
    CHECK_THROWS_AS(prepare_memory(g, f.w, g.constant(Mat(0, 4))), EmptyInput);
  }
}

TEST_CASE("prediction_distribution") {
  GenFixture f;
  Mat feat = random_matrix(f.rng, 1, 11);
  Graph<double> g(false);
  Mat p = prediction_distribution(g, f.w, g.constant(feat)).value();
  CHECK((p - softmax_oracle(feat * f.w.output->value)).cwiseAbs().maxCoeff() < 1e-12);
  f.w.output->value.setZero();
  Mat u = prediction_distribution(g, f.w, g.constant(feat)).value();
  for (int i = 0; i < 9; ++i) CHECK(u(0, i) == doctest::Approx(1.0 / 9).epsilon(1e-15));
}

TEST_CASE("readout features concatenate embedding, state and c + H_f") {
  Graph<double> g(false);
  Mat y(1, 2), s(1, 3), c(1, 3), h(1, 3);
  y << 1, 2;
  s << 3, 4, 5;
  c << 6, 7, 8;
  h << 10, 20, 30;
  Mat expected(1, 8);
  expected << 1, 2, 3, 4, 5, 16, 27, 38;
  CHECK(readout_features(g.constant(y), g.constant(s), g.constant(c), g.constant(h)).value() == expected);
}

TEST_CASE("extended vocabulary layout") {
  const Vocabulary vocab = Vocabulary::from_words({"cat", "dog"});
  MultiModalSample sample;
  sample.source = {"cat", "emu", "fox", "emu"};
  EncodedInput in = concat_input(sample, vocab);
  ExtendedVocabulary ext(vocab, in, {"dog", "gnu", "fox"});
  CHECK(ext.base_size() == 7);
  CHECK(ext.size() == 10);
  CHECK(ext.find("emu") == 7);
  CHECK(ext.find("fox") == 8);
  CHECK(ext.find("gnu") == 9);
  CHECK(ext.find("dog") == *vocab.find("dog"));
  CHECK(ext.word(9) == "gnu");
  CHECK_FALSE(ext.find("yak"));
  CHECK_THROWS_AS(ext.word(10), IndexError);
  CHECK_THROWS_AS(ext.ids({"yak"}), IndexError);
  CHECK(in.copy_ids[1] == 7);
  CHECK(in.copy_ids[2] == 8);
}

TEST_CASE("copy_distribution") {
  Graph<double> g(false);
  Mat alpha(1, 2), beta(1, 1);
  alpha << 0.3, 0.7;
  beta << 1.0;
  const std::vector<int> input_ids{0, 1}, beta_ids{0};  // cat = 0, dog = 1
  SUBCASE("hand-summed example") {
    Mat p = copy_distribution(g.constant(alpha), input_ids, g.constant(beta), beta_ids, 0.5, 2).value();
    CHECK(p(0, 0) == doctest::Approx(0.65).epsilon(1e-15));
    CHECK(p(0, 1) == doctest::Approx(0.35).epsilon(1e-15));
  }
  SUBCASE("boundaries") {
    Mat a = copy_distribution(g.constant(alpha), input_ids, g.constant(beta), beta_ids, 1.0, 2).value();
    CHECK(a == alpha);
    Mat b = copy_distribution(g.constant(alpha), input_ids, g.constant(beta), beta_ids, 0.0, 2).value();
    CHECK(b(0, 0) == 1.0);
    CHECK(b(0, 1) == 0.0);
  }
  SUBCASE("repeated words aggregate") {
    Mat a3(1, 3);
    a3 << 0.2, 0.5, 0.3;
    Mat p = copy_distribution(g.constant(a3), {4, 2, 4}, Var<double>{}, {}, 0.5, 6).value();
    CHECK(p(0, 4) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(p(0, 2) == 0.5);
    CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-15));
  }
  CHECK_THROWS_AS(copy_distribution(g.constant(alpha), input_ids, g.constant(beta), beta_ids, 1.5, 2),
                  ConfigError);
}

TEST_CASE("mix_distributions") {
  Graph<double> g(false);
  SUBCASE("forced switch") {
    Mat pp(1, 2), pc(1, 3);
    pp << 0.2, 0.8;
    pc << 0.6, 0.1, 0.3;
    Mat p = mix_distributions(g, g.constant(pp), g.constant(pc), g.constant(Mat::Constant(1, 1, 0.5))).value();
    CHECK(p(0, 0) == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(p(0, 2) == doctest::Approx(0.15).epsilon(1e-15));
  }
  SUBCASE("equal inputs pass through") {
    std::mt19937_64 rng(1);
    Mat pp = random_distribution(rng, 5);
    Mat p = mix_distributions(g, g.constant(pp), g.constant(pp), g.constant(Mat::Constant(1, 1, 0.83))).value();
    CHECK((p - pp).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("sums to one") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 50; ++t) {
      Mat pp = random_distribution(rng, 6), pc = random_distribution(rng, 9);
      Mat p = mix_distributions(g, g.constant(pp), g.constant(pc), g.constant(Mat::Constant(1, 1, u(rng)))).value();
      CHECK(std::abs(p.sum() - 1.0) < 1e-12);
      CHECK((p.array() >= 0).all());
    }
  }
}

TEST_CASE("switch probability honours the forced value") {
  GenFixture f;
  Graph<double> g(false);
  Mat feat = random_matrix(f.rng, 1, 11);
  CHECK(switch_probability(g, f.w, g.constant(feat), 30.0, 0.5).scalar() == 0.5);
  const double expected = 1.0 / (1.0 + std::exp(-(feat * f.w.switch_weight->value)(0, 0)));
  CHECK(switch_probability(g, f.w, g.constant(feat)).scalar() == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("decoder step gradients match finite differences") {
  GenFixture f(0.5);
  Mat H = random_matrix(f.rng, 4, 4), H_f = random_matrix(f.rng, 1, 4), M = random_matrix(f.rng, 1, 4);
  Mat y1 = random_matrix(f.rng, 1, 3), y2 = random_matrix(f.rng, 1, 3);
  Mat beta(1, 2);
  beta << 0.4, 0.6;
  auto loss = [&](Graph<double>& g) {
    DecodeContext<double> ctx;
    ctx.memory = prepare_memory(g, f.w, g.constant(H));
    ctx.H_f = g.constant(H_f);
    ctx.input_ids = {2, 9, 4, 2};
    ctx.beta = g.constant(beta);
    ctx.beta_ids = {4, 10};
    ctx.lambda_c = 0.5;
    ctx.extended_size = 11;
    Var<double> s = init_decoder(g, f.w, g.constant(M));
    auto a = generation_step(g, f.w, ctx, g.constant(y1), s);
    auto b = generation_step(g, f.w, ctx, g.constant(y2), a.state.s);
    return add(nll(a.p, 9, 1e-12), nll(b.p, 3, 1e-12));
  };
  CHECK(mkp::testing::max_relative_error(f.store, loss, 1e-5) < 1e-4);
}

// Beam search over a toy stepper whose next-token distribution is a fixed
// function of the prefix.
namespace {

struct ToyStepper {
  int vocab = 6;
  std::uint64_t seed = 1;
  Words names{"<pad>", "<unk>", "<bos>", "<eos>", "a", "b"};

  using State = std::vector<int>;
  struct Step {
    State state;
    Eigen::RowVectorXd probs;
  };

  State start() const { return {}; }
  int bos() const { return 2; }
  int eos() const { return 3; }
  const std::string& word(int id) const { return names[static_cast<std::size_t>(id)]; }

  Eigen::RowVectorXd distribution(const State& prefix) const {
    std::uint64_t h = seed;
    for (int t : prefix) h = h * 1000003u + static_cast<std::uint64_t>(t) + 7;
    std::mt19937_64 rng(h);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    Eigen::RowVectorXd p(vocab);
    for (int i = 0; i < vocab; ++i) p(i) = u(rng);
    return p / p.sum();
  }

  Step advance(const State& state, int token) const {
    State next = state;
    next.push_back(token);
    return {next, distribution(next)};
  }
};

std::vector<ScoredKeyphrase> exhaustive(const ToyStepper& st, int max_len) {
  std::vector<ScoredKeyphrase> out;
  std::function<void(std::vector<int>, double)> walk = [&](std::vector<int> seq, double lp) {
    std::vector<int> feed{st.bos()};
    feed.insert(feed.end(), seq.begin(), seq.end());
    const Eigen::RowVectorXd p = st.distribution(feed);
    for (int t = 0; t < st.vocab; ++t) {
      std::vector<int> next = seq;
      next.push_back(t);
      const double nlp = lp + std::log(p(t));
      if (t == st.eos() || static_cast<int>(next.size()) == max_len) {
        ScoredKeyphrase k;
        for (int x : next) if (x != st.eos()) k.words.push_back(st.word(x));
        k.score = nlp / static_cast<double>(next.size());
        out.push_back(k);
      } else {
        walk(next, nlp);
      }
    }
  };
  walk({}, 0.0);
  std::map<std::string, ScoredKeyphrase> best;
  for (auto& k : out) {
    if (k.words.empty()) continue;
    auto key = join(k.words);
    if (!best.count(key) || best[key].score < k.score) best[key] = k;
  }
  std::vector<ScoredKeyphrase> ranked;
  for (auto& [_, k] : best) ranked.push_back(k);
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.score != b.score ? a.score > b.score : join(a.words) < join(b.words);
  });
  return ranked;
}

}  // namespace

TEST_CASE("beam search with a full beam equals exhaustive enumeration") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ToyStepper st;
    st.seed = seed;
    auto beam = beam_search(st, {216, 3});
    auto oracle = exhaustive(st, 3);
    REQUIRE(beam.size() >= 5);
    REQUIRE(beam.size() == oracle.size());
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(beam[i].words == oracle[i].words);
      CHECK(std::abs(beam[i].score - oracle[i].score) < 1e-9);
    }
  }
}

TEST_CASE("beam search output is sorted and duplicate free") {
  ToyStepper st;
  st.seed = 99;
  auto beam = beam_search(st, {10, 6});
  std::set<std::string> seen;
  for (std::size_t i = 0; i < beam.size(); ++i) {
    CHECK(seen.insert(join(beam[i].words)).second);
    CHECK_FALSE(beam[i].words.empty());
    if (i > 0) CHECK(beam[i - 1].score >= beam[i].score);
  }
  CHECK_THROWS_AS(beam_search(st, {0, 6}), ConfigError);
}

namespace {

// Emits "a" with probability 1, then EOS with probability 1.
struct CertainStepper {
  using State = int;
  struct Step {
    State state;
    Eigen::RowVectorXd probs;
  };
  Words names{"<pad>", "<unk>", "<bos>", "<eos>", "a"};
  State start() const { return 0; }
  int bos() const { return 2; }
  int eos() const { return 3; }
  const std::string& word(int id) const { return names[static_cast<std::size_t>(id)]; }
  Step advance(State s, int) const {
    Eigen::RowVectorXd p = Eigen::RowVectorXd::Zero(5);
    p(s == 0 ? 4 : 3) = 1.0;
    return {s + 1, p};
  }
};

}  // namespace

TEST_CASE("certain model yields one keyphrase with score zero") {
  CertainStepper st;
  auto beam = beam_search(st, {10, 6});
  REQUIRE(beam.size() == 1);
  CHECK(beam[0].words == Words{"a"});
  CHECK(beam[0].score == 0.0);
  CHECK(BeamOptions{}.beam_size == 10);
}

TEST_CASE("rank_keyphrases keeps the better duplicate and orders ties by text") {
  auto out = rank_keyphrases({{{"b"}, -1.0}, {{"a"}, -1.0}, {{"b"}, -0.5}, {{}, 0.0}, {{"c", "d"}, -2.0}});
  REQUIRE(out.size() == 3);
  CHECK(out[0].words == Words{"b"});
  CHECK(out[0].score == -0.5);
  CHECK(out[1].words == Words{"a"});
  CHECK(out[2].words == Words{"c", "d"});
}

TEST_CASE("decode session distributions are normalised over the extended support") {
  auto corpus = mkp::testing::tiny_corpus();
  auto model = mkp::testing::tiny_model(corpus);
  MultiModalSample sample = corpus.test[0];
  sample.source.push_back("unseenword");
  DecodeSession<double> session(model, sample);
  const int ext = session.extended().size();
  CHECK(ext > model.vocab().size());
  auto state = session.start();
  int token = session.bos();
  for (int step = 0; step < 6; ++step) {
    auto next = session.advance(state, token);
    CHECK(next.probs.size() == ext);
    CHECK(std::abs(next.probs.sum() - 1.0) < 1e-12);
    CHECK((next.probs.array() >= 0).all());
    state = next.state;
    token = 5 + step;
  }
  auto ranked = beam_search(session, {10, 6});
  CHECK_FALSE(ranked.empty());
  auto again = predict(model, sample, {10, 6});
  CHECK(again == ranked);
}
