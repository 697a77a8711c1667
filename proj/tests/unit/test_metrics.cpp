#include <doctest.h>

#include "mkp/core/error.hpp"
#include "mkp/eval/metrics.hpp"
#include "support/metric_reference.hpp"

#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <random>

using namespace mkp;

namespace {

std::vector<Words> phrases(std::initializer_list<const char*> xs) {
  std::vector<Words> out;
  for (const char* x : xs) out.push_back({x});
  return out;
}

std::vector<Words> random_phrases(std::mt19937_64& rng, int max_count) {
  std::uniform_int_distribution<int> count(0, max_count), word(0, 7), len(1, 2);
  std::vector<Words> out(static_cast<std::size_t>(count(rng)));
  for (auto& p : out) {
    for (int i = len(rng); i > 0; --i) p.push_back("k" + std::to_string(word(rng)));
  }
  return out;
}

}  // namespace

TEST_CASE("hand-computed F1 and MAP") {
  CHECK(f1_at_k(phrases({"a"}), phrases({"a", "b"}), 1) == doctest::Approx(2.0 / 3).epsilon(1e-15));
  CHECK(f1_at_k(phrases({"a", "b"}), phrases({"b", "a"}), 2) == 1.0);
  CHECK(f1_at_k(phrases({"c", "d"}), phrases({"a", "b"}), 3) == 0.0);
  CHECK(map_at_5(phrases({"a", "x"}), phrases({"a"})) == 1.0);
  CHECK(map_at_5(phrases({"b", "a", "c", "d", "e"}), phrases({"a"})) == 0.5);
  CHECK(map_at_5(phrases({"a", "c", "b"}), phrases({"a", "b"})) == doctest::Approx(5.0 / 6).epsilon(1e-15));
}

TEST_CASE("short prediction lists are not penalised in precision") {
  // one correct prediction, k = 3: P = 1/1, R = 1/2
  CHECK(f1_at_k(phrases({"a"}), phrases({"a", "b"}), 3) == doctest::Approx(2.0 / 3).epsilon(1e-15));
  CHECK(f1_at_k({}, phrases({"a"}), 1) == 0.0);
  CHECK_THROWS_AS(f1_at_k({}, phrases({"a"}), 0), ConfigError);
}

TEST_CASE("matching lowercases, collapses whitespace and ignores duplicate predictions") {
  std::vector<Words> preds{{"Hot", "Dog"}, {"hot  dog"}, {"cat"}};
  std::vector<Words> gold{{"hot", "dog"}, {"cat"}};
  CHECK(normalize_predictions(preds) == std::vector<std::string>{"hot dog", "cat"});
  CHECK(f1_at_k(preds, gold, 2) == 1.0);
}

TEST_CASE("metrics match the brute-force reference on random cases") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    auto preds = random_phrases(rng, 8);
    auto gold = random_phrases(rng, 4);
    for (int k : {1, 3, 5}) {
      CHECK(std::abs(f1_at_k(preds, gold, k) - mkp::testing::reference_f1(preds, gold, k)) < 1e-12);
    }
    CHECK(std::abs(map_at_5(preds, gold) - mkp::testing::reference_map5(preds, gold)) < 1e-12);
  }
}

TEST_CASE("metric invariances") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    auto preds = random_phrases(rng, 8);
    auto gold = random_phrases(rng, 4);
    const double f3 = f1_at_k(preds, gold, 3);
    const double m5 = map_at_5(preds, gold);
    CHECK(f3 >= 0.0);
    CHECK(f3 <= 1.0);
    CHECK(m5 >= 0.0);
    CHECK(m5 <= 1.0);
    auto uniq = normalize_predictions(preds);
    if (uniq.size() >= 6) {
      // permuting below rank 5 leaves MAP@5 alone
      std::vector<Words> shuffled;
      for (const auto& u : uniq) shuffled.push_back({u});
      std::shuffle(shuffled.begin() + 5, shuffled.end(), rng);
      CHECK(map_at_5(shuffled, gold) == m5);
      // permuting inside the top 3 leaves F1@3 alone
      std::shuffle(shuffled.begin(), shuffled.begin() + 3, rng);
      CHECK(f1_at_k(shuffled, gold, 3) == f3);
    }
  }
}

TEST_CASE("score_predictions averages and skips empty gold") {
  std::vector<MultiModalSample> data(3);
  data[0].keyphrases = phrases({"a"});
  data[1].keyphrases = phrases({"a", "b"});
  std::vector<std::vector<Words>> preds{phrases({"a"}), phrases({"a", "c", "b"}), phrases({"z"})};
  MetricsReport r = score_predictions(preds, data);
  CHECK(r.n == 2);
  CHECK(r.skipped == 1);
  CHECK(r.f1_at_1 == doctest::Approx((1.0 + 2.0 / 3) / 2).epsilon(1e-15));
  CHECK(r.map_at_5 == doctest::Approx((1.0 + 5.0 / 6) / 2).epsilon(1e-15));
  auto j = nlohmann::json::parse(r.to_json());
  CHECK(j.size() == 4);
  CHECK(j["n"] == 2);
  CHECK(j.contains("f1@1"));
  CHECK(j.contains("f1@3"));
  CHECK(j.contains("map@5"));
  const std::string path = "metrics_test.csv";
  r.write_csv(path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "index,f1@1,f1@3,map@5");
  std::remove(path.c_str());
  CHECK_THROWS_AS(score_predictions({}, data), ShapeError);
}

TEST_CASE("perfect single-keyphrase corpus scores one") {
  std::vector<MultiModalSample> data(4);
  std::vector<std::vector<Words>> preds;
  for (int i = 0; i < 4; ++i) {
    data[static_cast<std::size_t>(i)].keyphrases = {{"kp" + std::to_string(i)}};
    preds.push_back({{"kp" + std::to_string(i)}, {"other"}});
  }
  MetricsReport r = score_predictions(preds, data);
  CHECK(r.f1_at_1 == 1.0);
  CHECK(r.map_at_5 == 1.0);
}
