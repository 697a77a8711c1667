#include "mkp/data/synthetic.hpp"

#include "mkp/core/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace mkp {

namespace {

struct Topic {
  Words pool;
  Words keyphrase;
  Eigen::RowVectorXf mean;
};

struct World {
  std::vector<Topic> topics;
  Words filler;
  std::vector<Eigen::RowVectorXf> distractors;
};

std::string word_name(int index) {
  std::string s = std::to_string(index);
  return "w" + std::string(3 - std::min<std::size_t>(3, s.size()), '0') + s;
}

Eigen::RowVectorXf gaussian_row(std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  Eigen::RowVectorXf v(kFeatureDim);
  for (int i = 0; i < kFeatureDim; ++i) v(i) = static_cast<float>(n(rng));
  return v;
}

World make_world(const SyntheticSpec& spec, std::mt19937_64& rng) {
  World w;
  const int per_topic = std::max(4, static_cast<int>(spec.vocab_size * 0.6) / spec.n_topics);
  std::vector<int> ids(static_cast<std::size_t>(spec.vocab_size));
  std::iota(ids.begin(), ids.end(), 0);
  std::shuffle(ids.begin(), ids.end(), rng);
  std::size_t at = 0;
  for (int t = 0; t < spec.n_topics; ++t) {
    Topic topic;
    for (int k = 0; k < per_topic; ++k) topic.pool.push_back(word_name(ids[at++]));
    // Alternate one- and two-word keyphrases.
    topic.keyphrase.push_back(topic.pool[0]);
    if (t % 2 == 1) topic.keyphrase.push_back(topic.pool[1]);
    topic.mean = gaussian_row(rng, spec.cluster_scale);
    w.topics.push_back(std::move(topic));
  }
  for (; at < ids.size(); ++at) w.filler.push_back(word_name(ids[at]));
  for (int d = 0; d < spec.n_distractors; ++d) w.distractors.push_back(gaussian_row(rng, spec.cluster_scale));
  return w;
}

template <typename T>
const T& pick(const std::vector<T>& v, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> d(0, v.size() - 1);
  return v[d(rng)];
}

bool coin(std::mt19937_64& rng, double p) {
  return std::bernoulli_distribution(p)(rng);
}

MultiModalSample make_sample(const SyntheticSpec& spec, const World& w, std::mt19937_64& rng) {
  const int base = static_cast<int>(std::floor(spec.avg_keyphrases));
  int n_kp = base + (coin(rng, spec.avg_keyphrases - base) ? 1 : 0);
  n_kp = std::clamp(n_kp, 1, spec.n_topics);
  std::vector<int> order(static_cast<std::size_t>(spec.n_topics));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(static_cast<std::size_t>(n_kp));

  MultiModalSample s;
  std::uniform_int_distribution<int> len(5, 10);
  const int n_filler = len(rng);
  for (int i = 0; i < n_filler; ++i) s.source.push_back(pick(w.filler, rng));
  for (int t : order) {
    const Topic& topic = w.topics[static_cast<std::size_t>(t)];
    if (coin(rng, spec.source_topic_prob)) {
      // Sometimes the keyphrase itself appears in the text, as hashtags often do.
      if (coin(rng, 0.5)) {
        s.source.insert(s.source.end(), topic.keyphrase.begin(), topic.keyphrase.end());
      }
      s.source.push_back(pick(topic.pool, rng));
      s.source.push_back(pick(topic.pool, rng));
    }
    if (coin(rng, spec.ocr_topic_prob)) s.ocr.push_back(pick(topic.pool, rng));
    if (coin(rng, spec.entity_topic_prob)) {
      Words entity{pick(topic.pool, rng)};
      if (coin(rng, 0.5)) entity.push_back(pick(topic.pool, rng));
      s.entities.push_back(std::move(entity));
    }
    s.keyphrases.push_back(topic.keyphrase);
  }
  std::shuffle(s.source.begin(), s.source.end(), rng);
  if (s.ocr.empty() && coin(rng, 0.5)) s.ocr.push_back(pick(w.filler, rng));
  if (coin(rng, 0.3)) s.entities.push_back(Words{pick(w.filler, rng)});
  canonicalize_keyphrases(s.keyphrases);

  // Grid rows: choose noise positions, assign the rest round-robin to topics.
  const int n_noise = static_cast<int>(std::lround(spec.noise_region_fraction * kGridRegions));
  std::vector<int> rows(kGridRegions);
  std::iota(rows.begin(), rows.end(), 0);
  std::shuffle(rows.begin(), rows.end(), rng);
  FeatureGrid grid(kGridRegions, kFeatureDim);
  for (int i = 0; i < kGridRegions; ++i) {
    const int r = rows[static_cast<std::size_t>(i)];
    const Eigen::RowVectorXf& mean =
        i < n_noise ? pick(w.distractors, rng)
                    : w.topics[static_cast<std::size_t>(order[static_cast<std::size_t>(i - n_noise) % order.size()])].mean;
    grid.row(r) = mean + gaussian_row(rng, spec.row_noise);
  }
  s.features = std::make_shared<const FeatureGrid>(std::move(grid));
  return s;
}

bool disjoint(const std::vector<Words>& a, const std::vector<Words>& b) {
  for (const auto& x : a) {
    if (std::find(b.begin(), b.end(), x) != b.end()) return false;
  }
  return true;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (n_topics < 2) throw ConfigError("synthetic corpus needs at least 2 topics");
  if (!(noise_region_fraction >= 0.0 && noise_region_fraction < 1.0)) {
    throw ConfigError("noise_region_fraction must lie in [0, 1)");
  }
  if (!(avg_keyphrases >= 1.0) || avg_keyphrases > n_topics) {
    throw ConfigError("avg_keyphrases must lie in [1, n_topics]");
  }
  for (double p : {source_topic_prob, ocr_topic_prob, entity_topic_prob}) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("topic probabilities must lie in [0, 1]");
  }
  if (n_samples == 0) throw ConfigError("n_samples must be positive");
  if (vocab_size < 4 * n_topics + 8) throw ConfigError("vocab_size too small for the topic count");
  if (n_distractors < 1) throw ConfigError("n_distractors must be positive");
}

std::vector<MatchingSample> make_matching_pairs(const std::vector<MultiModalSample>& samples,
                                                std::mt19937_64& rng) {
  const std::size_t n = samples.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t positives = (n + 1) / 2;
  std::vector<MatchingSample> out;
  out.reserve(n);
  std::uniform_int_distribution<std::size_t> any(0, n > 1 ? n - 1 : 0);
  for (std::size_t k = 0; k < n; ++k) {
    const MultiModalSample& text = samples[order[k]];
    MatchingSample m;
    m.pair = text;
    m.pair.keyphrases.clear();
    m.label = k < positives ? 1 : 0;
    if (m.label == 0 && n > 1) {
      std::size_t other = order[k];
      for (int attempt = 0; attempt < 32; ++attempt) {
        const std::size_t cand = any(rng);
        if (cand == order[k]) continue;
        other = cand;
        if (disjoint(samples[cand].keyphrases, text.keyphrases)) break;
      }
      if (other == order[k]) other = (order[k] + 1) % n;
      m.pair.features = samples[other].features;
    }
    out.push_back(std::move(m));
  }
  return out;
}

SyntheticCorpus generate_synthetic_corpus(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const World world = make_world(spec, rng);
  const std::size_t fallback = std::max<std::size_t>(8, spec.n_samples / 4);
  const std::size_t n_valid = spec.n_valid ? spec.n_valid : fallback;
  const std::size_t n_test = spec.n_test ? spec.n_test : fallback;
  SyntheticCorpus c;
  for (std::size_t i = 0; i < spec.n_samples; ++i) c.train.push_back(make_sample(spec, world, rng));
  for (std::size_t i = 0; i < n_valid; ++i) c.valid.push_back(make_sample(spec, world, rng));
  for (std::size_t i = 0; i < n_test; ++i) c.test.push_back(make_sample(spec, world, rng));
  c.matching = make_matching_pairs(c.train, rng);
  return c;
}

}  // namespace mkp
