#include "mkp/eval/metrics.hpp"

#include "mkp/core/error.hpp"
#include "mkp/data/text.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <unordered_set>

namespace mkp {

namespace {

std::string normalize(const Words& phrase) {
  Words words;
  for (const auto& w : phrase) {
    for (auto& t : tokenize(w)) words.push_back(std::move(t));
  }
  return join(words);
}

std::unordered_set<std::string> gold_set(const std::vector<Words>& gold) {
  std::unordered_set<std::string> out;
  for (const auto& g : gold) {
    std::string n = normalize(g);
    if (!n.empty()) out.insert(std::move(n));
  }
  return out;
}

}  // namespace

std::vector<std::string> normalize_predictions(const std::vector<Words>& preds) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& p : preds) {
    std::string n = normalize(p);
    if (!n.empty() && seen.insert(n).second) out.push_back(std::move(n));
  }
  return out;
}

double f1_at_k(const std::vector<Words>& preds, const std::vector<Words>& gold, int k) {
  if (k < 1) throw ConfigError("f1_at_k needs k >= 1");
  const auto truth = gold_set(gold);
  const auto ranked = normalize_predictions(preds);
  if (truth.empty() || ranked.empty()) return 0.0;
  const std::size_t top = std::min(static_cast<std::size_t>(k), ranked.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < top; ++i) hits += truth.count(ranked[i]);
  if (hits == 0) return 0.0;
  // 2PR / (P + R) reduces to 2 hits / (top + |gold|), one rounding.
  return static_cast<double>(2 * hits) / static_cast<double>(top + truth.size());
}

double map_at_5(const std::vector<Words>& preds, const std::vector<Words>& gold) {
  const auto truth = gold_set(gold);
  const auto ranked = normalize_predictions(preds);
  if (truth.empty()) return 0.0;
  // Precisions in units of 1/60 (lcm of 1..5) stay integral.
  std::size_t total = 0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < std::min<std::size_t>(5, ranked.size()); ++r) {
    if (truth.count(ranked[r])) {
      ++hits;
      total += hits * 60 / (r + 1);
    }
  }
  return static_cast<double>(total) /
         static_cast<double>(60 * std::min<std::size_t>(5, truth.size()));
}

std::string MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["f1@1"] = f1_at_1;
  j["f1@3"] = f1_at_3;
  j["map@5"] = map_at_5;
  j["n"] = n;
  return j.dump();
}

void MetricsReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  out << "index,f1@1,f1@3,map@5\n";
  for (const auto& s : per_sample) {
    out << s.index << ',' << s.f1_at_1 << ',' << s.f1_at_3 << ',' << s.map_at_5 << '\n';
  }
}

MetricsReport score_predictions(const std::vector<std::vector<Words>>& predictions,
                                const std::vector<MultiModalSample>& dataset) {
  if (predictions.size() != dataset.size()) {
    throw ShapeError("predictions cover " + std::to_string(predictions.size()) + " samples, dataset has " +
                     std::to_string(dataset.size()));
  }
  MetricsReport report;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (gold_set(dataset[i].keyphrases).empty()) {
      std::clog << "warning: sample " << i << " has no gold keyphrases, skipped\n";
      ++report.skipped;
      continue;
    }
    SampleScore s{i, f1_at_k(predictions[i], dataset[i].keyphrases, 1),
                  f1_at_k(predictions[i], dataset[i].keyphrases, 3),
                  map_at_5(predictions[i], dataset[i].keyphrases)};
    report.f1_at_1 += s.f1_at_1;
    report.f1_at_3 += s.f1_at_3;
    report.map_at_5 += s.map_at_5;
    report.per_sample.push_back(s);
  }
  report.n = report.per_sample.size();
  if (report.n > 0) {
    const double n = static_cast<double>(report.n);
    report.f1_at_1 /= n;
    report.f1_at_3 /= n;
    report.map_at_5 /= n;
  }
  return report;
}

template <typename S>
std::vector<std::vector<Words>> decode_dataset(const Model<S>& model,
                                               const std::vector<MultiModalSample>& dataset,
                                               const BeamOptions& opts) {
  std::vector<std::vector<Words>> out;
  out.reserve(dataset.size());
  for (const auto& sample : dataset) {
    std::vector<Words> phrases;
    for (auto& k : predict(model, sample, opts)) phrases.push_back(std::move(k.words));
    out.push_back(std::move(phrases));
  }
  return out;
}

template std::vector<std::vector<Words>> decode_dataset(const Model<float>&,
                                                        const std::vector<MultiModalSample>&,
                                                        const BeamOptions&);
template std::vector<std::vector<Words>> decode_dataset(const Model<double>&,
                                                        const std::vector<MultiModalSample>&,
                                                        const BeamOptions&);

}  // namespace mkp
