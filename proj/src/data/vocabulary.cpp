#include "mkp/data/vocabulary.hpp"

#include "mkp/core/error.hpp"

#include <algorithm>
#include <array>
#include <map>

namespace mkp {

namespace {

const std::array<std::string, Vocabulary::kNumSpecials> kSpecials = {"<pad>", "<unk>", "<bos>",
                                                                     "<eos>", "<seq>"};

bool is_special(const std::string& w) {
  return std::find(kSpecials.begin(), kSpecials.end(), w) != kSpecials.end();
}

}  // namespace

const std::string& Vocabulary::special_word(int id) {
  if (id < 0 || id >= kNumSpecials) throw IndexError("not a special token id");
  return kSpecials[static_cast<std::size_t>(id)];
}

Vocabulary::Vocabulary() {
  for (const auto& s : kSpecials) append(s);
}

void Vocabulary::append(const std::string& word) {
  ids_.emplace(word, static_cast<int>(words_.size()));
  words_.push_back(word);
}

Vocabulary Vocabulary::build(const std::vector<MultiModalSample>& corpus, std::size_t max_size) {
  if (corpus.empty()) throw EmptyCorpus("cannot build a vocabulary from an empty corpus");
  if (max_size < 1) throw ConfigError("vocabulary max_size must be at least 1");
  std::map<std::string, std::size_t> counts;
  auto count = [&](const Words& ws) {
    for (const auto& w : ws) {
      if (!is_special(w)) ++counts[w];
    }
  };
  for (const auto& s : corpus) {
    count(s.source);
    count(s.ocr);
    for (const auto& e : s.entities) count(e);
    for (const auto& k : s.keyphrases) count(k);
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  // counts is ordered by word, so a stable sort on frequency keeps ties ascending.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > max_size) ranked.resize(max_size);
  Vocabulary v;
  for (const auto& [w, c] : ranked) v.append(w);
  return v;
}

Vocabulary Vocabulary::from_words(const Words& regular_words) {
  Vocabulary v;
  for (const auto& w : regular_words) {
    if (is_special(w) || v.ids_.count(w)) throw ConfigError("duplicate or reserved vocabulary word: " + w);
    v.append(w);
  }
  return v;
}

std::optional<int> Vocabulary::find(std::string_view word) const {
  auto it = ids_.find(std::string(word));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

int Vocabulary::id(std::string_view word) const { return find(word).value_or(kUnk); }

const std::string& Vocabulary::word(int id) const {
  if (id < 0 || id >= size()) throw IndexError("vocabulary id out of range: " + std::to_string(id));
  return words_[static_cast<std::size_t>(id)];
}

Words Vocabulary::regular_words() const {
  return Words(words_.begin() + kNumSpecials, words_.end());
}

}  // namespace mkp
