#pragma once

#include "mkp/core/types.hpp"
#include "mkp/data/sample.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mkp {

// Word <-> id mapping. Ids 0..4 are the special tokens; regular words follow
// in descending frequency order.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;
  static constexpr int kSeq = 4;
  static constexpr int kNumSpecials = 5;
  static constexpr std::size_t kDefaultMaxSize = 45000;

  static const std::string& special_word(int id);

  Vocabulary();

  // The max_size most frequent words over every text field (source, OCR,
  // entities, keyphrases); ties broken lexicographically ascending.
  static Vocabulary build(const std::vector<MultiModalSample>& corpus,
                          std::size_t max_size = kDefaultMaxSize);
  // Regular words in id order (specials are implicit).
  static Vocabulary from_words(const Words& regular_words);

  int size() const { return static_cast<int>(words_.size()); }
  std::optional<int> find(std::string_view word) const;
  // UNK when absent.
  int id(std::string_view word) const;
  const std::string& word(int id) const;
  // Regular words only, in id order.
  Words regular_words() const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.words_ == b.words_; }

 private:
  void append(const std::string& word);

  Words words_;
  std::unordered_map<std::string, int> ids_;
};

}  // namespace mkp
