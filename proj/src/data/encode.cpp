#include "mkp/data/encode.hpp"

#include "mkp/core/error.hpp"
#include "mkp/data/text.hpp"

#include <algorithm>

namespace mkp {

namespace {

class InputBuilder {
 public:
  InputBuilder(const Vocabulary& vocab, std::size_t max_len) : vocab_(vocab), max_len_(max_len) {}

  void push(const std::string& word, Segment type, bool delimiter = false) {
    if (out_.token_ids.size() >= max_len_) return;
    int id = Vocabulary::kSeq;
    int copy = Vocabulary::kSeq;
    if (!delimiter) {
      if (auto found = vocab_.find(word)) {
        id = copy = *found;
      } else {
        id = Vocabulary::kUnk;
        auto it = std::find(out_.oov_words.begin(), out_.oov_words.end(), word);
        if (it == out_.oov_words.end()) {
          out_.oov_words.push_back(word);
          it = out_.oov_words.end() - 1;
        }
        copy = vocab_.size() + static_cast<int>(it - out_.oov_words.begin());
      }
    }
    out_.token_ids.push_back(id);
    out_.type_ids.push_back(static_cast<int>(type));
    out_.words.push_back(delimiter ? Vocabulary::special_word(Vocabulary::kSeq) : word);
    out_.copy_ids.push_back(copy);
  }

  void push_all(const Words& words, Segment type) {
    for (const auto& w : words) push(w, type);
  }

  EncodedInput take() { return std::move(out_); }

 private:
  const Vocabulary& vocab_;
  std::size_t max_len_;
  EncodedInput out_;
};

}  // namespace

int EncodedInput::extended_id(const std::string& word, const Vocabulary& vocab) const {
  auto it = std::find(oov_words.begin(), oov_words.end(), word);
  if (it == oov_words.end()) return -1;
  return vocab.size() + static_cast<int>(it - oov_words.begin());
}

EncodedInput concat_input(const MultiModalSample& sample, const Vocabulary& vocab,
                          std::size_t max_len, TextLayout layout) {
  if (max_len < 3) throw ConfigError("max input length must be at least 3");
  InputBuilder b(vocab, max_len);
  b.push_all(sample.source, Segment::kSource);
  if (layout.include_ocr) {
    b.push({}, Segment::kOcr, true);
    b.push_all(sample.ocr, Segment::kOcr);
  }
  if (layout.include_entities) {
    b.push({}, Segment::kEntity, true);
    for (const auto& entity : sample.entities) b.push_all(entity, Segment::kEntity);
  }
  return b.take();
}

EncodedInput keyphrase_input(const std::vector<Words>& keyphrases, const Vocabulary& vocab,
                             std::size_t max_len, TextLayout layout) {
  if (keyphrases.empty()) throw NoTarget("keyphrase set is empty");
  std::vector<Words> sorted = keyphrases;
  std::sort(sorted.begin(), sorted.end(),
            [](const Words& a, const Words& b) { return join(a) < join(b); });
  MultiModalSample text_only;
  for (const auto& k : sorted) text_only.source.insert(text_only.source.end(), k.begin(), k.end());
  return concat_input(text_only, vocab, max_len, layout);
}

std::vector<Triplet> replicate_one2one(const MultiModalSample& sample, const Vocabulary& vocab,
                                       std::size_t max_len, TextLayout layout,
                                       std::size_t sample_index) {
  if (sample.keyphrases.empty()) throw NoTarget("sample has no gold keyphrases");
  auto input = std::make_shared<const EncodedInput>(concat_input(sample, vocab, max_len, layout));
  std::vector<Words> ordered = sample.keyphrases;
  std::sort(ordered.begin(), ordered.end(),
            [](const Words& a, const Words& b) { return join(a) < join(b); });
  auto all = std::make_shared<const std::vector<Words>>(ordered);
  std::vector<Triplet> out;
  out.reserve(ordered.size());
  for (const auto& k : ordered) {
    out.push_back(Triplet{input, sample.features, k, all, sample_index});
  }
  return out;
}

std::vector<Triplet> replicate_corpus(const std::vector<MultiModalSample>& corpus,
                                      const Vocabulary& vocab, std::size_t max_len,
                                      TextLayout layout) {
  std::vector<Triplet> out;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    auto t = replicate_one2one(corpus[i], vocab, max_len, layout, i);
    out.insert(out.end(), std::make_move_iterator(t.begin()), std::make_move_iterator(t.end()));
  }
  return out;
}

std::vector<int> target_ids(const Words& keyphrase, const EncodedInput& input,
                            const Vocabulary& vocab) {
  std::vector<int> ids;
  ids.reserve(keyphrase.size() + 1);
  for (const auto& w : keyphrase) {
    if (auto found = vocab.find(w)) {
      ids.push_back(*found);
    } else {
      const int ext = input.extended_id(w, vocab);
      ids.push_back(ext >= 0 ? ext : Vocabulary::kUnk);
    }
  }
  ids.push_back(Vocabulary::kEos);
  return ids;
}

}  // namespace mkp
