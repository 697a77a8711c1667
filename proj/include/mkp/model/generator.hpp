#pragma once

#include "mkp/core/error.hpp"
#include "mkp/data/encode.hpp"
#include "mkp/model/layers.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <unordered_map>

namespace mkp {

template <typename S>
struct GeneratorWeights {
  Parameter<S>* init = nullptr;           // W_0: d1 x d1
  Parameter<S>* attention = nullptr;      // W_a: 2d1 x d_att, rows [state; memory]
  Parameter<S>* attention_vec = nullptr;  // V_a: d_att x 1
  GruWeights<S> gru;                      // input [emb; c], hidden d1
  Parameter<S>* output = nullptr;         // W_p: (d_emb + 2d1) x |V|
  Parameter<S>* switch_weight = nullptr;  // W_lambda: (d_emb + 2d1) x 1

  static void declare(ParameterStore<S>& store, int vocab_size, int d_emb, int d1, int d_att,
                      double range, std::mt19937_64& rng);
  static GeneratorWeights bind(ParameterStore<S>& store);
};

// Encoder states with their attention projection, computed once per input.
template <typename S>
struct DecoderMemory {
  Var<S> H;     // |X_T| x d1
  Var<S> keys;  // |X_T| x d_att
};

template <typename S>
struct DecoderState {
  Var<S> s;      // 1 x d1
  Var<S> c;      // 1 x d1
  Var<S> alpha;  // 1 x |X_T|
};

template <typename S>
DecoderMemory<S> prepare_memory(Graph<S>& g, const GeneratorWeights<S>& w, Var<S> H_T);

// s_0 = tanh(M_T W_0).
template <typename S>
Var<S> init_decoder(Graph<S>& g, const GeneratorWeights<S>& w, Var<S> M_T);

// Attention from s_prev, then s = GRU([y_prev_emb; c], s_prev).
template <typename S>
DecoderState<S> decoder_step(Graph<S>& g, const GeneratorWeights<S>& w, Var<S> y_prev_emb,
                             Var<S> s_prev, const DecoderMemory<S>& memory);

// [y_prev_emb; s; c + H_f], shared by the vocabulary and switch heads.
template <typename S>
Var<S> readout_features(Var<S> y_prev_emb, Var<S> s, Var<S> c, Var<S> H_f);

template <typename S>
Var<S> prediction_distribution(Graph<S>& g, const GeneratorWeights<S>& w, Var<S> features);

// sigmoid(clamp(features W_lambda)), or the forced constant when set.
template <typename S>
Var<S> switch_probability(Graph<S>& g, const GeneratorWeights<S>& w, Var<S> features,
                          S logit_clamp = S(30), std::optional<double> forced = std::nullopt);

// Ids 0..|V|-1 are the vocabulary, then the input OOV words in input order,
// then any copy words found in neither.
class ExtendedVocabulary {
 public:
  ExtendedVocabulary(const Vocabulary& vocab, const EncodedInput& input, const Words& extra = {});

  int base_size() const { return vocab_->size(); }
  int size() const { return vocab_->size() + static_cast<int>(extra_.size()); }
  std::optional<int> find(const std::string& word) const;
  const std::string& word(int id) const;
  std::vector<int> ids(const Words& words) const;  // every word must be present

 private:
  const Vocabulary* vocab_;
  Words extra_;
  std::unordered_map<std::string, int> extra_ids_;
};

// p_c = lambda_c * attention mass per word + (1 - lambda_c) * beta mass per word.
// An invalid beta (no copy candidates) leaves the attention term alone.
template <typename S>
Var<S> copy_distribution(Var<S> alpha, const std::vector<int>& input_ids, Var<S> beta,
                         const std::vector<int>& beta_ids, S lambda_c, int extended_size);

// p = lambda * p_p (zero beyond |V|) + (1 - lambda) * p_c.
template <typename S>
Var<S> mix_distributions(Graph<S>& g, Var<S> p_p, Var<S> p_c, Var<S> lambda);

// Everything the decoder reads that stays fixed across steps of one input.
template <typename S>
struct DecodeContext {
  DecoderMemory<S> memory;
  Var<S> H_f;
  std::vector<int> input_ids;  // extended id per input position
  Var<S> beta;                 // may be invalid
  std::vector<int> beta_ids;
  S lambda_c = S(0.5);
  int extended_size = 0;
  S logit_clamp = S(30);
  std::optional<double> forced_switch;
};

template <typename S>
struct StepOutput {
  DecoderState<S> state;
  Var<S> p_p;
  Var<S> p_c;
  Var<S> lambda;
  Var<S> p;  // 1 x extended_size
};

template <typename S>
StepOutput<S> generation_step(Graph<S>& g, const GeneratorWeights<S>& w,
                              const DecodeContext<S>& ctx, Var<S> y_prev_emb, Var<S> s_prev);

struct BeamOptions {
  int beam_size = 10;
  int max_len = 6;  // tokens per hypothesis, EOS included
};

struct ScoredKeyphrase {
  Words words;
  double score = 0.0;  // mean token log-probability

  friend bool operator==(const ScoredKeyphrase&, const ScoredKeyphrase&) = default;
};

// Orders by score descending, ties by the space-joined phrase ascending.
bool ranks_before(const ScoredKeyphrase& a, const ScoredKeyphrase& b);

// Keeps the best score per distinct phrase, drops empty phrases and sorts.
std::vector<ScoredKeyphrase> rank_keyphrases(std::vector<ScoredKeyphrase> candidates);

// Beam search over any stepper providing
//   State start();                          state before any token
//   Step advance(const State&, int token);  Step{State state; Eigen::RowVectorXd probs}
//   int bos() const; int eos() const;
//   const std::string& word(int id) const;
template <typename Stepper>
std::vector<ScoredKeyphrase> beam_search(Stepper& stepper, const BeamOptions& opts) {
  using State = decltype(stepper.start());
  if (opts.beam_size < 1) throw ConfigError("beam_size must be at least 1");
  if (opts.max_len < 1) throw ConfigError("max_len must be at least 1");

  struct Hypothesis {
    std::vector<int> tokens;
    double log_prob = 0.0;
    State state;
    Eigen::RowVectorXd probs;
  };
  struct Candidate {
    double log_prob;
    std::size_t parent;
    int token;
  };

  std::vector<Hypothesis> alive;
  {
    auto first = stepper.advance(stepper.start(), stepper.bos());
    alive.push_back({{}, 0.0, std::move(first.state), std::move(first.probs)});
  }
  std::vector<ScoredKeyphrase> finished;
  std::vector<Candidate> candidates;
  while (!alive.empty()) {
    candidates.clear();
    for (std::size_t h = 0; h < alive.size(); ++h) {
      const auto& probs = alive[h].probs;
      for (Eigen::Index t = 0; t < probs.size(); ++t) {
        if (probs(t) > 0.0) {
          candidates.push_back({alive[h].log_prob + std::log(probs(t)), h, static_cast<int>(t)});
        }
      }
    }
    const auto keep = std::min(candidates.size(), static_cast<std::size_t>(opts.beam_size));
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                      candidates.end(), [](const Candidate& a, const Candidate& b) {
                        if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
                        if (a.parent != b.parent) return a.parent < b.parent;
                        return a.token < b.token;
                      });
    std::vector<Hypothesis> next;
    for (std::size_t i = 0; i < keep; ++i) {
      const Candidate& c = candidates[i];
      const Hypothesis& parent = alive[c.parent];
      std::vector<int> tokens = parent.tokens;
      tokens.push_back(c.token);
      const bool done =
          c.token == stepper.eos() || static_cast<int>(tokens.size()) == opts.max_len;
      if (done) {
        ScoredKeyphrase out;
        for (int t : tokens) {
          if (t != stepper.eos()) out.words.push_back(stepper.word(t));
        }
        out.score = c.log_prob / static_cast<double>(tokens.size());
        finished.push_back(std::move(out));
      } else {
        auto step = stepper.advance(parent.state, c.token);
        next.push_back({std::move(tokens), c.log_prob, std::move(step.state), std::move(step.probs)});
      }
    }
    alive = std::move(next);
  }
  return rank_keyphrases(std::move(finished));
}

}  // namespace mkp
