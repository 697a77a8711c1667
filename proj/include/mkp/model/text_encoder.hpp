#pragma once

#include "mkp/data/encode.hpp"
#include "mkp/model/layers.hpp"

#include <string>

namespace mkp {

template <typename S>
struct TextEncoderWeights {
  Parameter<S>* word_embedding = nullptr;  // |V| x d_emb, shared with the decoder
  Parameter<S>* type_embedding = nullptr;  // 3 x d_emb
  GruWeights<S> forward;
  GruWeights<S> backward;

  static void declare(ParameterStore<S>& store, int vocab_size, int d_emb, int d1, double range,
                      std::mt19937_64& rng);
  static TextEncoderWeights bind(ParameterStore<S>& store);
};

template <typename S>
struct TextEncoding {
  Var<S> H;  // |X_T| x d1, forward states then backward states
  Var<S> M;  // 1 x d1, column-wise max of H
};

// Row i = word_embedding[token_ids[i]] + type_embedding[type_ids[i]].
template <typename S>
Var<S> embed(Graph<S>& g, const TextEncoderWeights<S>& w, const std::vector<int>& token_ids,
             const std::vector<int>& type_ids, const ForwardContext& ctx = {});

template <typename S>
Var<S> embed(Graph<S>& g, const TextEncoderWeights<S>& w, const EncodedInput& input,
             const ForwardContext& ctx = {}) {
  return embed(g, w, input.token_ids, input.type_ids, ctx);
}

template <typename S>
TextEncoding<S> encode_text(Graph<S>& g, const TextEncoderWeights<S>& w, Var<S> embedded,
                            const ForwardContext& ctx = {});

// Loads `word v1 ... vd` lines; returns the number of vocabulary rows set.
// Lines whose width differs from the table are rejected with ParseError.
template <typename S>
std::size_t load_pretrained_embeddings(Parameter<S>& table, const Vocabulary& vocab,
                                       const std::string& path);

}  // namespace mkp
