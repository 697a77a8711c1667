#include "mkp/model/text_encoder.hpp"

#include "mkp/core/error.hpp"

#include <fstream>
#include <sstream>

namespace mkp {

template <typename S>
void TextEncoderWeights<S>::declare(ParameterStore<S>& store, int vocab_size, int d_emb, int d1,
                                    double range, std::mt19937_64& rng) {
  store.add_uniform("text.word_embedding", vocab_size, d_emb, range, rng);
  store.add_uniform("text.type_embedding", kNumSegments, d_emb, range, rng);
  GruWeights<S>::declare(store, "text.gru_fwd", d_emb, d1 / 2, range, rng);
  GruWeights<S>::declare(store, "text.gru_bwd", d_emb, d1 / 2, range, rng);
}

template <typename S>
TextEncoderWeights<S> TextEncoderWeights<S>::bind(ParameterStore<S>& store) {
  TextEncoderWeights w;
  w.word_embedding = &store.get("text.word_embedding");
  w.type_embedding = &store.get("text.type_embedding");
  w.forward = GruWeights<S>::bind(store, "text.gru_fwd");
  w.backward = GruWeights<S>::bind(store, "text.gru_bwd");
  return w;
}

template <typename S>
Var<S> embed(Graph<S>& g, const TextEncoderWeights<S>& w, const std::vector<int>& token_ids,
             const std::vector<int>& type_ids, const ForwardContext& ctx) {
  if (token_ids.size() != type_ids.size()) {
    throw ShapeError("embed: token and type sequences differ in length");
  }
  for (int t : type_ids) {
    if (t < 0 || t >= kNumSegments) throw IndexError("embed: type id " + std::to_string(t));
  }
  Var<S> words = embedding(g, *w.word_embedding, token_ids);
  Var<S> types = embedding(g, *w.type_embedding, type_ids);
  return dropout(add(words, types), ctx);
}

template <typename S>
TextEncoding<S> encode_text(Graph<S>& g, const TextEncoderWeights<S>& w, Var<S> embedded,
                            const ForwardContext& ctx) {
  const Eigen::Index n = embedded.rows();
  if (n == 0) throw EmptyInput("encode_text: zero-length input");
  const int h = w.forward.hidden;

  auto run = [&](const GruWeights<S>& gru, bool reverse) {
    Var<S> proj = add_row(embedded * g.parameter(*gru.input), g.parameter(*gru.input_bias));
    std::vector<Var<S>> states(static_cast<std::size_t>(n));
    Var<S> state = g.constant(Matrix<S>::Zero(1, h));
    for (Eigen::Index k = 0; k < n; ++k) {
      const Eigen::Index i = reverse ? n - 1 - k : k;
      state = gru_step(g, gru, slice_rows(proj, i, 1), state);
      states[static_cast<std::size_t>(i)] = state;
    }
    return n == 1 ? states.front() : concat_rows(states);
  };

  Var<S> H = concat_cols(std::vector<Var<S>>{run(w.forward, false), run(w.backward, true)});
  H = dropout(H, ctx);
  return {H, maxpool_columns(H)};
}

template <typename S>
std::size_t load_pretrained_embeddings(Parameter<S>& table, const Vocabulary& vocab,
                                       const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embedding file " + path);
  std::string line;
  std::size_t line_no = 0;
  std::size_t loaded = 0;
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string word;
    if (!(fields >> word)) continue;
    values.clear();
    double v;
    while (fields >> v) values.push_back(v);
    if (static_cast<Eigen::Index>(values.size()) != table.value.cols()) {
      throw ParseError(line_no, "expected " + std::to_string(table.value.cols()) + " values");
    }
    auto id = vocab.find(word);
    if (!id) continue;
    for (std::size_t j = 0; j < values.size(); ++j) {
      table.value(*id, static_cast<Eigen::Index>(j)) = static_cast<S>(values[j]);
    }
    ++loaded;
  }
  return loaded;
}

#define MKP_INSTANTIATE_TEXT(S)                                                               \
  template struct TextEncoderWeights<S>;                                                      \
  template Var<S> embed(Graph<S>&, const TextEncoderWeights<S>&, const std::vector<int>&,     \
                        const std::vector<int>&, const ForwardContext&);                      \
  template TextEncoding<S> encode_text(Graph<S>&, const TextEncoderWeights<S>&, Var<S>,       \
                                       const ForwardContext&);                                \
  template std::size_t load_pretrained_embeddings(Parameter<S>&, const Vocabulary&,           \
                                                  const std::string&);

MKP_INSTANTIATE_TEXT(float)
MKP_INSTANTIATE_TEXT(double)
MKP_INSTANTIATE_TEXT(long double)

}  // namespace mkp
