#include "mkp/model/generator.hpp"

#include "mkp/data/text.hpp"

namespace mkp {

template <typename S>
void GeneratorWeights<S>::declare(ParameterStore<S>& store, int vocab_size, int d_emb, int d1,
                                  int d_att, double range, std::mt19937_64& rng) {
  store.add_uniform("gen.init", d1, d1, range, rng);
  store.add_uniform("gen.attention", 2 * d1, d_att, range, rng);
  store.add_uniform("gen.attention_vec", d_att, 1, range, rng);
  GruWeights<S>::declare(store, "gen.gru", d_emb + d1, d1, range, rng);
  store.add_uniform("gen.output", d_emb + 2 * d1, vocab_size, range, rng);
  store.add_uniform("gen.switch", d_emb + 2 * d1, 1, range, rng);
}

template <typename S>
GeneratorWeights<S> GeneratorWeights<S>::bind(ParameterStore<S>& store) {
  GeneratorWeights w;
  w.init = &store.get("gen.init");
  w.attention = &store.get("gen.attention");
  w.attention_vec = &store.get("gen.attention_vec");
  w.gru = GruWeights<S>::bind(store, "gen.gru");
  w.output = &store.get("gen.output");
  w.switch_weight = &store.get("gen.switch");
  return w;
}

template <typename S>
DecoderMemory<S> prepare_memory(Graph<S>& g, const GeneratorWeights<S>& w, Var<S> H_T) {
  if (H_T.rows() == 0) throw EmptyInput("decoder: empty encoder states");
  const Eigen::Index d1 = H_T.cols();
  Var<S> memory_proj = slice_rows(g.parameter(*w.attention), d1, d1);
  return {H_T, H_T * memory_proj};
}

template <typename S>
Var<S> init_decoder(Graph<S>& g, const GeneratorWeights<S>& w, Var<S> M_T) {
  return tanh(M_T * g.parameter(*w.init));
}

template <typename S>
DecoderState<S> decoder_step(Graph<S>& g, const GeneratorWeights<S>& w, Var<S> y_prev_emb,
                             Var<S> s_prev, const DecoderMemory<S>& memory) {
  if (!memory.H.valid() || memory.H.rows() == 0) throw EmptyInput("decoder_step: empty H_T");
  const Eigen::Index d1 = s_prev.cols();
  Var<S> state_proj = s_prev * slice_rows(g.parameter(*w.attention), 0, d1);
  Var<S> scores = tanh(add_row(memory.keys, state_proj)) * g.parameter(*w.attention_vec);
  Var<S> alpha = softmax(transpose(scores));
  Var<S> c = alpha * memory.H;
  Var<S> s = gru_cell(g, w.gru, concat_cols(std::vector<Var<S>>{y_prev_emb, c}), s_prev);
  return {s, c, alpha};
}

template <typename S>
Var<S> readout_features(Var<S> y_prev_emb, Var<S> s, Var<S> c, Var<S> H_f) {
  return concat_cols(std::vector<Var<S>>{y_prev_emb, s, add(c, H_f)});
}

template <typename S>
Var<S> prediction_distribution(Graph<S>& g, const GeneratorWeights<S>& w, Var<S> features) {
  return softmax(features * g.parameter(*w.output));
}

template <typename S>
Var<S> switch_probability(Graph<S>& g, const GeneratorWeights<S>& w, Var<S> features,
                          S logit_clamp, std::optional<double> forced) {
  if (forced) return g.constant(Matrix<S>::Constant(1, 1, static_cast<S>(*forced)));
  return sigmoid(clamp(features * g.parameter(*w.switch_weight), -logit_clamp, logit_clamp));
}

ExtendedVocabulary::ExtendedVocabulary(const Vocabulary& vocab, const EncodedInput& input,
                                       const Words& extra)
    : vocab_(&vocab) {
  auto append = [&](const std::string& word) {
    if (vocab.find(word) || extra_ids_.count(word)) return;
    extra_ids_.emplace(word, vocab.size() + static_cast<int>(extra_.size()));
    extra_.push_back(word);
  };
  for (const auto& w : input.oov_words) append(w);
  for (const auto& w : extra) append(w);
}

std::optional<int> ExtendedVocabulary::find(const std::string& word) const {
  if (auto id = vocab_->find(word)) return id;
  auto it = extra_ids_.find(word);
  if (it == extra_ids_.end()) return std::nullopt;
  return it->second;
}

const std::string& ExtendedVocabulary::word(int id) const {
  if (id < 0 || id >= size()) throw IndexError("extended vocabulary id " + std::to_string(id));
  if (id < vocab_->size()) return vocab_->word(id);
  return extra_[static_cast<std::size_t>(id - vocab_->size())];
}

std::vector<int> ExtendedVocabulary::ids(const Words& words) const {
  std::vector<int> out;
  out.reserve(words.size());
  for (const auto& w : words) {
    auto id = find(w);
    if (!id) throw IndexError("word outside the extended vocabulary: " + w);
    out.push_back(*id);
  }
  return out;
}

template <typename S>
Var<S> copy_distribution(Var<S> alpha, const std::vector<int>& input_ids, Var<S> beta,
                         const std::vector<int>& beta_ids, S lambda_c, int extended_size) {
  if (!(lambda_c >= S(0) && lambda_c <= S(1))) throw ConfigError("lambda_c must lie in [0, 1]");
  Var<S> from_input = scatter_cols(alpha, input_ids, extended_size);
  if (!beta.valid() || beta_ids.empty() || lambda_c == S(1)) return from_input;
  Var<S> from_labels = scatter_cols(beta, beta_ids, extended_size);
  if (lambda_c == S(0)) return from_labels;
  return add(scale(from_input, lambda_c), scale(from_labels, S(1) - lambda_c));
}

template <typename S>
Var<S> mix_distributions(Graph<S>& g, Var<S> p_p, Var<S> p_c, Var<S> lambda) {
  const Eigen::Index extra = p_c.cols() - p_p.cols();
  if (extra < 0) throw ShapeError("mix_distributions: copy support smaller than vocabulary");
  Var<S> padded = extra == 0 ? p_p
                             : concat_cols(std::vector<Var<S>>{p_p, g.constant(Matrix<S>::Zero(1, extra))});
  return add(scale_by(padded, lambda), scale_by(p_c, one_minus(lambda)));
}

template <typename S>
StepOutput<S> generation_step(Graph<S>& g, const GeneratorWeights<S>& w,
                              const DecodeContext<S>& ctx, Var<S> y_prev_emb, Var<S> s_prev) {
  StepOutput<S> out;
  out.state = decoder_step(g, w, y_prev_emb, s_prev, ctx.memory);
  Var<S> features = readout_features(y_prev_emb, out.state.s, out.state.c, ctx.H_f);
  out.p_p = prediction_distribution(g, w, features);
  out.p_c = copy_distribution(out.state.alpha, ctx.input_ids, ctx.beta, ctx.beta_ids, ctx.lambda_c,
                              ctx.extended_size);
  out.lambda = switch_probability(g, w, features, ctx.logit_clamp, ctx.forced_switch);
  out.p = mix_distributions(g, out.p_p, out.p_c, out.lambda);
  return out;
}

bool ranks_before(const ScoredKeyphrase& a, const ScoredKeyphrase& b) {
  if (a.score != b.score) return a.score > b.score;
  return join(a.words) < join(b.words);
}

std::vector<ScoredKeyphrase> rank_keyphrases(std::vector<ScoredKeyphrase> candidates) {
  std::map<std::string, ScoredKeyphrase> best;
  for (auto& c : candidates) {
    if (c.words.empty()) continue;
    std::string key = join(c.words);
    auto it = best.find(key);
    if (it == best.end()) best.emplace(std::move(key), std::move(c));
    else if (c.score > it->second.score) it->second = std::move(c);
  }
  std::vector<ScoredKeyphrase> out;
  out.reserve(best.size());
  for (auto& [_, v] : best) out.push_back(std::move(v));
  std::sort(out.begin(), out.end(), ranks_before);
  return out;
}

#define MKP_INSTANTIATE_GENERATOR(S)                                                          \
  template struct GeneratorWeights<S>;                                                        \
  template DecoderMemory<S> prepare_memory(Graph<S>&, const GeneratorWeights<S>&, Var<S>);    \
  template Var<S> init_decoder(Graph<S>&, const GeneratorWeights<S>&, Var<S>);                \
  template DecoderState<S> decoder_step(Graph<S>&, const GeneratorWeights<S>&, Var<S>, Var<S>, \
                                        const DecoderMemory<S>&);                             \
  template Var<S> readout_features(Var<S>, Var<S>, Var<S>, Var<S>);                           \
  template Var<S> prediction_distribution(Graph<S>&, const GeneratorWeights<S>&, Var<S>);     \
  template Var<S> switch_probability(Graph<S>&, const GeneratorWeights<S>&, Var<S>, S,        \
                                     std::optional<double>);                                  \
  template Var<S> copy_distribution(Var<S>, const std::vector<int>&, Var<S>,                  \
                                    const std::vector<int>&, S, int);                         \
  template Var<S> mix_distributions(Graph<S>&, Var<S>, Var<S>, Var<S>);                       \
  template StepOutput<S> generation_step(Graph<S>&, const GeneratorWeights<S>&,               \
                                         const DecodeContext<S>&, Var<S>, Var<S>);

MKP_INSTANTIATE_GENERATOR(float)
MKP_INSTANTIATE_GENERATOR(double)
MKP_INSTANTIATE_GENERATOR(long double)

}  // namespace mkp
