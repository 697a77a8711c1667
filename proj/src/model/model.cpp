#include "mkp/model/model.hpp"

#include "mkp/core/error.hpp"

namespace mkp {

ModelConfig resolve_config(ModelConfig config, const Vocabulary& vocab, const LabelSet& labels) {
  config.vocab_size = vocab.size();
  config.num_labels = labels.size();
  config.validate();
  return config;
}

namespace {

template <typename S>
ParameterStore<S> declare_all(const ModelConfig& c, std::uint64_t seed) {
  ParameterStore<S> store;
  std::mt19937_64 rng(seed);
  const double r = c.init_range;
  TextEncoderWeights<S>::declare(store, c.vocab_size, c.d_emb, c.d1, r, rng);
  ImageEncoderWeights<S>::declare(store, c.d1, r, rng);
  NoiseFilterWeights<S>::declare(store, c.d1, c.d2, c.d_corr_ffn, r, rng);
  ClassifierWeights<S>::declare(store, c.d1, c.mlp_width(), c.num_labels, r, rng);
  GeneratorWeights<S>::declare(store, c.vocab_size, c.d_emb, c.d1, c.attention_width(), r, rng);
  return store;
}

}  // namespace

template <typename S>
Model<S>::Model(ModelConfig config, Vocabulary vocab, LabelSet labels, std::uint64_t seed)
    : config_(resolve_config(std::move(config), vocab, labels)),
      vocab_(std::move(vocab)),
      labels_(std::move(labels)),
      params_(declare_all<S>(config_, seed)) {
  bind();
}

template <typename S>
Model<S>::Model(ModelConfig config, Vocabulary vocab, LabelSet labels, ParameterStore<S> params)
    : config_(resolve_config(std::move(config), vocab, labels)),
      vocab_(std::move(vocab)),
      labels_(std::move(labels)),
      params_(std::move(params)) {
  const ParameterStore<S> layout = declare_all<S>(config_, 0);
  if (layout.size() != params_.size()) {
    throw ConfigError("parameter table has " + std::to_string(params_.size()) + " entries, expected " +
                      std::to_string(layout.size()));
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& want = layout[i];
    if (!params_.contains(want.name)) throw ConfigError("missing parameter " + want.name);
    const auto& have = params_.get(want.name);
    if (have.value.rows() != want.value.rows() || have.value.cols() != want.value.cols()) {
      throw ShapeError("parameter " + want.name + " has the wrong shape");
    }
  }
  bind();
}

template <typename S>
Model<S>::Model(const Model& other)
    : config_(other.config_), vocab_(other.vocab_), labels_(other.labels_), params_(other.params_) {
  bind();
}

template <typename S>
Model<S>& Model<S>::operator=(const Model& other) {
  if (this == &other) return *this;
  config_ = other.config_;
  vocab_ = other.vocab_;
  labels_ = other.labels_;
  params_ = other.params_;
  bind();
  return *this;
}

template <typename S>
void Model<S>::bind() {
  text = TextEncoderWeights<S>::bind(params_);
  image = ImageEncoderWeights<S>::bind(params_);
  filter = NoiseFilterWeights<S>::bind(params_, config_.n_heads);
  classifier = ClassifierWeights<S>::bind(params_, config_.n_heads);
  generator = GeneratorWeights<S>::bind(params_);
}

template <typename S>
EncodedInput Model<S>::encode(const MultiModalSample& sample) const {
  return concat_input(sample, vocab_, config_.max_input_len, layout());
}

template <typename S>
std::vector<Triplet> Model<S>::triplets(const std::vector<MultiModalSample>& corpus) const {
  return replicate_corpus(corpus, vocab_, config_.max_input_len, layout());
}

template <typename S>
CorrelationOptions Model<S>::correlation_options() const {
  return {config_.ablation.match_smoothing(), config_.corr_ffn_bypass};
}

template <typename S>
SampleForward<S> forward_sample(Graph<S>& g, const Model<S>& model, const EncodedInput& input,
                                const FeatureGrid& image, const ForwardContext& ctx) {
  const ModelConfig& cfg = model.config();
  const Ablation& ab = cfg.ablation;
  SampleForward<S> f;
  f.text = encode_text(g, model.text, embed(g, model.text, input, ctx), ctx);
  f.H_I = project_image(g, model.image, image);
  if (ab.filter_module()) {
    f.match = match_score(g, model.filter, f.text.M, f.H_I, static_cast<S>(cfg.logit_clamp));
    if (ab.region_gating()) {
      f.correlation = correlation_scores(g, model.filter, f.text.M, f.H_I, f.match->s_c,
                                         model.correlation_options());
      f.H_filtered = filter_image(f.correlation->A, f.H_I).H;
    } else {
      f.H_filtered = scale_by(f.H_I, f.match->s_c);
    }
  } else {
    f.H_filtered = f.H_I;
  }
  f.H_f = fuse(g, model.classifier, f.text.M, f.H_filtered, static_cast<S>(cfg.layernorm_eps));
  f.logits = classifier_logits(g, model.classifier, f.H_f);
  f.top_k = top_k_predictions(f.logits, model.labels(), cfg.top_k);
  return f;
}

template <typename S>
Var<S> forward_match(Graph<S>& g, const Model<S>& model, const EncodedInput& input,
                     const FeatureGrid& image, const ForwardContext& ctx) {
  TextEncoding<S> text = encode_text(g, model.text, embed(g, model.text, input, ctx), ctx);
  Var<S> H_I = project_image(g, model.image, image);
  return match_score(g, model.filter, text.M, H_I, static_cast<S>(model.config().logit_clamp)).s_c;
}

template <typename S>
Words copy_words(const Model<S>& model, const SampleForward<S>& fwd) {
  if (!model.config().ablation.classifier_copy()) return {};
  return fwd.top_k.words;
}

template <typename S>
DecodeContext<S> make_decode_context(Graph<S>& g, const Model<S>& model,
                                     const SampleForward<S>& fwd, const EncodedInput& input,
                                     const ExtendedVocabulary& extended) {
  const ModelConfig& cfg = model.config();
  DecodeContext<S> ctx;
  ctx.memory = prepare_memory(g, model.generator, fwd.text.H);
  ctx.H_f = fwd.H_f;
  ctx.input_ids = input.copy_ids;
  ctx.extended_size = extended.size();
  ctx.logit_clamp = static_cast<S>(cfg.logit_clamp);
  ctx.forced_switch = cfg.forced_switch;
  if (cfg.ablation.classifier_copy()) {
    ctx.beta = fwd.top_k.beta;
    ctx.beta_ids = extended.ids(fwd.top_k.words);
    ctx.lambda_c = static_cast<S>(cfg.lambda_c);
  } else {
    ctx.lambda_c = S(1);
  }
  return ctx;
}

template <typename S>
Var<S> token_embedding(Graph<S>& g, const Model<S>& model, int extended_id) {
  const int id = extended_id < model.vocab().size() ? extended_id : Vocabulary::kUnk;
  return embedding(g, *model.text.word_embedding, std::vector<int>{id});
}

template <typename S>
std::vector<Var<S>> teacher_forced_distributions(Graph<S>& g, const Model<S>& model,
                                                 const SampleForward<S>& fwd,
                                                 const DecodeContext<S>& ctx,
                                                 const std::vector<int>& targets) {
  std::vector<Var<S>> out;
  out.reserve(targets.size());
  Var<S> s = init_decoder(g, model.generator, fwd.text.M);
  int prev = Vocabulary::kBos;
  for (int t : targets) {
    StepOutput<S> step = generation_step(g, model.generator, ctx, token_embedding(g, model, prev), s);
    out.push_back(step.p);
    s = step.state.s;
    prev = t;
  }
  return out;
}

template <typename S>
DecodeSession<S>::DecodeSession(const Model<S>& model, const MultiModalSample& sample)
    : model_(&model), input_(model.encode(sample)), graph_(std::make_unique<Graph<S>>(false)) {
  if (!sample.features) throw ShapeError("sample has no image features");
  Graph<S>& g = *graph_;
  fwd_ = forward_sample(g, model, input_, *sample.features);
  extended_ = std::make_unique<ExtendedVocabulary>(model.vocab(), input_, copy_words(model, fwd_));
  ctx_ = make_decode_context(g, model, fwd_, input_, *extended_);
  s0_ = init_decoder(g, model.generator, fwd_.text.M).value();
  mark_ = g.size();
}

template <typename S>
typename DecodeSession<S>::Step DecodeSession<S>::advance(const State& state, int token) {
  Graph<S>& g = *graph_;
  StepOutput<S> step = generation_step(g, model_->generator, ctx_, token_embedding(g, *model_, token),
                                       g.constant(state));
  Step out{step.state.s.value(), step.p.value().template cast<double>()};
  g.truncate(mark_);
  return out;
}

template <typename S>
std::optional<Matrix<S>> DecodeSession<S>::correlation() const {
  if (!fwd_.correlation) return std::nullopt;
  return fwd_.correlation->A.value();
}

template <typename S>
std::optional<S> DecodeSession<S>::matching_score() const {
  if (!fwd_.match) return std::nullopt;
  return fwd_.match->s_c.scalar();
}

template <typename S>
std::vector<ScoredKeyphrase> predict(const Model<S>& model, const MultiModalSample& sample,
                                     const BeamOptions& opts) {
  DecodeSession<S> session(model, sample);
  return beam_search(session, opts);
}

#define MKP_INSTANTIATE_MODEL(S)                                                               \
  template class Model<S>;                                                                     \
  template class DecodeSession<S>;                                                             \
  template SampleForward<S> forward_sample(Graph<S>&, const Model<S>&, const EncodedInput&,    \
                                           const FeatureGrid&, const ForwardContext&);         \
  template Var<S> forward_match(Graph<S>&, const Model<S>&, const EncodedInput&,               \
                                const FeatureGrid&, const ForwardContext&);                    \
  template Words copy_words(const Model<S>&, const SampleForward<S>&);                         \
  template DecodeContext<S> make_decode_context(Graph<S>&, const Model<S>&,                    \
                                                const SampleForward<S>&, const EncodedInput&,  \
                                                const ExtendedVocabulary&);                    \
  template Var<S> token_embedding(Graph<S>&, const Model<S>&, int);                            \
  template std::vector<Var<S>> teacher_forced_distributions(                                   \
      Graph<S>&, const Model<S>&, const SampleForward<S>&, const DecodeContext<S>&,            \
      const std::vector<int>&);                                                                \
  template std::vector<ScoredKeyphrase> predict(const Model<S>&, const MultiModalSample&,      \
                                                const BeamOptions&);

MKP_INSTANTIATE_MODEL(float)
MKP_INSTANTIATE_MODEL(double)
MKP_INSTANTIATE_MODEL(long double)

}  // namespace mkp
