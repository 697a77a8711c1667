#pragma once

#include "mkp/model/classifier.hpp"
#include "mkp/model/config.hpp"
#include "mkp/model/generator.hpp"
#include "mkp/model/image_encoder.hpp"
#include "mkp/model/noise_filter.hpp"
#include "mkp/model/text_encoder.hpp"

#include <cstdint>
#include <memory>

namespace mkp {

// Configuration, vocabulary, label set and parameters of one keyphrase model.
// Every component's parameters are declared regardless of the ablation so that
// checkpoints share one layout.
template <typename S>
class Model {
 public:
  Model(ModelConfig config, Vocabulary vocab, LabelSet labels, std::uint64_t seed);
  // Restores trained parameters; names and shapes must match a fresh model.
  Model(ModelConfig config, Vocabulary vocab, LabelSet labels, ParameterStore<S> params);
  Model(const Model& other);
  Model& operator=(const Model& other);

  const ModelConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  const LabelSet& labels() const { return labels_; }
  ParameterStore<S>& params() { return params_; }
  const ParameterStore<S>& params() const { return params_; }

  TextLayout layout() const { return config_.ablation.layout(); }
  EncodedInput encode(const MultiModalSample& sample) const;
  std::vector<Triplet> triplets(const std::vector<MultiModalSample>& corpus) const;
  CorrelationOptions correlation_options() const;

  TextEncoderWeights<S> text;
  ImageEncoderWeights<S> image;
  NoiseFilterWeights<S> filter;
  ClassifierWeights<S> classifier;
  GeneratorWeights<S> generator;

 private:
  void bind();

  ModelConfig config_;
  Vocabulary vocab_;
  LabelSet labels_;
  ParameterStore<S> params_;
};

// Fills vocab_size and num_labels and validates.
ModelConfig resolve_config(ModelConfig config, const Vocabulary& vocab, const LabelSet& labels);

// Encoder side of one input, up to the classifier.
template <typename S>
struct SampleForward {
  TextEncoding<S> text;
  Var<S> H_I;
  std::optional<MatchResult<S>> match;        // absent without the filter module
  std::optional<CorrelationState<S>> correlation;  // absent without region gating
  Var<S> H_filtered;
  Var<S> H_f;
  Var<S> logits;  // classifier, 1 x |K|
  TopKPredictions<S> top_k;
};

template <typename S>
SampleForward<S> forward_sample(Graph<S>& g, const Model<S>& model, const EncodedInput& input,
                                const FeatureGrid& image, const ForwardContext& ctx = {});

// Matching score alone, for image-text pairs.
template <typename S>
Var<S> forward_match(Graph<S>& g, const Model<S>& model, const EncodedInput& input,
                     const FeatureGrid& image, const ForwardContext& ctx = {});

template <typename S>
DecodeContext<S> make_decode_context(Graph<S>& g, const Model<S>& model,
                                     const SampleForward<S>& fwd, const EncodedInput& input,
                                     const ExtendedVocabulary& extended);

// Copy words offered by the classifier, or none when that branch is off.
template <typename S>
Words copy_words(const Model<S>& model, const SampleForward<S>& fwd);

// Decoder input embedding of an extended id; ids beyond |V| read UNK.
template <typename S>
Var<S> token_embedding(Graph<S>& g, const Model<S>& model, int extended_id);

// Step distributions under teacher forcing; targets end with EOS.
template <typename S>
std::vector<Var<S>> teacher_forced_distributions(Graph<S>& g, const Model<S>& model,
                                                 const SampleForward<S>& fwd,
                                                 const DecodeContext<S>& ctx,
                                                 const std::vector<int>& targets);

// Inference over one input; usable as a beam_search stepper.
template <typename S>
class DecodeSession {
 public:
  using State = Matrix<S>;
  struct Step {
    State state;
    Eigen::RowVectorXd probs;
  };

  DecodeSession(const Model<S>& model, const MultiModalSample& sample);

  State start() const { return s0_; }
  Step advance(const State& state, int token);
  int bos() const { return Vocabulary::kBos; }
  int eos() const { return Vocabulary::kEos; }
  const std::string& word(int id) const { return extended_->word(id); }

  const EncodedInput& input() const { return input_; }
  const ExtendedVocabulary& extended() const { return *extended_; }
  // Region scores (1 x 49) when the model computes them.
  std::optional<Matrix<S>> correlation() const;
  std::optional<S> matching_score() const;
  const SampleForward<S>& forward() const { return fwd_; }

 private:
  const Model<S>* model_;
  EncodedInput input_;
  std::unique_ptr<Graph<S>> graph_;
  SampleForward<S> fwd_;
  std::unique_ptr<ExtendedVocabulary> extended_;
  DecodeContext<S> ctx_;
  State s0_;
  std::size_t mark_ = 0;
};

template <typename S>
std::vector<ScoredKeyphrase> predict(const Model<S>& model, const MultiModalSample& sample,
                                     const BeamOptions& opts);

}  // namespace mkp
