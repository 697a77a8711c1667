#pragma once

#include "mkp/data/encode.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mkp {

// Component toggles mirroring the ablation variants. Each flag is
// independent; the helpers below resolve what the model actually runs.
struct Ablation {
  bool no_itm_loss = false;
  bool no_irtm_loss = false;
  bool no_cla_loss = false;
  bool no_entities = false;
  bool no_ocr = false;
  bool no_itm_match = false;      // drops the s_c smoothing term and the matching loss
  bool no_region_match = false;   // drops region gating and the correlation loss
  bool no_filter_module = false;  // drops matching, correlation and gating entirely

  // Names accepted by variant(); "full" is the unablated model.
  static const std::vector<std::string>& variant_names();
  static Ablation variant(std::string_view name);
  std::string name() const;

  bool filter_module() const { return !no_filter_module; }
  bool match_smoothing() const { return filter_module() && !no_itm_match; }
  bool region_gating() const { return filter_module() && !no_region_match; }
  bool itm_loss() const { return filter_module() && !no_itm_match && !no_itm_loss; }
  bool irtm_loss() const { return region_gating() && !no_irtm_loss; }
  bool cla_loss() const { return !no_cla_loss; }
  // Without the classification loss the decoder copies from the input only.
  bool classifier_copy() const { return !no_cla_loss; }
  TextLayout layout() const { return TextLayout{!no_ocr, !no_entities}; }

  friend bool operator==(const Ablation&, const Ablation&) = default;
};

struct ModelConfig {
  int vocab_size = 0;   // filled from the vocabulary
  int num_labels = 0;   // filled from the label set
  int d_emb = 200;
  int d1 = 300;         // concatenated bidirectional size, d1/2 per direction
  int d2 = 128;         // shared text/region space
  int n_heads = 4;
  int d_corr_ffn = 64;  // hidden width of the 49->h->49 correlation FFN
  int d_mlp = 0;        // classifier hidden width; 0 -> d1
  int d_att = 0;        // decoder attention width; 0 -> d1
  int top_k = 5;        // classifier predictions offered to the copy mechanism
  double lambda_c = 0.5;
  double dropout = 0.1;
  double init_range = 0.1;
  double layernorm_eps = 1e-5;
  double logit_clamp = 30.0;
  std::size_t max_input_len = kDefaultMaxInputLength;
  int max_decode_len = 6;
  Ablation ablation;

  // Test hooks.
  bool corr_ffn_bypass = false;          // correlation FFN acts as identity
  std::optional<double> forced_switch;   // fixes the generation switch lambda

  int mlp_width() const { return d_mlp > 0 ? d_mlp : d1; }
  int attention_width() const { return d_att > 0 ? d_att : d1; }
  void validate() const;
};

}  // namespace mkp
