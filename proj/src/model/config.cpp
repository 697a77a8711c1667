#include "mkp/model/config.hpp"

#include "mkp/core/error.hpp"

namespace mkp {

const std::vector<std::string>& Ablation::variant_names() {
  static const std::vector<std::string> names = {
      "full",         "no_itm_loss",  "no_irtm_loss",    "no_cla_loss",     "no_entities",
      "no_ocr",       "no_itm_match", "no_region_match", "no_filter_module"};
  return names;
}

Ablation Ablation::variant(std::string_view name) {
  Ablation a;
  if (name == "full") return a;
  if (name == "no_itm_loss") a.no_itm_loss = true;
  else if (name == "no_irtm_loss") a.no_irtm_loss = true;
  else if (name == "no_cla_loss") a.no_cla_loss = true;
  else if (name == "no_entities") a.no_entities = true;
  else if (name == "no_ocr") a.no_ocr = true;
  else if (name == "no_itm_match") a.no_itm_match = true;
  else if (name == "no_region_match") a.no_region_match = true;
  else if (name == "no_filter_module") a.no_filter_module = true;
  else throw ConfigError("unknown ablation variant: " + std::string(name));
  return a;
}

std::string Ablation::name() const {
  std::string out;
  auto add = [&](bool flag, const char* n) {
    if (!flag) return;
    if (!out.empty()) out += "+";
    out += n;
  };
  add(no_itm_loss, "no_itm_loss");
  add(no_irtm_loss, "no_irtm_loss");
  add(no_cla_loss, "no_cla_loss");
  add(no_entities, "no_entities");
  add(no_ocr, "no_ocr");
  add(no_itm_match, "no_itm_match");
  add(no_region_match, "no_region_match");
  add(no_filter_module, "no_filter_module");
  return out.empty() ? "full" : out;
}

void ModelConfig::validate() const {
  if (vocab_size <= 0) throw ConfigError("vocab_size must be positive");
  if (num_labels < 2) throw ConfigError("the classifier needs at least two labels");
  if (d_emb <= 0 || d1 <= 0 || d2 <= 0 || d_corr_ffn <= 0 || n_heads <= 0) {
    throw ConfigError("model dimensions must be positive");
  }
  if (d1 % 2 != 0) throw ConfigError("d1 must be even (two encoder directions)");
  if (d1 % n_heads != 0) throw ConfigError("d1 must be divisible by n_heads");
  if (top_k < 1) throw ConfigError("top_k must be at least 1");
  if (!(lambda_c >= 0.0 && lambda_c <= 1.0)) throw ConfigError("lambda_c must lie in [0, 1]");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (max_input_len < 3) throw ConfigError("max_input_len must be at least 3");
  if (max_decode_len < 1) throw ConfigError("max_decode_len must be at least 1");
  if (forced_switch && !(*forced_switch >= 0.0 && *forced_switch <= 1.0)) {
    throw ConfigError("forced switch must lie in [0, 1]");
  }
}

}  // namespace mkp
