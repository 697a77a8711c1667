#include "mkp/cli/run_config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace mkp {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) throw UsageError("bad value for " + key + ": '" + value + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  std::string v = value;
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw UsageError("bad boolean for " + key + ": '" + value + "'");
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string join_list(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ",") + s;
  return out;
}

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T, typename Access>
Field number(Access access) {
  return {[access](RunConfig& c, const std::string& k, const std::string& v) {
            access(c) = parse_number<T>(k, v);
          },
          [access](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) {
              return format_double(access(const_cast<RunConfig&>(c)));
            } else {
              return std::to_string(access(const_cast<RunConfig&>(c)));
            }
          }};
}

template <typename Access>
Field boolean(Access access) {
  return {[access](RunConfig& c, const std::string& k, const std::string& v) {
            access(c) = parse_bool(k, v);
          },
          [access](const RunConfig& c) -> std::string {
            return access(const_cast<RunConfig&>(c)) ? "true" : "false";
          }};
}

template <typename Access>
Field path(Access access) {
  return {[access](RunConfig& c, const std::string&, const std::string& v) { access(c) = v; },
          [access](const RunConfig& c) { return access(const_cast<RunConfig&>(c)).string(); }};
}

#define MKP_FIELD(kind, type, expr) kind<type>([](RunConfig& c) -> auto& { return expr; })
#define MKP_FLAG(expr) boolean([](RunConfig& c) -> auto& { return expr; })
#define MKP_PATH(expr) path([](RunConfig& c) -> auto& { return expr; })

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      {"d_emb", MKP_FIELD(number, int, c.model.d_emb)},
      {"d1", MKP_FIELD(number, int, c.model.d1)},
      {"d2", MKP_FIELD(number, int, c.model.d2)},
      {"n_heads", MKP_FIELD(number, int, c.model.n_heads)},
      {"d_corr_ffn", MKP_FIELD(number, int, c.model.d_corr_ffn)},
      {"d_mlp", MKP_FIELD(number, int, c.model.d_mlp)},
      {"d_att", MKP_FIELD(number, int, c.model.d_att)},
      {"top_k", MKP_FIELD(number, int, c.model.top_k)},
      {"lambda_c", MKP_FIELD(number, double, c.model.lambda_c)},
      {"dropout", MKP_FIELD(number, double, c.model.dropout)},
      {"init_range", MKP_FIELD(number, double, c.model.init_range)},
      {"logit_clamp", MKP_FIELD(number, double, c.model.logit_clamp)},
      {"max_input_len", MKP_FIELD(number, std::size_t, c.model.max_input_len)},
      {"max_decode_len", MKP_FIELD(number, int, c.model.max_decode_len)},
      {"vocab_max", MKP_FIELD(number, std::size_t, c.vocab_max)},
      {"no_itm_loss", MKP_FLAG(c.model.ablation.no_itm_loss)},
      {"no_irtm_loss", MKP_FLAG(c.model.ablation.no_irtm_loss)},
      {"no_cla_loss", MKP_FLAG(c.model.ablation.no_cla_loss)},
      {"no_entities", MKP_FLAG(c.model.ablation.no_entities)},
      {"no_ocr", MKP_FLAG(c.model.ablation.no_ocr)},
      {"no_itm_match", MKP_FLAG(c.model.ablation.no_itm_match)},
      {"no_region_match", MKP_FLAG(c.model.ablation.no_region_match)},
      {"no_filter_module", MKP_FLAG(c.model.ablation.no_filter_module)},
      {"learning_rate", MKP_FIELD(number, double, c.train.learning_rate)},
      {"batch_size", MKP_FIELD(number, int, c.train.batch_size)},
      {"max_epochs", MKP_FIELD(number, int, c.train.max_epochs)},
      {"patience", MKP_FIELD(number, int, c.train.patience)},
      {"stage", MKP_FIELD(number, int, c.train.stage)},
      {"clip_norm", MKP_FIELD(number, double, c.train.clip_norm)},
      {"beta1", MKP_FIELD(number, double, c.train.beta1)},
      {"beta2", MKP_FIELD(number, double, c.train.beta2)},
      {"adam_epsilon", MKP_FIELD(number, double, c.train.adam_epsilon)},
      {"beam", MKP_FIELD(number, int, c.train.beam_size)},
      {"n_samples", MKP_FIELD(number, std::size_t, c.synth.n_samples)},
      {"n_valid", MKP_FIELD(number, std::size_t, c.synth.n_valid)},
      {"n_test", MKP_FIELD(number, std::size_t, c.synth.n_test)},
      {"synth_vocab_size", MKP_FIELD(number, int, c.synth.vocab_size)},
      {"n_topics", MKP_FIELD(number, int, c.synth.n_topics)},
      {"noise_region_fraction", MKP_FIELD(number, double, c.synth.noise_region_fraction)},
      {"avg_keyphrases", MKP_FIELD(number, double, c.synth.avg_keyphrases)},
      {"data_dir", MKP_PATH(c.data_dir)},
      {"out", MKP_PATH(c.out_dir)},
      {"checkpoint", MKP_PATH(c.checkpoint)},
      {"input", MKP_PATH(c.input)},
      {"grad_eps", MKP_FIELD(number, double, c.grad_eps)},
      {"grad_tolerance", MKP_FIELD(number, double, c.grad_tolerance)},
      {"grad_batch", MKP_FIELD(number, int, c.grad_batch)},
      {"grad_max_elements", MKP_FIELD(number, std::size_t, c.grad_max_elements)},
      {"seed",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.set_seed(parse_number<std::uint64_t>(k, v));
        },
        [](const RunConfig& c) { return std::to_string(c.seed()); }}},
      {"seeds",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.seeds.clear();
          for (const auto& s : split_list(v)) c.seeds.push_back(parse_number<std::uint64_t>(k, s));
        },
        [](const RunConfig& c) {
          std::vector<std::string> s;
          for (auto x : c.seeds) s.push_back(std::to_string(x));
          return join_list(s);
        }}},
      {"variants",
       {[](RunConfig& c, const std::string&, const std::string& v) { c.variants = split_list(v); },
        [](const RunConfig& c) { return join_list(c.variants); }}},
  };
  return table;
}

#undef MKP_FIELD
#undef MKP_FLAG
#undef MKP_PATH

}  // namespace

void RunConfig::set_seed(std::uint64_t seed) {
  train.seed = seed;
  synth.seed = seed;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = fields().find(key);
  if (it == fields().end()) throw UsageError("unknown config key: " + key);
  it->second.set(*this, key, trim(value));
}

void RunConfig::apply_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw UsageError("cannot read config file " + file.string());
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(file.string() + ":" + std::to_string(number) + ": expected key = value");
    }
    set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
}

void RunConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw UsageError("override must be key=value: " + assignment);
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

void RunConfig::validate() const {
  try {
    train.validate();
    synth.validate();
    if (model.d_emb <= 0 || model.d1 <= 0 || model.d2 <= 0 || model.n_heads <= 0) {
      throw ConfigError("model dimensions must be positive");
    }
    if (model.d1 % model.n_heads != 0) throw ConfigError("d1 must be divisible by n_heads");
    if (model.d1 % 2 != 0) throw ConfigError("d1 must be even");
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  for (const auto& v : variants) Ablation::variant(v);
  if (seeds.empty()) throw UsageError("seeds must not be empty");
  if (grad_batch < 1) throw UsageError("grad_batch must be positive");
  if (!(grad_eps > 0.0)) throw UsageError("grad_eps must be positive");
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [key, field] : fields()) out += key + " = " + field.get(*this) + "\n";
  return out;
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> k;
    for (const auto& [key, _] : fields()) k.push_back(key);
    return k;
  }();
  return names;
}

}  // namespace mkp
