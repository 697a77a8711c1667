#include "mkp/training/checkpoint.hpp"

#include "mkp/core/error.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <fstream>

namespace mkp {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoints assume a little-endian host");

namespace {

constexpr char kMagic[8] = {'M', 'K', 'P', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

json record_json(const EpochRecord& r) {
  return json{{"stage", r.stage},         {"epoch", r.epoch},
              {"train_itm", r.train_itm}, {"train_irtm", r.train_irtm},
              {"train_cla", r.train_cla}, {"train_gen", r.train_gen},
              {"valid_loss", r.valid_loss}, {"valid_f1@1", r.valid_f1_at_1},
              {"improved", r.improved},   {"seconds", r.seconds}};
}

EpochRecord record_from(const json& j) {
  EpochRecord r;
  r.stage = j.at("stage");
  r.epoch = j.at("epoch");
  r.train_itm = j.at("train_itm");
  r.train_irtm = j.at("train_irtm");
  r.train_cla = j.at("train_cla");
  r.train_gen = j.at("train_gen");
  r.valid_loss = j.at("valid_loss");
  r.valid_f1_at_1 = j.at("valid_f1@1");
  r.improved = j.at("improved");
  r.seconds = j.at("seconds");
  return r;
}

json config_json(const ModelConfig& c) {
  json ab;
  const Ablation& a = c.ablation;
  ab["no_itm_loss"] = a.no_itm_loss;
  ab["no_irtm_loss"] = a.no_irtm_loss;
  ab["no_cla_loss"] = a.no_cla_loss;
  ab["no_entities"] = a.no_entities;
  ab["no_ocr"] = a.no_ocr;
  ab["no_itm_match"] = a.no_itm_match;
  ab["no_region_match"] = a.no_region_match;
  ab["no_filter_module"] = a.no_filter_module;
  json j{{"vocab_size", c.vocab_size},     {"num_labels", c.num_labels},
         {"d_emb", c.d_emb},               {"d1", c.d1},
         {"d2", c.d2},                     {"n_heads", c.n_heads},
         {"d_corr_ffn", c.d_corr_ffn},     {"d_mlp", c.d_mlp},
         {"d_att", c.d_att},               {"top_k", c.top_k},
         {"lambda_c", c.lambda_c},         {"dropout", c.dropout},
         {"init_range", c.init_range},     {"layernorm_eps", c.layernorm_eps},
         {"logit_clamp", c.logit_clamp},   {"max_input_len", c.max_input_len},
         {"max_decode_len", c.max_decode_len}, {"corr_ffn_bypass", c.corr_ffn_bypass},
         {"ablation", ab}};
  j["forced_switch"] = c.forced_switch ? json(*c.forced_switch) : json(nullptr);
  return j;
}

ModelConfig config_from(const json& j) {
  ModelConfig c;
  c.vocab_size = j.at("vocab_size");
  c.num_labels = j.at("num_labels");
  c.d_emb = j.at("d_emb");
  c.d1 = j.at("d1");
  c.d2 = j.at("d2");
  c.n_heads = j.at("n_heads");
  c.d_corr_ffn = j.at("d_corr_ffn");
  c.d_mlp = j.at("d_mlp");
  c.d_att = j.at("d_att");
  c.top_k = j.at("top_k");
  c.lambda_c = j.at("lambda_c");
  c.dropout = j.at("dropout");
  c.init_range = j.at("init_range");
  c.layernorm_eps = j.at("layernorm_eps");
  c.logit_clamp = j.at("logit_clamp");
  c.max_input_len = j.at("max_input_len");
  c.max_decode_len = j.at("max_decode_len");
  c.corr_ffn_bypass = j.at("corr_ffn_bypass");
  if (!j.at("forced_switch").is_null()) c.forced_switch = j.at("forced_switch").get<double>();
  const json& ab = j.at("ablation");
  Ablation& a = c.ablation;
  a.no_itm_loss = ab.at("no_itm_loss");
  a.no_irtm_loss = ab.at("no_irtm_loss");
  a.no_cla_loss = ab.at("no_cla_loss");
  a.no_entities = ab.at("no_entities");
  a.no_ocr = ab.at("no_ocr");
  a.no_itm_match = ab.at("no_itm_match");
  a.no_region_match = ab.at("no_region_match");
  a.no_filter_module = ab.at("no_filter_module");
  return c;
}

struct RawCheckpoint {
  json header;
  std::vector<char> payload;
};

RawCheckpoint read_raw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  char magic[8];
  std::uint32_t version = 0;
  std::uint64_t header_size = 0;
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&header_size), sizeof header_size);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) throw IoError(path.string() + " is not a checkpoint");
  if (version != kVersion) throw IoError("unsupported checkpoint version " + std::to_string(version));
  std::string header(header_size, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_size));
  if (!in) throw IoError("truncated checkpoint header in " + path.string());
  RawCheckpoint raw;
  try {
    raw.header = json::parse(header);
  } catch (const json::exception& e) {
    throw IoError("corrupt checkpoint header: " + std::string(e.what()));
  }
  raw.payload.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  return raw;
}

template <typename From, typename S>
void read_values(const char* data, Matrix<S>& out) {
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    From v;
    std::memcpy(&v, data + static_cast<std::size_t>(i) * sizeof(From), sizeof(From));
    out.data()[i] = static_cast<S>(v);
  }
}

}  // namespace

std::string EpochRecord::to_json() const { return record_json(*this).dump(); }

EpochRecord EpochRecord::from_json(const std::string& text) { return record_from(json::parse(text)); }

std::string config_to_json(const ModelConfig& config) { return config_json(config).dump(); }

ModelConfig config_from_json(const std::string& text) { return config_from(json::parse(text)); }

template <typename S>
void save_checkpoint(const Checkpoint<S>& ck, const std::filesystem::path& path) {
  const ParameterStore<S>& params = ck.model.params();
  json header;
  header["precision"] = sizeof(S) * 8;
  header["stage"] = ck.stage;
  header["config"] = config_json(ck.model.config());
  header["vocab"] = ck.model.vocab().regular_words();
  header["labels"] = ck.model.labels().phrases();
  json history = json::array();
  for (const auto& r : ck.history) history.push_back(record_json(r));
  header["history"] = history;
  json table = json::array();
  for (std::size_t i = 0; i < params.size(); ++i) {
    table.push_back({{"name", params[i].name}, {"rows", params[i].value.rows()}, {"cols", params[i].value.cols()}});
  }
  header["params"] = table;
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  const std::uint64_t size = text.size();
  out.write(kMagic, 8);
  out.write(reinterpret_cast<const char*>(&kVersion), sizeof kVersion);
  out.write(reinterpret_cast<const char*>(&size), sizeof size);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& v = params[i].value;
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(S)));
  }
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

template <typename S>
Checkpoint<S> load_checkpoint(const std::filesystem::path& path) {
  RawCheckpoint raw = read_raw(path);
  const json& h = raw.header;
  try {
    const int precision = h.at("precision");
    if (precision != 32 && precision != 64) throw IoError("bad checkpoint precision");
    const std::size_t width = static_cast<std::size_t>(precision / 8);
    ParameterStore<S> params;
    std::size_t offset = 0;
    for (const auto& entry : h.at("params")) {
      auto& p = params.add(entry.at("name"), entry.at("rows"), entry.at("cols"));
      const std::size_t bytes = static_cast<std::size_t>(p.value.size()) * width;
      if (offset + bytes > raw.payload.size()) throw IoError("truncated checkpoint payload");
      if (precision == 64) read_values<double>(raw.payload.data() + offset, p.value);
      else read_values<float>(raw.payload.data() + offset, p.value);
      offset += bytes;
    }
    if (offset != raw.payload.size()) throw IoError("trailing bytes in checkpoint payload");
    Vocabulary vocab = Vocabulary::from_words(h.at("vocab").get<Words>());
    LabelSet labels = LabelSet::from_phrases(h.at("labels").get<std::vector<Words>>());
    Checkpoint<S> ck{Model<S>(config_from(h.at("config")), std::move(vocab), std::move(labels), std::move(params)),
                     h.at("stage").get<int>(), {}};
    for (const auto& r : h.at("history")) ck.history.push_back(record_from(r));
    return ck;
  } catch (const json::exception& e) {
    throw IoError("corrupt checkpoint header: " + std::string(e.what()));
  }
}

int checkpoint_precision(const std::filesystem::path& path) {
  return read_raw(path).header.at("precision").get<int>();
}

template void save_checkpoint(const Checkpoint<float>&, const std::filesystem::path&);
template void save_checkpoint(const Checkpoint<double>&, const std::filesystem::path&);
template Checkpoint<float> load_checkpoint(const std::filesystem::path&);
template Checkpoint<double> load_checkpoint(const std::filesystem::path&);

}  // namespace mkp
