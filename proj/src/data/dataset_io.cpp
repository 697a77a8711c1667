#include "mkp/data/dataset_io.hpp"

#include "mkp/core/error.hpp"
#include "mkp/data/text.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <memory>

namespace mkp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

static_assert(std::endian::native == std::endian::little,
              "raw feature files are little-endian; add byte swapping for this host");

FeatureGrid parse_inline_features(const json& rows, std::size_t line) {
  if (!rows.is_array()) throw ParseError(line, "\"features\" must be an array or {\"path\": ...}");
  if (rows.size() != static_cast<std::size_t>(kGridRegions)) {
    throw ShapeError("line " + std::to_string(line) + ": feature grid has " +
                     std::to_string(rows.size()) + " rows, expected 49");
  }
  FeatureGrid grid(kGridRegions, kFeatureDim);
  for (int r = 0; r < kGridRegions; ++r) {
    const json& row = rows[static_cast<std::size_t>(r)];
    if (!row.is_array() || row.size() != static_cast<std::size_t>(kFeatureDim)) {
      throw ShapeError("line " + std::to_string(line) + ": feature row " + std::to_string(r) +
                       " must hold 512 numbers");
    }
    for (int c = 0; c < kFeatureDim; ++c) {
      const json& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number()) throw ParseError(line, "non-numeric feature value");
      grid(r, c) = v.get<float>();
    }
  }
  return grid;
}

std::shared_ptr<const FeatureGrid> parse_features(const json& obj, std::size_t line,
                                                  const fs::path& base_dir) {
  if (!obj.contains("features")) throw ParseError(line, "missing \"features\"");
  const json& f = obj["features"];
  if (f.is_object()) {
    if (!f.contains("path") || !f["path"].is_string()) {
      throw ParseError(line, "feature object needs a string \"path\"");
    }
    fs::path p = f["path"].get<std::string>();
    if (p.is_relative()) p = base_dir / p;
    return std::make_shared<const FeatureGrid>(read_feature_file(p));
  }
  return std::make_shared<const FeatureGrid>(parse_inline_features(f, line));
}

std::string string_field(const json& obj, const char* key, std::size_t line, bool required) {
  if (!obj.contains(key)) {
    if (required) throw ParseError(line, std::string("missing \"") + key + "\"");
    return {};
  }
  if (!obj[key].is_string()) throw ParseError(line, std::string("\"") + key + "\" must be a string");
  return obj[key].get<std::string>();
}

std::vector<std::string> string_list(const json& obj, const char* key, std::size_t line) {
  std::vector<std::string> out;
  if (!obj.contains(key)) return out;
  const json& arr = obj[key];
  if (!arr.is_array()) throw ParseError(line, std::string("\"") + key + "\" must be a list");
  for (const auto& v : arr) {
    if (!v.is_string()) throw ParseError(line, std::string("\"") + key + "\" entries must be strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

MultiModalSample parse_common(const json& obj, std::size_t line, const fs::path& base_dir) {
  if (!obj.is_object()) throw ParseError(line, "expected a JSON object");
  MultiModalSample s;
  s.source = tokenize(string_field(obj, "text", line, true));
  s.ocr = tokenize(string_field(obj, "ocr", line, false));
  for (const auto& e : string_list(obj, "entities", line)) {
    Words words = tokenize(e);
    if (!words.empty()) s.entities.push_back(std::move(words));
  }
  s.features = parse_features(obj, line, base_dir);
  return s;
}

json parse_json_line(const std::string& line, std::size_t line_number) {
  try {
    return json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(line_number, std::string("malformed JSON: ") + e.what());
  }
}

json features_json(const FeatureGrid& grid, FeatureStorage storage, const fs::path& jsonl,
                   std::size_t index) {
  if (storage == FeatureStorage::kSidecar) {
    const fs::path dir_name = jsonl.stem().string() + ".features";
    const fs::path rel = dir_name / (std::to_string(index) + ".f32");
    fs::create_directories(jsonl.parent_path() / dir_name);
    write_feature_file(grid, jsonl.parent_path() / rel);
    return json{{"path", rel.generic_string()}};
  }
  json rows = json::array();
  for (Eigen::Index r = 0; r < grid.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < grid.cols(); ++c) row.push_back(grid(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json common_json(const MultiModalSample& s, FeatureStorage storage, const fs::path& jsonl,
                 std::size_t index) {
  json entities = json::array();
  for (const auto& e : s.entities) entities.push_back(join(e));
  if (!s.features) throw ShapeError("sample " + std::to_string(index) + " has no features");
  return json{{"text", join(s.source)},
              {"ocr", join(s.ocr)},
              {"entities", entities},
              {"features", features_json(*s.features, storage, jsonl, index)}};
}

template <typename Fn>
void for_each_line(const fs::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    fn(line, number);
  }
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

}  // namespace

FeatureGrid read_feature_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open feature file " + path.string());
  std::vector<float> buf(static_cast<std::size_t>(kGridRegions) * kFeatureDim);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (in.gcount() != static_cast<std::streamsize>(buf.size() * sizeof(float)) || in.peek() != EOF) {
    throw ShapeError("feature file " + path.string() + " must hold exactly 49x512 float32 values");
  }
  return Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      buf.data(), kGridRegions, kFeatureDim);
}

void write_feature_file(const FeatureGrid& grid, const fs::path& path) {
  require_grid_shape(grid);
  const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = grid;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write feature file " + path.string());
  out.write(reinterpret_cast<const char*>(rm.data()), static_cast<std::streamsize>(rm.size() * sizeof(float)));
}

MultiModalSample parse_sample_line(const std::string& line, std::size_t line_number,
                                   const fs::path& base_dir) {
  const json obj = parse_json_line(line, line_number);
  MultiModalSample s = parse_common(obj, line_number, base_dir);
  for (const auto& k : string_list(obj, "keyphrases", line_number)) {
    s.keyphrases.push_back(normalize_keyphrase(k));
  }
  canonicalize_keyphrases(s.keyphrases);
  return s;
}

std::vector<MultiModalSample> load_dataset(const fs::path& path) {
  std::vector<MultiModalSample> out;
  const fs::path base = path.parent_path();
  for_each_line(path, [&](const std::string& line, std::size_t n) {
    out.push_back(parse_sample_line(line, n, base));
  });
  return out;
}

void save_dataset(const std::vector<MultiModalSample>& samples, const fs::path& path,
                  FeatureStorage storage) {
  std::ofstream out = open_output(path);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    json obj = common_json(samples[i], storage, path, i);
    json kps = json::array();
    for (const auto& k : samples[i].keyphrases) kps.push_back(join(k));
    obj["keyphrases"] = kps;
    out << obj.dump() << '\n';
  }
}

std::vector<MatchingSample> load_matching(const fs::path& path) {
  std::vector<MatchingSample> out;
  const fs::path base = path.parent_path();
  for_each_line(path, [&](const std::string& line, std::size_t n) {
    const json obj = parse_json_line(line, n);
    MatchingSample m;
    m.pair = parse_common(obj, n, base);
    if (!obj.contains("label") || !obj["label"].is_number_integer()) {
      throw ParseError(n, "matching sample needs an integer \"label\"");
    }
    m.label = obj["label"].get<int>();
    if (m.label != 0 && m.label != 1) throw ParseError(n, "\"label\" must be 0 or 1");
    out.push_back(std::move(m));
  });
  return out;
}

void save_matching(const std::vector<MatchingSample>& samples, const fs::path& path,
                   FeatureStorage storage) {
  std::ofstream out = open_output(path);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    json obj = common_json(samples[i].pair, storage, path, i);
    obj["label"] = samples[i].label;
    out << obj.dump() << '\n';
  }
}

}  // namespace mkp
