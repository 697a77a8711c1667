#pragma once

// JSONL datasets, one sample per line:
//   {"text": str, "ocr": str, "entities": [str],
//    "features": [[512 floats] x 49] | {"path": str},
//    "keyphrases": [str]}
// A "path" names a raw little-endian float32 file of 49x512 values, row-major,
// resolved relative to the JSONL file. Matching sets carry "label": 0|1 in
// place of "keyphrases".

#include "mkp/data/sample.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace mkp {

enum class FeatureStorage {
  kInline,   // features written as nested JSON arrays
  kSidecar,  // features written to <stem>.features/<line>.f32 next to the JSONL
};

std::vector<MultiModalSample> load_dataset(const std::filesystem::path& path);
void save_dataset(const std::vector<MultiModalSample>& samples, const std::filesystem::path& path,
                  FeatureStorage storage = FeatureStorage::kInline);

std::vector<MatchingSample> load_matching(const std::filesystem::path& path);
void save_matching(const std::vector<MatchingSample>& samples, const std::filesystem::path& path,
                   FeatureStorage storage = FeatureStorage::kInline);

FeatureGrid read_feature_file(const std::filesystem::path& path);
void write_feature_file(const FeatureGrid& grid, const std::filesystem::path& path);

// Single-line parsers, exposed for tests. base_dir resolves feature paths.
MultiModalSample parse_sample_line(const std::string& line, std::size_t line_number,
                                   const std::filesystem::path& base_dir);

}  // namespace mkp
