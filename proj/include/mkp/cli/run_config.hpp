#pragma once

// Flat run configuration shared by every CLI command. Files hold UTF-8 lines
// of `key = value`; `#` starts a comment; lists are comma-separated.

#include "mkp/data/synthetic.hpp"
#include "mkp/model/config.hpp"
#include "mkp/training/trainer.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace mkp {

// Malformed configuration or command line; the CLI exits with status 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  SyntheticSpec synth;
  std::size_t vocab_max = Vocabulary::kDefaultMaxSize;

  std::filesystem::path data_dir = "data";
  std::filesystem::path out_dir = "runs";
  std::filesystem::path checkpoint;  // empty -> out_dir/stage<N>.ckpt
  std::filesystem::path input;       // predict/evaluate data; empty -> data_dir/test.jsonl

  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};  // ablate
  std::vector<std::string> variants;                   // ablate; empty -> every variant

  double grad_eps = 1e-5;
  double grad_tolerance = 1e-4;
  int grad_batch = 2;
  std::size_t grad_max_elements = 10000;

  // A single seed drives data generation, initialisation and shuffling.
  void set_seed(std::uint64_t seed);
  std::uint64_t seed() const { return train.seed; }

  // Throws UsageError on unknown keys or malformed values.
  void set(const std::string& key, const std::string& value);
  void apply_file(const std::filesystem::path& path);
  // "key=value" as given on the command line.
  void apply_override(const std::string& assignment);

  void validate() const;
  // Every key with its resolved value, one `key = value` line each.
  std::string to_text() const;

  static const std::vector<std::string>& keys();
};

}  // namespace mkp
