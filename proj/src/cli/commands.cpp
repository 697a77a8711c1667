#include "mkp/cli/commands.hpp"

#include "mkp/cli/run_config.hpp"
#include "mkp/core/error.hpp"
#include "mkp/data/dataset_io.hpp"
#include "mkp/data/text.hpp"
#include "mkp/eval/metrics.hpp"
#include "mkp/training/grad_check.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

namespace mkp {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

// Flags shared by every command; empty optionals were not given.
struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> data;
  std::optional<int> beam;
  std::vector<std::string> overrides;
};

struct CommandFlags {
  CommonFlags common;
  std::optional<int> stage;
  std::vector<std::string> variants;
  std::optional<std::string> checkpoint;
  std::optional<std::string> input;
  std::optional<std::string> predictions;
  bool dump_correlation = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "key = value configuration file");
  cmd->add_option("--seed", f.seed, "seed for data, initialisation and shuffling");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--data", f.data, "dataset directory");
  cmd->add_option("--beam", f.beam, "beam size (default 10)");
  cmd->add_option("--set", f.overrides, "override a config key (key=value)")->take_all();
}

// default < config file < command-line flags
RunConfig resolve(const CommandFlags& flags) {
  RunConfig cfg;
  const CommonFlags& c = flags.common;
  if (!c.config.empty()) cfg.apply_file(c.config);
  for (const auto& o : c.overrides) cfg.apply_override(o);
  if (c.seed) cfg.set_seed(*c.seed);
  if (c.out) cfg.out_dir = *c.out;
  if (c.data) cfg.data_dir = *c.data;
  if (c.beam) cfg.train.beam_size = *c.beam;
  if (flags.stage) cfg.train.stage = *flags.stage;
  if (flags.checkpoint) cfg.checkpoint = *flags.checkpoint;
  if (flags.input) cfg.input = *flags.input;
  cfg.validate();
  return cfg;
}

int precision_from_env() {
  const char* env = std::getenv("MKP_PRECISION");
  if (!env || std::string(env).empty()) return 64;
  const std::string v(env);
  if (v == "32") return 32;
  if (v == "64") return 64;
  throw UsageError("MKP_PRECISION must be 32 or 64, got '" + v + "'");
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

ordered_json config_json(const RunConfig& cfg) {
  ordered_json j = ordered_json::object();
  std::istringstream lines(cfg.to_text());
  std::string line;
  while (std::getline(lines, line)) {
    const auto eq = line.find(" = ");
    j[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return j;
}

// Echoes the resolved configuration to stderr and next to the outputs.
void echo_config(const RunConfig& cfg, const fs::path& dir, const std::string& command, int precision) {
  const std::string text = "# mkp " + command + " (precision " + std::to_string(precision) + ")\n" +
                           cfg.to_text();
  std::cerr << text;
  write_text(dir / (command + ".config"), text);
}

fs::path data_file(const RunConfig& cfg, const std::string& name) { return cfg.data_dir / name; }

class JsonLog {
 public:
  JsonLog(const fs::path& path, const RunConfig& cfg) : out_(path, std::ios::trunc) {
    if (!out_) throw IoError("cannot write " + path.string());
    out_ << ordered_json{{"resolved_config", config_json(cfg)}}.dump() << '\n';
  }
  void operator()(const EpochRecord& r) {
    out_ << r.to_json() << '\n';
    out_.flush();
    std::cerr << "stage " << r.stage << " epoch " << r.epoch;
    if (r.stage == 1) std::cerr << " valid L1 " << r.valid_loss;
    else std::cerr << " valid F1@1 " << r.valid_f1_at_1;
    std::cerr << (r.improved ? " *" : "") << '\n';
  }

 private:
  std::ofstream out_;
};

int cmd_synth(RunConfig cfg, const CommandFlags& flags) {
  if (flags.common.out) cfg.data_dir = cfg.out_dir;
  fs::create_directories(cfg.data_dir);
  echo_config(cfg, cfg.data_dir, "synth", precision_from_env());
  const SyntheticCorpus corpus = generate_synthetic_corpus(cfg.synth);
  std::mt19937_64 rng(cfg.synth.seed ^ 0x5bd1e995u);
  const auto valid_matching = make_matching_pairs(corpus.valid, rng);
  save_dataset(corpus.train, data_file(cfg, "train.jsonl"), FeatureStorage::kSidecar);
  save_dataset(corpus.valid, data_file(cfg, "valid.jsonl"), FeatureStorage::kSidecar);
  save_dataset(corpus.test, data_file(cfg, "test.jsonl"), FeatureStorage::kSidecar);
  save_matching(corpus.matching, data_file(cfg, "matching.jsonl"), FeatureStorage::kSidecar);
  save_matching(valid_matching, data_file(cfg, "valid_matching.jsonl"), FeatureStorage::kSidecar);
  std::cout << "wrote " << corpus.train.size() << " train, " << corpus.valid.size() << " valid, "
            << corpus.test.size() << " test samples and " << corpus.matching.size() << " + "
            << valid_matching.size() << " matching pairs to " << cfg.data_dir.string() << '\n';
  return 0;
}

Stage1Data load_stage1(const RunConfig& cfg) {
  return {load_dataset(data_file(cfg, "train.jsonl")), load_matching(data_file(cfg, "matching.jsonl")),
          load_dataset(data_file(cfg, "valid.jsonl")),
          load_matching(data_file(cfg, "valid_matching.jsonl"))};
}

Stage2Data load_stage2(const RunConfig& cfg) {
  return {load_dataset(data_file(cfg, "train.jsonl")), load_dataset(data_file(cfg, "valid.jsonl"))};
}

fs::path checkpoint_path(const RunConfig& cfg, int stage) {
  return cfg.checkpoint.empty() ? cfg.out_dir / ("stage" + std::to_string(stage) + ".ckpt") : cfg.checkpoint;
}

template <typename S>
int cmd_train(RunConfig cfg, const CommandFlags& flags, int precision) {
  if (!flags.stage) throw UsageError("train needs --stage 1|2");
  for (const auto& v : flags.variants) cfg.model.ablation = Ablation::variant(v);
  fs::create_directories(cfg.out_dir);
  const int stage = cfg.train.stage;
  echo_config(cfg, cfg.out_dir, "train_stage" + std::to_string(stage), precision);
  JsonLog log(cfg.out_dir / ("stage" + std::to_string(stage) + ".log.jsonl"), cfg);
  const fs::path out = cfg.out_dir / ("stage" + std::to_string(stage) + ".ckpt");
  if (stage == 1) {
    const Stage1Data data = load_stage1(cfg);
    Model<S> model(cfg.model, Vocabulary::build(data.train, cfg.vocab_max), LabelSet::build(data.train),
                   cfg.seed());
    const Checkpoint<S> ck = train_stage1(std::move(model), data, cfg.train, std::ref(log));
    save_checkpoint(ck, out);
  } else {
    const fs::path in = cfg.checkpoint.empty() ? cfg.out_dir / "stage1.ckpt" : cfg.checkpoint;
    if (!fs::exists(in)) throw StageOrderError("stage 2 needs a stage-1 checkpoint; missing " + in.string());
    const Checkpoint<S> ck = train_stage2(load_checkpoint<S>(in), load_stage2(cfg), cfg.train, std::ref(log));
    save_checkpoint(ck, out);
  }
  std::cout << "wrote " << out.string() << '\n';
  return 0;
}

fs::path input_path(const RunConfig& cfg) {
  return cfg.input.empty() ? data_file(cfg, "test.jsonl") : cfg.input;
}

template <typename S>
Eigen::RowVectorXd label_distribution(const Matrix<S>& logits) {
  const Eigen::RowVectorXd x = logits.row(0).template cast<double>();
  const Eigen::RowVectorXd e = (x.array() - x.maxCoeff()).exp().matrix();
  return e / e.sum();
}

template <typename S>
ordered_json grid_7x7(const Matrix<S>& A) {
  ordered_json rows = ordered_json::array();
  for (int r = 0; r < 7; ++r) {
    ordered_json row = ordered_json::array();
    for (int c = 0; c < 7; ++c) row.push_back(static_cast<double>(A(0, r * 7 + c)));
    rows.push_back(row);
  }
  return rows;
}

template <typename S>
int cmd_predict(RunConfig cfg, const CommandFlags& flags, int precision) {
  fs::create_directories(cfg.out_dir);
  echo_config(cfg, cfg.out_dir, "predict", precision);
  const Checkpoint<S> ck = load_checkpoint<S>(checkpoint_path(cfg, 2));
  const auto samples = load_dataset(input_path(cfg));
  BeamOptions beam{cfg.train.beam_size, ck.model.config().max_decode_len};
  const fs::path out_path = cfg.out_dir / "predictions.jsonl";
  std::ofstream out(out_path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + out_path.string());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    DecodeSession<S> session(ck.model, samples[i]);
    ordered_json j;
    j["index"] = i;
    ordered_json phrases = ordered_json::array(), scores = ordered_json::array();
    for (const auto& k : beam_search(session, beam)) {
      phrases.push_back(join(k.words));
      scores.push_back(k.score);
    }
    j["keyphrases"] = phrases;
    j["scores"] = scores;
    if (auto s = session.matching_score()) j["matching_score"] = static_cast<double>(*s);
    const auto& top = session.forward().top_k;
    const Eigen::RowVectorXd probs = label_distribution(session.forward().logits.value());
    ordered_json cls = ordered_json::array();
    for (int label : top.labels) {
      cls.push_back({{"phrase", join(ck.model.labels().phrase(label))},
                     {"prob", probs(label)}});
    }
    j["classifier_top_k"] = cls;
    if (flags.dump_correlation) {
      if (auto A = session.correlation()) j["correlation"] = grid_7x7(*A);
      else j["correlation"] = nullptr;
    }
    out << j.dump() << '\n';
  }
  std::cout << "wrote " << samples.size() << " predictions to " << out_path.string() << '\n';
  return 0;
}

std::vector<std::vector<Words>> read_predictions(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<std::vector<Words>> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      std::vector<Words> phrases;
      for (const auto& p : j.at("keyphrases")) phrases.push_back(normalize_keyphrase(p.get<std::string>()));
      out.push_back(std::move(phrases));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(number, e.what());
    }
  }
  return out;
}

template <typename S>
int cmd_evaluate(RunConfig cfg, const CommandFlags& flags, int precision) {
  fs::create_directories(cfg.out_dir);
  echo_config(cfg, cfg.out_dir, "evaluate", precision);
  const auto samples = load_dataset(input_path(cfg));
  MetricsReport report;
  if (flags.predictions) {
    report = score_predictions(read_predictions(*flags.predictions), samples);
  } else {
    const Checkpoint<S> ck = load_checkpoint<S>(checkpoint_path(cfg, 2));
    report = evaluate(ck.model, samples, {cfg.train.beam_size, ck.model.config().max_decode_len});
  }
  write_text(cfg.out_dir / "metrics.json", report.to_json() + "\n");
  report.write_csv(cfg.out_dir / "per_sample.csv");
  std::cout << report.to_json() << '\n';
  return 0;
}

template <typename S>
int cmd_ablate(RunConfig cfg, const CommandFlags& flags, int precision) {
  std::vector<std::string> variants = flags.variants.empty() ? cfg.variants : flags.variants;
  if (variants.empty()) variants = Ablation::variant_names();
  if (std::find(variants.begin(), variants.end(), "full") == variants.end()) {
    variants.insert(variants.begin(), "full");
  }
  fs::create_directories(cfg.out_dir);
  echo_config(cfg, cfg.out_dir, "ablate", precision);
  const Stage1Data stage1 = load_stage1(cfg);
  const Stage2Data stage2{stage1.train, stage1.valid};
  const Vocabulary vocab = Vocabulary::build(stage1.train, cfg.vocab_max);
  const LabelSet labels = LabelSet::build(stage1.train);

  std::ofstream csv(cfg.out_dir / "ablation.csv", std::ios::trunc);
  csv.precision(17);
  csv << "variant,seed,f1@1,f1@3,map@5\n";
  ordered_json summary = ordered_json::array();
  std::cout << "variant              mean F1@1  mean F1@3  mean MAP@5\n";
  for (const auto& name : variants) {
    double f1 = 0, f3 = 0, map = 0;
    ordered_json runs = ordered_json::array();
    for (std::uint64_t seed : cfg.seeds) {
      RunConfig run = cfg;
      run.model.ablation = Ablation::variant(name);
      run.set_seed(seed);
      const fs::path dir = cfg.out_dir / name;
      fs::create_directories(dir);
      JsonLog log(dir / ("seed" + std::to_string(seed) + ".log.jsonl"), run);
      const Checkpoint<S> ck = train_pipeline(Model<S>(run.model, vocab, labels, seed), stage1, stage2,
                                              run.train, std::ref(log));
      const MetricsReport r =
          evaluate(ck.model, stage1.valid, {run.train.beam_size, ck.model.config().max_decode_len});
      csv << name << ',' << seed << ',' << r.f1_at_1 << ',' << r.f1_at_3 << ',' << r.map_at_5 << '\n';
      runs.push_back({{"seed", seed}, {"f1@1", r.f1_at_1}, {"f1@3", r.f1_at_3}, {"map@5", r.map_at_5}});
      f1 += r.f1_at_1;
      f3 += r.f1_at_3;
      map += r.map_at_5;
    }
    const double n = static_cast<double>(cfg.seeds.size());
    summary.push_back({{"variant", name}, {"f1@1", f1 / n}, {"f1@3", f3 / n}, {"map@5", map / n}, {"runs", runs}});
    std::printf("%-20s %10.4f %10.4f %11.4f\n", name.c_str(), f1 / n, f3 / n, map / n);
  }
  write_text(cfg.out_dir / "ablation.json", summary.dump(2) + "\n");
  return 0;
}

int cmd_gradcheck(RunConfig cfg, const CommandFlags& flags, int precision) {
  if (precision != 64) throw ConfigError("gradcheck requires MKP_PRECISION=64");
  for (const auto& v : flags.variants) cfg.model.ablation = Ablation::variant(v);
  fs::create_directories(cfg.out_dir);
  echo_config(cfg, cfg.out_dir, "gradcheck", precision);
  const auto train = load_dataset(data_file(cfg, "train.jsonl"));
  const auto matching_samples = load_matching(data_file(cfg, "matching.jsonl"));
  Model<double> model(cfg.model, Vocabulary::build(train, cfg.vocab_max), LabelSet::build(train), cfg.seed());
  const auto n = static_cast<std::size_t>(cfg.grad_batch);
  const auto triplets = model.triplets(train);
  const auto matching = prepare_matching(model, matching_samples);
  GradCheckBatch batch{std::span<const Triplet>(triplets.data(), std::min(n, triplets.size())),
                       std::span<const MatchingExample>(matching.data(), std::min(n, matching.size()))};
  GradCheckOptions opts;
  opts.eps = cfg.grad_eps;
  opts.max_elements = cfg.grad_max_elements;
  opts.seed = cfg.seed();

  const Ablation& ab = model.config().ablation;
  std::vector<std::pair<std::string, LossSelection>> selections;
  if (ab.itm_loss()) selections.push_back({"itm", {true, false, false, false}});
  if (ab.irtm_loss()) selections.push_back({"irtm", {false, true, false, false}});
  if (ab.cla_loss()) selections.push_back({"cla", {false, false, true, false}});
  selections.push_back({"gen", {false, false, false, true}});
  selections.push_back({"sum", {ab.itm_loss(), ab.irtm_loss(), ab.cla_loss(), true}});

  ordered_json out;
  double worst = 0.0;
  for (const auto& [name, terms] : selections) {
    const GradCheckReport r = grad_check(model, batch, terms, opts);
    out[name] = ordered_json::parse(r.to_json());
    worst = std::max(worst, r.max_rel_error);
    std::cout << name << ": max relative error " << r.max_rel_error << " (" << r.worst_parameter << ")\n";
  }
  out["tolerance"] = cfg.grad_tolerance;
  out["passed"] = worst < cfg.grad_tolerance;
  write_text(cfg.out_dir / "gradcheck.json", out.dump(2) + "\n");
  if (worst >= cfg.grad_tolerance) {
    std::cerr << "gradient check failed: " << worst << " >= " << cfg.grad_tolerance << '\n';
    return 1;
  }
  return 0;
}

template <typename S>
int dispatch(const std::string& command, const RunConfig& cfg, const CommandFlags& flags, int precision) {
  if (command == "synth") return cmd_synth(cfg, flags);
  if (command == "train") return cmd_train<S>(cfg, flags, precision);
  if (command == "predict") return cmd_predict<S>(cfg, flags, precision);
  if (command == "evaluate") return cmd_evaluate<S>(cfg, flags, precision);
  if (command == "ablate") return cmd_ablate<S>(cfg, flags, precision);
  return cmd_gradcheck(cfg, flags, precision);
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Multi-modal keyphrase generation: data synthesis, training, prediction, evaluation"};
  app.require_subcommand(1);
  CommandFlags flags;

  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  auto* train = app.add_subcommand("train", "train stage 1 or stage 2");
  auto* predict = app.add_subcommand("predict", "decode ranked keyphrases");
  auto* evaluate_cmd = app.add_subcommand("evaluate", "score predictions or a checkpoint");
  auto* ablate = app.add_subcommand("ablate", "train and compare ablation variants");
  auto* gradcheck = app.add_subcommand("gradcheck", "compare analytic and numeric gradients");
  for (auto* cmd : {synth, train, predict, evaluate_cmd, ablate, gradcheck}) add_common(cmd, flags.common);
  train->add_option("--stage", flags.stage, "1 or 2")->required()->check(CLI::Range(1, 2));
  for (auto* cmd : {train, ablate, gradcheck}) {
    cmd->add_option("--variant", flags.variants, "ablation variant")
        ->check(CLI::IsMember(Ablation::variant_names()));
  }
  for (auto* cmd : {train, predict, evaluate_cmd}) {
    cmd->add_option("--checkpoint", flags.checkpoint, "checkpoint file");
  }
  for (auto* cmd : {predict, evaluate_cmd}) cmd->add_option("--input", flags.input, "dataset JSONL");
  evaluate_cmd->add_option("--predictions", flags.predictions, "predictions JSONL to score");
  predict->add_flag("--dump-correlation", flags.dump_correlation, "emit region scores as 7x7 grids");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    const int precision = precision_from_env();
    const RunConfig cfg = resolve(flags);
    return precision == 32 ? dispatch<float>(command, cfg, flags, precision)
                           : dispatch<double>(command, cfg, flags, precision);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace mkp
