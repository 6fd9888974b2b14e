// Command-line front end: data generation, training, decoding, evaluation.
// Exit codes: 0 success, 1 usage or validation error, 2 runtime failure.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rephrase/corpus.h"
#include "rephrase/editops.h"
#include "rephrase/metrics.h"
#include "rephrase/models/model_io.h"
#include "rephrase/train/distill.h"
#include "rephrase/train/grid.h"
#include "rephrase/train/trainer.h"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rephrase;

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Options shared by every command.
struct Common {
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string config;
};

struct DataOptions {
  std::string path;
  std::string split;
  std::uint64_t split_seed = 0;
  int tsv_id = -1;
  int tsv_query = 0;
  int tsv_class = 1;
  std::vector<int> tsv_rephrases = {2};
  bool tsv_header = false;
};

void add_common(CLI::App* cmd, Common& c, bool out_required) {
  cmd->add_option("--seed", c.seed, "Random seed");
  auto* out = cmd->add_option("--out", c.out, "Output directory");
  if (out_required) out->required();
  cmd->add_option("--config", c.config, "JSON config file; flags override its values")
      ->check(CLI::ExistingFile);
}

void add_data(CLI::App* cmd, DataOptions& d, const std::string& default_split) {
  d.split = default_split;
  cmd->add_option("--data", d.path,
                  "Dataset: a directory with train/valid/test.jsonl, or one .jsonl/.tsv file")
      ->required()
      ->check(CLI::ExistingPath);
  cmd->add_option("--split", d.split, "Split to use: train, valid, test or all")
      ->capture_default_str()
      ->check(CLI::IsMember({"train", "valid", "test", "all"}));
  cmd->add_option("--split-seed", d.split_seed, "Seed for splitting a single data file")
      ->capture_default_str();
  cmd->add_option("--tsv-id", d.tsv_id, "TSV id column (-1: line numbers)")->capture_default_str();
  cmd->add_option("--tsv-query", d.tsv_query, "TSV query column")->capture_default_str();
  cmd->add_option("--tsv-class", d.tsv_class, "TSV class column")->capture_default_str();
  cmd->add_option("--tsv-rephrase", d.tsv_rephrases, "TSV rephrase columns")->capture_default_str();
  cmd->add_flag("--tsv-header", d.tsv_header, "TSV input has a header row");
}

json load_config(const Common& c) {
  if (c.config.empty()) return json::object();
  std::ifstream in(c.config);
  if (!in) throw UsageError("cannot read config " + c.config);
  json j = json::parse(in);
  if (!j.is_object()) throw UsageError("config must be a JSON object");
  return j;
}

std::uint64_t resolve_seed(const Common& c, const json& cfg) {
  if (c.seed) return *c.seed;
  return cfg.value("seed", std::uint64_t{1});
}

json section(const json& cfg, const char* key) { return cfg.contains(key) ? cfg[key] : json::object(); }

// Creates the output directory and records the resolved run configuration
// there before any work starts.
fs::path prepare_out(const std::string& out, const json& resolved) {
  fs::path dir(out);
  fs::create_directories(dir);
  std::ofstream f(dir / "config.json");
  f << resolved.dump(2) << '\n';
  if (!f) throw std::runtime_error("cannot write " + (dir / "config.json").string());
  return dir;
}

json data_json(const DataOptions& d) {
  return {{"path", d.path},
          {"split", d.split},
          {"split_seed", d.split_seed},
          {"tsv_id", d.tsv_id},
          {"tsv_query", d.tsv_query},
          {"tsv_class", d.tsv_class},
          {"tsv_rephrases", d.tsv_rephrases},
          {"tsv_header", d.tsv_header}};
}

corpus::Dataset read_file(const fs::path& p, const DataOptions& d) {
  std::string ext = p.extension().string();
  if (ext == ".tsv" || ext == ".txt") {
    corpus::TsvColumns cols;
    cols.id = d.tsv_id;
    cols.query = d.tsv_query;
    cols.cls = d.tsv_class;
    cols.rephrases = d.tsv_rephrases;
    cols.has_header = d.tsv_header;
    return corpus::load_dataset(p, corpus::Format::kTsv, cols);
  }
  return corpus::load_dataset(p, corpus::Format::kJsonl);
}

corpus::Dataset concat(std::initializer_list<const corpus::Dataset*> parts) {
  corpus::Dataset all;
  for (const auto* p : parts)
    all.utterances.insert(all.utterances.end(), p->utterances.begin(), p->utterances.end());
  return all;
}

// All three splits: read from a directory, or split from a single file.
corpus::Splits load_splits(const DataOptions& d) {
  fs::path p(d.path);
  if (fs::is_directory(p)) {
    corpus::Splits s;
    auto read = [&](const char* name, corpus::Dataset& ds) {
      fs::path f = p / name;
      if (fs::exists(f)) ds = read_file(f, d);
    };
    read("train.jsonl", s.train);
    read("valid.jsonl", s.valid);
    read("test.jsonl", s.test);
    if (s.train.empty() && s.valid.empty() && s.test.empty()) {
      throw UsageError("no train/valid/test.jsonl in " + d.path);
    }
    return s;
  }
  return corpus::split(read_file(p, d), corpus::SplitRatios{}, d.split_seed);
}

corpus::Dataset select_split(const DataOptions& d) {
  if (d.split == "all" && !fs::is_directory(d.path)) return read_file(d.path, d);
  corpus::Splits s = load_splits(d);
  corpus::Dataset ds = d.split == "train"   ? s.train
                       : d.split == "valid" ? s.valid
                       : d.split == "test"  ? s.test
                                            : concat({&s.train, &s.valid, &s.test});
  if (ds.empty()) throw UsageError("split '" + d.split + "' of " + d.path + " is empty");
  return ds;
}

// Training and validation sets; both must be present.
std::pair<corpus::Dataset, corpus::Dataset> train_valid(const DataOptions& d) {
  corpus::Splits s = load_splits(d);
  if (s.train.empty()) throw UsageError("no training data in " + d.path);
  if (s.valid.empty()) throw UsageError("no validation data in " + d.path);
  return {std::move(s.train), std::move(s.valid)};
}

// Architecture of a saved model directory; a directory without a model is a
// usage error.
std::string model_arch(const std::string& dir) {
  if (!fs::exists(fs::path(dir) / "manifest.json")) throw UsageError(dir + " does not hold a saved model");
  return models::checkpoint_arch(dir);
}

void write_json_file(const fs::path& p, const json& j) {
  std::ofstream f(p);
  f << j.dump(2) << '\n';
  if (!f) throw std::runtime_error("cannot write " + p.string());
}

json result_json(const train::TrainResult& r) {
  json j = {{"best_epoch", r.best_epoch},
            {"best_valid_em", r.best_valid_em},
            {"epochs_run", r.log.size()},
            {"diverged", r.diverged}};
  if (r.diverged) j["divergence"] = r.divergence;
  return j;
}

std::string join(const Words& w) {
  std::string s;
  for (std::size_t i = 0; i < w.size(); ++i) s += (i ? " " : "") + w[i];
  return s;
}

Words split_words(const std::string& s) {
  Words w;
  std::istringstream is(s);
  for (std::string t; is >> t;) w.push_back(t);
  return w;
}

// TrainConfig from the "train" section plus flag overrides.
struct TrainFlags {
  std::optional<int> epochs;
  std::optional<double> lr;
  std::optional<std::size_t> batch_size;
  std::optional<int> patience;
};

void add_train_flags(CLI::App* cmd, TrainFlags& t) {
  cmd->add_option("--epochs", t.epochs, "Maximum epochs");
  cmd->add_option("--lr", t.lr, "Adam learning rate");
  cmd->add_option("--batch-size", t.batch_size, "Batch size");
  cmd->add_option("--patience", t.patience, "Early-stopping patience in epochs (0 disables)");
}

train::TrainConfig train_config(const json& section_json, const TrainFlags& f, std::uint64_t seed) {
  train::TrainConfig c = train::TrainConfig::from_json(section_json);
  if (f.epochs) c.epochs = *f.epochs;
  if (f.lr) c.learning_rate = *f.lr;
  if (f.batch_size) c.batch_size = *f.batch_size;
  if (f.patience) c.patience = *f.patience;
  c.seed = seed;
  c.validate();
  return c;
}

json model_json(const json& cfg, std::uint64_t seed) {
  json m = section(cfg, "model");
  m["seed"] = seed;
  return m;
}

struct CopyFlags {
  std::optional<double> lambda;
  std::optional<double> threshold;
  bool alpha_only = false;
};

void add_copy_flags(CLI::App* cmd, CopyFlags& c) {
  cmd->add_option("--lambda", c.lambda, "Copy hinge weight");
  cmd->add_option("--threshold", c.threshold, "Copy hinge threshold T");
  cmd->add_flag("--hinge-alpha-only", c.alpha_only, "Apply the hinge to the gate alone");
}

std::optional<train::CopyLossConfig> copy_config(const json& cfg, const CopyFlags& f, bool default_on) {
  if (!cfg.contains("copy_loss") && !f.lambda && !f.threshold && !default_on) return std::nullopt;
  train::CopyLossConfig c = train::CopyLossConfig::from_json(section(cfg, "copy_loss"));
  if (f.lambda) c.lambda = *f.lambda;
  if (f.threshold) c.threshold = *f.threshold;
  if (f.alpha_only) c.hinge_on_alpha_only = true;
  c.validate();
  return c;
}

train::TrainConfig with_log(train::TrainConfig c, const fs::path& out, const char* name) {
  c.log_path = out / name;
  fs::remove(*c.log_path);
  return c;
}

// ---------------------------------------------------------------- commands

struct GenData {
  Common common;
  std::size_t n = 0;
};

int run_gen_data(const GenData& o) {
  std::uint64_t seed = o.common.seed.value_or(1);
  fs::path out = prepare_out(o.common.out, {{"command", "gen-data"}, {"n", o.n}, {"seed", seed}});
  corpus::Dataset all = corpus::generate_synthetic(o.n, seed);
  corpus::Splits s = corpus::split(all, corpus::SplitRatios{}, seed);
  auto write = [&](const char* name, const corpus::Dataset& ds) {
    std::ofstream f(out / name);
    corpus::write_jsonl(f, ds);
    if (!f) throw std::runtime_error("cannot write " + (out / name).string());
  };
  write("data.jsonl", all);
  write("train.jsonl", s.train);
  write("valid.jsonl", s.valid);
  write("test.jsonl", s.test);
  std::cout << "wrote " << all.size() << " utterances (" << s.train.size() << " train, " << s.valid.size()
            << " valid, " << s.test.size() << " test) to " << out.string() << '\n';
  return 0;
}

struct Stats {
  Common common;
  DataOptions data;
};

int run_stats(const Stats& o) {
  json resolved = {{"command", "stats"}, {"data", data_json(o.data)}};
  std::optional<fs::path> out;
  if (!o.common.out.empty()) out = prepare_out(o.common.out, resolved);
  corpus::Dataset ds = select_split(o.data);
  corpus::CorpusStats s = corpus::compute_stats(ds);
  json j = {{"utterances", s.n_total},
            {"rephrase", s.n_rephrase},
            {"avg_source_len", s.avg_source_len},
            {"avg_target_len", s.avg_target_len},
            {"avg_keep", s.avg_keep},
            {"avg_add", s.avg_add},
            {"avg_delete", s.avg_delete}};
  json freq = json::object();
  for (const auto& [cat, f] : s.class_freq) freq[corpus::to_string(cat)] = f;
  j["change_frequency"] = freq;
  std::cout << std::fixed << std::setprecision(2);
  std::cout << "utterances      " << s.n_total << "\nrephrase        " << s.n_rephrase << "\navg source len  "
            << s.avg_source_len << "\navg target len  " << s.avg_target_len << "\navg keep        "
            << s.avg_keep << "\navg add         " << s.avg_add << "\navg delete      " << s.avg_delete
            << '\n';
  for (const auto& [cat, f] : s.class_freq) {
    std::cout << "change " << std::left << std::setw(22) << corpus::to_string(cat) << f << '\n';
  }
  std::cout << j.dump() << '\n';
  if (out) write_json_file(*out / "stats.json", j);
  return 0;
}

struct Train {
  Common common;
  DataOptions data;
  std::string arch;
  TrainFlags flags;
  CopyFlags copy;
  std::optional<std::size_t> top_k;
};

int run_train(const Train& o) {
  json cfg = load_config(o.common);
  std::string arch = !o.arch.empty() ? o.arch : cfg.value("arch", std::string());
  if (arch != "pointer-lstm" && arch != "mini-transformer" && arch != "tagger") {
    throw UsageError("--arch must be pointer-lstm, mini-transformer or tagger");
  }
  std::uint64_t seed = resolve_seed(o.common, cfg);
  train::TrainConfig tc = train_config(section(cfg, "train"), o.flags, seed);
  std::size_t cap = cfg.value("vocab_cap", std::size_t{8000});
  json resolved = {{"command", "train"},        {"arch", arch},          {"seed", seed},
                   {"data", data_json(o.data)}, {"train", tc.to_json()}, {"vocab_cap", cap}};

  if (arch == "tagger") {
    std::size_t k = o.top_k.value_or(cfg.value("phrases_top_k", std::size_t{100}));
    models::TaggerConfig mc = models::TaggerConfig::from_json(model_json(cfg, seed));
    resolved["model"] = mc.to_json();
    resolved["phrases_top_k"] = k;
    fs::path out = prepare_out(o.common.out, resolved);
    auto [train_ds, valid_ds] = train_valid(o.data);
    auto pairs = train::dataset_pairs(train_ds);
    editops::PhraseVocabulary phrases = editops::extract_phrases(pairs).top(k);
    std::vector<editops::Pair> covered;
    for (const auto& p : pairs) {
      if (editops::to_tags(p.first, p.second, &phrases)) covered.push_back(p);
    }
    models::CrfTagger tagger(mc, train::build_vocabulary(train_ds, cap), phrases);
    train::TrainResult r =
        train::train_tagger(tagger, covered, &valid_ds, with_log(tc, out, "train_log.jsonl"));
    models::save_tagger(out / "model", tagger);
    json summary = result_json(r);
    summary["pairs_used"] = covered.size();
    summary["pairs_dropped"] = pairs.size() - covered.size();
    write_json_file(out / "summary.json", summary);
    std::cout << summary.dump() << '\n';
    return r.diverged ? 2 : 0;
  }

  auto copy = copy_config(cfg, o.copy, false);
  json mj = model_json(cfg, seed);
  auto [train_ds, valid_ds] = train_valid(o.data);
  auto model = models::make_seq2seq(arch, mj, train::build_vocabulary(train_ds, cap));
  resolved["model"] = model->config();
  if (copy) resolved["copy_loss"] = copy->to_json();
  fs::path out = prepare_out(o.common.out, resolved);
  train::TrainResult r =
      train::train_seq2seq(*model, train_ds, valid_ds, with_log(tc, out, "train_log.jsonl"), copy);
  models::save_seq2seq(out / "model", *model);
  json summary = result_json(r);
  write_json_file(out / "summary.json", summary);
  std::cout << summary.dump() << '\n';
  return r.diverged ? 2 : 0;
}

struct Pretrain {
  Common common;
  DataOptions data;
  TrainFlags flags;
  std::optional<double> mask_prob;
};

int run_pretrain(const Pretrain& o) {
  json cfg = load_config(o.common);
  std::uint64_t seed = resolve_seed(o.common, cfg);
  train::PretrainConfig pc;
  pc.train = train_config(section(cfg, "train"), o.flags, seed);
  json corr = section(cfg, "corruption");
  pc.corruption.mask_prob = o.mask_prob.value_or(corr.value("mask_prob", pc.corruption.mask_prob));
  pc.corruption.span_infill = corr.value("span_infill", pc.corruption.span_infill);
  if (!(pc.corruption.mask_prob >= 0 && pc.corruption.mask_prob <= 1)) {
    throw UsageError("mask_prob must be in [0, 1]");
  }
  std::size_t cap = cfg.value("vocab_cap", std::size_t{8000});
  corpus::Splits s = load_splits(o.data);
  if (s.train.empty()) throw UsageError("no training data in " + o.data.path);
  models::MiniTransformer model(models::TransformerConfig::from_json(model_json(cfg, seed)),
                                train::build_vocabulary(s.train, cap));
  json resolved = {
      {"command", "pretrain"},
      {"seed", seed},
      {"data", data_json(o.data)},
      {"model", model.config()},
      {"train", pc.train.to_json()},
      {"corruption", {{"mask_prob", pc.corruption.mask_prob}, {"span_infill", pc.corruption.span_infill}}},
      {"vocab_cap", cap}};
  fs::path out = prepare_out(o.common.out, resolved);
  std::vector<Words> text;
  for (const auto& u : s.train.utterances) {
    text.push_back(u.content());
    text.push_back(u.top_reference());
  }
  pc.train = with_log(pc.train, out, "pretrain_log.jsonl");
  train::TrainResult r = train::pretrain_denoising(model, text, pc);
  models::save_seq2seq(out / "model", model);
  json summary = result_json(r);
  if (!r.log.empty()) summary["final_train_loss"] = r.log.back().train_loss;
  write_json_file(out / "summary.json", summary);
  std::cout << summary.dump() << '\n';
  return r.diverged ? 2 : 0;
}

struct FinetuneCopy {
  Common common;
  DataOptions data;
  std::string checkpoint;
  TrainFlags flags;
  CopyFlags copy;
};

int run_finetune_copy(const FinetuneCopy& o) {
  json cfg = load_config(o.common);
  std::uint64_t seed = resolve_seed(o.common, cfg);
  train::TrainConfig tc = train_config(section(cfg, "train"), o.flags, seed);
  train::CopyLossConfig copy = *copy_config(cfg, o.copy, true);
  if (model_arch(o.checkpoint) != "mini-transformer") {
    throw UsageError("finetune-copy needs a mini-transformer checkpoint");
  }
  auto loaded = models::load_seq2seq(o.checkpoint);
  auto* model = dynamic_cast<models::MiniTransformer*>(loaded.get());
  if (model->has_copy()) throw UsageError("checkpoint already has a copy head");
  json resolved = {{"command", "finetune-copy"}, {"seed", seed},          {"checkpoint", o.checkpoint},
                   {"data", data_json(o.data)},  {"train", tc.to_json()}, {"copy_loss", copy.to_json()}};
  fs::path out = prepare_out(o.common.out, resolved);
  auto [train_ds, valid_ds] = train_valid(o.data);
  train::TrainResult r =
      train::finetune_with_copy(*model, train_ds, valid_ds, with_log(tc, out, "train_log.jsonl"), copy, seed);
  models::save_seq2seq(out / "model", *model);
  json summary = result_json(r);
  train::CopyUsage usage = train::copy_usage(*model, valid_ds);
  summary["valid_copy_mean_p"] = usage.mean_p;
  summary["valid_copy_alpha_over_half"] = usage.frac_alpha_over_half;
  write_json_file(out / "summary.json", summary);
  std::cout << summary.dump() << '\n';
  return r.diverged ? 2 : 0;
}

struct Distill {
  Common common;
  DataOptions data;
  std::string teacher;
  std::string student_config;
  std::optional<int> beam;
  bool ft_gold = false;
  std::optional<unsigned> threads;
};

int run_distill(const Distill& o) {
  Common student_common = o.common;
  if (!o.student_config.empty()) student_common.config = o.student_config;
  json cfg = load_config(student_common);
  std::uint64_t seed = resolve_seed(o.common, cfg);
  std::string arch = cfg.value("arch", std::string("pointer-lstm"));
  if (arch != "pointer-lstm" && arch != "mini-transformer") {
    throw UsageError("student arch must be pointer-lstm or mini-transformer");
  }
  train::DistillConfig dc;
  dc.decode.beam_width = o.beam.value_or(cfg.value("beam", dc.decode.beam_width));
  dc.decode.max_len = cfg.value("max_len", dc.decode.max_len);
  dc.finetune_on_gold = o.ft_gold || cfg.value("finetune_on_gold", false);
  TrainFlags none;
  dc.student = train_config(section(cfg, "train"), none, seed);
  dc.finetune = cfg.contains("finetune") ? train_config(cfg["finetune"], none, seed) : dc.student;
  dc.threads = o.threads.value_or(cfg.value("threads", 0u));
  dc.validate();
  std::size_t cap = cfg.value("vocab_cap", std::size_t{8000});

  std::unique_ptr<models::Seq2SeqModel> teacher_model;
  train::Teacher teacher;
  if (o.teacher == "oracle") {
    teacher = train::oracle_teacher();
  } else if (o.teacher == "copy") {
    teacher = train::copy_teacher();
  } else {
    if (!fs::is_directory(o.teacher)) throw UsageError("teacher must be oracle, copy or a model directory");
    if (model_arch(o.teacher) == "tagger") throw UsageError("the teacher must be a seq2seq model");
    teacher_model = models::load_seq2seq(o.teacher);
    teacher = train::model_teacher(*teacher_model, dc.decode);
  }
  auto [train_ds, valid_ds] = train_valid(o.data);
  auto student = models::make_seq2seq(arch, model_json(cfg, seed), train::build_vocabulary(train_ds, cap));
  json resolved = dc.to_json();
  resolved.update({{"command", "distill"},
                   {"seed", seed},
                   {"teacher", o.teacher},
                   {"arch", arch},
                   {"data", data_json(o.data)},
                   {"model", student->config()},
                   {"vocab_cap", cap}});
  fs::path out = prepare_out(o.common.out, resolved);
  dc.student = with_log(dc.student, out, "student_log.jsonl");
  dc.finetune = with_log(dc.finetune, out, "finetune_log.jsonl");
  train::DistillResult r = train::distill(teacher, *student, train_ds, valid_ds, dc);
  {
    std::ofstream f(out / "pseudo.jsonl");
    corpus::write_jsonl(f, r.pseudo);
  }
  models::save_seq2seq(out / "model", *student);
  json summary = {{"skipped", r.skipped}, {"stage2", result_json(r.stage2)}};
  if (r.stage3) summary["stage3"] = result_json(*r.stage3);
  write_json_file(out / "summary.json", summary);
  std::cout << summary.dump() << '\n';
  bool diverged = r.stage2.diverged || (r.stage3 && r.stage3->diverged);
  return diverged ? 2 : 0;
}

struct GridSearch {
  Common common;
  DataOptions data;
  std::string checkpoint;
  TrainFlags flags;
  std::optional<unsigned> threads;
};

int run_gridsearch(const GridSearch& o) {
  json cfg = load_config(o.common);
  std::uint64_t seed = resolve_seed(o.common, cfg);
  train::TrainConfig tc = train_config(section(cfg, "train"), o.flags, seed);
  train::GridSpec spec = train::GridSpec::full();
  json grid = section(cfg, "grid");
  if (grid.contains("lambdas")) spec.lambdas = grid["lambdas"].get<std::vector<double>>();
  if (grid.contains("thresholds")) spec.thresholds = grid["thresholds"].get<std::vector<double>>();
  for (double l : spec.lambdas) {
    for (double t : spec.thresholds) train::CopyLossConfig{l, t, false}.validate();
  }
  bool alpha_only = section(cfg, "copy_loss").value("hinge_on_alpha_only", false);
  unsigned threads = o.threads.value_or(cfg.value("threads", 0u));
  std::size_t cap = cfg.value("vocab_cap", std::size_t{8000});
  std::string checkpoint = !o.checkpoint.empty() ? o.checkpoint : cfg.value("checkpoint", std::string());
  std::string arch = checkpoint.empty() ? cfg.value("arch", std::string("pointer-lstm")) : "mini-transformer";
  if (arch != "pointer-lstm" && arch != "mini-transformer") throw UsageError("unsupported grid arch " + arch);
  if (arch == "mini-transformer" && checkpoint.empty()) {
    throw UsageError("a mini-transformer grid needs --checkpoint with a pretrained model");
  }
  if (!checkpoint.empty() && model_arch(checkpoint) != "mini-transformer") {
    throw UsageError("--checkpoint must hold a mini-transformer");
  }
  json resolved = {{"command", "gridsearch"},
                   {"seed", seed},
                   {"arch", arch},
                   {"data", data_json(o.data)},
                   {"train", tc.to_json()},
                   {"threads", threads},
                   {"grid", {{"lambdas", spec.lambdas}, {"thresholds", spec.thresholds}}},
                   {"hinge_on_alpha_only", alpha_only},
                   {"vocab_cap", cap}};
  if (!checkpoint.empty()) resolved["checkpoint"] = checkpoint;
  auto [train_ds, valid_ds] = train_valid(o.data);
  json mj = model_json(cfg, seed);
  models::Vocabulary vocab = train::build_vocabulary(train_ds, cap);
  if (checkpoint.empty()) resolved["model"] = models::make_seq2seq(arch, mj, vocab)->config();
  fs::path out = prepare_out(o.common.out, resolved);

  train::CellRunner runner;
  if (checkpoint.empty()) {
    runner = train::seq2seq_cell_runner([&] { return models::make_seq2seq(arch, mj, vocab); }, train_ds,
                                        valid_ds, tc);
  } else {
    runner = [&](const train::CopyLossConfig& copy) {
      auto loaded = models::load_seq2seq(checkpoint);
      auto& model = dynamic_cast<models::MiniTransformer&>(*loaded);
      return train::finetune_with_copy(model, train_ds, valid_ds, tc, copy, seed).best_valid_em;
    };
  }
  train::CellRunner with_flag = [&](const train::CopyLossConfig& c) {
    train::CopyLossConfig copy = c;
    copy.hinge_on_alpha_only = alpha_only;
    return runner(copy);
  };
  train::GridReport report = train::grid_search(spec, with_flag, threads);
  {
    std::ofstream f(out / "grid.csv");
    train::write_grid_csv(f, report);
  }
  json best = {{"lambda", report.best.lambda},
               {"threshold", report.best.threshold},
               {"valid_em", report.best.valid_em},
               {"cells", report.cells.size()}};
  write_json_file(out / "best.json", best);
  std::cout << best.dump() << '\n';
  return 0;
}

struct Predict {
  Common common;
  DataOptions data;
  std::string checkpoint;
  std::string decode = "greedy";
  int max_len = 40;
};

int run_predict(const Predict& o) {
  models::DecodeConfig dc = models::DecodeConfig::parse(o.decode);
  dc.max_len = o.max_len;
  if (dc.max_len < 1) throw UsageError("--max-len must be positive");
  std::string arch = model_arch(o.checkpoint);
  json resolved = {{"command", "predict"},     {"checkpoint", o.checkpoint}, {"arch", arch},
                   {"decode", dc.to_string()}, {"max_len", dc.max_len},      {"data", data_json(o.data)}};
  fs::path out = prepare_out(o.common.out, resolved);
  corpus::Dataset ds = select_split(o.data);
  metrics::Predictions preds;
  if (arch == "tagger") {
    preds = train::predict_tagger(*models::load_tagger(o.checkpoint), ds);
  } else {
    preds = train::predict(*models::load_seq2seq(o.checkpoint), ds, dc);
  }
  std::ofstream f(out / "predictions.tsv");
  for (const auto& u : ds.utterances) f << u.id << '\t' << join(preds.at(u.id)) << '\n';
  if (!f) throw std::runtime_error("cannot write predictions");
  std::cout << "wrote " << ds.size() << " predictions to " << (out / "predictions.tsv").string() << '\n';
  return 0;
}

struct Eval {
  Common common;
  DataOptions data;
  std::string pred;
  bool delete_precision = false;
};

metrics::Predictions read_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read " + path);
  metrics::Predictions preds;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw UsageError(path + ":" + std::to_string(lineno) + ": expected id<TAB>tokens");
    }
    preds[line.substr(0, tab)] = split_words(line.substr(tab + 1));
  }
  return preds;
}

int run_eval(const Eval& o) {
  json resolved = {{"command", "eval"},
                   {"pred", o.pred},
                   {"data", data_json(o.data)},
                   {"sari_delete_precision", o.delete_precision}};
  std::optional<fs::path> out;
  if (!o.common.out.empty()) out = prepare_out(o.common.out, resolved);
  corpus::Dataset ds = select_split(o.data);
  metrics::Predictions preds = read_predictions(o.pred);
  metrics::EvalReport r = metrics::corpus_eval(preds, ds, metrics::SariConfig{o.delete_precision});
  double cer = metrics::copy_error_rate(preds, ds);
  std::cout << metrics::to_text(r) << "copy_error_rate=" << cer << '\n';
  if (out) {
    json j = json::parse(metrics::to_json(r));
    j["copy_error_rate"] = cer;
    write_json_file(*out / "eval.json", j);
  }
  return 0;
}

struct Phrases {
  Common common;
  DataOptions data;
  std::size_t top_k = 100;
};

int run_phrases(const Phrases& o) {
  json resolved = {{"command", "phrases"}, {"top_k", o.top_k}, {"data", data_json(o.data)}};
  std::optional<fs::path> out;
  if (!o.common.out.empty()) out = prepare_out(o.common.out, resolved);
  corpus::Dataset ds = select_split(o.data);
  auto pairs = train::dataset_pairs(ds);
  editops::PhraseVocabulary all = editops::extract_phrases(pairs);
  std::vector<std::size_t> ks;
  for (std::size_t base = 1; base <= all.size(); base *= 10) {
    for (std::size_t m : {1, 2, 5}) {
      if (base * m <= all.size()) ks.push_back(base * m);
    }
  }
  ks.push_back(std::min(o.top_k, all.size()));
  ks.push_back(all.size());
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  std::ostringstream curve;
  curve << "k\tcoverage\n";
  for (std::size_t k : ks) curve << k << '\t' << editops::coverage(pairs, all.top(k)) << '\n';
  double cov = editops::coverage(pairs, all.top(o.top_k));
  std::cout << "phrases " << all.size() << "\npairs " << pairs.size() << "\n"
            << curve.str() << "coverage@" << o.top_k << " " << cov << '\n';
  if (out) {
    std::ofstream pf(*out / "phrases.txt");
    all.top(o.top_k).write(pf);
    std::ofstream cf(*out / "coverage.tsv");
    cf << curve.str();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Message-content rephrasing: data, training, decoding and evaluation"};
  app.require_subcommand(1);

  GenData gen;
  auto* c_gen = app.add_subcommand("gen-data", "Write a synthetic dataset with train/valid/test splits");
  c_gen->add_option("--n", gen.n, "Number of utterances")->required()->check(CLI::PositiveNumber);
  add_common(c_gen, gen.common, true);

  Stats stats;
  auto* c_stats = app.add_subcommand("stats", "Print corpus statistics");
  add_common(c_stats, stats.common, false);
  add_data(c_stats, stats.data, "train");

  Train tr;
  auto* c_train = app.add_subcommand("train", "Train a pointer-lstm, mini-transformer or tagger");
  add_common(c_train, tr.common, true);
  add_data(c_train, tr.data, "train");
  c_train->add_option("--arch", tr.arch, "Model architecture")
      ->check(CLI::IsMember({"pointer-lstm", "mini-transformer", "tagger"}));
  add_train_flags(c_train, tr.flags);
  add_copy_flags(c_train, tr.copy);
  c_train->add_option("--top-k", tr.top_k, "Tagger phrase vocabulary size");

  Pretrain pre;
  auto* c_pre = app.add_subcommand("pretrain", "Denoising pretraining of a mini-transformer");
  add_common(c_pre, pre.common, true);
  add_data(c_pre, pre.data, "train");
  add_train_flags(c_pre, pre.flags);
  c_pre->add_option("--mask-prob", pre.mask_prob, "Token masking probability");

  FinetuneCopy ft;
  auto* c_ft = app.add_subcommand("finetune-copy", "Graft a copy head and fine-tune with the copy hinge");
  add_common(c_ft, ft.common, true);
  add_data(c_ft, ft.data, "train");
  c_ft->add_option("--checkpoint", ft.checkpoint, "Pretrained model directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  add_train_flags(c_ft, ft.flags);
  add_copy_flags(c_ft, ft.copy);

  Distill dist;
  auto* c_dist = app.add_subcommand("distill", "Sequence-level knowledge distillation");
  add_common(c_dist, dist.common, true);
  add_data(c_dist, dist.data, "train");
  c_dist->add_option("--teacher", dist.teacher, "Teacher model directory, 'oracle' or 'copy'")->required();
  c_dist->add_option("--student-config", dist.student_config, "Student JSON config")
      ->check(CLI::ExistingFile);
  c_dist->add_option("--beam", dist.beam, "Teacher beam width")->check(CLI::PositiveNumber);
  c_dist->add_flag("--ft-gold", dist.ft_gold, "Fine-tune the student on gold targets afterwards");
  c_dist->add_option("--threads", dist.threads, "Teacher decoding threads (0: all cores)");

  GridSearch gs;
  auto* c_gs = app.add_subcommand("gridsearch", "Grid search over the copy hinge lambda and T");
  add_common(c_gs, gs.common, true);
  add_data(c_gs, gs.data, "train");
  c_gs->add_option("--checkpoint", gs.checkpoint, "Pretrained mini-transformer to fine-tune per cell")
      ->check(CLI::ExistingDirectory);
  add_train_flags(c_gs, gs.flags);
  c_gs->add_option("--threads", gs.threads, "Cells trained in parallel (0: all cores)");

  Predict pr;
  auto* c_pr = app.add_subcommand("predict", "Decode a dataset split with a trained model");
  add_common(c_pr, pr.common, true);
  add_data(c_pr, pr.data, "test");
  c_pr->add_option("--checkpoint", pr.checkpoint, "Model directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  c_pr->add_option("--decode", pr.decode, "greedy or beam:k")->capture_default_str();
  c_pr->add_option("--max-len", pr.max_len, "Maximum output length")->capture_default_str();

  Eval ev;
  auto* c_ev = app.add_subcommand("eval", "Score predictions: EM, EM_any, BLEU, SARI, copy errors");
  add_common(c_ev, ev.common, false);
  add_data(c_ev, ev.data, "test");
  c_ev->add_option("--pred", ev.pred, "Predictions file (id<TAB>tokens)")
      ->required()
      ->check(CLI::ExistingFile);
  c_ev->add_flag("--sari-delete-precision", ev.delete_precision, "Score SARI deletions by precision only");

  Phrases ph;
  auto* c_ph = app.add_subcommand("phrases", "Extract insertion phrases and report coverage");
  add_common(c_ph, ph.common, false);
  add_data(c_ph, ph.data, "train");
  c_ph->add_option("--top-k", ph.top_k, "Phrase vocabulary size")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*c_gen) return run_gen_data(gen);
    if (*c_stats) return run_stats(stats);
    if (*c_train) return run_train(tr);
    if (*c_pre) return run_pretrain(pre);
    if (*c_ft) return run_finetune_copy(ft);
    if (*c_dist) return run_distill(dist);
    if (*c_gs) return run_gridsearch(gs);
    if (*c_pr) return run_predict(pr);
    if (*c_ev) return run_eval(ev);
    if (*c_ph) return run_phrases(ph);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const corpus::ValidationError& e) {
    std::cerr << "invalid data: " << e.what() << '\n';
    return 1;
  } catch (const corpus::ParseError& e) {
    std::cerr << "invalid data: " << e.what() << '\n';
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "invalid config: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failed: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
