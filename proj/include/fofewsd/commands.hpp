#pragma once

// Pipeline stages behind the CLI subcommands. Each stage validates its
// configuration and checks its inputs exist before reading anything large.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "fofewsd/config.hpp"
#include "fofewsd/corpus.hpp"
#include "fofewsd/error.hpp"
#include "fofewsd/eval.hpp"
#include "fofewsd/fofe.hpp"
#include "fofewsd/lm.hpp"
#include "fofewsd/synthetic.hpp"
#include "fofewsd/wsd.hpp"

namespace fofewsd::cli {

// Verbosity from FOFEWSD_LOG: "quiet", "info" (default) or "debug".
enum class Verbosity { Quiet = 0, Info = 1, Debug = 2 };

inline Verbosity verbosity() {
  const char* v = std::getenv("FOFEWSD_LOG");
  if (!v) return Verbosity::Info;
  const std::string s(v);
  if (s == "quiet") return Verbosity::Quiet;
  if (s == "debug") return Verbosity::Debug;
  return Verbosity::Info;
}

inline void log(Verbosity level, const std::string& msg) {
  if (static_cast<int>(level) <= static_cast<int>(verbosity())) std::cerr << msg << '\n';
}

namespace detail {

inline void require_path(const std::string& value, const char* key) {
  if (value.empty()) throw InvalidArgument(std::string("missing required path '") + key + "'");
}

inline void require_readable(const std::string& path, const char* key) {
  require_path(path, key);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(std::string(key) + ": cannot read " + path);
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out << text;
  if (!out) throw DataError("write failed: " + path);
}

}  // namespace detail

struct EncodeArgs {
  std::string tokens;
  std::string vocab;  // space-separated; empty = distinct tokens in order of appearance
  double alpha = 0.7;
  std::string direction = "left";
  std::size_t order = 1;
};

// Vocab-space FOFE code as space-separated decimals, 12 significant digits.
// Vocabulary ids follow the order of `vocab` starting at 0.
inline std::string run_encode(const EncodeArgs& args) {
  fofe::FofeConfig cfg{args.alpha, args.order};
  cfg.validate();
  fofe::Direction dir;
  if (args.direction == "left")
    dir = fofe::Direction::Left;
  else if (args.direction == "right")
    dir = fofe::Direction::Right;
  else
    throw InvalidArgument("direction must be left or right");

  const auto tokens = tokenize_line(args.tokens);
  std::vector<std::string> vocab = args.vocab.empty() ? std::vector<std::string>{} : tokenize_line(args.vocab);
  if (args.vocab.empty())
    for (const auto& t : tokens)
      if (std::find(vocab.begin(), vocab.end(), t) == vocab.end()) vocab.push_back(t);
  TokenSequence ids;
  for (const auto& t : tokens) {
    auto it = std::find(vocab.begin(), vocab.end(), t);
    if (it == vocab.end()) throw InvalidArgument("token '" + t + "' is not in the encode vocabulary");
    ids.push_back(static_cast<TokenId>(it - vocab.begin()));
  }
  const Vector code = fofe::encode_order(ids, cfg, vocab.size(), dir);
  std::string out;
  for (std::size_t i = 0; i < code.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", code[i]);
    if (i) out += ' ';
    out += buf;
  }
  return out;
}

inline lm::TrainResult run_train(const config::RunConfig& cfg) {
  cfg.validate();
  detail::require_readable(cfg.corpus, "corpus");
  detail::require_path(cfg.checkpoint, "checkpoint");
  std::optional<lm::LmModel> resume;
  if (cfg.resume) {
    detail::require_readable(cfg.checkpoint, "checkpoint");
    resume = lm::load_checkpoint(cfg.checkpoint);
  }
  const std::string log_path = cfg.train_log.empty() ? cfg.checkpoint + ".log" : cfg.train_log;
  std::ofstream log_file(log_path, std::ios::binary | std::ios::trunc);
  if (!log_file) throw DataError("cannot write " + log_path);

  const auto lines = read_lines(cfg.corpus);
  lm::TrainOptions opts;
  opts.log = &log_file;
  opts.workers = cfg.workers;
  opts.resume = resume ? &*resume : nullptr;
  auto result = lm::train_lm(lines, cfg.lm, opts);
  lm::save_checkpoint(result.model, cfg.checkpoint);
  std::ostringstream msg;
  msg << "trained " << result.epoch_losses.size() << " epochs, vocabulary " << result.model.vocab.size();
  if (!result.epoch_losses.empty()) msg << ", final mean loss " << result.epoch_losses.back();
  msg << "; wrote " << cfg.checkpoint;
  log(Verbosity::Info, msg.str());
  return result;
}

inline wsd::ClassifierStore run_build(const config::RunConfig& cfg) {
  cfg.validate();
  detail::require_readable(cfg.checkpoint, "checkpoint");
  detail::require_readable(cfg.train, "train");
  detail::require_readable(cfg.inventory, "inventory");
  detail::require_path(cfg.store, "store");
  const auto inventory = read_sense_inventory(cfg.inventory);
  const auto instances = read_labeled_corpus(cfg.train);
  const auto model = lm::load_checkpoint(cfg.checkpoint);
  if (instances.empty()) log(Verbosity::Quiet, "warning: no labelled training instances; writing an empty store");
  auto store = wsd::build_classifier_store(model, instances, inventory, cfg.workers);
  wsd::save_store(store, cfg.store);
  for (const auto& [lemma, c] : store.lemmas()) {
    std::ostringstream line;
    line << lemma << '\t' << c.size() << " pairs";
    for (const auto& s : c.sense_order) line << '\t' << s << '=' << c.count(s);
    log(Verbosity::Info, line.str());
  }
  log(Verbosity::Info, "wrote " + cfg.store);
  return store;
}

inline std::vector<std::pair<std::string, std::string>> run_predict(const config::RunConfig& cfg) {
  cfg.validate();
  detail::require_readable(cfg.checkpoint, "checkpoint");
  detail::require_readable(cfg.store, "store");
  detail::require_readable(cfg.test, "test");
  detail::require_readable(cfg.inventory, "inventory");
  detail::require_path(cfg.predictions, "predictions");
  const auto inventory = read_sense_inventory(cfg.inventory);
  const auto instances = read_labeled_corpus(cfg.test);
  const auto store = wsd::load_store(cfg.store);

  std::vector<std::string> unknown;
  for (const auto& inst : instances)
    if (!inventory.contains(inst.lemma) && !store.find(inst.lemma)) unknown.push_back(inst.instance_id);
  if (!unknown.empty()) {
    std::string ids;
    for (const auto& id : unknown) ids += (ids.empty() ? "" : ", ") + id;
    throw DataError("unknown lemma for instances: " + ids);
  }

  const auto model = lm::load_checkpoint(cfg.checkpoint);
  if (!store.empty() && store.dim() != model.embedding_dim())
    throw DataError("classifier store dimension " + std::to_string(store.dim()) +
                    " does not match model embedding dimension " + std::to_string(model.embedding_dim()));
  wsd::SenseEmbeddings senses;
  if (cfg.classifier.method == wsd::Method::Cosine) senses = wsd::build_sense_embeddings(store);

  std::vector<std::pair<std::string, std::string>> out;
  std::size_t backoff = 0;
  for (const auto& inst : instances) {
    if (!store.find(inst.lemma)) ++backoff;
    out.emplace_back(inst.instance_id,
                     wsd::predict_with_backoff(store, inventory, model, cfg.classifier, inst, &senses));
  }
  detail::write_text(cfg.predictions, eval::format_predictions(out));
  log(Verbosity::Info, "predicted " + std::to_string(out.size()) + " instances (" + std::to_string(backoff) +
                           " by first-sense backoff); wrote " + cfg.predictions);
  return out;
}

inline eval::EvalReport run_eval(const config::RunConfig& cfg) {
  detail::require_readable(cfg.predictions, "predictions");
  detail::require_readable(cfg.test, "test");
  detail::require_path(cfg.report, "report");
  const auto predictions = eval::read_predictions(cfg.predictions);
  const auto gold = read_labeled_corpus(cfg.test);
  auto report = eval::score(predictions, gold);
  detail::write_text(cfg.report, eval::format_report(report));
  return report;
}

inline synthetic::OutputPaths run_gen_synthetic(const synthetic::SyntheticConfig& cfg, const std::string& out_dir) {
  if (out_dir.empty()) throw InvalidArgument("missing output directory");
  const auto data = synthetic::generate(cfg);
  auto paths = synthetic::write(data, out_dir);
  log(Verbosity::Info, "wrote synthetic benchmark to " + out_dir);
  return paths;
}

}  // namespace fofewsd::cli
