#pragma once

// Flat "key = value" run configuration shared by every subcommand. Config
// files are applied first, then command-line overrides; unknown keys are
// rejected.

#include <charconv>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "fofewsd/corpus.hpp"
#include "fofewsd/error.hpp"
#include "fofewsd/lm.hpp"
#include "fofewsd/wsd.hpp"

namespace fofewsd::config {

struct RunConfig {
  lm::LmConfig lm;
  wsd::ClassifierConfig classifier;
  std::size_t workers = 1;
  bool resume = false;

  std::string corpus;
  std::string train;
  std::string test;
  std::string inventory;
  std::string checkpoint;
  std::string store;
  std::string predictions;
  std::string report;
  std::string train_log;  // defaults to <checkpoint>.log

  void validate() const {
    lm.validate();
    classifier.validate();
    if (workers < 1) throw InvalidArgument("workers must be at least 1");
  }
};

inline std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

inline std::uint64_t parse_unsigned(std::string_view key, std::string_view text) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
    throw InvalidArgument(std::string(key) + ": expected a non-negative integer, got '" + std::string(text) + "'");
  return v;
}

inline double parse_real(std::string_view key, std::string_view text) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
    throw InvalidArgument(std::string(key) + ": expected a number, got '" + std::string(text) + "'");
  return v;
}

inline bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw InvalidArgument(std::string(key) + ": expected true or false, got '" + std::string(text) + "'");
}

struct KeySpec {
  std::string help;
  std::function<void(RunConfig&, std::string_view)> apply;
};

inline const std::map<std::string, KeySpec>& keys() {
  using C = RunConfig;
  using SV = std::string_view;
  static const std::map<std::string, KeySpec> table = [] {
    std::map<std::string, KeySpec> t;
    auto path = [&](const char* name, std::string C::*member, const char* help) {
      t[name] = {help, [member](C& c, SV v) { c.*member = std::string(v); }};
    };
    t["alpha"] = {"FOFE forgetting factor in (0,1) (default 0.7)",
                  [](C& c, SV v) { c.lm.fofe.alpha = parse_real("alpha", v); }};
    t["order"] = {"FOFE order (default 3)", [](C& c, SV v) { c.lm.fofe.order = parse_unsigned("order", v); }};
    t["embed_dim"] = {"word embedding dimension (default 32; large setup 512)",
                      [](C& c, SV v) { c.lm.embed_dim = parse_unsigned("embed_dim", v); }};
    t["hidden_dims"] = {"comma-separated hidden layer sizes (default 64,64; large setup 4096,4096,4096)",
                        [](C& c, SV v) {
                          std::vector<std::size_t> dims;
                          for (const auto& part : split(v, ',')) dims.push_back(parse_unsigned("hidden_dims", trim(part)));
                          c.lm.hidden_dims = std::move(dims);
                        }};
    t["vocab_size"] = {"maximum vocabulary size including <unk> (default 100000)",
                       [](C& c, SV v) { c.lm.vocab_max_size = parse_unsigned("vocab_size", v); }};
    t["window_cap"] = {"max context tokens per side, 0 = whole sentence (default 0)",
                       [](C& c, SV v) { c.lm.window_cap = parse_unsigned("window_cap", v); }};
    t["optimizer"] = {"adam or sgd (default adam)", [](C& c, SV v) {
                        if (v == "adam")
                          c.lm.rule = nn::UpdateRule::Adam;
                        else if (v == "sgd")
                          c.lm.rule = nn::UpdateRule::GradientDescent;
                        else
                          throw InvalidArgument("optimizer: expected adam or sgd, got '" + std::string(v) + "'");
                      }};
    t["learning_rate"] = {"learning rate (default 0.001)",
                          [](C& c, SV v) { c.lm.learning_rate = parse_real("learning_rate", v); }};
    t["beta1"] = {"Adam first-moment decay (default 0.9)", [](C& c, SV v) { c.lm.beta1 = parse_real("beta1", v); }};
    t["beta2"] = {"Adam second-moment decay (default 0.999)",
                  [](C& c, SV v) { c.lm.beta2 = parse_real("beta2", v); }};
    t["epsilon"] = {"Adam epsilon (default 1e-8)", [](C& c, SV v) { c.lm.epsilon = parse_real("epsilon", v); }};
    t["batch_size"] = {"minibatch size (default 16)",
                       [](C& c, SV v) { c.lm.batch_size = parse_unsigned("batch_size", v); }};
    t["epochs"] = {"training epochs (default 10)", [](C& c, SV v) { c.lm.epochs = parse_unsigned("epochs", v); }};
    t["seed"] = {"random seed (default 1)", [](C& c, SV v) { c.lm.seed = parse_unsigned("seed", v); }};
    t["k"] = {"neighbours for kNN (default 8)", [](C& c, SV v) { c.classifier.k = parse_unsigned("k", v); }};
    t["classifier"] = {"knn or cosine (default knn)", [](C& c, SV v) {
                         if (v == "knn")
                           c.classifier.method = wsd::Method::Knn;
                         else if (v == "cosine")
                           c.classifier.method = wsd::Method::Cosine;
                         else
                           throw InvalidArgument("classifier: expected knn or cosine, got '" + std::string(v) + "'");
                       }};
    t["workers"] = {"data-parallel workers; 1 is bit-reproducible (default 1)",
                    [](C& c, SV v) { c.workers = parse_unsigned("workers", v); }};
    t["resume"] = {"continue training from the existing checkpoint",
                   [](C& c, SV v) { c.resume = parse_bool("resume", v); }};
    path("corpus", &C::corpus, "unlabelled corpus, one sentence per line");
    path("train", &C::train, "labelled training instances (TSV)");
    path("test", &C::test, "labelled test instances (TSV)");
    path("inventory", &C::inventory, "sense inventory (TSV)");
    path("checkpoint", &C::checkpoint, "language model checkpoint");
    path("store", &C::store, "classifier store");
    path("predictions", &C::predictions, "predictions output (TSV)");
    path("report", &C::report, "evaluation report output (TSV)");
    path("train_log", &C::train_log, "per-epoch loss log (default <checkpoint>.log)");
    return t;
  }();
  return table;
}

inline void apply(RunConfig& cfg, const std::string& key, std::string_view value) {
  auto it = keys().find(key);
  if (it == keys().end()) throw InvalidArgument("unknown config key '" + key + "'");
  it->second.apply(cfg, trim(value));
}

// Applies "key = value" lines; '#' starts a comment, blank lines are ignored.
inline void apply_lines(RunConfig& cfg, const std::vector<std::string>& lines, const std::string& origin = "config") {
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string_view line = lines[i];
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw InvalidArgument(with_line(origin + ": expected key = value", i + 1));
    try {
      apply(cfg, std::string(trim(line.substr(0, eq))), line.substr(eq + 1));
    } catch (const InvalidArgument& e) {
      throw InvalidArgument(with_line(origin + ": " + e.what(), i + 1));
    }
  }
}

inline void apply_file(RunConfig& cfg, const std::string& path) {
  std::vector<std::string> lines;
  try {
    lines = read_lines(path);
  } catch (const DataError& e) {
    throw InvalidArgument(std::string("config file: ") + e.what());
  }
  apply_lines(cfg, lines, path);
}

}  // namespace fofewsd::config
