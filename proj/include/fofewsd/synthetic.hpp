#pragma once

// Synthetic pseudoword benchmark. Two pairs of real words, each word with its
// own topical context vocabulary, are merged into pseudowords (e.g. "banana"
// and "door" become "bananadoor" with senses bananadoor%1 and bananadoor%2).
// The unlabelled corpus uses the original words; the labelled files replace
// them with the pseudoword and record which original word stood there.
//
// Labelled training and test data cover the first pseudoword only. The second
// pseudoword appears solely in unseen.tsv, so every prediction for it must
// come from first-sense backoff.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "fofewsd/corpus.hpp"
#include "fofewsd/error.hpp"
#include "fofewsd/random.hpp"

namespace fofewsd::synthetic {

struct SyntheticConfig {
  std::uint64_t seed = 1;
  std::size_t corpus_sentences = 600;
  std::size_t train_instances = 200;
  std::size_t test_instances = 100;
  std::size_t unseen_instances = 100;
  std::size_t min_length = 6;
  std::size_t max_length = 12;
  double topic_probability = 0.6;  // chance a non-target slot draws a topic word
  std::size_t min_topic_words = 2;

  void validate() const {
    if (min_length < min_topic_words + 1 || max_length < min_length)
      throw InvalidArgument("synthetic sentence lengths must satisfy min_topic_words < min_length <= max_length");
    if (!(topic_probability >= 0.0 && topic_probability <= 1.0))
      throw InvalidArgument("topic_probability must lie in [0, 1]");
  }
};

struct Word {
  std::string surface;
  std::vector<std::string> topic;
};

struct Pseudoword {
  std::string lemma;
  Word senses[2];

  std::string sense_key(int i) const { return lemma + "%" + std::to_string(i + 1); }
};

inline const std::vector<std::string>& filler_words() {
  static const std::vector<std::string> words{"the", "a",    "of",   "to",   "in",    "and",  "is",
                                              "was", "for",  "on",   "with", "at",    "by",   "it",
                                              "this", "that", "from", "as",  "but",   "very"};
  return words;
}

inline const std::vector<Pseudoword>& pseudowords() {
  static const std::vector<Pseudoword> words{
      {"bananadoor",
       {{"banana", {"fruit", "ripe", "yellow", "peel", "eat", "sweet", "kitchen", "market", "fresh", "snack",
                    "lunch", "monkey", "tree", "bunch", "smoothie", "bread", "juice", "breakfast", "slice", "basket"}},
        {"door", {"open", "close", "knock", "lock", "key", "hinge", "frame", "wooden", "front", "handle", "room",
                  "wall", "window", "house", "porch", "entrance", "slam", "doorbell", "visitor", "hallway"}}}},
      {"guitarocean",
       {{"guitar", {"play", "string", "chord", "song", "band", "concert", "melody", "strum", "amplifier", "rock",
                    "tune", "stage", "acoustic", "pick", "sing", "rhythm", "note", "solo", "music", "lesson"}},
        {"ocean", {"wave", "tide", "salt", "shore", "deep", "blue", "ship", "sail", "fish", "whale", "beach",
                   "current", "coral", "swim", "storm", "horizon", "island", "water", "sand", "boat"}}}}};
  return words;
}

struct SyntheticData {
  std::vector<std::string> corpus;
  std::vector<LabeledInstance> train;
  std::vector<LabeledInstance> test;
  std::vector<LabeledInstance> unseen;
  std::vector<std::pair<std::string, std::vector<std::string>>> inventory;
};

namespace detail {

// Sentence around `center` with the center word at a random position; returns
// the tokens and the position.
inline std::pair<std::vector<std::string>, std::size_t> make_sentence(const Word& center, const std::string& surface,
                                                                      const SyntheticConfig& cfg, Rng& rng) {
  const std::size_t len = cfg.min_length + rng.below(cfg.max_length - cfg.min_length + 1);
  const std::size_t pos = rng.below(len);
  std::vector<std::string> tokens(len);
  std::size_t topical = 0;
  for (std::size_t i = 0; i < len; ++i) {
    if (i == pos) continue;
    if (rng.bernoulli(cfg.topic_probability)) {
      tokens[i] = center.topic[rng.below(center.topic.size())];
      ++topical;
    } else {
      tokens[i] = filler_words()[rng.below(filler_words().size())];
    }
  }
  // Top up to the minimum number of topical words, replacing fillers left to right.
  for (std::size_t i = 0; i < len && topical < cfg.min_topic_words; ++i) {
    if (i == pos) continue;
    const auto& topic = center.topic;
    if (std::find(topic.begin(), topic.end(), tokens[i]) != topic.end()) continue;
    tokens[i] = topic[rng.below(topic.size())];
    ++topical;
  }
  tokens[pos] = surface;
  return {std::move(tokens), pos};
}

inline std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

inline std::vector<LabeledInstance> make_instances(const Pseudoword& pw, std::size_t n, const std::string& prefix,
                                                   const SyntheticConfig& cfg, Rng& rng) {
  std::vector<LabeledInstance> out;
  for (std::size_t i = 0; i < n; ++i) {
    const int sense = static_cast<int>(rng.below(2));
    auto [tokens, pos] = make_sentence(pw.senses[sense], pw.lemma, cfg, rng);
    char id[64];
    std::snprintf(id, sizeof id, "%s.%04zu", prefix.c_str(), i + 1);
    out.push_back({id, std::move(tokens), pos, pw.lemma, {pw.sense_key(sense)}});
  }
  return out;
}

}  // namespace detail

inline SyntheticData generate(const SyntheticConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  SyntheticData data;
  const auto& pws = pseudowords();
  for (std::size_t i = 0; i < cfg.corpus_sentences; ++i) {
    const auto& pw = pws[rng.below(pws.size())];
    const auto& word = pw.senses[rng.below(2)];
    data.corpus.push_back(detail::join(detail::make_sentence(word, word.surface, cfg, rng).first));
  }
  data.train = detail::make_instances(pws[0], cfg.train_instances, "train", cfg, rng);
  data.test = detail::make_instances(pws[0], cfg.test_instances, "test", cfg, rng);
  data.unseen = detail::make_instances(pws[1], cfg.unseen_instances, "unseen", cfg, rng);
  for (const auto& pw : pws) data.inventory.push_back({pw.lemma, {pw.sense_key(0), pw.sense_key(1)}});
  return data;
}

inline std::string format_labeled(const std::vector<LabeledInstance>& instances) {
  std::string out;
  for (const auto& inst : instances) {
    out += inst.instance_id + "\t" + detail::join(inst.tokens) + "\t" + std::to_string(inst.target_index) + "\t" +
           inst.lemma + "\t";
    for (std::size_t i = 0; i < inst.sense_keys.size(); ++i) out += (i ? "," : "") + inst.sense_keys[i];
    out += "\n";
  }
  return out;
}

struct OutputPaths {
  std::string corpus, train, test, unseen, inventory;
};

inline OutputPaths output_paths(const std::string& dir) {
  namespace fs = std::filesystem;
  auto p = [&](const char* name) { return (fs::path(dir) / name).string(); };
  return {p("corpus.txt"), p("train.tsv"), p("test.tsv"), p("unseen.tsv"), p("inventory.tsv")};
}

// Writes corpus.txt, train.tsv, test.tsv, unseen.tsv and inventory.tsv.
inline OutputPaths write(const SyntheticData& data, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const auto paths = output_paths(dir);
  auto dump = [](const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    out << text;
  };
  std::string corpus;
  for (const auto& line : data.corpus) corpus += line + "\n";
  dump(paths.corpus, corpus);
  dump(paths.train, format_labeled(data.train));
  dump(paths.test, format_labeled(data.test));
  dump(paths.unseen, format_labeled(data.unseen));
  std::string inv;
  for (const auto& [lemma, senses] : data.inventory) {
    inv += lemma + "\t";
    for (std::size_t i = 0; i < senses.size(); ++i) inv += (i ? "," : "") + senses[i];
    inv += "\n";
  }
  dump(paths.inventory, inv);
  return paths;
}

}  // namespace fofewsd::synthetic
