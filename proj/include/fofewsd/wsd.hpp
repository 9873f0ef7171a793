#pragma once

// Per-lemma sense classifiers over context embeddings.
//
// The primary classifier is k-nearest-neighbour voting under cosine distance.
// The baseline averages each sense's training embeddings into one sense
// embedding and picks the most cosine-similar one. Lemmas with no training
// pairs fall back to the inventory's first sense.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "fofewsd/binary_io.hpp"
#include "fofewsd/corpus.hpp"
#include "fofewsd/error.hpp"
#include "fofewsd/lm.hpp"
#include "fofewsd/tensor.hpp"

namespace fofewsd::wsd {

enum class Method { Knn, Cosine };

struct ClassifierConfig {
  std::size_t k = 8;
  Method method = Method::Knn;

  void validate() const {
    if (k < 1) throw InvalidArgument("k must be at least 1");
  }
};

inline double norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

// Cosine similarity; 0 when either vector has zero norm.
inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

// 1 - cosine similarity; a zero-norm vector is at distance 1 from everything.
inline double cosine_distance(std::span<const double> a, std::span<const double> b) {
  return 1.0 - cosine_similarity(a, b);
}

struct LemmaClassifier {
  std::vector<std::string> sense_order;  // inventory order, used for tie-breaks
  std::vector<Vector> embeddings;        // training pairs, in instance order
  std::vector<std::string> senses;

  std::size_t size() const { return embeddings.size(); }

  std::size_t count(std::string_view sense) const {
    return static_cast<std::size_t>(std::count(senses.begin(), senses.end(), sense));
  }

  // Position in sense_order; senses missing from it rank last.
  std::size_t rank(std::string_view sense) const {
    auto it = std::find(sense_order.begin(), sense_order.end(), sense);
    return static_cast<std::size_t>(it - sense_order.begin());
  }

  bool operator==(const LemmaClassifier&) const = default;
};

class ClassifierStore {
 public:
  ClassifierStore() = default;
  explicit ClassifierStore(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  bool empty() const { return lemmas_.empty(); }
  const std::map<std::string, LemmaClassifier>& lemmas() const { return lemmas_; }

  const LemmaClassifier* find(const std::string& lemma) const {
    auto it = lemmas_.find(lemma);
    return it == lemmas_.end() || it->second.size() == 0 ? nullptr : &it->second;
  }

  void add_pair(const std::string& lemma, const std::vector<std::string>& sense_order, std::string sense,
                Vector embedding) {
    if (embedding.size() != dim_)
      throw InvalidArgument("embedding dimension " + std::to_string(embedding.size()) + " does not match store " +
                            std::to_string(dim_));
    auto& c = lemmas_[lemma];
    if (c.sense_order.empty()) c.sense_order = sense_order;
    c.embeddings.push_back(std::move(embedding));
    c.senses.push_back(std::move(sense));
  }

  // Used by deserialization; replaces any existing entry.
  void put(std::string lemma, LemmaClassifier c) { lemmas_[std::move(lemma)] = std::move(c); }

  std::size_t pair_count() const {
    std::size_t n = 0;
    for (const auto& [_, c] : lemmas_) n += c.size();
    return n;
  }

  bool operator==(const ClassifierStore&) const = default;

 private:
  std::size_t dim_ = 0;
  std::map<std::string, LemmaClassifier> lemmas_;
};

// Validates instances against the inventory: the lemma must be listed and
// every gold key must be one of its senses.
inline void check_against_inventory(const std::vector<LabeledInstance>& instances, const SenseInventory& inventory) {
  for (const auto& inst : instances) {
    if (!inventory.contains(inst.lemma))
      throw DataError("instance '" + inst.instance_id + "': lemma '" + inst.lemma + "' not in sense inventory");
    for (const auto& key : inst.sense_keys)
      if (!inventory.has_sense(inst.lemma, key))
        throw DataError("instance '" + inst.instance_id + "': sense key '" + key + "' not listed for lemma '" +
                        inst.lemma + "'");
  }
}

// Embeds every instance (in parallel when workers > 1) and groups the pairs by
// lemma in file order. An instance with several gold keys contributes one
// pair per key, all sharing its embedding. Embeddings are narrowed to f32.
inline ClassifierStore build_classifier_store(const lm::LmModel& model, const std::vector<LabeledInstance>& instances,
                                              const SenseInventory& inventory, std::size_t workers = 1) {
  check_against_inventory(instances, inventory);
  std::vector<Vector> embeddings(instances.size());
  auto embed_range = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      auto e = lm::context_embedding(model, instances[i].tokens, instances[i].target_index);
      for (double& v : e) v = binary::to_f32(v);
      embeddings[i] = std::move(e);
    }
  };
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(1, instances.size()));
  if (workers == 1) {
    embed_range(0, instances.size());
  } else {
    const std::size_t per = (instances.size() + workers - 1) / workers;
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back(embed_range, std::min(instances.size(), w * per),
                        std::min(instances.size(), (w + 1) * per));
  }
  ClassifierStore store(model.embedding_dim());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto& inst = instances[i];
    for (const auto& key : inst.sense_keys)
      store.add_pair(inst.lemma, *inventory.senses(inst.lemma), key, embeddings[i]);
  }
  return store;
}

// Majority vote over the min(k, n) nearest pairs by cosine distance (ties in
// distance keep training order). Vote ties go to the sense whose voting
// neighbours have the smaller mean distance, then to inventory order.
// Returns nullopt when the lemma has no classifier.
inline std::optional<std::string> predict_knn(const ClassifierStore& store, const ClassifierConfig& cfg,
                                              const std::string& lemma, std::span<const double> query) {
  cfg.validate();
  const LemmaClassifier* c = store.find(lemma);
  if (!c) return std::nullopt;
  if (query.size() != store.dim()) throw InvalidArgument("query dimension does not match store");

  std::vector<double> dist(c->size());
  for (std::size_t i = 0; i < dist.size(); ++i) dist[i] = cosine_distance(query, c->embeddings[i]);
  std::vector<std::size_t> idx(dist.size());
  std::iota(idx.begin(), idx.end(), 0);
  const std::size_t take = std::min(cfg.k, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take), idx.end(),
                    [&](std::size_t a, std::size_t b) { return dist[a] != dist[b] ? dist[a] < dist[b] : a < b; });

  struct Vote {
    std::size_t count = 0;
    double distance_sum = 0.0;
  };
  std::map<std::string, Vote> votes;
  for (std::size_t i = 0; i < take; ++i) {
    auto& v = votes[c->senses[idx[i]]];
    ++v.count;
    v.distance_sum += dist[idx[i]];
  }
  const std::string* best = nullptr;
  Vote best_vote;
  for (const auto& [sense, v] : votes) {
    if (best) {
      if (v.count != best_vote.count) {
        if (v.count < best_vote.count) continue;
      } else {
        const double mean = v.distance_sum / static_cast<double>(v.count);
        const double best_mean = best_vote.distance_sum / static_cast<double>(best_vote.count);
        if (mean > best_mean) continue;
        if (mean == best_mean && c->rank(sense) >= c->rank(*best)) continue;
      }
    }
    best = &sense;
    best_vote = v;
  }
  return *best;
}

// lemma -> (sense, mean embedding) in inventory order, senses with n >= 1 only.
using SenseEmbeddings = std::map<std::string, std::vector<std::pair<std::string, Vector>>>;

inline SenseEmbeddings build_sense_embeddings(const ClassifierStore& store) {
  SenseEmbeddings out;
  for (const auto& [lemma, c] : store.lemmas()) {
    std::vector<std::string> order = c.sense_order;
    for (const auto& s : c.senses)
      if (std::find(order.begin(), order.end(), s) == order.end()) order.push_back(s);
    auto& entry = out[lemma];
    for (const auto& sense : order) {
      Vector mean(store.dim(), 0.0);
      std::size_t n = 0;
      for (std::size_t i = 0; i < c.size(); ++i)
        if (c.senses[i] == sense) {
          axpy(1.0, c.embeddings[i], mean);
          ++n;
        }
      if (n == 0) continue;
      for (double& v : mean) v /= static_cast<double>(n);
      entry.emplace_back(sense, std::move(mean));
    }
    if (entry.empty()) out.erase(lemma);
  }
  return out;
}

// Sense whose mean embedding is most cosine-similar to the query; ties keep
// inventory order. nullopt when the lemma has no sense embeddings.
inline std::optional<std::string> predict_cosine(const SenseEmbeddings& senses, const std::string& lemma,
                                                 std::span<const double> query) {
  auto it = senses.find(lemma);
  if (it == senses.end() || it->second.empty()) return std::nullopt;
  const std::string* best = nullptr;
  double best_sim = -INFINITY;
  for (const auto& [sense, mean] : it->second) {
    if (mean.size() != query.size()) throw InvalidArgument("query dimension does not match sense embeddings");
    const double sim = cosine_similarity(query, mean);
    if (sim > best_sim) {
      best_sim = sim;
      best = &sense;
    }
  }
  return *best;
}

// Classifier prediction when the lemma has training pairs, otherwise the
// first inventory sense. The cosine method needs `senses`.
inline std::string predict_with_backoff(const ClassifierStore& store, const SenseInventory& inventory,
                                        const lm::LmModel& model, const ClassifierConfig& cfg,
                                        const LabeledInstance& instance, const SenseEmbeddings* senses = nullptr) {
  if (!store.find(instance.lemma)) {
    if (!inventory.contains(instance.lemma)) throw DataError("unknown lemma '" + instance.lemma + "'");
    return inventory.first_sense(instance.lemma);
  }
  const Vector query = lm::context_embedding(model, instance.tokens, instance.target_index);
  std::optional<std::string> got;
  if (cfg.method == Method::Cosine) {
    if (!senses) throw InvalidArgument("cosine prediction needs sense embeddings");
    got = predict_cosine(*senses, instance.lemma, query);
  } else {
    got = predict_knn(store, cfg, instance.lemma, query);
  }
  return got ? *got : inventory.first_sense(instance.lemma);
}

// Store container, little-endian:
//   "FWSD" u32 version, u32 dim, u32 lemma count, then per lemma:
//   string lemma, u32 n + strings (sense order), u32 pairs,
//   per pair: string sense, dim f32 values
//   u64 checksum of all preceding bytes
inline constexpr std::string_view kStoreMagic = "FWSD";
inline constexpr std::uint32_t kStoreVersion = 1;

inline std::vector<char> serialize_store(const ClassifierStore& store) {
  binary::Writer w(kStoreMagic);
  w.put_u32(kStoreVersion);
  w.put_u32(store.dim());
  w.put_u32(store.lemmas().size());
  for (const auto& [lemma, c] : store.lemmas()) {
    w.put_string(lemma);
    w.put_u32(c.sense_order.size());
    for (const auto& s : c.sense_order) w.put_string(s);
    w.put_u32(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
      w.put_string(c.senses[i]);
      for (double v : c.embeddings[i]) w.put(static_cast<float>(v));
    }
  }
  return std::move(w).finish();
}

inline ClassifierStore deserialize_store(std::vector<char> bytes) {
  binary::Reader r(std::move(bytes), kStoreMagic, "classifier store");
  const auto version = r.get_u32();
  if (version != kStoreVersion) throw DataError("incompatible classifier store: format version " + std::to_string(version));
  ClassifierStore store(r.get_u32());
  const std::size_t lemmas = r.get_u32();
  for (std::size_t l = 0; l < lemmas; ++l) {
    std::string lemma = r.get_string();
    LemmaClassifier c;
    c.sense_order.resize(r.get_u32());
    for (auto& s : c.sense_order) s = r.get_string();
    const std::size_t pairs = r.get_u32();
    for (std::size_t i = 0; i < pairs; ++i) {
      c.senses.push_back(r.get_string());
      Vector e(store.dim());
      for (double& v : e) v = r.get<float>();
      c.embeddings.push_back(std::move(e));
    }
    store.put(std::move(lemma), std::move(c));
  }
  r.expect_end();
  return store;
}

inline void save_store(const ClassifierStore& store, const std::string& path) {
  binary::write_file(path, serialize_store(store));
}

inline ClassifierStore load_store(const std::string& path) {
  try {
    return deserialize_store(binary::read_file(path));
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

}  // namespace fofewsd::wsd
