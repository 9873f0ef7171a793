#pragma once

// FOFE pseudo language model: predicts each word from the FOFE codes of its
// left and right contexts. After training, the last hidden layer's activation
// for a context is used as that context's embedding.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "fofewsd/binary_io.hpp"
#include "fofewsd/corpus.hpp"
#include "fofewsd/error.hpp"
#include "fofewsd/fofe.hpp"
#include "fofewsd/nn.hpp"
#include "fofewsd/random.hpp"

namespace fofewsd::lm {

struct LmConfig {
  fofe::FofeConfig fofe{0.7, 3};
  std::size_t embed_dim = 32;
  std::vector<std::size_t> hidden_dims{64, 64};
  std::size_t vocab_max_size = 100000;
  std::size_t window_cap = 0;  // max context tokens per side; 0 = whole sentence

  nn::UpdateRule rule = nn::UpdateRule::Adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t batch_size = 16;
  std::size_t epochs = 10;
  std::uint64_t seed = 1;

  // Large configuration: 512-d embeddings and three
  // 4096-unit hidden layers over a 100K vocabulary.
  static LmConfig large_scale() {
    LmConfig c;
    c.embed_dim = 512;
    c.hidden_dims = {4096, 4096, 4096};
    c.vocab_max_size = 100000;
    return c;
  }

  std::size_t input_dim() const { return 2 * fofe.order * embed_dim; }

  void validate() const {
    fofe.validate();
    if (embed_dim < 1) throw InvalidArgument("embed_dim must be at least 1");
    if (hidden_dims.empty()) throw InvalidArgument("need at least one hidden layer");
    for (auto h : hidden_dims)
      if (h < 1) throw InvalidArgument("hidden dimensions must be at least 1");
    if (vocab_max_size < 2) throw InvalidArgument("vocabulary max_size must be at least 2");
    if (batch_size < 1) throw InvalidArgument("batch_size must be at least 1");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
      throw InvalidArgument("learning_rate must be finite and non-negative");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
      throw InvalidArgument("moment decay rates must lie in [0, 1)");
    if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be positive");
  }

  bool operator==(const LmConfig&) const = default;
};

struct LmModel {
  Vocabulary vocab;
  LmConfig config;
  nn::NetworkParams params;

  std::size_t embedding_dim() const { return config.hidden_dims.back(); }

  bool operator==(const LmModel&) const = default;
};

// Token span [begin, end) of a sentence that forms one context window around
// target; begin <= target < end.
struct ContextWindow {
  std::size_t begin = 0;
  std::size_t target = 0;
  std::size_t end = 0;

  bool operator==(const ContextWindow&) const = default;
};

inline ContextWindow context_window(std::size_t length, std::size_t target, std::size_t window_cap) {
  if (target >= length)
    throw InvalidArgument("target index " + std::to_string(target) + " out of range for " +
                          std::to_string(length) + " tokens");
  if (window_cap == 0) return {0, target, length};
  const std::size_t begin = target > window_cap ? target - window_cap : 0;
  const std::size_t end = std::min(length, target + 1 + window_cap);
  return {begin, target, end};
}

// One example per position: every word of the sentence is a target once.
inline std::vector<ContextWindow> make_training_examples(std::span<const TokenId> sentence,
                                                         const LmConfig& config) {
  std::vector<ContextWindow> out;
  out.reserve(sentence.size());
  for (std::size_t t = 0; t < sentence.size(); ++t)
    out.push_back(context_window(sentence.size(), t, config.window_cap));
  return out;
}

inline Vector window_code(std::span<const TokenId> sentence, const ContextWindow& w, const LmConfig& config,
                          const Matrix& embeddings) {
  return fofe::context_code(sentence.subspan(w.begin, w.end - w.begin), w.target - w.begin, config.fofe,
                            embeddings);
}

inline std::vector<std::size_t> layer_dims(const LmConfig& config, std::size_t vocab_size) {
  std::vector<std::size_t> dims{config.input_dim()};
  dims.insert(dims.end(), config.hidden_dims.begin(), config.hidden_dims.end());
  dims.push_back(vocab_size);
  return dims;
}

inline nn::NetworkParams init_model_params(const LmConfig& config, std::size_t vocab_size) {
  return nn::init_network(layer_dims(config, vocab_size), config.seed, vocab_size, config.embed_dim);
}

inline nn::NetworkParams zero_model_params(const LmConfig& config, std::size_t vocab_size) {
  const auto dims = layer_dims(config, vocab_size);
  nn::NetworkParams p;
  p.embedding = Matrix(vocab_size, config.embed_dim);
  for (std::size_t i = 0; i + 1 < dims.size(); ++i)
    p.layers.push_back({Matrix(dims[i + 1], dims[i]), Vector(dims[i + 1], 0.0)});
  return p;
}

inline LmModel init_model(Vocabulary vocab, const LmConfig& config) {
  config.validate();
  LmModel m{std::move(vocab), config, {}};
  m.params = init_model_params(config, m.vocab.size());
  return m;
}

// Embedding of the context around tokens[target_index]: the target is
// excluded, the window is clipped to window_cap, and the result is the
// rectified activation of the last hidden layer.
inline Vector context_embedding(const LmModel& model, std::span<const TokenId> tokens, std::size_t target_index) {
  const auto w = context_window(tokens.size(), target_index, model.config.window_cap);
  const Vector code = window_code(tokens, w, model.config, model.params.embedding);
  return nn::held_out_activation(model.params, code);
}

inline Vector context_embedding(const LmModel& model, const std::vector<std::string>& tokens,
                                std::size_t target_index) {
  const TokenSequence ids = model.vocab.map(tokens);
  return context_embedding(model, ids, target_index);
}

struct Example {
  std::uint32_t sentence;
  ContextWindow window;
};

// Loss of one example plus its gradient, scaled, added into grad (embedding
// rows included).
inline double accumulate_example(const LmModel& model, std::span<const TokenId> sentence, const ContextWindow& w,
                                 double scale, nn::NetworkParams& grad) {
  const Vector code = window_code(sentence, w, model.config, model.params.embedding);
  const auto trace = nn::forward(model.params, code);
  const TokenId target = sentence[w.target];
  const double loss = nn::loss_softmax_xent(trace.logits(), target);
  Vector input_grad = nn::backward_into(model.params, trace, target, grad, scale);
  for (double& g : input_grad) g *= scale;
  fofe::accumulate_context_gradient(sentence.subspan(w.begin, w.end - w.begin), w.target - w.begin,
                                    model.config.fofe, input_grad, grad.embedding);
  return loss;
}

// Mean cross-entropy of target prediction over every position of every
// sentence.
inline double mean_loss(const LmModel& model, const std::vector<TokenSequence>& sentences) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& s : sentences)
    for (const auto& w : make_training_examples(s, model.config)) {
      const auto trace = nn::forward(model.params, window_code(s, w, model.config, model.params.embedding));
      total += nn::loss_softmax_xent(trace.logits(), s[w.target]);
      ++n;
    }
  return n == 0 ? 0.0 : total / static_cast<double>(n);
}

// Rounds every parameter to f32 precision so the model survives a checkpoint
// cycle unchanged.
inline void narrow_to_f32(nn::NetworkParams& p) {
  nn::for_each_tensor(
      [](std::span<double> s) {
        for (double& v : s) v = binary::to_f32(v);
      },
      p);
}

struct TrainOptions {
  std::ostream* log = nullptr;   // receives "epoch<TAB>mean_loss" lines
  std::size_t workers = 1;       // data-parallel width per batch
  const LmModel* resume = nullptr;  // continue from this model's vocab and params
};

struct TrainResult {
  LmModel model;
  std::vector<double> epoch_losses;
};

// Trains on tokenized sentences. Within each batch the examples are split
// into `workers` contiguous shards whose gradients are summed in shard order,
// so a run is reproducible for a fixed worker count.
inline TrainResult train_on_sentences(LmModel model, const std::vector<TokenSequence>& sentences,
                                      const TrainOptions& opts = {}) {
  const LmConfig& cfg = model.config;
  cfg.validate();
  const std::size_t workers = std::max<std::size_t>(1, opts.workers);

  std::vector<Example> examples;
  for (std::size_t s = 0; s < sentences.size(); ++s)
    for (const auto& w : make_training_examples(sentences[s], cfg))
      examples.push_back({static_cast<std::uint32_t>(s), w});

  nn::OptimizerState opt;
  opt.rule = cfg.rule;
  opt.learning_rate = cfg.learning_rate;
  opt.beta1 = cfg.beta1;
  opt.beta2 = cfg.beta2;
  opt.epsilon = cfg.epsilon;

  Rng order_rng(cfg.seed ^ 0x5DEECE66DULL);
  TrainResult result{std::move(model), {}};
  LmModel& m = result.model;
  std::vector<nn::NetworkParams> grads(workers, m.params.zeros_like());
  std::vector<double> shard_loss(workers);

  for (std::size_t epoch = 1; epoch <= cfg.epochs && !examples.empty(); ++epoch) {
    order_rng.shuffle(examples.begin(), examples.end());
    double epoch_total = 0.0;
    for (std::size_t start = 0; start < examples.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(examples.size(), start + cfg.batch_size);
      const double scale = 1.0 / static_cast<double>(stop - start);
      const std::size_t used = std::min(workers, stop - start);
      auto run_shard = [&](std::size_t w) {
        auto& g = grads[w];
        nn::for_each_tensor([](std::span<double> s) { std::fill(s.begin(), s.end(), 0.0); }, g);
        const std::size_t per = (stop - start + used - 1) / used;
        const std::size_t lo = start + w * per;
        const std::size_t hi = std::min(stop, lo + per);
        double total = 0.0;
        for (std::size_t i = lo; i < hi; ++i)
          total += accumulate_example(m, sentences[examples[i].sentence], examples[i].window, scale, g);
        shard_loss[w] = total;
      };
      if (used == 1) {
        run_shard(0);
      } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < used; ++w) pool.emplace_back(run_shard, w);
      }
      double batch_total = shard_loss[0];
      for (std::size_t w = 1; w < used; ++w) {
        nn::for_each_tensor(
            [](std::span<double> dst, std::span<const double> src) {
              for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
            },
            grads[0], std::as_const(grads[w]));
        batch_total += shard_loss[w];
      }
      if (!std::isfinite(batch_total))
        throw NumericalError("non-finite training loss in epoch " + std::to_string(epoch));
      epoch_total += batch_total;
      nn::apply_update(m.params, grads[0], opt);
    }
    const double mean = epoch_total / static_cast<double>(examples.size());
    result.epoch_losses.push_back(mean);
    if (opts.log) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%zu\t%.6f\n", epoch, mean);
      *opts.log << buf << std::flush;
    }
  }
  narrow_to_f32(m.params);
  return result;
}

// Builds the vocabulary from the corpus lines (or reuses the resumed model's),
// then trains. Empty lines are sentences without examples.
template <typename LineRange>
TrainResult train_lm(const LineRange& lines, const LmConfig& config, const TrainOptions& opts = {}) {
  config.validate();
  LmModel model;
  if (opts.resume) {
    model = *opts.resume;
    // Architecture comes from the checkpoint; training settings from config.
    model.config.rule = config.rule;
    model.config.learning_rate = config.learning_rate;
    model.config.beta1 = config.beta1;
    model.config.beta2 = config.beta2;
    model.config.epsilon = config.epsilon;
    model.config.batch_size = config.batch_size;
    model.config.epochs = config.epochs;
    model.config.seed = config.seed;
  } else {
    model = init_model(build_vocabulary(lines, config.vocab_max_size), config);
  }
  std::vector<TokenSequence> sentences;
  for (const auto& line : lines) sentences.push_back(model.vocab.map(tokenize_line(line)));
  return train_on_sentences(std::move(model), sentences, opts);
}

// Checkpoint container, little-endian:
//   "FOFE" u32 version
//   config: alpha f64, order u32, embed_dim u32, window_cap u32,
//           vocab_max_size u32, hidden count u32 + u32 each,
//           rule u32, learning_rate f64, beta1 f64, beta2 f64, epsilon f64,
//           batch_size u32, epochs u32, seed u64
//   vocabulary: count u32, then length-prefixed UTF-8 tokens in id order
//   tensors (embedding, then weight/bias per layer): rank u32, dims u32...,
//           f32 values row-major
//   u64 checksum of all preceding bytes
inline constexpr std::string_view kCheckpointMagic = "FOFE";
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_tensor(binary::Writer& w, std::span<const double> values, std::initializer_list<std::size_t> dims) {
  w.put_u32(dims.size());
  for (auto d : dims) w.put_u32(d);
  for (double v : values) w.put(static_cast<float>(v));
}

inline void get_tensor(binary::Reader& r, std::span<double> values, std::initializer_list<std::size_t> dims) {
  const std::size_t rank = r.get_u32();
  if (rank != dims.size()) throw DataError("checkpoint tensor rank mismatch");
  for (auto d : dims)
    if (r.get_u32() != d) throw DataError("checkpoint tensor shape mismatch");
  for (double& v : values) v = r.get<float>();
}

}  // namespace detail

inline std::vector<char> serialize_checkpoint(const LmModel& model) {
  const auto& c = model.config;
  binary::Writer w(kCheckpointMagic);
  w.put_u32(kCheckpointVersion);
  w.put<double>(c.fofe.alpha);
  w.put_u32(c.fofe.order);
  w.put_u32(c.embed_dim);
  w.put_u32(c.window_cap);
  w.put_u32(c.vocab_max_size);
  w.put_u32(c.hidden_dims.size());
  for (auto h : c.hidden_dims) w.put_u32(h);
  w.put_u32(static_cast<std::uint32_t>(c.rule));
  w.put<double>(c.learning_rate);
  w.put<double>(c.beta1);
  w.put<double>(c.beta2);
  w.put<double>(c.epsilon);
  w.put_u32(c.batch_size);
  w.put_u32(c.epochs);
  w.put<std::uint64_t>(c.seed);

  w.put_u32(model.vocab.size());
  for (const auto& t : model.vocab.tokens()) w.put_string(t);

  const auto& p = model.params;
  detail::put_tensor(w, p.embedding.values(), {p.embedding.rows(), p.embedding.cols()});
  for (const auto& l : p.layers) {
    detail::put_tensor(w, l.weight.values(), {l.weight.rows(), l.weight.cols()});
    detail::put_tensor(w, l.bias, {l.bias.size()});
  }
  return std::move(w).finish();
}

inline LmModel deserialize_checkpoint(std::vector<char> bytes) {
  binary::Reader r(std::move(bytes), kCheckpointMagic, "checkpoint");
  const auto version = r.get_u32();
  if (version != kCheckpointVersion)
    throw DataError("incompatible checkpoint: format version " + std::to_string(version));
  LmModel m;
  auto& c = m.config;
  c.fofe.alpha = r.get<double>();
  c.fofe.order = r.get_u32();
  c.embed_dim = r.get_u32();
  c.window_cap = r.get_u32();
  c.vocab_max_size = r.get_u32();
  c.hidden_dims.resize(r.get_u32());
  for (auto& h : c.hidden_dims) h = r.get_u32();
  const auto rule = r.get_u32();
  if (rule > static_cast<std::uint32_t>(nn::UpdateRule::Adam)) throw DataError("checkpoint: unknown update rule");
  c.rule = static_cast<nn::UpdateRule>(rule);
  c.learning_rate = r.get<double>();
  c.beta1 = r.get<double>();
  c.beta2 = r.get<double>();
  c.epsilon = r.get<double>();
  c.batch_size = r.get_u32();
  c.epochs = r.get_u32();
  c.seed = r.get<std::uint64_t>();
  try {
    c.validate();
  } catch (const InvalidArgument& e) {
    throw DataError(std::string("checkpoint config invalid: ") + e.what());
  }

  const std::size_t vocab_size = r.get_u32();
  if (vocab_size < 1) throw DataError("checkpoint vocabulary is empty");
  std::vector<std::string> tokens(vocab_size);
  for (auto& t : tokens) t = r.get_string();
  if (tokens[0] != Vocabulary::kUnkToken) throw DataError("checkpoint vocabulary does not start with the unknown token");
  m.vocab = Vocabulary::from_tokens({tokens.begin() + 1, tokens.end()});

  m.params = zero_model_params(c, vocab_size);
  auto& p = m.params;
  detail::get_tensor(r, p.embedding.values(), {p.embedding.rows(), p.embedding.cols()});
  for (auto& l : p.layers) {
    detail::get_tensor(r, l.weight.values(), {l.weight.rows(), l.weight.cols()});
    detail::get_tensor(r, l.bias, {l.bias.size()});
  }
  r.expect_end();
  return m;
}

inline void save_checkpoint(const LmModel& model, const std::string& path) {
  binary::write_file(path, serialize_checkpoint(model));
}

inline LmModel load_checkpoint(const std::string& path) {
  try {
    return deserialize_checkpoint(binary::read_file(path));
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

}  // namespace fofewsd::lm
