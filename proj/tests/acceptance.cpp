// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Usage: acceptance <work-dir>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "fofewsd/commands.hpp"
#include "fofewsd/fofe.hpp"
#include "fofewsd/nn.hpp"
#include "fofewsd/random.hpp"

using namespace fofewsd;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

TokenSequence random_sequence(Rng& rng, std::size_t max_len, std::size_t vocab) {
  TokenSequence s(rng.below(max_len + 1));
  for (auto& id : s) id = static_cast<TokenId>(rng.below(vocab));
  return s;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Outcome fofe_exactness() {
  const Vector z = fofe::encode_left(TokenSequence{0, 1, 2}, 0.7, 3);
  const Vector want{0.49, 0.7, 1.0};
  double gap = 0.0;
  for (std::size_t i = 0; i < 3; ++i) gap = std::max(gap, std::abs(z[i] - want[i]));
  return {gap <= 1e-12, "max deviation " + fmt("%.3g", gap)};
}

Outcome decode_roundtrip() {
  Rng rng(101);
  std::size_t failures = 0, cases = 0;
  for (double alpha : {0.2, 0.4, 0.49})
    for (int i = 0; i < 1000; ++i) {
      const std::size_t vocab = 1 + rng.below(50);
      const auto s = random_sequence(rng, 20, vocab);
      ++cases;
      try {
        if (fofe::decode(fofe::encode_left(s, alpha, vocab), alpha, 64) != s) ++failures;
      } catch (const Error&) {
        ++failures;
      }
    }
  return {failures == 0, std::to_string(failures) + " failures in " + std::to_string(cases) + " sequences"};
}

Outcome code_uniqueness() {
  std::vector<Vector> codes;
  for (std::size_t len = 1; len <= 6; ++len) {
    std::size_t total = 1;
    for (std::size_t i = 0; i < len; ++i) total *= 3;
    for (std::size_t n = 0; n < total; ++n) {
      TokenSequence s(len);
      std::size_t x = n;
      for (auto& id : s) {
        id = static_cast<TokenId>(x % 3);
        x /= 3;
      }
      codes.push_back(fofe::encode_left(s, 0.7, 3));
    }
  }
  double min_gap = INFINITY;
  for (std::size_t i = 0; i < codes.size(); ++i)
    for (std::size_t j = i + 1; j < codes.size(); ++j) {
      double gap = 0.0;
      for (std::size_t k = 0; k < 3; ++k) gap = std::max(gap, std::abs(codes[i][k] - codes[j][k]));
      min_gap = std::min(min_gap, gap);
    }
  return {codes.size() == 1092 && min_gap > 1e-9,
          std::to_string(codes.size()) + " sequences, min pairwise gap " + fmt("%.3g", min_gap)};
}

Outcome sparse_dense() {
  Rng rng(202);
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t vocab = 1 + rng.below(20);
    const std::size_t d = 1 + rng.below(8);
    const fofe::FofeConfig cfg{rng.uniform(0.05, 0.95), 1 + rng.below(4)};
    const auto dir = rng.bernoulli(0.5) ? fofe::Direction::Left : fofe::Direction::Right;
    Matrix E(vocab, d);
    for (double& v : E.values()) v = rng.uniform(-1, 1);
    const auto s = random_sequence(rng, 20, vocab);
    const Vector sparse = fofe::encode_order(s, cfg, vocab, dir);
    const Vector dense = fofe::encode_embedded(s, cfg, dir, E);
    for (std::size_t slab = 0; slab < cfg.order; ++slab)
      for (std::size_t c = 0; c < d; ++c) {
        double expect = 0.0;
        for (std::size_t v = 0; v < vocab; ++v) expect += sparse[slab * vocab + v] * E(v, c);
        worst = std::max(worst, std::abs(dense[slab * d + c] - expect));
      }
  }
  return {worst <= 1e-10, "max abs diff " + fmt("%.3g", worst)};
}

Outcome gradient_check() {
  Rng rng(303);
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::vector<std::size_t> dims(2 + rng.below(4));  // 1 to 4 layers
    for (auto& d : dims) d = 1 + rng.below(8);
    dims.back() = std::max<std::size_t>(dims.back(), 2);
    auto p = nn::init_network(dims, seed);
    // Random biases keep hidden units off the rectifier kink.
    Rng bias_rng(seed + 1000);
    for (auto& l : p.layers)
      for (double& b : l.bias) b = bias_rng.uniform(-0.5, 0.5);
    Vector x(dims.front());
    for (double& v : x) v = rng.uniform(-1, 1);
    worst = std::max(worst, nn::gradient_check(p, x, rng.below(dims.back()), 1e-5));
  }
  return {worst < 1e-6, "max relative error " + fmt("%.3g", worst) + " over 100 networks"};
}

Outcome lm_overfit() {
  const auto lines = read_lines(std::string(FOFEWSD_DATA_DIR) + "/toy_corpus.txt");
  lm::LmConfig c;
  c.embed_dim = 32;
  c.hidden_dims = {64, 64};
  c.epochs = 200;
  const auto result = lm::train_lm(lines, c);
  std::vector<TokenSequence> sentences;
  for (const auto& line : lines) sentences.push_back(result.model.vocab.map(tokenize_line(line)));
  const double final_loss = lm::mean_loss(result.model, sentences);
  std::size_t tokens = 0;
  for (const auto& s : sentences) tokens += s.size();
  return {final_loss < 0.1, std::to_string(tokens) + " tokens, |V|=" + std::to_string(result.model.vocab.size()) +
                                ", mean cross-entropy after 200 epochs " + fmt("%.3g", final_loss)};
}

// Runs the full synthetic pipeline in dir and returns its run configuration.
config::RunConfig run_pipeline(const fs::path& dir, eval::EvalReport* report) {
  fs::remove_all(dir);
  const auto paths = cli::run_gen_synthetic({}, dir.string());
  config::RunConfig c;
  c.lm.fofe = {0.7, 3};
  c.classifier.k = 8;
  c.corpus = paths.corpus;
  c.train = paths.train;
  c.test = paths.test;
  c.inventory = paths.inventory;
  c.checkpoint = (dir / "model.ckpt").string();
  c.store = (dir / "classifier.store").string();
  c.predictions = (dir / "predictions.tsv").string();
  c.report = (dir / "report.tsv").string();
  cli::run_train(c);
  cli::run_build(c);
  cli::run_predict(c);
  *report = cli::run_eval(c);
  return c;
}

Outcome synthetic_end_to_end(const fs::path& work) {
  eval::EvalReport r;
  run_pipeline(work / "synthetic_a", &r);
  return {r.micro_f1() >= 0.90, "micro F1 " + fmt("%.4f", r.micro_f1()) + " on " +
                                    std::to_string(r.global.total) + " test instances"};
}

Outcome backoff_totality(const fs::path& work) {
  auto c = config::RunConfig{};
  const fs::path dir = work / "synthetic_a";
  c.checkpoint = (dir / "model.ckpt").string();
  c.store = (dir / "classifier.store").string();
  c.inventory = (dir / "inventory.tsv").string();
  c.test = (dir / "unseen.tsv").string();
  c.predictions = (dir / "unseen_predictions.tsv").string();
  c.report = (dir / "unseen_report.tsv").string();
  const auto predictions = cli::run_predict(c);
  const auto report = cli::run_eval(c);
  const auto inventory = read_sense_inventory(c.inventory);
  const auto gold = read_labeled_corpus(c.test);
  std::size_t first = 0, first_correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (predictions[i].second == inventory.first_sense(gold[i].lemma)) ++first;
    if (gold[i].has_gold(inventory.first_sense(gold[i].lemma))) ++first_correct;
  }
  const double accuracy = gold.empty() ? 0.0 : static_cast<double>(first_correct) / gold.size();
  const bool ok = !gold.empty() && first == gold.size() && report.precision() == accuracy &&
                  report.recall() == accuracy && std::abs(report.micro_f1() - accuracy) < 1e-12;
  return {ok, std::to_string(first) + "/" + std::to_string(gold.size()) + " first-sense predictions, P=R=F1=" +
                  fmt("%.4f", report.micro_f1()) + " vs first-sense accuracy " + fmt("%.4f", accuracy)};
}

Outcome scorer() {
  auto inst = [](std::string id, std::string key) { return LabeledInstance{id, {"x"}, 0, "w", {key}}; };
  const std::vector<LabeledInstance> gold{inst("a", "s1"), inst("b", "s2"), inst("c", "s1"), inst("d", "s2")};
  const auto full = eval::score({{"a", "s1"}, {"b", "s2"}, {"c", "s1"}, {"d", "s1"}}, gold);
  const auto partial = eval::score({{"a", "s1"}, {"b", "s2"}}, gold);
  const std::string f_full = fmt("%.4f", full.micro_f1());
  const bool ok = f_full == "0.7500" && full.precision() == 0.75 && full.recall() == 0.75 &&
                  partial.precision() == 1.0 && partial.recall() == 0.5 &&
                  std::abs(partial.micro_f1() - 2.0 / 3.0) < 1e-12;
  return {ok, "3-of-4 F1 " + f_full + "; partial P=" + fmt("%.4f", partial.precision()) +
                  " R=" + fmt("%.4f", partial.recall()) + " F1=" + fmt("%.4f", partial.micro_f1())};
}

Outcome determinism(const fs::path& work) {
  eval::EvalReport r;
  const auto b = run_pipeline(work / "synthetic_b", &r);
  const fs::path a = work / "synthetic_a";
  std::vector<std::string> differing;
  for (const char* name : {"model.ckpt", "predictions.tsv", "report.tsv"})
    if (binary::read_file((a / name).string()) != binary::read_file((fs::path(b.checkpoint).parent_path() / name).string()))
      differing.push_back(name);
  std::string detail = "checkpoint, predictions and report ";
  if (differing.empty()) return {true, detail + "byte-identical across two runs"};
  for (const auto& d : differing) detail += "[" + d + " differs]";
  return {false, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "fofewsd_acceptance";
  fs::create_directories(work);
  setenv("FOFEWSD_LOG", "quiet", 1);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"FOFE exactness", fofe_exactness},
      {"decode inverts encode for alpha < 0.5", decode_roundtrip},
      {"distinct codes for all short sequences", code_uniqueness},
      {"sparse and dense encodings agree", sparse_dense},
      {"backprop matches central differences", gradient_check},
      {"LM overfits the toy corpus", lm_overfit},
      {"synthetic pseudoword end-to-end", [&] { return synthetic_end_to_end(work); }},
      {"first-sense backoff totality", [&] { return backoff_totality(work); }},
      {"scorer correctness", scorer},
      {"single-worker determinism", [&] { return determinism(work); }},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s criterion %zu: %s: %s (%.2fs)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
