// fofewsd: FOFE pseudo language model and kNN word sense disambiguation.
//
//   fofewsd encode --tokens "a b c" --alpha 0.7 --direction left
//   fofewsd gen-synthetic --out data/
//   fofewsd train   --config run.cfg
//   fofewsd build   --config run.cfg
//   fofewsd predict --config run.cfg
//   fofewsd eval    --config run.cfg
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical abort.

#include <cstdio>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "fofewsd/commands.hpp"

namespace {

constexpr int kUsage = 1;
constexpr int kData = 2;
constexpr int kNumeric = 3;

std::string flag_name(const std::string& key) {
  std::string s = key;
  for (char& c : s)
    if (c == '_') c = '-';
  return "--" + s;
}

// Every run-config key becomes a flag; values given on the command line are
// applied after the config file.
struct ConfigOptions {
  std::string file;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
  bool resume = false;

  void attach(CLI::App* app) {
    app->add_option("--config", file, "flat key = value config file");
    for (const auto& [key, spec] : fofewsd::config::keys()) {
      if (key == "resume") continue;
      options[key] = app->add_option(flag_name(key), values[key], spec.help);
    }
    app->add_flag("--resume", resume, fofewsd::config::keys().at("resume").help);
  }

  fofewsd::config::RunConfig resolve() const {
    fofewsd::config::RunConfig cfg;
    if (!file.empty()) fofewsd::config::apply_file(cfg, file);
    for (const auto& [key, opt] : options)
      if (opt->count() > 0) fofewsd::config::apply(cfg, key, values.at(key));
    if (resume) cfg.resume = true;
    cfg.validate();
    return cfg;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FOFE-based word sense disambiguation"};
  app.require_subcommand(1);

  fofewsd::cli::EncodeArgs encode;
  auto* encode_cmd = app.add_subcommand("encode", "print the vocab-space FOFE code of a token sequence");
  encode_cmd->add_option("--tokens", encode.tokens, "space-separated tokens")->required();
  encode_cmd->add_option("--vocab", encode.vocab, "space-separated vocabulary (default: tokens in order of appearance)");
  encode_cmd->add_option("--alpha", encode.alpha, "forgetting factor in (0,1)");
  encode_cmd->add_option("--direction", encode.direction, "left or right")->check(CLI::IsMember({"left", "right"}));
  encode_cmd->add_option("--order", encode.order, "FOFE order");

  fofewsd::synthetic::SyntheticConfig synth;
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("gen-synthetic", "write a pseudoword benchmark (corpus, labelled data, inventory)");
  synth_cmd->add_option("--out", synth_out, "output directory")->required();
  synth_cmd->add_option("--seed", synth.seed, "generator seed");
  synth_cmd->add_option("--corpus-sentences", synth.corpus_sentences, "unlabelled corpus sentences");
  synth_cmd->add_option("--train-instances", synth.train_instances, "labelled training instances");
  synth_cmd->add_option("--test-instances", synth.test_instances, "labelled test instances");
  synth_cmd->add_option("--unseen-instances", synth.unseen_instances, "instances of a lemma with no training data");

  ConfigOptions train_opts, build_opts, predict_opts, eval_opts;
  auto* train_cmd = app.add_subcommand("train", "train the pseudo language model");
  train_opts.attach(train_cmd);
  auto* build_cmd = app.add_subcommand("build", "embed labelled training instances into a classifier store");
  build_opts.attach(build_cmd);
  auto* predict_cmd = app.add_subcommand("predict", "predict senses for labelled test instances");
  predict_opts.attach(predict_cmd);
  auto* eval_cmd = app.add_subcommand("eval", "score predictions against gold senses");
  eval_opts.attach(eval_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  try {
    if (*encode_cmd) {
      std::cout << fofewsd::cli::run_encode(encode) << '\n';
    } else if (*synth_cmd) {
      fofewsd::cli::run_gen_synthetic(synth, synth_out);
    } else if (*train_cmd) {
      fofewsd::cli::run_train(train_opts.resolve());
    } else if (*build_cmd) {
      fofewsd::cli::run_build(build_opts.resolve());
    } else if (*predict_cmd) {
      fofewsd::cli::run_predict(predict_opts.resolve());
    } else if (*eval_cmd) {
      const auto report = fofewsd::cli::run_eval(eval_opts.resolve());
      std::printf("micro_f1\t%.4f\n", report.micro_f1());
    }
  } catch (const fofewsd::InvalidArgument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const fofewsd::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNumeric;
  } catch (const fofewsd::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return 0;
}
