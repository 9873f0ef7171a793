#pragma once

#include <cstdio>
#include <map>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "fofewsd/corpus.hpp"
#include "fofewsd/error.hpp"

namespace fofewsd::eval {

struct Counts {
  std::size_t attempted = 0;
  std::size_t correct = 0;
  std::size_t total = 0;

  double precision() const { return attempted == 0 ? 0.0 : static_cast<double>(correct) / attempted; }
  double recall() const { return total == 0 ? 0.0 : static_cast<double>(correct) / total; }
  double f1() const {
    const double p = precision();
    const double r = recall();
    return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
  }

  bool operator==(const Counts&) const = default;
};

struct EvalReport {
  Counts global;
  std::map<std::string, Counts> per_lemma;

  double precision() const { return global.precision(); }
  double recall() const { return global.recall(); }
  double micro_f1() const { return global.f1(); }
};

using Predictions = std::unordered_map<std::string, std::string>;

// A prediction is correct when it is one of the instance's gold keys. Gold
// instances without a prediction only count toward recall's denominator.
inline EvalReport score(const Predictions& predictions, const std::vector<LabeledInstance>& gold) {
  EvalReport report;
  std::unordered_set<std::string_view> ids;
  for (const auto& inst : gold) {
    ids.insert(inst.instance_id);
    auto& lemma = report.per_lemma[inst.lemma];
    ++report.global.total;
    ++lemma.total;
    auto it = predictions.find(inst.instance_id);
    if (it == predictions.end()) continue;
    ++report.global.attempted;
    ++lemma.attempted;
    if (inst.has_gold(it->second)) {
      ++report.global.correct;
      ++lemma.correct;
    }
  }
  for (const auto& [id, _] : predictions)
    if (!ids.count(id)) throw DataError("prediction for unknown instance id '" + id + "'");
  return report;
}

// Header, one global line (scope "*"), then one line per lemma in lemma order.
inline std::string format_report(const EvalReport& report) {
  std::string out = "#scope\tattempted\tcorrect\ttotal\tprecision\trecall\tf1\n";
  auto line = [&](const std::string& scope, const Counts& c) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "\t%zu\t%zu\t%zu\t%.4f\t%.4f\t%.4f\n", c.attempted, c.correct, c.total,
                  c.precision(), c.recall(), c.f1());
    out += scope;
    out += buf;
  };
  line("*", report.global);
  for (const auto& [lemma, c] : report.per_lemma) line(lemma, c);
  return out;
}

// Predictions file: instance_id<TAB>sense_key per line, in input order.
inline std::string format_predictions(const std::vector<std::pair<std::string, std::string>>& predictions) {
  std::string out;
  for (const auto& [id, sense] : predictions) out += id + "\t" + sense + "\n";
  return out;
}

inline Predictions parse_predictions(const std::vector<std::string>& lines) {
  Predictions out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty() || lines[i][0] == '#') continue;
    auto fields = split(lines[i], '\t');
    if (fields.size() != 2 || fields[0].empty() || fields[1].empty())
      throw DataError(with_line("malformed prediction line: expected instance_id<TAB>sense", i + 1));
    if (!out.emplace(fields[0], fields[1]).second)
      throw DataError(with_line("duplicate prediction for '" + fields[0] + "'", i + 1));
  }
  return out;
}

inline Predictions read_predictions(const std::string& path) {
  try {
    return parse_predictions(read_lines(path));
  } catch (const DataError& e) {
    if (std::string_view(e.what()).starts_with(path)) throw;
    throw DataError(path + ": " + e.what());
  }
}

}  // namespace fofewsd::eval
