#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "fofewsd/error.hpp"

namespace fofewsd {

using TokenId = std::uint32_t;
using TokenSequence = std::vector<TokenId>;

namespace utf8 {

// Decodes one code point at s[pos], advancing pos. Returns nullopt on an
// invalid or truncated sequence (overlongs and surrogates included).
inline std::optional<char32_t> decode(std::string_view s, std::size_t& pos) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  if (b0 < 0x80) {
    ++pos;
    return b0;
  }
  std::size_t len;
  char32_t cp;
  char32_t min;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2, cp = b0 & 0x1F, min = 0x80;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3, cp = b0 & 0x0F, min = 0x800;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4, cp = b0 & 0x07, min = 0x10000;
  } else {
    return std::nullopt;
  }
  if (pos + len > s.size()) return std::nullopt;
  for (std::size_t i = 1; i < len; ++i) {
    const auto b = static_cast<unsigned char>(s[pos + i]);
    if ((b & 0xC0) != 0x80) return std::nullopt;
    cp = (cp << 6) | (b & 0x3F);
  }
  if (cp < min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return std::nullopt;
  pos += len;
  return cp;
}

inline void encode(char32_t cp, std::string& out) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

inline bool valid(std::string_view s) {
  std::size_t pos = 0;
  while (pos < s.size())
    if (!decode(s, pos)) return false;
  return true;
}

// White_Space property code points.
inline bool is_space(char32_t c) {
  return (c >= 0x09 && c <= 0x0D) || c == 0x20 || c == 0x85 || c == 0xA0 || c == 0x1680 ||
         (c >= 0x2000 && c <= 0x200A) || c == 0x2028 || c == 0x2029 || c == 0x202F ||
         c == 0x205F || c == 0x3000;
}

// Simple case folding for ASCII, Latin-1, Latin Extended-A, Greek and
// Cyrillic. Other scripts pass through unchanged.
inline char32_t to_lower(char32_t c) {
  if (c >= 'A' && c <= 'Z') return c + 0x20;
  if (c < 0xC0) return c;
  if (c <= 0xDE && c != 0xD7) return c + 0x20;
  if (c >= 0x100 && c <= 0x137 && c % 2 == 0) return c + 1;
  if (c >= 0x139 && c <= 0x148 && c % 2 == 1) return c + 1;
  if (c >= 0x14A && c <= 0x177 && c % 2 == 0) return c + 1;
  if (c == 0x178) return 0xFF;
  if (c >= 0x179 && c <= 0x17E && c % 2 == 1) return c + 1;
  if (c >= 0x391 && c <= 0x3AB && c != 0x3A2) return c + 0x20;
  if (c >= 0x400 && c <= 0x40F) return c + 0x50;
  if (c >= 0x410 && c <= 0x42F) return c + 0x20;
  return c;
}

}  // namespace utf8

// Splits on Unicode whitespace and lowercases. Input must be valid UTF-8;
// file readers reject anything else before it gets here.
inline std::vector<std::string> tokenize_line(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto cp = utf8::decode(text, pos);
    if (!cp) throw DataError("invalid UTF-8");
    if (utf8::is_space(*cp)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else {
      utf8::encode(utf8::to_lower(*cp), current);
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

// Ordered token -> id map. Id 0 is always the unknown token, which never
// collides with a corpus word.
class Vocabulary {
 public:
  static constexpr TokenId kUnkId = 0;
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocabulary() : tokens_{std::string(kUnkToken)} {}

  // tokens excludes unk; ids are assigned 1.. in the given order.
  static Vocabulary from_tokens(const std::vector<std::string>& tokens) {
    Vocabulary v;
    for (const auto& t : tokens) {
      if (t == kUnkToken) throw DataError("vocabulary may not contain the unknown token");
      if (!v.index_.emplace(t, static_cast<TokenId>(v.tokens_.size())).second)
        throw DataError("duplicate vocabulary token: " + t);
      v.tokens_.push_back(t);
    }
    return v;
  }

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& token(TokenId id) const { return tokens_.at(id); }

  TokenId lookup(std::string_view token) const {
    auto it = index_.find(std::string(token));
    return it == index_.end() ? kUnkId : it->second;
  }

  TokenSequence map(const std::vector<std::string>& tokens) const {
    TokenSequence ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(lookup(t));
    return ids;
  }

  bool operator==(const Vocabulary& o) const { return tokens_ == o.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

// Token frequency table. Shards may be counted independently and merged;
// ordering is applied once in to_vocabulary().
class FrequencyCounter {
 public:
  void add_line(std::string_view line) {
    for (auto& t : tokenize_line(line)) {
      if (t == Vocabulary::kUnkToken) continue;
      ++counts_[std::move(t)];
    }
  }

  void merge(const FrequencyCounter& other) {
    for (const auto& [t, n] : other.counts_) counts_[t] += n;
  }

  bool empty() const { return counts_.empty(); }

  // Keeps the (max_size - 1) most frequent tokens; ties go to the
  // lexicographically smaller token.
  Vocabulary to_vocabulary(std::size_t max_size) const {
    if (max_size < 2) throw InvalidArgument("vocabulary max_size must be at least 2");
    if (counts_.empty()) throw DataError("empty corpus");
    std::vector<std::pair<std::string, std::uint64_t>> sorted(counts_.begin(), counts_.end());
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
      return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    if (sorted.size() > max_size - 1) sorted.resize(max_size - 1);
    std::vector<std::string> tokens;
    tokens.reserve(sorted.size());
    for (auto& [t, n] : sorted) tokens.push_back(std::move(t));
    return Vocabulary::from_tokens(tokens);
  }

 private:
  std::unordered_map<std::string, std::uint64_t> counts_;
};

template <typename LineRange>
Vocabulary build_vocabulary(const LineRange& lines, std::size_t max_size) {
  if (max_size < 2) throw InvalidArgument("vocabulary max_size must be at least 2");
  FrequencyCounter counter;
  for (const auto& line : lines) counter.add_line(line);
  return counter.to_vocabulary(max_size);
}

// Reads a UTF-8 text file as lines, stripping a trailing '\r'. Invalid UTF-8
// is a DataError carrying the line number.
inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!utf8::valid(line)) throw DataError(with_line(path + ": invalid UTF-8", lines.size() + 1));
    lines.push_back(std::move(line));
  }
  return lines;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto at = s.find(sep, start);
    parts.emplace_back(s.substr(start, at == std::string_view::npos ? s.npos : at - start));
    if (at == std::string_view::npos) break;
    start = at + 1;
  }
  return parts;
}

struct LabeledInstance {
  std::string instance_id;
  std::vector<std::string> tokens;
  std::size_t target_index = 0;
  std::string lemma;
  std::vector<std::string> sense_keys;  // gold set, file order, no duplicates

  bool has_gold(std::string_view key) const {
    return std::find(sense_keys.begin(), sense_keys.end(), key) != sense_keys.end();
  }
};

namespace detail {

inline std::vector<std::string> parse_key_list(const std::string& field) {
  std::vector<std::string> keys;
  for (auto& k : split(field, ',')) {
    if (k.empty()) continue;
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(std::move(k));
  }
  return keys;
}

inline bool is_skippable(const std::string& line) {
  return line.empty() || line[0] == '#';
}

}  // namespace detail

// Parses labeled-corpus lines:
//   instance_id \t tokens \t target_index \t lemma \t gold1,gold2,...
// Lines starting with '#' and blank lines are skipped.
inline std::vector<LabeledInstance> parse_labeled_corpus(const std::vector<std::string>& lines) {
  std::vector<LabeledInstance> out;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    if (detail::is_skippable(lines[i])) continue;
    auto fields = split(lines[i], '\t');
    if (fields.size() != 5) throw DataError(with_line("malformed labeled line: expected 5 tab-separated fields", line_no));
    LabeledInstance inst;
    inst.instance_id = fields[0];
    if (inst.instance_id.empty()) throw DataError(with_line("empty instance id", line_no));
    inst.tokens = tokenize_line(fields[1]);
    std::size_t consumed = 0;
    long long idx = -1;
    try {
      idx = std::stoll(fields[2], &consumed);
    } catch (const std::exception&) {
      consumed = 0;
    }
    if (consumed == 0 || consumed != fields[2].size() || idx < 0)
      throw DataError(with_line("malformed target index '" + fields[2] + "'", line_no));
    if (static_cast<std::size_t>(idx) >= inst.tokens.size())
      throw DataError(with_line("target index out of range", line_no));
    inst.target_index = static_cast<std::size_t>(idx);
    inst.lemma = fields[3];
    if (inst.lemma.empty()) throw DataError(with_line("empty lemma", line_no));
    inst.sense_keys = detail::parse_key_list(fields[4]);
    if (inst.sense_keys.empty()) throw DataError(with_line("empty gold sense set", line_no));
    if (!seen.insert(inst.instance_id).second)
      throw DataError(with_line("duplicate instance id '" + inst.instance_id + "'", line_no));
    out.push_back(std::move(inst));
  }
  return out;
}

inline std::vector<LabeledInstance> read_labeled_corpus(const std::string& path) {
  try {
    return parse_labeled_corpus(read_lines(path));
  } catch (const DataError& e) {
    if (std::string_view(e.what()).starts_with(path)) throw;
    throw DataError(path + ": " + e.what());
  }
}

// lemma -> ordered sense keys. The first key is the backoff sense.
class SenseInventory {
 public:
  void add(const std::string& lemma, std::vector<std::string> senses) {
    if (senses.empty()) throw DataError("empty sense list for lemma '" + lemma + "'");
    for (std::size_t i = 0; i < senses.size(); ++i)
      for (std::size_t j = 0; j < i; ++j)
        if (senses[i] == senses[j]) throw DataError("duplicate sense key '" + senses[i] + "' for lemma '" + lemma + "'");
    if (!entries_.emplace(lemma, std::move(senses)).second)
      throw DataError("duplicate lemma '" + lemma + "'");
  }

  bool contains(const std::string& lemma) const { return entries_.count(lemma) != 0; }

  const std::vector<std::string>* senses(const std::string& lemma) const {
    auto it = entries_.find(lemma);
    return it == entries_.end() ? nullptr : &it->second;
  }

  const std::string& first_sense(const std::string& lemma) const {
    auto it = entries_.find(lemma);
    if (it == entries_.end()) throw DataError("unknown lemma '" + lemma + "'");
    return it->second.front();
  }

  bool has_sense(const std::string& lemma, std::string_view key) const {
    auto s = senses(lemma);
    return s && std::find(s->begin(), s->end(), key) != s->end();
  }

  std::size_t size() const { return entries_.size(); }
  const std::map<std::string, std::vector<std::string>>& entries() const { return entries_; }

 private:
  std::map<std::string, std::vector<std::string>> entries_;
};

inline SenseInventory parse_sense_inventory(const std::vector<std::string>& lines) {
  SenseInventory inv;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    if (detail::is_skippable(lines[i])) continue;
    auto fields = split(lines[i], '\t');
    if (fields.size() != 2 || fields[0].empty())
      throw DataError(with_line("malformed inventory line: expected lemma<TAB>senses", line_no));
    auto keys = split(fields[1], ',');
    std::erase_if(keys, [](const std::string& k) { return k.empty(); });
    try {
      inv.add(fields[0], std::move(keys));
    } catch (const DataError& e) {
      throw DataError(with_line(e.what(), line_no));
    }
  }
  return inv;
}

inline SenseInventory read_sense_inventory(const std::string& path) {
  try {
    return parse_sense_inventory(read_lines(path));
  } catch (const DataError& e) {
    if (std::string_view(e.what()).starts_with(path)) throw;
    throw DataError(path + ": " + e.what());
  }
}

}  // namespace fofewsd
