#include <catch_amalgamated.hpp>

#include <string>
#include <vector>

#include "fofewsd/corpus.hpp"
#include "fofewsd/random.hpp"

using namespace fofewsd;
using Catch::Matchers::ContainsSubstring;

TEST_CASE("tokenize_line splits on whitespace and lowercases", "[corpus]") {
  CHECK(tokenize_line("The bank rose") == std::vector<std::string>{"the", "bank", "rose"});
  CHECK(tokenize_line("").empty());
  CHECK(tokenize_line("  a  b ") == std::vector<std::string>{"a", "b"});
  CHECK(tokenize_line("\t\tx\r\ny\n") == std::vector<std::string>{"x", "y"});
}

TEST_CASE("tokenize_line handles non-ASCII whitespace and case", "[corpus]") {
  // U+00A0 no-break space, U+3000 ideographic space
  CHECK(tokenize_line("caf\xC3\x89\xC2\xA0\xCE\x91\xCE\xB2\xE3\x80\x80\xD0\x94") ==
        std::vector<std::string>{"caf\xC3\xA9", "\xCE\xB1\xCE\xB2", "\xD0\xB4"});
  CHECK_THROWS_AS(tokenize_line("bad\xFF"), DataError);
}

TEST_CASE("build_vocabulary keeps the most frequent tokens", "[corpus]") {
  const std::vector<std::string> corpus{"a b a c a b"};
  const auto v = build_vocabulary(corpus, 3);
  CHECK(v.tokens() == std::vector<std::string>{"<unk>", "a", "b"});

  const auto tie = build_vocabulary(std::vector<std::string>{"y x"}, 10);
  CHECK(tie.tokens() == std::vector<std::string>{"<unk>", "x", "y"});

  CHECK_THROWS_WITH(build_vocabulary(std::vector<std::string>{""}, 5), "empty corpus");
  CHECK_THROWS_WITH(build_vocabulary(std::vector<std::string>{}, 5), "empty corpus");
  CHECK_THROWS_AS(build_vocabulary(corpus, 1), InvalidArgument);
}

TEST_CASE("the unknown token never comes from the corpus", "[corpus]") {
  const auto v = build_vocabulary(std::vector<std::string>{"<unk> <unk> <UNK> a"}, 10);
  CHECK(v.tokens() == std::vector<std::string>{"<unk>", "a"});
  CHECK(v.lookup("<unk>") == Vocabulary::kUnkId);
}

TEST_CASE("lookup maps unknown words to id 0", "[corpus]") {
  const auto v = Vocabulary::from_tokens({"a", "b"});
  CHECK(v.lookup("a") == 1);
  CHECK(v.lookup("zzz") == 0);
  CHECK(v.lookup(tokenize_line("A").front()) == 1);
  CHECK(v.map({"b", "q", "a"}) == TokenSequence{2, 0, 1});
}

TEST_CASE("vocabulary properties over random corpora", "[corpus][property]") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::string> lines(1 + rng.below(5));
    for (auto& line : lines) {
      const auto n = rng.below(12);
      for (std::size_t i = 0; i < n; ++i) line += "w" + std::to_string(rng.below(15)) + " ";
    }
    const std::size_t max_size = 2 + rng.below(20);
    bool any = false;
    for (const auto& l : lines) any |= !tokenize_line(l).empty();
    if (!any) {
      CHECK_THROWS_AS(build_vocabulary(lines, max_size), DataError);
      continue;
    }
    const auto v = build_vocabulary(lines, max_size);
    REQUIRE(v.size() <= max_size);
    for (TokenId id = 1; id < v.size(); ++id) CHECK(v.lookup(v.token(id)) == id);
    // Sharded counting merges to the same vocabulary.
    FrequencyCounter a, b;
    for (std::size_t i = 0; i < lines.size(); ++i) (i % 2 ? a : b).add_line(lines[i]);
    a.merge(b);
    CHECK(a.to_vocabulary(max_size) == v);
    CHECK(build_vocabulary(lines, max_size) == v);
  }
}

TEST_CASE("parse_labeled_corpus reads the TSV format", "[corpus]") {
  const auto insts = parse_labeled_corpus({"# comment", "i1\tthe bank rose\t1\tbank\tbank%1", "",
                                           "i2\tBank of the river\t0\tbank\tbank%1,bank%2"});
  REQUIRE(insts.size() == 2);
  CHECK(insts[0].instance_id == "i1");
  CHECK(insts[0].tokens == std::vector<std::string>{"the", "bank", "rose"});
  CHECK(insts[0].target_index == 1);
  CHECK(insts[0].lemma == "bank");
  CHECK(insts[0].sense_keys == std::vector<std::string>{"bank%1"});
  CHECK(insts[1].sense_keys == std::vector<std::string>{"bank%1", "bank%2"});
  CHECK(insts[1].has_gold("bank%2"));
}

TEST_CASE("parse_labeled_corpus rejects bad records with line numbers", "[corpus]") {
  CHECK_THROWS_WITH(parse_labeled_corpus({"# c", "i1\tthe bank rose\t9\tbank\tbank%1"}),
                    "target index out of range (line 2)");
  CHECK_THROWS_WITH(parse_labeled_corpus({"i1\ta b\t0\tbank\tx", "i1\ta b\t1\tbank\tx"}),
                    ContainsSubstring("duplicate instance id") && ContainsSubstring("line 2"));
  CHECK_THROWS_WITH(parse_labeled_corpus({"i1\ta b\t0\tbank"}), ContainsSubstring("line 1"));
  CHECK_THROWS_AS(parse_labeled_corpus({"i1\ta b\tx\tbank\ts"}), DataError);
  CHECK_THROWS_AS(parse_labeled_corpus({"i1\ta b\t-1\tbank\ts"}), DataError);
  CHECK_THROWS_AS(parse_labeled_corpus({"i1\ta b\t0\tbank\t"}), DataError);
}

TEST_CASE("parse_sense_inventory keeps sense order", "[corpus]") {
  const auto inv = parse_sense_inventory({"bank\tbank%1,bank%2", "rose\trose%2,rose%1"});
  REQUIRE(inv.senses("bank"));
  CHECK(*inv.senses("bank") == std::vector<std::string>{"bank%1", "bank%2"});
  CHECK(inv.first_sense("rose") == "rose%2");
  CHECK(inv.has_sense("rose", "rose%1"));
  CHECK_FALSE(inv.has_sense("rose", "bank%1"));

  CHECK_THROWS_WITH(parse_sense_inventory({"bank\tbank%1", "bank\tbank%2"}), ContainsSubstring("duplicate lemma"));
  CHECK_THROWS_WITH(parse_sense_inventory({"rose\t"}), ContainsSubstring("empty sense list"));
  CHECK_THROWS_AS(parse_sense_inventory({"rose\tr%1,r%1"}), DataError);
  CHECK_THROWS_AS(parse_sense_inventory({"rose"}), DataError);
}
