// Copyright 2026 The racg Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <random>
#include <regex>
#include <set>

#include "racg/common.hpp"
#include "racg/corpus.hpp"

using namespace racg;
using namespace racg::corpus;

namespace {

// Reference camel/snake splitter written as a regex over letter runs.
std::vector<std::string> regex_split(const std::string& s) {
  static const std::regex word("[A-Z]+(?=[A-Z][a-z])|[A-Z]?[a-z]+|[A-Z]+");
  std::vector<std::string> out;
  for (auto it = std::sregex_iterator(s.begin(), s.end(), word); it != std::sregex_iterator(); ++it) {
    std::string w = it->str();
    for (char& c : w) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    out.push_back(w);
  }
  return out;
}

std::string fold(const std::string& s) {
  std::string out;
  for (char c : s)
    if (c != '_') out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("racg_test_corpus_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("reserved ids are distinct and survive a save/load round trip") {
  Vocabulary v = Vocabulary::build({{"a", "b", "a"}});
  std::set<TokenId> ids = {Special::kCls, Special::kEos, Special::kPad,
                           Special::kUnk, Special::kNewline, Special::kHash};
  CHECK(ids.size() == 6);
  Vocabulary w = Vocabulary::parse(v.serialize());
  CHECK(w.size() == v.size());
  CHECK(w.hash() == v.hash());
  CHECK(w.token(Special::kCls) == v.token(Special::kCls));
  CHECK(w.id("a") == v.id("a"));
  CHECK(w.frequency(w.id("a")) == 2);
  CHECK(v.id("zzz") == Special::kUnk);
}

TEST_CASE("vocabulary respects the frequency cutoff") {
  Vocabulary v = Vocabulary::build({{"x", "x", "y"}}, 2);
  CHECK(v.id("x") != Special::kUnk);
  CHECK(v.id("y") == Special::kUnk);
}

TEST_CASE("parse_jsonl maps fields and reports errors") {
  auto pairs = parse_jsonl(R"({"id":"a1","code":"def f(): pass","comment":"do nothing"})");
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].id == "a1");
  CHECK(pairs[0].code_raw == "def f(): pass");
  CHECK(pairs[0].comment_raw == "do nothing");
  CHECK(parse_jsonl("").empty());

  std::string dup = R"({"id":"a1","code":"x","comment":"y"})" "\n"
                    R"({"id":"a1","code":"z","comment":"w"})";
  try {
    parse_jsonl(dup);
    FAIL("duplicate id accepted");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("a1") != std::string::npos);
  }
  try {
    parse_jsonl("{\"id\":\"a\",\"code\":\"x\",\"comment\":\"y\"}\n{broken");
    FAIL("malformed line accepted");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("load_jsonl preserves file order and raw text") {
  auto dir = temp_dir("load");
  std::string text = R"({"id":"b","code":"  x  = 1\n","comment":"Set X."})" "\n"
                     R"({"id":"a","code":"y","comment":"z"})" "\n";
  write_file_atomic((dir / "f.jsonl").string(), text);
  auto pairs = load_jsonl((dir / "f.jsonl").string());
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0].id == "b");
  CHECK(pairs[0].code_raw == "  x  = 1\n");
  CHECK(pairs[0].comment_raw == "Set X.");
  CHECK(to_jsonl(pairs) == text);
}

TEST_CASE("split_subtokens examples") {
  CHECK(split_subtokens("CamelCase") == std::vector<std::string>{"camel", "case"});
  CHECK(split_subtokens("snake_case") == std::vector<std::string>{"snake", "case"});
  CHECK(split_subtokens("x") == std::vector<std::string>{"x"});
  CHECK(split_subtokens("parseHTTPResponse") == regex_split("parseHTTPResponse"));
  CHECK(split_subtokens("parseHTTPResponse") == std::vector<std::string>{"parse", "http", "response"});
  CHECK(split_subtokens("__init__") == std::vector<std::string>{"init"});
}

TEST_CASE("split_subtokens agrees with the regex splitter and preserves content") {
  std::mt19937_64 rng(5);
  const std::string alphabet = "abcXYZ_";
  for (int trial = 0; trial < 2000; ++trial) {
    std::string s;
    const std::size_t len = 1 + uniform_below(rng, 12);
    for (std::size_t i = 0; i < len; ++i) s += alphabet[uniform_below(rng, alphabet.size())];
    auto parts = split_subtokens(s);
    std::string joined;
    for (const auto& p : parts) {
      CHECK_FALSE(p.empty());
      joined += p;
    }
    CHECK(joined == fold(s));
    std::vector<std::string> expected;
    std::string rest = s;
    std::size_t pos = 0;
    while (pos <= rest.size()) {
      std::size_t us = rest.find('_', pos);
      std::string seg = rest.substr(pos, us == std::string::npos ? std::string::npos : us - pos);
      for (auto& w : regex_split(seg)) expected.push_back(w);
      if (us == std::string::npos) break;
      pos = us + 1;
    }
    CHECK_MESSAGE(parts == expected, s);
  }
}

TEST_CASE("concatenation property holds with digits too") {
  std::mt19937_64 rng(6);
  const std::string alphabet = "aB9_zQ1";
  for (int trial = 0; trial < 1000; ++trial) {
    std::string s;
    const std::size_t len = 1 + uniform_below(rng, 10);
    for (std::size_t i = 0; i < len; ++i) s += alphabet[uniform_below(rng, alphabet.size())];
    std::string joined;
    for (const auto& p : split_subtokens(s)) {
      CHECK_FALSE(p.empty());
      joined += p;
    }
    CHECK(joined == fold(s));
  }
}

TEST_CASE("tokenize examples") {
  Vocabulary v = Vocabulary::build({{"do", "nothing"}});
  CHECK(tokenize("", v, LexMode::kComment).empty());
  auto ids = tokenize("do nothing", v, LexMode::kComment);
  REQUIRE(ids.size() == 2);
  CHECK(ids[0] != Special::kUnk);
  CHECK(ids[1] != Special::kUnk);
  auto oov = tokenize("do everything", v, LexMode::kComment);
  CHECK(oov[1] == Special::kUnk);
  auto code = tokenize("doNothing()", v, LexMode::kCode);
  CHECK(code[0] == v.id("do"));
  CHECK(code[1] == v.id("nothing"));
  for (TokenId t : code) CHECK(static_cast<std::size_t>(t) < v.size());
}

TEST_CASE("dedup removes test samples whose code appears in train") {
  DatasetSplits s;
  auto mk = [](std::string id, TokenSeq code) {
    CodeCommentPair p;
    p.id = std::move(id);
    p.code_tokens = std::move(code);
    p.comment_tokens = {7};
    return p;
  };
  s.train = {mk("t1", {6, 7}), mk("t2", {8})};
  s.validation = {mk("v1", {6, 7})};
  s.test = {mk("x1", {6, 7}), mk("x2", {9}), mk("x3", {8})};
  auto d = dedup_test_against_train(s);
  REQUIRE(d.test.size() == 1);
  CHECK(d.test[0].id == "x2");
  CHECK(d.validation.size() == 1);
  CHECK(d.train.size() == 2);
  auto twice = dedup_test_against_train(d);
  CHECK(twice.test.size() == d.test.size());
  s.test.clear();
  CHECK(dedup_test_against_train(s).test.empty());
}

TEST_CASE("synthetic corpus construction") {
  auto small = generate_synthetic_corpus(2, 4, 7);
  const std::size_t total = small.train.size() + small.validation.size() + small.test.size();
  CHECK(total == 8);
  std::set<std::string> skeletons;
  for (auto* split : {&small.train, &small.validation, &small.test}) {
    for (const auto& p : *split) {
      // The first word is the template verb and the last two are the
      // template object and qualifier.
      auto w = lex(p.comment_raw, LexMode::kComment);
      REQUIRE(w.size() >= 4);
      skeletons.insert(w[0] + " " + w[w.size() - 2] + " " + w.back());
    }
  }
  CHECK(skeletons.size() == 2);
  CHECK(small.templates.size() == 8);

  CHECK_THROWS_AS(generate_synthetic_corpus(1, 8, 1), UsageError);
  CHECK_THROWS_AS(generate_synthetic_corpus(2, 3, 1), UsageError);
}

TEST_CASE("synthetic corpus is deterministic and splits are disjoint") {
  auto a = generate_synthetic_corpus(10, 80, 1);
  auto b = generate_synthetic_corpus(10, 80, 1);
  CHECK(to_jsonl(a.train) == to_jsonl(b.train));
  CHECK(to_jsonl(a.validation) == to_jsonl(b.validation));
  CHECK(to_jsonl(a.test) == to_jsonl(b.test));
  CHECK(templates_to_tsv(a.templates) == templates_to_tsv(b.templates));
  CHECK(a.train.size() == 600);
  CHECK(a.validation.size() == 100);
  CHECK(a.test.size() == 100);
  std::set<std::string> ids;
  for (auto* split : {&a.train, &a.validation, &a.test})
    for (const auto& p : *split) CHECK(ids.insert(p.id).second);
  auto c = generate_synthetic_corpus(10, 80, 2);
  CHECK(to_jsonl(a.train) != to_jsonl(c.train));
}

TEST_CASE("token overlap does not determine the template") {
  auto raw = generate_synthetic_corpus(10, 60, 1);
  Corpus c = prepare(raw);
  const auto& T = c.splits.templates;
  auto bag = [](const TokenSeq& s) { return std::set<TokenId>(s.begin(), s.end()); };
  std::vector<std::set<TokenId>> train_bags;
  for (const auto& p : c.splits.train) train_bags.push_back(bag(p.code_tokens));
  auto overlap = [](const std::set<TokenId>& x, const std::set<TokenId>& y) {
    std::size_t n = 0;
    for (TokenId t : x) n += y.count(t);
    return n;
  };
  // Overlap retriever: most shared distinct tokens, lowest row on ties.
  std::size_t hits = 0;
  for (const auto& q : c.splits.test) {
    auto qb = bag(q.code_tokens);
    std::size_t best = 0, best_row = 0;
    for (std::size_t r = 0; r < train_bags.size(); ++r) {
      std::size_t o = overlap(qb, train_bags[r]);
      if (o > best) {
        best = o;
        best_row = r;
      }
    }
    hits += T.at(q.id) == T.at(c.splits.train[best_row].id);
  }
  const double precision = static_cast<double>(hits) / static_cast<double>(c.splits.test.size());
  MESSAGE("overlap precision@1 = " << precision);
  CHECK(precision < 0.95);
  CHECK(precision > 0.1);

  // Some cross-template pair shares more tokens than some same-template pair.
  std::size_t min_same = SIZE_MAX, max_cross = 0;
  for (std::size_t i = 0; i < 100; ++i) {
    for (std::size_t j = i + 1; j < 100; ++j) {
      std::size_t o = overlap(train_bags[i], train_bags[j]);
      if (T.at(c.splits.train[i].id) == T.at(c.splits.train[j].id)) min_same = std::min(min_same, o);
      else max_cross = std::max(max_cross, o);
    }
  }
  CHECK(max_cross > min_same);
}

TEST_CASE("prepare builds the vocabulary from train only and tokens stay in range") {
  DatasetSplits raw;
  raw.train = parse_jsonl(R"({"id":"a","code":"def fooBar(x): return x","comment":"Return x."})");
  raw.validation = parse_jsonl(R"({"id":"b","code":"def bazQux(y): pass","comment":"Nothing here"})");
  raw.test = parse_jsonl(R"({"id":"c","code":"def fooBar(x): return x","comment":"dup"})" "\n"
                         R"({"id":"d","code":"xyz","comment":"novel words"})" "\n"
                         R"({"id":"e","code":"   ","comment":"empty code"})");
  Corpus c = prepare(raw);
  CHECK(c.vocab.id("baz") == Special::kUnk);
  CHECK(c.vocab.id("foo") != Special::kUnk);
  CHECK(c.dropped_empty == 1);
  CHECK(c.dropped_duplicates == 1);
  REQUIRE(c.splits.test.size() == 1);
  CHECK(c.splits.test[0].id == "d");
  for (auto* split : {&c.splits.train, &c.splits.validation, &c.splits.test}) {
    for (const auto& p : *split) {
      CHECK_FALSE(p.code_tokens.empty());
      CHECK_FALSE(p.comment_tokens.empty());
      for (TokenId t : p.code_tokens) CHECK(static_cast<std::size_t>(t) < c.vocab.size());
    }
  }
}

TEST_CASE("save then load reproduces token sequences") {
  Corpus c = prepare(generate_synthetic_corpus(3, 16, 4));
  auto dir = temp_dir("roundtrip");
  save_corpus(c, dir.string());
  Corpus d = load_corpus(dir.string());
  CHECK(d.vocab.hash() == c.vocab.hash());
  CHECK(d.splits.templates == c.splits.templates);
  REQUIRE(d.splits.train.size() == c.splits.train.size());
  for (std::size_t i = 0; i < c.splits.train.size(); ++i) {
    CHECK(d.splits.train[i].code_tokens == c.splits.train[i].code_tokens);
    CHECK(d.splits.train[i].comment_tokens == c.splits.train[i].comment_tokens);
  }
  REQUIRE(d.splits.test.size() == c.splits.test.size());
  for (std::size_t i = 0; i < c.splits.test.size(); ++i)
    CHECK(d.splits.test[i].code_tokens == c.splits.test[i].code_tokens);
}

TEST_CASE("detokenize stops at the end marker") {
  Vocabulary v = Vocabulary::build({{"a", "b"}});
  CHECK(detokenize({v.id("a"), v.id("b"), Special::kEos, v.id("a")}, v) == "a b");
}
