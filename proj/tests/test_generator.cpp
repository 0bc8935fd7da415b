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

#include <cmath>
#include <random>

#include "racg/common.hpp"
#include "racg/generator.hpp"

using namespace racg;
using namespace racg::gen;
using corpus::Special;

namespace {

CodeCommentPair pair_with(TokenSeq code, TokenSeq comment, std::string id = "p") {
  CodeCommentPair p;
  p.id = std::move(id);
  p.code_tokens = std::move(code);
  p.comment_tokens = std::move(comment);
  return p;
}

TokenSeq run(std::size_t n, TokenId start) {
  TokenSeq s;
  for (std::size_t i = 0; i < n; ++i) s.push_back(start + static_cast<TokenId>(i % 50));
  return s;
}

// Pseudo-random next-token distributions keyed by the prefix.
class TableModel : public NextTokenModel {
 public:
  TableModel(int vocab, std::uint64_t seed, double sharpness = 2.0)
      : vocab_(vocab), seed_(seed), sharpness_(sharpness) {}
  int vocab_size() const override { return vocab_; }
  TokenId eos() const override { return Special::kEos; }
  nn::RowVector next(const TokenSeq& prefix) override {
    Fnv1a h;
    h.update(&seed_, sizeof(seed_));
    for (TokenId t : prefix) h.update(&t, sizeof(t));
    std::mt19937_64 rng(h.digest());
    std::normal_distribution<double> n(0.0, sharpness_);
    nn::RowVector logits(vocab_);
    for (int i = 0; i < vocab_; ++i) logits(i) = n(rng);
    const double m = logits.maxCoeff();
    const double lse = m + std::log((logits.array() - m).exp().sum());
    return logits.array() - lse;
  }

 private:
  int vocab_;
  std::uint64_t seed_;
  double sharpness_;
};

// Always emits the next token of a fixed sequence with probability one.
class ForcedModel : public NextTokenModel {
 public:
  explicit ForcedModel(TokenSeq seq) : seq_(std::move(seq)) {}
  int vocab_size() const override { return 8; }
  TokenId eos() const override { return Special::kEos; }
  nn::RowVector next(const TokenSeq& prefix) override {
    nn::RowVector lp = nn::RowVector::Constant(8, -INFINITY);
    lp(prefix.size() < seq_.size() ? seq_[prefix.size()] : Special::kEos) = 0.0;
    return lp;
  }

 private:
  TokenSeq seq_;
};

}  // namespace

TEST_CASE("build_input concatenates segments in order") {
  auto q = pair_with({10, 11}, {20}, "q");
  auto e = pair_with({30}, {40}, "e");
  auto in = build_input(q, e);
  CHECK(in.tokens == TokenSeq{10, 11, Special::kNewline, Special::kHash, 40, Special::kNewline, 30});
  CHECK(in.source_id == "q");
  CHECK(in.exemplar_id == "e");
  auto seg = split_segments(in.tokens);
  CHECK(seg.query_code == TokenSeq{10, 11});
  CHECK(seg.exemplar_comment == TokenSeq{40});
  CHECK(seg.exemplar_code == TokenSeq{30});
}

TEST_CASE("segment budgets") {
  auto q = pair_with(run(300, 6), {7});
  auto e = pair_with({8}, {9});
  auto in = build_input(q, e);
  CHECK(in.query_len == 256);
  CHECK(split_segments(in.tokens).query_code.size() == 256);

  auto big_q = pair_with(run(256, 6), {7});
  auto big_e = pair_with(run(1000, 6), run(64, 6));
  auto full = build_input(big_q, big_e);
  CHECK(full.tokens.size() == 512);
  CHECK(full.query_len == 256);
  CHECK(full.comment_len == 64);
  CHECK(full.exemplar_code_len == 512 - 256 - 3 - 64);
}

TEST_CASE("budget safety and separator integrity under random lengths") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    auto q = pair_with(run(uniform_below(rng, 4 * 256), 6), {7});
    auto e = pair_with(run(uniform_below(rng, 4 * 512), 6), run(uniform_below(rng, 4 * 64), 6));
    auto in = build_input(q, e);
    CHECK(in.tokens.size() <= 512);
    CHECK(in.query_len <= 256);
    CHECK(in.comment_len <= 64);
    auto seg = split_segments(in.tokens);
    CHECK(static_cast<int>(seg.query_code.size()) == in.query_len);
    CHECK(static_cast<int>(seg.exemplar_comment.size()) == in.comment_len);
    CHECK(static_cast<int>(seg.exemplar_code.size()) == in.exemplar_code_len);
    CHECK(std::equal(seg.query_code.begin(), seg.query_code.end(), q.code_tokens.begin()));
    CHECK(std::equal(seg.exemplar_comment.begin(), seg.exemplar_comment.end(), e.comment_tokens.begin()));
    CHECK(std::equal(seg.exemplar_code.begin(), seg.exemplar_code.end(), e.code_tokens.begin()));
  }
}

TEST_CASE("make_target appends the end marker within the target budget") {
  CHECK(make_target({6, 7}) == TokenSeq{6, 7, Special::kEos});
  CHECK(make_target(run(100, 6), 10).size() == 10);
  CHECK(make_target(run(100, 6), 10).back() == Special::kEos);
}

TEST_CASE("generation_loss is the negated sum of token log-probabilities") {
  nn::Seq2SeqConfig c;
  c.net.vocab_size = 40;
  c.net.hidden = 16;
  c.net.heads = 2;
  c.net.ff = 16;
  nn::Seq2SeqModel m(c, 3);
  auto in = build_input(pair_with({10, 11, 12}, {13}), pair_with({14}, {15, 16}));
  TokenSeq target = {20, 21, 22, Special::kEos};
  nn::Graph g(false);
  double loss = generation_loss(g, m, in, target).scalar();
  nn::Graph h(false);
  nn::Var lp = m.token_logprobs(h, in.tokens, target);
  CHECK(loss >= 0.0);
  CHECK(loss == doctest::Approx(-lp.value().sum()).epsilon(1e-12));
  // Positionwise: extending the target by one token adds that position's term.
  nn::Graph k(false);
  nn::Var lp2 = m.token_logprobs(k, in.tokens, TokenSeq{20, 21, 22});
  for (int t = 0; t < 3; ++t) CHECK(lp2.value()(t, 0) == doctest::Approx(lp.value()(t, 0)).epsilon(1e-12));
  nn::Graph e(false);
  CHECK_THROWS(generation_loss(e, m, in, TokenSeq{}));
  CHECK_THROWS(generation_loss(e, m, in, TokenSeq{20}));
}

TEST_CASE("generation_loss vanishes for a certain model") {
  nn::Seq2SeqConfig c;
  c.net.vocab_size = 10;
  c.net.hidden = 8;
  c.net.heads = 2;
  c.net.ff = 8;
  c.net.layers = 1;
  nn::Seq2SeqModel m(c, 4);
  // A huge bias on the end marker makes it the only plausible token.
  m.params().get("out_bias").value(0, Special::kEos) = 1e4;
  auto in = build_input(pair_with({6}, {7}), pair_with({8}, {9}));
  nn::Graph g(false);
  CHECK(generation_loss(g, m, in, TokenSeq{Special::kEos}).scalar() == doctest::Approx(0.0));
}

TEST_CASE("beam of one equals greedy decoding") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    TableModel a(7, seed), b(7, seed);
    auto beam = beam_search(a, 1, 6);
    auto greedy = greedy_search(b, 6);
    CHECK(beam.tokens == greedy.tokens);
    CHECK(beam.log_prob == doctest::Approx(greedy.log_prob));
  }
}

TEST_CASE("forced sequences decode exactly for every beam size") {
  TokenSeq seq = {6, 3, 7, 7};
  for (int beam : {1, 2, 5, 10}) {
    ForcedModel m(seq);
    CHECK(beam_search(m, beam, 10).tokens == seq);
  }
  ForcedModel m(seq);
  auto cut = beam_search(m, 3, 2);
  CHECK(cut.tokens == TokenSeq{6, 3});
  CHECK(cut.length == 2);
}

TEST_CASE("wide beam attains the exhaustive optimum") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    TableModel m(5, seed, 1.0);
    // Enumerate every sequence of at most three tokens; the end marker may
    // only close a sequence, and length-3 sequences end by force.
    double best = -INFINITY;
    std::function<void(TokenSeq&, double)> walk = [&](TokenSeq& prefix, double lp) {
      nn::RowVector next = m.next(prefix);
      for (TokenId t = 0; t < 5; ++t) {
        const double l = lp + next(t);
        prefix.push_back(t);
        if (t == Special::kEos || prefix.size() == 3) {
          best = std::max(best, l / static_cast<double>(prefix.size()));
        } else {
          walk(prefix, l);
        }
        prefix.pop_back();
      }
    };
    TokenSeq start;
    walk(start, 0.0);
    TableModel fresh(5, seed, 1.0);
    auto r = beam_search(fresh, 125, 3);
    CHECK(r.score() == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("log-probability never increases along a hypothesis") {
  TableModel m(9, 77);
  auto r = beam_search(m, 4, 8);
  TokenSeq prefix;
  double lp = 0.0;
  for (TokenId t : r.tokens) {
    const double next = lp + m.next(prefix)(t);
    CHECK(next <= lp);
    lp = next;
    prefix.push_back(t);
  }
  CHECK(r.log_prob <= lp + 1e-12);
}

TEST_CASE("beam size monotonicity") {
  int cases = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    TableModel m(8, seed, 1.5);
    double prev = -INFINITY;
    for (int beam = 1; beam <= 8; ++beam) {
      double s = beam_search(m, beam, 6).score();
      CHECK_MESSAGE(s >= prev - 1e-12, "seed " << seed << " beam " << beam);
      prev = s;
      ++cases;
    }
  }
  CHECK(cases == 1600);
}

TEST_CASE("beam_decode returns the comment without the end marker") {
  nn::Seq2SeqConfig c;
  c.net.vocab_size = 12;
  c.net.hidden = 8;
  c.net.heads = 2;
  c.net.ff = 8;
  nn::Seq2SeqModel m(c, 5);
  auto in = build_input(pair_with({6, 7}, {8}), pair_with({9}, {10}));
  auto a = beam_decode(m, in, 3, 5);
  auto b = beam_decode(m, in, 3, 5);
  CHECK(a == b);
  CHECK(a.size() <= 5);
  for (TokenId t : a) CHECK(t != Special::kEos);
}

TEST_CASE("cached next-token distributions match the model for any request order") {
  nn::Seq2SeqConfig c;
  c.net.vocab_size = 12;
  c.net.hidden = 8;
  c.net.heads = 2;
  c.net.ff = 8;
  nn::Seq2SeqModel m(c, 6);
  auto in = build_input(pair_with({6, 7, 8}, {9}), pair_with({10}, {11}));
  Seq2SeqNextToken next(m, in);
  nn::Graph g(false);
  nn::Matrix memory = m.encode_source(g, in.tokens).value();
  std::vector<TokenSeq> prefixes = {{}, {6}, {6, 7}, {8}, {6, 7, 9}, {}, {3, 3, 3, 3}, {6}};
  for (const auto& p : prefixes) {
    TokenSeq dec = {m.config().start_id};
    dec.insert(dec.end(), p.begin(), p.end());
    CHECK((next.next(p) - m.next_logprobs(memory, dec)).cwiseAbs().maxCoeff() < 1e-10);
  }
}
