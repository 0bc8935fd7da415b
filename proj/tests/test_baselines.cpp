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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <random>
#include <set>

#include "racg/baselines.hpp"
#include "racg/common.hpp"
#include "racg/corpus.hpp"
#include "racg/generator.hpp"

using namespace racg;
using namespace racg::baseline;

namespace {

CodeCommentPair doc(const std::string& id, corpus::TokenSeq code) {
  CodeCommentPair p;
  p.id = id;
  p.code_tokens = std::move(code);
  return p;
}

std::vector<CodeCommentPair> random_base(std::mt19937_64& gen, int n, int vocab, int max_len) {
  std::vector<CodeCommentPair> out;
  for (int i = 0; i < n; ++i) {
    corpus::TokenSeq t;
    for (int j = 0, len = 1 + static_cast<int>(gen() % max_len); j < len; ++j)
      t.push_back(static_cast<corpus::TokenId>(10 + gen() % vocab));
    out.push_back(doc("d" + std::to_string(i), t));
  }
  return out;
}

std::vector<std::string> ids(const std::vector<RetrievedExemplar>& r) {
  std::vector<std::string> out;
  for (const auto& e : r) out.push_back(e.id);
  return out;
}

// Ranks ids by descending score, ties to the earlier document.
std::vector<std::string> rank_by(const std::vector<double>& s, const std::vector<CodeCommentPair>& base,
                                 std::optional<std::string> exclude = {}) {
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (!exclude || base[i].id != *exclude) order.push_back(i);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
  std::vector<std::string> out;
  for (auto i : order) out.push_back(base[i].id);
  return out;
}

// Textbook BM25 over raw token lists.
std::vector<double> bm25_loop(const std::vector<CodeCommentPair>& base, const corpus::TokenSeq& q) {
  const double k1 = 1.2, b = 0.75, n = static_cast<double>(base.size());
  double avg = 0.0;
  for (const auto& d : base) avg += static_cast<double>(d.code_tokens.size());
  avg /= n;
  std::vector<double> out;
  for (const auto& d : base) {
    double s = 0.0;
    for (auto t : q) {
      double f = 0.0, df = 0.0;
      for (auto u : d.code_tokens) f += u == t;
      for (const auto& e : base) df += std::count(e.code_tokens.begin(), e.code_tokens.end(), t) > 0;
      if (f == 0.0) continue;
      const double idf = std::max(0.0, std::log((n - df + 0.5) / (df + 0.5)));
      s += idf * f * (k1 + 1) / (f + k1 * (1 - b + b * static_cast<double>(d.code_tokens.size()) / avg));
    }
    out.push_back(s);
  }
  return out;
}

std::vector<double> tfidf_loop(const std::vector<CodeCommentPair>& base, const corpus::TokenSeq& q) {
  const double n = static_cast<double>(base.size());
  std::map<corpus::TokenId, double> df;
  for (const auto& d : base)
    for (auto t : std::set<corpus::TokenId>(d.code_tokens.begin(), d.code_tokens.end())) df[t] += 1;
  auto vec = [&](const corpus::TokenSeq& toks) {
    std::map<corpus::TokenId, double> v;
    for (auto t : toks)
      if (df.count(t)) v[t] += std::log(n / df[t]);
    return v;
  };
  const auto qv = vec(q);
  double qn = 0.0;
  for (auto& [t, w] : qv) qn += w * w;
  std::vector<double> out;
  for (const auto& d : base) {
    const auto dv = vec(d.code_tokens);
    double dot = 0.0, dn = 0.0;
    for (auto& [t, w] : dv) {
      dn += w * w;
      auto it = qv.find(t);
      if (it != qv.end()) dot += w * it->second;
    }
    out.push_back(qn > 0 && dn > 0 ? dot / std::sqrt(qn * dn) : 0.0);
  }
  return out;
}

}  // namespace

TEST_CASE("bm25 examples by hand") {
  // One document: idf = log(0.5 / 1.5) < 0 is floored, so the score is 0.
  Bm25Index single({{11, 12, 11}});
  CHECK(single.score({11, 12}, 0) == 0.0);
  // Three documents; term 11 only in doc 0 with tf 2, length 3, avgdl 3.
  Bm25Index idx({{11, 12, 11}, {12, 13, 14}, {13, 14, 15}});
  const double idf = std::log(2.5 / 1.5);
  const double tf_part = 2 * 2.2 / (2 + 1.2);
  CHECK(idx.idf(11) == doctest::Approx(idf));
  CHECK(idx.score({11}, 0) == doctest::Approx(idf * tf_part));
  CHECK(idx.score({99}, 0) == 0.0);
  CHECK(idx.score({11}, 1) == 0.0);
  CHECK(idx.average_length() == doctest::Approx(3.0));
  CHECK_THROWS_AS(idx.score({11}, 3), DataError);
}

TEST_CASE("bm25 and tfidf rankings equal brute-force loops") {
  std::mt19937_64 gen(21);
  for (int t = 0; t < 50; ++t) {
    const auto base = random_base(gen, 20, 15, 12);
    const auto q = random_base(gen, 1, 15, 6).front();
    const auto bl = bm25_loop(base, q.code_tokens);
    const auto tl = tfidf_loop(base, q.code_tokens);
    Bm25Retriever bm(base);
    TfidfRetriever tf(base);
    const auto bs = bm.index().score_all(q.code_tokens);
    const auto ts = tf.score_all(q.code_tokens);
    for (int i = 0; i < 20; ++i) {
      CHECK(bs[i] == doctest::Approx(bl[i]).epsilon(1e-12));
      CHECK(ts[i] == doctest::Approx(tl[i]).epsilon(1e-12));
    }
    const auto want_b = rank_by(std::vector<double>(bs.data(), bs.data() + 20), base, base[3].id);
    CHECK(ids(bm.retrieve(q, 5, base[3].id)) == std::vector<std::string>(want_b.begin(), want_b.begin() + 5));
    const auto want_t = rank_by(std::vector<double>(ts.data(), ts.data() + 20), base);
    CHECK(ids(tf.retrieve(q, 5, std::nullopt)) == std::vector<std::string>(want_t.begin(), want_t.begin() + 5));
  }
}

TEST_CASE("property: lexical scores ignore document insertion order") {
  std::mt19937_64 gen(22);
  for (int t = 0; t < 30; ++t) {
    auto base = random_base(gen, 15, 10, 8);
    const auto q = random_base(gen, 1, 10, 5).front();
    Bm25Retriever b1(base);
    TfidfRetriever t1(base);
    auto b1s = b1.index().score_all(q.code_tokens);
    auto t1s = t1.score_all(q.code_tokens);
    std::map<std::string, std::pair<double, double>> before;
    for (int i = 0; i < 15; ++i) before[base[i].id] = {b1s[i], t1s[i]};
    std::shuffle(base.begin(), base.end(), gen);
    Bm25Retriever b2(base);
    TfidfRetriever t2(base);
    auto b2s = b2.index().score_all(q.code_tokens);
    auto t2s = t2.score_all(q.code_tokens);
    for (int i = 0; i < 15; ++i) {
      CHECK(b2s[i] == doctest::Approx(before[base[i].id].first).epsilon(1e-12));
      CHECK(t2s[i] == doctest::Approx(before[base[i].id].second).epsilon(1e-12));
    }
  }
}

TEST_CASE("property: an unrelated document never outranks a matching document") {
  std::mt19937_64 gen(23);
  for (int t = 0; t < 100; ++t) {
    auto base = random_base(gen, 12, 10, 8);
    const auto q = random_base(gen, 1, 10, 4).front();
    base.insert(base.begin() + static_cast<long>(gen() % 13), doc("unrelated", {500, 501, 502}));
    Bm25Retriever bm(base);
    const auto s = bm.index().score_all(q.code_tokens);
    const auto ranked = ids(bm.retrieve(q, 13, std::nullopt));
    const auto pos = std::find(ranked.begin(), ranked.end(), "unrelated") - ranked.begin();
    for (int i = 0; i < 13; ++i) {
      if (s[i] <= 0.0) continue;
      CHECK(std::find(ranked.begin(), ranked.end(), base[i].id) - ranked.begin() < pos);
    }
  }
}

TEST_CASE("tfidf edge cases") {
  const std::vector<CodeCommentPair> base{doc("a", {11, 12}), doc("b", {12, 13}), doc("c", {14})};
  TfidfRetriever tf(base);
  CHECK(tf.retrieve(doc("q", {13, 12}), 1, std::nullopt).front().id == "b");
  CHECK(ids(tf.retrieve(doc("q", {99}), 3, std::nullopt)) == std::vector<std::string>{"a", "b", "c"});
  CHECK_THROWS(TfidfRetriever({}).retrieve(doc("q", {1}), 1, std::nullopt));
}

TEST_CASE("random retrieval is seeded, exclusive and uniform") {
  const std::vector<CodeCommentPair> two{doc("a", {1}), doc("b", {2})};
  RandomRetriever r2(two, 3);
  CHECK(r2.retrieve(doc("a", {1}), 1, "a").front().id == "b");
  CHECK_THROWS_AS(RandomRetriever({doc("a", {1})}, 1).retrieve(doc("a", {1}), 1, "a"), DataError);

  std::vector<CodeCommentPair> ten;
  for (int i = 0; i < 10; ++i) ten.push_back(doc("x" + std::to_string(i), {1}));
  RandomRetriever r(ten, 7), same(ten, 7);
  std::map<std::string, int> counts;
  for (int i = 0; i < 10000; ++i) {
    const auto q = doc("q" + std::to_string(i), {1});
    const auto got = r.retrieve(q, 3, "x4");
    CHECK(ids(got) == ids(same.retrieve(q, 3, "x4")));
    std::set<std::string> uniq;
    for (const auto& e : got) {
      CHECK(e.id != "x4");
      uniq.insert(e.id);
    }
    CHECK(uniq.size() == 3);
    counts[r.retrieve(q, 1, std::nullopt).front().id]++;
  }
  double chi2 = 0.0;
  for (int i = 0; i < 10; ++i) {
    const double o = counts["x" + std::to_string(i)];
    chi2 += (o - 1000.0) * (o - 1000.0) / 1000.0;
  }
  CHECK(chi2 < 21.666);  // chi-square, 9 degrees of freedom, alpha 0.01
}

TEST_CASE("every kind honours the shared exclusion contract") {
  std::mt19937_64 gen(24);
  const auto base = random_base(gen, 10, 8, 6);
  nn::EncoderConfig ec;
  ec.net.vocab_size = 40;
  ec.net.hidden = 8;
  ec.net.layers = 1;
  ec.net.heads = 2;
  ec.net.ff = 16;
  std::vector<std::unique_ptr<Retriever>> all;
  all.push_back(std::make_unique<Bm25Retriever>(base));
  all.push_back(std::make_unique<TfidfRetriever>(base));
  all.push_back(std::make_unique<RandomRetriever>(base, 5));
  all.push_back(std::make_unique<DenseRetriever>(RetrieverKind::kFixedEncoder, nn::EncoderModel(ec, 1), base));
  for (auto& r : all) {
    CAPTURE(kind_name(r->kind()));
    for (const auto& q : base) {
      const auto got = r->retrieve(q, 9, q.id);
      CHECK(got.size() == 9);
      for (const auto& e : got) CHECK(e.id != q.id);
      CHECK(r->retrieve(q, 20, std::nullopt).size() == 10);
    }
  }
  for (auto kind : {RetrieverKind::kJointDense, RetrieverKind::kBm25, RetrieverKind::kTfidf,
                    RetrieverKind::kRandom, RetrieverKind::kFixedEncoder})
    CHECK(parse_kind(kind_name(kind)) == kind);
  CHECK_THROWS_AS(parse_kind("lsi"), UsageError);
}

namespace {

const corpus::Corpus& small_corpus() {
  static const corpus::Corpus c = corpus::prepare(corpus::generate_synthetic_corpus(3, 16, 6));
  return c;
}

nn::Seq2SeqConfig small_generator() {
  nn::Seq2SeqConfig c;
  c.net.vocab_size = static_cast<int>(small_corpus().vocab.size());
  c.net.hidden = 16;
  c.net.layers = 1;
  c.net.heads = 2;
  c.net.ff = 24;
  c.max_source = 40;
  c.max_target = 12;
  return c;
}

train::TrainingConfig small_training() {
  train::TrainingConfig c;
  c.k = 1;
  c.epochs = 4;
  c.patience = 4;
  c.batch_size = 4;
  c.grad_accum = 1;
  c.beam = 2;
  c.learning_rate = 3e-3;
  c.budgets = {16, 8, 40};
  c.max_target = 12;
  c.val_limit = 4;
  return c;
}

double validation_loss(nn::Seq2SeqModel& gen, Retriever& r, const train::TrainingConfig& c) {
  const auto& s = small_corpus().splits;
  double total = 0.0;
  for (const auto& v : s.validation) {
    const auto hit = r.retrieve(v, 1, std::nullopt).front();
    nn::Graph g(true, false);
    total += gen::generation_loss(g, gen, gen::build_input(v, s.train[hit.row], c.budgets),
                                  gen::make_target(v.comment_tokens, c.max_target))
                 .scalar();
  }
  return total / static_cast<double>(s.validation.size());
}

}  // namespace

TEST_CASE("bm25 generator beats an untrained one on validation loss") {
  const auto c = small_training();
  const auto& s = small_corpus().splits;
  Bm25Retriever bm(s.train);
  nn::Seq2SeqModel untrained(small_generator(), 9);
  nn::Seq2SeqModel trained = untrained;
  const auto result = train_baseline_generator(bm, c, s, small_corpus().vocab, trained);
  CHECK(result.best_epoch >= 1);
  CHECK(validation_loss(trained, bm, c) < validation_loss(untrained, bm, c));
}

TEST_CASE("random-retriever generator training is deterministic") {
  const auto c = small_training();
  const auto& s = small_corpus().splits;
  nn::Seq2SeqModel a(small_generator(), 9), b(small_generator(), 9);
  RandomRetriever ra(s.train, 4), rb(s.train, 4);
  train_baseline_generator(ra, c, s, small_corpus().vocab, a);
  train_baseline_generator(rb, c, s, small_corpus().vocab, b);
  CHECK(a.params().hash() == b.params().hash());
}

TEST_CASE("assembled variants never touch checkpoints and check vocabularies") {
  const auto dir = std::filesystem::temp_directory_path() / "racg_variant_test";
  std::filesystem::create_directories(dir);
  const auto& c = small_corpus();
  nn::Seq2SeqModel gen(small_generator(), 3);
  nn::EncoderConfig ec;
  ec.net = small_generator().net;
  nn::EncoderModel enc(ec, 4);
  const std::string gstem = (dir / "gen").string(), rstem = (dir / "ret").string();
  nn::save_seq2seq(gstem, gen, c.vocab.hash());
  nn::save_encoder(rstem, enc, c.vocab.hash());
  VariantManifest m;
  m.retriever_kind = RetrieverKind::kJointDense;
  m.retriever_path = rstem;
  m.generator_path = gstem;
  m.save((dir / "variant.json").string());
  const auto loaded = VariantManifest::load((dir / "variant.json").string());
  CHECK(loaded.to_json() == m.to_json());

  const std::string gbin = read_file(gstem + ".bin"), rbin = read_file(rstem + ".bin");
  Predictor p = assemble_variant(loaded, c.splits.train, c.vocab.hash());
  const auto h0 = p.generator().params().hash();
  for (int i = 0; i < 3; ++i) p.predict(c.splits.test[i], 2, {16, 8, 40}, 12);
  CHECK(p.generator().params().hash() == h0);
  CHECK(h0 == gen.params().hash());
  CHECK(read_file(gstem + ".bin") == gbin);
  CHECK(read_file(rstem + ".bin") == rbin);

  VariantManifest bm = m;
  bm.retriever_kind = RetrieverKind::kBm25;
  bm.retriever_path.clear();
  CHECK(assemble_variant(bm, c.splits.train, c.vocab.hash()).retriever().kind() == RetrieverKind::kBm25);
  CHECK_THROWS_AS(assemble_variant(m, c.splits.train, c.vocab.hash() + 1), DataError);
  std::filesystem::remove_all(dir);
}
