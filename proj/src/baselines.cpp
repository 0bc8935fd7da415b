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

#include "racg/baselines.hpp"

#include <cmath>
#include <numeric>
#include <random>

#include "racg/common.hpp"
#include "racg/metrics.hpp"

namespace racg::baseline {

std::string kind_name(RetrieverKind kind) {
  switch (kind) {
    case RetrieverKind::kJointDense: return "joint-dense";
    case RetrieverKind::kBm25: return "bm25";
    case RetrieverKind::kTfidf: return "tfidf";
    case RetrieverKind::kRandom: return "random";
    case RetrieverKind::kFixedEncoder: return "fixed-encoder";
  }
  return "unknown";
}

RetrieverKind parse_kind(std::string_view name) {
  if (name == "joint-dense") return RetrieverKind::kJointDense;
  if (name == "bm25") return RetrieverKind::kBm25;
  if (name == "tfidf") return RetrieverKind::kTfidf;
  if (name == "random") return RetrieverKind::kRandom;
  if (name == "fixed-encoder") return RetrieverKind::kFixedEncoder;
  throw UsageError("unknown retriever kind: " + std::string(name));
}

namespace {

std::vector<std::string> ids_of(const std::vector<CodeCommentPair>& base) {
  if (base.empty()) throw DataError("retrieval base is empty");
  std::vector<std::string> ids;
  ids.reserve(base.size());
  for (const auto& p : base) ids.push_back(p.id);
  return ids;
}

std::vector<TokenSeq> code_of(const std::vector<CodeCommentPair>& base) {
  std::vector<TokenSeq> docs;
  docs.reserve(base.size());
  for (const auto& p : base) docs.push_back(p.code_tokens);
  return docs;
}

}  // namespace

// ---------------------------------------------------------------------------
// BM25

Bm25Index::Bm25Index(const std::vector<TokenSeq>& docs, double k1, double b) : k1_(k1), b_(b) {
  double total = 0.0;
  for (const auto& d : docs) {
    std::unordered_map<corpus::TokenId, int> tf;
    for (auto t : d) ++tf[t];
    for (const auto& [t, c] : tf) ++df_[t];
    lengths_.push_back(static_cast<double>(d.size()));
    total += static_cast<double>(d.size());
    tf_.push_back(std::move(tf));
  }
  avgdl_ = docs.empty() ? 0.0 : total / static_cast<double>(docs.size());
}

double Bm25Index::idf(corpus::TokenId term) const {
  auto it = df_.find(term);
  const double df = it == df_.end() ? 0.0 : static_cast<double>(it->second);
  const double n = static_cast<double>(doc_count());
  return std::max(0.0, std::log((n - df + 0.5) / (df + 0.5)));
}

double Bm25Index::score(const TokenSeq& query, std::size_t doc) const {
  if (doc >= doc_count()) throw DataError("unknown document " + std::to_string(doc));
  const auto& tf = tf_[doc];
  const double norm = avgdl_ > 0.0 ? lengths_[doc] / avgdl_ : 0.0;
  double s = 0.0;
  for (auto t : query) {
    auto it = tf.find(t);
    if (it == tf.end()) continue;
    const double f = it->second;
    s += idf(t) * f * (k1_ + 1.0) / (f + k1_ * (1.0 - b_ + b_ * norm));
  }
  return s;
}

Eigen::VectorXd Bm25Index::score_all(const TokenSeq& query) const {
  Eigen::VectorXd s(static_cast<Eigen::Index>(doc_count()));
  for (std::size_t d = 0; d < doc_count(); ++d) s[static_cast<Eigen::Index>(d)] = score(query, d);
  return s;
}

Bm25Retriever::Bm25Retriever(const std::vector<CodeCommentPair>& base)
    : ids_(ids_of(base)), index_(code_of(base)) {}

std::vector<RetrievedExemplar> Bm25Retriever::retrieve(const CodeCommentPair& query, int k,
                                                       std::optional<std::string_view> exclude_id) {
  return retrieval::topk_from_scores(index_.score_all(query.code_tokens), ids_, k, exclude_id);
}

// ---------------------------------------------------------------------------
// TF-IDF

TfidfRetriever::TfidfRetriever(const std::vector<CodeCommentPair>& base) : ids_(ids_of(base)) {
  std::unordered_map<corpus::TokenId, int> df;
  for (const auto& p : base) {
    std::unordered_map<corpus::TokenId, int> seen;
    for (auto t : p.code_tokens) seen[t] = 1;
    for (const auto& [t, one] : seen) df[t] += one;
  }
  const double n = static_cast<double>(base.size());
  for (const auto& [t, c] : df) idf_[t] = std::log(n / static_cast<double>(c));
  for (const auto& p : base) {
    docs_.push_back(weigh(p.code_tokens));
    double sq = 0.0;
    for (const auto& [t, w] : docs_.back()) sq += w * w;
    norms_.push_back(std::sqrt(sq));
  }
}

TfidfRetriever::SparseVec TfidfRetriever::weigh(const TokenSeq& tokens) const {
  SparseVec v;
  for (auto t : tokens) {
    auto it = idf_.find(t);
    if (it != idf_.end()) v[t] += it->second;
  }
  return v;
}

Eigen::VectorXd TfidfRetriever::score_all(const TokenSeq& query) const {
  SparseVec q = weigh(query);
  double qn = 0.0;
  for (const auto& [t, w] : q) qn += w * w;
  qn = std::sqrt(qn);
  Eigen::VectorXd s = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(docs_.size()));
  if (qn == 0.0) return s;
  for (std::size_t d = 0; d < docs_.size(); ++d) {
    if (norms_[d] == 0.0) continue;
    double dotp = 0.0;
    for (const auto& [t, w] : q) {
      auto it = docs_[d].find(t);
      if (it != docs_[d].end()) dotp += w * it->second;
    }
    s[static_cast<Eigen::Index>(d)] = dotp / (qn * norms_[d]);
  }
  return s;
}

std::vector<RetrievedExemplar> TfidfRetriever::retrieve(const CodeCommentPair& query, int k,
                                                        std::optional<std::string_view> exclude_id) {
  return retrieval::topk_from_scores(score_all(query.code_tokens), ids_, k, exclude_id);
}

// ---------------------------------------------------------------------------
// Random

RandomRetriever::RandomRetriever(const std::vector<CodeCommentPair>& base, std::uint64_t seed)
    : ids_(ids_of(base)), seed_(seed) {}

std::vector<RetrievedExemplar> RandomRetriever::retrieve(const CodeCommentPair& query, int k,
                                                         std::optional<std::string_view> exclude_id) {
  if (k < 1) throw UsageError("k must be at least 1");
  std::vector<int> rows;
  for (std::size_t i = 0; i < ids_.size(); ++i)
    if (!exclude_id || ids_[i] != *exclude_id) rows.push_back(static_cast<int>(i));
  if (rows.empty()) throw DataError("retrieval base is empty after exclusion");
  std::mt19937_64 gen(mix_seed(seed_, fnv1a(query.id)));
  const std::size_t take = std::min(rows.size(), static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < take; ++i) {
    std::size_t j = i + uniform_below(gen, rows.size() - i);
    std::swap(rows[i], rows[j]);
  }
  std::vector<RetrievedExemplar> out(take);
  for (std::size_t i = 0; i < take; ++i) {
    out[i].row = rows[i];
    out[i].id = ids_[static_cast<std::size_t>(rows[i])];
    out[i].index_score = 0.0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dense

DenseRetriever::DenseRetriever(RetrieverKind kind, nn::EncoderModel encoder,
                               const std::vector<CodeCommentPair>& base)
    : kind_(kind), encoder_(std::move(encoder)) {
  index_ = retrieval::build_index(encoder_, base);
}

DenseRetriever::DenseRetriever(RetrieverKind kind, nn::EncoderModel encoder,
                               retrieval::SearchIndex index)
    : kind_(kind), encoder_(std::move(encoder)), index_(std::move(index)) {}

std::vector<RetrievedExemplar> DenseRetriever::retrieve(const CodeCommentPair& query, int k,
                                                        std::optional<std::string_view> exclude_id) {
  nn::RowVector q = retrieval::normalize(encoder_.encode_value(query.code_tokens));
  return retrieval::retrieve_topk(index_, q, k, exclude_id);
}

nn::EncoderModel encoder_from_seq2seq(const nn::Seq2SeqModel& model, int max_tokens) {
  if (max_tokens + 1 > model.config().max_source)
    throw UsageError("encoder budget exceeds the seq2seq source positions");
  nn::EncoderConfig ec;
  ec.net = model.config().net;
  ec.max_tokens = max_tokens;
  nn::EncoderModel enc(ec, 0);
  auto& dst = enc.params();
  const auto& src = model.params();
  dst.get("tok_emb").value = src.get("emb").value;
  dst.get("pos_emb").value = src.get("src_pos").value.topRows(max_tokens + 1);
  for (nn::Parameter* p : dst.all()) {
    if (p->name.rfind("enc.", 0) == 0) p->value = src.get(p->name).value;
  }
  return enc;
}

// ---------------------------------------------------------------------------
// Generator training on fixed inputs

train::TrainResult train_generator(const train::TrainingConfig& config, const FixedInputs& data,
                                   const corpus::Vocabulary& vocab, nn::Seq2SeqModel& generator) {
  config.validate(false);
  if (data.train.empty()) throw DataError("no training inputs");
  if (data.train.size() != data.train_targets.size() ||
      data.valid.size() != data.valid_refs.size())
    throw UsageError("inputs and targets differ in length");

  std::mt19937_64 rng(mix_seed(config.seed, 0x64726f70));
  generator.set_dropout_enabled(true);
  nn::OptimizerConfig oc;
  oc.learning_rate = config.learning_rate;
  oc.accumulation = config.grad_accum;
  oc.clip_norm = config.clip_norm;
  nn::Optimizer opt(oc);
  opt.attach(generator.params());
  generator.params().zero_grad();

  train::TrainResult result;
  train::EarlyStopper stopper(config.patience);
  nn::ParamSet best = generator.params();
  double loss_sum = 0.0;
  int count = 0;
  int epoch = 0;
  auto after_update = [&]() {
    train::LogRecord r;
    r.step = opt.updates();
    r.loss = loss_sum / count;
    r.epoch = epoch;
    result.log.push_back(r);
    loss_sum = 0.0;
    count = 0;
  };

  std::vector<std::size_t> order(data.train.size());
  for (epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffle_rng(mix_seed(config.seed, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[uniform_below(shuffle_rng, i)]);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const double inv = 1.0 / static_cast<double>(end - start);
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t i = order[b];
        nn::Graph g(true, true, &rng);
        nn::Var loss = gen::generation_loss(g, generator, data.train[i], data.train_targets[i]);
        if (!std::isfinite(loss.scalar()))
          throw NumericError("non-finite generation loss at sample " + data.train[i].source_id);
        g.backward(loss, inv);
        loss_sum += loss.scalar();
        ++count;
      }
      if (opt.step()) after_update();
    }
    if (opt.flush()) after_update();

    std::vector<metrics::EvalPair> pairs;
    std::size_t n = data.valid.size();
    if (config.val_limit > 0) n = std::min(n, static_cast<std::size_t>(config.val_limit));
    for (std::size_t i = 0; i < n; ++i) {
      auto tokens = gen::beam_decode(generator, data.valid[i], config.beam, config.max_target);
      pairs.push_back({train::prediction_words(tokens, vocab), data.valid_refs[i]});
    }
    const double bleu = pairs.empty() ? 0.0 : metrics::corpus_bleu(pairs);
    result.epoch_bleu.push_back(bleu);
    if (!result.log.empty()) result.log.back().val_bleu = bleu;
    const bool stop = stopper.observe(bleu);
    if (stopper.best_epoch() == epoch) best.copy_values_from(generator.params());
    if (stop) break;
  }
  generator.params().copy_values_from(best);
  result.best_epoch = stopper.best_epoch();
  result.best_bleu = stopper.best_score();
  return result;
}

train::TrainResult train_plain_seq2seq(const train::TrainingConfig& config,
                                       const corpus::DatasetSplits& splits,
                                       const corpus::Vocabulary& vocab,
                                       nn::Seq2SeqModel& model) {
  FixedInputs data;
  const int max_target = model.config().max_target;
  for (const auto& s : splits.train) {
    data.train.push_back(gen::build_plain_input(s, config.budgets));
    data.train_targets.push_back(gen::make_target(s.comment_tokens, max_target));
  }
  for (const auto& s : splits.validation) {
    data.valid.push_back(gen::build_plain_input(s, config.budgets));
    data.valid_refs.push_back(train::reference_words(s));
  }
  return train_generator(config, data, vocab, model);
}

train::TrainResult copy_pretrain(const train::TrainingConfig& config,
                                 const corpus::DatasetSplits& splits,
                                 const corpus::Vocabulary& vocab, nn::Seq2SeqModel& generator) {
  if (config.copy_pretrain_epochs < 1) throw UsageError("copy pre-training needs at least one epoch");
  FixedInputs data;
  const int max_target = generator.config().max_target;
  for (const auto& s : splits.train) {
    data.train.push_back(gen::build_input(s, s, config.budgets));
    data.train_targets.push_back(gen::make_target(s.comment_tokens, max_target));
  }
  for (const auto& s : splits.validation) {
    data.valid.push_back(gen::build_input(s, s, config.budgets));
    data.valid_refs.push_back(train::reference_words(s));
  }
  train::TrainingConfig c = config;
  c.epochs = config.copy_pretrain_epochs;
  c.patience = c.epochs;
  return train_generator(c, data, vocab, generator);
}

train::TrainResult train_baseline_generator(Retriever& retriever,
                                            const train::TrainingConfig& config,
                                            const corpus::DatasetSplits& splits,
                                            const corpus::Vocabulary& vocab,
                                            nn::Seq2SeqModel& generator) {
  const auto& base = splits.train;
  if (base.size() < 2) throw DataError("baseline training needs at least two training samples");
  FixedInputs data;
  const int max_target = generator.config().max_target;
  for (const auto& s : base) {
    auto hit = retriever.retrieve(s, 1, s.id).front();
    data.train.push_back(gen::build_input(s, base[static_cast<std::size_t>(hit.row)], config.budgets));
    data.train_targets.push_back(gen::make_target(s.comment_tokens, max_target));
  }
  for (const auto& s : splits.validation) {
    auto hit = retriever.retrieve(s, 1, std::nullopt).front();
    data.valid.push_back(gen::build_input(s, base[static_cast<std::size_t>(hit.row)], config.budgets));
    data.valid_refs.push_back(train::reference_words(s));
  }
  return train_generator(config, data, vocab, generator);
}

// ---------------------------------------------------------------------------
// Variants

nlohmann::json VariantManifest::to_json() const {
  return {{"retriever_kind", kind_name(retriever_kind)},
          {"retriever_path", retriever_path},
          {"generator_path", generator_path},
          {"seed", seed}};
}

VariantManifest VariantManifest::from_json(const nlohmann::json& j) {
  VariantManifest m;
  try {
    m.retriever_kind = parse_kind(j.at("retriever_kind").get<std::string>());
    m.retriever_path = j.value("retriever_path", "");
    m.generator_path = j.at("generator_path").get<std::string>();
    m.seed = j.value("seed", m.seed);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad variant manifest: ") + e.what());
  }
  return m;
}

void VariantManifest::save(const std::string& path) const {
  write_file_atomic(path, to_json().dump(2) + "\n");
}

VariantManifest VariantManifest::load(const std::string& path) {
  try {
    return from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("bad variant manifest " + path + ": " + e.what());
  }
}

Predictor::Predictor(std::unique_ptr<Retriever> retriever, nn::Seq2SeqModel generator,
                     const std::vector<CodeCommentPair>& base)
    : retriever_(std::move(retriever)), generator_(std::move(generator)), base_(&base) {}

train::Prediction Predictor::predict(const CodeCommentPair& query, int beam_size,
                                     const gen::Budgets& budgets, int max_len) {
  train::Prediction p;
  p.exemplar = retriever_->retrieve(query, 1, std::nullopt).front();
  const CodeCommentPair& ex = base_->at(static_cast<std::size_t>(p.exemplar.row));
  p.tokens = gen::beam_decode(generator_, gen::build_input(query, ex, budgets), beam_size, max_len);
  return p;
}

std::unique_ptr<Retriever> make_lexical_retriever(RetrieverKind kind,
                                                  const std::vector<CodeCommentPair>& base,
                                                  std::uint64_t seed) {
  switch (kind) {
    case RetrieverKind::kBm25: return std::make_unique<Bm25Retriever>(base);
    case RetrieverKind::kTfidf: return std::make_unique<TfidfRetriever>(base);
    case RetrieverKind::kRandom: return std::make_unique<RandomRetriever>(base, seed);
    default: throw UsageError(kind_name(kind) + " is not a lexical retriever");
  }
}

namespace {

void check_vocab(const std::string& stem, std::uint64_t vocab_hash) {
  auto m = nn::load_manifest(stem);
  const std::string want = hex64(vocab_hash);
  if (m.value("vocab_hash", "") != want)
    throw DataError("vocabulary mismatch: " + stem + " was trained with vocabulary " +
                    m.value("vocab_hash", std::string("?")) + ", dataset has " + want);
}

}  // namespace

Predictor assemble_variant(const VariantManifest& manifest,
                           const std::vector<CodeCommentPair>& base, std::uint64_t vocab_hash) {
  check_vocab(manifest.generator_path, vocab_hash);
  nn::Seq2SeqModel generator = nn::load_seq2seq(manifest.generator_path);
  std::unique_ptr<Retriever> retriever;
  switch (manifest.retriever_kind) {
    case RetrieverKind::kJointDense:
    case RetrieverKind::kFixedEncoder: {
      if (manifest.retriever_path.empty())
        throw DataError("dense retriever kinds need a retriever checkpoint");
      check_vocab(manifest.retriever_path, vocab_hash);
      retriever = std::make_unique<DenseRetriever>(manifest.retriever_kind,
                                                   nn::load_encoder(manifest.retriever_path), base);
      break;
    }
    default:
      retriever = make_lexical_retriever(manifest.retriever_kind, base, manifest.seed);
  }
  return Predictor(std::move(retriever), std::move(generator), base);
}

}  // namespace racg::baseline
