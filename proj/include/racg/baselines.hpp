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

// Fixed retrievers (BM25, TF-IDF, random, frozen encoder), generator
// training against a fixed retriever, and retriever/generator mixing.

#ifndef RACG_BASELINES_HPP_
#define RACG_BASELINES_HPP_

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "racg/corpus.hpp"
#include "racg/joint.hpp"
#include "racg/neural.hpp"
#include "racg/retriever.hpp"

namespace racg::baseline {

using corpus::CodeCommentPair;
using corpus::TokenSeq;
using retrieval::RetrievedExemplar;

enum class RetrieverKind { kJointDense, kBm25, kTfidf, kRandom, kFixedEncoder };

std::string kind_name(RetrieverKind kind);
RetrieverKind parse_kind(std::string_view name);

// Every kind ranks the base for a query with the same tie and exclusion rules
// as dense retrieval.
class Retriever {
 public:
  virtual ~Retriever() = default;
  virtual RetrieverKind kind() const = 0;
  virtual std::vector<RetrievedExemplar> retrieve(const CodeCommentPair& query, int k,
                                                  std::optional<std::string_view> exclude_id) = 0;
};

class Bm25Index {
 public:
  Bm25Index(const std::vector<TokenSeq>& docs, double k1 = 1.2, double b = 0.75);

  std::size_t doc_count() const { return lengths_.size(); }
  double average_length() const { return avgdl_; }
  double idf(corpus::TokenId term) const;  // floored at 0
  double score(const TokenSeq& query, std::size_t doc) const;
  Eigen::VectorXd score_all(const TokenSeq& query) const;

 private:
  double k1_, b_;
  double avgdl_ = 0.0;
  std::vector<double> lengths_;
  std::vector<std::unordered_map<corpus::TokenId, int>> tf_;
  std::unordered_map<corpus::TokenId, int> df_;
};

class Bm25Retriever : public Retriever {
 public:
  explicit Bm25Retriever(const std::vector<CodeCommentPair>& base);
  RetrieverKind kind() const override { return RetrieverKind::kBm25; }
  std::vector<RetrievedExemplar> retrieve(const CodeCommentPair& query, int k,
                                          std::optional<std::string_view> exclude_id) override;
  const Bm25Index& index() const { return index_; }

 private:
  std::vector<std::string> ids_;
  Bm25Index index_;
};

// Cosine over raw-count x log(N/df) vectors.
class TfidfRetriever : public Retriever {
 public:
  explicit TfidfRetriever(const std::vector<CodeCommentPair>& base);
  RetrieverKind kind() const override { return RetrieverKind::kTfidf; }
  std::vector<RetrievedExemplar> retrieve(const CodeCommentPair& query, int k,
                                          std::optional<std::string_view> exclude_id) override;
  Eigen::VectorXd score_all(const TokenSeq& query) const;

 private:
  using SparseVec = std::unordered_map<corpus::TokenId, double>;
  SparseVec weigh(const TokenSeq& tokens) const;
  std::vector<std::string> ids_;
  std::unordered_map<corpus::TokenId, double> idf_;
  std::vector<SparseVec> docs_;
  std::vector<double> norms_;
};

// Uniform sample without replacement. The draw for a query depends only on
// the seed and the query id.
class RandomRetriever : public Retriever {
 public:
  RandomRetriever(const std::vector<CodeCommentPair>& base, std::uint64_t seed);
  RetrieverKind kind() const override { return RetrieverKind::kRandom; }
  std::vector<RetrievedExemplar> retrieve(const CodeCommentPair& query, int k,
                                          std::optional<std::string_view> exclude_id) override;

 private:
  std::vector<std::string> ids_;
  std::uint64_t seed_;
};

// Cosine retrieval with a frozen encoder.
class DenseRetriever : public Retriever {
 public:
  DenseRetriever(RetrieverKind kind, nn::EncoderModel encoder,
                 const std::vector<CodeCommentPair>& base);
  DenseRetriever(RetrieverKind kind, nn::EncoderModel encoder, retrieval::SearchIndex index);
  RetrieverKind kind() const override { return kind_; }
  std::vector<RetrievedExemplar> retrieve(const CodeCommentPair& query, int k,
                                          std::optional<std::string_view> exclude_id) override;
  nn::EncoderModel& encoder() { return encoder_; }
  const retrieval::SearchIndex& index() const { return index_; }

 private:
  RetrieverKind kind_;
  nn::EncoderModel encoder_;
  retrieval::SearchIndex index_;
};

// Encoder view of a plain code-to-comment model: its token table, source
// positions and encoder stack.
nn::EncoderModel encoder_from_seq2seq(const nn::Seq2SeqModel& model, int max_tokens = 256);

// Cross-entropy training of a generator on fixed inputs with the same
// batching, accumulation and early stopping as joint training.
struct FixedInputs {
  std::vector<gen::GenerationInput> train;
  std::vector<TokenSeq> train_targets;
  std::vector<gen::GenerationInput> valid;
  std::vector<std::vector<std::string>> valid_refs;
};
train::TrainResult train_generator(const train::TrainingConfig& config, const FixedInputs& data,
                                   const corpus::Vocabulary& vocab, nn::Seq2SeqModel& generator);

// Plain code-to-comment pre-fine-tuning for the fixed-encoder baseline.
train::TrainResult train_plain_seq2seq(const train::TrainingConfig& config,
                                       const corpus::DatasetSplits& splits,
                                       const corpus::Vocabulary& vocab,
                                       nn::Seq2SeqModel& model);

// Trains the generator to reproduce each sample's comment with the sample
// itself as exemplar, for config.copy_pretrain_epochs epochs without early
// stopping.
train::TrainResult copy_pretrain(const train::TrainingConfig& config,
                                 const corpus::DatasetSplits& splits,
                                 const corpus::Vocabulary& vocab, nn::Seq2SeqModel& generator);

// Generator trained on top-1 exemplars of a fixed retriever, self excluded.
train::TrainResult train_baseline_generator(Retriever& retriever, const train::TrainingConfig& config,
                                            const corpus::DatasetSplits& splits,
                                            const corpus::Vocabulary& vocab,
                                            nn::Seq2SeqModel& generator);

struct VariantManifest {
  RetrieverKind retriever_kind = RetrieverKind::kJointDense;
  std::string retriever_path;  // encoder checkpoint stem for dense kinds
  std::string generator_path;  // generator checkpoint stem
  std::uint64_t seed = 1;      // random retriever seed

  nlohmann::json to_json() const;
  static VariantManifest from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static VariantManifest load(const std::string& path);
};

// Retriever plus generator with the joint predict contract. Never updates
// parameters.
class Predictor {
 public:
  Predictor(std::unique_ptr<Retriever> retriever, nn::Seq2SeqModel generator,
            const std::vector<CodeCommentPair>& base);
  train::Prediction predict(const CodeCommentPair& query, int beam_size,
                            const gen::Budgets& budgets = {}, int max_len = 64);
  Retriever& retriever() { return *retriever_; }
  nn::Seq2SeqModel& generator() { return generator_; }

 private:
  std::unique_ptr<Retriever> retriever_;
  nn::Seq2SeqModel generator_;
  const std::vector<CodeCommentPair>* base_;
};

// Throws DataError when any checkpoint's vocabulary hash differs from
// vocab_hash.
Predictor assemble_variant(const VariantManifest& manifest,
                           const std::vector<CodeCommentPair>& base, std::uint64_t vocab_hash);

std::unique_ptr<Retriever> make_lexical_retriever(RetrieverKind kind,
                                                  const std::vector<CodeCommentPair>& base,
                                                  std::uint64_t seed);

}  // namespace racg::baseline

#endif  // RACG_BASELINES_HPP_
