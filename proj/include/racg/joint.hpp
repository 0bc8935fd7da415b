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

// Joint retriever/generator training: the softmax-weighted top-k loss, the
// epoch loop with index refresh and early stopping, and prediction.

#ifndef RACG_JOINT_HPP_
#define RACG_JOINT_HPP_

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "racg/corpus.hpp"
#include "racg/generator.hpp"
#include "racg/neural.hpp"
#include "racg/retriever.hpp"

namespace racg::train {

using corpus::CodeCommentPair;

struct JointLossBreakdown {
  std::vector<std::string> exemplar_ids;
  std::vector<double> index_scores;
  std::vector<double> live_scores;
  std::vector<double> weights;
  std::vector<double> per_exemplar_losses;
  double total = 0.0;
};

// Max-shifted softmax.
std::vector<double> softmax(std::span<const double> scores);
// Weights and total from live scores and per-exemplar losses.
JointLossBreakdown combine(std::span<const double> live_scores, std::span<const double> losses);
// d total / d live_score_j = weight_j (loss_j - total).
std::vector<double> loss_gradient_wrt_scores(const JointLossBreakdown& b);
double weight_entropy(std::span<const double> weights);

// Generation loss of a query given one exemplar, as a 1x1 graph node.
using GenLossFn = std::function<nn::Var(nn::Graph&, const CodeCommentPair& query,
                                        const CodeCommentPair& exemplar)>;
GenLossFn seq2seq_loss(nn::Seq2SeqModel& generator, const gen::Budgets& budgets = {});

struct JointLoss {
  JointLossBreakdown breakdown;
  nn::Var total;  // 1x1
};

// Candidates come from the (possibly stale) index with the sample excluded;
// scores are recomputed with the live encoder on the graph.
JointLoss joint_loss(nn::Graph& g, nn::EncoderModel& retriever, const GenLossFn& loss_fn,
                     const retrieval::SearchIndex& index,
                     const std::vector<CodeCommentPair>& base, const CodeCommentPair& sample,
                     int k);

struct TrainingConfig {
  int k = 4;
  int epochs = 10;
  int patience = 2;
  int batch_size = 8;
  int grad_accum = 4;
  int beam = 10;
  double learning_rate = 3e-4;
  double clip_norm = 1.0;
  bool freeze_generator = false;
  std::uint64_t seed = 1;
  gen::Budgets budgets;
  int max_target = 64;
  // Validation samples decoded per epoch; 0 means all.
  int val_limit = 0;
  // Epochs of copy pre-training (each sample as its own exemplar) applied to
  // a freshly initialized generator before the main run; 0 disables it.
  int copy_pretrain_epochs = 0;

  // Throws UsageError on invalid settings. k >= 2 is required whenever the
  // retriever is trained.
  void validate(bool retriever_trainable = true) const;
  nlohmann::json to_json() const;
  static TrainingConfig from_json(const nlohmann::json& j);
  static TrainingConfig from_json(const nlohmann::json& j, TrainingConfig defaults);
};

class EarlyStopper {
 public:
  explicit EarlyStopper(int patience) : patience_(patience) {}
  // Records one epoch's validation score; true when training should stop.
  bool observe(double score);
  int best_epoch() const { return best_epoch_; }  // 1-based, 0 before any epoch
  double best_score() const { return best_; }
  int epochs_seen() const { return seen_; }

 private:
  int patience_;
  int seen_ = 0;
  int best_epoch_ = 0;
  int stale_ = 0;
  double best_ = 0.0;
};

struct LogRecord {
  std::int64_t step = 0;
  double loss = 0.0;
  double weight_entropy = 0.0;
  std::optional<double> val_bleu;
  int epoch = 0;
  nlohmann::json to_json() const;
};
std::string log_to_jsonl(const std::vector<LogRecord>& log);

struct TrainResult {
  std::vector<LogRecord> log;
  std::vector<double> epoch_bleu;
  int best_epoch = 0;
  double best_bleu = 0.0;
  retrieval::SearchIndex index;  // matches the returned retriever
};

// Trains both models in place and leaves them at the best validation epoch.
TrainResult train(const TrainingConfig& config, const corpus::DatasetSplits& splits,
                  const corpus::Vocabulary& vocab, nn::EncoderModel& retriever,
                  nn::Seq2SeqModel& generator);

struct Prediction {
  corpus::TokenSeq tokens;
  retrieval::RetrievedExemplar exemplar;
};

// Top-1 retrieval (no exclusion) followed by beam search.
Prediction predict(nn::EncoderModel& retriever, nn::Seq2SeqModel& generator,
                   const retrieval::SearchIndex& index, const std::vector<CodeCommentPair>& base,
                   const CodeCommentPair& query, int beam_size,
                   const gen::Budgets& budgets = {}, int max_len = 64);

// Metric-ready words of one side of a pair.
std::vector<std::string> reference_words(const CodeCommentPair& sample);
std::vector<std::string> prediction_words(const corpus::TokenSeq& tokens,
                                          const corpus::Vocabulary& vocab);

}  // namespace racg::train

#endif  // RACG_JOINT_HPP_
