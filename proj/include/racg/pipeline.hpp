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

// End-to-end runs: experiment configuration, training into a checkpoint
// directory, and loading a trained system for prediction and evaluation.

#ifndef RACG_PIPELINE_HPP_
#define RACG_PIPELINE_HPP_

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "racg/baselines.hpp"
#include "racg/corpus.hpp"
#include "racg/joint.hpp"
#include "racg/metrics.hpp"

namespace racg::pipeline {

enum class Mode { kJoint, kRafBm25, kRafFixedEncoder };
std::string mode_name(Mode m);
Mode parse_mode(const std::string& name);

struct ExperimentConfig {
  Mode mode = Mode::kJoint;
  std::string data_dir;
  train::TrainingConfig training;
  nn::TransformerConfig model;  // vocab_size is taken from the dataset
  // Optional checkpoint directories to warm-start from.
  std::string generator_init;
  std::string retriever_init;

  nlohmann::json to_json() const;
  // Missing keys keep the values of defaults.
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig from_json(const nlohmann::json& j, ExperimentConfig defaults);
};

struct TrainSummary {
  int best_epoch = 0;
  double best_bleu = 0.0;
  std::vector<double> epoch_bleu;
  std::string generator_hash_before, generator_hash_after;
  nlohmann::json to_json() const;
};

// Trains per config.mode and writes the checkpoint directory atomically:
// config.json, train_log.jsonl, best_epoch.json, vocab.tsv, base.jsonl,
// variant.json, generator.{bin,json} and, for dense retrievers,
// retriever.{bin,json} and index.bin.
TrainSummary train_to_dir(const corpus::Corpus& data, const ExperimentConfig& config,
                          const std::string& out_dir);

// A trained retriever and generator over their training base.
class System {
 public:
  // path is a checkpoint directory or a variant manifest file.
  static std::unique_ptr<System> open(const std::string& path);

  const corpus::Vocabulary& vocab() const { return vocab_; }
  const std::vector<corpus::CodeCommentPair>& base() const { return *base_; }
  const baseline::VariantManifest& manifest() const { return manifest_; }
  const std::string& name() const { return name_; }

  train::Prediction predict(const corpus::CodeCommentPair& query, int beam_size);
  train::Prediction predict_code(const std::string& code, int beam_size);

  struct EvalOutput {
    nlohmann::json report;
    std::string predictions_jsonl;
  };
  // Decodes samples (raw text, re-tokenized with this system's vocabulary)
  // and scores them. templates enables the same-template diagnostic.
  EvalOutput evaluate(const std::vector<corpus::CodeCommentPair>& samples, int beam_size,
                      const std::map<std::string, int>* templates = nullptr);

 private:
  System() = default;
  std::string name_;
  corpus::Vocabulary vocab_;
  std::shared_ptr<std::vector<corpus::CodeCommentPair>> base_;
  baseline::VariantManifest manifest_;
  std::unique_ptr<baseline::Predictor> predictor_;
  gen::Budgets budgets_;
  int max_len_ = 64;
};

// Adds "comparisons" with paired Wilcoxon p-values per metric against each
// other report (matched by sample id).
void add_comparisons(nlohmann::json& report, const std::vector<nlohmann::json>& others,
                     const std::vector<std::string>& names);

}  // namespace racg::pipeline

#endif  // RACG_PIPELINE_HPP_
