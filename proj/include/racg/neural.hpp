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

// Toy transformer models sized for CPU training: a [CLS]-pooled encoder
// used by the dense retriever, and an encoder-decoder generator whose output
// projection is tied to its shared token embedding.

#ifndef RACG_NEURAL_HPP_
#define RACG_NEURAL_HPP_

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "racg/autodiff.hpp"
#include "racg/corpus.hpp"

namespace racg::nn {

using corpus::TokenId;
using corpus::TokenSeq;

// Named tensors in insertion order with stable addresses.
class ParamSet {
 public:
  ParamSet() = default;
  ParamSet(const ParamSet& other);
  ParamSet& operator=(const ParamSet& other);
  ParamSet(ParamSet&&) = default;
  ParamSet& operator=(ParamSet&&) = default;

  Parameter& add(const std::string& name, Matrix value);
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  std::size_t count() const { return params_.size(); }
  std::size_t scalar_count() const;

  void zero_grad();
  void set_frozen(bool frozen);
  // Copies values from a set with identical names and shapes.
  void copy_values_from(const ParamSet& other);

  // Fingerprint over names, shapes and raw bytes.
  std::uint64_t hash() const;

  std::string serialize() const;
  void deserialize(std::string_view bytes);  // shapes must match

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::map<std::string, std::size_t> index_;
};

struct TransformerConfig {
  int vocab_size = 0;
  int hidden = 64;
  int layers = 2;
  int heads = 4;
  int ff = 128;
  double dropout = 0.1;

  nlohmann::json to_json() const;
  static TransformerConfig from_json(const nlohmann::json& j);
};

// Deterministic parameter initialization source.
class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : gen_(seed) {}
  Matrix normal(Eigen::Index rows, Eigen::Index cols, double stddev);

 private:
  std::mt19937_64 gen_;
};

struct EncoderConfig {
  TransformerConfig net;
  int max_tokens = 256;  // code budget; [CLS] is added on top

  nlohmann::json to_json() const;
  static EncoderConfig from_json(const nlohmann::json& j);
};

class EncoderModel {
 public:
  EncoderModel() = default;
  EncoderModel(const EncoderConfig& config, std::uint64_t seed);

  const EncoderConfig& config() const { return config_; }
  int hidden_size() const { return config_.net.hidden; }

  // Contextual embedding at the prepended [CLS] position, 1 x hidden.
  // Inputs longer than max_tokens are truncated from the right.
  Var encode(Graph& g, std::span<const TokenId> tokens);
  // Evaluation-mode forward without a tape.
  RowVector encode_value(std::span<const TokenId> tokens);

  // When disabled, dropout is skipped even on training graphs.
  void set_dropout_enabled(bool on) { dropout_enabled_ = on; }

  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

 private:
  EncoderConfig config_;
  ParamSet params_;
  bool dropout_enabled_ = true;
};

struct Seq2SeqConfig {
  TransformerConfig net;
  int max_source = 512;
  int max_target = 64;
  TokenId start_id = corpus::Special::kPad;
  TokenId eos_id = corpus::Special::kEos;

  nlohmann::json to_json() const;
  static Seq2SeqConfig from_json(const nlohmann::json& j);
};

class Seq2SeqModel {
 public:
  Seq2SeqModel() = default;
  Seq2SeqModel(const Seq2SeqConfig& config, std::uint64_t seed);

  const Seq2SeqConfig& config() const { return config_; }
  int vocab_size() const { return config_.net.vocab_size; }

  // Encoder states for a source sequence, Ls x hidden.
  Var encode_source(Graph& g, std::span<const TokenId> source);
  // Final decoder states, Lt x hidden.
  Var decode_hidden(Graph& g, Var memory, std::span<const TokenId> decoder_input);
  // Next-token logits for every decoder input position, Lt x vocab.
  Var decode_logits(Graph& g, Var memory, std::span<const TokenId> decoder_input);
  // Evaluation-mode log-distribution of the token following decoder_input.
  RowVector next_logprobs(const Matrix& memory, std::span<const TokenId> decoder_input);

  // log p(target_t | target_<t, source) per position under teacher forcing.
  // target must be non-empty.
  Var token_logprobs(Graph& g, std::span<const TokenId> source,
                     std::span<const TokenId> target);

  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  void set_dropout_enabled(bool on) { dropout_enabled_ = on; }

 private:
  TransformerConfig effective() const;
  Seq2SeqConfig config_;
  ParamSet params_;
  bool dropout_enabled_ = true;
};

// Evaluation-mode decoding with cached keys and values: the cross-attention
// projections of one source are computed once, and each State carries the
// self-attention rows of the decoder inputs fed so far.
class IncrementalDecoder {
 public:
  struct State {
    std::vector<Matrix> keys, values;  // per layer, one row per input
    int length = 0;
  };

  IncrementalDecoder(const Seq2SeqModel& model, const Matrix& memory);

  State initial() const;
  // Appends one decoder input token and returns the log-distribution of the
  // token after it. Matches next_logprobs on the same inputs.
  RowVector feed(State& state, TokenId token) const;

 private:
  const Seq2SeqModel* model_;
  std::vector<Matrix> cross_k_, cross_v_;
};

// Encoder stack shared by both models. Parameter names are prefix-scoped.
void add_encoder_stack(ParamSet& ps, const std::string& prefix,
                       const TransformerConfig& c, Initializer& init);
Var run_encoder_stack(Graph& g, ParamSet& ps, const std::string& prefix,
                      const TransformerConfig& c, Var x);

struct OptimizerConfig {
  enum class Kind { kAdam, kSgd };
  Kind kind = Kind::kAdam;
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int accumulation = 1;
  double clip_norm = 1.0;  // <= 0 disables clipping
};

// Gradient-accumulating optimizer. Every call to step() marks the end of one
// micro-batch; parameters move only on every accumulation-th call, using the
// mean of the accumulated gradients, after which gradient buffers are zeroed.
// Elements whose accumulated gradient is exactly zero are not touched.
class Optimizer {
 public:
  explicit Optimizer(const OptimizerConfig& config) : config_(config) {}

  void attach(ParamSet& params);
  // Adds externally computed gradients, one matrix per attached parameter.
  void add_gradients(std::span<const Matrix> grads);
  // Returns true when an update was applied.
  bool step();
  // Applies a partially accumulated update, if any.
  bool flush();

  std::int64_t updates() const { return updates_; }
  const OptimizerConfig& config() const { return config_; }

 private:
  void apply();

  struct Slot {
    Parameter* param;
    Matrix m, v;
  };
  OptimizerConfig config_;
  std::vector<Slot> slots_;
  int pending_ = 0;
  std::int64_t updates_ = 0;
};

// Checkpoint: <stem>.bin holds the tensors, <stem>.json the manifest.
void save_checkpoint(const std::string& stem, const nlohmann::json& manifest,
                     const ParamSet& params);
nlohmann::json load_manifest(const std::string& stem);
void load_tensors(const std::string& stem, ParamSet& params);

void save_encoder(const std::string& stem, const EncoderModel& m,
                  std::uint64_t vocab_hash);
EncoderModel load_encoder(const std::string& stem);
void save_seq2seq(const std::string& stem, const Seq2SeqModel& m,
                  std::uint64_t vocab_hash);
Seq2SeqModel load_seq2seq(const std::string& stem);

}  // namespace racg::nn

#endif  // RACG_NEURAL_HPP_
