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

// Exemplar-conditioned generation: input assembly, loss and beam search.

#ifndef RACG_GENERATOR_HPP_
#define RACG_GENERATOR_HPP_

#include <map>
#include <string>
#include <vector>

#include "racg/corpus.hpp"
#include "racg/neural.hpp"

namespace racg::gen {

using corpus::CodeCommentPair;
using corpus::TokenId;
using corpus::TokenSeq;

struct Budgets {
  int code = 256;
  int comment = 64;
  int total = 512;
};

// query code, NL, HASH, exemplar comment, NL, exemplar code.
struct GenerationInput {
  TokenSeq tokens;
  std::string source_id;
  std::string exemplar_id;
  int query_len = 0;
  int comment_len = 0;
  int exemplar_code_len = 0;
};

GenerationInput build_input(const CodeCommentPair& query, const CodeCommentPair& exemplar,
                            const Budgets& budgets = {});

// Exemplar-free input ([CLS] then code) for plain code-to-comment training.
GenerationInput build_plain_input(const CodeCommentPair& query, const Budgets& budgets = {});

// Splits a built input back into its three segments.
struct Segments {
  TokenSeq query_code, exemplar_comment, exemplar_code;
};
Segments split_segments(const TokenSeq& tokens);

// Comment truncated to max_target - 1 tokens followed by the end marker.
TokenSeq make_target(const TokenSeq& comment, int max_target = 64);

// Summed token cross-entropy, 1x1.
nn::Var generation_loss(nn::Graph& g, nn::Seq2SeqModel& model, const GenerationInput& input,
                        const TokenSeq& target);

// Next-token distributions for one decoding problem.
class NextTokenModel {
 public:
  virtual ~NextTokenModel() = default;
  virtual int vocab_size() const = 0;
  virtual TokenId eos() const = 0;
  // Log-probabilities of every token following prefix (generated tokens only).
  virtual nn::RowVector next(const TokenSeq& prefix) = 0;
};

// Wraps a seq2seq model and a fixed input; the encoder runs once.
class Seq2SeqNextToken : public NextTokenModel {
 public:
  Seq2SeqNextToken(nn::Seq2SeqModel& model, const GenerationInput& input);
  int vocab_size() const override { return model_.vocab_size(); }
  TokenId eos() const override { return model_.config().eos_id; }
  nn::RowVector next(const TokenSeq& prefix) override;

 private:
  nn::Seq2SeqModel& model_;
  nn::IncrementalDecoder decoder_;
  // Decoder states of recently extended prefixes.
  std::map<TokenSeq, nn::IncrementalDecoder::State> states_;
};

struct BeamResult {
  TokenSeq tokens;  // end marker stripped
  double log_prob = 0.0;
  int length = 0;  // scored token count, end marker included
  double score() const { return length > 0 ? log_prob / length : 0.0; }
};

// Length-normalized beam search over nested slots. Slot j takes the best
// unclaimed extension of the hypotheses held by slots 0..j, so the slots of a
// smaller beam are always a prefix of those of a larger one. Extensions that
// emit the end marker are finished and leave their slot empty for one step.
// Decoding runs until every slot is empty, max_len is reached (remaining
// hypotheses are force-finished) or no live hypothesis can still beat the
// best finished score. Equal log-probabilities prefer earlier slots and lower
// token ids, which makes beam_size 1 identical to greedy decoding.
BeamResult beam_search(NextTokenModel& model, int beam_size, int max_len);
BeamResult greedy_search(NextTokenModel& model, int max_len);

TokenSeq beam_decode(nn::Seq2SeqModel& model, const GenerationInput& input, int beam_size,
                     int max_len = 64);

}  // namespace racg::gen

#endif  // RACG_GENERATOR_HPP_
