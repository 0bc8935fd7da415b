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

// Dataset ingestion: record files, identifier splitting, lexing,
// vocabulary, train/test deduplication and the synthetic corpus.

#ifndef RACG_CORPUS_HPP_
#define RACG_CORPUS_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace racg::corpus {

using TokenId = std::int32_t;
using TokenSeq = std::vector<TokenId>;

// Reserved ids occupy the head of every vocabulary.
struct Special {
  static constexpr TokenId kCls = 0;
  static constexpr TokenId kEos = 1;
  static constexpr TokenId kPad = 2;
  static constexpr TokenId kUnk = 3;
  static constexpr TokenId kNewline = 4;
  static constexpr TokenId kHash = 5;
  static constexpr TokenId kCount = 6;
};

struct CodeCommentPair {
  std::string id;
  std::string code_raw;
  std::string comment_raw;
  TokenSeq code_tokens;
  TokenSeq comment_tokens;
};

struct DatasetSplits {
  std::vector<CodeCommentPair> train;
  std::vector<CodeCommentPair> validation;
  std::vector<CodeCommentPair> test;
  // Hidden generation template per sample id. Synthetic corpora only; read
  // by the evaluation harness, never by models.
  std::map<std::string, int> templates;
};

enum class LexMode { kCode, kComment };

class Vocabulary {
 public:
  Vocabulary();

  // Counts lexemes of the given documents. Tokens below min_freq are left
  // out and map to the unknown id.
  static Vocabulary build(const std::vector<std::vector<std::string>>& docs,
                          int min_freq = 1);

  TokenId id(std::string_view token) const;
  const std::string& token(TokenId id) const;
  std::int64_t frequency(TokenId id) const { return freq_.at(id); }
  std::size_t size() const { return tokens_.size(); }

  // Lines of "token<TAB>id<TAB>frequency".
  std::string serialize() const;
  static Vocabulary parse(std::string_view text);
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

  std::uint64_t hash() const;

 private:
  void add(const std::string& token, std::int64_t freq);

  std::vector<std::string> tokens_;
  std::vector<std::int64_t> freq_;
  std::unordered_map<std::string, TokenId> index_;
};

// One record per line: {"id", "code", "comment"}.
std::vector<CodeCommentPair> load_jsonl(const std::string& path);
std::vector<CodeCommentPair> parse_jsonl(std::string_view text);
std::string to_jsonl(const std::vector<CodeCommentPair>& pairs);

// Splits on underscores and camel-case boundaries and lowercases. An
// uppercase run followed by lowercase letters breaks before its last capital.
std::vector<std::string> split_subtokens(std::string_view identifier);

// Whitespace/punctuation lexing. Code identifiers are further split into
// subtokens; everything is lowercased.
std::vector<std::string> lex(std::string_view text, LexMode mode);

TokenSeq tokenize(std::string_view text, const Vocabulary& vocab, LexMode mode);

// Removes test samples whose code token sequence also occurs in train.
DatasetSplits dedup_test_against_train(const DatasetSplits& splits);

struct Corpus {
  DatasetSplits splits;
  Vocabulary vocab;
  std::size_t dropped_empty = 0;
  std::size_t dropped_duplicates = 0;
};

// Builds the vocabulary over the training split, tokenizes every split,
// drops samples whose code or comment lexes to nothing, then dedups test.
Corpus prepare(DatasetSplits raw, int min_freq = 1);

// Re-tokenizes raw splits with an existing vocabulary (no dedup).
void retokenize(DatasetSplits& splits, const Vocabulary& vocab);

// Samples are drawn from num_templates code templates with randomized
// identifier slots. Templates are split into groups that share a function
// name, a loop variable and a comment-only phrase; every code snippet also
// carries two helper lines with the signature words of two other templates.
// Splits are 6:1:1 per template.
DatasetSplits generate_synthetic_corpus(int num_templates,
                                        int samples_per_template,
                                        std::uint64_t seed);

// Prepared-dataset directory: {train,valid,test}.jsonl, vocab.tsv and, for
// synthetic corpora, templates.tsv.
void save_corpus(const Corpus& corpus, const std::string& dir);
Corpus load_corpus(const std::string& dir);

std::string templates_to_tsv(const std::map<std::string, int>& templates);
std::map<std::string, int> templates_from_tsv(std::string_view text);

// Token ids back to a space-joined string, stopping at the end marker.
std::string detokenize(const TokenSeq& tokens, const Vocabulary& vocab);

}  // namespace racg::corpus

#endif  // RACG_CORPUS_HPP_
