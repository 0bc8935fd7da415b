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

// Dense exemplar retrieval over a matrix of unit-normalized code embeddings.

#ifndef RACG_RETRIEVER_HPP_
#define RACG_RETRIEVER_HPP_

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "racg/corpus.hpp"
#include "racg/neural.hpp"

namespace racg::retrieval {

using corpus::CodeCommentPair;
using nn::Matrix;
using nn::RowVector;

// v / ||v||. Throws NumericError for an all-zero vector.
RowVector normalize(const RowVector& v);

struct RetrievedExemplar {
  int row = -1;
  std::string id;
  double index_score = 0.0;
  double live_score = std::numeric_limits<double>::quiet_NaN();
};

class SearchIndex {
 public:
  SearchIndex() = default;
  SearchIndex(Matrix rows, std::vector<std::string> ids, std::int64_t step);

  int size() const { return static_cast<int>(ids_.size()); }
  int dim() const { return static_cast<int>(rows_.cols()); }
  const Matrix& matrix() const { return rows_; }
  const std::string& id(int row) const { return ids_.at(row); }
  const std::vector<std::string>& ids() const { return ids_; }
  // Row of a sample id, or -1.
  int row_of(std::string_view id) const;
  std::int64_t stamp(int row) const { return stamps_.at(row); }

  // Replaces a row with normalize(v).
  void set_row(int row, const RowVector& v, std::int64_t step);

  // Fingerprint of the encoder the rows were computed with.
  std::uint64_t encoder_hash() const { return encoder_hash_; }
  void set_encoder_hash(std::uint64_t h) { encoder_hash_ = h; }

  std::string serialize() const;
  static SearchIndex deserialize(std::string_view bytes);
  void save(const std::string& path) const;
  static SearchIndex load(const std::string& path);

 private:
  Matrix rows_;
  std::vector<std::string> ids_;
  std::vector<std::int64_t> stamps_;
  std::unordered_map<std::string, int> by_id_;
  std::uint64_t encoder_hash_ = 0;
};

// Embeds the (budget-truncated) code of every base sample in evaluation mode.
SearchIndex build_index(nn::EncoderModel& encoder, const std::vector<CodeCommentPair>& base,
                        std::int64_t step = 0);

// Dot product of every row with a unit query.
Eigen::VectorXd score_all(const SearchIndex& index, const RowVector& query);

// Highest-scoring rows, ties to the lower row. Returns min(k, available).
std::vector<RetrievedExemplar> retrieve_topk(const SearchIndex& index, const RowVector& query,
                                             int k,
                                             std::optional<std::string_view> exclude_id = {});

// Same selection rule over an arbitrary score vector.
std::vector<RetrievedExemplar> topk_from_scores(const Eigen::VectorXd& scores,
                                                const std::vector<std::string>& ids, int k,
                                                std::optional<std::string_view> exclude_id);

// Re-embeds the named rows. base must be the sequence the index was built over.
void refresh_rows(SearchIndex& index, nn::EncoderModel& encoder,
                  const std::vector<CodeCommentPair>& base, const std::vector<std::string>& ids,
                  std::int64_t step);
void refresh_full(SearchIndex& index, nn::EncoderModel& encoder,
                  const std::vector<CodeCommentPair>& base, std::int64_t step);

}  // namespace racg::retrieval

#endif  // RACG_RETRIEVER_HPP_
