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

#include "racg/retriever.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "racg/common.hpp"

namespace racg::retrieval {

RowVector normalize(const RowVector& v) {
  const double n = v.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw NumericError("cannot normalize a degenerate embedding");
  return v / n;
}

SearchIndex::SearchIndex(Matrix rows, std::vector<std::string> ids, std::int64_t step)
    : rows_(std::move(rows)), ids_(std::move(ids)),
      stamps_(ids_.size(), step) {
  if (static_cast<std::size_t>(rows_.rows()) != ids_.size())
    throw UsageError("index rows and ids differ in length");
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!by_id_.emplace(ids_[i], static_cast<int>(i)).second)
      throw DataError("duplicate id in index: " + ids_[i]);
  }
}

int SearchIndex::row_of(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  return it == by_id_.end() ? -1 : it->second;
}

void SearchIndex::set_row(int row, const RowVector& v, std::int64_t step) {
  if (v.size() != rows_.cols()) throw UsageError("embedding dimension mismatch");
  rows_.row(row) = normalize(v);
  stamps_.at(row) = step;
}

namespace {

constexpr char kIndexMagic[8] = {'R', 'A', 'C', 'G', 'I', 'D', 'X', '1'};

template <typename T>
void put(std::string& out, const T& v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::string_view bytes, std::size_t& pos) {
  if (pos + sizeof(T) > bytes.size()) throw DataError("truncated index snapshot");
  T v;
  std::memcpy(&v, bytes.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

std::string SearchIndex::serialize() const {
  std::string out(kIndexMagic, sizeof(kIndexMagic));
  put<std::uint64_t>(out, ids_.size());
  put<std::uint64_t>(out, static_cast<std::uint64_t>(rows_.cols()));
  put<std::uint64_t>(out, encoder_hash_);
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(ids_[i].size()));
    out += ids_[i];
    put<std::int64_t>(out, stamps_[i]);
  }
  out.append(reinterpret_cast<const char*>(rows_.data()),
             sizeof(double) * static_cast<std::size_t>(rows_.size()));
  return out;
}

SearchIndex SearchIndex::deserialize(std::string_view bytes) {
  if (bytes.size() < sizeof(kIndexMagic) ||
      std::memcmp(bytes.data(), kIndexMagic, sizeof(kIndexMagic)) != 0)
    throw DataError("not an index snapshot");
  std::size_t pos = sizeof(kIndexMagic);
  auto n = take<std::uint64_t>(bytes, pos);
  auto d = take<std::uint64_t>(bytes, pos);
  auto h = take<std::uint64_t>(bytes, pos);
  std::vector<std::string> ids;
  std::vector<std::int64_t> stamps;
  for (std::uint64_t i = 0; i < n; ++i) {
    auto len = take<std::uint32_t>(bytes, pos);
    if (pos + len > bytes.size()) throw DataError("truncated index snapshot");
    ids.emplace_back(bytes.substr(pos, len));
    pos += len;
    stamps.push_back(take<std::int64_t>(bytes, pos));
  }
  Matrix rows(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  const std::size_t nbytes = sizeof(double) * n * d;
  if (pos + nbytes != bytes.size()) throw DataError("index snapshot has wrong payload size");
  std::memcpy(rows.data(), bytes.data() + pos, nbytes);
  SearchIndex index(std::move(rows), std::move(ids), 0);
  index.stamps_ = std::move(stamps);
  index.encoder_hash_ = h;
  return index;
}

void SearchIndex::save(const std::string& path) const { write_file_atomic(path, serialize()); }

SearchIndex SearchIndex::load(const std::string& path) { return deserialize(read_file(path)); }

namespace {

RowVector embed(nn::EncoderModel& encoder, const CodeCommentPair& sample) {
  try {
    return encoder.encode_value(sample.code_tokens);
  } catch (const Error& e) {
    throw DataError("cannot embed sample " + sample.id + ": " + e.what());
  }
}

}  // namespace

SearchIndex build_index(nn::EncoderModel& encoder, const std::vector<CodeCommentPair>& base,
                        std::int64_t step) {
  if (base.empty()) throw DataError("cannot build an index over an empty base");
  Matrix rows(static_cast<Eigen::Index>(base.size()), encoder.hidden_size());
  std::vector<std::string> ids;
  ids.reserve(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    rows.row(static_cast<Eigen::Index>(i)) = normalize(embed(encoder, base[i]));
    ids.push_back(base[i].id);
  }
  SearchIndex index(std::move(rows), std::move(ids), step);
  index.set_encoder_hash(encoder.params().hash());
  return index;
}

Eigen::VectorXd score_all(const SearchIndex& index, const RowVector& query) {
  if (query.size() != index.dim())
    throw UsageError("query dimension " + std::to_string(query.size()) +
                     " does not match index dimension " + std::to_string(index.dim()));
  return index.matrix() * query.transpose();
}

std::vector<RetrievedExemplar> topk_from_scores(const Eigen::VectorXd& scores,
                                                const std::vector<std::string>& ids, int k,
                                                std::optional<std::string_view> exclude_id) {
  if (k < 1) throw UsageError("k must be at least 1");
  std::vector<int> rows;
  rows.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (exclude_id && ids[i] == *exclude_id) continue;
    rows.push_back(static_cast<int>(i));
  }
  if (rows.empty()) throw DataError("retrieval base is empty after exclusion");
  const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), rows.size());
  auto better = [&](int a, int b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  std::partial_sort(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(take), rows.end(),
                    better);
  std::vector<RetrievedExemplar> out(take);
  for (std::size_t i = 0; i < take; ++i) {
    out[i].row = rows[i];
    out[i].id = ids[static_cast<std::size_t>(rows[i])];
    out[i].index_score = scores[rows[i]];
  }
  return out;
}

std::vector<RetrievedExemplar> retrieve_topk(const SearchIndex& index, const RowVector& query,
                                             int k, std::optional<std::string_view> exclude_id) {
  return topk_from_scores(score_all(index, query), index.ids(), k, exclude_id);
}

void refresh_rows(SearchIndex& index, nn::EncoderModel& encoder,
                  const std::vector<CodeCommentPair>& base, const std::vector<std::string>& ids,
                  std::int64_t step) {
  std::vector<int> rows;
  for (const auto& id : ids) {
    int r = index.row_of(id);
    if (r < 0) throw DataError("refresh of unknown id: " + id);
    if (static_cast<std::size_t>(r) >= base.size() || base[static_cast<std::size_t>(r)].id != id)
      throw UsageError("base does not match index order at id " + id);
    rows.push_back(r);
  }
  for (int r : rows) index.set_row(r, embed(encoder, base[static_cast<std::size_t>(r)]), step);
  if (!rows.empty()) index.set_encoder_hash(encoder.params().hash());
}

void refresh_full(SearchIndex& index, nn::EncoderModel& encoder,
                  const std::vector<CodeCommentPair>& base, std::int64_t step) {
  if (base.size() != static_cast<std::size_t>(index.size()))
    throw UsageError("base does not match index size");
  for (std::size_t i = 0; i < base.size(); ++i) {
    if (base[i].id != index.id(static_cast<int>(i)))
      throw UsageError("base does not match index order at id " + base[i].id);
    index.set_row(static_cast<int>(i), embed(encoder, base[i]), step);
  }
  index.set_encoder_hash(encoder.params().hash());
}

}  // namespace racg::retrieval
