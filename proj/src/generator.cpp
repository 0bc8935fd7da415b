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

#include "racg/generator.hpp"

#include <algorithm>
#include <limits>

#include "racg/common.hpp"

namespace racg::gen {

using corpus::Special;

namespace {

void append_prefix(TokenSeq& out, const TokenSeq& src, std::size_t limit) {
  out.insert(out.end(), src.begin(),
             src.begin() + static_cast<std::ptrdiff_t>(std::min(limit, src.size())));
}

}  // namespace

GenerationInput build_input(const CodeCommentPair& query, const CodeCommentPair& exemplar,
                            const Budgets& budgets) {
  GenerationInput in;
  in.source_id = query.id;
  in.exemplar_id = exemplar.id;
  const std::size_t code_budget = static_cast<std::size_t>(std::max(0, budgets.code));
  const std::size_t comment_budget = static_cast<std::size_t>(std::max(0, budgets.comment));
  in.query_len = static_cast<int>(std::min(code_budget, query.code_tokens.size()));
  in.comment_len = static_cast<int>(std::min(comment_budget, exemplar.comment_tokens.size()));
  const int fixed = in.query_len + 3 + in.comment_len;
  const int room = std::max(0, budgets.total - fixed);
  const int ex_code = static_cast<int>(std::min(code_budget, exemplar.code_tokens.size()));
  in.exemplar_code_len = std::min(ex_code, room);

  in.tokens.reserve(static_cast<std::size_t>(fixed + in.exemplar_code_len));
  append_prefix(in.tokens, query.code_tokens, static_cast<std::size_t>(in.query_len));
  in.tokens.push_back(Special::kNewline);
  in.tokens.push_back(Special::kHash);
  append_prefix(in.tokens, exemplar.comment_tokens, static_cast<std::size_t>(in.comment_len));
  in.tokens.push_back(Special::kNewline);
  append_prefix(in.tokens, exemplar.code_tokens, static_cast<std::size_t>(in.exemplar_code_len));
  if (static_cast<int>(in.tokens.size()) > budgets.total)
    in.tokens.resize(static_cast<std::size_t>(std::max(0, budgets.total)));
  return in;
}

GenerationInput build_plain_input(const CodeCommentPair& query, const Budgets& budgets) {
  GenerationInput in;
  in.source_id = query.id;
  in.tokens.push_back(Special::kCls);
  append_prefix(in.tokens, query.code_tokens,
                static_cast<std::size_t>(std::max(0, std::min(budgets.code, budgets.total - 1))));
  in.query_len = static_cast<int>(in.tokens.size()) - 1;
  return in;
}

Segments split_segments(const TokenSeq& tokens) {
  Segments s;
  auto nl = std::find(tokens.begin(), tokens.end(), Special::kNewline);
  if (nl == tokens.end() || nl + 1 == tokens.end() || *(nl + 1) != Special::kHash)
    throw DataError("generation input lacks the exemplar marker");
  s.query_code.assign(tokens.begin(), nl);
  auto start = nl + 2;
  auto nl2 = std::find(start, tokens.end(), Special::kNewline);
  s.exemplar_comment.assign(start, nl2);
  if (nl2 != tokens.end()) s.exemplar_code.assign(nl2 + 1, tokens.end());
  return s;
}

TokenSeq make_target(const TokenSeq& comment, int max_target) {
  TokenSeq t;
  append_prefix(t, comment, static_cast<std::size_t>(std::max(0, max_target - 1)));
  t.push_back(Special::kEos);
  return t;
}

nn::Var generation_loss(nn::Graph& g, nn::Seq2SeqModel& model, const GenerationInput& input,
                        const TokenSeq& target) {
  if (target.empty()) throw DataError("generation target is empty");
  if (target.back() != model.config().eos_id)
    throw DataError("generation target must end with the end marker");
  return nn::scale(nn::sum(model.token_logprobs(g, input.tokens, target)), -1.0);
}

namespace {

nn::Matrix encode_memory(nn::Seq2SeqModel& model, const GenerationInput& input) {
  nn::Graph g(false, false);
  return model.encode_source(g, input.tokens).value();
}

}  // namespace

Seq2SeqNextToken::Seq2SeqNextToken(nn::Seq2SeqModel& model, const GenerationInput& input)
    : model_(model), decoder_(model, encode_memory(model, input)) {}

nn::RowVector Seq2SeqNextToken::next(const TokenSeq& prefix) {
  if (prefix.empty()) {
    auto state = decoder_.initial();
    nn::RowVector lp = decoder_.feed(state, model_.config().start_id);
    states_.clear();
    states_.emplace(prefix, std::move(state));
    return lp;
  }
  // Requests arrive one length at a time, so shorter states are finished.
  while (!states_.empty() && states_.begin()->first.size() + 1 < prefix.size())
    states_.erase(states_.begin());
  auto it = states_.find(TokenSeq(prefix.begin(), prefix.end() - 1));
  nn::IncrementalDecoder::State state;
  if (it != states_.end()) {
    state = it->second;
  } else {
    state = decoder_.initial();
    decoder_.feed(state, model_.config().start_id);
    for (std::size_t i = 0; i + 1 < prefix.size(); ++i) decoder_.feed(state, prefix[i]);
  }
  nn::RowVector lp = decoder_.feed(state, prefix.back());
  states_.insert_or_assign(prefix, std::move(state));
  return lp;
}

namespace {

struct Candidate {
  double log_prob;
  int parent;
  TokenId token;
};

bool candidate_before(const Candidate& a, const Candidate& b) {
  if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
  if (a.parent != b.parent) return a.parent < b.parent;
  return a.token < b.token;
}

}  // namespace

BeamResult beam_search(NextTokenModel& model, int beam_size, int max_len) {
  if (beam_size < 1) throw UsageError("beam size must be at least 1");
  if (max_len < 1) throw UsageError("max_len must be at least 1");
  struct Hyp {
    TokenSeq tokens;
    double log_prob = 0.0;
    bool alive = false;
  };
  const TokenId eos = model.eos();
  const auto B = static_cast<std::size_t>(beam_size);
  std::vector<Hyp> slots(B);
  slots[0].alive = true;
  std::vector<BeamResult> finished;
  double best_finished = -std::numeric_limits<double>::infinity();
  bool stopped = false;
  std::vector<std::vector<Candidate>> options(B);
  std::vector<std::size_t> cursor(B);
  for (int step = 0; step < max_len && !stopped; ++step) {
    // Each live slot offers its best extensions; no slot can claim more than B.
    for (std::size_t i = 0; i < B; ++i) {
      options[i].clear();
      cursor[i] = 0;
      if (!slots[i].alive) continue;
      nn::RowVector lp = model.next(slots[i].tokens);
      for (Eigen::Index v = 0; v < lp.size(); ++v)
        options[i].push_back({slots[i].log_prob + lp[v], static_cast<int>(i), static_cast<TokenId>(v)});
      const std::size_t keep = std::min(options[i].size(), B);
      std::partial_sort(options[i].begin(), options[i].begin() + static_cast<std::ptrdiff_t>(keep),
                        options[i].end(), candidate_before);
      options[i].resize(keep);
    }
    std::vector<Hyp> next(B);
    bool any_alive = false;
    for (std::size_t j = 0; j < B; ++j) {
      const Candidate* pick = nullptr;
      for (std::size_t i = 0; i <= j; ++i) {
        if (cursor[i] >= options[i].size()) continue;
        const Candidate& c = options[i][cursor[i]];
        if (pick == nullptr || candidate_before(c, *pick)) pick = &c;
      }
      if (pick == nullptr) continue;
      const auto parent = static_cast<std::size_t>(pick->parent);
      ++cursor[parent];
      if (pick->token == eos) {
        BeamResult r{slots[parent].tokens, pick->log_prob,
                     static_cast<int>(slots[parent].tokens.size()) + 1};
        best_finished = std::max(best_finished, r.score());
        finished.push_back(std::move(r));
      } else {
        next[j].tokens = slots[parent].tokens;
        next[j].tokens.push_back(pick->token);
        next[j].log_prob = pick->log_prob;
        next[j].alive = true;
        any_alive = true;
      }
    }
    slots = std::move(next);
    if (!any_alive) break;
    // A continuation of h scores at most log_prob(h) / max_len.
    double bound = -std::numeric_limits<double>::infinity();
    for (const auto& h : slots)
      if (h.alive) bound = std::max(bound, h.log_prob / static_cast<double>(max_len));
    if (best_finished >= bound) stopped = true;
  }
  if (!stopped) {
    for (auto& h : slots)
      if (h.alive) finished.push_back({h.tokens, h.log_prob, static_cast<int>(h.tokens.size())});
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < finished.size(); ++i)
    if (finished[i].score() > finished[best].score()) best = i;
  return finished[best];
}

BeamResult greedy_search(NextTokenModel& model, int max_len) {
  if (max_len < 1) throw UsageError("max_len must be at least 1");
  BeamResult r;
  for (int step = 0; step < max_len; ++step) {
    nn::RowVector lp = model.next(r.tokens);
    Eigen::Index arg = 0;
    for (Eigen::Index v = 1; v < lp.size(); ++v)
      if (lp[v] > lp[arg]) arg = v;
    r.log_prob += lp[arg];
    if (static_cast<TokenId>(arg) == model.eos()) {
      r.length = static_cast<int>(r.tokens.size()) + 1;
      return r;
    }
    r.tokens.push_back(static_cast<TokenId>(arg));
  }
  r.length = static_cast<int>(r.tokens.size());
  return r;
}

TokenSeq beam_decode(nn::Seq2SeqModel& model, const GenerationInput& input, int beam_size,
                     int max_len) {
  Seq2SeqNextToken next(model, input);
  max_len = std::min(max_len, model.config().max_target);
  return beam_search(next, beam_size, max_len).tokens;
}

}  // namespace racg::gen
