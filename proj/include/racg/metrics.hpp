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

// Text generation metrics over whitespace-tokenized, single-reference pairs.
// Scores are on a 0-100 scale except CIDEr.

#ifndef RACG_METRICS_HPP_
#define RACG_METRICS_HPP_

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace racg::metrics {

using Words = std::vector<std::string>;

struct EvalPair {
  Words prediction;
  Words reference;
};

// Lowercases, strips one trailing period and splits on whitespace.
Words preprocess(std::string_view text);

// BLEU-4 with pooled n-gram statistics and a corpus brevity penalty.
double corpus_bleu(const std::vector<EvalPair>& pairs);
// BLEU-4 of one pair; n >= 2 precisions use add-one smoothing.
double sentence_bleu(const EvalPair& pair);
// LCS F-measure.
double rouge_l(const EvalPair& pair, double beta = 1.0);

std::string porter_stem(std::string_view word);
// Unigram alignment by exact then stemmed match; fewest chunks among
// maximum matchings; Fmean = 10PR/(R+9P), penalty 0.5 (chunks/matches)^3.
double meteor(const EvalPair& pair);

// Per-pair CIDEr (n = 1..4, IDF over the references). Needs >= 2 pairs.
std::vector<double> cider_per_pair(const std::vector<EvalPair>& pairs);
double cider(const std::vector<EvalPair>& pairs);

// Two-sided p-value. Zero differences are dropped, ties get average ranks.
// Small samples without ties use the exact null distribution, otherwise the
// normal approximation with tie and continuity corrections.
double wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b);
// Largest sample size evaluated exactly.
inline constexpr int kWilcoxonExactMax = 25;

struct MetricReport {
  double corpus_bleu = 0.0;
  double sentence_bleu = 0.0;
  double rouge_l = 0.0;
  double meteor = 0.0;
  double cider = 0.0;
  std::vector<double> per_sample_bleu;
  std::vector<double> per_sample_rouge_l;
  std::vector<double> per_sample_meteor;
  std::vector<double> per_sample_cider;
};

MetricReport evaluate(const std::vector<EvalPair>& pairs);

// Smoothing, beta, preprocessing and METEOR stages.
nlohmann::json metric_config_header();
nlohmann::json report_to_json(const MetricReport& r, const std::vector<std::string>& ids);

}  // namespace racg::metrics

#endif  // RACG_METRICS_HPP_
