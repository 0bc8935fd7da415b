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

#include "racg/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "racg/common.hpp"

namespace racg::metrics {

Words preprocess(std::string_view text) {
  std::string s(text);
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  std::size_t end = s.find_last_not_of(" \t\r\n");
  if (end != std::string::npos && s[end] == '.') s.erase(end, 1);
  Words out;
  std::istringstream in(s);
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

namespace {

using NgramCounts = std::map<std::vector<std::string>, int>;

NgramCounts ngrams(const Words& w, std::size_t n) {
  NgramCounts out;
  if (w.size() < n) return out;
  for (std::size_t i = 0; i + n <= w.size(); ++i)
    ++out[std::vector<std::string>(w.begin() + static_cast<std::ptrdiff_t>(i),
                                   w.begin() + static_cast<std::ptrdiff_t>(i + n))];
  return out;
}

// Clipped matches and candidate n-gram total.
std::pair<long, long> modified_counts(const Words& pred, const Words& ref, std::size_t n) {
  NgramCounts p = ngrams(pred, n), r = ngrams(ref, n);
  long match = 0, total = 0;
  for (const auto& [g, c] : p) {
    total += c;
    auto it = r.find(g);
    if (it != r.end()) match += std::min(c, it->second);
  }
  return {match, total};
}

double brevity_penalty(double c, double r) {
  if (c <= 0.0) return 0.0;
  return c > r ? 1.0 : std::exp(1.0 - r / c);
}

}  // namespace

double corpus_bleu(const std::vector<EvalPair>& pairs) {
  if (pairs.empty()) throw UsageError("corpus BLEU needs at least one pair");
  long match[4] = {0, 0, 0, 0}, total[4] = {0, 0, 0, 0};
  double c = 0.0, r = 0.0;
  for (const auto& p : pairs) {
    for (std::size_t n = 1; n <= 4; ++n) {
      auto [m, t] = modified_counts(p.prediction, p.reference, n);
      match[n - 1] += m;
      total[n - 1] += t;
    }
    c += static_cast<double>(p.prediction.size());
    r += static_cast<double>(p.reference.size());
  }
  double log_sum = 0.0;
  for (int n = 0; n < 4; ++n) {
    if (match[n] == 0 || total[n] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(match[n]) / static_cast<double>(total[n]));
  }
  return 100.0 * brevity_penalty(c, r) * std::exp(log_sum / 4.0);
}

double sentence_bleu(const EvalPair& pair) {
  if (pair.prediction.empty()) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    auto [m, t] = modified_counts(pair.prediction, pair.reference, n);
    double p;
    if (n == 1) {
      if (m == 0) return 0.0;
      p = static_cast<double>(m) / static_cast<double>(t);
    } else {
      p = static_cast<double>(m + 1) / static_cast<double>(t + 1);
    }
    log_sum += std::log(p);
  }
  return 100.0 *
         brevity_penalty(static_cast<double>(pair.prediction.size()),
                         static_cast<double>(pair.reference.size())) *
         std::exp(log_sum / 4.0);
}

namespace {

std::size_t lcs_length(const Words& a, const Words& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

double rouge_l(const EvalPair& pair, double beta) {
  const std::size_t l = lcs_length(pair.prediction, pair.reference);
  if (l == 0) return 0.0;
  const double p = static_cast<double>(l) / static_cast<double>(pair.prediction.size());
  const double r = static_cast<double>(l) / static_cast<double>(pair.reference.size());
  const double b2 = beta * beta;
  return 100.0 * (1.0 + b2) * p * r / (r + b2 * p);
}

// ---------------------------------------------------------------------------
// Porter stemmer, original 1980 rule set.

namespace {

class Stemmer {
 public:
  explicit Stemmer(std::string_view w) : b_(w) {}

  std::string run() {
    if (b_.size() <= 2) return b_;
    step1a();
    step1b();
    step1c();
    step2();
    step3();
    step4();
    step5();
    return b_;
  }

 private:
  bool cons(std::size_t i) const {
    switch (b_[i]) {
      case 'a': case 'e': case 'i': case 'o': case 'u':
        return false;
      case 'y':
        return i == 0 ? true : !cons(i - 1);
      default:
        return true;
    }
  }

  // Measure of b_[0, len).
  int measure(std::size_t len) const {
    int m = 0;
    std::size_t i = 0;
    while (i < len && cons(i)) ++i;
    while (i < len) {
      while (i < len && !cons(i)) ++i;
      if (i >= len) break;
      while (i < len && cons(i)) ++i;
      ++m;
    }
    return m;
  }

  bool has_vowel(std::size_t len) const {
    for (std::size_t i = 0; i < len; ++i)
      if (!cons(i)) return true;
    return false;
  }

  bool double_cons(std::size_t len) const {
    return len >= 2 && b_[len - 1] == b_[len - 2] && cons(len - 1);
  }

  // consonant-vowel-consonant ending, last not w, x or y.
  bool cvc(std::size_t len) const {
    if (len < 3 || !cons(len - 1) || cons(len - 2) || !cons(len - 3)) return false;
    char c = b_[len - 1];
    return c != 'w' && c != 'x' && c != 'y';
  }

  bool ends(std::string_view s) const {
    return b_.size() >= s.size() && b_.compare(b_.size() - s.size(), s.size(), s) == 0;
  }

  std::size_t stem_len(std::string_view suffix) const { return b_.size() - suffix.size(); }

  void replace(std::string_view suffix, std::string_view with) {
    b_.replace(stem_len(suffix), suffix.size(), with);
  }

  struct Rule {
    const char* suffix;
    const char* replacement;
  };

  // First rule whose suffix matches is applied when the stem measure exceeds
  // min_m; later rules are not tried.
  template <std::size_t N>
  void apply_first(const Rule (&rules)[N], int min_m) {
    for (const Rule& r : rules) {
      if (ends(r.suffix)) {
        if (measure(stem_len(r.suffix)) > min_m) replace(r.suffix, r.replacement);
        return;
      }
    }
  }

  void step1a() {
    if (ends("sses")) replace("sses", "ss");
    else if (ends("ies")) replace("ies", "i");
    else if (ends("ss")) return;
    else if (ends("s")) replace("s", "");
  }

  void step1b() {
    bool extra = false;
    if (ends("eed")) {
      if (measure(stem_len("eed")) > 0) replace("eed", "ee");
      return;
    }
    if (ends("ed") && has_vowel(stem_len("ed"))) {
      replace("ed", "");
      extra = true;
    } else if (ends("ing") && has_vowel(stem_len("ing"))) {
      replace("ing", "");
      extra = true;
    }
    if (!extra) return;
    if (ends("at")) replace("at", "ate");
    else if (ends("bl")) replace("bl", "ble");
    else if (ends("iz")) replace("iz", "ize");
    else if (double_cons(b_.size())) {
      char c = b_.back();
      if (c != 'l' && c != 's' && c != 'z') b_.pop_back();
    } else if (measure(b_.size()) == 1 && cvc(b_.size())) {
      b_ += 'e';
    }
  }

  void step1c() {
    if (ends("y") && has_vowel(stem_len("y"))) b_.back() = 'i';
  }

  void step2() {
    static const Rule rules[] = {
        {"ational", "ate"}, {"tional", "tion"}, {"enci", "ence"},  {"anci", "ance"},
        {"izer", "ize"},    {"abli", "able"},   {"alli", "al"},    {"entli", "ent"},
        {"eli", "e"},       {"ousli", "ous"},   {"ization", "ize"}, {"ation", "ate"},
        {"ator", "ate"},    {"alism", "al"},    {"iveness", "ive"}, {"fulness", "ful"},
        {"ousness", "ous"}, {"aliti", "al"},    {"iviti", "ive"},  {"biliti", "ble"}};
    apply_first(rules, 0);
  }

  void step3() {
    static const Rule rules[] = {{"icate", "ic"}, {"ative", ""}, {"alize", "al"},
                                 {"iciti", "ic"}, {"ical", "ic"}, {"ful", ""},
                                 {"ness", ""}};
    apply_first(rules, 0);
  }

  void step4() {
    static const char* const suffixes[] = {
        "al",  "ance", "ence", "er",  "ic",  "able", "ible", "ant", "ement", "ment",
        "ent", "ion",  "ou",   "ism", "ate", "iti",  "ous",  "ive", "ize"};
    // Longest matching suffix decides.
    const char* best = nullptr;
    for (const char* s : suffixes)
      if (ends(s) && (best == nullptr || std::string_view(s).size() > std::string_view(best).size()))
        best = s;
    if (best == nullptr) return;
    const std::size_t len = stem_len(best);
    if (std::string_view(best) == "ion") {
      if (len == 0 || (b_[len - 1] != 's' && b_[len - 1] != 't')) return;
    }
    if (measure(len) > 1) b_.erase(len);
  }

  void step5() {
    if (ends("e")) {
      const std::size_t len = b_.size() - 1;
      const int m = measure(len);
      if (m > 1 || (m == 1 && !cvc(len))) b_.pop_back();
    }
    if (measure(b_.size()) > 1 && double_cons(b_.size()) && b_.back() == 'l') b_.pop_back();
  }

  std::string b_;
};

}  // namespace

std::string porter_stem(std::string_view word) {
  std::string w(word);
  for (char c : w)
    if (!std::islower(static_cast<unsigned char>(c))) return w;
  return Stemmer(w).run();
}

// ---------------------------------------------------------------------------
// METEOR

namespace {

struct AlignSearch {
  const std::vector<std::vector<int>>* options;  // per prediction word
  std::vector<int> ref_of;                       // -1 when unaligned
  std::vector<bool> ref_used;
  std::vector<int> best_ref_of;
  int target = 0;
  int best_chunks = 0;
  long nodes = 0;
  static constexpr long kNodeBudget = 2000000;

  static int chunks(const std::vector<int>& ref_of) {
    int c = 0;
    int prev_i = -2, prev_j = -2;
    for (int i = 0; i < static_cast<int>(ref_of.size()); ++i) {
      int j = ref_of[static_cast<std::size_t>(i)];
      if (j < 0) continue;
      if (!(i == prev_i + 1 && j == prev_j + 1)) ++c;
      prev_i = i;
      prev_j = j;
    }
    return c;
  }

  void dfs(std::size_t i, int count, int remaining) {
    if (++nodes > kNodeBudget) return;
    if (count + remaining < target) return;
    if (i == ref_of.size()) {
      if (count != target) return;
      int c = chunks(ref_of);
      if (best_ref_of.empty() || c < best_chunks) {
        best_chunks = c;
        best_ref_of = ref_of;
      }
      return;
    }
    const auto& opts = (*options)[i];
    const int rem = remaining - (opts.empty() ? 0 : 1);
    if (ref_of[i] >= 0 || opts.empty()) {
      dfs(i + 1, count, rem);
      return;
    }
    for (int j : opts) {
      if (ref_used[static_cast<std::size_t>(j)]) continue;
      ref_used[static_cast<std::size_t>(j)] = true;
      ref_of[i] = j;
      dfs(i + 1, count + 1, rem);
      ref_of[i] = -1;
      ref_used[static_cast<std::size_t>(j)] = false;
    }
    dfs(i + 1, count, rem);
  }
};

// Maximum bipartite matching size over the free positions (Kuhn).
int max_matching(const std::vector<std::vector<int>>& options, const std::vector<int>& ref_of,
                 std::vector<bool> ref_used) {
  std::vector<int> owner(ref_used.size(), -1);
  int size = 0;
  std::vector<bool> seen;
  std::function<bool(int)> augment = [&](int i) {
    for (int j : options[static_cast<std::size_t>(i)]) {
      if (ref_used[static_cast<std::size_t>(j)] || seen[static_cast<std::size_t>(j)]) continue;
      seen[static_cast<std::size_t>(j)] = true;
      if (owner[static_cast<std::size_t>(j)] < 0 || augment(owner[static_cast<std::size_t>(j)])) {
        owner[static_cast<std::size_t>(j)] = i;
        return true;
      }
    }
    return false;
  };
  for (int i = 0; i < static_cast<int>(options.size()); ++i) {
    if (ref_of[static_cast<std::size_t>(i)] >= 0) continue;
    seen.assign(ref_used.size(), false);
    if (augment(i)) ++size;
  }
  return size;
}

// Extends ref_of with a stage of matches allowed by same(i, j).
template <typename Same>
void align_stage(const Words& pred, const Words& ref, std::vector<int>& ref_of, Same same) {
  std::vector<bool> used(ref.size(), false);
  for (int j : ref_of)
    if (j >= 0) used[static_cast<std::size_t>(j)] = true;
  std::vector<std::vector<int>> options(pred.size());
  int remaining = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (ref_of[i] >= 0) continue;
    for (std::size_t j = 0; j < ref.size(); ++j)
      if (!used[j] && same(i, j)) options[i].push_back(static_cast<int>(j));
    if (!options[i].empty()) ++remaining;
  }
  AlignSearch s;
  s.options = &options;
  s.ref_of = ref_of;
  s.ref_used = used;
  s.target = max_matching(options, ref_of, used);
  if (s.target == 0) return;
  s.dfs(0, 0, remaining);
  if (!s.best_ref_of.empty()) ref_of = s.best_ref_of;
}

}  // namespace

double meteor(const EvalPair& pair) {
  const Words& pred = pair.prediction;
  const Words& ref = pair.reference;
  if (pred.empty() || ref.empty()) return 0.0;
  std::vector<int> ref_of(pred.size(), -1);
  align_stage(pred, ref, ref_of, [&](std::size_t i, std::size_t j) { return pred[i] == ref[j]; });
  std::vector<std::string> ps, rs;
  for (const auto& w : pred) ps.push_back(porter_stem(w));
  for (const auto& w : ref) rs.push_back(porter_stem(w));
  align_stage(pred, ref, ref_of, [&](std::size_t i, std::size_t j) { return ps[i] == rs[j]; });
  int m = 0;
  for (int j : ref_of)
    if (j >= 0) ++m;
  if (m == 0) return 0.0;
  const double p = static_cast<double>(m) / static_cast<double>(pred.size());
  const double r = static_cast<double>(m) / static_cast<double>(ref.size());
  const double fmean = 10.0 * p * r / (r + 9.0 * p);
  const double frag = static_cast<double>(AlignSearch::chunks(ref_of)) / static_cast<double>(m);
  return 100.0 * fmean * (1.0 - 0.5 * frag * frag * frag);
}

// ---------------------------------------------------------------------------
// CIDEr

std::vector<double> cider_per_pair(const std::vector<EvalPair>& pairs) {
  if (pairs.size() < 2) throw UsageError("CIDEr needs at least two pairs");
  const double N = static_cast<double>(pairs.size());
  std::vector<double> out(pairs.size(), 0.0);
  for (std::size_t n = 1; n <= 4; ++n) {
    std::map<std::vector<std::string>, int> df;
    std::vector<NgramCounts> refs, preds;
    for (const auto& p : pairs) {
      refs.push_back(ngrams(p.reference, n));
      preds.push_back(ngrams(p.prediction, n));
      for (const auto& [g, c] : refs.back()) ++df[g];
    }
    auto idf = [&](const std::vector<std::string>& g) {
      auto it = df.find(g);
      return std::log(N / static_cast<double>(it == df.end() ? 1 : std::max(1, it->second)));
    };
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      double dotp = 0.0, np = 0.0, nr = 0.0;
      for (const auto& [g, c] : preds[k]) {
        double w = c * idf(g);
        np += w * w;
        auto it = refs[k].find(g);
        if (it != refs[k].end()) dotp += w * it->second * idf(g);
      }
      for (const auto& [g, c] : refs[k]) {
        double w = c * idf(g);
        nr += w * w;
      }
      if (np > 0.0 && nr > 0.0) out[k] += dotp / (std::sqrt(np) * std::sqrt(nr));
    }
  }
  for (double& v : out) v = 10.0 * v / 4.0;
  return out;
}

double cider(const std::vector<EvalPair>& pairs) {
  auto v = cider_per_pair(pairs);
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// ---------------------------------------------------------------------------
// Wilcoxon signed-rank

double wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw UsageError("paired samples differ in length");
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] - b[i] != 0.0) d.push_back(a[i] - b[i]);
  const std::size_t n = d.size();
  if (n == 0) return 1.0;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t x, std::size_t y) { return std::fabs(d[x]) < std::fabs(d[y]); });
  std::vector<double> rank(n);
  double tie_term = 0.0;
  bool ties = false;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::fabs(d[order[j + 1]]) == std::fabs(d[order[i]])) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    const double t = static_cast<double>(j - i + 1);
    if (t > 1) ties = true;
    tie_term += t * t * t - t;
    i = j + 1;
  }
  double w_plus = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (d[i] > 0) w_plus += rank[i];
  const double nn = static_cast<double>(n);

  if (!ties && n <= static_cast<std::size_t>(kWilcoxonExactMax)) {
    // Number of subsets of {1..n} per rank sum.
    const std::size_t max_sum = n * (n + 1) / 2;
    std::vector<double> ways(max_sum + 1, 0.0);
    ways[0] = 1.0;
    for (std::size_t r = 1; r <= n; ++r)
      for (std::size_t s = max_sum; s >= r; --s) ways[s] += ways[s - r];
    const double total = std::ldexp(1.0, static_cast<int>(n));
    const auto w = static_cast<std::size_t>(std::llround(std::min(w_plus, nn * (nn + 1) / 2 - w_plus)));
    double lower = 0.0;
    for (std::size_t s = 0; s <= w; ++s) lower += ways[s];
    return std::min(1.0, 2.0 * lower / total);
  }

  const double mean = nn * (nn + 1.0) / 4.0;
  const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
  if (var <= 0.0) return 1.0;
  const double z = std::max(0.0, std::fabs(w_plus - mean) - 0.5) / std::sqrt(var);
  return std::min(1.0, std::erfc(z / std::sqrt(2.0)));
}

// ---------------------------------------------------------------------------

MetricReport evaluate(const std::vector<EvalPair>& pairs) {
  MetricReport r;
  if (pairs.empty()) throw UsageError("no pairs to evaluate");
  r.corpus_bleu = corpus_bleu(pairs);
  for (const auto& p : pairs) {
    r.per_sample_bleu.push_back(sentence_bleu(p));
    r.per_sample_rouge_l.push_back(rouge_l(p));
    r.per_sample_meteor.push_back(meteor(p));
  }
  auto mean = [](const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  r.sentence_bleu = mean(r.per_sample_bleu);
  r.rouge_l = mean(r.per_sample_rouge_l);
  r.meteor = mean(r.per_sample_meteor);
  if (pairs.size() >= 2) {
    r.per_sample_cider = cider_per_pair(pairs);
    r.cider = mean(r.per_sample_cider);
  }
  return r;
}

nlohmann::json metric_config_header() {
  return {{"bleu", {{"max_n", 4}, {"sentence_smoothing", "add-one for n>=2"}}},
          {"rouge_l", {{"beta", 1.0}}},
          {"meteor", {{"label", "METEOR (exact+stem)"},
                      {"stages", {"exact", "porter_stem"}},
                      {"alpha_weighting", "10PR/(R+9P)"},
                      {"penalty", "0.5*(chunks/matches)^3"}}},
          {"cider", {{"max_n", 4}, {"idf", "log(N/df) over references"}, {"scale", 10.0}}},
          {"preprocessing", "lowercase, strip one trailing period, whitespace split"},
          {"wilcoxon", {{"sides", 2},
                        {"exact_max_n", kWilcoxonExactMax},
                        {"approximation", "normal with tie and continuity corrections"}}}};
}

nlohmann::json report_to_json(const MetricReport& r, const std::vector<std::string>& ids) {
  nlohmann::json j;
  j["scores"] = {{"corpus_bleu", r.corpus_bleu}, {"sentence_bleu", r.sentence_bleu},
                 {"rouge_l", r.rouge_l},         {"meteor", r.meteor},
                 {"cider", r.cider}};
  nlohmann::json per = nlohmann::json::array();
  for (std::size_t i = 0; i < r.per_sample_bleu.size(); ++i) {
    nlohmann::json s = {{"sentence_bleu", r.per_sample_bleu[i]},
                        {"rouge_l", r.per_sample_rouge_l[i]},
                        {"meteor", r.per_sample_meteor[i]}};
    if (i < r.per_sample_cider.size()) s["cider"] = r.per_sample_cider[i];
    if (i < ids.size()) s["id"] = ids[i];
    per.push_back(s);
  }
  j["per_sample"] = per;
  return j;
}

}  // namespace racg::metrics
