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

#include "racg/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"
#include "racg/common.hpp"

namespace racg::corpus {

namespace {

const char* const kReserved[Special::kCount] = {"<cls>", "</s>", "<pad>",
                                                "<unk>", "<nl>",  "<hash>"};

bool is_word_byte(unsigned char c) {
  return std::isalnum(c) || c == '_' || c >= 0x80;
}

char lower(char c) {
  return static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
}

bool is_upper(char c) { return std::isupper(static_cast<unsigned char>(c)); }
bool is_lower(char c) { return std::islower(static_cast<unsigned char>(c)); }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)); }

}  // namespace

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary() {
  for (TokenId i = 0; i < Special::kCount; ++i) add(kReserved[i], 0);
}

void Vocabulary::add(const std::string& token, std::int64_t freq) {
  index_.emplace(token, static_cast<TokenId>(tokens_.size()));
  tokens_.push_back(token);
  freq_.push_back(freq);
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& docs,
                             int min_freq) {
  std::map<std::string, std::int64_t> counts;
  for (const auto& doc : docs)
    for (const auto& tok : doc) ++counts[tok];
  std::vector<std::pair<std::string, std::int64_t>> sorted(counts.begin(),
                                                           counts.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    return a.second > b.second;
  });
  Vocabulary v;
  for (const auto& [tok, n] : sorted) {
    if (n < min_freq) continue;
    if (v.index_.count(tok)) continue;
    v.add(tok, n);
  }
  return v;
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? Special::kUnk : it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    throw DataError("token id out of range: " + std::to_string(id));
  return tokens_[id];
}

std::string Vocabulary::serialize() const {
  std::string out;
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    out += tokens_[i];
    out += '\t';
    out += std::to_string(i);
    out += '\t';
    out += std::to_string(freq_[i]);
    out += '\n';
  }
  return out;
}

Vocabulary Vocabulary::parse(std::string_view text) {
  Vocabulary v;
  v.tokens_.clear();
  v.freq_.clear();
  v.index_.clear();
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    auto t1 = line.find('\t');
    auto t2 = t1 == std::string_view::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string_view::npos)
      throw DataError("vocabulary line " + std::to_string(line_no) + ": expected 3 fields");
    std::string tok(line.substr(0, t1));
    long long id = std::stoll(std::string(line.substr(t1 + 1, t2 - t1 - 1)));
    long long freq = std::stoll(std::string(line.substr(t2 + 1)));
    if (id != static_cast<long long>(v.tokens_.size()))
      throw DataError("vocabulary line " + std::to_string(line_no) + ": ids must be dense");
    v.add(tok, freq);
  }
  for (TokenId i = 0; i < Special::kCount; ++i) {
    if (static_cast<std::size_t>(i) >= v.tokens_.size() || v.tokens_[i] != kReserved[i])
      throw DataError("vocabulary is missing reserved token " + std::string(kReserved[i]));
  }
  return v;
}

void Vocabulary::save(const std::string& path) const {
  write_file_atomic(path, serialize());
}

Vocabulary Vocabulary::load(const std::string& path) {
  return parse(read_file(path));
}

std::uint64_t Vocabulary::hash() const { return fnv1a(serialize()); }

// ---------------------------------------------------------------------------
// Records

std::vector<CodeCommentPair> parse_jsonl(std::string_view text) {
  std::vector<CodeCommentPair> out;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("line " + std::to_string(line_no) + ": malformed record: " + e.what());
    }
    if (!rec.is_object() || !rec.contains("id") || !rec.contains("code") ||
        !rec.contains("comment") || !rec["id"].is_string() ||
        !rec["code"].is_string() || !rec["comment"].is_string()) {
      throw DataError("line " + std::to_string(line_no) +
                      ": record needs string fields id, code, comment");
    }
    CodeCommentPair p;
    p.id = rec["id"].get<std::string>();
    p.code_raw = rec["code"].get<std::string>();
    p.comment_raw = rec["comment"].get<std::string>();
    if (!seen.insert(p.id).second) throw DataError("duplicate id: " + p.id);
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<CodeCommentPair> load_jsonl(const std::string& path) {
  return parse_jsonl(read_file(path));
}

std::string to_jsonl(const std::vector<CodeCommentPair>& pairs) {
  std::string out;
  for (const auto& p : pairs) {
    nlohmann::ordered_json rec;
    rec["id"] = p.id;
    rec["code"] = p.code_raw;
    rec["comment"] = p.comment_raw;
    out += rec.dump();
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Lexing

std::vector<std::string> split_subtokens(std::string_view identifier) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  const std::size_t n = identifier.size();
  for (std::size_t i = 0; i < n; ++i) {
    char c = identifier[i];
    if (c == '_') {
      flush();
      continue;
    }
    if (!cur.empty() && is_upper(c)) {
      char prev = identifier[i - 1];
      bool next_lower = i + 1 < n && is_lower(identifier[i + 1]);
      if (is_lower(prev) || is_digit(prev) || (is_upper(prev) && next_lower)) flush();
    }
    cur += lower(c);
  }
  flush();
  return out;
}

std::vector<std::string> lex(std::string_view text, LexMode mode) {
  std::vector<std::string> out;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    unsigned char c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    if (!is_word_byte(c)) {
      out.emplace_back(1, static_cast<char>(c));
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && is_word_byte(static_cast<unsigned char>(text[j]))) ++j;
    std::string_view word = text.substr(i, j - i);
    if (mode == LexMode::kCode) {
      for (auto& s : split_subtokens(word)) out.push_back(std::move(s));
    } else {
      std::string w;
      for (char ch : word) w += lower(ch);
      out.push_back(std::move(w));
    }
    i = j;
  }
  return out;
}

TokenSeq tokenize(std::string_view text, const Vocabulary& vocab, LexMode mode) {
  TokenSeq out;
  for (const auto& tok : lex(text, mode)) out.push_back(vocab.id(tok));
  return out;
}

// ---------------------------------------------------------------------------
// Preparation

DatasetSplits dedup_test_against_train(const DatasetSplits& splits) {
  std::set<TokenSeq> train_codes;
  for (const auto& p : splits.train) train_codes.insert(p.code_tokens);
  DatasetSplits out;
  out.train = splits.train;
  out.validation = splits.validation;
  out.templates = splits.templates;
  for (const auto& p : splits.test)
    if (!train_codes.count(p.code_tokens)) out.test.push_back(p);
  return out;
}

void retokenize(DatasetSplits& splits, const Vocabulary& vocab) {
  for (auto* split : {&splits.train, &splits.validation, &splits.test}) {
    for (auto& p : *split) {
      p.code_tokens = tokenize(p.code_raw, vocab, LexMode::kCode);
      p.comment_tokens = tokenize(p.comment_raw, vocab, LexMode::kComment);
    }
  }
}

Corpus prepare(DatasetSplits raw, int min_freq) {
  Corpus c;
  std::vector<std::vector<std::string>> docs;
  for (const auto& p : raw.train) {
    docs.push_back(lex(p.code_raw, LexMode::kCode));
    docs.push_back(lex(p.comment_raw, LexMode::kComment));
  }
  c.vocab = Vocabulary::build(docs, min_freq);
  retokenize(raw, c.vocab);
  for (auto* split : {&raw.train, &raw.validation, &raw.test}) {
    std::vector<CodeCommentPair> kept;
    for (auto& p : *split) {
      if (p.code_tokens.empty() || p.comment_tokens.empty()) {
        ++c.dropped_empty;
        continue;
      }
      kept.push_back(std::move(p));
    }
    *split = std::move(kept);
  }
  std::size_t before = raw.test.size();
  c.splits = dedup_test_against_train(raw);
  c.dropped_duplicates = before - c.splits.test.size();
  return c;
}

std::string templates_to_tsv(const std::map<std::string, int>& templates) {
  std::string out;
  for (const auto& [id, t] : templates) out += id + "\t" + std::to_string(t) + "\n";
  return out;
}

std::map<std::string, int> templates_from_tsv(std::string_view text) {
  std::map<std::string, int> out;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw DataError("templates file: malformed line");
    out[line.substr(0, tab)] = std::stoi(line.substr(tab + 1));
  }
  return out;
}

void save_corpus(const Corpus& corpus, const std::string& dir) {
  std::filesystem::create_directories(dir);
  write_file_atomic(dir + "/train.jsonl", to_jsonl(corpus.splits.train));
  write_file_atomic(dir + "/valid.jsonl", to_jsonl(corpus.splits.validation));
  write_file_atomic(dir + "/test.jsonl", to_jsonl(corpus.splits.test));
  corpus.vocab.save(dir + "/vocab.tsv");
  if (!corpus.splits.templates.empty())
    write_file_atomic(dir + "/templates.tsv", templates_to_tsv(corpus.splits.templates));
}

Corpus load_corpus(const std::string& dir) {
  Corpus c;
  c.vocab = Vocabulary::load(dir + "/vocab.tsv");
  c.splits.train = load_jsonl(dir + "/train.jsonl");
  c.splits.validation = load_jsonl(dir + "/valid.jsonl");
  c.splits.test = load_jsonl(dir + "/test.jsonl");
  if (std::filesystem::exists(dir + "/templates.tsv"))
    c.splits.templates = templates_from_tsv(read_file(dir + "/templates.tsv"));
  retokenize(c.splits, c.vocab);
  return c;
}

std::string detokenize(const TokenSeq& tokens, const Vocabulary& vocab) {
  std::string out;
  for (TokenId t : tokens) {
    if (t == Special::kEos) break;
    if (!out.empty()) out += ' ';
    out += vocab.token(t);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic corpus

namespace {

// mt19937_64 is fully specified by the standard; the distributions are not,
// so draws go through this wrapper to keep corpora byte-stable everywhere.
class Draw {
 public:
  explicit Draw(std::uint64_t seed) : gen_(seed) {}
  std::size_t below(std::size_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return static_cast<std::size_t>(x % n);
  }
  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v[below(v.size())];
  }
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 gen_;
};

const std::vector<std::string> kSignatureWords = {
    "append",   "strip",    "encode",  "sorted",    "reverse", "lower",
    "flush",    "digest",   "close",   "compress",  "split",   "join",
    "connect",  "commit",   "rollback", "serialize", "quote",  "escape",
    "resolve",  "expand",   "normalize", "render",  "measure", "clamp",
    "register", "dispatch", "notify",  "tokenize",  "pad",     "truncate",
    "schedule", "cancel",   "retry",   "hydrate",   "prune",   "snapshot",
    "decrypt",  "verify",   "sign",    "rotate",    "shard",   "replicate",
    "evict",    "warm",     "probe",   "throttle",  "batch",   "drain"};

const std::vector<std::string> kVerbs = {
    "collect", "sort",    "load",     "build",  "count",   "merge",
    "check",   "write",   "index",    "group",  "scale",   "trim",
    "publish", "restore", "validate", "rank"};
const std::vector<std::string> kObjects = {
    "records", "entries", "values", "items",  "fields", "nodes",
    "rows",    "keys",    "blocks", "chunks", "tokens", "pages",
    "events",  "jobs",    "files",  "links"};
const std::vector<std::string> kQualifiers = {
    "safely",   "lazily",      "eagerly", "recursively", "atomically",
    "incrementally", "greedily", "locally", "remotely", "silently",
    "strictly", "loosely",     "quickly", "twice",       "once",
    "offline"};

const std::vector<std::string> kKeyHeads = {
    "user",   "order",  "cart",   "token",  "session", "query", "invoice",
    "packet", "frame",  "ticket", "sensor", "vector",  "graph", "cache",
    "stream", "config", "report", "widget", "module",  "bucket"};
const std::vector<std::string> kKeyTails = {
    "Loader",  "Builder", "Mapper",  "Writer",  "Reader",  "Checker", "Manager",
    "Tracker", "Counter", "Planner", "Scanner", "Merger",  "Router",  "Sender",
    "Fetcher", "Printer", "Sorter",  "Keeper",  "Matcher", "Worker"};

const std::vector<std::string> kArgs = {"items", "values", "data", "records",
                                        "entries", "rows", "batch", "xs"};
const std::vector<std::string> kArgs2 = {"limit", "opts", "ctx", "flag",
                                         "depth", "mode", "timeout", "key"};
const std::vector<std::string> kResults = {"result", "out", "acc", "res",
                                           "collected", "buf"};
const std::vector<std::string> kLoopVars = {"item", "elem", "entry", "node",
                                            "row", "x"};

std::string synth_word(Draw& draw, std::size_t syllables) {
  static const char* const kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n",
                                        "p", "r", "s", "t", "v", "z", "br", "tr",
                                        "pl", "gr", "st", "kl"};
  static const char* const kVowels[] = {"a", "e", "i", "o", "u", "ai", "ou"};
  std::string w;
  for (std::size_t i = 0; i < syllables; ++i) {
    w += kOnsets[draw.below(std::size(kOnsets))];
    w += kVowels[draw.below(std::size(kVowels))];
  }
  return w;
}

struct TemplateSpec {
  int family = 0;
  std::string sig[3];
  std::string verb, object, qualifier;
};

struct GroupSpec {
  int template_id = 0;
  std::string head;  // lowercase camel head
  std::string tail;  // capitalized camel tail
  std::string noun;  // three words that appear only in comments
  std::size_t loop_var = 0;
};

std::string lowercase(std::string s) {
  for (char& c : s) c = lower(c);
  return s;
}

std::string body_for(const TemplateSpec& t, const std::string& arg,
                     const std::string& arg2, const std::string& res,
                     const std::string& v, int num) {
  const std::string n = std::to_string(num);
  switch (t.family) {
    case 0:
      return res + " = []\n    for " + v + " in " + arg + ":\n        if " + v + "." +
             t.sig[0] + "(" + arg2 + "):\n            " + res + "." + t.sig[1] + "(" +
             t.sig[2] + "(" + v + "))";
    case 1:
      return res + " = " + t.sig[0] + "(" + arg + ", key=lambda " + v + ": " + v +
             "." + t.sig[1] + ")\n    if not " + res + ":\n        raise " + t.sig[2] +
             "Error(" + arg2 + ")";
    case 2:
      return "with " + t.sig[0] + "(" + arg2 + ") as " + v + ":\n        " + res +
             " = " + v + "." + t.sig[1] + "(" + arg + ", " + n + ")\n        " + v + "." +
             t.sig[2] + "()";
    default:
      return res + " = {}\n    for " + v + " in " + arg + ":\n        " + res + "[" + v +
             "." + t.sig[0] + "] = " + t.sig[1] + "." + t.sig[2] + "(" + v + ", " + n +
             ")";
  }
}

}  // namespace

DatasetSplits generate_synthetic_corpus(int num_templates, int samples_per_template,
                                        std::uint64_t seed) {
  if (num_templates < 2) throw UsageError("synthetic corpus needs at least 2 templates");
  if (samples_per_template < 4)
    throw UsageError("synthetic corpus needs at least 4 samples per template");
  Draw draw(seed);
  const auto T = static_cast<std::size_t>(num_templates);
  const auto S = static_cast<std::size_t>(samples_per_template);

  std::vector<std::string> sig_pool = kSignatureWords;
  draw.shuffle(sig_pool);
  std::vector<TemplateSpec> templates(T);
  for (std::size_t t = 0; t < T; ++t) {
    auto& spec = templates[t];
    spec.family = static_cast<int>(t % 4);
    for (std::size_t j = 0; j < 3; ++j) {
      std::size_t k = 3 * t + j;
      spec.sig[j] = k < sig_pool.size() ? sig_pool[k] : synth_word(draw, 3);
    }
    spec.verb = t < kVerbs.size() ? kVerbs[t] : synth_word(draw, 2);
    spec.object = t < kObjects.size() ? kObjects[t] : synth_word(draw, 2);
    spec.qualifier = t < kQualifiers.size() ? kQualifiers[t] : synth_word(draw, 2);
  }

  // Split quotas: one eighth each for validation and test.
  const std::size_t N = T * S;
  const std::size_t n_valid = N / 8, n_test = N / 8;
  std::vector<std::size_t> quota_valid(T), quota_test(T);
  for (std::size_t t = 0; t < T; ++t) {
    quota_valid[t] = n_valid / T + (t < n_valid % T ? 1 : 0);
    quota_test[t] = n_test / T + (t >= T - n_test % T && n_test % T ? 1 : 0);
  }

  // Groups: pairs of training samples share a function name, a loop
  // variable and a comment phrase; held-out samples join existing groups.
  std::vector<std::size_t> group_base(T), group_count(T);
  std::vector<std::pair<std::size_t, std::size_t>> key_pool;
  for (std::size_t a = 0; a < kKeyHeads.size(); ++a)
    for (std::size_t b = 0; b < kKeyTails.size(); ++b) key_pool.emplace_back(a, b);
  draw.shuffle(key_pool);
  std::vector<GroupSpec> groups;
  std::set<std::string> nouns, names;
  for (std::size_t t = 0; t < T; ++t) {
    const std::size_t n_train = S - std::min(S, quota_valid[t] + quota_test[t]);
    group_base[t] = groups.size();
    group_count[t] = std::max<std::size_t>(1, (n_train + 1) / 2);
    for (std::size_t g = 0; g < group_count[t]; ++g) {
      GroupSpec spec;
      spec.template_id = static_cast<int>(t);
      std::size_t gi = groups.size();
      if (gi < key_pool.size()) {
        spec.head = kKeyHeads[key_pool[gi].first];
        spec.tail = kKeyTails[key_pool[gi].second];
      } else {
        do {
          spec.head = synth_word(draw, 2);
          std::string tail = synth_word(draw, 2);
          tail[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(tail[0])));
          spec.tail = tail;
        } while (!names.insert(spec.head + spec.tail).second);
      }
      for (int w = 0; w < 3; ++w) {
        std::string word;
        do {
          word = synth_word(draw, 2 + draw.below(2));
        } while (!nouns.insert(word).second);
        spec.noun += (w ? " " : "") + word;
      }
      spec.loop_var = draw.below(kLoopVars.size());
      groups.push_back(spec);
    }
  }

  std::vector<std::string> helpers;
  {
    std::set<std::string> seen(names);
    for (const auto& h : kKeyHeads) seen.insert(h);
    for (const auto& t : kKeyTails) seen.insert(lowercase(t));
    while (helpers.size() < 2 * T) {
      std::string h = synth_word(draw, 2);
      if (seen.insert(h).second) helpers.push_back(h);
    }
  }

  struct Slot {
    std::size_t template_id, group, split;  // split: 0 train, 1 valid, 2 test
  };
  std::vector<Slot> slots;
  for (std::size_t t = 0; t < T; ++t) {
    const std::size_t qv = quota_valid[t], qt = quota_test[t];
    std::vector<std::size_t> split(S, 0);
    for (std::size_t i = 0; i < qv; ++i) split[i] = 1;
    for (std::size_t i = qv; i < qv + qt && i < S; ++i) split[i] = 2;
    draw.shuffle(split);
    std::size_t train_seen = 0, held_seen = 0;
    for (std::size_t i = 0; i < S; ++i) {
      std::size_t s = split[i];
      std::size_t local = s == 0 ? train_seen++ / 2 : held_seen++;
      slots.push_back({t, group_base[t] + local % group_count[t], s});
    }
  }

  std::vector<std::size_t> id_order(N);
  for (std::size_t i = 0; i < N; ++i) id_order[i] = i;
  draw.shuffle(id_order);

  std::vector<CodeCommentPair> samples(N);
  std::vector<std::size_t> sample_split(N);
  DatasetSplits out;
  for (std::size_t i = 0; i < N; ++i) {
    const Slot& slot = slots[i];
    const TemplateSpec& tmpl = templates[slot.template_id];
    const GroupSpec& grp = groups[slot.group];

    // Helper lines borrowed from two other templates.
    std::size_t other[2];
    for (std::size_t d = 0; d < 2; ++d) {
      do {
        other[d] = draw.below(T);
      } while (other[d] == slot.template_id || (d == 1 && T > 2 && other[1] == other[0]));
    }
    const std::string& helper = draw.pick(helpers);

    const std::string& arg = draw.pick(kArgs);
    const std::string& arg2 = draw.pick(kArgs2);
    const std::string& res = draw.pick(kResults);
    const std::string& v = kLoopVars[grp.loop_var];
    const int num = static_cast<int>(1 + draw.below(99));
    const int num2 = static_cast<int>(1 + draw.below(99));

    std::string code = "def " + grp.head + grp.tail + "(" + arg + ", " + arg2 + "):\n    ";
    code += body_for(tmpl, arg, arg2, res, v, num);
    const TemplateSpec& d0 = templates[other[0]];
    const TemplateSpec& d1 = templates[other[1]];
    code += "\n    self." + helper + "_" + d0.verb + "(" + std::to_string(num2) + ")." +
            d0.sig[0] + "(" + d0.sig[1] + ")." + d0.sig[2] + "()";
    code += "\n    " + d1.sig[0] + "." + d1.sig[1] + "(" + d1.sig[2] + ")";
    code += "\n    return " + res + "\n";

    std::string comment = tmpl.verb + " the " + lowercase(grp.tail) + " " + grp.noun +
                          " " + tmpl.object + " " + tmpl.qualifier;

    char idbuf[16];
    std::snprintf(idbuf, sizeof(idbuf), "s%05zu", id_order[i]);
    CodeCommentPair p;
    p.id = idbuf;
    p.code_raw = std::move(code);
    p.comment_raw = std::move(comment);
    out.templates[p.id] = static_cast<int>(slot.template_id);
    samples[i] = std::move(p);
    sample_split[i] = slot.split;
  }

  // Order each split by id; ids are a random permutation of generation order.
  std::vector<std::size_t> order(N);
  for (std::size_t i = 0; i < N; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return samples[a].id < samples[b].id; });
  for (std::size_t i : order) {
    auto& dst = sample_split[i] == 0 ? out.train
                : sample_split[i] == 1 ? out.validation
                                       : out.test;
    dst.push_back(samples[i]);
  }
  return out;
}

}  // namespace racg::corpus
