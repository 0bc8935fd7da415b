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

#include "racg/pipeline.hpp"

#include <filesystem>

#include "racg/common.hpp"

namespace racg::pipeline {

namespace fs = std::filesystem;

std::string mode_name(Mode m) {
  switch (m) {
    case Mode::kJoint: return "joint";
    case Mode::kRafBm25: return "raf-bm25";
    case Mode::kRafFixedEncoder: return "raf-fixed-encoder";
  }
  return "unknown";
}

Mode parse_mode(const std::string& name) {
  if (name == "joint") return Mode::kJoint;
  if (name == "raf-bm25") return Mode::kRafBm25;
  if (name == "raf-fixed-encoder") return Mode::kRafFixedEncoder;
  throw UsageError("invalid mode '" + name + "' (expected joint, raf-bm25 or raf-fixed-encoder)");
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json m = model.to_json();
  m.erase("vocab_size");
  return {{"mode", mode_name(mode)},
          {"data", data_dir},
          {"training", training.to_json()},
          {"model", m},
          {"generator_init", generator_init},
          {"retriever_init", retriever_init}};
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  return from_json(j, ExperimentConfig());
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j, ExperimentConfig c) {
  if (!j.is_object()) throw UsageError("experiment config must be a JSON object");
  try {
    if (j.contains("mode")) c.mode = parse_mode(j.at("mode").get<std::string>());
    c.data_dir = j.value("data", c.data_dir);
    if (j.contains("training")) c.training = train::TrainingConfig::from_json(j.at("training"), c.training);
    if (j.contains("model")) {
      const auto& m = j.at("model");
      c.model.hidden = m.value("hidden", c.model.hidden);
      c.model.layers = m.value("layers", c.model.layers);
      c.model.heads = m.value("heads", c.model.heads);
      c.model.ff = m.value("ff", c.model.ff);
      c.model.dropout = m.value("dropout", c.model.dropout);
    }
    c.generator_init = j.value("generator_init", c.generator_init);
    c.retriever_init = j.value("retriever_init", c.retriever_init);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("bad experiment config: ") + e.what());
  }
  return c;
}

nlohmann::json TrainSummary::to_json() const {
  return {{"best_epoch", best_epoch},
          {"best_val_bleu", best_bleu},
          {"epoch_val_bleu", epoch_bleu},
          {"generator_hash_before", generator_hash_before},
          {"generator_hash_after", generator_hash_after}};
}

namespace {

void check_vocab_hash(const std::string& stem, std::uint64_t vocab_hash) {
  auto m = nn::load_manifest(stem);
  if (m.value("vocab_hash", "") != hex64(vocab_hash))
    throw DataError("vocabulary mismatch between " + stem + " and the dataset");
}

void copy_init(nn::ParamSet& dst, const nn::ParamSet& src, const std::string& what) {
  try {
    dst.copy_values_from(src);
  } catch (const Error& e) {
    throw DataError("cannot initialize " + what + ": " + e.what());
  }
}

// Replaces dir with the fully written staging directory.
void publish(const fs::path& stage, const fs::path& dir) {
  std::error_code ec;
  if (fs::exists(dir)) fs::remove_all(dir, ec);
  if (ec) throw DataError("cannot replace " + dir.string() + ": " + ec.message());
  fs::rename(stage, dir, ec);
  if (ec) throw DataError("cannot move outputs into " + dir.string() + ": " + ec.message());
}

}  // namespace

TrainSummary train_to_dir(const corpus::Corpus& data, const ExperimentConfig& config,
                          const std::string& out_dir) {
  const auto& tc = config.training;
  tc.validate(config.mode == Mode::kJoint);
  if (out_dir.empty()) throw UsageError("an output directory is required");
  const std::uint64_t vocab_hash = data.vocab.hash();

  fs::path dir = fs::path(out_dir).lexically_normal();
  if (dir.filename().empty()) dir = dir.parent_path();
  fs::path stage = dir;
  stage += ".partial";
  std::error_code ec;
  fs::remove_all(stage, ec);
  fs::create_directories(stage, ec);
  if (ec) throw DataError("cannot create " + stage.string() + ": " + ec.message());
  const std::string s = stage.string() + "/";

  nn::TransformerConfig net = config.model;
  net.vocab_size = static_cast<int>(data.vocab.size());
  nn::EncoderConfig enc_cfg;
  enc_cfg.net = net;
  enc_cfg.max_tokens = tc.budgets.code;
  nn::Seq2SeqConfig gen_cfg;
  gen_cfg.net = net;
  gen_cfg.max_source = tc.budgets.total;
  gen_cfg.max_target = tc.max_target;

  nn::Seq2SeqModel generator(gen_cfg, mix_seed(tc.seed, 2));
  if (!config.generator_init.empty()) {
    const std::string stem = (fs::path(config.generator_init) / "generator").string();
    check_vocab_hash(stem, vocab_hash);
    copy_init(generator.params(), nn::load_seq2seq(stem).params(), "generator");
  } else if (tc.copy_pretrain_epochs > 0) {
    auto copy = baseline::copy_pretrain(tc, data.splits, data.vocab, generator);
    write_file_atomic(s + "copy_log.jsonl", train::log_to_jsonl(copy.log));
  }

  TrainSummary summary;
  summary.generator_hash_before = hex64(generator.params().hash());
  train::TrainResult result;
  baseline::VariantManifest variant;
  variant.generator_path = "generator";
  variant.seed = tc.seed;

  switch (config.mode) {
    case Mode::kJoint: {
      nn::EncoderModel retriever(enc_cfg, mix_seed(tc.seed, 1));
      if (!config.retriever_init.empty()) {
        const std::string stem = (fs::path(config.retriever_init) / "retriever").string();
        check_vocab_hash(stem, vocab_hash);
        copy_init(retriever.params(), nn::load_encoder(stem).params(), "retriever");
      }
      result = train::train(tc, data.splits, data.vocab, retriever, generator);
      nn::save_encoder(s + "retriever", retriever, vocab_hash);
      result.index.save(s + "index.bin");
      variant.retriever_kind = baseline::RetrieverKind::kJointDense;
      variant.retriever_path = "retriever";
      break;
    }
    case Mode::kRafBm25: {
      baseline::Bm25Retriever bm25(data.splits.train);
      result = baseline::train_baseline_generator(bm25, tc, data.splits, data.vocab, generator);
      variant.retriever_kind = baseline::RetrieverKind::kBm25;
      break;
    }
    case Mode::kRafFixedEncoder: {
      nn::Seq2SeqConfig plain_cfg = gen_cfg;
      plain_cfg.max_source = tc.budgets.code + 1;
      nn::Seq2SeqModel plain(plain_cfg, mix_seed(tc.seed, 3));
      auto plain_result = baseline::train_plain_seq2seq(tc, data.splits, data.vocab, plain);
      nn::save_seq2seq(s + "plain", plain, vocab_hash);
      write_file_atomic(s + "plain_log.jsonl", train::log_to_jsonl(plain_result.log));
      baseline::DenseRetriever fixed(baseline::RetrieverKind::kFixedEncoder,
                                     baseline::encoder_from_seq2seq(plain, tc.budgets.code),
                                     data.splits.train);
      result = baseline::train_baseline_generator(fixed, tc, data.splits, data.vocab, generator);
      nn::save_encoder(s + "retriever", fixed.encoder(), vocab_hash);
      fixed.index().save(s + "index.bin");
      variant.retriever_kind = baseline::RetrieverKind::kFixedEncoder;
      variant.retriever_path = "retriever";
      break;
    }
  }
  summary.generator_hash_after = hex64(generator.params().hash());
  if (tc.freeze_generator && summary.generator_hash_after != summary.generator_hash_before)
    throw DataError("generator changed although it was frozen");
  summary.best_epoch = result.best_epoch;
  summary.best_bleu = result.best_bleu;
  summary.epoch_bleu = result.epoch_bleu;

  nlohmann::json resolved = config.to_json();
  resolved["vocab_hash"] = hex64(vocab_hash);
  resolved["vocab_size"] = data.vocab.size();
  nn::save_seq2seq(s + "generator", generator, vocab_hash);
  write_file_atomic(s + "config.json", resolved.dump(2) + "\n");
  write_file_atomic(s + "train_log.jsonl", train::log_to_jsonl(result.log));
  write_file_atomic(s + "best_epoch.json", summary.to_json().dump(2) + "\n");
  data.vocab.save(s + "vocab.tsv");
  write_file_atomic(s + "base.jsonl", corpus::to_jsonl(data.splits.train));
  variant.save(s + "variant.json");
  publish(stage, dir);
  return summary;
}

// ---------------------------------------------------------------------------

namespace {

std::string resolve(const fs::path& root, const std::string& p) {
  if (p.empty()) return p;
  fs::path q(p);
  return (q.is_absolute() ? q : root / q).lexically_normal().string();
}

}  // namespace

std::unique_ptr<System> System::open(const std::string& path) {
  std::unique_ptr<System> sys(new System());
  fs::path manifest_path = fs::is_directory(path) ? fs::path(path) / "variant.json" : fs::path(path);
  if (!fs::exists(manifest_path))
    throw DataError("no variant manifest at " + manifest_path.string());
  const fs::path root = manifest_path.parent_path();
  baseline::VariantManifest m = baseline::VariantManifest::load(manifest_path.string());
  m.generator_path = resolve(root, m.generator_path);
  m.retriever_path = resolve(root, m.retriever_path);
  const fs::path base_dir = fs::path(m.generator_path).parent_path();
  if (!fs::exists(base_dir / "best_epoch.json"))
    throw DataError(base_dir.string() + " is not a trained checkpoint directory");

  sys->name_ = baseline::kind_name(m.retriever_kind) + "+" + base_dir.filename().string();
  sys->vocab_ = corpus::Vocabulary::load((base_dir / "vocab.tsv").string());
  auto cfg = nlohmann::json::parse(read_file((base_dir / "config.json").string()), nullptr, false);
  if (cfg.is_discarded()) throw DataError("bad config.json in " + base_dir.string());
  auto tc = train::TrainingConfig::from_json(cfg.value("training", nlohmann::json::object()));
  sys->budgets_ = tc.budgets;
  sys->max_len_ = tc.max_target;

  corpus::DatasetSplits s;
  s.train = corpus::load_jsonl((base_dir / "base.jsonl").string());
  corpus::retokenize(s, sys->vocab_);
  sys->base_ = std::make_shared<std::vector<corpus::CodeCommentPair>>(std::move(s.train));
  sys->predictor_ = std::make_unique<baseline::Predictor>(
      baseline::assemble_variant(m, *sys->base_, sys->vocab_.hash()));
  sys->manifest_ = m;
  return sys;
}

train::Prediction System::predict(const corpus::CodeCommentPair& query, int beam_size) {
  return predictor_->predict(query, beam_size, budgets_, max_len_);
}

train::Prediction System::predict_code(const std::string& code, int beam_size) {
  corpus::CodeCommentPair q;
  q.id = "query";
  q.code_raw = code;
  q.code_tokens = corpus::tokenize(code, vocab_, corpus::LexMode::kCode);
  if (q.code_tokens.empty()) throw DataError("input code has no tokens");
  return predict(q, beam_size);
}

System::EvalOutput System::evaluate(const std::vector<corpus::CodeCommentPair>& samples,
                                    int beam_size, const std::map<std::string, int>* templates) {
  if (samples.empty()) throw DataError("nothing to evaluate");
  corpus::DatasetSplits s;
  s.test = samples;
  corpus::retokenize(s, vocab_);
  std::vector<metrics::EvalPair> pairs;
  std::vector<std::string> ids;
  EvalOutput out;
  int same = 0, labelled = 0;
  for (const auto& q : s.test) {
    if (q.code_tokens.empty()) throw DataError("sample " + q.id + " has no code tokens");
    train::Prediction p = predict(q, beam_size);
    const auto& ex = base_->at(static_cast<std::size_t>(p.exemplar.row));
    metrics::EvalPair pair{train::prediction_words(p.tokens, vocab_), train::reference_words(q)};
    if (templates) {
      auto a = templates->find(q.id), b = templates->find(ex.id);
      if (a != templates->end() && b != templates->end()) {
        ++labelled;
        same += a->second == b->second;
      }
    }
    std::string pred, ref;
    for (const auto& w : pair.prediction) pred += (pred.empty() ? "" : " ") + w;
    for (const auto& w : pair.reference) ref += (ref.empty() ? "" : " ") + w;
    nlohmann::json line = {{"id", q.id},
                           {"exemplar_id", ex.id},
                           {"index_score", p.exemplar.index_score},
                           {"prediction", pred},
                           {"reference", ref}};
    out.predictions_jsonl += line.dump() + "\n";
    pairs.push_back(std::move(pair));
    ids.push_back(q.id);
  }
  out.report = metrics::report_to_json(metrics::evaluate(pairs), ids);
  out.report["config"] = {{"metrics", metrics::metric_config_header()},
                          {"system", name_},
                          {"variant", manifest_.to_json()},
                          {"beam", beam_size},
                          {"samples", pairs.size()}};
  if (labelled > 0)
    out.report["retrieval"] = {{"same_template_p1", static_cast<double>(same) / labelled}};
  return out;
}

void add_comparisons(nlohmann::json& report, const std::vector<nlohmann::json>& others,
                     const std::vector<std::string>& names) {
  static const char* const kMetrics[] = {"sentence_bleu", "rouge_l", "meteor", "cider"};
  nlohmann::json cmp = nlohmann::json::object();
  const auto& mine = report.at("per_sample");
  for (std::size_t o = 0; o < others.size(); ++o) {
    std::map<std::string, nlohmann::json> by_id;
    for (const auto& row : others[o].at("per_sample")) by_id[row.at("id").get<std::string>()] = row;
    nlohmann::json entry = nlohmann::json::object();
    for (const char* metric : kMetrics) {
      std::vector<double> a, b;
      for (const auto& row : mine) {
        auto it = by_id.find(row.at("id").get<std::string>());
        if (it == by_id.end() || !row.contains(metric) || !it->second.contains(metric))
          continue;
        a.push_back(row.at(metric).get<double>());
        b.push_back(it->second.at(metric).get<double>());
      }
      if (a.empty()) throw DataError("reports share no samples for " + std::string(metric));
      entry[metric] = {{"p_value", metrics::wilcoxon_signed_rank(a, b)}, {"pairs", a.size()}};
    }
    cmp[o < names.size() ? names[o] : "report" + std::to_string(o)] = entry;
  }
  report["comparisons"] = cmp;
}

}  // namespace racg::pipeline
