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

#include "racg/racg.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <new>
#include <string>

#include "racg/common.hpp"
#include "racg/pipeline.hpp"

struct racg_dataset {
  racg::corpus::Corpus corpus;
};

struct racg_system {
  std::unique_ptr<racg::pipeline::System> impl;
};

namespace {

thread_local std::string g_last_error;

racg_status fail(racg_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

template <typename F>
racg_status guard(F&& f) {
  g_last_error.clear();
  try {
    f();
    return RACG_OK;
  } catch (const racg::Error& e) {
    return fail(static_cast<racg_status>(e.kind()), e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(RACG_ERR_DATA, std::string("malformed JSON: ") + e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(RACG_ERR_DATA, e.what());
  } catch (const std::bad_alloc&) {
    return fail(RACG_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(RACG_ERR_INTERNAL, e.what());
  }
}

char* dup(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (p == nullptr) throw std::bad_alloc();
  std::memcpy(p, s.data(), s.size() + 1);
  return p;
}

void need(const void* p, const char* what) {
  if (p == nullptr) throw racg::UsageError(std::string(what) + " must not be null");
}

nlohmann::json parse_config(const char* text) {
  if (text == nullptr || *text == '\0') return nlohmann::json::object();
  auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) throw racg::UsageError("config is not valid JSON");
  return j;
}

}  // namespace

extern "C" {

const char* racg_version(void) { return "0.1.0"; }

const char* racg_last_error(void) { return g_last_error.c_str(); }

void racg_free_string(char* s) { std::free(s); }

racg_status racg_dataset_synthetic(int num_templates, int samples_per_template, uint64_t seed,
                                   racg_dataset** out) {
  return guard([&] {
    need(out, "out");
    auto raw = racg::corpus::generate_synthetic_corpus(num_templates, samples_per_template, seed);
    auto ds = std::make_unique<racg_dataset>();
    ds->corpus = racg::corpus::prepare(std::move(raw));
    *out = ds.release();
  });
}

racg_status racg_dataset_from_files(const char* train_path, const char* valid_path,
                                    const char* test_path, int min_freq, racg_dataset** out) {
  return guard([&] {
    need(out, "out");
    need(train_path, "train_path");
    need(valid_path, "valid_path");
    need(test_path, "test_path");
    racg::corpus::DatasetSplits raw;
    raw.train = racg::corpus::load_jsonl(train_path);
    raw.validation = racg::corpus::load_jsonl(valid_path);
    raw.test = racg::corpus::load_jsonl(test_path);
    auto ds = std::make_unique<racg_dataset>();
    ds->corpus = racg::corpus::prepare(std::move(raw), min_freq);
    *out = ds.release();
  });
}

racg_status racg_dataset_open(const char* dir, racg_dataset** out) {
  return guard([&] {
    need(out, "out");
    need(dir, "dir");
    auto ds = std::make_unique<racg_dataset>();
    ds->corpus = racg::corpus::load_corpus(dir);
    *out = ds.release();
  });
}

racg_status racg_dataset_save(const racg_dataset* ds, const char* dir) {
  return guard([&] {
    need(ds, "dataset");
    need(dir, "dir");
    racg::corpus::save_corpus(ds->corpus, dir);
  });
}

racg_status racg_dataset_info(const racg_dataset* ds, char** json_out) {
  return guard([&] {
    need(ds, "dataset");
    need(json_out, "json_out");
    const auto& c = ds->corpus;
    nlohmann::json j = {{"train", c.splits.train.size()},
                        {"validation", c.splits.validation.size()},
                        {"test", c.splits.test.size()},
                        {"vocab_size", c.vocab.size()},
                        {"vocab_hash", racg::hex64(c.vocab.hash())},
                        {"dropped_empty", c.dropped_empty},
                        {"dropped_duplicates", c.dropped_duplicates},
                        {"has_templates", !c.splits.templates.empty()}};
    *json_out = dup(j.dump());
  });
}

void racg_dataset_free(racg_dataset* ds) { delete ds; }

racg_status racg_resolve_config(const char* config_json, char** json_out) {
  return guard([&] {
    need(json_out, "json_out");
    auto cfg = racg::pipeline::ExperimentConfig::from_json(parse_config(config_json));
    *json_out = dup(cfg.to_json().dump(2));
  });
}

racg_status racg_train(const racg_dataset* ds, const char* config_json, const char* out_dir,
                       char** summary_json) {
  return guard([&] {
    need(ds, "dataset");
    need(out_dir, "out_dir");
    auto cfg = racg::pipeline::ExperimentConfig::from_json(parse_config(config_json));
    auto summary = racg::pipeline::train_to_dir(ds->corpus, cfg, out_dir);
    if (summary_json != nullptr) *summary_json = dup(summary.to_json().dump(2));
  });
}

racg_status racg_system_open(const char* path, racg_system** out) {
  return guard([&] {
    need(out, "out");
    need(path, "path");
    auto sys = std::make_unique<racg_system>();
    sys->impl = racg::pipeline::System::open(path);
    *out = sys.release();
  });
}

void racg_system_free(racg_system* sys) { delete sys; }

racg_status racg_predict(racg_system* sys, const char* code, int beam, char** result_json) {
  return guard([&] {
    need(sys, "system");
    need(code, "code");
    need(result_json, "result_json");
    if (beam < 1) throw racg::UsageError("beam must be at least 1");
    auto p = sys->impl->predict_code(code, beam);
    const auto& ex = sys->impl->base().at(static_cast<std::size_t>(p.exemplar.row));
    nlohmann::json j = {{"exemplar_id", ex.id},
                        {"exemplar_score", p.exemplar.index_score},
                        {"exemplar_comment", ex.comment_raw},
                        {"exemplar_code", ex.code_raw},
                        {"prediction", racg::corpus::detokenize(p.tokens, sys->impl->vocab())}};
    *result_json = dup(j.dump());
  });
}

racg_status racg_evaluate(racg_system* sys, const racg_dataset* ds, const char* split, int beam,
                          char** report_json, char** predictions_jsonl) {
  return guard([&] {
    need(sys, "system");
    need(ds, "dataset");
    need(report_json, "report_json");
    if (beam < 1) throw racg::UsageError("beam must be at least 1");
    const std::string which = split ? split : "test";
    const auto& sp = ds->corpus.splits;
    const std::vector<racg::corpus::CodeCommentPair>* samples =
        which == "test" ? &sp.test
        : which == "validation" ? &sp.validation
        : which == "train" ? &sp.train
                           : nullptr;
    if (samples == nullptr) throw racg::UsageError("unknown split: " + which);
    if (racg::hex64(ds->corpus.vocab.hash()) != racg::hex64(sys->impl->vocab().hash()))
      throw racg::DataError("dataset vocabulary does not match the checkpoint vocabulary");
    auto out = sys->impl->evaluate(*samples, beam,
                                   sp.templates.empty() ? nullptr : &sp.templates);
    out.report["config"]["split"] = which;
    *report_json = dup(out.report.dump(2));
    if (predictions_jsonl != nullptr) *predictions_jsonl = dup(out.predictions_jsonl);
  });
}

racg_status racg_compare_reports(const char* report_json, const char* others_json,
                                 char** out_json) {
  return guard([&] {
    need(report_json, "report_json");
    need(others_json, "others_json");
    need(out_json, "out_json");
    auto report = nlohmann::json::parse(report_json);
    auto others = nlohmann::json::parse(others_json);
    if (!others.is_array()) throw racg::UsageError("others must be a JSON array");
    std::vector<nlohmann::json> reports;
    std::vector<std::string> names;
    for (const auto& o : others) {
      names.push_back(o.at("name").get<std::string>());
      reports.push_back(o.at("report"));
    }
    racg::pipeline::add_comparisons(report, reports, names);
    *out_json = dup(report.dump(2));
  });
}

racg_status racg_write_variant(const char* path, const char* retriever_kind,
                               const char* retriever_path, const char* generator_path,
                               uint64_t seed) {
  return guard([&] {
    need(path, "path");
    need(retriever_kind, "retriever_kind");
    need(generator_path, "generator_path");
    racg::baseline::VariantManifest m;
    m.retriever_kind = racg::baseline::parse_kind(retriever_kind);
    m.retriever_path = retriever_path ? retriever_path : "";
    m.generator_path = generator_path;
    m.seed = seed;
    m.save(path);
  });
}

}  // extern "C"
