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


#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>

#include "racg/common.hpp"
#include "racg/pipeline.hpp"

using namespace racg;
using namespace racg::pipeline;
namespace fs = std::filesystem;

namespace {

const corpus::Corpus& data() {
  static const corpus::Corpus c = corpus::prepare(corpus::generate_synthetic_corpus(3, 16, 8));
  return c;
}

ExperimentConfig tiny(Mode mode) {
  ExperimentConfig c;
  c.mode = mode;
  c.model.hidden = 16;
  c.model.layers = 1;
  c.model.heads = 2;
  c.model.ff = 24;
  auto& t = c.training;
  t.k = 2;
  t.epochs = 2;
  t.patience = 2;
  t.batch_size = 6;
  t.grad_accum = 1;
  t.beam = 2;
  t.learning_rate = 3e-3;
  t.budgets = {16, 8, 40};
  t.max_target = 12;
  t.val_limit = 4;
  return c;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("racg_pipeline_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("experiment config round trips and rejects bad input") {
  ExperimentConfig c = tiny(Mode::kRafBm25);
  c.data_dir = "somewhere";
  const auto back = ExperimentConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  const auto partial = ExperimentConfig::from_json({{"training", {{"k", 3}}}}, c);
  CHECK(partial.training.k == 3);
  CHECK(partial.training.epochs == 2);
  CHECK(partial.mode == Mode::kRafBm25);
  CHECK_THROWS_AS(ExperimentConfig::from_json({{"mode", "lsi"}}), UsageError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(nlohmann::json::array()), UsageError);
  CHECK_THROWS_AS(ExperimentConfig::from_json({{"training", {{"k", "four"}}}}), UsageError);
  for (Mode m : {Mode::kJoint, Mode::kRafBm25, Mode::kRafFixedEncoder}) CHECK(parse_mode(mode_name(m)) == m);
}

TEST_CASE("joint run writes a complete checkpoint directory") {
  const fs::path dir = scratch("joint");
  const auto summary = train_to_dir(data(), tiny(Mode::kJoint), dir.string());
  for (const char* f : {"config.json", "train_log.jsonl", "best_epoch.json", "vocab.tsv", "base.jsonl",
                        "variant.json", "generator.bin", "generator.json", "retriever.bin",
                        "retriever.json", "index.bin"})
    CHECK_MESSAGE(fs::exists(dir / f), f);
  CHECK_FALSE(fs::exists(dir.string() + ".partial"));
  CHECK(summary.epoch_bleu.size() == 2);
  CHECK(summary.generator_hash_before != summary.generator_hash_after);

  auto sys = System::open(dir.string());
  CHECK(sys->manifest().retriever_kind == baseline::RetrieverKind::kJointDense);
  CHECK(sys->base().size() == data().splits.train.size());
  const auto& test = data().splits.test;
  const auto out = sys->evaluate({test.begin(), test.begin() + 5}, 2, &data().splits.templates);
  CHECK(out.report["config"]["samples"] == 5);
  CHECK(out.report["per_sample"].size() == 5);
  CHECK(out.report.contains("retrieval"));
  CHECK(std::count(out.predictions_jsonl.begin(), out.predictions_jsonl.end(), '\n') == 5);
  const auto p = sys->predict_code(test.front().code_raw, 2);
  CHECK(!p.exemplar.id.empty());
  CHECK_THROWS_AS(sys->predict_code("   ", 2), DataError);

  // A second run with the same seed reproduces log and predictions.
  const fs::path again = scratch("joint_again");
  train_to_dir(data(), tiny(Mode::kJoint), again.string());
  CHECK(read_file((dir / "train_log.jsonl").string()) == read_file((again / "train_log.jsonl").string()));
  auto sys2 = System::open(again.string());
  CHECK(sys2->evaluate({test.begin(), test.begin() + 5}, 2).predictions_jsonl ==
        sys->evaluate({test.begin(), test.begin() + 5}, 2).predictions_jsonl);
  fs::remove_all(dir);
  fs::remove_all(again);
}

TEST_CASE("baseline modes, warm starts and frozen generators") {
  const fs::path bm = scratch("bm25"), fe = scratch("fixed"), fr = scratch("frozen");
  train_to_dir(data(), tiny(Mode::kRafBm25), bm.string());
  CHECK_FALSE(fs::exists(bm / "retriever.bin"));
  CHECK(System::open(bm.string())->manifest().retriever_kind == baseline::RetrieverKind::kBm25);

  auto k1 = tiny(Mode::kRafBm25);
  k1.training.k = 1;
  CHECK_NOTHROW(k1.training.validate(false));
  auto joint_k1 = tiny(Mode::kJoint);
  joint_k1.training.k = 1;
  CHECK_THROWS_AS(train_to_dir(data(), joint_k1, scratch("k1").string()), UsageError);

  train_to_dir(data(), tiny(Mode::kRafFixedEncoder), fe.string());
  CHECK(fs::exists(fe / "plain.bin"));
  CHECK(System::open(fe.string())->manifest().retriever_kind == baseline::RetrieverKind::kFixedEncoder);

  auto frozen = tiny(Mode::kJoint);
  frozen.training.freeze_generator = true;
  frozen.generator_init = bm.string();
  const auto s = train_to_dir(data(), frozen, fr.string());
  CHECK(s.generator_hash_before == s.generator_hash_after);
  CHECK(read_file((fr / "generator.bin").string()) == read_file((bm / "generator.bin").string()));

  // Mixing the joint retriever with the baseline generator.
  const fs::path mix = bm / "mix.variant.json";
  baseline::VariantManifest m;
  m.retriever_kind = baseline::RetrieverKind::kJointDense;
  m.retriever_path = (fr / "retriever").string();
  m.generator_path = (bm / "generator").string();
  m.save(mix.string());
  auto sys = System::open(mix.string());
  CHECK(sys->manifest().retriever_kind == baseline::RetrieverKind::kJointDense);
  CHECK_NOTHROW(sys->predict(data().splits.test.front(), 2));

  CHECK_THROWS_AS(System::open((bm / "missing").string()), DataError);
  for (const auto& d : {bm, fe, fr}) fs::remove_all(d);
}

TEST_CASE("copy pre-training runs before the main stage unless a generator is given") {
  auto c = tiny(Mode::kRafBm25);
  c.training.copy_pretrain_epochs = 3;
  c.training.patience = 1;
  nn::Seq2SeqConfig gc;
  gc.net = c.model;
  gc.net.vocab_size = static_cast<int>(data().vocab.size());
  gc.max_source = c.training.budgets.total;
  gc.max_target = c.training.max_target;
  nn::Seq2SeqModel g(gc, 5);
  const auto before = g.params().hash();
  const auto r = baseline::copy_pretrain(c.training, data().splits, data().vocab, g);
  CHECK(r.epoch_bleu.size() == 3);
  CHECK(g.params().hash() != before);

  const fs::path with = scratch("copy"), warm = scratch("copy_warm");
  train_to_dir(data(), c, with.string());
  const std::string log = read_file((with / "copy_log.jsonl").string());
  CHECK(log.find("\"epoch\":3") != std::string::npos);
  CHECK(nlohmann::json::parse(read_file((with / "config.json").string()))["training"]
            ["copy_pretrain_epochs"] == 3);
  c.generator_init = with.string();
  train_to_dir(data(), c, warm.string());
  CHECK_FALSE(fs::exists(warm / "copy_log.jsonl"));

  c.training.copy_pretrain_epochs = -1;
  CHECK_THROWS_AS(c.training.validate(false), UsageError);
  c.training.copy_pretrain_epochs = 0;
  CHECK_THROWS_AS(baseline::copy_pretrain(c.training, data().splits, data().vocab, g), UsageError);
  fs::remove_all(with);
  fs::remove_all(warm);
}

TEST_CASE("comparisons attach paired p-values") {
  nlohmann::json a = {{"per_sample", nlohmann::json::array()}}, b = a;
  for (int i = 0; i < 6; ++i) {
    const std::string id = "s" + std::to_string(i);
    a["per_sample"].push_back({{"id", id}, {"sentence_bleu", 10.0 + i}, {"rouge_l", 1.0}, {"meteor", 2.0 * i}, {"cider", 0.5}});
    b["per_sample"].push_back({{"id", id}, {"sentence_bleu", 5.0}, {"rouge_l", 1.0}, {"meteor", i}, {"cider", 0.4}});
  }
  add_comparisons(a, {b}, {"other"});
  CHECK(a["comparisons"]["other"]["sentence_bleu"]["p_value"].get<double>() == doctest::Approx(2.0 / 64));
  CHECK(a["comparisons"]["other"]["rouge_l"]["p_value"].get<double>() == 1.0);
  CHECK(a["comparisons"]["other"]["sentence_bleu"]["pairs"] == 6);
  nlohmann::json c = {{"per_sample", {{{"id", "zz"}, {"sentence_bleu", 1.0}}}}};
  CHECK_THROWS_AS(add_comparisons(a, {c}, {"c"}), DataError);
}
