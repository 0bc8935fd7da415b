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

// racg command-line tool: prepare, train, eval, predict.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "racg/racg.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Carries a status out of nested helpers.
struct Failure {
  int code;
  std::string message;
};

void check(racg_status s) {
  if (s != RACG_OK) throw Failure{s == RACG_ERR_INTERNAL ? 2 : static_cast<int>(s), racg_last_error()};
}

std::string take(char* s) {
  std::string out = s ? s : "";
  racg_free_string(s);
  return out;
}

struct Dataset {
  racg_dataset* p = nullptr;
  ~Dataset() { racg_dataset_free(p); }
};

struct System {
  racg_system* p = nullptr;
  ~System() { racg_system_free(p); }
};

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{2, "cannot open " + path};
  return std::string(std::istreambuf_iterator<char>(in), {});
}

json read_json(const std::string& path) {
  auto j = json::parse(read_text(path), nullptr, false);
  if (j.is_discarded()) throw Failure{2, path + " is not valid JSON"};
  return j;
}

// Writes next to the target and renames into place.
void write_text(const std::string& path, const std::string& text) {
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Failure{2, "cannot write " + path};
    out << text;
    if (!out.flush()) throw Failure{2, "cannot write " + path};
  }
  fs::rename(tmp, p);
}

void replace_dir(const fs::path& stage, const fs::path& dir) {
  if (fs::exists(dir)) fs::remove_all(dir);
  fs::rename(stage, dir);
}

fs::path staging_for(const std::string& out) {
  fs::path dir = fs::path(out).lexically_normal();
  if (dir.filename().empty()) dir = dir.parent_path();
  fs::path stage = dir;
  stage += ".partial";
  fs::remove_all(stage);
  fs::create_directories(stage);
  return stage;
}

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  json j = read_json(path);
  if (!j.is_object()) throw Failure{1, "config file must hold a JSON object"};
  return j;
}

// ---------------------------------------------------------------------------

struct PrepareArgs {
  std::vector<int> synthetic;
  std::string train, valid, test, out, config;
  std::uint64_t seed = 1;
  int min_freq = 1;
};

int cmd_prepare(const PrepareArgs& a, const CLI::App& app) {
  json cfg = load_config(a.config).value("prepare", json::object());
  std::uint64_t seed = app.count("--seed") ? a.seed : cfg.value("seed", a.seed);
  int min_freq = app.count("--min-freq") ? a.min_freq : cfg.value("min_freq", a.min_freq);
  std::vector<int> synth = a.synthetic;
  if (synth.empty() && cfg.contains("synthetic")) synth = cfg["synthetic"].get<std::vector<int>>();
  std::string train = !a.train.empty() ? a.train : cfg.value("train", "");
  std::string valid = !a.valid.empty() ? a.valid : cfg.value("valid", "");
  std::string test = !a.test.empty() ? a.test : cfg.value("test", "");
  std::string out = !a.out.empty() ? a.out : cfg.value("out", "");
  if (out.empty()) throw Failure{1, "prepare needs --out"};

  Dataset ds;
  json resolved = {{"seed", seed}, {"min_freq", min_freq}, {"out", out}};
  if (!synth.empty()) {
    if (synth.size() != 2) throw Failure{1, "--synthetic takes TEMPLATES SAMPLES"};
    check(racg_dataset_synthetic(synth[0], synth[1], seed, &ds.p));
    resolved["synthetic"] = synth;
  } else {
    if (train.empty() || valid.empty() || test.empty())
      throw Failure{1, "prepare needs --synthetic T S or all of --train, --valid and --test"};
    check(racg_dataset_from_files(train.c_str(), valid.c_str(), test.c_str(), min_freq, &ds.p));
    resolved["train"] = train;
    resolved["valid"] = valid;
    resolved["test"] = test;
  }
  fs::path stage = staging_for(out);
  check(racg_dataset_save(ds.p, stage.string().c_str()));
  write_text((stage / "config.json").string(), json{{"prepare", resolved}}.dump(2) + "\n");
  replace_dir(stage, fs::path(out).lexically_normal());
  char* info = nullptr;
  check(racg_dataset_info(ds.p, &info));
  std::cout << take(info) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string data, out, config, mode = "joint", generator_init, retriever_init;
  std::uint64_t seed = 1;
  int k = 4, epochs = 10, patience = 2, batch_size = 8, grad_accum = 4, beam = 10, val_limit = 0,
      copy_pretrain = 0;
  double lr = 3e-4;
  bool freeze_generator = false;
};

int cmd_train(const TrainArgs& a, const CLI::App& app) {
  json cfg = load_config(a.config);
  json& t = cfg["training"];
  if (!t.is_object()) t = json::object();
  auto set = [&](const char* flag, const char* key, auto value) {
    if (app.count(flag)) t[key] = value;
  };
  set("--k", "k", a.k);
  set("--epochs", "epochs", a.epochs);
  set("--patience", "patience", a.patience);
  set("--batch-size", "batch_size", a.batch_size);
  set("--grad-accum", "grad_accum", a.grad_accum);
  set("--beam", "beam", a.beam);
  set("--lr", "learning_rate", a.lr);
  set("--seed", "seed", a.seed);
  set("--val-limit", "val_limit", a.val_limit);
  set("--copy-pretrain", "copy_pretrain_epochs", a.copy_pretrain);
  if (a.freeze_generator) t["freeze_generator"] = true;
  if (app.count("--mode")) cfg["mode"] = a.mode;
  if (app.count("--data")) cfg["data"] = a.data;
  if (app.count("--generator-init")) cfg["generator_init"] = a.generator_init;
  if (app.count("--retriever-init")) cfg["retriever_init"] = a.retriever_init;
  std::string out = !a.out.empty() ? a.out : cfg.value("out", "");
  cfg.erase("out");
  const std::string data = cfg.value("data", "");
  if (data.empty()) throw Failure{1, "train needs --data"};
  if (out.empty()) throw Failure{1, "train needs --out"};

  Dataset ds;
  check(racg_dataset_open(data.c_str(), &ds.p));
  char* summary = nullptr;
  check(racg_train(ds.p, cfg.dump().c_str(), out.c_str(), &summary));
  json s = json::parse(take(summary));
  if (cfg["training"].value("freeze_generator", false)) {
    if (s["generator_hash_before"] != s["generator_hash_after"])
      throw Failure{2, "generator parameters changed in frozen-generator mode"};
    std::cerr << "generator unchanged: " << s["generator_hash_after"].get<std::string>() << "\n";
  }
  std::cout << s.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string ckpt, manifest, data, split = "test", out, dump, sweep_root, config;
  std::vector<std::string> compare, baselines;
  std::vector<int> k_sweep;
  int beam = 10;
  std::uint64_t seed = 1;
  bool ablate = false;
};

std::string data_of(const std::string& ckpt_dir, const std::string& given) {
  if (!given.empty()) return given;
  fs::path cfg = fs::path(ckpt_dir) / "config.json";
  if (fs::exists(cfg)) {
    std::string d = read_json(cfg.string()).value("data", "");
    if (!d.empty()) return d;
  }
  throw Failure{1, "eval needs --data (the checkpoint does not record its dataset)"};
}

json evaluate_one(const std::string& path, racg_dataset* ds, const std::string& split, int beam,
                  std::string* predictions) {
  System sys;
  check(racg_system_open(path.c_str(), &sys.p));
  char* report = nullptr;
  char* preds = nullptr;
  check(racg_evaluate(sys.p, ds, split.c_str(), beam, &report, predictions ? &preds : nullptr));
  if (predictions) *predictions = take(preds);
  return json::parse(take(report));
}

json summary_row(const json& report) {
  json row = report.at("scores");
  if (report.contains("retrieval")) row["same_template_p1"] = report["retrieval"]["same_template_p1"];
  return row;
}

int cmd_eval(EvalArgs a, const CLI::App& app) {
  json cfg = load_config(a.config).value("eval", json::object());
  if (!app.count("--beam")) a.beam = cfg.value("beam", a.beam);
  if (a.data.empty()) a.data = cfg.value("data", "");
  if (a.out.empty()) a.out = cfg.value("out", "");
  const int modes = (!a.k_sweep.empty()) + a.ablate;
  if (modes > 1) throw Failure{1, "--ablate-matrix and --k-sweep are exclusive"};

  if (!a.k_sweep.empty()) {
    if (a.k_sweep.size() != 2 || a.k_sweep[0] > a.k_sweep[1])
      throw Failure{1, "--k-sweep takes LO HI"};
    if (a.sweep_root.empty()) throw Failure{1, "--k-sweep needs --sweep-root"};
    if (a.out.empty()) throw Failure{1, "--k-sweep needs --out"};
    json table = json::array();
    Dataset ds;
    std::string first = (fs::path(a.sweep_root) / ("k" + std::to_string(a.k_sweep[0]))).string();
    check(racg_dataset_open(data_of(first, a.data).c_str(), &ds.p));
    fs::path stage = staging_for(a.out);
    for (int k = a.k_sweep[0]; k <= a.k_sweep[1]; ++k) {
      fs::path dir = fs::path(a.sweep_root) / ("k" + std::to_string(k));
      json report = evaluate_one(dir.string(), ds.p, a.split, a.beam, nullptr);
      write_text((stage / ("k" + std::to_string(k) + ".json")).string(), report.dump(2) + "\n");
      json best = read_json((dir / "best_epoch.json").string());
      json row = summary_row(report);
      row["k"] = k;
      row["best_val_bleu"] = best["best_val_bleu"];
      table.push_back(row);
      std::cout << "k=" << k << " " << row.dump() << "\n";
    }
    write_text((stage / "sweep.json").string(), table.dump(2) + "\n");
    replace_dir(stage, fs::path(a.out).lexically_normal());
    return 0;
  }

  if (a.ablate) {
    if (a.ckpt.empty()) throw Failure{1, "--ablate-matrix needs --ckpt (a joint checkpoint)"};
    if (a.out.empty()) throw Failure{1, "--ablate-matrix needs --out"};
    Dataset ds;
    check(racg_dataset_open(data_of(a.ckpt, a.data).c_str(), &ds.p));
    const fs::path joint = fs::absolute(a.ckpt);
    struct Retr {
      std::string name, kind, path;
    };
    struct Gen {
      std::string name, path;
    };
    std::vector<Retr> retrievers = {{"joint", "joint-dense", (joint / "retriever").string()},
                                    {"bm25", "bm25", ""},
                                    {"random", "random", ""}};
    std::vector<Gen> generators = {{"joint", (joint / "generator").string()}};
    for (const auto& b : a.baselines) {
      const fs::path dir = fs::absolute(b);
      json v = read_json((dir / "variant.json").string());
      std::string name = dir.filename().string();
      generators.push_back({name, (dir / "generator").string()});
      if (v.value("retriever_kind", "") == "fixed-encoder")
        retrievers.push_back({"fixed-encoder", "fixed-encoder", (dir / "retriever").string()});
    }
    fs::path stage = staging_for(a.out);
    json matrix = json::array();
    for (const auto& r : retrievers) {
      for (const auto& g : generators) {
        const std::string cell = r.name + "__" + g.name;
        const std::string manifest = (stage / (cell + ".variant.json")).string();
        check(racg_write_variant(manifest.c_str(), r.kind.c_str(),
                                 r.path.empty() ? nullptr : r.path.c_str(), g.path.c_str(),
                                 a.seed));
        json report = evaluate_one(manifest, ds.p, a.split, a.beam, nullptr);
        write_text((stage / (cell + ".json")).string(), report.dump(2) + "\n");
        json row = summary_row(report);
        row["retriever"] = r.name;
        row["generator"] = g.name;
        matrix.push_back(row);
        std::cout << cell << " " << row.dump() << "\n";
      }
    }
    write_text((stage / "matrix.json").string(), matrix.dump(2) + "\n");
    replace_dir(stage, fs::path(a.out).lexically_normal());
    return 0;
  }

  if (a.ckpt.empty() == a.manifest.empty()) throw Failure{1, "eval needs exactly one of --ckpt or --manifest"};
  const std::string path = a.ckpt.empty() ? a.manifest : a.ckpt;
  std::string data = a.data;
  if (data.empty()) {
    fs::path gen_dir = a.ckpt;
    if (gen_dir.empty()) {
      json v = read_json(a.manifest);
      fs::path g(v.value("generator_path", ""));
      gen_dir = (g.is_absolute() ? g : fs::path(a.manifest).parent_path() / g).parent_path();
    }
    data = data_of(gen_dir.string(), "");
  }
  Dataset ds;
  check(racg_dataset_open(data.c_str(), &ds.p));
  std::string predictions;
  json report = evaluate_one(path, ds.p, a.split, a.beam, a.dump.empty() ? nullptr : &predictions);
  if (!a.compare.empty()) {
    json others = json::array();
    for (const auto& c : a.compare) others.push_back({{"name", c}, {"report", read_json(c)}});
    char* merged = nullptr;
    check(racg_compare_reports(report.dump().c_str(), others.dump().c_str(), &merged));
    report = json::parse(take(merged));
  }
  if (!a.dump.empty()) write_text(a.dump, predictions);
  if (!a.out.empty()) write_text(a.out, report.dump(2) + "\n");
  json brief = summary_row(report);
  if (report.contains("comparisons")) brief["comparisons"] = report["comparisons"];
  std::cout << brief.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct PredictArgs {
  std::string ckpt, manifest, input, config, out;
  int beam = 10;
  std::uint64_t seed = 1;
  bool show_exemplar = false;
};

int cmd_predict(PredictArgs a, const CLI::App& app) {
  json cfg = load_config(a.config).value("predict", json::object());
  if (!app.count("--beam")) a.beam = cfg.value("beam", a.beam);
  if (a.ckpt.empty() == a.manifest.empty())
    throw Failure{1, "predict needs exactly one of --ckpt or --manifest"};
  std::string code;
  if (a.input.empty() || a.input == "-") {
    code.assign(std::istreambuf_iterator<char>(std::cin), {});
  } else {
    code = read_text(a.input);
  }
  System sys;
  check(racg_system_open((a.ckpt.empty() ? a.manifest : a.ckpt).c_str(), &sys.p));
  char* result = nullptr;
  check(racg_predict(sys.p, code.c_str(), a.beam, &result));
  json r = json::parse(take(result));
  std::ostringstream text;
  text << "exemplar: " << r["exemplar_id"].get<std::string>() << " score "
       << r["exemplar_score"].get<double>() << "\n";
  if (a.show_exemplar) text << "exemplar comment: " << r["exemplar_comment"].get<std::string>() << "\n";
  text << "prediction: " << r["prediction"].get<std::string>() << "\n";
  std::cout << text.str();
  if (!a.out.empty()) write_text(a.out, r.dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Retrieval-augmented code comment generation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(racg_version()));

  PrepareArgs pa;
  auto* prepare = app.add_subcommand("prepare", "Build a dataset directory");
  prepare->add_option("--synthetic", pa.synthetic, "Generate TEMPLATES SAMPLES_PER_TEMPLATE")->expected(2);
  prepare->add_option("--train", pa.train, "Training records (.jsonl)");
  prepare->add_option("--valid", pa.valid, "Validation records (.jsonl)");
  prepare->add_option("--test", pa.test, "Test records (.jsonl)");
  prepare->add_option("--min-freq", pa.min_freq, "Vocabulary frequency cutoff");
  prepare->add_option("--seed", pa.seed, "Root seed");
  prepare->add_option("--out", pa.out, "Output directory");
  prepare->add_option("--config", pa.config, "JSON config file");

  TrainArgs ta;
  auto* trainc = app.add_subcommand("train", "Train a system into a checkpoint directory");
  trainc->add_option("--data", ta.data, "Prepared dataset directory");
  trainc->add_option("--mode", ta.mode, "joint, raf-bm25 or raf-fixed-encoder");
  trainc->add_option("--k", ta.k, "Exemplars per training sample");
  trainc->add_option("--epochs", ta.epochs, "Maximum epochs");
  trainc->add_option("--patience", ta.patience, "Early-stopping patience in epochs");
  trainc->add_option("--batch-size", ta.batch_size, "Samples per micro-batch");
  trainc->add_option("--grad-accum", ta.grad_accum, "Micro-batches per update");
  trainc->add_option("--beam", ta.beam, "Validation beam size");
  trainc->add_option("--lr", ta.lr, "Learning rate");
  trainc->add_option("--val-limit", ta.val_limit, "Validation samples per epoch (0 = all)");
  trainc->add_option("--copy-pretrain", ta.copy_pretrain,
                     "Self-exemplar generator pre-training epochs");
  trainc->add_flag("--freeze-generator", ta.freeze_generator, "Train only the retriever");
  trainc->add_option("--generator-init", ta.generator_init, "Checkpoint directory to start the generator from");
  trainc->add_option("--retriever-init", ta.retriever_init, "Checkpoint directory to start the retriever from");
  trainc->add_option("--seed", ta.seed, "Root seed");
  trainc->add_option("--out", ta.out, "Output directory");
  trainc->add_option("--config", ta.config, "JSON config file");

  EvalArgs ea;
  auto* evalc = app.add_subcommand("eval", "Decode a split and compute metrics");
  evalc->add_option("--ckpt", ea.ckpt, "Checkpoint directory");
  evalc->add_option("--manifest", ea.manifest, "Variant manifest file");
  evalc->add_option("--data", ea.data, "Prepared dataset directory");
  evalc->add_option("--split", ea.split, "train, validation or test");
  evalc->add_option("--beam", ea.beam, "Beam size");
  evalc->add_option("--dump", ea.dump, "Prediction dump (.jsonl)");
  evalc->add_option("--compare", ea.compare, "Other report files to test against");
  evalc->add_flag("--ablate-matrix", ea.ablate, "Evaluate every retriever x generator cell");
  evalc->add_option("--baseline", ea.baselines, "Baseline checkpoint directories for the matrix");
  evalc->add_option("--k-sweep", ea.k_sweep, "LO HI")->expected(2);
  evalc->add_option("--sweep-root", ea.sweep_root, "Directory holding k<K> checkpoints");
  evalc->add_option("--seed", ea.seed, "Seed of the random retriever");
  evalc->add_option("--out", ea.out, "Report file (directory for matrix and sweep)");
  evalc->add_option("--config", ea.config, "JSON config file");

  PredictArgs pr;
  auto* predictc = app.add_subcommand("predict", "Comment one code snippet");
  predictc->add_option("--ckpt", pr.ckpt, "Checkpoint directory");
  predictc->add_option("--manifest", pr.manifest, "Variant manifest file");
  predictc->add_option("--input", pr.input, "Code file (default: standard input)");
  predictc->add_option("--beam", pr.beam, "Beam size");
  predictc->add_flag("--show-exemplar", pr.show_exemplar, "Print the exemplar comment first");
  predictc->add_option("--seed", pr.seed, "Unused; accepted for uniformity");
  predictc->add_option("--out", pr.out, "Also write the result as JSON");
  predictc->add_option("--config", pr.config, "JSON config file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  try {
    if (*prepare) return cmd_prepare(pa, *prepare);
    if (*trainc) return cmd_train(ta, *trainc);
    if (*evalc) return cmd_eval(ea, *evalc);
    if (*predictc) return cmd_predict(pr, *predictc);
  } catch (const Failure& f) {
    std::cerr << "racg: " << f.message << "\n";
    return f.code;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "racg: " << e.what() << "\n";
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "racg: malformed JSON: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
