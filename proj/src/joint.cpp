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

#include "racg/joint.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "racg/common.hpp"
#include "racg/metrics.hpp"

namespace racg::train {

std::vector<double> softmax(std::span<const double> scores) {
  if (scores.empty()) return {};
  const double m = *std::max_element(scores.begin(), scores.end());
  std::vector<double> w(scores.size());
  double z = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) z += w[i] = std::exp(scores[i] - m);
  for (double& v : w) v /= z;
  return w;
}

JointLossBreakdown combine(std::span<const double> live_scores, std::span<const double> losses) {
  if (live_scores.size() != losses.size() || losses.empty())
    throw UsageError("scores and losses must be non-empty and equally long");
  JointLossBreakdown b;
  b.live_scores.assign(live_scores.begin(), live_scores.end());
  b.per_exemplar_losses.assign(losses.begin(), losses.end());
  b.weights = softmax(live_scores);
  for (std::size_t i = 0; i < losses.size(); ++i) b.total += b.weights[i] * losses[i];
  return b;
}

std::vector<double> loss_gradient_wrt_scores(const JointLossBreakdown& b) {
  std::vector<double> g(b.weights.size());
  for (std::size_t j = 0; j < g.size(); ++j)
    g[j] = b.weights[j] * (b.per_exemplar_losses[j] - b.total);
  return g;
}

double weight_entropy(std::span<const double> weights) {
  double h = 0.0;
  for (double w : weights)
    if (w > 0.0) h -= w * std::log(w);
  return h;
}

GenLossFn seq2seq_loss(nn::Seq2SeqModel& generator, const gen::Budgets& budgets) {
  return [&generator, budgets](nn::Graph& g, const CodeCommentPair& query,
                               const CodeCommentPair& exemplar) {
    gen::GenerationInput in = gen::build_input(query, exemplar, budgets);
    return gen::generation_loss(g, generator, in,
                                gen::make_target(query.comment_tokens,
                                                 generator.config().max_target));
  };
}

JointLoss joint_loss(nn::Graph& g, nn::EncoderModel& retriever, const GenLossFn& loss_fn,
                     const retrieval::SearchIndex& index,
                     const std::vector<CodeCommentPair>& base, const CodeCommentPair& sample,
                     int k) {
  if (base.size() < 2) throw DataError("joint training needs a base of at least two samples");
  if (static_cast<std::size_t>(index.size()) != base.size())
    throw UsageError("index does not cover the training base");
  nn::Var q = nn::l2_normalize_rows(retriever.encode(g, sample.code_tokens));
  auto cands = retrieval::retrieve_topk(index, q.value().row(0), k, sample.id);

  std::vector<nn::Var> scores, losses;
  for (const auto& c : cands) {
    const CodeCommentPair& ex = base[static_cast<std::size_t>(c.row)];
    nn::Var r = nn::l2_normalize_rows(retriever.encode(g, ex.code_tokens));
    scores.push_back(nn::dot(q, r));
    losses.push_back(loss_fn(g, sample, ex));
  }
  nn::Var w = nn::softmax_rows(nn::concat_cols(scores));
  nn::Var l = nn::concat_cols(losses);
  JointLoss out;
  out.total = nn::sum(nn::mul(w, l));
  auto& b = out.breakdown;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    b.exemplar_ids.push_back(cands[i].id);
    b.index_scores.push_back(cands[i].index_score);
    b.live_scores.push_back(scores[i].scalar());
    b.weights.push_back(w.value()(0, static_cast<Eigen::Index>(i)));
    b.per_exemplar_losses.push_back(losses[i].scalar());
  }
  b.total = out.total.scalar();
  return out;
}

// ---------------------------------------------------------------------------

void TrainingConfig::validate(bool retriever_trainable) const {
  if (k < 1) throw UsageError("k must be at least 1");
  if (retriever_trainable && k < 2)
    throw UsageError(
        "k must be at least 2 when the retriever is trained: with a single exemplar its "
        "weight is always 1 and the retriever receives no gradient");
  if (epochs < 1) throw UsageError("epochs must be at least 1");
  if (patience < 1) throw UsageError("patience must be at least 1");
  if (batch_size < 1) throw UsageError("batch size must be at least 1");
  if (grad_accum < 1) throw UsageError("gradient accumulation must be at least 1");
  if (beam < 1) throw UsageError("beam size must be at least 1");
  if (!(learning_rate > 0.0)) throw UsageError("learning rate must be positive");
  if (max_target < 2) throw UsageError("target budget must be at least 2");
  if (copy_pretrain_epochs < 0) throw UsageError("copy pre-training epochs must be non-negative");
}

nlohmann::json TrainingConfig::to_json() const {
  return {{"k", k},
          {"epochs", epochs},
          {"patience", patience},
          {"batch_size", batch_size},
          {"grad_accum", grad_accum},
          {"beam", beam},
          {"learning_rate", learning_rate},
          {"clip_norm", clip_norm},
          {"freeze_generator", freeze_generator},
          {"seed", seed},
          {"code_budget", budgets.code},
          {"comment_budget", budgets.comment},
          {"input_budget", budgets.total},
          {"max_target", max_target},
          {"val_limit", val_limit},
          {"copy_pretrain_epochs", copy_pretrain_epochs}};
}

TrainingConfig TrainingConfig::from_json(const nlohmann::json& j) {
  return from_json(j, TrainingConfig{});
}

TrainingConfig TrainingConfig::from_json(const nlohmann::json& j, TrainingConfig c) {
  try {
    c.k = j.value("k", c.k);
    c.epochs = j.value("epochs", c.epochs);
    c.patience = j.value("patience", c.patience);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.grad_accum = j.value("grad_accum", c.grad_accum);
    c.beam = j.value("beam", c.beam);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.clip_norm = j.value("clip_norm", c.clip_norm);
    c.freeze_generator = j.value("freeze_generator", c.freeze_generator);
    c.seed = j.value("seed", c.seed);
    c.budgets.code = j.value("code_budget", c.budgets.code);
    c.budgets.comment = j.value("comment_budget", c.budgets.comment);
    c.budgets.total = j.value("input_budget", c.budgets.total);
    c.max_target = j.value("max_target", c.max_target);
    c.val_limit = j.value("val_limit", c.val_limit);
    c.copy_pretrain_epochs = j.value("copy_pretrain_epochs", c.copy_pretrain_epochs);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("bad training config: ") + e.what());
  }
  return c;
}

bool EarlyStopper::observe(double score) {
  ++seen_;
  if (best_epoch_ == 0 || score > best_) {
    best_ = score;
    best_epoch_ = seen_;
    stale_ = 0;
  } else {
    ++stale_;
  }
  return stale_ >= patience_;
}

nlohmann::json LogRecord::to_json() const {
  nlohmann::json j = {{"step", step},
                      {"loss", loss},
                      {"weight_entropy", weight_entropy},
                      {"val_bleu", nullptr},
                      {"epoch", epoch}};
  if (val_bleu) j["val_bleu"] = *val_bleu;
  return j;
}

std::string log_to_jsonl(const std::vector<LogRecord>& log) {
  std::string out;
  for (const auto& r : log) out += r.to_json().dump() + "\n";
  return out;
}

std::vector<std::string> reference_words(const CodeCommentPair& sample) {
  std::string joined;
  for (const auto& w : corpus::lex(sample.comment_raw, corpus::LexMode::kComment)) {
    if (!joined.empty()) joined += ' ';
    joined += w;
  }
  return metrics::preprocess(joined);
}

std::vector<std::string> prediction_words(const corpus::TokenSeq& tokens,
                                          const corpus::Vocabulary& vocab) {
  return metrics::preprocess(corpus::detokenize(tokens, vocab));
}

Prediction predict(nn::EncoderModel& retriever, nn::Seq2SeqModel& generator,
                   const retrieval::SearchIndex& index, const std::vector<CodeCommentPair>& base,
                   const CodeCommentPair& query, int beam_size, const gen::Budgets& budgets,
                   int max_len) {
  if (index.size() == 0 || base.empty()) throw DataError("retrieval base is empty");
  nn::RowVector q = retrieval::normalize(retriever.encode_value(query.code_tokens));
  auto top = retrieval::retrieve_topk(index, q, 1);
  Prediction p;
  p.exemplar = top.front();
  const CodeCommentPair& ex = base.at(static_cast<std::size_t>(p.exemplar.row));
  p.tokens = gen::beam_decode(generator, gen::build_input(query, ex, budgets), beam_size, max_len);
  return p;
}

namespace {

double validation_bleu(nn::EncoderModel& retriever, nn::Seq2SeqModel& generator,
                       const retrieval::SearchIndex& index,
                       const std::vector<CodeCommentPair>& base,
                       const std::vector<CodeCommentPair>& valid, const TrainingConfig& config,
                       const corpus::Vocabulary& vocab) {
  std::vector<metrics::EvalPair> pairs;
  std::size_t n = valid.size();
  if (config.val_limit > 0) n = std::min(n, static_cast<std::size_t>(config.val_limit));
  for (std::size_t i = 0; i < n; ++i) {
    Prediction p = predict(retriever, generator, index, base, valid[i], config.beam,
                           config.budgets, config.max_target);
    pairs.push_back({prediction_words(p.tokens, vocab), reference_words(valid[i])});
  }
  return pairs.empty() ? 0.0 : metrics::corpus_bleu(pairs);
}

}  // namespace

TrainResult train(const TrainingConfig& config, const corpus::DatasetSplits& splits,
                  const corpus::Vocabulary& vocab, nn::EncoderModel& retriever,
                  nn::Seq2SeqModel& generator) {
  config.validate(true);
  const auto& base = splits.train;
  if (base.size() < 2) throw DataError("joint training needs at least two training samples");
  if (splits.validation.empty()) throw DataError("joint training needs a validation split");

  std::mt19937_64 rng(mix_seed(config.seed, 0x64726f70));
  retriever.set_dropout_enabled(true);
  generator.set_dropout_enabled(!config.freeze_generator);
  if (config.freeze_generator) generator.params().set_frozen(true);

  nn::OptimizerConfig oc;
  oc.learning_rate = config.learning_rate;
  oc.accumulation = config.grad_accum;
  oc.clip_norm = config.clip_norm;
  nn::Optimizer opt(oc);
  opt.attach(retriever.params());
  if (!config.freeze_generator) opt.attach(generator.params());
  retriever.params().zero_grad();
  generator.params().zero_grad();

  TrainResult result;
  result.index = retrieval::build_index(retriever, base, 0);
  const GenLossFn loss_fn = seq2seq_loss(generator, config.budgets);

  EarlyStopper stopper(config.patience);
  nn::ParamSet best_retriever = retriever.params();
  nn::ParamSet best_generator = generator.params();
  retrieval::SearchIndex best_index = result.index;

  std::set<std::string> touched;
  double loss_sum = 0.0, entropy_sum = 0.0;
  int sample_count = 0;
  int epoch = 0;

  auto after_update = [&]() {
    const std::int64_t step = opt.updates();
    retrieval::refresh_rows(result.index, retriever, base,
                            std::vector<std::string>(touched.begin(), touched.end()), step);
    touched.clear();
    LogRecord r;
    r.step = step;
    r.loss = loss_sum / sample_count;
    r.weight_entropy = entropy_sum / sample_count;
    r.epoch = epoch;
    result.log.push_back(r);
    loss_sum = entropy_sum = 0.0;
    sample_count = 0;
  };

  std::vector<std::size_t> order(base.size());
  for (epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffle_rng(mix_seed(config.seed, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[uniform_below(shuffle_rng, i)]);
    }
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const double inv = 1.0 / static_cast<double>(end - start);
      for (std::size_t b = start; b < end; ++b) {
        const CodeCommentPair& sample = base[order[b]];
        nn::Graph g(true, true, &rng);
        JointLoss jl = joint_loss(g, retriever, loss_fn, result.index, base, sample, config.k);
        if (!std::isfinite(jl.breakdown.total))
          throw NumericError("non-finite joint loss at sample " + sample.id);
        g.backward(jl.total, inv);
        loss_sum += jl.breakdown.total;
        entropy_sum += weight_entropy(jl.breakdown.weights);
        ++sample_count;
        touched.insert(jl.breakdown.exemplar_ids.begin(), jl.breakdown.exemplar_ids.end());
      }
      if (opt.step()) after_update();
    }
    if (opt.flush()) after_update();

    retrieval::refresh_full(result.index, retriever, base, opt.updates());
    const double bleu = validation_bleu(retriever, generator, result.index, base,
                                        splits.validation, config, vocab);
    result.epoch_bleu.push_back(bleu);
    if (!result.log.empty()) result.log.back().val_bleu = bleu;
    const bool stop = stopper.observe(bleu);
    if (stopper.best_epoch() == epoch) {
      best_retriever.copy_values_from(retriever.params());
      best_generator.copy_values_from(generator.params());
      best_index = result.index;
    }
    if (stop) break;
  }

  retriever.params().copy_values_from(best_retriever);
  generator.params().copy_values_from(best_generator);
  result.index = std::move(best_index);
  result.best_epoch = stopper.best_epoch();
  result.best_bleu = stopper.best_score();
  retriever.set_dropout_enabled(true);
  generator.set_dropout_enabled(true);
  if (config.freeze_generator) generator.params().set_frozen(false);
  return result;
}

}  // namespace racg::train
