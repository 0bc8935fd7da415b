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

#include "racg/neural.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>

#include "racg/common.hpp"

namespace racg::nn {

// ---------------------------------------------------------------------------
// ParamSet

ParamSet::ParamSet(const ParamSet& other) { *this = other; }

ParamSet& ParamSet::operator=(const ParamSet& other) {
  if (this == &other) return *this;
  params_.clear();
  index_.clear();
  for (const auto& p : other.params_) {
    Parameter& q = add(p->name, p->value);
    q.frozen = p->frozen;
  }
  return *this;
}

Parameter& ParamSet::add(const std::string& name, Matrix value) {
  if (index_.count(name)) throw UsageError("duplicate parameter name: " + name);
  index_[name] = params_.size();
  params_.push_back(std::make_unique<Parameter>(name, std::move(value)));
  return *params_.back();
}

Parameter& ParamSet::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw UsageError("unknown parameter: " + name);
  return *params_[it->second];
}

const Parameter& ParamSet::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw UsageError("unknown parameter: " + name);
  return *params_[it->second];
}

std::vector<Parameter*> ParamSet::all() {
  std::vector<Parameter*> out;
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParamSet::all() const {
  std::vector<const Parameter*> out;
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
  return n;
}

void ParamSet::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

void ParamSet::set_frozen(bool frozen) {
  for (auto& p : params_) p->frozen = frozen;
}

void ParamSet::copy_values_from(const ParamSet& other) {
  for (auto& p : params_) {
    const Parameter& q = other.get(p->name);
    if (q.value.rows() != p->value.rows() || q.value.cols() != p->value.cols())
      throw UsageError("shape mismatch copying parameter " + p->name);
    p->value = q.value;
  }
}

std::uint64_t ParamSet::hash() const {
  Fnv1a h;
  for (const auto& p : params_) {
    h.update(p->name);
    std::int64_t shape[2] = {p->value.rows(), p->value.cols()};
    h.update(shape, sizeof(shape));
    h.update(p->value.data(), sizeof(double) * static_cast<std::size_t>(p->value.size()));
  }
  return h.digest();
}

namespace {

constexpr char kTensorMagic[8] = {'R', 'A', 'C', 'G', 'T', 'N', 'S', '1'};

template <typename T>
void put(std::string& out, const T& v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::string_view bytes, std::size_t& pos) {
  if (pos + sizeof(T) > bytes.size()) throw DataError("truncated tensor archive");
  T v;
  std::memcpy(&v, bytes.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

std::string ParamSet::serialize() const {
  std::string out(kTensorMagic, sizeof(kTensorMagic));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params_.size()));
  for (const auto& p : params_) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p->name.size()));
    out += p->name;
    put<std::uint64_t>(out, static_cast<std::uint64_t>(p->value.rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(p->value.cols()));
    out.append(reinterpret_cast<const char*>(p->value.data()),
               sizeof(double) * static_cast<std::size_t>(p->value.size()));
  }
  return out;
}

void ParamSet::deserialize(std::string_view bytes) {
  if (bytes.size() < sizeof(kTensorMagic) ||
      std::memcmp(bytes.data(), kTensorMagic, sizeof(kTensorMagic)) != 0)
    throw DataError("not a tensor archive");
  std::size_t pos = sizeof(kTensorMagic);
  auto count = take<std::uint32_t>(bytes, pos);
  if (count != params_.size())
    throw DataError("tensor archive has " + std::to_string(count) + " tensors, model expects " +
                    std::to_string(params_.size()));
  for (std::uint32_t i = 0; i < count; ++i) {
    auto len = take<std::uint32_t>(bytes, pos);
    if (pos + len > bytes.size()) throw DataError("truncated tensor archive");
    std::string name(bytes.substr(pos, len));
    pos += len;
    auto rows = take<std::uint64_t>(bytes, pos);
    auto cols = take<std::uint64_t>(bytes, pos);
    Parameter& p = get(name);
    if (static_cast<std::uint64_t>(p.value.rows()) != rows ||
        static_cast<std::uint64_t>(p.value.cols()) != cols)
      throw DataError("shape mismatch for tensor " + name);
    std::size_t nbytes = sizeof(double) * rows * cols;
    if (pos + nbytes > bytes.size()) throw DataError("truncated tensor archive");
    std::memcpy(p.value.data(), bytes.data() + pos, nbytes);
    pos += nbytes;
  }
}

// ---------------------------------------------------------------------------
// Configs

nlohmann::json TransformerConfig::to_json() const {
  return {{"vocab_size", vocab_size}, {"hidden", hidden}, {"layers", layers},
          {"heads", heads},           {"ff", ff},         {"dropout", dropout}};
}

TransformerConfig TransformerConfig::from_json(const nlohmann::json& j) {
  TransformerConfig c;
  c.vocab_size = j.at("vocab_size").get<int>();
  c.hidden = j.at("hidden").get<int>();
  c.layers = j.at("layers").get<int>();
  c.heads = j.at("heads").get<int>();
  c.ff = j.at("ff").get<int>();
  c.dropout = j.at("dropout").get<double>();
  return c;
}

nlohmann::json EncoderConfig::to_json() const {
  auto j = net.to_json();
  j["max_tokens"] = max_tokens;
  return j;
}

EncoderConfig EncoderConfig::from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.net = TransformerConfig::from_json(j);
  c.max_tokens = j.at("max_tokens").get<int>();
  return c;
}

nlohmann::json Seq2SeqConfig::to_json() const {
  auto j = net.to_json();
  j["max_source"] = max_source;
  j["max_target"] = max_target;
  j["start_id"] = start_id;
  j["eos_id"] = eos_id;
  return j;
}

Seq2SeqConfig Seq2SeqConfig::from_json(const nlohmann::json& j) {
  Seq2SeqConfig c;
  c.net = TransformerConfig::from_json(j);
  c.max_source = j.at("max_source").get<int>();
  c.max_target = j.at("max_target").get<int>();
  c.start_id = j.at("start_id").get<TokenId>();
  c.eos_id = j.at("eos_id").get<TokenId>();
  return c;
}

Matrix Initializer::normal(Eigen::Index rows, Eigen::Index cols, double stddev) {
  Matrix m(rows, cols);
  constexpr double kTwoPi = 6.283185307179586;
  for (Eigen::Index i = 0; i < m.size(); i += 2) {
    double u1 = (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53;
    double u2 = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    double r = std::sqrt(-2.0 * std::log(u1));
    m.data()[i] = stddev * r * std::cos(kTwoPi * u2);
    if (i + 1 < m.size()) m.data()[i + 1] = stddev * r * std::sin(kTwoPi * u2);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Building blocks

namespace {

void add_linear(ParamSet& ps, const std::string& name, int in, int out,
                Initializer& init, double gain = 1.0) {
  ps.add(name + ".w", init.normal(in, out, gain / std::sqrt(static_cast<double>(in))));
  ps.add(name + ".b", Matrix::Zero(1, out));
}

void add_norm(ParamSet& ps, const std::string& name, int d) {
  ps.add(name + ".g", Matrix::Ones(1, d));
  ps.add(name + ".b", Matrix::Zero(1, d));
}

void add_attention(ParamSet& ps, const std::string& name, int d, Initializer& init,
                   double out_gain) {
  add_linear(ps, name + ".q", d, d, init);
  add_linear(ps, name + ".k", d, d, init);
  add_linear(ps, name + ".v", d, d, init);
  add_linear(ps, name + ".o", d, d, init, out_gain);
}

Var linear(Graph& g, ParamSet& ps, const std::string& name, Var x) {
  return add_row(matmul(x, g.param(ps.get(name + ".w"))), g.param(ps.get(name + ".b")));
}

Var norm(Graph& g, ParamSet& ps, const std::string& name, Var x) {
  return layer_norm(x, g.param(ps.get(name + ".g")), g.param(ps.get(name + ".b")));
}

Var attention(Graph& g, ParamSet& ps, const std::string& name, Var query_in, Var kv_in,
              const TransformerConfig& c, bool causal) {
  Var q = linear(g, ps, name + ".q", query_in);
  Var k = linear(g, ps, name + ".k", kv_in);
  Var v = linear(g, ps, name + ".v", kv_in);
  const int dh = c.hidden / c.heads;
  const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Var> heads;
  heads.reserve(static_cast<std::size_t>(c.heads));
  for (int h = 0; h < c.heads; ++h) {
    Var qh = slice_cols(q, h * dh, dh);
    Var kh = slice_cols(k, h * dh, dh);
    Var vh = slice_cols(v, h * dh, dh);
    Var att = softmax_rows(scale(matmul_nt(qh, kh), inv), causal);
    att = dropout(att, c.dropout);
    heads.push_back(matmul(att, vh));
  }
  return linear(g, ps, name + ".o", concat_cols(heads));
}

Var feed_forward(Graph& g, ParamSet& ps, const std::string& name, Var x,
                 const TransformerConfig& c) {
  Var h = gelu(linear(g, ps, name + ".in", x));
  h = dropout(h, c.dropout);
  return linear(g, ps, name + ".out", h);
}

double out_gain(const TransformerConfig& c) {
  return 1.0 / std::sqrt(2.0 * static_cast<double>(std::max(1, c.layers)));
}

void check_config(const TransformerConfig& c) {
  if (c.vocab_size <= 0 || c.hidden <= 0 || c.layers <= 0 || c.heads <= 0 || c.ff <= 0 ||
      c.hidden % c.heads != 0)
    throw UsageError("invalid transformer configuration");
}

Var embed(Graph& g, ParamSet& ps, const std::string& table, const std::string& pos,
          std::span<const TokenId> ids, const TransformerConfig& c) {
  Var tok = gather_rows(g.param(ps.get(table)), ids);
  std::vector<std::int32_t> positions(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) positions[i] = static_cast<std::int32_t>(i);
  Var p = gather_rows(g.param(ps.get(pos)), positions);
  return dropout(add(tok, p), c.dropout);
}

}  // namespace

void add_encoder_stack(ParamSet& ps, const std::string& prefix, const TransformerConfig& c,
                       Initializer& init) {
  for (int l = 0; l < c.layers; ++l) {
    const std::string n = prefix + ".layer" + std::to_string(l);
    add_norm(ps, n + ".ln1", c.hidden);
    add_attention(ps, n + ".attn", c.hidden, init, out_gain(c));
    add_norm(ps, n + ".ln2", c.hidden);
    add_linear(ps, n + ".ff.in", c.hidden, c.ff, init);
    add_linear(ps, n + ".ff.out", c.ff, c.hidden, init, out_gain(c));
  }
  add_norm(ps, prefix + ".ln_f", c.hidden);
}

Var run_encoder_stack(Graph& g, ParamSet& ps, const std::string& prefix,
                      const TransformerConfig& c, Var x) {
  for (int l = 0; l < c.layers; ++l) {
    const std::string n = prefix + ".layer" + std::to_string(l);
    Var h = norm(g, ps, n + ".ln1", x);
    x = add(x, dropout(attention(g, ps, n + ".attn", h, h, c, false), c.dropout));
    h = norm(g, ps, n + ".ln2", x);
    x = add(x, dropout(feed_forward(g, ps, n + ".ff", h, c), c.dropout));
  }
  return norm(g, ps, prefix + ".ln_f", x);
}

// ---------------------------------------------------------------------------
// EncoderModel

EncoderModel::EncoderModel(const EncoderConfig& config, std::uint64_t seed)
    : config_(config) {
  check_config(config.net);
  if (config.max_tokens < 1) throw UsageError("encoder max_tokens must be positive");
  Initializer init(seed);
  const auto& c = config.net;
  params_.add("tok_emb", init.normal(c.vocab_size, c.hidden, 0.1));
  params_.add("pos_emb", init.normal(config.max_tokens + 1, c.hidden, 0.1));
  add_encoder_stack(params_, "enc", c, init);
}

Var EncoderModel::encode(Graph& g, std::span<const TokenId> tokens) {
  if (tokens.empty()) throw DataError("encode: empty token sequence");
  const std::size_t n = std::min(tokens.size(), static_cast<std::size_t>(config_.max_tokens));
  std::vector<TokenId> ids;
  ids.reserve(n + 1);
  ids.push_back(corpus::Special::kCls);
  ids.insert(ids.end(), tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(n));
  TransformerConfig c = config_.net;
  if (!dropout_enabled_) c.dropout = 0.0;
  Var x = embed(g, params_, "tok_emb", "pos_emb", ids, c);
  Var h = run_encoder_stack(g, params_, "enc", c, x);
  return slice_rows(h, 0, 1);
}

RowVector EncoderModel::encode_value(std::span<const TokenId> tokens) {
  Graph g(false, false);
  return encode(g, tokens).value().row(0);
}

// ---------------------------------------------------------------------------
// Seq2SeqModel

Seq2SeqModel::Seq2SeqModel(const Seq2SeqConfig& config, std::uint64_t seed)
    : config_(config) {
  check_config(config.net);
  const auto& c = config.net;
  if (config.start_id < 0 || config.start_id >= c.vocab_size || config.eos_id < 0 ||
      config.eos_id >= c.vocab_size)
    throw UsageError("start/end ids outside the generator vocabulary");
  Initializer init(seed);
  params_.add("emb", init.normal(c.vocab_size, c.hidden, 0.1));
  params_.add("src_pos", init.normal(config.max_source, c.hidden, 0.1));
  params_.add("tgt_pos", init.normal(config.max_target, c.hidden, 0.1));
  add_encoder_stack(params_, "enc", c, init);
  for (int l = 0; l < c.layers; ++l) {
    const std::string n = "dec.layer" + std::to_string(l);
    add_norm(params_, n + ".ln1", c.hidden);
    add_attention(params_, n + ".self", c.hidden, init, out_gain(c));
    add_norm(params_, n + ".ln2", c.hidden);
    add_attention(params_, n + ".cross", c.hidden, init, out_gain(c));
    add_norm(params_, n + ".ln3", c.hidden);
    add_linear(params_, n + ".ff.in", c.hidden, c.ff, init);
    add_linear(params_, n + ".ff.out", c.ff, c.hidden, init, out_gain(c));
  }
  add_norm(params_, "dec.ln_f", c.hidden);
  params_.add("out_bias", Matrix::Zero(1, c.vocab_size));
}

Var Seq2SeqModel::encode_source(Graph& g, std::span<const TokenId> source) {
  if (source.empty()) throw DataError("generator source is empty");
  const std::size_t n = std::min(source.size(), static_cast<std::size_t>(config_.max_source));
  const TransformerConfig c = effective();
  Var x = embed(g, params_, "emb", "src_pos", source.first(n), c);
  return run_encoder_stack(g, params_, "enc", c, x);
}

TransformerConfig Seq2SeqModel::effective() const {
  TransformerConfig c = config_.net;
  if (!dropout_enabled_) c.dropout = 0.0;
  return c;
}

Var Seq2SeqModel::decode_hidden(Graph& g, Var memory, std::span<const TokenId> decoder_input) {
  const TransformerConfig c = effective();
  if (decoder_input.empty()) throw DataError("decoder input is empty");
  if (decoder_input.size() > static_cast<std::size_t>(config_.max_target))
    throw DataError("decoder input exceeds the target budget");
  Var x = embed(g, params_, "emb", "tgt_pos", decoder_input, c);
  for (int l = 0; l < c.layers; ++l) {
    const std::string n = "dec.layer" + std::to_string(l);
    Var h = norm(g, params_, n + ".ln1", x);
    x = add(x, dropout(attention(g, params_, n + ".self", h, h, c, true), c.dropout));
    h = norm(g, params_, n + ".ln2", x);
    x = add(x, dropout(attention(g, params_, n + ".cross", h, memory, c, false), c.dropout));
    h = norm(g, params_, n + ".ln3", x);
    x = add(x, dropout(feed_forward(g, params_, n + ".ff", h, c), c.dropout));
  }
  return norm(g, params_, "dec.ln_f", x);
}

Var Seq2SeqModel::decode_logits(Graph& g, Var memory, std::span<const TokenId> decoder_input) {
  Var h = decode_hidden(g, memory, decoder_input);
  return add_row(matmul_nt(h, g.param(params_.get("emb"))), g.param(params_.get("out_bias")));
}

RowVector Seq2SeqModel::next_logprobs(const Matrix& memory,
                                      std::span<const TokenId> decoder_input) {
  Graph g(false, false);
  Var h = decode_hidden(g, g.constant(memory), decoder_input);
  const Matrix& hv = h.value();
  RowVector logits = hv.row(hv.rows() - 1) * params_.get("emb").value.transpose() +
                     params_.get("out_bias").value;
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return logits.array() - lse;
}

Var Seq2SeqModel::token_logprobs(Graph& g, std::span<const TokenId> source,
                                 std::span<const TokenId> target) {
  if (target.empty()) throw DataError("token_logprobs: empty target");
  Var memory = encode_source(g, source);
  std::vector<TokenId> dec_in;
  dec_in.reserve(target.size());
  dec_in.push_back(config_.start_id);
  dec_in.insert(dec_in.end(), target.begin(), target.end() - 1);
  Var logits = decode_logits(g, memory, dec_in);
  return pick_log_softmax(logits, target);
}

// ---------------------------------------------------------------------------
// IncrementalDecoder

namespace {

RowVector plain_linear(const ParamSet& ps, const std::string& name, const RowVector& x) {
  return x * ps.get(name + ".w").value + ps.get(name + ".b").value;
}

Matrix plain_linear(const ParamSet& ps, const std::string& name, const Matrix& x) {
  Matrix out = x * ps.get(name + ".w").value;
  out.rowwise() += ps.get(name + ".b").value.row(0);
  return out;
}

RowVector plain_norm(const ParamSet& ps, const std::string& name, const RowVector& x) {
  const double mean = x.mean();
  const double var = (x.array() - mean).square().mean();
  const double inv = 1.0 / std::sqrt(var + 1e-5);
  RowVector out = (x.array() - mean) * inv;
  return out.array() * ps.get(name + ".g").value.row(0).array() +
         ps.get(name + ".b").value.row(0).array();
}

// Attention of one query row over cached keys and values.
RowVector plain_attend(const RowVector& q, const Matrix& k, const Matrix& v, int heads) {
  const Eigen::Index dh = q.size() / heads;
  const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
  RowVector out(q.size());
  for (int h = 0; h < heads; ++h) {
    Eigen::VectorXd s = k.middleCols(h * dh, dh) * q.segment(h * dh, dh).transpose() * inv;
    const double m = s.maxCoeff();
    s = (s.array() - m).exp();
    s /= s.sum();
    out.segment(h * dh, dh) = s.transpose() * v.middleCols(h * dh, dh);
  }
  return out;
}

RowVector plain_gelu(RowVector x) {
  constexpr double kC = 0.7978845608028654;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double v = x(i);
    x(i) = 0.5 * v * (1.0 + std::tanh(kC * (v + 0.044715 * v * v * v)));
  }
  return x;
}

}  // namespace

IncrementalDecoder::IncrementalDecoder(const Seq2SeqModel& model, const Matrix& memory)
    : model_(&model) {
  const auto& ps = model.params();
  for (int l = 0; l < model.config().net.layers; ++l) {
    const std::string n = "dec.layer" + std::to_string(l) + ".cross";
    cross_k_.push_back(plain_linear(ps, n + ".k", memory));
    cross_v_.push_back(plain_linear(ps, n + ".v", memory));
  }
}

IncrementalDecoder::State IncrementalDecoder::initial() const {
  State s;
  const auto& c = model_->config().net;
  s.keys.assign(static_cast<std::size_t>(c.layers), Matrix(0, c.hidden));
  s.values.assign(static_cast<std::size_t>(c.layers), Matrix(0, c.hidden));
  return s;
}

RowVector IncrementalDecoder::feed(State& state, TokenId token) const {
  const auto& cfg = model_->config();
  const auto& c = cfg.net;
  const auto& ps = model_->params();
  if (state.length >= cfg.max_target) throw DataError("decoder input exceeds the target budget");
  if (token < 0 || token >= c.vocab_size) throw DataError("token id out of range");
  RowVector x = ps.get("emb").value.row(token) + ps.get("tgt_pos").value.row(state.length);
  for (int l = 0; l < c.layers; ++l) {
    const std::string n = "dec.layer" + std::to_string(l);
    const auto li = static_cast<std::size_t>(l);
    RowVector h = plain_norm(ps, n + ".ln1", x);
    Matrix& k = state.keys[li];
    Matrix& v = state.values[li];
    k.conservativeResize(k.rows() + 1, Eigen::NoChange);
    v.conservativeResize(v.rows() + 1, Eigen::NoChange);
    k.row(k.rows() - 1) = plain_linear(ps, n + ".self.k", h);
    v.row(v.rows() - 1) = plain_linear(ps, n + ".self.v", h);
    RowVector q = plain_linear(ps, n + ".self.q", h);
    x += plain_linear(ps, n + ".self.o", plain_attend(q, k, v, c.heads));
    h = plain_norm(ps, n + ".ln2", x);
    q = plain_linear(ps, n + ".cross.q", h);
    x += plain_linear(ps, n + ".cross.o", plain_attend(q, cross_k_[li], cross_v_[li], c.heads));
    h = plain_norm(ps, n + ".ln3", x);
    x += plain_linear(ps, n + ".ff.out", plain_gelu(plain_linear(ps, n + ".ff.in", h)));
  }
  ++state.length;
  x = plain_norm(ps, "dec.ln_f", x);
  RowVector logits = x * ps.get("emb").value.transpose() + ps.get("out_bias").value;
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return logits.array() - lse;
}

// ---------------------------------------------------------------------------
// Optimizer

void Optimizer::attach(ParamSet& params) {
  for (Parameter* p : params.all()) {
    slots_.push_back({p, Matrix::Zero(p->value.rows(), p->value.cols()),
                      Matrix::Zero(p->value.rows(), p->value.cols())});
  }
}

void Optimizer::add_gradients(std::span<const Matrix> grads) {
  if (grads.size() != slots_.size())
    throw UsageError("gradient count " + std::to_string(grads.size()) +
                     " does not match parameter count " + std::to_string(slots_.size()));
  for (std::size_t i = 0; i < grads.size(); ++i) {
    Parameter& p = *slots_[i].param;
    if (grads[i].rows() != p.value.rows() || grads[i].cols() != p.value.cols())
      throw UsageError("gradient shape mismatch for parameter " + p.name);
  }
  for (std::size_t i = 0; i < grads.size(); ++i) slots_[i].param->grad += grads[i];
}

bool Optimizer::step() {
  if (++pending_ < config_.accumulation) return false;
  apply();
  return true;
}

bool Optimizer::flush() {
  if (pending_ == 0) return false;
  apply();
  return true;
}

void Optimizer::apply() {
  const double inv = 1.0 / static_cast<double>(pending_);
  pending_ = 0;
  double sq = 0.0;
  for (auto& s : slots_) {
    if (s.param->frozen) continue;
    s.param->grad *= inv;
    sq += s.param->grad.squaredNorm();
  }
  const double gnorm = std::sqrt(sq);
  if (!std::isfinite(gnorm)) throw NumericError("non-finite gradient norm");
  const double clip = config_.clip_norm > 0.0 && gnorm > config_.clip_norm
                          ? config_.clip_norm / gnorm
                          : 1.0;
  ++updates_;
  const double t = static_cast<double>(updates_);
  const double bc1 = 1.0 - std::pow(config_.beta1, t);
  const double bc2 = 1.0 - std::pow(config_.beta2, t);
  const double lr = config_.learning_rate;
  for (auto& s : slots_) {
    Parameter& p = *s.param;
    if (p.frozen) {
      p.zero_grad();
      continue;
    }
    double* w = p.value.data();
    const double* gr = p.grad.data();
    double* m = s.m.data();
    double* v = s.v.data();
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      if (gr[i] == 0.0) continue;
      const double gi = gr[i] * clip;
      if (config_.kind == OptimizerConfig::Kind::kSgd) {
        w[i] -= lr * gi;
        continue;
      }
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * gi;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * gi * gi;
      w[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + config_.epsilon);
    }
    p.zero_grad();
  }
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_checkpoint(const std::string& stem, const nlohmann::json& manifest,
                     const ParamSet& params) {
  nlohmann::json m = manifest;
  m["param_hash"] = hex64(params.hash());
  m["tensor_count"] = params.count();
  write_file_atomic(stem + ".bin", params.serialize());
  write_file_atomic(stem + ".json", m.dump(2) + "\n");
}

nlohmann::json load_manifest(const std::string& stem) {
  try {
    return nlohmann::json::parse(read_file(stem + ".json"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad manifest " + stem + ".json: " + e.what());
  }
}

void load_tensors(const std::string& stem, ParamSet& params) {
  params.deserialize(read_file(stem + ".bin"));
}

void save_encoder(const std::string& stem, const EncoderModel& m, std::uint64_t vocab_hash) {
  nlohmann::json j = {{"kind", "encoder"},
                      {"config", m.config().to_json()},
                      {"vocab_hash", hex64(vocab_hash)}};
  save_checkpoint(stem, j, m.params());
}

EncoderModel load_encoder(const std::string& stem) {
  auto j = load_manifest(stem);
  if (j.value("kind", "") != "encoder") throw DataError(stem + " is not an encoder checkpoint");
  EncoderModel m(EncoderConfig::from_json(j.at("config")), 0);
  load_tensors(stem, m.params());
  return m;
}

void save_seq2seq(const std::string& stem, const Seq2SeqModel& m, std::uint64_t vocab_hash) {
  nlohmann::json j = {{"kind", "seq2seq"},
                      {"config", m.config().to_json()},
                      {"vocab_hash", hex64(vocab_hash)}};
  save_checkpoint(stem, j, m.params());
}

Seq2SeqModel load_seq2seq(const std::string& stem) {
  auto j = load_manifest(stem);
  if (j.value("kind", "") != "seq2seq") throw DataError(stem + " is not a seq2seq checkpoint");
  Seq2SeqModel m(Seq2SeqConfig::from_json(j.at("config")), 0);
  load_tensors(stem, m.params());
  return m;
}

}  // namespace racg::nn
