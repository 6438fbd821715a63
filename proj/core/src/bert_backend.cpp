// Copyright 2026 The phrasebias Authors
// SPDX-License-Identifier: Apache-2.0

#include "phrasebias/bert_backend.hpp"

#include <cmath>

#include <json.hpp>

#include "phrasebias/error.hpp"
#include "phrasebias/hashing.hpp"
#include "phrasebias/safetensors.hpp"
#include "phrasebias/text_util.hpp"

namespace phrasebias {

namespace {

using MatF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowF = Eigen::Matrix<float, 1, Eigen::Dynamic>;
using ColF = Eigen::VectorXf;

struct Linear {
  MatF w;  // out x in, as stored by PyTorch
  RowF b;

  void init(int out, int in) {
    w = MatF::Zero(out, in);
    b = RowF::Zero(out);
  }
};

struct Norm {
  RowF gamma;
  RowF beta;

  void init(int dim) {
    gamma = RowF::Zero(dim);
    beta = RowF::Zero(dim);
  }
};

struct Layer {
  Linear query, key, value, attn_out;
  Norm attn_norm;
  Linear ffn_in, ffn_out;
  Norm out_norm;
};

}  // namespace

struct BertBackend::Weights {
  MatF word;
  MatF position;
  MatF token_type;
  Norm emb_norm;
  std::vector<Layer> layers;
  Linear pooler;
  bool has_pooler = false;
  Linear head_transform;
  Norm head_norm;
  RowF decoder_bias;

  static Weights zeros(const BertConfig& c, bool with_pooler) {
    Weights w;
    w.word = MatF::Zero(c.vocab_size, c.hidden);
    w.position = MatF::Zero(c.max_position, c.hidden);
    w.token_type = MatF::Zero(c.type_vocab_size, c.hidden);
    w.emb_norm.init(c.hidden);
    w.layers.resize(static_cast<std::size_t>(c.layers));
    for (auto& l : w.layers) {
      l.query.init(c.hidden, c.hidden);
      l.key.init(c.hidden, c.hidden);
      l.value.init(c.hidden, c.hidden);
      l.attn_out.init(c.hidden, c.hidden);
      l.attn_norm.init(c.hidden);
      l.ffn_in.init(c.intermediate, c.hidden);
      l.ffn_out.init(c.hidden, c.intermediate);
      l.out_norm.init(c.hidden);
    }
    w.has_pooler = with_pooler;
    if (with_pooler) w.pooler.init(c.hidden, c.hidden);
    w.head_transform.init(c.hidden, c.hidden);
    w.head_norm.init(c.hidden);
    w.decoder_bias = RowF::Zero(c.vocab_size);
    return w;
  }
};

namespace {

using Weights = BertBackend::Weights;

struct TensorRef {
  std::string name;
  float* data;
  std::size_t size;
  std::vector<std::int64_t> shape;
  bool decay;
};

template <typename M>
TensorRef ref(std::string name, M& m, bool decay) {
  std::vector<std::int64_t> shape;
  if (m.rows() == 1 && M::RowsAtCompileTime == 1) shape = {static_cast<std::int64_t>(m.cols())};
  else shape = {static_cast<std::int64_t>(m.rows()), static_cast<std::int64_t>(m.cols())};
  return {std::move(name), m.data(), static_cast<std::size_t>(m.size()), std::move(shape), decay};
}

void add_linear(std::vector<TensorRef>& out, const std::string& base, Linear& l) {
  out.push_back(ref(base + ".weight", l.w, true));
  out.push_back(ref(base + ".bias", l.b, false));
}

void add_norm(std::vector<TensorRef>& out, const std::string& base, Norm& n) {
  out.push_back(ref(base + ".weight", n.gamma, false));
  out.push_back(ref(base + ".bias", n.beta, false));
}

// Every parameter tensor under its Hugging Face name, in a fixed order.
std::vector<TensorRef> tensors_of(Weights& w, BertArch arch) {
  std::vector<TensorRef> out;
  if (arch == BertArch::kBert) {
    const std::string p = "bert.";
    out.push_back(ref(p + "embeddings.word_embeddings.weight", w.word, true));
    out.push_back(ref(p + "embeddings.position_embeddings.weight", w.position, true));
    out.push_back(ref(p + "embeddings.token_type_embeddings.weight", w.token_type, true));
    add_norm(out, p + "embeddings.LayerNorm", w.emb_norm);
    for (std::size_t i = 0; i < w.layers.size(); ++i) {
      auto& l = w.layers[i];
      const std::string base = p + "encoder.layer." + std::to_string(i) + ".";
      add_linear(out, base + "attention.self.query", l.query);
      add_linear(out, base + "attention.self.key", l.key);
      add_linear(out, base + "attention.self.value", l.value);
      add_linear(out, base + "attention.output.dense", l.attn_out);
      add_norm(out, base + "attention.output.LayerNorm", l.attn_norm);
      add_linear(out, base + "intermediate.dense", l.ffn_in);
      add_linear(out, base + "output.dense", l.ffn_out);
      add_norm(out, base + "output.LayerNorm", l.out_norm);
    }
    if (w.has_pooler) add_linear(out, p + "pooler.dense", w.pooler);
    add_linear(out, "cls.predictions.transform.dense", w.head_transform);
    add_norm(out, "cls.predictions.transform.LayerNorm", w.head_norm);
    out.push_back(ref("cls.predictions.bias", w.decoder_bias, false));
  } else {
    const std::string p = "distilbert.";
    out.push_back(ref(p + "embeddings.word_embeddings.weight", w.word, true));
    out.push_back(ref(p + "embeddings.position_embeddings.weight", w.position, true));
    add_norm(out, p + "embeddings.LayerNorm", w.emb_norm);
    for (std::size_t i = 0; i < w.layers.size(); ++i) {
      auto& l = w.layers[i];
      const std::string base = p + "transformer.layer." + std::to_string(i) + ".";
      add_linear(out, base + "attention.q_lin", l.query);
      add_linear(out, base + "attention.k_lin", l.key);
      add_linear(out, base + "attention.v_lin", l.value);
      add_linear(out, base + "attention.out_lin", l.attn_out);
      add_norm(out, base + "sa_layer_norm", l.attn_norm);
      add_linear(out, base + "ffn.lin1", l.ffn_in);
      add_linear(out, base + "ffn.lin2", l.ffn_out);
      add_norm(out, base + "output_layer_norm", l.out_norm);
    }
    add_linear(out, "vocab_transform", w.head_transform);
    add_norm(out, "vocab_layer_norm", w.head_norm);
    out.push_back(ref("vocab_projector.bias", w.decoder_bias, false));
  }
  return out;
}

// Older checkpoints name LayerNorm parameters gamma/beta and the decoder bias
// cls.predictions.decoder.bias.
std::vector<std::string> aliases(const std::string& name) {
  std::vector<std::string> out{name};
  auto replace_suffix = [&](std::string_view from, std::string_view to) {
    if (name.size() >= from.size() && name.compare(name.size() - from.size(), from.size(), from) == 0)
      out.push_back(name.substr(0, name.size() - from.size()) + std::string(to));
  };
  replace_suffix("LayerNorm.weight", "LayerNorm.gamma");
  replace_suffix("LayerNorm.bias", "LayerNorm.beta");
  if (name == "cls.predictions.bias") out.push_back("cls.predictions.decoder.bias");
  return out;
}

float gelu(float x) { return 0.5f * x * (1.0f + std::erf(x * static_cast<float>(M_SQRT1_2))); }

float gelu_grad(float x) {
  constexpr float kInvSqrt2Pi = 0.3989422804014327f;
  return 0.5f * (1.0f + std::erf(x * static_cast<float>(M_SQRT1_2))) +
         x * kInvSqrt2Pi * std::exp(-0.5f * x * x);
}

MatF linear(const MatF& x, const Linear& l) {
  MatF y = x * l.w.transpose();
  y.rowwise() += l.b;
  return y;
}

MatF linear_backward(const MatF& dy, const MatF& x, const Linear& l, Linear& grad) {
  grad.w.noalias() += dy.transpose() * x;
  grad.b += dy.colwise().sum();
  return dy * l.w;
}

struct NormCache {
  MatF xhat;
  ColF inv_std;
};

MatF layer_norm(const MatF& x, const Norm& n, float eps, NormCache* cache) {
  const auto rows = x.rows();
  const auto cols = static_cast<float>(x.cols());
  MatF xhat(rows, x.cols());
  ColF inv_std(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const float mean = x.row(r).sum() / cols;
    RowF centered = x.row(r).array() - mean;
    const float var = centered.squaredNorm() / cols;
    inv_std(r) = 1.0f / std::sqrt(var + eps);
    xhat.row(r) = centered * inv_std(r);
  }
  MatF y = xhat.array().rowwise() * n.gamma.array();
  y.rowwise() += n.beta;
  if (cache != nullptr) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

MatF layer_norm_backward(const MatF& dy, const NormCache& cache, const Norm& n, Norm& grad) {
  grad.gamma += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
  grad.beta += dy.colwise().sum();
  MatF dxhat = dy.array().rowwise() * n.gamma.array();
  MatF dx(dy.rows(), dy.cols());
  const auto cols = static_cast<float>(dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const float mean_d = dxhat.row(r).sum() / cols;
    const float mean_dx = dxhat.row(r).dot(cache.xhat.row(r)) / cols;
    dx.row(r) = cache.inv_std(r) *
                (dxhat.row(r).array() - mean_d - cache.xhat.row(r).array() * mean_dx).matrix();
  }
  return dx;
}

struct LayerCache {
  MatF input;
  MatF q, k, v;
  std::vector<MatF> probs;  // per head, T x T
  MatF context;
  NormCache attn_norm;
  MatF attn_normed;
  MatF ffn_pre;
  MatF ffn_act;
  NormCache out_norm;
};

struct ForwardCache {
  NormCache emb_norm;
  std::vector<LayerCache> layers;
  MatF hidden;  // final layer output
};

struct HeadCache {
  MatF input;  // hidden rows at the mask positions
  MatF pre;
  MatF act;
  NormCache norm;
  MatF normed;
};

}  // namespace

namespace {

struct Engine {
  const BertConfig& config;
  const Weights& w;

  MatF embed(const std::vector<TokenId>& ids, NormCache* cache) const {
    const auto len = static_cast<Eigen::Index>(ids.size());
    MatF x(len, config.hidden);
    for (Eigen::Index t = 0; t < len; ++t) {
      x.row(t) = w.word.row(ids[static_cast<std::size_t>(t)]) + w.position.row(t);
      if (config.type_vocab_size > 0) x.row(t) += w.token_type.row(0);
    }
    return layer_norm(x, w.emb_norm, static_cast<float>(config.layer_norm_eps), cache);
  }

  MatF layer_forward(const Layer& l, const MatF& x, LayerCache* cache) const {
    const int heads = config.heads;
    const int head_dim = config.hidden / heads;
    const float scale = 1.0f / std::sqrt(static_cast<float>(head_dim));
    const float eps = static_cast<float>(config.layer_norm_eps);
    MatF q = linear(x, l.query);
    MatF k = linear(x, l.key);
    MatF v = linear(x, l.value);
    MatF context(x.rows(), config.hidden);
    std::vector<MatF> probs;
    if (cache != nullptr) probs.reserve(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) {
      const auto cols = Eigen::seqN(h * head_dim, head_dim);
      MatF scores = (q(Eigen::all, cols) * k(Eigen::all, cols).transpose()) * scale;
      for (Eigen::Index r = 0; r < scores.rows(); ++r) {
        const float mx = scores.row(r).maxCoeff();
        scores.row(r) = (scores.row(r).array() - mx).exp();
        scores.row(r) /= scores.row(r).sum();
      }
      context(Eigen::all, cols) = scores * v(Eigen::all, cols);
      if (cache != nullptr) probs.push_back(std::move(scores));
    }
    MatF attn = linear(context, l.attn_out);
    NormCache n1;
    MatF y1 = layer_norm(x + attn, l.attn_norm, eps, cache ? &n1 : nullptr);
    MatF pre = linear(y1, l.ffn_in);
    MatF act = pre.unaryExpr(&gelu);
    MatF out = linear(act, l.ffn_out);
    NormCache n2;
    MatF y2 = layer_norm(y1 + out, l.out_norm, eps, cache ? &n2 : nullptr);
    if (cache != nullptr) {
      cache->input = x;
      cache->q = std::move(q);
      cache->k = std::move(k);
      cache->v = std::move(v);
      cache->probs = std::move(probs);
      cache->context = std::move(context);
      cache->attn_norm = std::move(n1);
      cache->attn_normed = std::move(y1);
      cache->ffn_pre = std::move(pre);
      cache->ffn_act = std::move(act);
      cache->out_norm = std::move(n2);
    }
    return y2;
  }

  MatF encode(const std::vector<TokenId>& ids, ForwardCache* cache) const {
    MatF x = embed(ids, cache ? &cache->emb_norm : nullptr);
    if (cache != nullptr) cache->layers.resize(w.layers.size());
    for (std::size_t i = 0; i < w.layers.size(); ++i)
      x = layer_forward(w.layers[i], x, cache ? &cache->layers[i] : nullptr);
    if (cache != nullptr) cache->hidden = x;
    return x;
  }

  MatF head(const MatF& rows, HeadCache* cache) const {
    MatF pre = linear(rows, w.head_transform);
    MatF act = pre.unaryExpr(&gelu);
    NormCache n;
    MatF normed = layer_norm(act, w.head_norm, static_cast<float>(config.layer_norm_eps),
                             cache ? &n : nullptr);
    MatF logits = normed * w.word.transpose();
    logits.rowwise() += w.decoder_bias;
    if (cache != nullptr) {
      cache->input = rows;
      cache->pre = std::move(pre);
      cache->act = std::move(act);
      cache->norm = std::move(n);
      cache->normed = std::move(normed);
    }
    return logits;
  }
};

MatF gather_rows(const MatF& m, const std::vector<std::size_t>& rows) {
  MatF out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

MatF layer_backward(const BertConfig& config, const Layer& l, Layer& g, const LayerCache& c,
                    const MatF& dout) {
  const int heads = config.heads;
  const int head_dim = config.hidden / heads;
  const float scale = 1.0f / std::sqrt(static_cast<float>(head_dim));

  MatF dsum2 = layer_norm_backward(dout, c.out_norm, l.out_norm, g.out_norm);
  MatF dact = linear_backward(dsum2, c.ffn_act, l.ffn_out, g.ffn_out);
  MatF dpre = dact.array() * c.ffn_pre.unaryExpr(&gelu_grad).array();
  MatF dy1 = dsum2 + linear_backward(dpre, c.attn_normed, l.ffn_in, g.ffn_in);
  MatF dsum1 = layer_norm_backward(dy1, c.attn_norm, l.attn_norm, g.attn_norm);
  MatF dcontext = linear_backward(dsum1, c.context, l.attn_out, g.attn_out);

  MatF dq(c.q.rows(), c.q.cols()), dk(c.k.rows(), c.k.cols()), dv(c.v.rows(), c.v.cols());
  for (int h = 0; h < heads; ++h) {
    const auto cols = Eigen::seqN(h * head_dim, head_dim);
    const MatF& p = c.probs[static_cast<std::size_t>(h)];
    MatF dctx_h = dcontext(Eigen::all, cols);
    MatF dp = dctx_h * c.v(Eigen::all, cols).transpose();
    dv(Eigen::all, cols) = p.transpose() * dctx_h;
    MatF ds(p.rows(), p.cols());
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
      const float dot = dp.row(r).dot(p.row(r));
      ds.row(r) = p.row(r).array() * (dp.row(r).array() - dot);
    }
    dq(Eigen::all, cols) = (ds * c.k(Eigen::all, cols)) * scale;
    dk(Eigen::all, cols) = (ds.transpose() * c.q(Eigen::all, cols)) * scale;
  }
  MatF dx = dsum1;
  dx += linear_backward(dq, c.input, l.query, g.query);
  dx += linear_backward(dk, c.input, l.key, g.key);
  dx += linear_backward(dv, c.input, l.value, g.value);
  return dx;
}

bool read_bool(const nlohmann::json& j, const char* key, bool fallback) {
  auto it = j.find(key);
  return it != j.end() && it->is_boolean() ? it->get<bool>() : fallback;
}

}  // namespace

BertConfig BertConfig::from_json_file(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kConfig, path.string() + ": " + e.what());
  }
  BertConfig c;
  const std::string type = j.value("model_type", "bert");
  try {
    if (type == "bert") {
      c.arch = BertArch::kBert;
      c.vocab_size = j.at("vocab_size").get<int>();
      c.hidden = j.at("hidden_size").get<int>();
      c.layers = j.at("num_hidden_layers").get<int>();
      c.heads = j.at("num_attention_heads").get<int>();
      c.intermediate = j.at("intermediate_size").get<int>();
      c.max_position = j.value("max_position_embeddings", 512);
      c.type_vocab_size = j.value("type_vocab_size", 2);
      c.layer_norm_eps = j.value("layer_norm_eps", 1e-12);
      if (j.value("hidden_act", std::string("gelu")) != "gelu")
        fail(ErrorKind::kConfig, path.string() + ": only exact gelu activation is supported");
    } else if (type == "distilbert") {
      c.arch = BertArch::kDistilBert;
      c.vocab_size = j.at("vocab_size").get<int>();
      c.hidden = j.at("dim").get<int>();
      c.layers = j.at("n_layers").get<int>();
      c.heads = j.at("n_heads").get<int>();
      c.intermediate = j.at("hidden_dim").get<int>();
      c.max_position = j.value("max_position_embeddings", 512);
      c.type_vocab_size = 0;
      c.layer_norm_eps = 1e-12;
      if (j.value("activation", std::string("gelu")) != "gelu")
        fail(ErrorKind::kConfig, path.string() + ": only exact gelu activation is supported");
    } else {
      fail(ErrorKind::kConfig, path.string() + ": unsupported model_type '" + type + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kConfig, path.string() + ": " + e.what());
  }
  if (c.vocab_size <= 0 || c.hidden <= 0 || c.layers <= 0 || c.heads <= 0 || c.hidden % c.heads != 0)
    fail(ErrorKind::kConfig, path.string() + ": inconsistent model dimensions");
  return c;
}

BertBackend::BertBackend(BertConfig config, WordPieceTokenizer tokenizer, ModelInfo info,
                         ClsPooling pooling)
    : config_(config), tokenizer_(std::move(tokenizer)), info_(std::move(info)), pooling_(pooling) {}

BertBackend::~BertBackend() = default;

std::unique_ptr<BertBackend> BertBackend::load(const std::filesystem::path& dir,
                                               const BertLoadOptions& options) {
  auto config = BertConfig::from_json_file(dir / "config.json");

  bool lowercase = true;
  if (std::filesystem::exists(dir / "tokenizer_config.json")) {
    auto tc = nlohmann::json::parse(read_file(dir / "tokenizer_config.json"));
    lowercase = read_bool(tc, "do_lower_case", lowercase);
  } else {
    const auto name = dir.filename().string();
    if (name.find("cased") != std::string::npos && name.find("uncased") == std::string::npos)
      lowercase = false;
  }
  auto tokenizer = WordPieceTokenizer::from_vocab_file(dir / "vocab.txt", lowercase);
  if (tokenizer.size() != config.vocab_size)
    fail(ErrorKind::kConfig, dir.string() + ": vocab.txt has " + std::to_string(tokenizer.size()) +
                                 " entries, config says " + std::to_string(config.vocab_size));

  auto special_id = [&](std::string_view piece) {
    auto id = tokenizer.find(piece);
    if (!id) fail(ErrorKind::kConfig, dir.string() + ": vocabulary lacks " + std::string(piece));
    return *id;
  };
  ModelInfo info;
  info.identifier = options.identifier.empty() ? dir.string() : options.identifier;
  info.vocab_size = config.vocab_size;
  info.hidden_dim = config.hidden;
  info.max_length = config.max_position;
  info.trainable = options.trainable;
  info.special = SpecialTokens{special_id("[MASK]"), special_id("[CLS]"), special_id("[SEP]"),
                               special_id("[PAD]"), special_id("[UNK]")};

  auto file = SafetensorsFile::open(dir / "model.safetensors");
  const bool with_pooler = config.arch == BertArch::kBert &&
                           (file.contains("bert.pooler.dense.weight") || file.contains("pooler.dense.weight"));
  const bool prefixed = config.arch == BertArch::kBert
                            ? file.contains("bert.embeddings.word_embeddings.weight")
                            : file.contains("distilbert.embeddings.word_embeddings.weight");
  const std::string prefix = config.arch == BertArch::kBert ? "bert." : "distilbert.";

  auto weights = std::make_unique<Weights>(Weights::zeros(config, with_pooler));
  for (auto& t : tensors_of(*weights, config.arch)) {
    std::string stored = t.name;
    if (!prefixed && stored.compare(0, prefix.size(), prefix) == 0) stored = stored.substr(prefix.size());
    std::string found;
    for (const auto& candidate : aliases(stored))
      if (file.contains(candidate)) {
        found = candidate;
        break;
      }
    if (found.empty())
      fail(ErrorKind::kConfig, dir.string() + ": checkpoint lacks " + t.name +
                                   " (a masked-LM head is required)");
    auto values = file.read_f32(found);
    if (values.size() != t.size)
      fail(ErrorKind::kConfig, dir.string() + ": tensor " + found + " has " +
                                   std::to_string(values.size()) + " values, expected " +
                                   std::to_string(t.size));
    std::copy(values.begin(), values.end(), t.data);
  }

  std::unique_ptr<BertBackend> backend(
      new BertBackend(config, std::move(tokenizer), std::move(info), options.pooling));
  backend->source_dir_ = dir;
  backend->grads_ = std::make_unique<Weights>(Weights::zeros(config, with_pooler));
  backend->weights_ = std::move(weights);
  if (options.pooling == ClsPooling::kPooler && !with_pooler)
    fail(ErrorKind::kConfig, dir.string() + ": pooler requested but checkpoint has none");
  return backend;
}

std::vector<TokenId> BertBackend::encode(std::string_view text) const {
  if (trim(text).empty()) fail(ErrorKind::kContract, "cannot encode empty text");
  auto ids = tokenizer_.encode(text);
  if (ids.empty()) fail(ErrorKind::kContract, "text encodes to no tokens");
  if (static_cast<int>(ids.size()) > info_.max_length)
    fail(ErrorKind::kLength, "text of " + std::to_string(ids.size()) +
                                 " tokens exceeds max length " + std::to_string(info_.max_length));
  return ids;
}

std::string BertBackend::detokenize(std::span<const TokenId> ids) const {
  return tokenizer_.decode(ids);
}

Matrix BertBackend::hidden_states(const TokenSequence& seq) const {
  validate(seq);
  Engine engine{config_, *weights_};
  return engine.encode(seq.ids, nullptr).cast<double>();
}

Vector BertBackend::cls_embedding(const TokenSequence& seq) const {
  validate(seq);
  Engine engine{config_, *weights_};
  MatF hidden = engine.encode(seq.ids, nullptr);
  MatF first = hidden.topRows(1);
  if (pooling_ == ClsPooling::kPooler) first = linear(first, weights_->pooler).array().tanh();
  return first.row(0).transpose().cast<double>();
}

Matrix BertBackend::mask_logits(const TokenSequence& seq) const {
  validate(seq);
  if (seq.mask_positions.empty()) fail(ErrorKind::kContract, "sequence has no mask positions");
  Engine engine{config_, *weights_};
  MatF hidden = engine.encode(seq.ids, nullptr);
  return engine.head(gather_rows(hidden, seq.mask_positions), nullptr).cast<double>();
}

void BertBackend::accumulate_mask_logits_grad(const TokenSequence& seq, const Matrix& dlogits) {
  validate(seq);
  if (dlogits.rows() != static_cast<Eigen::Index>(seq.mask_positions.size()) ||
      dlogits.cols() != info_.vocab_size)
    fail(ErrorKind::kContract, "gradient shape does not match mask logits");
  const Weights& w = *weights_;
  Weights& g = *grads_;
  Engine engine{config_, w};
  ForwardCache cache;
  MatF hidden = engine.encode(seq.ids, &cache);
  HeadCache head_cache;
  engine.head(gather_rows(hidden, seq.mask_positions), &head_cache);

  const MatF dz = dlogits.cast<float>();
  g.word.noalias() += dz.transpose() * head_cache.normed;
  g.decoder_bias += dz.colwise().sum();
  MatF dnormed = dz * w.word;
  MatF dact = layer_norm_backward(dnormed, head_cache.norm, w.head_norm, g.head_norm);
  MatF dpre = dact.array() * head_cache.pre.unaryExpr(&gelu_grad).array();
  MatF drows = linear_backward(dpre, head_cache.input, w.head_transform, g.head_transform);

  MatF dx = MatF::Zero(hidden.rows(), hidden.cols());
  for (std::size_t i = 0; i < seq.mask_positions.size(); ++i)
    dx.row(static_cast<Eigen::Index>(seq.mask_positions[i])) += drows.row(static_cast<Eigen::Index>(i));

  for (std::size_t i = w.layers.size(); i-- > 0;)
    dx = layer_backward(config_, w.layers[i], g.layers[i], cache.layers[i], dx);

  MatF demb = layer_norm_backward(dx, cache.emb_norm, w.emb_norm, g.emb_norm);
  for (Eigen::Index t = 0; t < demb.rows(); ++t) {
    g.word.row(seq.ids[static_cast<std::size_t>(t)]) += demb.row(t);
    g.position.row(t) += demb.row(t);
    if (config_.type_vocab_size > 0) g.token_type.row(0) += demb.row(t);
  }
}

void BertBackend::zero_grad() {
  for (auto& t : tensors_of(*grads_, config_.arch)) std::fill(t.data, t.data + t.size, 0.0f);
}

void BertBackend::apply_gradient_step(OptimizerState& state) {
  if (!info_.trainable) fail(ErrorKind::kCapability, info_.identifier + " is not trainable");
  auto values = tensors_of(*weights_, config_.arch);
  auto grads = tensors_of(*grads_, config_.arch);
  std::vector<ParameterBlock<float>> blocks;
  blocks.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    blocks.push_back({values[i].name, {values[i].data, values[i].size}, {grads[i].data, grads[i].size},
                      values[i].decay});
  optimizer_step(std::span<const ParameterBlock<float>>(blocks), state);
  std::lock_guard lock(hash_mutex_);
  hash_cache_.clear();
}

std::unique_ptr<MaskedLM> BertBackend::clone() const {
  std::unique_ptr<BertBackend> copy(new BertBackend(config_, tokenizer_, info_, pooling_));
  copy->source_dir_ = source_dir_;
  copy->weights_ = std::make_unique<Weights>(*weights_);
  copy->grads_ = std::make_unique<Weights>(Weights::zeros(config_, weights_->has_pooler));
  return copy;
}

void BertBackend::copy_parameters_from(const MaskedLM& other) {
  const auto* bert = dynamic_cast<const BertBackend*>(&other);
  if (bert == nullptr || bert->config_.arch != config_.arch || bert->config_.hidden != config_.hidden ||
      bert->config_.layers != config_.layers || bert->config_.vocab_size != config_.vocab_size ||
      bert->weights_->has_pooler != weights_->has_pooler)
    fail(ErrorKind::kContract, "copy_parameters_from needs a model of the same architecture");
  *weights_ = *bert->weights_;
  std::lock_guard lock(hash_mutex_);
  hash_cache_.clear();
}

void BertBackend::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  std::vector<TensorToWrite> out;
  for (const auto& t : tensors_of(*weights_, config_.arch))
    out.push_back({t.name, DType::kF32, t.shape,
                   std::as_bytes(std::span<const float>(t.data, t.size))});
  write_safetensors(dir / "model.safetensors", out, {{"format", "pt"}});

  nlohmann::json config;
  if (config_.arch == BertArch::kBert) {
    config = {{"model_type", "bert"},
              {"architectures", {"BertForMaskedLM"}},
              {"vocab_size", config_.vocab_size},
              {"hidden_size", config_.hidden},
              {"num_hidden_layers", config_.layers},
              {"num_attention_heads", config_.heads},
              {"intermediate_size", config_.intermediate},
              {"max_position_embeddings", config_.max_position},
              {"type_vocab_size", config_.type_vocab_size},
              {"layer_norm_eps", config_.layer_norm_eps},
              {"hidden_act", "gelu"}};
  } else {
    config = {{"model_type", "distilbert"},
              {"architectures", {"DistilBertForMaskedLM"}},
              {"vocab_size", config_.vocab_size},
              {"dim", config_.hidden},
              {"n_layers", config_.layers},
              {"n_heads", config_.heads},
              {"hidden_dim", config_.intermediate},
              {"max_position_embeddings", config_.max_position},
              {"activation", "gelu"}};
  }
  write_file(dir / "config.json", config.dump(2) + "\n");
  std::string vocab;
  for (int i = 0; i < tokenizer_.size(); ++i) vocab += tokenizer_.piece(i) + "\n";
  write_file(dir / "vocab.txt", vocab);
  write_file(dir / "tokenizer_config.json",
             nlohmann::json{{"do_lower_case", tokenizer_.lowercase()}}.dump(2) + "\n");
}

std::size_t BertBackend::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_of(*weights_, config_.arch)) n += t.size;
  return n;
}

double BertBackend::gradient_norm_squared() const {
  double total = 0.0;
  for (const auto& t : tensors_of(*grads_, config_.arch))
    for (std::size_t i = 0; i < t.size; ++i) total += static_cast<double>(t.data[i]) * t.data[i];
  return total;
}

std::string BertBackend::parameter_hash() const {
  std::lock_guard lock(hash_mutex_);
  if (!hash_cache_.empty()) return hash_cache_;
  std::string bytes;
  for (const auto& t : tensors_of(*weights_, config_.arch)) {
    bytes += t.name;
    bytes += sha256_hex({reinterpret_cast<const char*>(t.data), t.size * sizeof(float)});
  }
  hash_cache_ = sha256_hex(bytes);
  return hash_cache_;
}

std::vector<float> BertBackend::gradient(const std::string& hf_name) const {
  for (const auto& t : tensors_of(*grads_, config_.arch))
    if (t.name == hf_name) return {t.data, t.data + t.size};
  fail(ErrorKind::kContract, "unknown parameter " + hf_name);
}

}  // namespace phrasebias
