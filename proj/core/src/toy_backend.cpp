// Copyright 2026 The phrasebias Authors
// SPDX-License-Identifier: Apache-2.0

#include "phrasebias/toy_backend.hpp"

#include <cctype>
#include <charconv>
#include <random>

#include <json.hpp>

#include "phrasebias/error.hpp"
#include "phrasebias/hashing.hpp"
#include "phrasebias/safetensors.hpp"
#include "phrasebias/text_util.hpp"

namespace phrasebias {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// Splits on whitespace, keeps "[MASK]"-style bracket tokens whole and
// separates ASCII punctuation into single-character tokens.
std::vector<std::string> pre_tokenize(std::string_view text) {
  std::vector<std::string> out;
  for (const auto& chunk : split_whitespace(text)) {
    std::string current;
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      const char c = chunk[i];
      if (c == '[') {
        auto close = chunk.find(']', i);
        if (close != std::string::npos) {
          auto inner = std::string_view(chunk).substr(i + 1, close - i - 1);
          bool upper = !inner.empty();
          for (char ch : inner) upper = upper && std::isupper(static_cast<unsigned char>(ch));
          if (upper) {
            if (!current.empty()) out.push_back(std::move(current));
            current.clear();
            out.push_back(chunk.substr(i, close - i + 1));
            i = close;
            continue;
          }
        }
      }
      if (std::ispunct(static_cast<unsigned char>(c))) {
        if (!current.empty()) out.push_back(std::move(current));
        current.clear();
        out.emplace_back(1, c);
      } else {
        current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
      }
    }
    if (!current.empty()) out.push_back(std::move(current));
  }
  return out;
}

double uniform(std::mt19937_64& rng, double half_width) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return (2.0 * u - 1.0) * half_width;
}

void fill_uniform(Matrix& m, std::mt19937_64& rng, double half_width) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = uniform(rng, half_width);
}

template <typename M>
std::span<double> flat(M& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}

}  // namespace

ToyParameters ToyParameters::zeros(int vocab_size, int dim, int max_length) {
  ToyParameters p;
  p.embed = Matrix::Zero(vocab_size, dim);
  p.position = Matrix::Zero(max_length, dim);
  p.head_weight = Matrix::Zero(vocab_size, dim);
  p.head_bias = Vector::Zero(vocab_size);
  p.mix = 1.0;
  p.cls_projection = Matrix::Identity(dim, dim);
  return p;
}

ToyBackend::ToyBackend(ToyParameters params, std::vector<std::string> words, std::string identifier)
    : params_(std::move(params)), words_(std::move(words)) {
  const int vocab = params_.vocab_size();
  const int dim = params_.dim();
  if (vocab < 4) fail(ErrorKind::kConfig, "toy vocabulary needs room for 4 special tokens");
  if (dim < 1) fail(ErrorKind::kConfig, "toy hidden dim must be positive");
  if (params_.position.cols() != dim || params_.head_weight.rows() != vocab ||
      params_.head_weight.cols() != dim || params_.head_bias.size() != vocab ||
      params_.cls_projection.rows() != dim || params_.cls_projection.cols() != dim)
    fail(ErrorKind::kConfig, "inconsistent toy parameter shapes");
  if (kFirstWord + static_cast<int>(words_.size()) > vocab)
    fail(ErrorKind::kConfig, "more explicit words than vocabulary slots");
  for (std::size_t i = 0; i < words_.size(); ++i) {
    words_[i] = to_lower_ascii(words_[i]);
    if (!word_ids_.emplace(words_[i], kFirstWord + static_cast<TokenId>(i)).second)
      fail(ErrorKind::kConfig, "duplicate toy word '" + words_[i] + "'");
  }
  grads_ = ToyParameters::zeros(vocab, dim, params_.max_length());
  grads_.mix = 0.0;
  grads_.cls_projection.setZero();

  info_.identifier = std::move(identifier);
  info_.vocab_size = vocab;
  info_.hidden_dim = dim;
  info_.max_length = params_.max_length();
  info_.special = SpecialTokens{kMask, kCls, kSep, kPad, -1};
  info_.trainable = true;
}

TokenId ToyBackend::word_id(std::string_view word) const {
  if (word == "[MASK]") return kMask;
  if (word == "[CLS]") return kCls;
  if (word == "[SEP]") return kSep;
  if (word == "[PAD]") return kPad;
  const std::string lower = to_lower_ascii(word);
  if (auto it = word_ids_.find(lower); it != word_ids_.end()) return it->second;
  if (lower.size() > 3 && lower.compare(0, 3, "tok") == 0) {
    int n = 0;
    auto [ptr, ec] = std::from_chars(lower.data() + 3, lower.data() + lower.size(), n);
    if (ec == std::errc() && ptr == lower.data() + lower.size() && n >= kFirstWord &&
        n < info_.vocab_size)
      return n;
  }
  const int explicit_end = kFirstWord + static_cast<int>(words_.size());
  const int free_slots = info_.vocab_size - explicit_end;
  if (free_slots <= 0) fail(ErrorKind::kDomain, "word '" + lower + "' not in toy vocabulary");
  return explicit_end + static_cast<TokenId>(fnv1a(lower) % static_cast<std::uint64_t>(free_slots));
}

std::vector<TokenId> ToyBackend::encode(std::string_view text) const {
  auto pieces = pre_tokenize(text);
  if (pieces.empty()) fail(ErrorKind::kContract, "cannot encode empty text");
  std::vector<TokenId> ids;
  ids.reserve(pieces.size());
  for (const auto& piece : pieces) ids.push_back(word_id(piece));
  if (static_cast<int>(ids.size()) > info_.max_length)
    fail(ErrorKind::kLength, "text of " + std::to_string(ids.size()) +
                                 " tokens exceeds max length " + std::to_string(info_.max_length));
  return ids;
}

std::string ToyBackend::detokenize(std::span<const TokenId> ids) const {
  std::string out;
  for (auto id : ids) {
    if (!out.empty()) out.push_back(' ');
    if (id == kMask) out += "[MASK]";
    else if (id == kCls) out += "[CLS]";
    else if (id == kSep) out += "[SEP]";
    else if (id == kPad) out += "[PAD]";
    else if (id >= kFirstWord && id < kFirstWord + static_cast<TokenId>(words_.size()))
      out += words_[static_cast<std::size_t>(id - kFirstWord)];
    else out += "tok" + std::to_string(id);
  }
  return out;
}

Vector ToyBackend::cls_embedding(const TokenSequence& seq) const {
  validate(seq);
  Vector context = Vector::Zero(params_.dim());
  for (auto id : seq.ids) context += params_.embed.row(id).transpose();
  context /= static_cast<double>(seq.size());
  return params_.cls_projection * context;
}

Matrix ToyBackend::mask_logits(const TokenSequence& seq) const {
  validate(seq);
  if (seq.mask_positions.empty()) fail(ErrorKind::kContract, "sequence has no mask positions");
  Vector context = Vector::Zero(params_.dim());
  for (auto id : seq.ids) context += params_.embed.row(id).transpose();
  context /= static_cast<double>(seq.size());

  Matrix logits(static_cast<Eigen::Index>(seq.mask_positions.size()), info_.vocab_size);
  for (std::size_t r = 0; r < seq.mask_positions.size(); ++r) {
    const auto p = seq.mask_positions[r];
    Vector pre = params_.embed.row(seq.ids[p]).transpose() + params_.position.row(p).transpose() +
                 params_.mix * context;
    Vector hidden = pre.array().tanh().matrix();
    logits.row(static_cast<Eigen::Index>(r)) = (params_.head_weight * hidden + params_.head_bias).transpose();
  }
  return logits;
}

void ToyBackend::accumulate_mask_logits_grad(const TokenSequence& seq, const Matrix& dlogits) {
  validate(seq);
  if (dlogits.rows() != static_cast<Eigen::Index>(seq.mask_positions.size()) ||
      dlogits.cols() != info_.vocab_size)
    fail(ErrorKind::kContract, "gradient shape does not match mask logits");
  const double inv_len = 1.0 / static_cast<double>(seq.size());
  Vector context = Vector::Zero(params_.dim());
  for (auto id : seq.ids) context += params_.embed.row(id).transpose();
  context *= inv_len;

  Vector dcontext = Vector::Zero(params_.dim());
  for (std::size_t r = 0; r < seq.mask_positions.size(); ++r) {
    const auto p = seq.mask_positions[r];
    Vector pre = params_.embed.row(seq.ids[p]).transpose() + params_.position.row(p).transpose() +
                 params_.mix * context;
    Vector hidden = pre.array().tanh().matrix();
    Vector dz = dlogits.row(static_cast<Eigen::Index>(r)).transpose();
    grads_.head_weight.noalias() += dz * hidden.transpose();
    grads_.head_bias += dz;
    Vector dhidden = params_.head_weight.transpose() * dz;
    Vector dpre = (dhidden.array() * (1.0 - hidden.array().square())).matrix();
    grads_.embed.row(seq.ids[p]) += dpre.transpose();
    grads_.position.row(p) += dpre.transpose();
    grads_.mix += dpre.dot(context);
    dcontext += params_.mix * dpre;
  }
  for (auto id : seq.ids) grads_.embed.row(id) += inv_len * dcontext.transpose();
}

void ToyBackend::zero_grad() {
  grads_.embed.setZero();
  grads_.position.setZero();
  grads_.head_weight.setZero();
  grads_.head_bias.setZero();
  grads_.mix = 0.0;
  grads_.cls_projection.setZero();
}

std::vector<ParameterBlock<double>> ToyBackend::parameter_blocks() {
  return {
      {"embed", flat(params_.embed), flat(grads_.embed), true},
      {"position", flat(params_.position), flat(grads_.position), true},
      {"head_weight", flat(params_.head_weight), flat(grads_.head_weight), true},
      {"head_bias", flat(params_.head_bias), flat(grads_.head_bias), false},
      {"mix", std::span<double>(&params_.mix, 1), std::span<double>(&grads_.mix, 1), true},
      {"cls_projection", flat(params_.cls_projection), flat(grads_.cls_projection), true},
  };
}

void ToyBackend::apply_gradient_step(OptimizerState& state) {
  if (!info_.trainable) fail(ErrorKind::kCapability, info_.identifier + " is not trainable");
  auto blocks = parameter_blocks();
  optimizer_step(std::span<const ParameterBlock<double>>(blocks), state);
}

std::unique_ptr<MaskedLM> ToyBackend::clone() const {
  auto copy = std::make_unique<ToyBackend>(params_, words_, info_.identifier);
  copy->info_.trainable = info_.trainable;
  return copy;
}

void ToyBackend::copy_parameters_from(const MaskedLM& other) {
  const auto* toy = dynamic_cast<const ToyBackend*>(&other);
  if (toy == nullptr || toy->params_.vocab_size() != params_.vocab_size() ||
      toy->params_.dim() != params_.dim() || toy->params_.max_length() != params_.max_length())
    fail(ErrorKind::kContract, "copy_parameters_from needs a toy backend of the same shape");
  params_ = toy->params_;
}

std::size_t ToyBackend::parameter_count() const {
  return static_cast<std::size_t>(params_.embed.size() + params_.position.size() +
                                  params_.head_weight.size() + params_.head_bias.size() + 1 +
                                  params_.cls_projection.size());
}

double ToyBackend::gradient_norm_squared() const {
  return grads_.embed.squaredNorm() + grads_.position.squaredNorm() +
         grads_.head_weight.squaredNorm() + grads_.head_bias.squaredNorm() +
         grads_.mix * grads_.mix + grads_.cls_projection.squaredNorm();
}

std::string ToyBackend::parameter_hash() const {
  std::string bytes;
  auto append = [&bytes](const double* data, Eigen::Index n) {
    bytes.append(reinterpret_cast<const char*>(data), static_cast<std::size_t>(n) * sizeof(double));
  };
  append(params_.embed.data(), params_.embed.size());
  append(params_.position.data(), params_.position.size());
  append(params_.head_weight.data(), params_.head_weight.size());
  append(params_.head_bias.data(), params_.head_bias.size());
  append(&params_.mix, 1);
  append(params_.cls_projection.data(), params_.cls_projection.size());
  return sha256_hex(bytes);
}

void ToyBackend::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  nlohmann::json config = {{"model_type", "toy"},
                           {"source_identifier", info_.identifier},
                           {"vocab_size", params_.vocab_size()},
                           {"hidden_dim", params_.dim()},
                           {"max_length", params_.max_length()},
                           {"words", words_}};
  write_file(dir / "config.json", config.dump(2) + "\n");

  RowMajor embed = params_.embed, position = params_.position, head = params_.head_weight,
           cls = params_.cls_projection;
  const auto v = static_cast<std::int64_t>(params_.vocab_size());
  const auto d = static_cast<std::int64_t>(params_.dim());
  const auto l = static_cast<std::int64_t>(params_.max_length());
  std::vector<TensorToWrite> tensors = {
      make_tensor<double>("embed", {v, d}, {embed.data(), static_cast<std::size_t>(embed.size())}),
      make_tensor<double>("position", {l, d}, {position.data(), static_cast<std::size_t>(position.size())}),
      make_tensor<double>("head_weight", {v, d}, {head.data(), static_cast<std::size_t>(head.size())}),
      make_tensor<double>("head_bias", {v}, {params_.head_bias.data(), static_cast<std::size_t>(v)}),
      make_tensor<double>("mix", {1}, {&params_.mix, 1}),
      make_tensor<double>("cls_projection", {d, d}, {cls.data(), static_cast<std::size_t>(cls.size())}),
  };
  write_safetensors(dir / "model.safetensors", tensors);
}

std::unique_ptr<ToyBackend> ToyBackend::load(const std::filesystem::path& dir) {
  auto config = nlohmann::json::parse(read_file(dir / "config.json"));
  if (config.value("model_type", "") != "toy")
    fail(ErrorKind::kConfig, dir.string() + " is not a toy checkpoint");
  const int vocab = config.at("vocab_size").get<int>();
  const int dim = config.at("hidden_dim").get<int>();
  const int max_len = config.at("max_length").get<int>();
  auto file = SafetensorsFile::open(dir / "model.safetensors");
  auto read = [&file](const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    auto values = file.read_f64(name);
    if (static_cast<Eigen::Index>(values.size()) != rows * cols)
      fail(ErrorKind::kFormat, "tensor " + name + " has the wrong size");
    return Matrix(Eigen::Map<RowMajor>(values.data(), rows, cols));
  };
  ToyParameters p;
  p.embed = read("embed", vocab, dim);
  p.position = read("position", max_len, dim);
  p.head_weight = read("head_weight", vocab, dim);
  p.head_bias = read("head_bias", vocab, 1).col(0);
  p.mix = file.read_f64("mix").at(0);
  p.cls_projection = read("cls_projection", dim, dim);
  return std::make_unique<ToyBackend>(std::move(p), config.value("words", std::vector<std::string>{}),
                                      dir.string());
}

std::unique_ptr<ToyBackend> make_toy_backend(std::uint64_t seed, int vocab_size, int hidden_dim) {
  if (vocab_size < 8) fail(ErrorKind::kConfig, "toy vocab_size must be at least 8");
  if (hidden_dim < 2) fail(ErrorKind::kConfig, "toy hidden_dim must be at least 2");
  std::mt19937_64 rng(seed);
  auto p = ToyParameters::zeros(vocab_size, hidden_dim);
  fill_uniform(p.embed, rng, 0.5);
  fill_uniform(p.position, rng, 0.2);
  fill_uniform(p.head_weight, rng, 0.5);
  return std::make_unique<ToyBackend>(
      std::move(p), std::vector<std::string>{},
      "toy:" + std::to_string(seed) + ":" + std::to_string(vocab_size) + ":" + std::to_string(hidden_dim));
}

}  // namespace phrasebias
