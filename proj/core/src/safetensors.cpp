// Copyright 2026 The phrasebias Authors
// SPDX-License-Identifier: Apache-2.0

#include "phrasebias/safetensors.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "phrasebias/error.hpp"

namespace phrasebias {

namespace {

using nlohmann::json;

DType parse_dtype(const std::string& s) {
  if (s == "F64") return DType::kF64;
  if (s == "F32") return DType::kF32;
  if (s == "F16") return DType::kF16;
  if (s == "BF16") return DType::kBF16;
  if (s == "I64") return DType::kI64;
  if (s == "I32") return DType::kI32;
  fail(ErrorKind::kFormat, "unsupported safetensors dtype " + s);
}

const char* dtype_name(DType d) {
  switch (d) {
    case DType::kF64: return "F64";
    case DType::kF32: return "F32";
    case DType::kF16: return "F16";
    case DType::kBF16: return "BF16";
    case DType::kI64: return "I64";
    case DType::kI32: return "I32";
  }
  return "F32";
}

float half_to_float(std::uint16_t h) {
  const std::uint32_t sign = (h & 0x8000u) << 16;
  std::uint32_t exponent = (h >> 10) & 0x1fu;
  std::uint32_t mantissa = h & 0x3ffu;
  std::uint32_t bits;
  if (exponent == 0) {
    if (mantissa == 0) {
      bits = sign;
    } else {
      exponent = 127 - 15 + 1;
      while ((mantissa & 0x400u) == 0) {
        mantissa <<= 1;
        --exponent;
      }
      mantissa &= 0x3ffu;
      bits = sign | (exponent << 23) | (mantissa << 13);
    }
  } else if (exponent == 0x1f) {
    bits = sign | 0x7f800000u | (mantissa << 13);
  } else {
    bits = sign | ((exponent - 15 + 127) << 23) | (mantissa << 13);
  }
  return std::bit_cast<float>(bits);
}

template <typename Out>
std::vector<Out> convert(const TensorInfo& t, const std::byte* base, const std::string& name) {
  const auto n = static_cast<std::size_t>(t.numel());
  std::vector<Out> out(n);
  const std::byte* p = base + t.begin;
  switch (t.dtype) {
    case DType::kF32:
      for (std::size_t i = 0; i < n; ++i) {
        float v;
        std::memcpy(&v, p + 4 * i, 4);
        out[i] = static_cast<Out>(v);
      }
      break;
    case DType::kF64:
      for (std::size_t i = 0; i < n; ++i) {
        double v;
        std::memcpy(&v, p + 8 * i, 8);
        out[i] = static_cast<Out>(v);
      }
      break;
    case DType::kF16:
      for (std::size_t i = 0; i < n; ++i) {
        std::uint16_t v;
        std::memcpy(&v, p + 2 * i, 2);
        out[i] = static_cast<Out>(half_to_float(v));
      }
      break;
    case DType::kBF16:
      for (std::size_t i = 0; i < n; ++i) {
        std::uint16_t v;
        std::memcpy(&v, p + 2 * i, 2);
        out[i] = static_cast<Out>(std::bit_cast<float>(static_cast<std::uint32_t>(v) << 16));
      }
      break;
    default:
      fail(ErrorKind::kFormat, "tensor " + name + " is not floating point");
  }
  return out;
}

}  // namespace

std::size_t dtype_size(DType dtype) {
  switch (dtype) {
    case DType::kF64:
    case DType::kI64: return 8;
    case DType::kF32:
    case DType::kI32: return 4;
    case DType::kF16:
    case DType::kBF16: return 2;
  }
  return 0;
}

std::int64_t TensorInfo::numel() const {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

SafetensorsFile SafetensorsFile::open(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  std::uint64_t header_len = 0;
  unsigned char len_bytes[8];
  in.read(reinterpret_cast<char*>(len_bytes), 8);
  if (!in) fail(ErrorKind::kFormat, path.string() + ": truncated safetensors header");
  for (int i = 7; i >= 0; --i) header_len = (header_len << 8) | len_bytes[i];
  if (header_len > (100u << 20)) fail(ErrorKind::kFormat, path.string() + ": header too large");
  std::string header(header_len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_len));
  if (!in) fail(ErrorKind::kFormat, path.string() + ": truncated safetensors header");

  SafetensorsFile file;
  file.path_ = path;
  json doc;
  try {
    doc = json::parse(header);
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, path.string() + ": bad header JSON: " + e.what());
  }
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (it.key() == "__metadata__") {
      for (auto m = it->begin(); m != it->end(); ++m)
        file.metadata_[m.key()] = m->is_string() ? m->get<std::string>() : m->dump();
      continue;
    }
    TensorInfo info;
    info.dtype = parse_dtype(it->at("dtype").get<std::string>());
    info.shape = it->at("shape").get<std::vector<std::int64_t>>();
    auto offsets = it->at("data_offsets").get<std::vector<std::size_t>>();
    if (offsets.size() != 2 || offsets[1] < offsets[0])
      fail(ErrorKind::kFormat, path.string() + ": bad offsets for " + it.key());
    info.begin = offsets[0];
    info.end = offsets[1];
    if (static_cast<std::size_t>(info.numel()) * dtype_size(info.dtype) != info.end - info.begin)
      fail(ErrorKind::kFormat, path.string() + ": size mismatch for " + it.key());
    file.tensors_.emplace(it.key(), std::move(info));
  }

  const auto data_start = static_cast<std::streamoff>(8 + header_len);
  in.seekg(0, std::ios::end);
  const auto total = static_cast<std::streamoff>(in.tellg());
  in.seekg(data_start);
  file.data_.resize(static_cast<std::size_t>(total - data_start));
  in.read(reinterpret_cast<char*>(file.data_.data()), static_cast<std::streamsize>(file.data_.size()));
  for (const auto& [name, info] : file.tensors_)
    if (info.end > file.data_.size())
      fail(ErrorKind::kFormat, path.string() + ": tensor " + name + " past end of file");
  return file;
}

bool SafetensorsFile::contains(const std::string& name) const { return tensors_.count(name) > 0; }

const TensorInfo& SafetensorsFile::info(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) fail(ErrorKind::kFormat, path_.string() + ": missing tensor " + name);
  return it->second;
}

std::vector<std::string> SafetensorsFile::names() const {
  std::vector<std::string> out;
  for (const auto& [name, info] : tensors_) out.push_back(name);
  return out;
}

std::vector<float> SafetensorsFile::read_f32(const std::string& name) const {
  return convert<float>(info(name), data_.data(), name);
}

std::vector<double> SafetensorsFile::read_f64(const std::string& name) const {
  return convert<double>(info(name), data_.data(), name);
}

void write_safetensors(const std::filesystem::path& path, const std::vector<TensorToWrite>& tensors,
                       const std::map<std::string, std::string>& metadata) {
  json header = json::object();
  if (!metadata.empty()) header["__metadata__"] = metadata;
  std::size_t offset = 0;
  for (const auto& t : tensors) {
    std::int64_t n = 1;
    for (auto d : t.shape) n *= d;
    if (static_cast<std::size_t>(n) * dtype_size(t.dtype) != t.bytes.size())
      fail(ErrorKind::kContract, "tensor " + t.name + " byte size does not match shape");
    header[t.name] = {{"dtype", dtype_name(t.dtype)},
                      {"shape", t.shape},
                      {"data_offsets", {offset, offset + t.bytes.size()}}};
    offset += t.bytes.size();
  }
  std::string text = header.dump();
  while ((8 + text.size()) % 8 != 0) text.push_back(' ');

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  std::uint64_t len = text.size();
  unsigned char len_bytes[8];
  for (int i = 0; i < 8; ++i) len_bytes[i] = static_cast<unsigned char>((len >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(len_bytes), 8);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& t : tensors)
    out.write(reinterpret_cast<const char*>(t.bytes.data()), static_cast<std::streamsize>(t.bytes.size()));
  if (!out) fail(ErrorKind::kIo, "short write to " + path.string());
}

}  // namespace phrasebias
