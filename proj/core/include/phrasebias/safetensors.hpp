// Copyright 2026 The phrasebias Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

namespace phrasebias {

enum class DType { kF64, kF32, kF16, kBF16, kI64, kI32 };

std::size_t dtype_size(DType dtype);

struct TensorInfo {
  DType dtype;
  std::vector<std::int64_t> shape;
  std::size_t begin = 0;  // byte offset into the data section
  std::size_t end = 0;

  std::int64_t numel() const;
};

// Reader for the safetensors container: 8-byte little-endian header length,
// a JSON header, then a flat byte buffer.
class SafetensorsFile {
 public:
  static SafetensorsFile open(const std::filesystem::path& path);

  bool contains(const std::string& name) const;
  const TensorInfo& info(const std::string& name) const;
  std::vector<std::string> names() const;
  const std::map<std::string, std::string>& metadata() const { return metadata_; }

  // Converts any floating dtype to the requested precision.
  std::vector<float> read_f32(const std::string& name) const;
  std::vector<double> read_f64(const std::string& name) const;

 private:
  std::filesystem::path path_;
  std::map<std::string, TensorInfo> tensors_;
  std::map<std::string, std::string> metadata_;
  std::vector<std::byte> data_;
};

struct TensorToWrite {
  std::string name;
  DType dtype;
  std::vector<std::int64_t> shape;
  std::span<const std::byte> bytes;
};

template <typename T>
TensorToWrite make_tensor(std::string name, std::vector<std::int64_t> shape,
                          std::span<const T> values) {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  return TensorToWrite{std::move(name), std::is_same_v<T, float> ? DType::kF32 : DType::kF64,
                       std::move(shape), std::as_bytes(values)};
}

void write_safetensors(const std::filesystem::path& path, const std::vector<TensorToWrite>& tensors,
                       const std::map<std::string, std::string>& metadata = {});

}  // namespace phrasebias
