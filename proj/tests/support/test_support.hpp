// Copyright 2026 The phrasebias Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "phrasebias/error.hpp"

namespace phrasebias::testing {

inline std::filesystem::path fixture_dir() { return PHRASEBIAS_FIXTURE_DIR; }
inline std::filesystem::path data_dir() { return PHRASEBIAS_DATA_DIR; }

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("phrasebias-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

template <typename F>
ErrorKind error_kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected phrasebias::Error";
  return ErrorKind::kIo;
}

}  // namespace phrasebias::testing

#define EXPECT_ERROR_KIND(stmt, kind) \
  EXPECT_EQ(::phrasebias::testing::error_kind_of([&] { stmt; }), (kind))
