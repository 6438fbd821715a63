// Copyright 2026 The phrasebias Authors
// SPDX-License-Identifier: Apache-2.0

#include <fstream>

#include <gtest/gtest.h>

#include "phrasebias/hashing.hpp"
#include "phrasebias/safetensors.hpp"
#include "phrasebias/text_util.hpp"
#include "test_support.hpp"

namespace phrasebias {
namespace {

TEST(Safetensors, WriteReadRoundTrip) {
  testing::TempDir dir;
  std::vector<double> a = {1.5, -2.25, 3.0, 4.0, 5.0, 6.0};
  std::vector<float> b = {0.5f};
  write_safetensors(dir / "t.safetensors",
                    {make_tensor<double>("a", {2, 3}, std::span<const double>(a)),
                     make_tensor<float>("b", {1}, std::span<const float>(b))},
                    {{"note", "x"}});
  auto f = SafetensorsFile::open(dir / "t.safetensors");
  EXPECT_TRUE(f.contains("a"));
  EXPECT_FALSE(f.contains("c"));
  EXPECT_EQ(f.info("a").shape, (std::vector<std::int64_t>{2, 3}));
  EXPECT_EQ(f.read_f64("a"), a);
  EXPECT_EQ(f.read_f32("b"), b);
  EXPECT_EQ(f.read_f64("b"), std::vector<double>{0.5});
  EXPECT_EQ(f.metadata().at("note"), "x");
}

TEST(Safetensors, ReadsTransformersOutput) {
  auto f = SafetensorsFile::open(testing::fixture_dir() / "tiny_bert" / "model.safetensors");
  const auto& info = f.info("bert.embeddings.word_embeddings.weight");
  EXPECT_EQ(info.shape.size(), 2u);
  EXPECT_EQ(info.shape[1], 16);
  EXPECT_EQ(f.read_f32("bert.embeddings.word_embeddings.weight").size(),
            static_cast<std::size_t>(info.numel()));
}

TEST(Safetensors, TruncatedFileIsFormatError) {
  testing::TempDir dir;
  std::ofstream(dir / "bad.safetensors", std::ios::binary) << "abc";
  EXPECT_ERROR_KIND(SafetensorsFile::open(dir / "bad.safetensors"), ErrorKind::kFormat);
  EXPECT_ERROR_KIND(SafetensorsFile::open(dir / "missing.safetensors"), ErrorKind::kIo);
}

TEST(Hashing, KnownDigest) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Hashing, DirectoryHashTracksContent) {
  testing::TempDir dir;
  write_file(dir / "a.txt", "one");
  std::filesystem::create_directories(dir / "sub");
  write_file(dir / "sub" / "b.txt", "two");
  const auto first = sha256_directory(dir.path());
  EXPECT_EQ(sha256_directory(dir.path()), first);
  write_file(dir / "sub" / "b.txt", "three");
  EXPECT_NE(sha256_directory(dir.path()), first);
}

TEST(TextUtil, ContentLinesSkipComments) {
  testing::TempDir dir;
  write_file(dir / "f.txt", "# header\n  alpha  # trailing\n\n beta\n");
  auto lines = read_content_lines(dir / "f.txt");
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(trim(lines[0].text), "alpha");
  EXPECT_EQ(lines[1].text, " beta");
  EXPECT_EQ(lines[0].number, 2);
  EXPECT_EQ(lines[1].number, 4);
  EXPECT_EQ(normalize_whitespace("  a \t b\n"), "a b");
}

}  // namespace
}  // namespace phrasebias
