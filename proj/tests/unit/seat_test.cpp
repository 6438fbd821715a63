// Copyright 2026 The phrasebias Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "phrasebias/seat.hpp"
#include "phrasebias/text_util.hpp"
#include "phrasebias/toy_backend.hpp"
#include "test_support.hpp"

namespace phrasebias {
namespace {

// One-word sentences with hand-set directions; [CLS] and [SEP] embed to zero.
std::unique_ptr<ToyBackend> vector_model(const std::vector<std::pair<std::string, std::vector<double>>>& words) {
  const int dim = static_cast<int>(words.front().second.size());
  std::vector<std::string> names;
  for (const auto& w : words) names.push_back(w.first);
  auto p = ToyParameters::zeros(4 + static_cast<int>(words.size()), dim, 8);
  for (std::size_t i = 0; i < words.size(); ++i)
    for (int j = 0; j < dim; ++j) p.embed(4 + static_cast<Eigen::Index>(i), j) = words[i].second[static_cast<std::size_t>(j)];
  return std::make_unique<ToyBackend>(p, names);
}

std::unique_ptr<ToyBackend> reference_model() {
  return vector_model({{"x1", {1.0, 0.2, 0.0}}, {"x2", {0.8, -0.1, 0.3}},
                       {"y1", {-0.2, 1.0, 0.1}}, {"y2", {0.1, 0.7, -0.4}},
                       {"a1", {1.0, 0.0, 0.0}}, {"a2", {0.9, 0.1, 0.2}},
                       {"b1", {0.0, 1.0, 0.0}}, {"b2", {0.2, 0.9, -0.1}}});
}

const SeatSpec kReferenceSpec{"ref", {"x1", "x2"}, {"y1", "y2"}, {"a1", "a2"}, {"b1", "b2"}};

TEST(Association, Examples) {
  auto model = vector_model({{"w", {1, 0}}, {"a", {2, 0}}, {"aa", {0.5, 0}}, {"b", {0, 1}}, {"bb", {0, 3}}});
  std::vector<std::string> a = {"a", "aa"}, b = {"b", "bb"};
  EXPECT_NEAR(association(*model, "w", a, b), 1.0, 1e-12);
  EXPECT_NEAR(association(*model, "w", a, a), 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(association(*model, "w", b, a), -association(*model, "w", a, b));
  EXPECT_ERROR_KIND(association(*model, "w", {}, b), ErrorKind::kContract);
}

TEST(Association, ZeroEmbeddingIsDegenerate) {
  auto model = vector_model({{"w", {0, 0}}, {"a", {1, 0}}, {"b", {0, 1}}});
  std::vector<std::string> a = {"a"}, b = {"b"};
  EXPECT_ERROR_KIND(association(*model, "w", a, b), ErrorKind::kDegeneracy);
}

TEST(EffectSize, MatchesReferenceScript) {
  // Value from tests/oracles/seat_reference.py.
  auto model = reference_model();
  EXPECT_NEAR(effect_size(*model, kReferenceSpec), 1.9718193979248093, 1e-9);
}

TEST(EffectSize, MatchesBruteForceFormula) {
  auto model = make_toy_backend(12, 80, 5);
  SeatSpec spec{"t", {"the nurse is here .", "a teacher", "dance class"},
                {"an engineer", "this is physics .", "lab work", "the algebra"},
                {"she is here .", "a woman"}, {"he is here .", "a man", "the boy"}};
  auto e = [&](const std::string& s) { return model->cls_embedding(model->tokenize(s)); };
  auto cosv = [](const Vector& u, const Vector& v) { return u.dot(v) / (u.norm() * v.norm()); };
  auto s = [&](const std::string& w) {
    double ma = 0, mb = 0;
    for (const auto& a : spec.attributes_a) ma += cosv(e(w), e(a));
    for (const auto& b : spec.attributes_b) mb += cosv(e(w), e(b));
    return ma / spec.attributes_a.size() - mb / spec.attributes_b.size();
  };
  std::vector<double> sx, sy, all;
  for (const auto& x : spec.targets_x) sx.push_back(s(x));
  for (const auto& y : spec.targets_y) sy.push_back(s(y));
  all = sx;
  all.insert(all.end(), sy.begin(), sy.end());
  auto mean = [](const std::vector<double>& v) { double t = 0; for (double x : v) t += x; return t / v.size(); };
  double var = 0;
  for (double x : all) var += (x - mean(all)) * (x - mean(all));
  const double expected = (mean(sx) - mean(sy)) / std::sqrt(var / all.size());
  EXPECT_NEAR(effect_size(*model, spec), expected, 1e-9);
}

TEST(EffectSize, SwapsNegateAndScaleLeavesUnchanged) {
  auto model = make_toy_backend(4, 80, 5);
  SeatSpec spec{"t", {"the nurse", "a teacher", "dance"}, {"an engineer", "physics", "lab work"},
                {"she", "woman", "girl"}, {"he", "man", "boy"}};
  const double d = effect_size(*model, spec);
  auto ab = spec;
  std::swap(ab.attributes_a, ab.attributes_b);
  EXPECT_NEAR(effect_size(*model, ab), -d, 1e-12);
  auto xy = spec;
  std::swap(xy.targets_x, xy.targets_y);
  EXPECT_NEAR(effect_size(*model, xy), -d, 1e-12);
  model->mutable_params().embed *= 2.5;
  EXPECT_NEAR(effect_size(*model, spec), d, 1e-9);
}

TEST(EffectSize, SymmetricModelHasNullEffect) {
  // Reflection through the last axis maps every X sentence onto a Y sentence
  // and leaves the attribute sets invariant, so X and Y are exchangeable.
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    std::vector<std::pair<std::string, std::vector<double>>> words;
    SeatSpec spec;
    spec.name = "null";
    for (int i = 0; i < 4; ++i) {
      std::vector<double> v = {g(rng), g(rng), g(rng), g(rng)};
      words.push_back({"x" + std::to_string(i), v});
      v[3] = -v[3];
      words.push_back({"y" + std::to_string(i), v});
      spec.targets_x.push_back("x" + std::to_string(i));
      spec.targets_y.push_back("y" + std::to_string(i));
    }
    for (const char* set : {"a", "b"})
      for (int i = 0; i < 2; ++i) {
        std::vector<double> v = {g(rng), g(rng), g(rng), g(rng)};
        const std::string name = set + std::to_string(i);
        words.push_back({name + "p", v});
        v[3] = -v[3];
        words.push_back({name + "m", v});
        auto& list = set[0] == 'a' ? spec.attributes_a : spec.attributes_b;
        list.push_back(name + "p");
        list.push_back(name + "m");
      }
    auto model = vector_model(words);
    EXPECT_LT(std::abs(effect_size(*model, spec)), 0.05) << "seed " << seed;
  }
}

TEST(EffectSize, ZeroSpreadIsDegenerate) {
  auto model = vector_model({{"x", {1, 0}}, {"y", {1, 0}}, {"a", {1, 0}}, {"b", {0, 1}}});
  SeatSpec spec{"flat", {"x"}, {"y"}, {"a"}, {"b"}};
  EXPECT_ERROR_KIND(effect_size(*model, spec), ErrorKind::kDegeneracy);
}

TEST(SeatSuite, AveragesMagnitudesAndRecordsFailures) {
  auto model = reference_model();
  auto flipped = kReferenceSpec;
  flipped.name = "flipped";
  std::swap(flipped.targets_x, flipped.targets_y);
  SeatSpec flat{"flat", {"a1"}, {"a1"}, {"a1"}, {"b1"}};
  std::vector<SeatSpec> specs = {kReferenceSpec, flipped, flat};
  const auto before = model->parameter_hash();
  auto report = run_seat_suite(*model, specs);
  EXPECT_EQ(model->parameter_hash(), before);
  ASSERT_EQ(report.tests.size(), 3u);
  EXPECT_NEAR(report.tests[1].signed_effect_size.value(), -1.9718193979248093, 1e-9);
  EXPECT_FALSE(report.tests[2].signed_effect_size.has_value());
  EXPECT_FALSE(report.tests[2].error.empty());
  EXPECT_NEAR(report.average, (report.tests[0].magnitude() + report.tests[1].magnitude()) / 2, 1e-12);

  std::vector<SeatSpec> single = {kReferenceSpec};
  EXPECT_NEAR(run_seat_suite(*model, single).average, 1.9718193979248093, 1e-9);
  EXPECT_ERROR_KIND(run_seat_suite(*model, {}), ErrorKind::kContract);
}

TEST(SeatSuite, ReportJsonRoundTripAndTable) {
  auto model = reference_model();
  std::vector<SeatSpec> specs = {kReferenceSpec};
  auto report = run_seat_suite(*model, specs);
  auto back = EffectSizeReport::from_json(report.to_json());
  EXPECT_EQ(back.body_json(), report.body_json());
  EXPECT_EQ(back.model_id, report.model_id);
  auto after = report;
  after.tests[0].signed_effect_size = 0.5;
  after.average = 0.5;
  auto table = format_delta_table(report, after);
  EXPECT_NE(table.find("ref"), std::string::npos);
  EXPECT_NE(table.find("avg."), std::string::npos);
  EXPECT_NE(table.find("-1.4718"), std::string::npos);
}

TEST(SeatSpecFile, LoadsBothListShapes) {
  testing::TempDir dir;
  write_file(dir / "seat-x.json",
             R"({"targ1": {"category": "c", "examples": ["a b"]}, "targ2": ["c"], "attr1": ["d"], "attr2": ["e"]})");
  auto spec = load_seat_spec(dir / "seat-x.json");
  EXPECT_EQ(spec.name, "seat-x");
  EXPECT_EQ(spec.targets_x, std::vector<std::string>{"a b"});
  write_file(dir / "bad.json", R"({"targ1": [], "targ2": ["c"], "attr1": ["d"], "attr2": ["e"]})");
  EXPECT_ERROR_KIND(load_seat_spec(dir / "bad.json"), ErrorKind::kConfig);
  write_file(dir / "missing.json", R"({"targ1": ["a"]})");
  EXPECT_ERROR_KIND(load_seat_spec(dir / "missing.json"), ErrorKind::kConfig);
}

}  // namespace
}  // namespace phrasebias
