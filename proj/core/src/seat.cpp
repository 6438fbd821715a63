// Copyright 2026 The phrasebias Authors
// SPDX-License-Identifier: Apache-2.0

#include "phrasebias/seat.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <limits>
#include <map>

#include <json.hpp>

#include "phrasebias/error.hpp"
#include "phrasebias/phrase_filter.hpp"
#include "phrasebias/text_util.hpp"

namespace phrasebias {

void SeatSpec::validate() const {
  auto check = [&](const std::vector<std::string>& list, const char* field) {
    if (list.empty()) fail(ErrorKind::kConfig, "SEAT test '" + name + "': field '" + field + "' is empty");
    for (const auto& s : list)
      if (trim(s).empty()) fail(ErrorKind::kConfig, "SEAT test '" + name + "': field '" + field + "' has a blank entry");
  };
  check(targets_x, "targ1");
  check(targets_y, "targ2");
  check(attributes_a, "attr1");
  check(attributes_b, "attr2");
}

SeatSpec load_seat_spec(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorKind::kConfig, "SEAT spec " + path.string() + " not found");
  SeatSpec spec;
  try {
    auto j = nlohmann::json::parse(read_file(path));
    spec.name = j.value("name", path.stem().string());
    auto list = [&](const char* key) {
      if (!j.contains(key)) fail(ErrorKind::kConfig, path.string() + ": missing field '" + key + "'");
      const auto& v = j.at(key);
      return (v.is_object() ? v.at("examples") : v).get<std::vector<std::string>>();
    };
    spec.targets_x = list("targ1");
    spec.targets_y = list("targ2");
    spec.attributes_a = list("attr1");
    spec.attributes_b = list("attr2");
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kConfig, path.string() + ": " + e.what());
  }
  spec.validate();
  return spec;
}

SentenceEncoder::SentenceEncoder(const MaskedLM& backend, EmbeddingCache* cache)
    : backend_(backend), cache_(cache), model_key_(cache != nullptr ? model_cache_key(backend) : std::string()) {}

Vector SentenceEncoder::encode(std::string_view sentence) const {
  if (cache_ == nullptr) return backend_.cls_embedding(backend_.tokenize(sentence));
  const auto key = EmbeddingCache::key(model_key_, "cls", sentence);
  if (auto hit = cache_->find(key)) return *hit;
  Vector value = backend_.cls_embedding(backend_.tokenize(sentence));
  cache_->insert(key, value);
  return value;
}

namespace {

std::vector<Vector> encode_all(const SentenceEncoder& encoder, std::span<const std::string> sentences) {
  std::vector<Vector> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) out.push_back(encoder.encode(s));
  return out;
}

double mean_cosine(const Vector& w, const std::vector<Vector>& set) {
  double total = 0.0;
  for (const auto& v : set) total += cosine(w, v);
  return total / static_cast<double>(set.size());
}

double association_of(const Vector& w, const std::vector<Vector>& a, const std::vector<Vector>& b) {
  return mean_cosine(w, a) - mean_cosine(w, b);
}

}  // namespace

double association(const SentenceEncoder& encoder, std::string_view sentence, std::span<const std::string> a,
                   std::span<const std::string> b) {
  if (a.empty() || b.empty()) fail(ErrorKind::kContract, "attribute sets must be non-empty");
  return association_of(encoder.encode(sentence), encode_all(encoder, a), encode_all(encoder, b));
}

double association(const MaskedLM& backend, std::string_view sentence, std::span<const std::string> a,
                   std::span<const std::string> b) {
  return association(SentenceEncoder(backend), sentence, a, b);
}

double effect_size(const SentenceEncoder& encoder, const SeatSpec& spec) {
  spec.validate();
  const auto a = encode_all(encoder, spec.attributes_a);
  const auto b = encode_all(encoder, spec.attributes_b);
  std::vector<double> sx, sy;
  for (const auto& x : spec.targets_x) sx.push_back(association_of(encoder.encode(x), a, b));
  for (const auto& y : spec.targets_y) sy.push_back(association_of(encoder.encode(y), a, b));
  auto mean = [](const std::vector<double>& v) {
    double t = 0.0;
    for (double x : v) t += x;
    return t / static_cast<double>(v.size());
  };
  std::vector<double> joint = sx;
  joint.insert(joint.end(), sy.begin(), sy.end());
  const double mu = mean(joint);
  double var = 0.0;
  for (double s : joint) var += (s - mu) * (s - mu);
  const double sd = std::sqrt(var / static_cast<double>(joint.size()));
  if (!(sd > 0.0)) fail(ErrorKind::kDegeneracy, "SEAT test '" + spec.name + "': zero pooled standard deviation");
  return (mean(sx) - mean(sy)) / sd;
}

double effect_size(const MaskedLM& backend, const SeatSpec& spec) {
  return effect_size(SentenceEncoder(backend), spec);
}

double SeatTestResult::magnitude() const {
  return signed_effect_size ? std::abs(*signed_effect_size) : std::numeric_limits<double>::quiet_NaN();
}

namespace {

nlohmann::json body(const EffectSizeReport& r) {
  nlohmann::json tests = nlohmann::json::array();
  for (const auto& t : r.tests) {
    nlohmann::json j{{"name", t.name}};
    if (t.signed_effect_size) {
      j["effect_size"] = t.magnitude();
      j["signed_effect_size"] = *t.signed_effect_size;
    } else {
      j["error"] = t.error;
    }
    tests.push_back(std::move(j));
  }
  return {{"model_id", r.model_id}, {"tests", tests}, {"average", r.average}};
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::string EffectSizeReport::body_json() const { return body(*this).dump(2) + "\n"; }

std::string EffectSizeReport::to_json() const {
  auto j = body(*this);
  j["timestamp"] = timestamp;
  return j.dump(2) + "\n";
}

EffectSizeReport EffectSizeReport::from_json(std::string_view text) {
  EffectSizeReport r;
  try {
    auto j = nlohmann::json::parse(text);
    r.model_id = j.at("model_id").get<std::string>();
    r.timestamp = j.value("timestamp", "");
    r.average = j.at("average").get<double>();
    for (const auto& t : j.at("tests")) {
      SeatTestResult result;
      result.name = t.at("name").get<std::string>();
      if (t.contains("signed_effect_size")) result.signed_effect_size = t.at("signed_effect_size").get<double>();
      else result.error = t.value("error", "");
      r.tests.push_back(std::move(result));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kFormat, std::string("effect size report: ") + e.what());
  }
  return r;
}

EffectSizeReport run_seat_suite(const MaskedLM& backend, std::span<const SeatSpec> specs, EmbeddingCache* cache) {
  if (specs.empty()) fail(ErrorKind::kContract, "SEAT suite has no tests");
  EmbeddingCache local;
  const SentenceEncoder encoder(backend, cache != nullptr ? cache : &local);
  EffectSizeReport report;
  report.model_id = backend.info().identifier;
  report.timestamp = utc_timestamp();
  double total = 0.0;
  int ok = 0;
  for (const auto& spec : specs) {
    SeatTestResult result;
    result.name = spec.name;
    try {
      result.signed_effect_size = effect_size(encoder, spec);
      total += result.magnitude();
      ++ok;
    } catch (const Error& e) {
      result.error = e.what();
    }
    report.tests.push_back(std::move(result));
  }
  report.average = ok > 0 ? total / ok : std::numeric_limits<double>::quiet_NaN();
  return report;
}

std::string format_delta_table(const EffectSizeReport& before, const EffectSizeReport& after) {
  std::map<std::string, double> after_values;
  for (const auto& t : after.tests) after_values[t.name] = t.magnitude();
  auto cell = [](double v) {
    char buf[32];
    if (std::isnan(v)) std::snprintf(buf, sizeof buf, "%10s", "n/a");
    else std::snprintf(buf, sizeof buf, "%10.4f", v);
    return std::string(buf);
  };
  auto row = [&](const std::string& name, double b, double a) {
    char label[32];
    std::snprintf(label, sizeof label, "%-10s", name.c_str());
    return std::string(label) + cell(b) + cell(a) + cell(a - b) + "\n";
  };
  std::string out = "test          before     after     delta\n";
  for (const auto& t : before.tests) {
    auto it = after_values.find(t.name);
    out += row(t.name, t.magnitude(), it == after_values.end() ? std::numeric_limits<double>::quiet_NaN() : it->second);
  }
  out += row("avg.", before.average, after.average);
  return out;
}

}  // namespace phrasebias
