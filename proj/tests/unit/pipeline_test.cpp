// Copyright 2026 The phrasebias Authors
// SPDX-License-Identifier: Apache-2.0

#include "phrasebias/pipeline.hpp"

#include <sys/wait.h>

#include <chrono>
#include <cstdlib>
#include <memory>

#include <json.hpp>

#include "phrasebias/hashing.hpp"
#include "phrasebias/text_util.hpp"
#include "test_support.hpp"

namespace phrasebias {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using testing::data_dir;
using testing::TempDir;

// Small toy run over the shipped data directory.
json toy_config(const fs::path& out) {
  const auto d = data_dir();
  return {{"model", "toy:7:2048:32"},
          {"seed", 7},
          {"output_dir", out.string()},
          {"paths",
           {{"seeds", (d / "seeds.txt").string()},
            {"attributes", (d / "attributes.csv").string()},
            {"templates", (d / "templates.txt").string()},
            {"frequency_list", (d / "frequency_en.tsv").string()},
            {"pages", (d / "pages").string()},
            {"seat", (d / "seat").string()},
            {"neutral_corpus", (d / "neutral_sentences.txt").string()}}},
          {"filter", {{"topk_per_hyponym", 10}, {"threads", 2}}},
          {"search", {{"max_length", 2}, {"beam_width", 6}, {"vocab_size", 30}, {"batch_size", 16}, {"threads", 2}}},
          {"train",
           {{"learning_rate", 0.01},
            {"weight_decay", 0.0},
            {"batch_size", 8},
            {"max_epochs", 3},
            {"patience", 2},
            {"eval_fraction", 0.1}}}};
}

RunConfig parse(const json& doc, std::vector<std::string> overrides = {}) {
  return RunConfig::from_json(doc.dump(), "/", overrides);
}

std::string file_text(const fs::path& p) { return read_file(p); }

// ---- configuration ----------------------------------------------------------

TEST(RunConfig, DefaultsFillMissingSections) {
  const auto c = RunConfig::from_json(R"({"model": "toy:1", "output_dir": "out"})", "/base");
  EXPECT_EQ(c.output_dir, fs::path("/base/out"));
  EXPECT_EQ(c.filter.topk_per_hyponym, 40);
  EXPECT_EQ(c.search.max_length, 5);
  EXPECT_EQ(c.search.beam_width, 100);
  EXPECT_EQ(c.search.vocab_size, 5000);
  EXPECT_TRUE(c.search.retain_per_length);
  EXPECT_TRUE(c.extended_attributes);
  EXPECT_EQ(c.pooling, ClsPooling::kRaw);
  EXPECT_EQ(c.train.optimizer, OptimizerKind::kAdamW);
}

TEST(RunConfig, RelativePathsResolveAgainstBase) {
  const auto c = RunConfig::from_json(R"({"model": "toy:1", "paths": {"seeds": "../data/seeds.txt"}})", "/a/b");
  EXPECT_EQ(c.paths.seeds, fs::path("/a/data/seeds.txt"));
}

TEST(RunConfig, SeatDirectoryExpandsToSortedJsonFiles) {
  const auto c = parse(toy_config("/tmp/x"));
  ASSERT_EQ(c.paths.seat.size(), 6u);
  EXPECT_EQ(c.paths.seat.front().filename(), "seat-6.json");
  EXPECT_EQ(c.paths.seat.back().filename(), "seat-8b.json");
  EXPECT_TRUE(std::is_sorted(c.paths.seat.begin(), c.paths.seat.end()));
}

TEST(RunConfig, OverridesTakeJsonOrBareStrings) {
  const auto c = parse(toy_config("/tmp/x"),
                       {"search.beam_width=17", "train.optimizer=sgd", "train.learning_rate=0.5", "pooling=pooler",
                        "search.retain_per_length=false"});
  EXPECT_EQ(c.search.beam_width, 17);
  EXPECT_EQ(c.train.optimizer, OptimizerKind::kSgd);
  EXPECT_DOUBLE_EQ(c.train.learning_rate, 0.5);
  EXPECT_EQ(c.pooling, ClsPooling::kPooler);
  EXPECT_FALSE(c.search.retain_per_length);
}

TEST(RunConfig, SeedPropagatesToTraining) {
  const auto c = parse(toy_config("/tmp/x"), {"seed=99"});
  EXPECT_EQ(c.train.seed, 99u);
}

TEST(RunConfig, RejectsMalformedInput) {
  EXPECT_ERROR_KIND(RunConfig::from_json("{", "/"), ErrorKind::kConfig);
  EXPECT_ERROR_KIND(parse(toy_config("/tmp/x"), {"search.beam_wdth=3"}), ErrorKind::kConfig);
  EXPECT_ERROR_KIND(parse(toy_config("/tmp/x"), {"search.beam_width=\"wide\""}), ErrorKind::kConfig);
  EXPECT_ERROR_KIND(parse(toy_config("/tmp/x"), {"pooling=mean"}), ErrorKind::kConfig);
  EXPECT_ERROR_KIND(parse(toy_config("/tmp/x"), {"train.optimizer=lbfgs"}), ErrorKind::kConfig);
  EXPECT_ERROR_KIND(parse(toy_config("/tmp/x"), {"no_equals_sign"}), ErrorKind::kConfig);
  EXPECT_ERROR_KIND(RunConfig::load("/definitely/not/here.json"), ErrorKind::kConfig);
}

TEST(RunConfig, ValidateNamesMissingInputs) {
  auto doc = toy_config("/tmp/x");
  doc["paths"]["templates"] = "/definitely/not/here.txt";
  try {
    parse(doc).validate();
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
    EXPECT_NE(std::string(e.what()).find("paths.templates"), std::string::npos);
  }
  EXPECT_ERROR_KIND(parse(toy_config("/tmp/x"), {"search.threads=0"}).validate(), ErrorKind::kConfig);
  EXPECT_ERROR_KIND(parse(toy_config("/tmp/x"), {"train.eval_fraction=0.7"}).validate(), ErrorKind::kConfig);
}

TEST(RunConfig, ShippedConfigsParse) {
  for (const char* name : {"toy.json", "full_scale.json", "reduced_distilbert.json"}) {
    const auto c = RunConfig::load(data_dir() / "configs" / name);
    EXPECT_FALSE(c.model.empty()) << name;
    EXPECT_EQ(c.paths.seat.size(), 6u) << name;
  }
  const auto reduced = RunConfig::load(data_dir() / "configs" / "reduced_distilbert.json");
  EXPECT_EQ(reduced.search.vocab_size, 500);
  EXPECT_EQ(reduced.search.max_length, 3);
  EXPECT_EQ(reduced.search.beam_width, 20);
}

TEST(RunConfig, StageHashesTrackOnlyRelevantSettings) {
  const auto base = parse(toy_config("/tmp/x"));
  const auto beam = parse(toy_config("/tmp/x"), {"search.beam_width=7"});
  const auto lr = parse(toy_config("/tmp/x"), {"train.learning_rate=0.2"});
  const auto threads = parse(toy_config("/tmp/x"), {"search.threads=5", "filter.threads=3"});
  const auto moved = parse(toy_config("/tmp/elsewhere"));

  EXPECT_EQ(base.stage_hash(Stage::kFilter), beam.stage_hash(Stage::kFilter));
  EXPECT_NE(base.stage_hash(Stage::kSearch), beam.stage_hash(Stage::kSearch));
  EXPECT_EQ(base.stage_hash(Stage::kSearch), lr.stage_hash(Stage::kSearch));
  EXPECT_NE(base.stage_hash(Stage::kDebias), lr.stage_hash(Stage::kDebias));
  for (auto s : {Stage::kFilter, Stage::kSearch, Stage::kDebias, Stage::kEval}) {
    EXPECT_EQ(base.stage_hash(s), threads.stage_hash(s));
    EXPECT_EQ(base.stage_hash(s), moved.stage_hash(s));
  }
}

TEST(ExitCodes, MapErrorKinds) {
  EXPECT_EQ(exit_code_for(ErrorKind::kConfig), 2);
  EXPECT_EQ(exit_code_for(ErrorKind::kFormat), 2);
  EXPECT_EQ(exit_code_for(ErrorKind::kParse), 2);
  EXPECT_EQ(exit_code_for(ErrorKind::kCapability), 2);
  EXPECT_EQ(exit_code_for(ErrorKind::kDependency), 3);
  EXPECT_EQ(exit_code_for(ErrorKind::kConsistency), 3);
  EXPECT_EQ(exit_code_for(ErrorKind::kIo), 3);
  EXPECT_EQ(exit_code_for(ErrorKind::kNumerical), 4);
  EXPECT_EQ(exit_code_for(ErrorKind::kTraining), 4);
  EXPECT_EQ(exit_code_for(ErrorKind::kSearch), 4);
  EXPECT_EQ(exit_code_for(ErrorKind::kDegeneracy), 4);
  EXPECT_EQ(exit_code_for(ErrorKind::kContract), 1);
  EXPECT_EQ(exit_code_for(ErrorKind::kDomain), 1);
  EXPECT_EQ(kExitEmptyOutput, 5);
}

// ---- end to end on the toy backend ------------------------------------------

class ToyRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = std::make_unique<TempDir>();
    config_ = std::make_unique<RunConfig>(parse(toy_config(dir_->path() / "run")));
    const auto started = std::chrono::steady_clock::now();
    status_ = cmd_all(*config_);
    seconds_ = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  }
  static void TearDownTestSuite() {
    config_.reset();
    dir_.reset();
  }
  static fs::path out(const char* name) { return config_->output_dir / name; }

  static inline std::unique_ptr<TempDir> dir_;
  static inline std::unique_ptr<RunConfig> config_;
  static inline StageStatus status_ = StageStatus::kEmptyOutput;
  static inline double seconds_ = 0.0;
};

TEST_F(ToyRun, CompletesQuicklyAndWritesEveryArtifact) {
  EXPECT_EQ(status_, StageStatus::kOk);
  EXPECT_LT(seconds_, 60.0);
  for (const char* name : {artifacts::kCandidates, artifacts::kWeighted, artifacts::kUnweighted,
                           artifacts::kFilterSummary, artifacts::kPrompts, artifacts::kDebiased,
                           artifacts::kTrainReport, artifacts::kBaselineReport, artifacts::kDeltaReport})
    EXPECT_TRUE(fs::exists(out(name))) << name;
  EXPECT_TRUE(fs::exists(out("seat_debiased.json")));
}

TEST_F(ToyRun, FilterSummaryIsConsistent) {
  const auto summary = json::parse(file_text(out(artifacts::kFilterSummary)));
  EXPECT_EQ(summary["pages"].get<int>(), 12);
  EXPECT_GT(summary["candidates"].get<int>(), 0);
  EXPECT_GE(summary["weighted_entries"].get<int>(), summary["unweighted_phrases"].get<int>());
  ASSERT_EQ(summary["topics"].size(), 4u);
  for (const auto& t : summary["topics"]) EXPECT_GT(t["unweighted"].get<int>(), 0) << t["topic"];
}

TEST_F(ToyRun, PromptsAreRankedWithProvenance) {
  std::vector<std::string> lines;
  for (const auto& l : read_content_lines(out(artifacts::kPrompts))) lines.push_back(l.text);
  ASSERT_GE(lines.size(), 2u);
  const auto header = json::parse(lines[0])["provenance"];
  EXPECT_EQ(header["model_id"], "toy:7:2048:32");
  EXPECT_EQ(header["max_length"], 2);
  EXPECT_EQ(header["beam_width"], 6);
  EXPECT_EQ(header["config_hash"], config_->stage_hash(Stage::kSearch));
  EXPECT_EQ(lines.size() - 1, 12u);  // beam_width prompts per length
  double previous = 1e300;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const double loss = json::parse(lines[i])["loss"].get<double>();
    EXPECT_LE(loss, previous);
    previous = loss;
  }
}

TEST_F(ToyRun, TrainingImprovesHeldOutLoss) {
  const auto report = json::parse(file_text(out(artifacts::kTrainReport)));
  EXPECT_LT(report["best_heldout_loss"].get<double>(), report["initial_heldout_loss"].get<double>());
  EXPECT_GE(report["best_epoch"].get<int>(), 1);
}

TEST_F(ToyRun, DeltaReportComparesBothEvaluations) {
  const auto baseline = json::parse(file_text(out(artifacts::kBaselineReport)));
  const auto after = json::parse(file_text(out("seat_debiased.json")));
  const auto delta = json::parse(file_text(out(artifacts::kDeltaReport)));
  EXPECT_DOUBLE_EQ(delta["before_average"].get<double>(), baseline["average"].get<double>());
  EXPECT_DOUBLE_EQ(delta["after_average"].get<double>(), after["average"].get<double>());
  EXPECT_TRUE(baseline.contains("pseudo_perplexity"));
  EXPECT_TRUE(delta.contains("pseudo_perplexity"));
  EXPECT_NE(delta["table"].get<std::string>().find("seat-8b"), std::string::npos);
}

TEST_F(ToyRun, SidecarsRecordHashesAndUpstream) {
  const auto prompts = json::parse(file_text(out("prompts.jsonl.provenance.json")));
  EXPECT_EQ(prompts["stage"], "search");
  EXPECT_EQ(prompts["sha256"], sha256_file(out(artifacts::kPrompts)));
  EXPECT_EQ(prompts["upstream"][artifacts::kUnweighted], sha256_file(out(artifacts::kUnweighted)));
  const auto model = json::parse(file_text(out("debiased.provenance.json")));
  EXPECT_EQ(model["stage"], "debias");
  EXPECT_EQ(model["sha256"], sha256_directory(out(artifacts::kDebiased)));
}

TEST_F(ToyRun, RerunIsByteIdenticalAcrossThreadCounts) {
  TempDir other;
  const auto again = parse(toy_config(other / "run"), {"search.threads=1", "filter.threads=1"});
  ASSERT_EQ(cmd_all(again), StageStatus::kOk);
  for (const char* name : {artifacts::kCandidates, artifacts::kWeighted, artifacts::kUnweighted,
                           artifacts::kFilterSummary, artifacts::kPrompts, artifacts::kDeltaReport})
    EXPECT_EQ(file_text(out(name)), file_text(again.output_dir / name)) << name;
  // SEAT reports carry a timestamp and the evaluated model's path; the rest must match.
  for (const char* name : {artifacts::kBaselineReport, "seat_debiased.json"}) {
    auto a = json::parse(file_text(out(name)));
    auto b = json::parse(file_text(again.output_dir / name));
    for (auto* doc : {&a, &b}) {
      doc->erase("timestamp");
      doc->erase("model_id");
    }
    EXPECT_EQ(a.dump(), b.dump()) << name;
  }
  EXPECT_EQ(sha256_directory(out(artifacts::kDebiased)), sha256_directory(again.output_dir / artifacts::kDebiased));
  auto a = json::parse(file_text(out(artifacts::kTrainReport)));
  auto b = json::parse(file_text(again.output_dir / artifacts::kTrainReport));
  a.erase("wall_seconds");
  b.erase("wall_seconds");
  EXPECT_EQ(a, b);
}

TEST_F(ToyRun, DebiasResumesFromCompletedCheckpoint) {
  const auto before = sha256_directory(out(artifacts::kDebiased));
  auto report = json::parse(file_text(out(artifacts::kTrainReport)));
  ASSERT_EQ(cmd_debias(*config_), StageStatus::kOk);
  EXPECT_EQ(sha256_directory(out(artifacts::kDebiased)), before);
  auto resumed = json::parse(file_text(out(artifacts::kTrainReport)));
  report.erase("wall_seconds");
  resumed.erase("wall_seconds");
  EXPECT_EQ(report, resumed);
}

TEST_F(ToyRun, ChangedSettingsInvalidateDownstreamStages) {
  const auto changed = parse(toy_config(config_->output_dir), {"search.beam_width=5"});
  EXPECT_ERROR_KIND(cmd_debias(changed), ErrorKind::kDependency);
  StageOptions force;
  force.force = true;
  EXPECT_NO_THROW(cmd_debias(changed, force));
}

TEST_F(ToyRun, EditedArtifactIsDetected) {
  TempDir copy;
  fs::copy(config_->output_dir, copy / "run", fs::copy_options::recursive);
  const auto moved = parse(toy_config(copy / "run"));
  write_file(copy / "run" / artifacts::kUnweighted, file_text(out(artifacts::kUnweighted)) + "\n");
  try {
    cmd_search(moved);
    FAIL() << "expected a dependency error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDependency);
    EXPECT_NE(std::string(e.what()).find("changed after cmd_filter"), std::string::npos);
  }
}

TEST_F(ToyRun, EvaluatesAnExplicitCheckpointUnderItsLabel) {
  StageOptions options;
  options.checkpoint = out(artifacts::kDebiased);
  options.eval_label = "again";
  ASSERT_EQ(cmd_eval(*config_, options), StageStatus::kOk);
  const auto a = json::parse(file_text(out("seat_again.json")));
  const auto b = json::parse(file_text(out("seat_debiased.json")));
  EXPECT_EQ(a["average"], b["average"]);
}

// ---- failure modes ----------------------------------------------------------

TEST(PipelineErrors, MissingUpstreamArtifactIsADependencyError) {
  TempDir dir;
  const auto c = parse(toy_config(dir / "run"));
  EXPECT_ERROR_KIND(cmd_search(c), ErrorKind::kDependency);
  EXPECT_ERROR_KIND(cmd_debias(c), ErrorKind::kDependency);
  StageOptions eval;
  eval.checkpoint = dir / "run" / "nope";
  EXPECT_ERROR_KIND(cmd_eval(c, eval), ErrorKind::kDependency);
}

TEST(PipelineErrors, ErrorsNameTheStage) {
  TempDir dir;
  try {
    cmd_search(parse(toy_config(dir / "run")));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.message().rfind("search: ", 0), 0u) << e.what();
    EXPECT_EQ(std::string(e.what()).rfind("dependency error: search: ", 0), 0u) << e.what();
  }
}

TEST(PipelineErrors, EmptyCorpusCompletesWithEmptyOutput) {
  TempDir dir;
  fs::create_directories(dir / "pages");
  write_file(dir / "pages" / "plain.wiki", "A page without a single link.\n");
  auto doc = toy_config(dir / "run");
  doc["paths"]["pages"] = (dir / "pages").string();
  const auto c = parse(doc);
  EXPECT_EQ(cmd_filter(c), StageStatus::kEmptyOutput);
  const auto summary = json::parse(file_text(dir / "run" / artifacts::kFilterSummary));
  EXPECT_EQ(summary["candidates"], 0);
  EXPECT_TRUE(summary.contains("warning"));
  EXPECT_EQ(cmd_all(c), StageStatus::kEmptyOutput);
  EXPECT_ERROR_KIND(cmd_search(c), ErrorKind::kDependency);
}

TEST(PipelineErrors, MalformedPageIsAParseError) {
  TempDir dir;
  fs::create_directories(dir / "pages");
  write_file(dir / "pages" / "broken.wiki", "An [[unterminated link\n");
  auto doc = toy_config(dir / "run");
  doc["paths"]["pages"] = (dir / "pages").string();
  EXPECT_ERROR_KIND(cmd_filter(parse(doc)), ErrorKind::kParse);
}

TEST(PipelineErrors, EvalWithoutSeatSpecsIsAConfigError) {
  TempDir dir;
  auto doc = toy_config(dir / "run");
  doc["paths"].erase("seat");
  EXPECT_ERROR_KIND(cmd_eval(parse(doc)), ErrorKind::kConfig);
}

// ---- command line -----------------------------------------------------------

#ifdef PHRASEBIAS_CLI
int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + PHRASEBIAS_CLI + "\" " + args + " >/dev/null 2>&1";
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

TEST(Cli, ExitCodesFollowErrorClasses) {
  TempDir dir;
  const auto config = dir / "config.json";
  write_file(config, toy_config(dir / "run").dump());
  EXPECT_EQ(run_cli("search -c " + config.string()), 3);
  EXPECT_EQ(run_cli("filter -c " + config.string() + " --set search.bogus=1"), 2);
  EXPECT_EQ(run_cli("filter -c " + config.string()), 0);
  EXPECT_EQ(run_cli("search -c " + config.string()), 0);
  EXPECT_EQ(run_cli("debias -c " + config.string() + " --set search.beam_width=9"), 3);

  auto empty = toy_config(dir / "empty");
  fs::create_directories(dir / "pages");
  write_file(dir / "pages" / "plain.wiki", "No links here.\n");
  empty["paths"]["pages"] = (dir / "pages").string();
  write_file(dir / "empty.json", empty.dump());
  EXPECT_EQ(run_cli("filter -c " + (dir / "empty.json").string()), 5);
}
#endif

}  // namespace
}  // namespace phrasebias
