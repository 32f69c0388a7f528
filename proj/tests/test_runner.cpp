#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "doge/runner.hpp"
#include "support.hpp"

namespace doge {
namespace {

namespace fs = std::filesystem;

class RunnerTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("doge_runner_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write(const std::string& name, const std::string& text) {
    const fs::path p = dir_ / name;
    std::ofstream(p, std::ios::binary) << text;
    return p.string();
  }

  std::string dataset(const std::vector<DialogueSample>& samples) {
    std::ostringstream ss;
    for (const DialogueSample& s : samples) {
      nlohmann::json hist = nlohmann::json::array();
      for (const DialogueTurn& t : s.history) hist.push_back({t.speaker, t.text});
      nlohmann::json j = {{"id", s.id}, {"history", hist}, {"user", s.user_utterance}, {"knowledge", s.knowledge}};
      if (s.reference) j["reference"] = *s.reference;
      ss << j.dump() << '\n';
    }
    return write("data.jsonl", ss.str());
  }

  RunConfig toy_run(const std::string& data, const std::string& out) {
    RunConfig rc;
    rc.dataset_path = data;
    rc.template_text = std::string(kCompactTemplate);
    rc.backend.corpus_from_dataset = true;
    rc.backend.toy.prior.copy_weight = 2.0;
    rc.decode.max_new_tokens = 24;
    rc.output_dir = (dir_ / out).string();
    return rc;
  }

  fs::path dir_;
};

TEST_F(RunnerTest, DecodePreservesOrderAndIsReproducible) {
  const std::string data = dataset(testing::synthetic_dialogues(5));
  RunConfig a = toy_run(data, "a");
  RunConfig b = toy_run(data, "b");
  b.workers = 3;
  EXPECT_EQ(cmd_decode(a), 0);
  EXPECT_EQ(cmd_decode(b), 0);
  const std::string pa = read_text_file((dir_ / "a" / "predictions.jsonl").string());
  const std::string pb = read_text_file((dir_ / "b" / "predictions.jsonl").string());
  EXPECT_EQ(pa, pb);
  std::istringstream in(pa);
  const auto lines = read_json_lines(in);
  ASSERT_EQ(lines.size(), 5u);
  for (std::size_t i = 0; i < lines.size(); ++i) EXPECT_EQ(lines[i]["id"], "syn" + std::to_string(i));
  const nlohmann::json cfg = nlohmann::json::parse(read_text_file((dir_ / "a" / "config.json").string()));
  EXPECT_EQ(cfg["decode"]["alpha"], 0.4);
  EXPECT_EQ(cfg["decode"]["strategy"], "doge");
}

TEST_F(RunnerTest, DogeWithLowGammaMatchesMaskedNucleusRun) {
  const std::string data = dataset(testing::synthetic_dialogues(4));
  RunConfig d = toy_run(data, "doge");
  d.decode.gamma = -10.0;
  RunConfig n = toy_run(data, "nuc");
  n.decode = DecodeConfig::defaults_for(Strategy::kNucleus);
  n.decode.max_new_tokens = 24;
  n.stream = PromptStream::kMasked;
  ASSERT_EQ(cmd_decode(d), 0);
  ASSERT_EQ(cmd_decode(n), 0);
  std::istringstream ind(read_text_file((dir_ / "doge" / "predictions.jsonl").string()));
  std::istringstream inn(read_text_file((dir_ / "nuc" / "predictions.jsonl").string()));
  const auto ld = read_json_lines(ind), ln = read_json_lines(inn);
  for (std::size_t i = 0; i < ld.size(); ++i) EXPECT_EQ(ld[i]["tokens"], ln[i]["tokens"]);
}

TEST_F(RunnerTest, FailuresAreIsolatedPerSample) {
  // The trace script only covers the first sample's prompt, so the second fails.
  testing::Scenario sc = testing::scripted_scenario();
  std::ostringstream trace;
  trace << "{\"meta\": {\"eos\": 5}}\n";
  const std::vector<std::vector<TokenId>> seqs = {{0, 1, 2}, {0, 4, 2}};
  for (const auto& s : seqs) {
    TraceBackend::Record r{s, sc.backend.forward(s)};
    trace << TraceBackend::to_json(r).dump() << '\n';
  }
  const std::string trace_path = write("trace.jsonl", trace.str());
  std::vector<DialogueSample> samples = testing::synthetic_dialogues(2);
  const TraceBackend backend = TraceBackend::load(trace_path);
  DecodeConfig cfg = DecodeConfig::defaults_for(Strategy::kGreedy);
  const auto records = decode_samples(samples, kCompactTemplate, backend, cfg);
  ASSERT_EQ(records.size(), 2u);
  EXPECT_TRUE(records[0].error.has_value());
  EXPECT_TRUE(records[1].error.has_value());

  RunConfig rc;
  rc.dataset_path = dataset(samples);
  rc.backend.kind = BackendConfig::Kind::kTrace;
  rc.backend.trace_path = trace_path;
  rc.output_dir = (dir_ / "t").string();
  EXPECT_EQ(cmd_decode(rc), 1);
  std::istringstream in(read_text_file((dir_ / "t" / "predictions.jsonl").string()));
  const auto lines = read_json_lines(in);
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_TRUE(lines[0].contains("error"));
}

TEST_F(RunnerTest, MixedSuccessAndFailure) {
  // First sample decodes, second hits a sequence longer than the context.
  std::vector<DialogueSample> samples = testing::synthetic_dialogues(2);
  samples[1].knowledge = std::string(600, 'k');
  RunConfig rc = toy_run(dataset(samples), "mixed");
  EXPECT_EQ(cmd_decode(rc), 1);
  std::istringstream in(read_text_file((dir_ / "mixed" / "predictions.jsonl").string()));
  const auto lines = read_json_lines(in);
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_FALSE(lines[0].contains("error"));
  EXPECT_TRUE(lines[1].contains("error"));
}

TEST_F(RunnerTest, UnreadableDatasetFailsBeforeWork) {
  RunConfig rc = toy_run((dir_ / "missing.jsonl").string(), "none");
  EXPECT_THROW(cmd_decode(rc), InvalidInputError);
  EXPECT_FALSE(fs::exists(dir_ / "none"));
}

TEST_F(RunnerTest, EvalOfReferencesScoresPerfectBleu) {
  const auto samples = testing::synthetic_dialogues(3);
  const std::string data = dataset(samples);
  std::ostringstream preds;
  for (const DialogueSample& s : samples) {
    preds << nlohmann::json{{"id", s.id}, {"strategy", "greedy"}, {"response", *s.reference}, {"tokens", {}},
                            {"trace", nlohmann::json::array()}}
                 .dump()
          << '\n';
  }
  const std::string pred_path = write("preds.jsonl", preds.str());
  const std::string before = read_text_file(pred_path);
  EvalOptions opts{pred_path, data, (dir_ / "report.json").string(), (dir_ / "per_sample.csv").string()};
  std::ostringstream table;
  MetricsReport rep;
  EXPECT_EQ(cmd_eval(opts, table, &rep), 0);
  EXPECT_DOUBLE_EQ(*rep.bleu1, 1.0);
  EXPECT_EQ(read_text_file(pred_path), before);
  const nlohmann::json j = nlohmann::json::parse(read_text_file(opts.report_path));
  EXPECT_DOUBLE_EQ(j["cfd"].get<double>(),
                   std::sqrt(100 * j["faithfulness_proxy"].get<double>() * 100 * j["distinct2"].get<double>()));
  EXPECT_NE(table.str().find("CFD"), std::string::npos);
  EXPECT_NE(read_text_file(opts.csv_path).find("syn2"), std::string::npos);
}

TEST_F(RunnerTest, EvalErrors) {
  const std::string data = dataset(testing::synthetic_dialogues(2));
  std::ostringstream table;
  EvalOptions empty{write("empty.jsonl", ""), data, "", ""};
  EXPECT_THROW(cmd_eval(empty, table), UndefinedMetricError);
  EvalOptions unknown{write("unknown.jsonl", "{\"id\": \"zzz\", \"strategy\": \"greedy\", \"response\": \"x\"}\n"),
                      data, "", ""};
  try {
    cmd_eval(unknown, table);
    FAIL();
  } catch (const NotFoundError& e) {
    EXPECT_NE(std::string(e.what()).find("zzz"), std::string::npos);
  }
}

TEST_F(RunnerTest, SweepPointEqualsDecodeThenEval) {
  const auto samples = testing::synthetic_dialogues(6);
  const std::string data = dataset(samples);
  RunConfig rc = toy_run(data, "sweep");
  rc.decode = DecodeConfig::defaults_for(Strategy::kNucleus);
  rc.decode.max_new_tokens = 24;
  std::vector<SweepRow> rows;
  EXPECT_EQ(cmd_sweep(rc, {{1.3, 0.95}}, &rows), 0);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_TRUE(fs::exists(dir_ / "sweep" / "sweep.csv"));

  RunConfig dec = rc;
  dec.decode.temperature = 1.3;
  dec.decode.top_p = 0.95;
  dec.output_dir = (dir_ / "dec").string();
  ASSERT_EQ(cmd_decode(dec), 0);
  EvalOptions opts{(dir_ / "dec" / "predictions.jsonl").string(), data, "", ""};
  std::ostringstream table;
  MetricsReport rep;
  cmd_eval(opts, table, &rep);
  EXPECT_EQ(rows[0].distinct2, rep.distinct2);
  EXPECT_EQ(rows[0].p_lcs, rep.p_lcs);
  EXPECT_EQ(rows[0].faithfulness_proxy, rep.faithfulness_proxy);
}

TEST_F(RunnerTest, SweepRequiresNucleus) {
  RunConfig rc = toy_run(dataset(testing::synthetic_dialogues(1)), "bad");
  EXPECT_THROW(cmd_sweep(rc, {{1.0, 0.9}}), ConfigError);
}

TEST_F(RunnerTest, InspectAnnotatesBranches) {
  testing::Scenario sc = testing::scripted_scenario();
  Rng rng(1);
  DecodeRecord rec{"s1", Strategy::kDoge, doge_decode(sc.prompt, sc.backend, sc.config, rng), std::nullopt};
  const std::string path = write("p.jsonl", dump_json(to_json(rec)) + "\n");

  std::ostringstream text;
  EXPECT_EQ(cmd_inspect(path, "s1", false, text), 0);
  EXPECT_NE(text.str().find("GROUND fraction: 2/3"), std::string::npos);

  std::ostringstream js;
  cmd_inspect(path, "s1", true, js);
  const nlohmann::json j = nlohmann::json::parse(js.str());
  ASSERT_EQ(j["steps"].size(), 3u);
  EXPECT_EQ(j["steps"][0]["knowledge"], "external");
  EXPECT_EQ(j["steps"][1]["knowledge"], "internal");
  EXPECT_EQ(j["steps"][2]["branch"], "GROUND");
  EXPECT_DOUBLE_EQ(j["ground_fraction"].get<double>(), 2.0 / 3.0);

  std::ostringstream sink;
  EXPECT_THROW(cmd_inspect(path, "nope", false, sink), NotFoundError);
}

TEST_F(RunnerTest, InspectAllDiversifyIsInternal) {
  const auto samples = testing::synthetic_dialogues(1);
  const ToyTransformer model(testing::toy_spec_for(samples));
  DecodeConfig cfg;
  cfg.gamma = -10.0;
  cfg.max_new_tokens = 10;
  Rng rng(3);
  DecodeRecord rec{"a", Strategy::kDoge,
                   doge_decode(assemble_prompt(samples[0], kCompactTemplate), model, cfg, rng), std::nullopt};
  const std::string path = write("p.jsonl", dump_json(to_json(rec)) + "\n");
  std::ostringstream js;
  cmd_inspect(path, "a", true, js);
  for (const auto& s : nlohmann::json::parse(js.str())["steps"]) EXPECT_EQ(s["knowledge"], "internal");
}

TEST(Serialization, RecordRoundTrip) {
  testing::Scenario sc = testing::scripted_scenario();
  Rng rng(1);
  DecodeRecord rec{"s1", Strategy::kDoge, doge_decode(sc.prompt, sc.backend, sc.config, rng), std::nullopt};
  const DecodeRecord back = record_from_json(nlohmann::json::parse(dump_json(to_json(rec))));
  ASSERT_TRUE(back.result.has_value());
  EXPECT_EQ(back.result->tokens, rec.result->tokens);
  for (std::size_t i = 0; i < rec.result->trace.size(); ++i) {
    const StepDecision& a = rec.result->trace[i];
    const StepDecision& b = back.result->trace[i];
    EXPECT_EQ(a.branch, b.branch);
    EXPECT_EQ(a.f_c.score, b.f_c.score);
    EXPECT_EQ(a.candidate_table, b.candidate_table);
    EXPECT_EQ(a.nucleus_size, b.nucleus_size);
  }
}

}  // namespace
}  // namespace doge
