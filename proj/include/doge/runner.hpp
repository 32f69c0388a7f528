#pragma once

// Batch commands behind the command-line tool: decode a dataset, evaluate
// predictions, sweep sampling knobs and inspect per-step traces.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "doge/data.hpp"
#include "doge/decoding.hpp"
#include "doge/default_template.hpp"
#include "doge/metrics.hpp"
#include "doge/serialization.hpp"
#include "doge/toy_transformer.hpp"
#include "doge/trace_backend.hpp"

namespace doge {

struct BackendConfig {
  enum class Kind { kToy, kTrace };
  Kind kind = Kind::kToy;
  ToyTransformerSpec toy;
  std::string trace_path;
  std::vector<std::string> corpus_files;  // one document per line
  bool corpus_from_dataset = false;       // add every sample's knowledge as a document
};

struct RunConfig {
  std::string dataset_path;
  std::string template_text{kDefaultTemplate};
  BackendConfig backend;
  DecodeConfig decode;
  std::string output_dir = "out";
  std::size_t workers = 1;
  PromptStream stream = PromptStream::kExposed;

  void validate() const {
    if (workers < 1) throw ConfigError("workers must be >= 1");
    decode.validate();
  }
};

inline nlohmann::json to_json(const BackendConfig& b) {
  if (b.kind == BackendConfig::Kind::kTrace) return {{"kind", "trace"}, {"trace_path", b.trace_path}};
  const ToyTransformerSpec& t = b.toy;
  return {{"kind", "toy"},
          {"layers", t.layers},
          {"heads", t.heads},
          {"d_model", t.d_model},
          {"d_ff", t.d_ff},
          {"max_positions", t.max_positions},
          {"seed", t.seed},
          {"prior_order", t.prior.order},
          {"prior_weight", t.prior.weight},
          {"prior_smoothing", t.prior.smoothing},
          {"copy_weight", t.prior.copy_weight},
          {"corpus_files", b.corpus_files},
          {"corpus_from_dataset", b.corpus_from_dataset}};
}

inline nlohmann::json to_json(const RunConfig& rc) {
  return {{"dataset", rc.dataset_path},
          {"template", rc.template_text},
          {"backend", to_json(rc.backend)},
          {"decode", to_json(rc.decode)},
          {"workers", rc.workers},
          {"prompt_stream", rc.stream == PromptStream::kExposed ? "exposed" : "masked"}};
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInputError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::unique_ptr<Backend> make_backend(const BackendConfig& cfg, const std::vector<DialogueSample>& samples) {
  if (cfg.kind == BackendConfig::Kind::kTrace) {
    return std::make_unique<TraceBackend>(TraceBackend::load(cfg.trace_path));
  }
  ToyTransformerSpec spec = cfg.toy;
  for (const std::string& path : cfg.corpus_files) {
    std::ifstream in(path);
    if (!in) throw InvalidInputError("cannot open corpus: " + path);
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty()) spec.prior.corpus.push_back(line);
    }
  }
  if (cfg.corpus_from_dataset) {
    for (const DialogueSample& s : samples) spec.prior.corpus.push_back(s.knowledge);
  }
  return std::make_unique<ToyTransformer>(std::move(spec));
}

/// Decodes every sample; record i belongs to sample i whatever the worker
/// schedule. Sample i draws from Rng(derive_seed(config.seed, i)).
inline std::vector<DecodeRecord> decode_samples(const std::vector<DialogueSample>& samples,
                                                std::string_view template_text, const Backend& backend,
                                                const DecodeConfig& config, std::size_t workers = 1,
                                                PromptStream stream = PromptStream::kExposed) {
  config.validate();
  std::vector<DecodeRecord> records(samples.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < samples.size(); i = next++) {
      DecodeRecord& r = records[i];
      r.id = samples[i].id;
      r.strategy = config.strategy;
      try {
        const AssembledPrompt prompt = assemble_prompt(samples[i], template_text);
        Rng rng(derive_seed(config.seed, i));
        r.result = decode(prompt, backend, config, rng, stream);
      } catch (const std::exception& e) {
        r.error = e.what();
      }
    }
  };
  const std::size_t n = std::min(std::max<std::size_t>(workers, 1), std::max<std::size_t>(samples.size(), 1));
  if (n == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n; ++w) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }
  return records;
}

inline void write_records(const std::vector<DecodeRecord>& records, std::ostream& out) {
  for (const DecodeRecord& r : records) out << dump_json(to_json(r)) << '\n';
}

struct DecodeSummary {
  std::size_t total = 0;
  std::size_t failed = 0;
  std::filesystem::path predictions;
};

/// Writes <output_dir>/predictions.jsonl and <output_dir>/config.json.
/// Returns 0 iff every sample decoded.
inline int cmd_decode(const RunConfig& rc, DecodeSummary* summary = nullptr) {
  rc.validate();
  const std::vector<DialogueSample> samples = load_jsonl(rc.dataset_path);
  const std::unique_ptr<Backend> backend = make_backend(rc.backend, samples);
  const std::vector<DecodeRecord> records =
      decode_samples(samples, rc.template_text, *backend, rc.decode, rc.workers, rc.stream);

  const std::filesystem::path dir(rc.output_dir);
  std::filesystem::create_directories(dir);
  const std::filesystem::path pred = dir / "predictions.jsonl";
  {
    std::ofstream out(pred, std::ios::binary);
    if (!out) throw InvalidInputError("cannot write " + pred.string());
    write_records(records, out);
  }
  {
    std::ofstream out(dir / "config.json", std::ios::binary);
    out << dump_json(to_json(rc), 2) << '\n';
  }
  std::size_t failed = 0;
  for (const DecodeRecord& r : records) failed += r.error ? 1 : 0;
  if (summary) *summary = {records.size(), failed, pred};
  return failed == 0 ? 0 : 1;
}

inline nlohmann::json to_json(const MetricsReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  return {{"samples", r.samples},
          {"with_reference", r.with_reference},
          {"proxy_undefined", r.proxy_undefined},
          {"bleu1", opt(r.bleu1)},
          {"bleu2", opt(r.bleu2)},
          {"distinct1", r.distinct1},
          {"distinct2", r.distinct2},
          {"ent1", r.ent1},
          {"ent2", r.ent2},
          {"p_lcs", r.p_lcs},
          {"coverage_mean", r.coverage_mean},
          {"density_mean", r.density_mean},
          {"faithfulness_proxy", r.faithfulness_proxy},
          {"faithfulness_measure", "lexical content-word precision proxy"},
          {"cfd", r.cfd}};
}

/// Pairs successful prediction records with their dataset samples. Records
/// holding an error are skipped and counted in `failed`.
inline std::vector<EvalEntry> join_predictions(const std::vector<nlohmann::json>& predictions,
                                               const std::vector<DialogueSample>& dataset, std::size_t* failed,
                                               std::vector<std::string>* ids = nullptr) {
  std::unordered_map<std::string, const DialogueSample*> by_id;
  for (const DialogueSample& s : dataset) by_id.emplace(s.id, &s);
  std::vector<std::string> missing;
  std::vector<EvalEntry> entries;
  std::size_t errors = 0;
  for (const nlohmann::json& p : predictions) {
    if (!p.contains("id") || !p["id"].is_string()) throw InvalidInputError("prediction without a string id");
    const std::string id = p["id"].get<std::string>();
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      missing.push_back(id);
      continue;
    }
    if (p.contains("error")) {
      ++errors;
      continue;
    }
    entries.push_back({p.at("response").get<std::string>(), it->second->knowledge, it->second->reference});
    if (ids) ids->push_back(id);
  }
  if (!missing.empty()) {
    std::string list;
    for (const std::string& id : missing) list += (list.empty() ? "" : ", ") + id;
    throw NotFoundError("prediction ids missing from the dataset: " + list);
  }
  if (failed) *failed = errors;
  return entries;
}

inline std::string format_number(double v, int precision = 4) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(precision) << v;
  return ss.str();
}

inline void print_report_table(const MetricsReport& r, std::ostream& out) {
  const std::vector<std::pair<std::string, std::string>> rows = {
      {"BLEU-1", r.bleu1 ? format_number(*r.bleu1) : "n/a"},
      {"BLEU-2", r.bleu2 ? format_number(*r.bleu2) : "n/a"},
      {"Dist-1", format_number(r.distinct1)},
      {"Dist-2", format_number(r.distinct2)},
      {"Ent-1", format_number(r.ent1)},
      {"Ent-2", format_number(r.ent2)},
      {"P-LCS", format_number(r.p_lcs)},
      {"Coverage", format_number(r.coverage_mean)},
      {"Density", format_number(r.density_mean)},
      {"Faith (proxy)", format_number(r.faithfulness_proxy)},
      {"CFD", format_number(r.cfd, 2)},
  };
  std::size_t width = 0;
  for (const auto& [name, _] : rows) width = std::max(width, name.size());
  for (const auto& [name, value] : rows) {
    out << std::left << std::setw(static_cast<int>(width + 2)) << name << std::right << std::setw(10) << value
        << '\n';
  }
  out << "samples: " << r.samples << ", with reference: " << r.with_reference
      << ", proxy undefined: " << r.proxy_undefined << '\n';
}

inline void write_per_sample_csv(const MetricsReport& r, const std::vector<std::string>& ids, std::ostream& out) {
  out << "id,bleu1,bleu2,p_lcs,coverage,density,faithfulness_proxy,proxy_undefined\n";
  auto opt = [](const std::optional<double>& v) { return v ? format_number(*v, 6) : std::string(); };
  for (std::size_t i = 0; i < r.per_sample.size(); ++i) {
    const SampleMetrics& s = r.per_sample[i];
    out << '"' << ids[i] << '"' << ',' << opt(s.bleu1) << ',' << opt(s.bleu2) << ',' << format_number(s.p_lcs, 6)
        << ',' << format_number(s.coverage, 6) << ',' << format_number(s.density, 6) << ','
        << format_number(s.faithfulness.value, 6) << ',' << (s.faithfulness.undefined ? 1 : 0) << '\n';
  }
}

struct EvalOptions {
  std::string predictions_path;
  std::string dataset_path;
  std::string report_path;  // metrics JSON
  std::string csv_path;     // optional per-sample CSV
};

/// Returns 0 when every prediction record was a successful decode.
inline int cmd_eval(const EvalOptions& opts, std::ostream& table, MetricsReport* report_out = nullptr) {
  std::ifstream in(opts.predictions_path, std::ios::binary);
  if (!in) throw InvalidInputError("cannot open predictions: " + opts.predictions_path);
  const std::vector<nlohmann::json> predictions = read_json_lines(in);
  const std::vector<DialogueSample> dataset = load_jsonl(opts.dataset_path);
  std::size_t failed = 0;
  std::vector<std::string> ids;
  const std::vector<EvalEntry> entries = join_predictions(predictions, dataset, &failed, &ids);
  const MetricsReport report = evaluate_corpus(entries);

  nlohmann::json j = to_json(report);
  j["failed"] = failed;
  if (!opts.report_path.empty()) {
    const std::filesystem::path p(opts.report_path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw InvalidInputError("cannot write " + opts.report_path);
    out << dump_json(j, 2) << '\n';
  }
  if (!opts.csv_path.empty()) {
    std::ofstream out(opts.csv_path, std::ios::binary);
    if (!out) throw InvalidInputError("cannot write " + opts.csv_path);
    write_per_sample_csv(report, ids, out);
  }
  print_report_table(report, table);
  if (report_out) *report_out = report;
  return failed == 0 ? 0 : 1;
}

struct SweepPoint {
  double temperature = 1.0;
  double top_p = 0.9;
};

struct SweepRow {
  SweepPoint point;
  double distinct2 = 0.0;
  double p_lcs = 0.0;
  double faithfulness_proxy = 0.0;
  std::size_t failed = 0;
};

/// Nucleus decoding of the same samples at each grid point.
inline std::vector<SweepRow> run_sweep(const std::vector<DialogueSample>& samples, std::string_view template_text,
                                       const Backend& backend, const DecodeConfig& base,
                                       const std::vector<SweepPoint>& grid, std::size_t workers = 1) {
  if (base.strategy != Strategy::kNucleus) throw ConfigError("sweep runs the nucleus strategy");
  if (grid.empty()) throw ConfigError("sweep grid is empty");
  std::vector<SweepRow> rows;
  for (const SweepPoint& pt : grid) {
    DecodeConfig cfg = base;
    cfg.temperature = pt.temperature;
    cfg.top_p = pt.top_p;
    const std::vector<DecodeRecord> records = decode_samples(samples, template_text, backend, cfg, workers);
    std::vector<EvalEntry> entries;
    SweepRow row;
    row.point = pt;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (records[i].error) {
        ++row.failed;
        continue;
      }
      entries.push_back({records[i].response(), samples[i].knowledge, samples[i].reference});
    }
    const MetricsReport report = evaluate_corpus(entries);
    row.distinct2 = report.distinct2;
    row.p_lcs = report.p_lcs;
    row.faithfulness_proxy = report.faithfulness_proxy;
    rows.push_back(row);
  }
  return rows;
}

inline void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out) {
  out << "temperature,top_p,distinct2,p_lcs,faithfulness_proxy,failed\n";
  for (const SweepRow& r : rows) {
    out << format_number(r.point.temperature, 6) << ',' << format_number(r.point.top_p, 6) << ','
        << format_number(r.distinct2, 6) << ',' << format_number(r.p_lcs, 6) << ','
        << format_number(r.faithfulness_proxy, 6) << ',' << r.failed << '\n';
  }
}

/// Writes <output_dir>/sweep.csv. Returns 0 iff no sample failed.
inline int cmd_sweep(const RunConfig& rc, const std::vector<SweepPoint>& grid, std::vector<SweepRow>* rows_out = nullptr) {
  rc.validate();
  const std::vector<DialogueSample> samples = load_jsonl(rc.dataset_path);
  const std::unique_ptr<Backend> backend = make_backend(rc.backend, samples);
  const std::vector<SweepRow> rows = run_sweep(samples, rc.template_text, *backend, rc.decode, grid, rc.workers);
  const std::filesystem::path dir(rc.output_dir);
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "sweep.csv", std::ios::binary);
  if (!out) throw InvalidInputError("cannot write sweep.csv");
  write_sweep_csv(rows, out);
  std::size_t failed = 0;
  for (const SweepRow& r : rows) failed += r.failed;
  if (rows_out) *rows_out = rows;
  return failed == 0 ? 0 : 1;
}

inline std::string printable_token(TokenId id) {
  if (id == ByteTokenizer::kEos) return "<eos>";
  if (id == ByteTokenizer::kBos) return "<bos>";
  if (id < 0 || id >= 256) return "<" + std::to_string(id) + ">";
  const auto c = static_cast<unsigned char>(id);
  if (c == ' ') return "SP";
  if (c == '\n') return "\\n";
  if (c < 0x20 || c >= 0x7F) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "\\x%02X", c);
    return buf;
  }
  return std::string(1, static_cast<char>(c));
}

inline const char* knowledge_source(Branch b) { return b == Branch::kDiversify ? "internal" : "external"; }

inline double ground_fraction(const std::vector<StepDecision>& trace) {
  if (trace.empty()) return 0.0;
  std::size_t ground = 0;
  for (const StepDecision& d : trace) ground += d.branch == Branch::kGround ? 1 : 0;
  return static_cast<double>(ground) / static_cast<double>(trace.size());
}

/// Prints one sample's response annotated per token with the knowledge
/// source of its step: internal (DIVERSIFY) or external (GROUND).
inline int cmd_inspect(const std::string& predictions_path, const std::string& id, bool as_json, std::ostream& out) {
  std::ifstream in(predictions_path, std::ios::binary);
  if (!in) throw InvalidInputError("cannot open predictions: " + predictions_path);
  for (const nlohmann::json& j : read_json_lines(in)) {
    if (j.value("id", std::string()) != id) continue;
    const DecodeRecord rec = record_from_json(j);
    if (rec.error) throw InvalidInputError("sample " + id + " failed to decode: " + *rec.error);
    const std::vector<StepDecision>& trace = rec.result->trace;
    std::size_t ground = 0;
    for (const StepDecision& d : trace) ground += d.branch == Branch::kGround ? 1 : 0;
    if (as_json) {
      nlohmann::json steps = nlohmann::json::array();
      for (const StepDecision& d : trace) {
        steps.push_back({{"t", d.t},
                         {"token", d.chosen_token},
                         {"text", ByteTokenizer::decode(std::vector<TokenId>{d.chosen_token})},
                         {"branch", std::string(to_string(d.branch))},
                         {"knowledge", knowledge_source(d.branch)},
                         {"f_c", d.f_c.score},
                         {"f_k", d.f_k.score}});
      }
      out << dump_json({{"id", id},
                        {"response", rec.response()},
                        {"steps", std::move(steps)},
                        {"ground_steps", ground},
                        {"total_steps", trace.size()},
                        {"ground_fraction", ground_fraction(trace)}},
                       2)
          << '\n';
      return 0;
    }
    out << "id: " << id << '\n' << "response: " << rec.response() << '\n';
    if (trace.empty()) {
      out << "(no step trace for strategy " << to_string(rec.strategy) << ")\n";
      return 0;
    }
    out << "annotated: ";
    for (const StepDecision& d : trace) {
      out << '[' << printable_token(d.chosen_token) << '|' << (d.branch == Branch::kDiversify ? 'I' : 'E') << ']';
    }
    out << "\n\n" << std::left << std::setw(6) << "t" << std::setw(8) << "token" << std::setw(10) << "source"
        << std::right << std::setw(10) << "F_c" << std::setw(10) << "F_k" << '\n';
    for (const StepDecision& d : trace) {
      out << std::left << std::setw(6) << d.t << std::setw(8) << printable_token(d.chosen_token) << std::setw(10)
          << knowledge_source(d.branch) << std::right << std::setw(10) << format_number(d.f_c.score)
          << std::setw(10) << format_number(d.f_k.score) << '\n';
    }
    out << "\nGROUND fraction: " << ground << '/' << trace.size() << " = " << format_number(ground_fraction(trace))
        << '\n';
    return 0;
  }
  throw NotFoundError("no record with id " + id);
}

}  // namespace doge
