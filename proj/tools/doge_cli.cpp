#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "doge/doge.hpp"

namespace {

using doge::BackendConfig;
using doge::DecodeConfig;
using doge::RunConfig;

// Optional overrides; anything left unset keeps the strategy's default.
struct DecodeFlags {
  std::string strategy = "doge";
  std::optional<double> alpha, beta, lambda, omega, top_p, eta, gamma, fn_lambda, fn_omega, temperature;
  std::optional<std::size_t> K, max_new_tokens, beam_size;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> confidence_variant, epsilon_variant;
  bool force_ground = false;

  void add_to(CLI::App& app) {
    app.add_option("--strategy", strategy, "doge, greedy, beam, nucleus, f_nucleus, cs or fecs")
        ->capture_default_str();
    app.add_option("--alpha", alpha, "degeneration penalty weight");
    app.add_option("--beta", beta, "knowledge reward weight");
    app.add_option("--lambda", lambda, "epsilon schedule base");
    app.add_option("--omega", omega, "epsilon schedule floor");
    app.add_option("--K", K, "re-ranking candidates");
    app.add_option("--top_p", top_p, "nucleus mass");
    app.add_option("--eta", eta, "entropy weight in the confidence score");
    app.add_option("--gamma", gamma, "confidence threshold");
    app.add_option("--confidence_variant", confidence_variant, "geometric, arithmetic or harmonic");
    app.add_option("--epsilon_variant", epsilon_variant, "literal_clamped or growth");
    app.add_flag("--force_ground", force_ground, "take the re-ranking branch at every step");
    app.add_option("--max_new_tokens", max_new_tokens, "generation budget");
    app.add_option("--seed", seed, "base sampling seed");
    app.add_option("--beam_size", beam_size);
    app.add_option("--fn_lambda", fn_lambda, "F-nucleus decay");
    app.add_option("--fn_omega", fn_omega, "F-nucleus floor");
    app.add_option("--temperature", temperature, "sampling baselines only");
  }

  DecodeConfig build() const {
    DecodeConfig c = DecodeConfig::defaults_for(doge::parse_strategy(strategy));
    if (alpha) c.alpha = *alpha;
    if (beta) c.beta = *beta;
    if (lambda) c.lambda = *lambda;
    if (omega) c.omega = *omega;
    if (K) c.K = *K;
    if (top_p) c.top_p = *top_p;
    if (eta) c.eta = *eta;
    if (gamma) c.gamma = *gamma;
    if (confidence_variant) c.confidence_variant = doge::parse_confidence_variant(*confidence_variant);
    if (epsilon_variant) c.epsilon_variant = doge::parse_epsilon_variant(*epsilon_variant);
    c.force_ground = force_ground;
    if (max_new_tokens) c.max_new_tokens = *max_new_tokens;
    if (seed) c.seed = *seed;
    if (beam_size) c.beam_size = *beam_size;
    if (fn_lambda) c.fn_lambda = *fn_lambda;
    if (fn_omega) c.fn_omega = *fn_omega;
    if (temperature) c.temperature = *temperature;
    return c;
  }
};

struct RunFlags {
  std::string dataset;
  std::string template_arg;
  std::string backend = "toy";
  std::string trace;
  std::string output_dir = "out";
  std::size_t workers = 1;
  std::string prompt_stream = "exposed";
  doge::ToyTransformerSpec toy;
  std::vector<std::string> corpus;
  bool corpus_from_dataset = false;
  DecodeFlags decode;

  void add_to(CLI::App& app) {
    app.add_option("--dataset", dataset, "dialogue JSONL")->required()->check(CLI::ExistingFile);
    app.add_option("--template", template_arg,
                   "template file, or the built-in 'default' or 'compact' (toy backend defaults to compact)");
    app.add_option("--backend", backend, "toy or trace")->capture_default_str();
    app.add_option("--trace", trace, "trace backend script (JSONL)");
    app.add_option("--output_dir", output_dir)->capture_default_str();
    app.add_option("--workers", workers)->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--prompt_stream", prompt_stream, "prompt read by baselines: exposed or masked")
        ->capture_default_str();
    app.add_option("--toy_seed", toy.seed)->capture_default_str();
    app.add_option("--toy_layers", toy.layers)->capture_default_str();
    app.add_option("--toy_heads", toy.heads)->capture_default_str();
    app.add_option("--toy_d_model", toy.d_model)->capture_default_str();
    app.add_option("--toy_d_ff", toy.d_ff)->capture_default_str();
    app.add_option("--toy_max_positions", toy.max_positions)->capture_default_str();
    app.add_option("--toy_corpus", corpus, "text file whose lines train the toy n-gram prior");
    app.add_flag("--toy_corpus_from_dataset", corpus_from_dataset, "train the prior on the dataset's knowledge");
    app.add_option("--toy_prior_order", toy.prior.order)->capture_default_str();
    app.add_option("--toy_prior_weight", toy.prior.weight)->capture_default_str();
    app.add_option("--toy_copy_weight", toy.prior.copy_weight)->capture_default_str();
    decode.add_to(app);
  }

  RunConfig build() const {
    RunConfig rc;
    rc.dataset_path = dataset;
    rc.output_dir = output_dir;
    rc.workers = workers;
    if (prompt_stream == "exposed") {
      rc.stream = doge::PromptStream::kExposed;
    } else if (prompt_stream == "masked") {
      rc.stream = doge::PromptStream::kMasked;
    } else {
      throw doge::ConfigError("prompt_stream must be exposed or masked");
    }
    if (backend == "toy") {
      rc.backend.kind = BackendConfig::Kind::kToy;
    } else if (backend == "trace") {
      rc.backend.kind = BackendConfig::Kind::kTrace;
      if (trace.empty()) throw doge::ConfigError("--trace is required with --backend trace");
    } else {
      throw doge::ConfigError("backend must be toy or trace");
    }
    rc.backend.toy = toy;
    rc.backend.trace_path = trace;
    rc.backend.corpus_files = corpus;
    rc.backend.corpus_from_dataset = corpus_from_dataset;
    std::string tmpl = template_arg;
    if (tmpl.empty()) tmpl = backend == "toy" ? "compact" : "default";
    if (tmpl == "default") {
      rc.template_text = doge::kDefaultTemplate;
    } else if (tmpl == "compact") {
      rc.template_text = doge::kCompactTemplate;
    } else {
      rc.template_text = doge::read_text_file(tmpl);
    }
    rc.decode = decode.build();
    return rc;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DoGe decoding engine and evaluation harness"};
  app.set_config("--config", "", "TOML/INI file with option values; command-line flags take precedence");
  app.require_subcommand(1);

  RunFlags decode_flags;
  CLI::App* decode_cmd = app.add_subcommand("decode", "decode a dialogue dataset");
  decode_flags.add_to(*decode_cmd);

  doge::EvalOptions eval_opts;
  CLI::App* eval_cmd = app.add_subcommand("eval", "score predictions against a dataset");
  eval_cmd->add_option("--predictions", eval_opts.predictions_path)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--dataset", eval_opts.dataset_path)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--report", eval_opts.report_path, "metrics JSON output")->required();
  eval_cmd->add_option("--csv", eval_opts.csv_path, "per-sample CSV output");

  RunFlags sweep_flags;
  sweep_flags.decode.strategy = "nucleus";
  std::vector<double> temperatures{0.7, 1.0, 1.3, 1.6};
  std::vector<double> top_ps{0.7, 0.9, 0.95};
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "nucleus decoding over a temperature x top_p grid");
  sweep_flags.add_to(*sweep_cmd);
  sweep_cmd->add_option("--temperatures", temperatures)->delimiter(',')->capture_default_str();
  sweep_cmd->add_option("--top_ps", top_ps)->delimiter(',')->capture_default_str();

  std::string inspect_path, inspect_id;
  bool inspect_json = false;
  CLI::App* inspect_cmd = app.add_subcommand("inspect", "per-token knowledge-source view of one decoded sample");
  inspect_cmd->add_option("--predictions", inspect_path)->required()->check(CLI::ExistingFile);
  inspect_cmd->add_option("--id", inspect_id)->required();
  inspect_cmd->add_flag("--json", inspect_json, "machine-readable output");

  CLI11_PARSE(app, argc, argv);

  try {
    if (decode_cmd->parsed()) {
      doge::DecodeSummary summary;
      const int status = doge::cmd_decode(decode_flags.build(), &summary);
      std::cout << "decoded " << summary.total - summary.failed << '/' << summary.total << " samples -> "
                << summary.predictions.string() << '\n';
      return status;
    }
    if (eval_cmd->parsed()) return doge::cmd_eval(eval_opts, std::cout);
    if (sweep_cmd->parsed()) {
      std::vector<doge::SweepPoint> grid;
      for (double t : temperatures) {
        for (double p : top_ps) grid.push_back({t, p});
      }
      std::vector<doge::SweepRow> rows;
      const int status = doge::cmd_sweep(sweep_flags.build(), grid, &rows);
      doge::write_sweep_csv(rows, std::cout);
      return status;
    }
    if (inspect_cmd->parsed()) return doge::cmd_inspect(inspect_path, inspect_id, inspect_json, std::cout);
  } catch (const doge::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
