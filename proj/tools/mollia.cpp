// Command-line front end: run, annotate, audit, report, validate-config, synth.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mollia/config.hpp"
#include "mollia/error.hpp"
#include "mollia/orchestrator.hpp"
#include "mollia/report.hpp"
#include "mollia/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mollia;

namespace {

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return 3;
    case ErrorKind::Parse: return 4;
    case ErrorKind::Io: return 5;
    case ErrorKind::Validation:
    case ErrorKind::Shape:
    case ErrorKind::InsufficientLabels: return 6;
    case ErrorKind::AnnotatorUnavailable:
    case ErrorKind::Protocol: return 7;
    default: return 1;
  }
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, path.string() + ": " + e.what());
  }
}

LabelSpace run_labels(const fs::path& run_dir) {
  return LabelSpace(read_json_file(run_dir / "config.json").at("data").at("labels").get<std::vector<std::string>>());
}

struct RunArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "runs/latest";
  std::string strategy;
  std::string ablation = "A";
  bool resume = false;
  std::optional<int> max_iterations;
  bool quiet = false;
};

RunConfig configured(const std::string& path, const std::optional<std::uint64_t>& seed, const std::string& strategy) {
  auto cfg = load_config(path);
  if (seed) cfg.seed = *seed;
  if (!strategy.empty()) cfg.strategy = strategy;
  return cfg;
}

int cmd_run(const RunArgs& a) {
  const auto cfg = configured(a.config, a.seed, a.strategy);
  require_valid(cfg);
  std::vector<Ablation> variants;
  const bool all = a.ablation == "all";
  if (all) {
    variants = {Ablation::A, Ablation::B, Ablation::C, Ablation::D};
  } else {
    variants = {parse_ablation(a.ablation)};
  }
  std::vector<std::pair<Ablation, std::vector<double>>> finals;
  for (auto v : variants) {
    RunOptions opt;
    opt.out_dir = all ? fs::path(a.out) / std::string(to_string(v)) : fs::path(a.out);
    opt.ablation = v;
    opt.resume = a.resume;
    opt.max_iterations = a.max_iterations;
    if (!a.quiet) opt.progress = [v](std::string_view msg) { std::cerr << "[" << to_string(v) << "] " << msg << "\n"; };
    fs::create_directories(opt.out_dir);
    if (!fs::exists(opt.out_dir / "config.toml")) fs::copy_file(a.config, opt.out_dir / "config.toml");
    const auto state = run(cfg, opt);
    finals.push_back({v, {state.history.empty() ? state.initial_micro_f1 : state.history.back().micro_f1}});
    std::cout << opt.out_dir.string() << ": " << state.iteration << " iterations, final micro-F1 "
              << finals.back().second.front() << "\n";
  }
  if (all) {
    const auto table = ablation_table(finals);
    write_atomic(fs::path(a.out) / "ablation.csv", table);
    std::cout << table;
  }
  return 0;
}

int cmd_validate(const std::string& path) {
  const auto cfg = load_config(path);
  const auto errors = validate(cfg);
  if (errors.empty()) {
    std::cout << path << ": ok\n";
    return 0;
  }
  std::cerr << "error [config]: " << path << " has " << errors.size() << " problem" << (errors.size() == 1 ? "" : "s")
            << ":\n";
  for (const auto& e : errors) std::cerr << "  - " << e << "\n";
  return exit_code(ErrorKind::Config);
}

int cmd_annotate(const std::string& config_path, const std::string& input, const std::string& output,
                 const std::string& model_path, std::optional<std::uint64_t> seed) {
  const auto cfg = configured(config_path, seed, "");
  Experiment exp(cfg);
  if (!model_path.empty()) {
    exp.restore_molam(Molam::from_json(read_json_file(model_path)));
  } else if (cfg.mode == AnnotationMode::Molam) {
    std::cerr << "training the annotation model on the initial gold set\n";
    exp.initialize();
  }
  const auto batch = load_corpus(input, cfg.data.format ? *cfg.data.format : format_from_extension(input), exp.labels());
  std::ofstream file;
  if (!output.empty()) {
    file.open(output, std::ios::trunc);
    if (!file) fail(ErrorKind::Io, "cannot write " + output);
  }
  std::ostream& out = output.empty() ? std::cout : file;
  for (const auto& inst : batch) {
    const auto a = exp.label(exp.signals_for(inst));
    json negatives = json::array();
    for (auto k : a.y_minus) negatives.push_back(exp.labels().name(k));
    out << json{{"id", inst.id},
                {"y_plus", exp.labels().name(a.y_plus)},
                {"y_minus", negatives},
                {"confidence", a.confidence}}
               .dump()
        << "\n";
  }
  return 0;
}

int cmd_audit(const std::string& run_dir) {
  const auto labels = run_labels(run_dir);
  const auto state = load_checkpoint(run_dir);
  const auto a = audit(state, labels.size());
  std::cout << to_json(a).dump(2) << "\n";
  return 0;
}

int cmd_report(const std::string& run_dir, const std::vector<std::string>& average, const std::string& out,
               const std::string& ablation_dir) {
  if (!average.empty()) {
    std::vector<std::vector<IterationMetrics>> runs;
    for (const auto& d : average) runs.push_back(load_checkpoint(d).history);
    const auto csv = average_curves(runs);
    if (out.empty()) {
      std::cout << csv;
    } else {
      write_atomic(out, csv);
    }
    return 0;
  }
  if (!ablation_dir.empty()) {
    std::vector<std::pair<Ablation, std::vector<double>>> finals;
    for (auto v : {Ablation::A, Ablation::B, Ablation::C, Ablation::D}) {
      const fs::path d = fs::path(ablation_dir) / std::string(to_string(v));
      if (!fs::exists(d / "manifest.json")) continue;
      const auto s = load_checkpoint(d);
      finals.push_back({v, {s.history.empty() ? s.initial_micro_f1 : s.history.back().micro_f1}});
    }
    const auto table = ablation_table(finals);
    if (out.empty()) {
      std::cout << table;
    } else {
      write_atomic(out, table);
    }
    return 0;
  }
  if (run_dir.empty()) fail(ErrorKind::Config, "report needs --run, --average or --ablation-dir");
  const auto state = load_checkpoint(run_dir);
  emit_report(state, run_labels(run_dir), run_dir);
  std::cout << summary_text(state, run_labels(run_dir));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active learning with a mixture of LLM annotators"};
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run_cmd = app.add_subcommand("run", "Execute a run configuration");
  run_cmd->add_option("--config", run_args.config, "TOML run configuration")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--seed", run_args.seed, "Override the configured seed");
  run_cmd->add_option("--out", run_args.out, "Run directory")->capture_default_str();
  run_cmd->add_option("--strategy", run_args.strategy, "Override the query strategy");
  run_cmd->add_option("--ablation", run_args.ablation, "A, B, C, D or all")->capture_default_str();
  run_cmd->add_flag("--resume", run_args.resume, "Continue from the newest checkpoint");
  run_cmd->add_option("--max-iterations", run_args.max_iterations, "Stop after this many iterations in this call");
  run_cmd->add_flag("--quiet", run_args.quiet, "No progress output");

  std::string config_path;
  auto* validate_cmd = app.add_subcommand("validate-config", "Check a configuration and list every problem");
  validate_cmd->add_option("--config", config_path)->required()->check(CLI::ExistingFile);

  std::string input, output, model_path;
  std::optional<std::uint64_t> annotate_seed;
  auto* annotate_cmd = app.add_subcommand("annotate", "Label a batch file with the configured annotators");
  annotate_cmd->add_option("--config", config_path)->required()->check(CLI::ExistingFile);
  annotate_cmd->add_option("--input", input, "JSONL or CSV instances")->required()->check(CLI::ExistingFile);
  annotate_cmd->add_option("--output", output, "Output JSONL (default stdout)");
  annotate_cmd->add_option("--model", model_path, "molam.json from a previous run")->check(CLI::ExistingFile);
  annotate_cmd->add_option("--seed", annotate_seed, "Override the configured seed");

  std::string run_dir;
  auto* audit_cmd = app.add_subcommand("audit", "Negative-label and discrepancy diagnostics for a run");
  audit_cmd->add_option("--run", run_dir, "Run directory")->required()->check(CLI::ExistingDirectory);

  std::vector<std::string> average;
  std::string report_out, ablation_dir;
  auto* report_cmd = app.add_subcommand("report", "Re-emit report files from checkpoints");
  report_cmd->add_option("--run", run_dir, "Run directory")->check(CLI::ExistingDirectory);
  report_cmd->add_option("--average", average, "Run directories to average per iteration")->check(CLI::ExistingDirectory);
  report_cmd->add_option("--ablation-dir", ablation_dir, "Directory holding A/ B/ C/ D/ runs")->check(CLI::ExistingDirectory);
  report_cmd->add_option("--out", report_out, "Output file for --average or --ablation-dir");

  SyntheticRunOptions synth;
  std::string synth_out;
  double susceptibility = 0.8;
  synth.text.decoy_rate = 0.22;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic benchmark with simulated annotators");
  synth_cmd->add_option("--out", synth_out, "Directory for corpora and config.toml")->required();
  synth_cmd->add_option("--seed", synth.data_seed, "Corpus and panel seed")->capture_default_str();
  synth_cmd->add_option("--run-seed", synth.run_seed, "Seed written into the config")->capture_default_str();
  synth_cmd->add_option("--classes", synth.text.num_classes)->capture_default_str();
  synth_cmd->add_option("--pool", synth.pool_size)->capture_default_str();
  synth_cmd->add_option("--test", synth.test_size)->capture_default_str();
  synth_cmd->add_option("--validation", synth.validation_size)->capture_default_str();
  synth_cmd->add_option("--decoy-rate", synth.text.decoy_rate, "Share of pool instances with correlated annotator error")
      ->capture_default_str();
  synth_cmd->add_option("--susceptibility", susceptibility, "Pull of decoys on every annotator")->capture_default_str();
  synth_cmd->add_option("--strategy", synth.strategy)->capture_default_str();
  synth_cmd->add_option("--topical-rate", synth.text.topical_rate, "Share of class-specific words per document")
      ->capture_default_str();
  synth_cmd->add_option("--learning-rate", synth.learning_rate, "Classifier learning rate")->capture_default_str();
  synth_cmd->add_option("--classifier-batch", synth.classifier_batch_size, "Classifier mini-batch size")
      ->capture_default_str();
  synth_cmd->add_option("--iterations", synth.iterations)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*run_cmd) return cmd_run(run_args);
    if (*validate_cmd) return cmd_validate(config_path);
    if (*annotate_cmd) return cmd_annotate(config_path, input, output, model_path, annotate_seed);
    if (*audit_cmd) return cmd_audit(run_dir);
    if (*report_cmd) return cmd_report(run_dir, average, report_out, ablation_dir);
    if (*synth_cmd) {
      synth.panel.decoy_susceptibility = susceptibility;
      write_synthetic_run(synth_out, synth);
      std::cout << "wrote " << synth_out << "/config.toml\n";
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.kind()) << "]: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error [internal]: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
