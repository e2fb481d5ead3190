#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <filesystem>
#include <string>

#include "mollia/annotator.hpp"
#include "mollia/config.hpp"
#include "mollia/corpus.hpp"

namespace mollia {

// Topic-style documents: each class owns a small vocabulary, everything else is
// drawn from a shared background vocabulary.
struct SyntheticTextConfig {
  std::size_t num_classes = 4;
  std::size_t words_per_class = 60;
  std::size_t shared_words = 600;
  std::size_t min_length = 18;
  std::size_t max_length = 36;
  double topical_rate = 0.2;  // share of tokens from the document's own class vocabulary
  double cross_rate = 0.06;   // share of tokens from some other class vocabulary
  double decoy_rate = 0.0;    // share of pool instances carrying a decoy class
};

struct SyntheticBenchmark {
  LabelSpace labels;
  Corpus pool;  // gold labels kept for simulation and auditing
  Corpus validation;
  Corpus test;
};

SyntheticBenchmark make_text_benchmark(const SyntheticTextConfig& config, std::size_t pool_size,
                                       std::size_t validation_size, std::size_t test_size, std::uint64_t seed);

// Annotators with class-dependent reliability: accurate on a few "expert"
// classes, weak elsewhere, and with errors concentrated on one bias class.
struct PanelConfig {
  // Per-annotator target of the confusion diagonal averaged over classes.
  std::vector<double> accuracies = {0.62, 0.65, 0.68, 0.71, 0.735};
  double expert_accuracy = 0.95;
  std::size_t experts_per_annotator = 1;
  double bias_share = 0.95;  // fraction of the error mass on the bias class
  double concentration = 0.7;
  std::size_t repeats = 5;
  double invalid_rate = 0.02;
  double decoy_susceptibility = 0.0;
};

// Names are "sim-0", "sim-1", ... Throws Config when a target accuracy cannot be
// met with the requested expert classes.
std::vector<AnnotatorSpec> make_annotator_panel(const PanelConfig& config, std::size_t num_classes,
                                                std::uint64_t seed);

// Calibrated world: per instance a posterior p ~ Dirichlet(concentration), gold ~ p,
// and every annotator reports z = p with T generations drawn from p.
struct CalibratedSample {
  std::vector<ClassIndex> gold;
  std::vector<std::vector<AnnotatorSignal>> signals;
};

CalibratedSample make_calibrated_signals(std::size_t n, std::size_t num_classes, std::size_t num_annotators,
                                         std::size_t repeats, double concentration, std::uint64_t seed);

// A complete synthetic experiment on disk: pool.jsonl, validation.jsonl,
// test.jsonl and config.toml in `dir`.
struct SyntheticRunOptions {
  SyntheticTextConfig text;
  PanelConfig panel;
  std::size_t pool_size = 2000;
  std::size_t validation_size = 500;
  std::size_t test_size = 1000;
  std::uint64_t data_seed = 0;  // corpus and panel
  std::uint64_t run_seed = 0;   // the config's seed
  std::string strategy = "random";
  std::size_t n_init = 50;
  std::size_t batch_size = 50;
  int iterations = 10;
  int buckets_log2 = 16;
  // Hashed unit-norm inputs need far more than the 0.1 default; large batches
  // keep the big steps from making the final model seed-sensitive.
  double learning_rate = 8.0;
  std::size_t classifier_batch_size = 64;
};

// Returns the config as parsed back from the written file.
RunConfig write_synthetic_run(const std::filesystem::path& dir, const SyntheticRunOptions& options);

}  // namespace mollia
