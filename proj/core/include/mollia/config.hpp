#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mollia/aggregator.hpp"
#include "mollia/annotator.hpp"
#include "mollia/classifier.hpp"
#include "mollia/corpus.hpp"
#include "mollia/featurizer.hpp"

namespace mollia {

// Which labeler feeds the loop: the trained MoLAM, or a training-free baseline.
enum class AnnotationMode { Molam, Vote, Logits, Single };

AnnotationMode parse_annotation_mode(std::string_view name);
std::string_view to_string(AnnotationMode mode);

struct DataConfig {
  std::filesystem::path pool;        // unlabeled pool; gold labels optional
  std::filesystem::path test;        // held-out split with gold labels
  std::filesystem::path validation;  // optional gold split for model selection
  std::optional<CorpusFormat> format;
  std::vector<std::string> labels;
};

struct MolamConfig {
  std::string profile = "agnews";
  AggregatorBackend backend = AggregatorBackend::Gbdt;
  double sigma = 0.9;
  double delta = 0.001;
  bool pseudo_label = true;
  int max_rounds = 5;
  std::size_t pseudo_label_sample = 0;  // 0 = whole unlabeled pool
  std::optional<int> early_stopping_rounds;
};

struct RobustConfig {
  double alpha = 0.5;
  double lambda_start = 0.4;
  double lambda_end = 1.0;
};

struct RunConfig {
  std::uint64_t seed = 0;
  DataConfig data;
  FeaturizerConfig featurizer;
  std::size_t n_init = 50;
  bool stratified = false;
  std::string strategy = "random";
  std::size_t batch_size = 50;
  int iterations = 10;  // R
  AnnotationMode mode = AnnotationMode::Molam;
  std::string single_annotator;  // used when mode = single
  std::size_t max_in_flight = 4;
  std::vector<AnnotatorSpec> annotators;
  MolamConfig molam;
  RobustConfig robust;
  ClassifierConfig classifier;

  AggregatorConfig aggregator_config() const;
};

// Parses TOML. Relative data paths are resolved against `base_dir`. Every
// problem found is collected; a non-empty list is thrown as one Config error.
RunConfig parse_config(std::string_view toml_text, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

// All constraint violations, in a stable order. Empty means valid.
std::vector<std::string> validate(const RunConfig& config);
// Throws a Config error listing every violation.
void require_valid(const RunConfig& config);

// Canonical JSON form. Remote API keys are never included.
nlohmann::json to_json(const RunConfig& config);

// Annotator specs as TOML [[annotators]] tables, for generated configs.
std::string annotators_to_toml(const std::vector<AnnotatorSpec>& annotators);

}  // namespace mollia
