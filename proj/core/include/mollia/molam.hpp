#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mollia/aggregator.hpp"
#include "mollia/annotator.hpp"

namespace mollia {

// h(x) = [z_1, c_1, ..., z_N, c_N]; length 2*N*K.
struct MolamFeatures {
  std::vector<double> h;
  std::size_t num_annotators = 0;
  std::size_t num_classes = 0;

  std::size_t z_offset(std::size_t annotator) const { return 2 * annotator * num_classes; }
  std::size_t c_offset(std::size_t annotator) const { return (2 * annotator + 1) * num_classes; }
};

// Throws Shape on an empty list, mixed K, or malformed signals.
MolamFeatures assemble_features(std::span<const AnnotatorSignal> signals);

// {k : z_i[k] < delta for every annotator i}, ascending.
std::vector<ClassIndex> extract_negative_labels(std::span<const AnnotatorSignal> signals, double delta);

struct Annotation {
  ClassIndex y_plus = 0;
  std::vector<ClassIndex> y_minus;  // ascending, never contains y_plus
  double confidence = 0.0;          // max of `probs`
  std::vector<double> probs;        // labeler's class distribution
  double consistency = 0.0;         // max over annotators of c_i[y_plus]
};

// Argmax with ties to the lowest index.
ClassIndex argmax(std::span<const double> v);

// y_plus = argmax of the aggregator over h(x); y_minus = negative labels minus y_plus.
Annotation annotate(const Aggregator& model, std::span<const AnnotatorSignal> signals, double delta);

// Training-free ensemble baselines, sharing the negative-label rule.
Annotation vote_annotation(std::span<const AnnotatorSignal> signals, double delta);
Annotation logits_annotation(std::span<const AnnotatorSignal> signals, double delta);
Annotation single_annotation(const AnnotatorSignal& signal, double delta);

struct PseudoLabelAdmission {
  std::size_t index = 0;  // row in the unlabeled feature list
  ClassIndex label = 0;
  double confidence = 0.0;  // aggregator confidence at admission time
  int round = 0;
};

struct PseudoLabelResult {
  std::unique_ptr<Aggregator> model;
  Dataset training;  // gold rows first, then admitted rows in admission order
  std::vector<PseudoLabelAdmission> admissions;
  int rounds_run = 0;
};

// Self-training: score the not-yet-admitted unlabeled rows, admit those with
// max probability >= sigma under their predicted label, retrain on gold +
// admitted rows. Stops at a fixpoint or after max_rounds. Admitted rows keep
// their first label; gold rows are never relabeled.
PseudoLabelResult pseudo_label_expand(const AggregatorConfig& config, const Dataset& gold, const Aggregator& initial,
                                      const std::vector<std::vector<double>>& unlabeled, double sigma, int max_rounds,
                                      std::uint64_t seed, const Dataset* validation = nullptr);

// The trained annotation model bound to an ordered annotator roster.
class Molam {
 public:
  Molam() = default;
  Molam(std::unique_ptr<Aggregator> model, std::vector<std::string> annotators, std::size_t num_classes, double delta);
  Molam(const Molam& other);
  Molam& operator=(const Molam& other);
  Molam(Molam&&) noexcept = default;
  Molam& operator=(Molam&&) noexcept = default;

  Annotation annotate(std::span<const AnnotatorSignal> signals) const;
  const Aggregator& model() const { return *model_; }
  const std::vector<std::string>& annotators() const noexcept { return annotators_; }
  std::size_t num_classes() const noexcept { return num_classes_; }
  double delta() const noexcept { return delta_; }

  nlohmann::json to_json() const;
  static Molam from_json(const nlohmann::json& j);

 private:
  std::unique_ptr<Aggregator> model_;
  std::vector<std::string> annotators_;
  std::size_t num_classes_ = 0;
  double delta_ = 0.001;
};

struct MolamTrainOptions {
  AggregatorConfig aggregator;
  double sigma = 0.9;
  double delta = 0.001;
  bool pseudo_label = true;
  int max_rounds = 5;
};

struct MolamTrainResult {
  Molam molam;
  std::vector<PseudoLabelAdmission> admissions;
  int rounds_run = 0;
  std::size_t training_size = 0;
};

// Trains on gold-labeled signal rows, optionally expanding with pseudo-labels
// from `unlabeled` signal rows.
MolamTrainResult train_molam(const MolamTrainOptions& options, const std::vector<std::string>& annotators,
                             std::size_t num_classes, const std::vector<std::vector<AnnotatorSignal>>& gold_signals,
                             const std::vector<ClassIndex>& gold_labels,
                             const std::vector<std::vector<AnnotatorSignal>>& unlabeled_signals,
                             const std::vector<std::vector<AnnotatorSignal>>& validation_signals,
                             const std::vector<ClassIndex>& validation_labels, std::uint64_t seed);

}  // namespace mollia
