#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mollia/classifier.hpp"
#include "mollia/config.hpp"
#include "mollia/corpus.hpp"
#include "mollia/featurizer.hpp"
#include "mollia/molam.hpp"

namespace mollia {

// Component switches. A: everything on. B: no discrepancy weighting (alpha = 1).
// C: no negative learning (lambda = 0). D: neither.
enum class Ablation { A, B, C, D };

Ablation parse_ablation(std::string_view name);
std::string_view to_string(Ablation ablation);
bool uses_negative_learning(Ablation ablation);
bool uses_discrepancy(Ablation ablation);

// Linear schedule over AL iterations; R = 1 gives lambda_start.
double lambda_at(int t, int iterations, double lambda_start, double lambda_end);

// 1 when the previous model's argmax disagrees with y_plus.
int compute_discrepancy(const ClassifierModel& previous, const SparseVector& x, ClassIndex y_plus);

struct AnnotationRecord {
  std::string id;
  int iteration = 0;
  ClassIndex y_plus = 0;
  std::vector<ClassIndex> y_minus;
  int d_anno = 0;
  double w_d = 1.0;
  double confidence = 0.0;
  std::vector<double> probs;
  double consistency = 0.0;
  std::optional<ClassIndex> gold;
};

struct IterationMetrics {
  int iteration = 0;
  std::size_t pool_size = 0;  // labeled-pool size after the iteration
  double micro_f1 = 0.0;      // held-out test split
  std::optional<double> batch_annotation_acc;
  std::optional<double> cumulative_annotation_acc;
  double mean_w_d = 1.0;
  double mean_negatives = 0.0;  // mean |y_minus| over the batch
  double discrepancy_rate = 0.0;
  double lambda = 0.0;
  int epochs = 0;
  double validation_f1 = 0.0;
};

struct RunState {
  int iteration = 0;  // completed AL iterations
  Ablation ablation = Ablation::A;
  DataPools pools;
  ClassifierModel current;   // trained at the last completed iteration
  ClassifierModel previous;  // the one before; empty before the first iteration
  std::vector<AnnotationRecord> records;  // MoLAM-labeled instances in pool-entry order
  std::vector<IterationMetrics> history;
  double initial_micro_f1 = 0.0;
  bool terminated = false;  // ran out of unlabeled instances
  std::string termination_reason;
  std::size_t molam_admissions = 0;
  std::size_t molam_training_size = 0;
};

nlohmann::json to_json(const AnnotationRecord& r);
AnnotationRecord annotation_record_from_json(const nlohmann::json& j);
nlohmann::json to_json(const IterationMetrics& m);
IterationMetrics iteration_metrics_from_json(const nlohmann::json& j);
// Models are not part of the JSON form; they live in their own snapshot files.
nlohmann::json state_to_json(const RunState& s);
RunState state_from_json(const nlohmann::json& j);

using ProgressFn = std::function<void(std::string_view)>;

// Loaded data, features and the annotation model for one configured run.
class Experiment {
 public:
  Experiment(RunConfig config, Ablation ablation = Ablation::A);

  const RunConfig& config() const noexcept { return config_; }
  Ablation ablation() const noexcept { return ablation_; }
  const LabelSpace& labels() const noexcept { return labels_; }
  const Corpus& pool() const noexcept { return pool_; }
  const Corpus& test() const noexcept { return test_; }
  const Molam* molam() const noexcept { return molam_ ? &*molam_ : nullptr; }
  double alpha() const;
  double lambda(int t) const;

  void set_progress(ProgressFn fn) { progress_ = std::move(fn); }

  // Seeds the pools, trains MoLAM on the gold set, trains the initial classifier.
  RunState initialize();
  // Restores an annotation model trained by an earlier initialize().
  void restore_molam(Molam molam) { molam_ = std::move(molam); }

  // One AL pass: query, annotate, transfer, discrepancy, weight, retrain, evaluate.
  // Throws (state untouched) when an annotator is unavailable.
  void run_iteration(RunState& state);

  double evaluate(const ClassifierModel& model) const;
  std::vector<AnnotatorSignal> signals_for(const Instance& instance);
  Annotation label(std::span<const AnnotatorSignal> signals) const;

 private:
  const SparseVector& features_of(std::string_view id) const;
  void fetch_signals(const std::vector<const Instance*>& instances);
  ClassifierModel train_on_pool(const RunState& state, const std::map<std::string, const AnnotationRecord*>& records,
                                double lambda, std::uint64_t seed, TrainReport* report) const;
  void note(std::string_view msg) const {
    if (progress_) progress_(msg);
  }

  RunConfig config_;
  Ablation ablation_;
  LabelSpace labels_;
  Corpus pool_;
  Corpus test_;
  Corpus validation_;
  TextFeaturizer featurizer_;
  std::vector<SparseVector> pool_features_;
  std::map<std::string, std::size_t, std::less<>> pool_index_;
  std::vector<SparseVector> test_features_;
  std::vector<ClassIndex> test_labels_;
  std::vector<SparseVector> validation_features_;
  std::vector<ClassIndex> validation_labels_;
  std::optional<Molam> molam_;
  std::map<std::string, std::vector<AnnotatorSignal>, std::less<>> signal_cache_;
  ProgressFn progress_;
};

struct RunOptions {
  std::filesystem::path out_dir;
  Ablation ablation = Ablation::A;
  bool resume = false;
  // Stop after this many iterations in this call, leaving a resumable run.
  std::optional<int> max_iterations;
  // Classifier snapshots kept on disk (latest first); state files are all kept.
  int keep_snapshots = 2;
  ProgressFn progress;
};

// Validates, then runs (or resumes) the loop with checkpoints and reports in out_dir.
RunState run(const RunConfig& config, const RunOptions& options);

// Loads the newest checkpoint in a run directory, including classifier snapshots.
RunState load_checkpoint(const std::filesystem::path& run_dir);

// Writes `content` to `path` through a temporary file and a rename.
void write_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace mollia
