#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "mollia/featurizer.hpp"
#include "mollia/robust_loss.hpp"

namespace mollia {

enum class Architecture { Linear, Mlp };

Architecture parse_architecture(std::string_view name);
std::string_view to_string(Architecture arch);

struct ClassifierConfig {
  Architecture architecture = Architecture::Linear;
  std::size_t hidden = 64;  // MLP only
  double learning_rate = 0.1;
  std::size_t batch_size = 16;
  int max_epochs = 40;
  int patience = 10;
  double init_scale = 0.01;
};

struct RobustExample {
  SparseVector features;
  RobustTarget target;
  bool is_gold = false;
};

// Softmax classifier over sparse inputs: linear, or one ReLU hidden layer.
// Weight matrices are stored input-major so a sparse row touches contiguous blocks.
class ClassifierModel {
 public:
  ClassifierModel() = default;

  // Fresh parameters drawn from `seed`; identical seeds give identical models.
  static ClassifierModel initialize(std::size_t input_dim, std::size_t num_classes, const ClassifierConfig& config,
                                    std::uint64_t seed);

  std::vector<double> logits(const SparseVector& x) const;
  std::vector<double> predict_proba(const SparseVector& x) const;

  std::size_t num_classes() const noexcept { return num_classes_; }
  std::size_t input_dim() const noexcept { return input_dim_; }
  Architecture architecture() const noexcept { return architecture_; }

  void write(std::ostream& out) const;
  static ClassifierModel read(std::istream& in);

  bool operator==(const ClassifierModel&) const = default;

 private:
  friend class ClassifierTrainer;

  // Hidden pre-activations for the MLP.
  std::vector<double> hidden_pre(const SparseVector& x) const;

  Architecture architecture_ = Architecture::Linear;
  std::size_t input_dim_ = 0;
  std::size_t num_classes_ = 0;
  std::size_t hidden_ = 0;
  std::vector<double> w1_;  // input_dim x (hidden or K)
  std::vector<double> b1_;
  std::vector<double> w2_;  // hidden x K (MLP only)
  std::vector<double> b2_;
};

struct TrainReport {
  int epochs_run = 0;
  int best_epoch = 0;  // 1-based; 0 when no epoch ran
  double best_validation_f1 = 0.0;
  std::vector<double> validation_f1;
  std::vector<double> training_loss;  // mean total loss per epoch
};

struct ValidationSet {
  std::span<const SparseVector> features;
  std::span<const ClassIndex> labels;
};

// Cold-start training: parameters are re-initialized from `seed`, then mini-batch
// gradient descent on the mean robust loss. Stops at max_epochs or once validation
// micro-F1 has not improved for `patience` epochs, and returns the best snapshot.
// Without a validation set the training targets are used for model selection.
ClassifierModel train_classifier(std::span<const RobustExample> examples, std::size_t input_dim,
                                 std::size_t num_classes, const ClassifierConfig& config, const LossParams& loss,
                                 std::uint64_t seed, ValidationSet validation = {}, TrainReport* report = nullptr);

struct Prediction {
  std::vector<double> probs;
  ClassIndex label = 0;  // argmax, ties to the lowest index
};

std::vector<Prediction> predict(const ClassifierModel& model, std::span<const SparseVector> inputs);

}  // namespace mollia
