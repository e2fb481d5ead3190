#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mollia/corpus.hpp"

namespace mollia {

// Dense design matrix with hard class targets.
struct Dataset {
  std::vector<std::vector<double>> rows;
  std::vector<ClassIndex> labels;
  std::size_t num_classes = 0;

  std::size_t size() const noexcept { return rows.size(); }
  std::size_t num_features() const { return rows.empty() ? 0 : rows.front().size(); }
  void push_back(std::vector<double> row, ClassIndex label) {
    rows.push_back(std::move(row));
    labels.push_back(label);
  }
};

struct GbdtParams {
  double learning_rate = 0.07;
  int max_depth = 5;
  int n_estimators = 300;
  double reg_lambda = 1.0;
  double min_child_weight = 1.0;
  double min_split_loss = 0.0;
  int max_bin = 256;
  int early_stopping_rounds = 20;  // only used with a validation set; 0 disables
};

// Named hyperparameter profiles: "agnews", "imdb", "trec", "pubmed".
GbdtParams gbdt_profile(std::string_view name);

struct LogisticParams {
  double learning_rate = 0.5;
  double l2 = 1e-3;
  int iterations = 500;
};

enum class AggregatorBackend { Gbdt, Logistic };

AggregatorBackend parse_aggregator_backend(std::string_view name);
std::string_view to_string(AggregatorBackend backend);

struct AggregatorConfig {
  AggregatorBackend backend = AggregatorBackend::Gbdt;
  GbdtParams gbdt;
  LogisticParams logistic;
};

// A trained, immutable multiclass scorer. Safe to share across threads.
class Aggregator {
 public:
  virtual ~Aggregator() = default;

  virtual std::vector<double> predict_proba(std::span<const double> x) const = 0;
  virtual std::size_t num_classes() const = 0;
  virtual std::size_t num_features() const = 0;
  virtual AggregatorBackend backend() const = 0;
  virtual nlohmann::json to_json() const = 0;
  virtual std::unique_ptr<Aggregator> clone() const = 0;
};

// Throws Validation on an empty set, DegenerateModel on a single class.
std::unique_ptr<Aggregator> train_aggregator(const AggregatorConfig& config, const Dataset& train,
                                             const Dataset* validation, std::uint64_t seed);
std::unique_ptr<Aggregator> aggregator_from_json(const nlohmann::json& j);

// ---- gradient-boosted trees ----

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // x < threshold goes left
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf output (already shrunk by the learning rate)
};

struct RegressionTree {
  std::vector<TreeNode> nodes;
  double predict(std::span<const double> x) const;
};

class GbdtModel final : public Aggregator {
 public:
  GbdtModel() = default;
  GbdtModel(std::size_t num_classes, std::size_t num_features, GbdtParams params);

  std::vector<double> predict_margin(std::span<const double> x) const;
  std::vector<double> predict_proba(std::span<const double> x) const override;
  std::size_t num_classes() const override { return num_classes_; }
  std::size_t num_features() const override { return num_features_; }
  AggregatorBackend backend() const override { return AggregatorBackend::Gbdt; }
  nlohmann::json to_json() const override;
  std::unique_ptr<Aggregator> clone() const override { return std::make_unique<GbdtModel>(*this); }
  static GbdtModel from_json(const nlohmann::json& j);

  std::size_t num_rounds() const noexcept { return rounds_.size(); }
  const GbdtParams& params() const noexcept { return params_; }
  // Mean multiclass log-loss on the training set after each kept round.
  const std::vector<double>& training_loss() const noexcept { return training_loss_; }

 private:
  friend GbdtModel train_gbdt(const Dataset&, const GbdtParams&, std::uint64_t, const Dataset*);

  std::size_t num_classes_ = 0;
  std::size_t num_features_ = 0;
  GbdtParams params_;
  std::vector<std::vector<RegressionTree>> rounds_;  // rounds_[r][k]
  std::vector<double> training_loss_;
};

// Multiclass softmax boosting: one second-order regression tree per class per
// round, histogram split search, depth-limited, no subsampling. With a
// validation set, keeps the round prefix with the lowest validation log-loss.
GbdtModel train_gbdt(const Dataset& train, const GbdtParams& params, std::uint64_t seed,
                     const Dataset* validation = nullptr);

// ---- multinomial logistic regression (fast fallback) ----

class SoftmaxRegression final : public Aggregator {
 public:
  SoftmaxRegression() = default;
  SoftmaxRegression(std::size_t num_classes, std::size_t num_features);

  std::vector<double> predict_proba(std::span<const double> x) const override;
  std::size_t num_classes() const override { return num_classes_; }
  std::size_t num_features() const override { return num_features_; }
  AggregatorBackend backend() const override { return AggregatorBackend::Logistic; }
  nlohmann::json to_json() const override;
  std::unique_ptr<Aggregator> clone() const override { return std::make_unique<SoftmaxRegression>(*this); }
  static SoftmaxRegression from_json(const nlohmann::json& j);

 private:
  friend SoftmaxRegression train_softmax_regression(const Dataset&, const LogisticParams&);

  std::size_t num_classes_ = 0;
  std::size_t num_features_ = 0;
  std::vector<double> weights_;  // num_classes x (num_features + 1), bias last
};

SoftmaxRegression train_softmax_regression(const Dataset& train, const LogisticParams& params);

// Numerically stable softmax of a score vector.
std::vector<double> softmax(std::span<const double> scores);

}  // namespace mollia
