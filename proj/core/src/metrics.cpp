#include "mollia/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "mollia/error.hpp"
#include "mollia/query.hpp"

namespace mollia {

double micro_f1(std::span<const ClassIndex> predictions, std::span<const ClassIndex> golds) {
  if (predictions.size() != golds.size()) fail(ErrorKind::Shape, "predictions and golds differ in length");
  if (predictions.empty()) fail(ErrorKind::Validation, "micro-F1 of an empty set is undefined");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < golds.size(); ++i) hits += predictions[i] == golds[i];
  return static_cast<double>(hits) / static_cast<double>(golds.size());
}

NegativeLabelAudit negative_label_audit(std::span<const std::vector<ClassIndex>> y_minus,
                                        std::span<const ClassIndex> golds, std::size_t num_classes) {
  if (y_minus.size() != golds.size()) fail(ErrorKind::Shape, "negative-label sets and golds differ in length");
  NegativeLabelAudit a;
  a.instances = golds.size();
  a.slots = a.instances * num_classes;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    for (auto k : y_minus[i]) {
      if (k >= num_classes) fail(ErrorKind::Shape, "negative label out of range");
      if (k == golds[i]) {
        ++a.false_negatives;
      } else {
        ++a.true_negatives;
      }
    }
  }
  if (a.slots > 0) {
    a.true_negative_rate = static_cast<double>(a.true_negatives) / static_cast<double>(a.slots);
    a.false_negative_rate = static_cast<double>(a.false_negatives) / static_cast<double>(a.slots);
  }
  return a;
}

double accurate_identification_rate(std::span<const DetectionRecord> records, const std::vector<bool>& flags) {
  if (records.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < records.size(); ++i) hits += !flags[i] && records[i].correct;
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

namespace {

// Flags the `quota` records with the largest uncertainty.
std::vector<bool> quota_flags(const std::vector<double>& uncertainty, std::size_t quota) {
  std::vector<std::size_t> order(uncertainty.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return uncertainty[a] > uncertainty[b]; });
  std::vector<bool> flags(uncertainty.size(), false);
  for (std::size_t i = 0; i < quota; ++i) flags[order[i]] = true;
  return flags;
}

}  // namespace

DetectionRates discrepancy_detection(std::span<const DetectionRecord> records) {
  DetectionRates r;
  r.records = records.size();
  if (records.empty()) return r;
  std::vector<bool> d_flags(records.size());
  std::vector<double> entropy(records.size()), margin(records.size()), consistency(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    d_flags[i] = records[i].d_anno != 0;
    r.flagged += d_flags[i];
    entropy[i] = uncertainty_score(records[i].probs, UncertaintyMode::Entropy);
    margin[i] = uncertainty_score(records[i].probs, UncertaintyMode::Margin);
    consistency[i] = -records[i].consistency;
  }
  r.d_anno = accurate_identification_rate(records, d_flags);
  r.entropy = accurate_identification_rate(records, quota_flags(entropy, r.flagged));
  r.margin = accurate_identification_rate(records, quota_flags(margin, r.flagged));
  r.consistency = accurate_identification_rate(records, quota_flags(consistency, r.flagged));
  return r;
}

}  // namespace mollia
