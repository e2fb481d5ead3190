#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mollia/corpus.hpp"

namespace mollia {

// Micro-averaged F1 over single-label predictions, which equals accuracy.
// Throws Validation on empty input and Shape on a length mismatch.
double micro_f1(std::span<const ClassIndex> predictions, std::span<const ClassIndex> golds);

// Slot-level negative-label audit over n instances and K classes: a slot is an
// (instance, class) pair and both rates share the n*K denominator.
struct NegativeLabelAudit {
  std::size_t instances = 0;
  std::size_t slots = 0;
  std::size_t true_negatives = 0;   // k in y_minus, k != gold
  std::size_t false_negatives = 0;  // gold in y_minus
  double true_negative_rate = 0.0;
  double false_negative_rate = 0.0;
};

NegativeLabelAudit negative_label_audit(std::span<const std::vector<ClassIndex>> y_minus,
                                        std::span<const ClassIndex> golds, std::size_t num_classes);

struct DetectionRecord {
  int d_anno = 0;
  bool correct = false;       // y_plus == gold
  std::vector<double> probs;  // labeler distribution, for entropy and margin
  double consistency = 0.0;   // max over annotators of c_i[y_plus]
};

// Records identified as accurate (not flagged) that really are correct, as a
// share of all records. Baselines flag exactly as many records as d_anno does, picking the
// most uncertain first; ties go to the earlier record.
struct DetectionRates {
  std::size_t records = 0;
  std::size_t flagged = 0;
  double d_anno = 0.0;
  double entropy = 0.0;
  double margin = 0.0;
  double consistency = 0.0;
};

DetectionRates discrepancy_detection(std::span<const DetectionRecord> records);

// Unflagged correct records over all records; exposed for testing quota logic.
double accurate_identification_rate(std::span<const DetectionRecord> records, const std::vector<bool>& flags);

}  // namespace mollia
