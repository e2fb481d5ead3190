#pragma once

#include <span>
#include <vector>

#include "mollia/corpus.hpp"

namespace mollia {

// Probabilities are clamped to [eps, 1 - eps] inside both log terms.
inline constexpr double kProbEpsilon = 1e-12;

struct LossParams {
  double alpha = 0.5;   // down-weight for discrepant annotations, in (0, 1]
  double lambda = 0.4;  // weight of the negative-learning term, >= 0
};

// Supervision for one example: positive label, negative labels and the
// discrepancy weight already resolved to 1 or alpha.
struct RobustTarget {
  ClassIndex y_plus = 0;
  std::vector<ClassIndex> y_minus;
  double w_d = 1.0;
};

// -sum_{k in y_minus} log(1 - p_k)
double negative_loss(std::span<const double> p, std::span<const ClassIndex> y_minus);

// 1 when the annotation agrees with the previous model, alpha otherwise.
double discrepancy_weight(bool discrepant, double alpha);

double cross_entropy(std::span<const double> p, ClassIndex y);

// w_d * CE(p, y_plus) + lambda * negative_loss(p, y_minus)
double total_loss(const RobustTarget& target, std::span<const double> p, const LossParams& params);

// Gradient of total_loss(softmax(logits)) with respect to the logits.
std::vector<double> total_loss_gradient(const RobustTarget& target, std::span<const double> logits,
                                        const LossParams& params);

}  // namespace mollia
