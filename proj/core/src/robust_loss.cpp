#include "mollia/robust_loss.hpp"

#include <algorithm>
#include <cmath>

#include "mollia/aggregator.hpp"
#include "mollia/error.hpp"

namespace mollia {

double negative_loss(std::span<const double> p, std::span<const ClassIndex> y_minus) {
  double loss = 0.0;
  for (auto k : y_minus) {
    if (k >= p.size()) fail(ErrorKind::Shape, "negative label out of range");
    loss -= std::log(std::max(1.0 - p[k], kProbEpsilon));
  }
  return loss;
}

double discrepancy_weight(bool discrepant, double alpha) { return discrepant ? alpha : 1.0; }

double cross_entropy(std::span<const double> p, ClassIndex y) {
  if (y >= p.size()) fail(ErrorKind::Shape, "label out of range");
  return -std::log(std::max(p[y], kProbEpsilon));
}

double total_loss(const RobustTarget& target, std::span<const double> p, const LossParams& params) {
  double loss = target.w_d * cross_entropy(p, target.y_plus);
  if (params.lambda != 0.0 && !target.y_minus.empty()) loss += params.lambda * negative_loss(p, target.y_minus);
  return loss;
}

std::vector<double> total_loss_gradient(const RobustTarget& target, std::span<const double> logits,
                                        const LossParams& params) {
  const auto p = softmax(logits);
  const std::size_t K = p.size();
  std::vector<double> g(K);
  for (std::size_t j = 0; j < K; ++j) g[j] = target.w_d * (p[j] - (j == target.y_plus ? 1.0 : 0.0));
  if (params.lambda == 0.0 || target.y_minus.empty()) return g;

  // d/ds_j [-log(1 - p_k)] = p_k (1[j == k] - p_j) / (1 - p_k); clamped terms are constant.
  double s = 0.0;
  std::vector<double> ratio(K, 0.0);
  for (auto k : target.y_minus) {
    const double q = 1.0 - p[k];
    if (q <= kProbEpsilon) continue;
    ratio[k] += p[k] / q;
    s += p[k] / q;
  }
  for (std::size_t j = 0; j < K; ++j) g[j] += params.lambda * (ratio[j] - p[j] * s);
  return g;
}

}  // namespace mollia
