#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mollia/featurizer.hpp"

namespace mollia {

// Everything a strategy may look at. Rows of `probs` and `features` align with `ids`.
// Strategies that do not need a field ignore it, so it may be left empty.
struct QueryContext {
  std::span<const std::string> ids;
  std::span<const std::vector<double>> probs;
  std::span<const SparseVector> features;
  std::span<const SparseVector> labeled_features;
  std::size_t batch_size = 0;
  std::uint64_t seed = 0;
};

enum class UncertaintyMode { Entropy, Margin, LeastConfidence };

// Larger is more informative. Margin is negated so every mode ranks descending.
double uncertainty_score(std::span<const double> p, UncertaintyMode mode);

std::vector<std::string> select_random(const QueryContext& ctx);
// Top-B by score; equal scores go to the smaller id.
std::vector<std::string> select_uncertainty(const QueryContext& ctx, UncertaintyMode mode);
// k-center greedy in Euclidean feature space. With no labeled points the first
// centre is the smaller-id endpoint of the farthest pair.
std::vector<std::string> select_coreset(const QueryContext& ctx);

using Strategy = std::function<std::vector<std::string>(const QueryContext&)>;

// Built-ins: random, entropy, margin, least_confidence, coreset.
void register_strategy(std::string name, Strategy strategy);
const Strategy& find_strategy(std::string_view name);
std::vector<std::string> strategy_names();

}  // namespace mollia
