#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mollia {

// Sparse vector with strictly increasing indices.
struct SparseVector {
  std::vector<std::uint32_t> index;
  std::vector<double> value;

  std::size_t nnz() const noexcept { return index.size(); }
  bool operator==(const SparseVector&) const = default;
};

double dot(const SparseVector& a, const SparseVector& b);
// Sum of squared coordinate differences, accumulated in ascending index order.
double squared_distance(const SparseVector& a, const SparseVector& b);
SparseVector dense_to_sparse(const std::vector<double>& dense);

enum class Normalization { L2, None };

struct FeaturizerConfig {
  int ngram_min = 1;
  int ngram_max = 2;
  int buckets_log2 = 18;
  Normalization normalization = Normalization::L2;
};

// Lower-cased word n-grams hashed into 2^buckets_log2 count buckets.
class TextFeaturizer {
 public:
  explicit TextFeaturizer(FeaturizerConfig config = {});

  SparseVector transform(std::string_view text) const;
  std::size_t dimension() const noexcept { return std::size_t{1} << config_.buckets_log2; }
  const FeaturizerConfig& config() const noexcept { return config_; }

  static std::vector<std::string> tokenize(std::string_view text);

 private:
  FeaturizerConfig config_;
};

}  // namespace mollia
