#include "mollia/featurizer.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

#include "mollia/error.hpp"
#include "mollia/seeding.hpp"

namespace mollia {

double dot(const SparseVector& a, const SparseVector& b) {
  double acc = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.nnz() && j < b.nnz()) {
    if (a.index[i] < b.index[j]) {
      ++i;
    } else if (b.index[j] < a.index[i]) {
      ++j;
    } else {
      acc += a.value[i++] * b.value[j++];
    }
  }
  return acc;
}

double squared_distance(const SparseVector& a, const SparseVector& b) {
  double acc = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.nnz() || j < b.nnz()) {
    double d;
    if (j >= b.nnz() || (i < a.nnz() && a.index[i] < b.index[j])) {
      d = a.value[i++];
    } else if (i >= a.nnz() || b.index[j] < a.index[i]) {
      d = -b.value[j++];
    } else {
      d = a.value[i++] - b.value[j++];
    }
    acc += d * d;
  }
  return acc;
}

SparseVector dense_to_sparse(const std::vector<double>& dense) {
  SparseVector v;
  for (std::size_t i = 0; i < dense.size(); ++i) {
    if (dense[i] != 0.0) {
      v.index.push_back(static_cast<std::uint32_t>(i));
      v.value.push_back(dense[i]);
    }
  }
  return v;
}

TextFeaturizer::TextFeaturizer(FeaturizerConfig config) : config_(config) {
  if (config_.ngram_min < 1 || config_.ngram_max < config_.ngram_min) {
    fail(ErrorKind::Config, "n-gram range must satisfy 1 <= min <= max");
  }
  if (config_.buckets_log2 < 1 || config_.buckets_log2 > 30) fail(ErrorKind::Config, "buckets_log2 must be in [1, 30]");
}

std::vector<std::string> TextFeaturizer::tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    // Bytes >= 0x80 belong to multi-byte UTF-8 sequences and stay inside words.
    if (std::isalnum(c) || c >= 0x80) {
      cur.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

SparseVector TextFeaturizer::transform(std::string_view text) const {
  const auto tokens = tokenize(text);
  const std::uint64_t mask = dimension() - 1;
  std::map<std::uint32_t, double> counts;
  for (int n = config_.ngram_min; n <= config_.ngram_max; ++n) {
    const auto un = static_cast<std::size_t>(n);
    for (std::size_t i = 0; i + un <= tokens.size(); ++i) {
      std::uint64_t h = fnv1a(tokens[i]);
      for (std::size_t j = 1; j < un; ++j) h = fnv1a(tokens[i + j], fnv1a(" ", h));
      counts[static_cast<std::uint32_t>(splitmix64(h) & mask)] += 1.0;
    }
  }
  SparseVector v;
  v.index.reserve(counts.size());
  v.value.reserve(counts.size());
  double norm2 = 0.0;
  for (const auto& [idx, c] : counts) {
    v.index.push_back(idx);
    v.value.push_back(c);
    norm2 += c * c;
  }
  if (config_.normalization == Normalization::L2 && norm2 > 0.0) {
    const double inv = 1.0 / std::sqrt(norm2);
    for (auto& x : v.value) x *= inv;
  }
  return v;
}

}  // namespace mollia
