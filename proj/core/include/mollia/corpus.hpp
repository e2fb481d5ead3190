#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace mollia {

using ClassIndex = std::size_t;

// Ordered, duplicate-free set of class names. Index order is the order the
// labels were declared in the run config.
class LabelSpace {
 public:
  LabelSpace() = default;
  explicit LabelSpace(std::vector<std::string> labels);

  std::size_t size() const noexcept { return labels_.size(); }
  const std::string& name(ClassIndex k) const { return labels_.at(k); }
  const std::vector<std::string>& names() const noexcept { return labels_; }
  std::optional<ClassIndex> index_of(std::string_view name) const;

  bool operator==(const LabelSpace& other) const { return labels_ == other.labels_; }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, ClassIndex> index_;
};

struct Instance {
  std::string id;
  std::string text;
  std::optional<ClassIndex> gold_label;
  // Simulation-only: class that simulated annotators are partly drawn towards
  // (correlated annotator error). Ignored by remote annotators.
  std::optional<ClassIndex> decoy_label;
};

class Corpus {
 public:
  Corpus() = default;
  Corpus(std::vector<Instance> instances, std::size_t num_classes);

  std::size_t size() const noexcept { return instances_.size(); }
  bool empty() const noexcept { return instances_.empty(); }
  const Instance& operator[](std::size_t i) const { return instances_[i]; }
  const std::vector<Instance>& instances() const noexcept { return instances_; }
  auto begin() const { return instances_.begin(); }
  auto end() const { return instances_.end(); }

  const Instance* find(std::string_view id) const;
  const Instance& at(std::string_view id) const;
  std::size_t num_classes() const noexcept { return num_classes_; }

 private:
  std::vector<Instance> instances_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::size_t num_classes_ = 0;
};

enum class CorpusFormat { Jsonl, Csv };

CorpusFormat parse_corpus_format(std::string_view name);
CorpusFormat format_from_extension(const std::filesystem::path& path);

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format, const LabelSpace& labels);
Corpus read_corpus(std::istream& in, CorpusFormat format, const LabelSpace& labels);
void write_corpus_jsonl(std::ostream& out, const Corpus& corpus, const LabelSpace& labels);

enum class LabelSource { Gold, Molam };

std::string_view to_string(LabelSource source);
LabelSource parse_label_source(std::string_view name);

struct LabeledEntry {
  std::string id;
  ClassIndex label = 0;
  LabelSource source = LabelSource::Gold;

  bool operator==(const LabeledEntry&) const = default;
};

// Labeled and unlabeled pools. The unlabeled pool is kept sorted by id, which
// is the tie-break order used by every query strategy.
struct DataPools {
  std::vector<LabeledEntry> labeled;
  std::set<std::string> unlabeled;

  std::size_t total() const noexcept { return labeled.size() + unlabeled.size(); }
  bool is_labeled(std::string_view id) const;

  bool operator==(const DataPools&) const = default;
};

void to_json(nlohmann::json& j, const DataPools& pools);
void from_json(const nlohmann::json& j, DataPools& pools);

struct SeedOptions {
  bool stratified = false;
};

// Labeled pool = n_init gold-labeled instances drawn uniformly with `seed`;
// every other corpus instance starts unlabeled.
DataPools seed_pools(const Corpus& corpus, std::size_t n_init, std::uint64_t seed, SeedOptions options = {});

// Draws n gold-labeled ids that are not in `exclude` (used for a MoLAM training
// set disjoint from the initial pool).
std::vector<std::string> sample_gold_ids(const Corpus& corpus, std::size_t n, std::uint64_t seed,
                                         const std::set<std::string>& exclude);

// Moves `batch` from unlabeled to labeled. When num_classes is given, labels
// are also range-checked.
DataPools transfer(const DataPools& pools, const std::vector<LabeledEntry>& batch,
                   std::optional<std::size_t> num_classes = std::nullopt);

}  // namespace mollia
