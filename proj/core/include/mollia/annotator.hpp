#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mollia/corpus.hpp"
#include "mollia/error.hpp"

namespace mollia {

// Offline annotator: decoded labels follow the confusion-matrix row of the
// instance's gold class. The scored distribution z is a Dirichlet draw centred
// on that row with total concentration `concentration`, and the T sampled
// generations are drawn from z, so their marginal distribution is the row.
struct SimulatedAnnotator {
  std::vector<std::vector<double>> confusion;  // K x K, rows sum to 1
  double concentration = 2.0;
  double invalid_rate = 0.0;  // probability that a sampled generation is unparseable
  // Weight of the decoy class's confusion row when an instance carries a decoy.
  double decoy_susceptibility = 0.0;
};

// An OpenAI-compatible chat-completions endpoint.
struct RemoteAnnotator {
  std::string model;
  std::string base_url;  // e.g. http://localhost:8000/v1
  std::string api_key;
  std::chrono::milliseconds timeout{60'000};
  int retries = 3;
  std::chrono::milliseconds backoff{500};
  double temperature = 1.0;
  int top_logprobs = 20;
  int max_tokens = 16;
};

struct AnnotatorSpec {
  std::string name;
  std::size_t repeats = 5;  // T
  std::variant<SimulatedAnnotator, RemoteAnnotator> backend;

  bool is_simulated() const noexcept { return std::holds_alternative<SimulatedAnnotator>(backend); }
  // Throws Config errors; num_classes is K.
  void validate(std::size_t num_classes) const;
};

using DecodedLabel = std::optional<ClassIndex>;  // nullopt = invalid generation

struct AnnotatorSignal {
  std::vector<double> z;  // scored class distribution
  std::vector<double> c;  // consistency scores
  std::vector<DecodedLabel> decoded;

  std::size_t num_classes() const noexcept { return z.size(); }
  std::size_t invalid_count() const;
};

// Classification prompt with the label list spliced in twice and the document as the question.
std::string build_prompt(std::string_view text, const LabelSpace& labels);

// Case-insensitive, whitespace-trimmed exact match against the class names.
DecodedLabel decode_label(std::string_view raw, const LabelSpace& labels);

// c[k] = (1/T) * #{t : decoded[t] == k}; invalid generations count for nothing.
std::vector<double> consistency_scores(std::span<const DecodedLabel> decoded, std::size_t num_classes);

// Softmax restricted to the K classes; classes missing from the map get
// probability zero. Throws DegenerateSignal if no class has a finite log-prob.
std::vector<double> extract_logits(const std::map<ClassIndex, double>& label_logprobs, std::size_t num_classes);

// One annotator on one instance. Simulated annotators are deterministic in
// (seed, instance id, annotator name).
AnnotatorSignal query_signal(const AnnotatorSpec& annotator, const Instance& instance, const LabelSpace& labels,
                             std::uint64_t seed);

struct CellError {
  ErrorKind kind;
  std::string message;
};

using SignalCell = std::variant<AnnotatorSignal, CellError>;

// rows[i][j] = annotator j on instance i, in input order.
struct SignalMatrix {
  std::vector<std::vector<SignalCell>> rows;

  std::size_t error_count() const;
  // Signals of row i; throws the first cell error of that row.
  std::vector<AnnotatorSignal> row_signals(std::size_t i) const;
};

struct BatchOptions {
  std::size_t max_in_flight = 1;
};

// Validates every spec (configuration errors abort the batch), then fans out
// per-cell queries. Cell failures are reported in place.
SignalMatrix annotate_batch(std::span<const AnnotatorSpec> annotators, std::span<const Instance* const> instances,
                            const LabelSpace& labels, std::uint64_t seed, BatchOptions options = {});

}  // namespace mollia
