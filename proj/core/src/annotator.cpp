#include "mollia/annotator.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

#include "mollia/chat_client.hpp"
#include "mollia/seeding.hpp"

namespace mollia {

namespace {

std::string lower_trimmed(std::string_view s) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
  std::string out(s.substr(b, e - b));
  for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

std::string join_labels(const LabelSpace& labels) {
  std::string out;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    if (k) out += ", ";
    out += labels.name(k);
  }
  return out;
}

}  // namespace

void AnnotatorSpec::validate(std::size_t num_classes) const {
  if (name.empty()) fail(ErrorKind::Config, "annotator name must be non-empty");
  if (repeats < 1) fail(ErrorKind::Config, "annotator '" + name + "': repeats T must be >= 1");
  if (const auto* sim = std::get_if<SimulatedAnnotator>(&backend)) {
    if (sim->confusion.size() != num_classes) {
      fail(ErrorKind::Config, "annotator '" + name + "': confusion matrix must have " + std::to_string(num_classes) +
                                  " rows");
    }
    for (std::size_t r = 0; r < sim->confusion.size(); ++r) {
      const auto& row = sim->confusion[r];
      if (row.size() != num_classes) {
        fail(ErrorKind::Config, "annotator '" + name + "': confusion row " + std::to_string(r) + " has wrong width");
      }
      double sum = 0.0;
      for (double v : row) {
        if (!(v >= 0.0)) fail(ErrorKind::Config, "annotator '" + name + "': negative confusion entry");
        sum += v;
      }
      if (std::abs(sum - 1.0) > 1e-9) {
        fail(ErrorKind::Config, "annotator '" + name + "': confusion row " + std::to_string(r) + " sums to " +
                                    std::to_string(sum) + ", not 1");
      }
    }
    if (!(sim->concentration > 0.0)) fail(ErrorKind::Config, "annotator '" + name + "': concentration must be > 0");
    if (!(sim->invalid_rate >= 0.0 && sim->invalid_rate < 1.0)) {
      fail(ErrorKind::Config, "annotator '" + name + "': invalid_rate must be in [0, 1)");
    }
    if (!(sim->decoy_susceptibility >= 0.0 && sim->decoy_susceptibility <= 1.0)) {
      fail(ErrorKind::Config, "annotator '" + name + "': decoy_susceptibility must be in [0, 1]");
    }
  } else {
    const auto& remote = std::get<RemoteAnnotator>(backend);
    if (remote.model.empty()) fail(ErrorKind::Config, "annotator '" + name + "': remote model id is empty");
    if (remote.base_url.empty()) fail(ErrorKind::Config, "annotator '" + name + "': remote base URL is empty");
    if (remote.retries < 0) fail(ErrorKind::Config, "annotator '" + name + "': retries must be >= 0");
  }
}

std::size_t AnnotatorSignal::invalid_count() const {
  return static_cast<std::size_t>(std::count(decoded.begin(), decoded.end(), std::nullopt));
}

std::string build_prompt(std::string_view text, const LabelSpace& labels) {
  const std::string list = join_labels(labels);
  std::string out;
  out += "Classify the given question based on the following categories: ";
  out += list;
  out += "\nTask: Determine the most appropriate category for the question. Your response should be only one of these labels: ";
  out += list;
  out += ", with no additional text or explanation.\nQuestion: ";
  out += text;
  out += "\nOutput:";
  return out;
}

DecodedLabel decode_label(std::string_view raw, const LabelSpace& labels) {
  const auto needle = lower_trimmed(raw);
  if (needle.empty()) return std::nullopt;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    if (lower_trimmed(labels.name(k)) == needle) return k;
  }
  return std::nullopt;
}

std::vector<double> consistency_scores(std::span<const DecodedLabel> decoded, std::size_t num_classes) {
  std::vector<double> c(num_classes, 0.0);
  if (decoded.empty()) return c;
  std::vector<std::size_t> counts(num_classes, 0);
  for (const auto& d : decoded) {
    if (d && *d < num_classes) ++counts[*d];
  }
  const auto T = static_cast<double>(decoded.size());
  for (std::size_t k = 0; k < num_classes; ++k) c[k] = static_cast<double>(counts[k]) / T;
  return c;
}

std::vector<double> extract_logits(const std::map<ClassIndex, double>& label_logprobs, std::size_t num_classes) {
  double top = -std::numeric_limits<double>::infinity();
  for (const auto& [k, lp] : label_logprobs) {
    if (k < num_classes && std::isfinite(lp)) top = std::max(top, lp);
  }
  if (!std::isfinite(top)) fail(ErrorKind::DegenerateSignal, "no class has a finite log-probability");
  std::vector<double> z(num_classes, 0.0);
  double total = 0.0;
  for (const auto& [k, lp] : label_logprobs) {
    if (k < num_classes && std::isfinite(lp)) {
      z[k] = std::exp(lp - top);
      total += z[k];
    }
  }
  for (auto& v : z) v /= total;
  return z;
}

namespace {

AnnotatorSignal simulate(const AnnotatorSpec& spec, const SimulatedAnnotator& sim, const Instance& instance,
                         std::size_t K, std::uint64_t seed) {
  if (!instance.gold_label) {
    fail(ErrorKind::Validation, "simulated annotator '" + spec.name + "' needs a gold label for '" + instance.id + "'");
  }
  std::vector<double> row = sim.confusion[*instance.gold_label];
  if (instance.decoy_label && sim.decoy_susceptibility > 0.0) {
    const auto& decoy = sim.confusion[*instance.decoy_label];
    for (std::size_t k = 0; k < K; ++k) {
      row[k] = (1.0 - sim.decoy_susceptibility) * row[k] + sim.decoy_susceptibility * decoy[k];
    }
  }

  Rng rng(derive_seed(seed, {"annotate", instance.id, spec.name}));
  AnnotatorSignal sig;
  sig.z.assign(K, 0.0);
  double total = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    if (row[k] > 0.0) sig.z[k] = gamma_draw(rng, sim.concentration * row[k]);
    total += sig.z[k];
  }
  if (!(total > 0.0)) {
    // Every gamma draw underflowed; fall back to the row itself.
    sig.z = row;
    total = std::accumulate(row.begin(), row.end(), 0.0);
  }
  for (auto& v : sig.z) v /= total;

  sig.decoded.reserve(spec.repeats);
  for (std::size_t t = 0; t < spec.repeats; ++t) {
    if (sim.invalid_rate > 0.0 && uniform01(rng) < sim.invalid_rate) {
      sig.decoded.emplace_back(std::nullopt);
      continue;
    }
    sig.decoded.emplace_back(categorical_draw(rng, sig.z));
  }
  sig.c = consistency_scores(sig.decoded, K);
  return sig;
}

AnnotatorSignal query_remote(const AnnotatorSpec& spec, const RemoteAnnotator& remote, const Instance& instance,
                             const LabelSpace& labels, std::uint64_t seed) {
  ChatClient client(spec.name, remote);
  ChatRequest scored;
  scored.model = remote.model;
  scored.prompt = build_prompt(instance.text, labels);
  scored.temperature = 0.0;
  scored.max_tokens = 1;
  scored.logprobs = true;
  scored.top_logprobs = remote.top_logprobs;
  scored.seed = derive_seed(seed, {"scored", instance.id, spec.name});

  AnnotatorSignal sig;
  const auto scored_reply = client.complete(scored);
  sig.z = extract_logits(match_label_logprobs(scored_reply.first_token_logprobs, labels), labels.size());

  ChatRequest sample = scored;
  sample.temperature = remote.temperature;
  sample.max_tokens = remote.max_tokens;
  sample.logprobs = false;
  sample.top_logprobs = 0;
  for (std::size_t t = 0; t < spec.repeats; ++t) {
    sample.seed = derive_seed(seed, {"sample", instance.id, spec.name, std::to_string(t)});
    sig.decoded.push_back(decode_label(client.complete(sample).content, labels));
  }
  sig.c = consistency_scores(sig.decoded, labels.size());
  return sig;
}

}  // namespace

AnnotatorSignal query_signal(const AnnotatorSpec& annotator, const Instance& instance, const LabelSpace& labels,
                             std::uint64_t seed) {
  if (const auto* sim = std::get_if<SimulatedAnnotator>(&annotator.backend)) {
    return simulate(annotator, *sim, instance, labels.size(), seed);
  }
  return query_remote(annotator, std::get<RemoteAnnotator>(annotator.backend), instance, labels, seed);
}

std::size_t SignalMatrix::error_count() const {
  std::size_t n = 0;
  for (const auto& row : rows) {
    for (const auto& cell : row) n += std::holds_alternative<CellError>(cell);
  }
  return n;
}

std::vector<AnnotatorSignal> SignalMatrix::row_signals(std::size_t i) const {
  std::vector<AnnotatorSignal> out;
  for (const auto& cell : rows.at(i)) {
    if (const auto* err = std::get_if<CellError>(&cell)) throw Error(err->kind, err->message);
    out.push_back(std::get<AnnotatorSignal>(cell));
  }
  return out;
}

SignalMatrix annotate_batch(std::span<const AnnotatorSpec> annotators, std::span<const Instance* const> instances,
                            const LabelSpace& labels, std::uint64_t seed, BatchOptions options) {
  for (const auto& a : annotators) a.validate(labels.size());

  const std::size_t n_ann = annotators.size();
  const std::size_t n_cells = instances.size() * n_ann;
  SignalMatrix out;
  out.rows.assign(instances.size(), std::vector<SignalCell>(n_ann, CellError{ErrorKind::State, "not queried"}));

  auto run_cell = [&](std::size_t cell) {
    const std::size_t i = cell / n_ann;
    const std::size_t j = cell % n_ann;
    try {
      out.rows[i][j] = query_signal(annotators[j], *instances[i], labels, seed);
    } catch (const Error& e) {
      out.rows[i][j] = CellError{e.kind(), e.what()};
    } catch (const std::exception& e) {
      out.rows[i][j] = CellError{ErrorKind::Protocol, e.what()};
    }
  };

  const std::size_t workers = std::min(std::max<std::size_t>(options.max_in_flight, 1), n_cells);
  if (workers <= 1) {
    for (std::size_t cell = 0; cell < n_cells; ++cell) run_cell(cell);
    return out;
  }
  // Each cell writes only its own slot, so no locking is needed.
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t cell = next++; cell < n_cells; cell = next++) run_cell(cell);
    });
  }
  for (auto& t : pool) t.join();
  return out;
}

}  // namespace mollia
