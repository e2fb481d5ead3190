#include "mollia/molam.hpp"

#include <algorithm>
#include <numeric>

#include "mollia/error.hpp"

namespace mollia {

using json = nlohmann::json;

MolamFeatures assemble_features(std::span<const AnnotatorSignal> signals) {
  if (signals.empty()) fail(ErrorKind::Shape, "no annotator signals to assemble");
  MolamFeatures f;
  f.num_annotators = signals.size();
  f.num_classes = signals.front().z.size();
  if (f.num_classes == 0) fail(ErrorKind::Shape, "annotator signal has no classes");
  f.h.reserve(2 * f.num_annotators * f.num_classes);
  for (std::size_t i = 0; i < signals.size(); ++i) {
    const auto& s = signals[i];
    if (s.z.size() != f.num_classes || s.c.size() != f.num_classes) {
      fail(ErrorKind::Shape, "annotator " + std::to_string(i) + " signal has K=" + std::to_string(s.z.size()) + "/" +
                                 std::to_string(s.c.size()) + ", expected " + std::to_string(f.num_classes));
    }
    f.h.insert(f.h.end(), s.z.begin(), s.z.end());
    f.h.insert(f.h.end(), s.c.begin(), s.c.end());
  }
  return f;
}

std::vector<ClassIndex> extract_negative_labels(std::span<const AnnotatorSignal> signals, double delta) {
  std::vector<ClassIndex> out;
  if (signals.empty()) return out;
  const std::size_t K = signals.front().z.size();
  for (std::size_t k = 0; k < K; ++k) {
    const bool all_low = std::all_of(signals.begin(), signals.end(),
                                     [&](const AnnotatorSignal& s) { return k < s.z.size() && s.z[k] < delta; });
    if (all_low) out.push_back(k);
  }
  return out;
}

ClassIndex argmax(std::span<const double> v) {
  return static_cast<ClassIndex>(std::max_element(v.begin(), v.end()) - v.begin());
}

namespace {

double max_consistency(std::span<const AnnotatorSignal> signals, ClassIndex k) {
  double best = 0.0;
  for (const auto& s : signals) {
    if (k < s.c.size()) best = std::max(best, s.c[k]);
  }
  return best;
}

Annotation finish(std::vector<double> probs, ClassIndex y_plus, std::span<const AnnotatorSignal> signals,
                  double delta) {
  Annotation a;
  a.y_plus = y_plus;
  a.confidence = probs[y_plus];
  a.probs = std::move(probs);
  a.y_minus = extract_negative_labels(signals, delta);
  std::erase(a.y_minus, y_plus);
  a.consistency = max_consistency(signals, y_plus);
  return a;
}

// Argmax of `primary`, ties broken by `secondary`, then by lowest index.
ClassIndex argmax_tiebreak(const std::vector<double>& primary, const std::vector<double>& secondary) {
  ClassIndex best = 0;
  for (ClassIndex k = 1; k < primary.size(); ++k) {
    if (primary[k] > primary[best] || (primary[k] == primary[best] && secondary[k] > secondary[best])) best = k;
  }
  return best;
}

}  // namespace

Annotation annotate(const Aggregator& model, std::span<const AnnotatorSignal> signals, double delta) {
  const auto features = assemble_features(signals);
  if (features.h.size() != model.num_features()) {
    fail(ErrorKind::Shape, "MoLAM expects " + std::to_string(model.num_features()) + " features, signals give " +
                               std::to_string(features.h.size()));
  }
  auto probs = model.predict_proba(features.h);
  const auto y = argmax(probs);
  return finish(std::move(probs), y, signals, delta);
}

Annotation vote_annotation(std::span<const AnnotatorSignal> signals, double delta) {
  const auto features = assemble_features(signals);
  const auto K = features.num_classes;
  std::vector<double> votes(K, 0.0);
  std::vector<double> mass(K, 0.0);
  for (const auto& s : signals) {
    for (std::size_t k = 0; k < K; ++k) {
      votes[k] += s.c[k];
      mass[k] += s.z[k];
    }
  }
  const auto y = argmax_tiebreak(votes, mass);
  const double total = std::accumulate(votes.begin(), votes.end(), 0.0);
  std::vector<double> probs(K, 1.0 / static_cast<double>(K));
  if (total > 0.0) {
    for (std::size_t k = 0; k < K; ++k) probs[k] = votes[k] / total;
  }
  return finish(std::move(probs), y, signals, delta);
}

Annotation logits_annotation(std::span<const AnnotatorSignal> signals, double delta) {
  const auto features = assemble_features(signals);
  const auto K = features.num_classes;
  std::vector<double> mean(K, 0.0);
  for (const auto& s : signals) {
    for (std::size_t k = 0; k < K; ++k) mean[k] += s.z[k] / static_cast<double>(signals.size());
  }
  const auto y = argmax(mean);
  return finish(std::move(mean), y, signals, delta);
}

Annotation single_annotation(const AnnotatorSignal& signal, double delta) {
  std::span<const AnnotatorSignal> one(&signal, 1);
  assemble_features(one);
  const auto y = argmax_tiebreak(signal.c, signal.z);
  return finish(signal.z, y, one, delta);
}

PseudoLabelResult pseudo_label_expand(const AggregatorConfig& config, const Dataset& gold, const Aggregator& initial,
                                      const std::vector<std::vector<double>>& unlabeled, double sigma, int max_rounds,
                                      std::uint64_t seed, const Dataset* validation) {
  if (!(sigma > 0.0 && sigma <= 1.0)) fail(ErrorKind::Config, "sigma must lie in (0, 1]");
  PseudoLabelResult result;
  result.training = gold;
  result.model = initial.clone();
  std::vector<bool> admitted(unlabeled.size(), false);
  for (int round = 1; round <= max_rounds; ++round) {
    std::size_t added = 0;
    for (std::size_t i = 0; i < unlabeled.size(); ++i) {
      if (admitted[i]) continue;
      const auto p = result.model->predict_proba(unlabeled[i]);
      const auto y = argmax(p);
      if (p[y] >= sigma) {
        admitted[i] = true;
        result.admissions.push_back({i, y, p[y], round});
        result.training.push_back(unlabeled[i], y);
        ++added;
      }
    }
    if (added == 0) break;
    result.rounds_run = round;
    result.model = train_aggregator(config, result.training, validation, seed);
  }
  return result;
}

Molam::Molam(std::unique_ptr<Aggregator> model, std::vector<std::string> annotators, std::size_t num_classes,
             double delta)
    : model_(std::move(model)), annotators_(std::move(annotators)), num_classes_(num_classes), delta_(delta) {
  if (!model_) fail(ErrorKind::State, "MoLAM needs a trained aggregator");
  if (model_->num_features() != 2 * annotators_.size() * num_classes_) {
    fail(ErrorKind::Shape, "aggregator width does not match 2*N*K for the annotator roster");
  }
}

Molam::Molam(const Molam& other)
    : model_(other.model_ ? other.model_->clone() : nullptr),
      annotators_(other.annotators_),
      num_classes_(other.num_classes_),
      delta_(other.delta_) {}

Molam& Molam::operator=(const Molam& other) {
  if (this != &other) *this = Molam(other);
  return *this;
}

Annotation Molam::annotate(std::span<const AnnotatorSignal> signals) const {
  if (!model_) fail(ErrorKind::State, "MoLAM is not trained");
  if (signals.size() != annotators_.size()) {
    fail(ErrorKind::Shape, "MoLAM expects " + std::to_string(annotators_.size()) + " annotator signals, got " +
                               std::to_string(signals.size()));
  }
  return mollia::annotate(*model_, signals, delta_);
}

json Molam::to_json() const {
  return {{"format", "mollia.molam"},
          {"version", 1},
          {"annotators", annotators_},
          {"num_classes", num_classes_},
          {"delta", delta_},
          {"model", model_->to_json()}};
}

Molam Molam::from_json(const json& j) {
  if (j.value("format", "") != "mollia.molam" || j.value("version", 0) != 1) {
    fail(ErrorKind::Parse, "not a version-1 MoLAM snapshot");
  }
  return Molam(aggregator_from_json(j.at("model")), j.at("annotators").get<std::vector<std::string>>(),
               j.at("num_classes").get<std::size_t>(), j.at("delta").get<double>());
}

MolamTrainResult train_molam(const MolamTrainOptions& options, const std::vector<std::string>& annotators,
                             std::size_t num_classes, const std::vector<std::vector<AnnotatorSignal>>& gold_signals,
                             const std::vector<ClassIndex>& gold_labels,
                             const std::vector<std::vector<AnnotatorSignal>>& unlabeled_signals,
                             const std::vector<std::vector<AnnotatorSignal>>& validation_signals,
                             const std::vector<ClassIndex>& validation_labels, std::uint64_t seed) {
  if (gold_signals.size() != gold_labels.size()) fail(ErrorKind::Shape, "gold signals/labels length mismatch");
  if (validation_signals.size() != validation_labels.size()) {
    fail(ErrorKind::Shape, "validation signals/labels length mismatch");
  }
  auto to_rows = [](const std::vector<std::vector<AnnotatorSignal>>& sigs) {
    std::vector<std::vector<double>> rows;
    rows.reserve(sigs.size());
    for (const auto& s : sigs) rows.push_back(assemble_features(s).h);
    return rows;
  };
  Dataset gold{to_rows(gold_signals), gold_labels, num_classes};
  Dataset validation{to_rows(validation_signals), validation_labels, num_classes};
  const Dataset* val = validation.size() ? &validation : nullptr;

  auto model = train_aggregator(options.aggregator, gold, val, seed);
  MolamTrainResult result;
  result.training_size = gold.size();
  if (options.pseudo_label && !unlabeled_signals.empty()) {
    auto expanded = pseudo_label_expand(options.aggregator, gold, *model, to_rows(unlabeled_signals), options.sigma,
                                        options.max_rounds, seed, val);
    model = std::move(expanded.model);
    result.admissions = std::move(expanded.admissions);
    result.rounds_run = expanded.rounds_run;
    result.training_size = expanded.training.size();
  }
  result.molam = Molam(std::move(model), annotators, num_classes, options.delta);
  return result;
}

}  // namespace mollia
