#include "mollia/orchestrator.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mollia/error.hpp"
#include "mollia/metrics.hpp"
#include "mollia/query.hpp"
#include "mollia/report.hpp"
#include "mollia/seeding.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace mollia {

Ablation parse_ablation(std::string_view name) {
  if (name == "A" || name == "a") return Ablation::A;
  if (name == "B" || name == "b") return Ablation::B;
  if (name == "C" || name == "c") return Ablation::C;
  if (name == "D" || name == "d") return Ablation::D;
  fail(ErrorKind::Config, "unknown ablation '" + std::string(name) + "' (A, B, C, D)");
}

std::string_view to_string(Ablation ablation) {
  switch (ablation) {
    case Ablation::A: return "A";
    case Ablation::B: return "B";
    case Ablation::C: return "C";
    case Ablation::D: return "D";
  }
  return "A";
}

bool uses_negative_learning(Ablation a) { return a == Ablation::A || a == Ablation::B; }
bool uses_discrepancy(Ablation a) { return a == Ablation::A || a == Ablation::C; }

double lambda_at(int t, int iterations, double lambda_start, double lambda_end) {
  if (iterations <= 1) return lambda_start;
  return lambda_start + (lambda_end - lambda_start) * static_cast<double>(t) / static_cast<double>(iterations - 1);
}

int compute_discrepancy(const ClassifierModel& previous, const SparseVector& x, ClassIndex y_plus) {
  return argmax(previous.logits(x)) == y_plus ? 0 : 1;
}

// ---- JSON forms ----

json to_json(const AnnotationRecord& r) {
  return json{{"id", r.id},
              {"iteration", r.iteration},
              {"y_plus", r.y_plus},
              {"y_minus", r.y_minus},
              {"d_anno", r.d_anno},
              {"w_d", r.w_d},
              {"confidence", r.confidence},
              {"probs", r.probs},
              {"consistency", r.consistency},
              {"gold", r.gold ? json(*r.gold) : json(nullptr)}};
}

AnnotationRecord annotation_record_from_json(const json& j) {
  AnnotationRecord r;
  j.at("id").get_to(r.id);
  j.at("iteration").get_to(r.iteration);
  j.at("y_plus").get_to(r.y_plus);
  j.at("y_minus").get_to(r.y_minus);
  j.at("d_anno").get_to(r.d_anno);
  j.at("w_d").get_to(r.w_d);
  j.at("confidence").get_to(r.confidence);
  j.at("probs").get_to(r.probs);
  j.at("consistency").get_to(r.consistency);
  if (!j.at("gold").is_null()) r.gold = j.at("gold").get<ClassIndex>();
  return r;
}

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
std::optional<double> opt_double(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace

json to_json(const IterationMetrics& m) {
  return json{{"iteration", m.iteration},
              {"pool_size", m.pool_size},
              {"micro_f1", m.micro_f1},
              {"batch_annotation_acc", opt(m.batch_annotation_acc)},
              {"cumulative_annotation_acc", opt(m.cumulative_annotation_acc)},
              {"mean_w_d", m.mean_w_d},
              {"mean_negatives", m.mean_negatives},
              {"discrepancy_rate", m.discrepancy_rate},
              {"lambda", m.lambda},
              {"epochs", m.epochs},
              {"validation_f1", m.validation_f1}};
}

IterationMetrics iteration_metrics_from_json(const json& j) {
  IterationMetrics m;
  j.at("iteration").get_to(m.iteration);
  j.at("pool_size").get_to(m.pool_size);
  j.at("micro_f1").get_to(m.micro_f1);
  m.batch_annotation_acc = opt_double(j.at("batch_annotation_acc"));
  m.cumulative_annotation_acc = opt_double(j.at("cumulative_annotation_acc"));
  j.at("mean_w_d").get_to(m.mean_w_d);
  j.at("mean_negatives").get_to(m.mean_negatives);
  j.at("discrepancy_rate").get_to(m.discrepancy_rate);
  j.at("lambda").get_to(m.lambda);
  j.at("epochs").get_to(m.epochs);
  j.at("validation_f1").get_to(m.validation_f1);
  return m;
}

json state_to_json(const RunState& s) {
  json records = json::array();
  for (const auto& r : s.records) records.push_back(to_json(r));
  json history = json::array();
  for (const auto& m : s.history) history.push_back(to_json(m));
  return json{{"format", "mollia.state"},
              {"version", 1},
              {"iteration", s.iteration},
              {"ablation", to_string(s.ablation)},
              {"pools", s.pools},
              {"records", std::move(records)},
              {"history", std::move(history)},
              {"initial_micro_f1", s.initial_micro_f1},
              {"terminated", s.terminated},
              {"termination_reason", s.termination_reason},
              {"molam_admissions", s.molam_admissions},
              {"molam_training_size", s.molam_training_size}};
}

RunState state_from_json(const json& j) {
  if (j.value("format", "") != "mollia.state") fail(ErrorKind::Parse, "not a run state file");
  if (j.value("version", 0) != 1) fail(ErrorKind::Parse, "unsupported run state version");
  RunState s;
  j.at("iteration").get_to(s.iteration);
  s.ablation = parse_ablation(j.at("ablation").get<std::string>());
  j.at("pools").get_to(s.pools);
  for (const auto& r : j.at("records")) s.records.push_back(annotation_record_from_json(r));
  for (const auto& m : j.at("history")) s.history.push_back(iteration_metrics_from_json(m));
  j.at("initial_micro_f1").get_to(s.initial_micro_f1);
  j.at("terminated").get_to(s.terminated);
  j.at("termination_reason").get_to(s.termination_reason);
  j.at("molam_admissions").get_to(s.molam_admissions);
  j.at("molam_training_size").get_to(s.molam_training_size);
  return s;
}

// ---- Experiment ----

namespace {

Corpus load_split(const fs::path& path, const std::optional<CorpusFormat>& format, const LabelSpace& labels) {
  return load_corpus(path, format ? *format : format_from_extension(path), labels);
}

std::vector<ClassIndex> gold_labels_of(const Corpus& corpus, std::string_view split) {
  std::vector<ClassIndex> out;
  out.reserve(corpus.size());
  for (const auto& inst : corpus) {
    if (!inst.gold_label) fail(ErrorKind::Validation, std::string(split) + " instance '" + inst.id + "' has no gold label");
    out.push_back(*inst.gold_label);
  }
  return out;
}

}  // namespace

Experiment::Experiment(RunConfig config, Ablation ablation)
    : config_(std::move(config)), ablation_(ablation), featurizer_(config_.featurizer) {
  require_valid(config_);
  labels_ = LabelSpace(config_.data.labels);
  pool_ = load_split(config_.data.pool, config_.data.format, labels_);
  test_ = load_split(config_.data.test, config_.data.format, labels_);
  if (!config_.data.validation.empty()) validation_ = load_split(config_.data.validation, config_.data.format, labels_);
  if (test_.empty()) fail(ErrorKind::Validation, "test split is empty");

  pool_features_.reserve(pool_.size());
  for (std::size_t i = 0; i < pool_.size(); ++i) {
    pool_features_.push_back(featurizer_.transform(pool_[i].text));
    pool_index_.emplace(pool_[i].id, i);
  }
  test_labels_ = gold_labels_of(test_, "test");
  for (const auto& inst : test_) test_features_.push_back(featurizer_.transform(inst.text));
  validation_labels_ = gold_labels_of(validation_, "validation");
  for (const auto& inst : validation_) validation_features_.push_back(featurizer_.transform(inst.text));
}

double Experiment::alpha() const { return uses_discrepancy(ablation_) ? config_.robust.alpha : 1.0; }

double Experiment::lambda(int t) const {
  if (!uses_negative_learning(ablation_)) return 0.0;
  return lambda_at(t, config_.iterations, config_.robust.lambda_start, config_.robust.lambda_end);
}

const SparseVector& Experiment::features_of(std::string_view id) const {
  auto it = pool_index_.find(id);
  if (it == pool_index_.end()) fail(ErrorKind::State, "unknown pool id '" + std::string(id) + "'");
  return pool_features_[it->second];
}

namespace {

std::vector<AnnotatorSpec> active_annotators(const RunConfig& config) {
  if (config.mode != AnnotationMode::Single) return config.annotators;
  for (const auto& a : config.annotators)
    if (a.name == config.single_annotator) return {a};
  fail(ErrorKind::Config, "single annotator '" + config.single_annotator + "' is not configured");
}

}  // namespace

void Experiment::fetch_signals(const std::vector<const Instance*>& instances) {
  std::vector<const Instance*> missing;
  for (const auto* inst : instances)
    if (!signal_cache_.count(inst->id)) missing.push_back(inst);
  if (missing.empty()) return;
  const auto annotators = active_annotators(config_);
  const auto matrix = annotate_batch(annotators, missing, labels_, config_.seed, BatchOptions{config_.max_in_flight});
  // Check every row before caching any, so a failed batch leaves no partial trace.
  std::vector<std::vector<AnnotatorSignal>> rows;
  rows.reserve(missing.size());
  for (std::size_t i = 0; i < missing.size(); ++i) {
    for (const auto& cell : matrix.rows[i]) {
      if (const auto* err = std::get_if<CellError>(&cell)) {
        const std::string where = "instance '" + missing[i]->id + "': " + err->message;
        if (err->kind == ErrorKind::AnnotatorUnavailable) throw Error(ErrorKind::AnnotatorUnavailable, where);
        throw Error(err->kind, where);
      }
    }
    rows.push_back(matrix.row_signals(i));
  }
  for (std::size_t i = 0; i < missing.size(); ++i) signal_cache_.emplace(missing[i]->id, std::move(rows[i]));
}

std::vector<AnnotatorSignal> Experiment::signals_for(const Instance& instance) {
  fetch_signals({&instance});
  return signal_cache_.at(instance.id);
}

Annotation Experiment::label(std::span<const AnnotatorSignal> signals) const {
  switch (config_.mode) {
    case AnnotationMode::Molam:
      if (!molam_) fail(ErrorKind::State, "annotation model has not been trained");
      return molam_->annotate(signals);
    case AnnotationMode::Vote: return vote_annotation(signals, config_.molam.delta);
    case AnnotationMode::Logits: return logits_annotation(signals, config_.molam.delta);
    case AnnotationMode::Single: return single_annotation(signals.front(), config_.molam.delta);
  }
  fail(ErrorKind::State, "unknown annotation mode");
}

double Experiment::evaluate(const ClassifierModel& model) const {
  std::vector<ClassIndex> pred;
  pred.reserve(test_features_.size());
  for (const auto& x : test_features_) pred.push_back(argmax(model.logits(x)));
  return micro_f1(pred, test_labels_);
}

ClassifierModel Experiment::train_on_pool(const RunState& state,
                                          const std::map<std::string, const AnnotationRecord*>& records,
                                          double lambda, std::uint64_t seed, TrainReport* report) const {
  std::vector<RobustExample> examples;
  examples.reserve(state.pools.labeled.size());
  for (const auto& e : state.pools.labeled) {
    RobustExample ex;
    ex.features = features_of(e.id);
    if (e.source == LabelSource::Gold) {
      ex.target = RobustTarget{e.label, {}, 1.0};
      ex.is_gold = true;
    } else {
      const auto* r = records.at(e.id);
      ex.target = RobustTarget{r->y_plus, r->y_minus, r->w_d};
    }
    examples.push_back(std::move(ex));
  }
  ValidationSet val;
  if (!validation_features_.empty()) val = ValidationSet{validation_features_, validation_labels_};
  const LossParams loss{alpha(), lambda};
  return train_classifier(examples, featurizer_.dimension(), labels_.size(), config_.classifier, loss, seed, val,
                          report);
}

RunState Experiment::initialize() {
  RunState state;
  state.ablation = ablation_;
  state.pools = seed_pools(pool_, config_.n_init, config_.seed, SeedOptions{config_.stratified});

  if (config_.mode == AnnotationMode::Molam) {
    std::vector<const Instance*> gold_instances;
    std::vector<ClassIndex> gold_labels;
    for (const auto& e : state.pools.labeled) {
      gold_instances.push_back(pool_.find(e.id));
      gold_labels.push_back(e.label);
    }
    std::vector<std::string> candidates(state.pools.unlabeled.begin(), state.pools.unlabeled.end());
    std::vector<const Instance*> unlabeled;
    if (config_.molam.pseudo_label) {
      if (config_.molam.pseudo_label_sample > 0 && config_.molam.pseudo_label_sample < candidates.size()) {
        Rng rng(derive_seed(config_.seed, {"pseudo_label_sample"}));
        shuffle(candidates.begin(), candidates.end(), rng);
        candidates.resize(config_.molam.pseudo_label_sample);
        std::sort(candidates.begin(), candidates.end());
      }
      for (const auto& id : candidates) unlabeled.push_back(pool_.find(id));
    }
    note("annotating " + std::to_string(gold_instances.size() + unlabeled.size()) + " instances for the annotation model");
    auto all = gold_instances;
    all.insert(all.end(), unlabeled.begin(), unlabeled.end());
    fetch_signals(all);

    std::vector<std::vector<AnnotatorSignal>> gold_signals, unlabeled_signals, val_signals;
    for (const auto* inst : gold_instances) gold_signals.push_back(signal_cache_.at(inst->id));
    for (const auto* inst : unlabeled) unlabeled_signals.push_back(signal_cache_.at(inst->id));
    if (!validation_.empty()) {
      std::vector<const Instance*> ptrs;
      for (const auto& inst : validation_) ptrs.push_back(&inst);
      const auto matrix = annotate_batch(config_.annotators, ptrs, labels_, derive_seed(config_.seed, {"validation"}),
                                         BatchOptions{config_.max_in_flight});
      for (std::size_t i = 0; i < ptrs.size(); ++i) val_signals.push_back(matrix.row_signals(i));
    }

    MolamTrainOptions options;
    options.aggregator = config_.aggregator_config();
    options.sigma = config_.molam.sigma;
    options.delta = config_.molam.delta;
    options.pseudo_label = config_.molam.pseudo_label;
    options.max_rounds = config_.molam.max_rounds;
    std::vector<std::string> names;
    for (const auto& a : config_.annotators) names.push_back(a.name);
    auto trained = train_molam(options, names, labels_.size(), gold_signals, gold_labels, unlabeled_signals,
                               val_signals, validation_labels_, derive_seed(config_.seed, {"molam"}));
    state.molam_admissions = trained.admissions.size();
    state.molam_training_size = trained.training_size;
    molam_ = std::move(trained.molam);
    note("annotation model trained on " + std::to_string(state.molam_training_size) + " rows (" +
         std::to_string(state.molam_admissions) + " pseudo-labeled)");
  }

  state.current = train_on_pool(state, {}, lambda(0), derive_seed(config_.seed, {"train", "init"}), nullptr);
  state.initial_micro_f1 = evaluate(state.current);
  return state;
}

void Experiment::run_iteration(RunState& state) {
  const int t = state.iteration;
  if (t >= config_.iterations) fail(ErrorKind::State, "run already completed all iterations");
  if (state.terminated) fail(ErrorKind::State, "run has terminated: " + state.termination_reason);
  const std::size_t B = config_.batch_size;
  if (state.pools.unlabeled.size() < B) {
    state.terminated = true;
    state.termination_reason = "unlabeled pool exhausted (" + std::to_string(state.pools.unlabeled.size()) +
                               " left, batch size " + std::to_string(B) + ")";
    return;
  }

  // Query.
  std::vector<std::string> ids(state.pools.unlabeled.begin(), state.pools.unlabeled.end());
  std::vector<SparseVector> features;
  std::vector<std::vector<double>> probs;
  features.reserve(ids.size());
  probs.reserve(ids.size());
  for (const auto& id : ids) {
    features.push_back(features_of(id));
    probs.push_back(state.current.predict_proba(features.back()));
  }
  std::vector<SparseVector> labeled_features;
  for (const auto& e : state.pools.labeled) labeled_features.push_back(features_of(e.id));
  QueryContext ctx{ids, probs, features, labeled_features, B, derive_seed(config_.seed, {"query", std::to_string(t)})};
  const auto selected = find_strategy(config_.strategy)(ctx);

  // Annotate. Any failure propagates before the state changes.
  std::vector<const Instance*> batch;
  for (const auto& id : selected) batch.push_back(pool_.find(id));
  fetch_signals(batch);

  std::vector<AnnotationRecord> fresh;
  std::vector<LabeledEntry> entries;
  for (const auto* inst : batch) {
    const auto& signals = signal_cache_.at(inst->id);
    const auto a = label(signals);
    AnnotationRecord r;
    r.id = inst->id;
    r.iteration = t;
    r.y_plus = a.y_plus;
    r.y_minus = a.y_minus;
    r.confidence = a.confidence;
    r.probs = a.probs;
    r.consistency = a.consistency;
    r.gold = inst->gold_label;
    // Discrepancy against the model from before this batch joined, then W_d.
    r.d_anno = compute_discrepancy(state.current, features_of(inst->id), r.y_plus);
    r.w_d = discrepancy_weight(r.d_anno != 0, alpha());
    entries.push_back(LabeledEntry{r.id, r.y_plus, LabelSource::Molam});
    fresh.push_back(std::move(r));
  }

  // Pool transfer.
  RunState next;
  next.pools = transfer(state.pools, entries, labels_.size());
  next.records = state.records;
  next.records.insert(next.records.end(), fresh.begin(), fresh.end());

  // Cold-start retraining on the full labeled pool.
  std::map<std::string, const AnnotationRecord*> by_id;
  for (const auto& r : next.records) by_id.emplace(r.id, &r);
  const double lam = lambda(t);
  TrainReport report;
  auto model = train_on_pool(next, by_id, lam, derive_seed(config_.seed, {"train", std::to_string(t)}), &report);

  IterationMetrics m;
  m.iteration = t;
  m.pool_size = next.pools.labeled.size();
  m.micro_f1 = evaluate(model);
  m.lambda = lam;
  m.epochs = report.epochs_run;
  m.validation_f1 = report.best_validation_f1;
  double w_sum = 0.0, neg_sum = 0.0, d_sum = 0.0;
  std::size_t correct = 0, known = 0;
  for (const auto& r : fresh) {
    w_sum += r.w_d;
    neg_sum += static_cast<double>(r.y_minus.size());
    d_sum += r.d_anno;
    if (r.gold) {
      ++known;
      correct += *r.gold == r.y_plus;
    }
  }
  const auto n = static_cast<double>(fresh.size());
  m.mean_w_d = w_sum / n;
  m.mean_negatives = neg_sum / n;
  m.discrepancy_rate = d_sum / n;
  if (known == fresh.size()) m.batch_annotation_acc = static_cast<double>(correct) / n;
  std::size_t all_correct = 0;
  bool all_known = true;
  for (const auto& r : next.records) {
    all_known = all_known && r.gold.has_value();
    if (r.gold) all_correct += *r.gold == r.y_plus;
  }
  if (all_known) m.cumulative_annotation_acc = static_cast<double>(all_correct) / static_cast<double>(next.records.size());

  state.pools = std::move(next.pools);
  state.records = std::move(next.records);
  state.previous = std::move(state.current);
  state.current = std::move(model);
  state.history.push_back(m);
  state.iteration = t + 1;

  char line[160];
  std::snprintf(line, sizeof line, "iteration %d/%d: pool %zu, micro-F1 %.4f, lambda %.3f, discrepant %.0f/%zu", t + 1,
                config_.iterations, m.pool_size, m.micro_f1, m.lambda, d_sum, fresh.size());
  note(line);
}

// ---- checkpoints ----

void write_atomic(const fs::path& path, std::string_view content) {
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) fail(ErrorKind::Io, "failed writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) fail(ErrorKind::Io, "cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

namespace {

constexpr const char* kManifest = "manifest.json";

std::string numbered(const char* stem, int index, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%04d%s", stem, index, ext);
  return buf;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

json read_json(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, path.string() + ": " + e.what());
  }
}

std::string model_bytes(const ClassifierModel& m) {
  std::ostringstream os(std::ios::binary);
  m.write(os);
  return os.str();
}

ClassifierModel read_model(const fs::path& path) {
  std::istringstream in(read_file(path), std::ios::binary);
  return ClassifierModel::read(in);
}

std::string fingerprint(const RunConfig& config) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(to_json(config).dump())));
  return buf;
}

void save_checkpoint(const fs::path& dir, const RunConfig& config, const RunState& state, int keep_snapshots,
                     bool complete) {
  const fs::path cp = dir / "checkpoints";
  const int i = state.iteration;
  if (!fs::exists(cp / numbered("classifier", i, ".bin"))) {
    write_atomic(cp / numbered("classifier", i, ".bin"), model_bytes(state.current));
  }
  write_atomic(cp / numbered("state", i, ".json"), state_to_json(state).dump(1) + "\n");

  json checkpoints = json::array();
  for (int k = 0; k <= i; ++k) checkpoints.push_back(k);
  const json manifest{{"format", "mollia.run"},
                      {"version", 1},
                      {"seed", config.seed},
                      {"ablation", to_string(state.ablation)},
                      {"config_fingerprint", fingerprint(config)},
                      {"iterations", config.iterations},
                      {"checkpoints", std::move(checkpoints)},
                      {"latest", i},
                      {"complete", complete},
                      {"terminated", state.terminated}};
  write_atomic(dir / kManifest, manifest.dump(1) + "\n");

  for (int k = i - keep_snapshots; k >= 0; --k) {
    std::error_code ec;
    if (!fs::remove(cp / numbered("classifier", k, ".bin"), ec)) break;
  }
}

}  // namespace

RunState load_checkpoint(const fs::path& run_dir) {
  const json manifest = read_json(run_dir / kManifest);
  if (manifest.value("format", "") != "mollia.run") fail(ErrorKind::Parse, "not a run manifest");
  if (manifest.value("version", 0) != 1) fail(ErrorKind::Parse, "unsupported run manifest version");
  const int latest = manifest.at("latest").get<int>();
  const fs::path cp = run_dir / "checkpoints";
  RunState state = state_from_json(read_json(cp / numbered("state", latest, ".json")));
  state.current = read_model(cp / numbered("classifier", latest, ".bin"));
  if (latest > 0 && fs::exists(cp / numbered("classifier", latest - 1, ".bin"))) {
    state.previous = read_model(cp / numbered("classifier", latest - 1, ".bin"));
  }
  return state;
}

RunState run(const RunConfig& config, const RunOptions& options) {
  require_valid(config);
  if (options.out_dir.empty()) fail(ErrorKind::Config, "an output directory is required");
  if (options.keep_snapshots < 2) fail(ErrorKind::Config, "keep_snapshots must be >= 2");
  const fs::path& dir = options.out_dir;
  const bool existing = fs::exists(dir / kManifest);
  if (existing && !options.resume) {
    fail(ErrorKind::State, dir.string() + " already holds a run; resume it or choose another output directory");
  }

  Experiment exp(config, options.ablation);
  exp.set_progress(options.progress);
  RunState state;
  if (existing) {
    const json manifest = read_json(dir / kManifest);
    if (manifest.at("config_fingerprint").get<std::string>() != fingerprint(config) ||
        manifest.at("ablation").get<std::string>() != to_string(options.ablation)) {
      fail(ErrorKind::State, "checkpoint in " + dir.string() + " was written by a different configuration");
    }
    state = load_checkpoint(dir);
    if (config.mode == AnnotationMode::Molam) exp.restore_molam(Molam::from_json(read_json(dir / "molam.json")));
    if (options.progress) options.progress("resuming at iteration " + std::to_string(state.iteration));
  } else {
    fs::create_directories(dir);
    write_atomic(dir / "config.json", to_json(config).dump(1) + "\n");
    state = exp.initialize();
    if (const auto* m = exp.molam()) write_atomic(dir / "molam.json", m->to_json().dump() + "\n");
    save_checkpoint(dir, config, state, options.keep_snapshots, false);
  }

  int done_here = 0;
  while (state.iteration < config.iterations && !state.terminated) {
    if (options.max_iterations && done_here >= *options.max_iterations) break;
    exp.run_iteration(state);
    ++done_here;
    const bool complete = state.iteration >= config.iterations || state.terminated;
    save_checkpoint(dir, config, state, options.keep_snapshots, complete);
  }
  const bool complete = state.iteration >= config.iterations || state.terminated;
  if (complete) save_checkpoint(dir, config, state, options.keep_snapshots, true);
  emit_report(state, exp.labels(), dir);
  return state;
}

}  // namespace mollia
