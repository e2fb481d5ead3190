#include "mollia/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <numeric>
#include <ostream>

#include "mollia/aggregator.hpp"
#include "mollia/error.hpp"
#include "mollia/molam.hpp"
#include "mollia/seeding.hpp"

namespace mollia {

Architecture parse_architecture(std::string_view name) {
  if (name == "linear") return Architecture::Linear;
  if (name == "mlp") return Architecture::Mlp;
  fail(ErrorKind::Config, "unknown classifier architecture '" + std::string(name) + "' (linear, mlp)");
}

std::string_view to_string(Architecture arch) { return arch == Architecture::Linear ? "linear" : "mlp"; }

ClassifierModel ClassifierModel::initialize(std::size_t input_dim, std::size_t num_classes,
                                            const ClassifierConfig& config, std::uint64_t seed) {
  if (num_classes < 2) fail(ErrorKind::Config, "classifier needs at least 2 classes");
  if (input_dim == 0) fail(ErrorKind::Config, "classifier input dimension must be positive");
  ClassifierModel m;
  m.architecture_ = config.architecture;
  m.input_dim_ = input_dim;
  m.num_classes_ = num_classes;
  Rng rng(derive_seed(seed, {"classifier-init"}));
  if (config.architecture == Architecture::Linear) {
    m.w1_.resize(input_dim * num_classes);
    for (auto& w : m.w1_) w = config.init_scale * normal01(rng);
    m.b1_.assign(num_classes, 0.0);
    return m;
  }
  if (config.hidden == 0) fail(ErrorKind::Config, "MLP hidden width must be positive");
  m.hidden_ = config.hidden;
  // Inputs are unit-norm, so unit-variance first-layer weights give O(1) pre-activations.
  m.w1_.resize(input_dim * m.hidden_);
  for (auto& w : m.w1_) w = normal01(rng);
  m.b1_.assign(m.hidden_, 0.0);
  const double scale2 = std::sqrt(2.0 / static_cast<double>(m.hidden_));
  m.w2_.resize(m.hidden_ * num_classes);
  for (auto& w : m.w2_) w = scale2 * normal01(rng);
  m.b2_.assign(num_classes, 0.0);
  return m;
}

std::vector<double> ClassifierModel::hidden_pre(const SparseVector& x) const {
  std::vector<double> a(b1_);
  const std::size_t width = b1_.size();
  for (std::size_t n = 0; n < x.nnz(); ++n) {
    if (x.index[n] >= input_dim_) fail(ErrorKind::Shape, "feature index exceeds classifier input dimension");
    const double v = x.value[n];
    const double* row = w1_.data() + static_cast<std::size_t>(x.index[n]) * width;
    for (std::size_t k = 0; k < width; ++k) a[k] += v * row[k];
  }
  return a;
}

std::vector<double> ClassifierModel::logits(const SparseVector& x) const {
  auto a = hidden_pre(x);
  if (architecture_ == Architecture::Linear) return a;
  std::vector<double> s(b2_);
  for (std::size_t h = 0; h < hidden_; ++h) {
    const double act = a[h] > 0.0 ? a[h] : 0.0;
    if (act == 0.0) continue;
    const double* row = w2_.data() + h * num_classes_;
    for (std::size_t k = 0; k < num_classes_; ++k) s[k] += act * row[k];
  }
  return s;
}

std::vector<double> ClassifierModel::predict_proba(const SparseVector& x) const {
  const auto s = logits(x);
  return softmax(s);
}

namespace {

constexpr char kMagic[8] = {'M', 'L', 'C', 'L', 'F', 'R', '0', '1'};

void put_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }

std::uint64_t get_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) fail(ErrorKind::Parse, "truncated classifier snapshot");
  return v;
}

void put_vec(std::ostream& out, const std::vector<double>& v) {
  put_u64(out, v.size());
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> get_vec(std::istream& in) {
  const auto n = get_u64(in);
  if (n > (std::uint64_t{1} << 34)) fail(ErrorKind::Parse, "implausible array length in classifier snapshot");
  std::vector<double> v(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) fail(ErrorKind::Parse, "truncated classifier snapshot");
  return v;
}

}  // namespace

// Snapshot layout: magic, architecture, input_dim, K, hidden, then w1, b1, w2, b2
// as length-prefixed little-endian float64 arrays.
void ClassifierModel::write(std::ostream& out) const {
  out.write(kMagic, sizeof kMagic);
  put_u64(out, architecture_ == Architecture::Linear ? 0 : 1);
  put_u64(out, input_dim_);
  put_u64(out, num_classes_);
  put_u64(out, hidden_);
  put_vec(out, w1_);
  put_vec(out, b1_);
  put_vec(out, w2_);
  put_vec(out, b2_);
  if (!out) fail(ErrorKind::Io, "failed writing classifier snapshot");
}

ClassifierModel ClassifierModel::read(std::istream& in) {
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) fail(ErrorKind::Parse, "not a classifier snapshot");
  ClassifierModel m;
  m.architecture_ = get_u64(in) == 0 ? Architecture::Linear : Architecture::Mlp;
  m.input_dim_ = get_u64(in);
  m.num_classes_ = get_u64(in);
  m.hidden_ = get_u64(in);
  m.w1_ = get_vec(in);
  m.b1_ = get_vec(in);
  m.w2_ = get_vec(in);
  m.b2_ = get_vec(in);
  const std::size_t width = m.architecture_ == Architecture::Linear ? m.num_classes_ : m.hidden_;
  if (m.w1_.size() != m.input_dim_ * width || m.b1_.size() != width ||
      (m.architecture_ == Architecture::Mlp && (m.w2_.size() != m.hidden_ * m.num_classes_ ||
                                                 m.b2_.size() != m.num_classes_))) {
    fail(ErrorKind::Parse, "classifier snapshot has inconsistent shapes");
  }
  return m;
}

class ClassifierTrainer {
 public:
  ClassifierTrainer(ClassifierModel& model, const LossParams& loss) : m_(model), loss_(loss) {
    if (m_.architecture_ == Architecture::Mlp) {
      gw2_.assign(m_.w2_.size(), 0.0);
      gb2_.assign(m_.b2_.size(), 0.0);
    }
    gb1_.assign(m_.b1_.size(), 0.0);
  }

  // One mini-batch step; returns the summed loss over the batch before the update.
  double step(std::span<const RobustExample> examples, std::span<const std::size_t> batch, double lr) {
    double loss_sum = 0.0;
    std::fill(gb1_.begin(), gb1_.end(), 0.0);
    std::fill(gw2_.begin(), gw2_.end(), 0.0);
    std::fill(gb2_.begin(), gb2_.end(), 0.0);
    first_layer_.clear();
    const std::size_t K = m_.num_classes_;

    for (auto idx : batch) {
      const auto& ex = examples[idx];
      const auto a = m_.hidden_pre(ex.features);
      if (m_.architecture_ == Architecture::Linear) {
        const auto p = softmax(a);
        loss_sum += total_loss(ex.target, p, loss_);
        auto g = total_loss_gradient(ex.target, a, loss_);
        for (std::size_t k = 0; k < K; ++k) gb1_[k] += g[k];
        first_layer_.emplace_back(idx, std::move(g));
        continue;
      }
      const std::size_t H = m_.hidden_;
      std::vector<double> act(H);
      for (std::size_t h = 0; h < H; ++h) act[h] = a[h] > 0.0 ? a[h] : 0.0;
      std::vector<double> s(m_.b2_);
      for (std::size_t h = 0; h < H; ++h) {
        if (act[h] == 0.0) continue;
        for (std::size_t k = 0; k < K; ++k) s[k] += act[h] * m_.w2_[h * K + k];
      }
      const auto p = softmax(s);
      loss_sum += total_loss(ex.target, p, loss_);
      const auto g = total_loss_gradient(ex.target, s, loss_);
      std::vector<double> da(H, 0.0);
      for (std::size_t h = 0; h < H; ++h) {
        double dh = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
          gw2_[h * K + k] += act[h] * g[k];
          dh += m_.w2_[h * K + k] * g[k];
        }
        da[h] = a[h] > 0.0 ? dh : 0.0;
        gb1_[h] += da[h];
      }
      for (std::size_t k = 0; k < K; ++k) gb2_[k] += g[k];
      first_layer_.emplace_back(idx, std::move(da));
    }

    const double scale = lr / static_cast<double>(batch.size());
    const std::size_t width = m_.b1_.size();
    for (const auto& [idx, d] : first_layer_) {
      const auto& x = examples[idx].features;
      for (std::size_t n = 0; n < x.nnz(); ++n) {
        double* row = m_.w1_.data() + static_cast<std::size_t>(x.index[n]) * width;
        const double v = scale * x.value[n];
        for (std::size_t k = 0; k < width; ++k) row[k] -= v * d[k];
      }
    }
    for (std::size_t k = 0; k < width; ++k) m_.b1_[k] -= scale * gb1_[k];
    for (std::size_t i = 0; i < gw2_.size(); ++i) m_.w2_[i] -= scale * gw2_[i];
    for (std::size_t k = 0; k < gb2_.size(); ++k) m_.b2_[k] -= scale * gb2_[k];
    return loss_sum;
  }

 private:
  ClassifierModel& m_;
  const LossParams& loss_;
  std::vector<double> gb1_;
  std::vector<double> gw2_;
  std::vector<double> gb2_;
  std::vector<std::pair<std::size_t, std::vector<double>>> first_layer_;
};

namespace {

double accuracy(const ClassifierModel& model, std::span<const SparseVector> xs, std::span<const ClassIndex> ys) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) hits += argmax(model.logits(xs[i])) == ys[i];
  return xs.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(xs.size());
}

}  // namespace

ClassifierModel train_classifier(std::span<const RobustExample> examples, std::size_t input_dim,
                                 std::size_t num_classes, const ClassifierConfig& config, const LossParams& loss,
                                 std::uint64_t seed, ValidationSet validation, TrainReport* report) {
  if (examples.empty()) fail(ErrorKind::Validation, "classifier training set is empty");
  for (const auto& ex : examples) {
    if (ex.target.y_plus >= num_classes) fail(ErrorKind::Validation, "training label out of range");
  }
  const auto first = examples.front().target.y_plus;
  if (std::all_of(examples.begin(), examples.end(), [&](const RobustExample& e) { return e.target.y_plus == first; })) {
    fail(ErrorKind::DegenerateModel, "classifier training set contains a single class");
  }
  if (config.batch_size == 0) fail(ErrorKind::Config, "batch size must be positive");
  if (validation.features.size() != validation.labels.size()) fail(ErrorKind::Shape, "validation length mismatch");

  std::vector<SparseVector> fallback_x;
  std::vector<ClassIndex> fallback_y;
  if (validation.features.empty()) {
    for (const auto& ex : examples) {
      fallback_x.push_back(ex.features);
      fallback_y.push_back(ex.target.y_plus);
    }
    validation = {fallback_x, fallback_y};
  }

  ClassifierModel model = ClassifierModel::initialize(input_dim, num_classes, config, seed);
  ClassifierModel best = model;
  TrainReport local;
  TrainReport& rep = report ? *report : local;
  rep = TrainReport{};
  rep.best_validation_f1 = -1.0;

  ClassifierTrainer trainer(model, loss);
  std::vector<std::size_t> order(examples.size());
  int since_best = 0;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed, {"epoch", std::to_string(epoch)}));
    shuffle(order.begin(), order.end(), rng);
    // Near-equal batch sizes: a tiny trailing batch would take a full-size step
    // on two or three examples right before validation.
    const std::size_t batches = (order.size() + config.batch_size - 1) / config.batch_size;
    double loss_sum = 0.0;
    for (std::size_t b = 0, start = 0; b < batches; ++b) {
      const std::size_t len = order.size() / batches + (b < order.size() % batches ? 1 : 0);
      loss_sum += trainer.step(examples, std::span<const std::size_t>(order.data() + start, len), config.learning_rate);
      start += len;
    }
    rep.epochs_run = epoch;
    rep.training_loss.push_back(loss_sum / static_cast<double>(examples.size()));
    const double f1 = accuracy(model, validation.features, validation.labels);
    rep.validation_f1.push_back(f1);
    if (f1 > rep.best_validation_f1) {
      rep.best_validation_f1 = f1;
      rep.best_epoch = epoch;
      best = model;
      since_best = 0;
    } else {
      ++since_best;
      if (since_best >= config.patience) break;
    }
  }
  if (rep.best_epoch == 0) rep.best_validation_f1 = 0.0;
  return rep.best_epoch == 0 ? model : best;
}

std::vector<Prediction> predict(const ClassifierModel& model, std::span<const SparseVector> inputs) {
  std::vector<Prediction> out;
  out.reserve(inputs.size());
  for (const auto& x : inputs) {
    Prediction p;
    p.probs = model.predict_proba(x);
    p.label = argmax(p.probs);
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace mollia
