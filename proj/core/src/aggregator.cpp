#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include "mollia/aggregator.hpp"
#include "mollia/error.hpp"

namespace mollia {

using json = nlohmann::json;

GbdtParams gbdt_profile(std::string_view name) {
  GbdtParams p;
  if (name == "agnews") {
    p.learning_rate = 0.07;
    p.max_depth = 5;
    p.n_estimators = 300;
  } else if (name == "imdb") {
    p.learning_rate = 0.01;
    p.max_depth = 5;
    p.n_estimators = 300;
  } else if (name == "trec") {
    p.learning_rate = 0.05;
    p.max_depth = 6;
    p.n_estimators = 300;
  } else if (name == "pubmed") {
    p.learning_rate = 0.01;
    p.max_depth = 3;
    p.n_estimators = 500;
  } else {
    fail(ErrorKind::Config, "unknown MoLAM profile '" + std::string(name) + "' (agnews, imdb, trec, pubmed)");
  }
  return p;
}

std::vector<double> softmax(std::span<const double> scores) {
  std::vector<double> p(scores.begin(), scores.end());
  if (p.empty()) return p;
  const double top = *std::max_element(p.begin(), p.end());
  double total = 0.0;
  for (auto& v : p) {
    v = std::exp(v - top);
    total += v;
  }
  for (auto& v : p) v /= total;
  return p;
}

double RegressionTree::predict(std::span<const double> x) const {
  int i = 0;
  while (nodes[i].feature >= 0) {
    const auto& n = nodes[i];
    i = x[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right;
  }
  return nodes[i].value;
}

GbdtModel::GbdtModel(std::size_t num_classes, std::size_t num_features, GbdtParams params)
    : num_classes_(num_classes), num_features_(num_features), params_(params) {}

std::vector<double> GbdtModel::predict_margin(std::span<const double> x) const {
  if (x.size() != num_features_) {
    fail(ErrorKind::Shape, "GBDT expects " + std::to_string(num_features_) + " features, got " +
                               std::to_string(x.size()));
  }
  std::vector<double> m(num_classes_, 0.0);
  for (const auto& round : rounds_) {
    for (std::size_t k = 0; k < num_classes_; ++k) m[k] += round[k].predict(x);
  }
  return m;
}

std::vector<double> GbdtModel::predict_proba(std::span<const double> x) const {
  const auto m = predict_margin(x);
  return softmax(m);
}

namespace {

struct BinnedMatrix {
  std::size_t rows = 0;
  std::size_t features = 0;
  std::vector<std::vector<double>> cuts;  // per feature, ascending
  std::vector<std::uint16_t> bins;        // rows x features, row-major

  std::uint16_t at(std::size_t r, std::size_t f) const { return bins[r * features + f]; }
};

std::vector<double> feature_cuts(std::vector<double> values, int max_bin) {
  std::sort(values.begin(), values.end());
  std::vector<double> uniq;
  for (double v : values) {
    if (uniq.empty() || v != uniq.back()) uniq.push_back(v);
  }
  std::vector<double> cuts;
  if (uniq.size() < 2) return cuts;
  const auto mid = [&](std::size_t j) { return uniq[j - 1] + (uniq[j] - uniq[j - 1]) / 2.0; };
  if (uniq.size() <= static_cast<std::size_t>(max_bin)) {
    for (std::size_t j = 1; j < uniq.size(); ++j) cuts.push_back(mid(j));
    return cuts;
  }
  // Quantile cuts over the full (duplicate-carrying) sample.
  for (int i = 1; i < max_bin; ++i) {
    const double v = values[static_cast<std::size_t>(i) * values.size() / static_cast<std::size_t>(max_bin)];
    const auto j = static_cast<std::size_t>(std::lower_bound(uniq.begin(), uniq.end(), v) - uniq.begin());
    if (j == 0) continue;
    const double c = mid(j);
    if (cuts.empty() || c > cuts.back()) cuts.push_back(c);
  }
  return cuts;
}

BinnedMatrix bin_matrix(const Dataset& data, int max_bin) {
  BinnedMatrix b;
  b.rows = data.size();
  b.features = data.num_features();
  b.cuts.resize(b.features);
  std::vector<double> column(b.rows);
  for (std::size_t f = 0; f < b.features; ++f) {
    for (std::size_t r = 0; r < b.rows; ++r) column[r] = data.rows[r][f];
    b.cuts[f] = feature_cuts(column, max_bin);
  }
  b.bins.resize(b.rows * b.features);
  for (std::size_t r = 0; r < b.rows; ++r) {
    for (std::size_t f = 0; f < b.features; ++f) {
      const auto& c = b.cuts[f];
      b.bins[r * b.features + f] =
          static_cast<std::uint16_t>(std::upper_bound(c.begin(), c.end(), data.rows[r][f]) - c.begin());
    }
  }
  return b;
}

struct Split {
  double gain = 0.0;
  int feature = -1;
  std::size_t cut = 0;
};

class TreeBuilder {
 public:
  TreeBuilder(const BinnedMatrix& x, const GbdtParams& p) : x_(x), p_(p) {
    std::size_t max_bins = 1;
    for (const auto& c : x_.cuts) max_bins = std::max(max_bins, c.size() + 1);
    hist_g_.resize(max_bins);
    hist_h_.resize(max_bins);
  }

  RegressionTree build(const std::vector<double>& g, const std::vector<double>& h) {
    RegressionTree tree;
    std::vector<std::uint32_t> all(x_.rows);
    for (std::uint32_t r = 0; r < all.size(); ++r) all[r] = r;
    grow(tree, std::move(all), 0, g, h);
    return tree;
  }

 private:
  double score(double G, double H) const { return G * G / (H + p_.reg_lambda); }

  int grow(RegressionTree& tree, std::vector<std::uint32_t> rows, int depth, const std::vector<double>& g,
           const std::vector<double>& h) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    double G = 0.0;
    double H = 0.0;
    for (auto r : rows) {
      G += g[r];
      H += h[r];
    }
    Split best;
    if (depth < p_.max_depth && rows.size() >= 2) best = find_split(rows, G, H, g, h);
    if (best.feature < 0) {
      tree.nodes[id].value = -G / (H + p_.reg_lambda) * p_.learning_rate;
      return id;
    }
    const auto f = static_cast<std::size_t>(best.feature);
    std::vector<std::uint32_t> left;
    std::vector<std::uint32_t> right;
    for (auto r : rows) (x_.at(r, f) <= best.cut ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    tree.nodes[id].feature = best.feature;
    tree.nodes[id].threshold = x_.cuts[f][best.cut];
    const int l = grow(tree, std::move(left), depth + 1, g, h);
    const int r = grow(tree, std::move(right), depth + 1, g, h);
    tree.nodes[id].left = l;
    tree.nodes[id].right = r;
    return id;
  }

  Split find_split(const std::vector<std::uint32_t>& rows, double G, double H, const std::vector<double>& g,
                   const std::vector<double>& h) {
    Split best;
    best.gain = std::max(p_.min_split_loss, 1e-6);
    const double parent = score(G, H);
    for (std::size_t f = 0; f < x_.features; ++f) {
      const std::size_t nb = x_.cuts[f].size() + 1;
      if (nb < 2) continue;
      std::fill_n(hist_g_.begin(), nb, 0.0);
      std::fill_n(hist_h_.begin(), nb, 0.0);
      for (auto r : rows) {
        const auto b = x_.at(r, f);
        hist_g_[b] += g[r];
        hist_h_[b] += h[r];
      }
      double GL = 0.0;
      double HL = 0.0;
      for (std::size_t s = 0; s + 1 < nb; ++s) {
        GL += hist_g_[s];
        HL += hist_h_[s];
        const double GR = G - GL;
        const double HR = H - HL;
        if (HL < p_.min_child_weight) continue;
        if (HR < p_.min_child_weight) break;
        const double gain = score(GL, HL) + score(GR, HR) - parent;
        if (gain > best.gain) {
          best.gain = gain;
          best.feature = static_cast<int>(f);
          best.cut = s;
        }
      }
    }
    return best;
  }

  const BinnedMatrix& x_;
  const GbdtParams& p_;
  std::vector<double> hist_g_;
  std::vector<double> hist_h_;
};

double mean_log_loss(const std::vector<double>& margins, const std::vector<ClassIndex>& labels, std::size_t K) {
  double loss = 0.0;
  const std::size_t n = labels.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = softmax(std::span<const double>(margins.data() + i * K, K));
    loss -= std::log(std::max(p[labels[i]], 1e-15));
  }
  return n ? loss / static_cast<double>(n) : 0.0;
}

void check_dataset(const Dataset& d, std::string_view what) {
  if (d.size() == 0) fail(ErrorKind::Validation, std::string(what) + " set is empty");
  if (d.labels.size() != d.rows.size()) fail(ErrorKind::Shape, std::string(what) + " rows/labels length mismatch");
  if (d.num_classes < 2) fail(ErrorKind::Validation, std::string(what) + " set needs num_classes >= 2");
  const auto F = d.num_features();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d.rows[i].size() != F) fail(ErrorKind::Shape, std::string(what) + " rows have inconsistent widths");
    if (d.labels[i] >= d.num_classes) fail(ErrorKind::Validation, std::string(what) + " label out of range");
  }
}

void check_training_set(const Dataset& d) {
  check_dataset(d, "training");
  if (std::all_of(d.labels.begin(), d.labels.end(), [&](ClassIndex y) { return y == d.labels.front(); })) {
    fail(ErrorKind::DegenerateModel, "training set contains a single class");
  }
}

}  // namespace

GbdtModel train_gbdt(const Dataset& train, const GbdtParams& params, std::uint64_t /*seed*/,
                     const Dataset* validation) {
  check_training_set(train);
  if (params.n_estimators < 1 || params.max_depth < 0 || !(params.learning_rate > 0.0) || params.max_bin < 2 ||
      params.max_bin > 65535) {
    fail(ErrorKind::Config, "invalid GBDT hyperparameters");
  }
  const std::size_t K = train.num_classes;
  const std::size_t n = train.size();
  const std::size_t F = train.num_features();
  const bool use_validation = validation && validation->size() > 0 && params.early_stopping_rounds > 0;
  if (use_validation) {
    check_dataset(*validation, "validation");
    if (validation->num_features() != F) fail(ErrorKind::Shape, "validation feature width differs from training");
  }

  GbdtModel model(K, F, params);
  const auto binned = bin_matrix(train, params.max_bin);
  TreeBuilder builder(binned, params);

  std::vector<double> margins(n * K, 0.0);
  std::vector<double> val_margins(use_validation ? validation->size() * K : 0, 0.0);
  std::vector<std::vector<double>> grad(K, std::vector<double>(n));
  std::vector<std::vector<double>> hess(K, std::vector<double>(n));

  double best_val = std::numeric_limits<double>::infinity();
  std::size_t best_rounds = 0;

  for (int round = 0; round < params.n_estimators; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto p = softmax(std::span<const double>(margins.data() + i * K, K));
      for (std::size_t k = 0; k < K; ++k) {
        grad[k][i] = p[k] - (train.labels[i] == k ? 1.0 : 0.0);
        hess[k][i] = std::max(2.0 * p[k] * (1.0 - p[k]), 1e-16);
      }
    }
    std::vector<RegressionTree> trees;
    trees.reserve(K);
    for (std::size_t k = 0; k < K; ++k) trees.push_back(builder.build(grad[k], hess[k]));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < K; ++k) margins[i * K + k] += trees[k].predict(train.rows[i]);
    }
    model.rounds_.push_back(std::move(trees));
    model.training_loss_.push_back(mean_log_loss(margins, train.labels, K));

    if (use_validation) {
      for (std::size_t i = 0; i < validation->size(); ++i) {
        for (std::size_t k = 0; k < K; ++k) {
          val_margins[i * K + k] += model.rounds_.back()[k].predict(validation->rows[i]);
        }
      }
      const double v = mean_log_loss(val_margins, validation->labels, K);
      if (v < best_val) {
        best_val = v;
        best_rounds = model.rounds_.size();
      } else if (model.rounds_.size() - best_rounds >= static_cast<std::size_t>(params.early_stopping_rounds)) {
        break;
      }
    }
  }
  if (use_validation) {
    model.rounds_.resize(best_rounds);
    model.training_loss_.resize(best_rounds);
  }
  return model;
}

json GbdtModel::to_json() const {
  json rounds = json::array();
  for (const auto& round : rounds_) {
    json trees = json::array();
    for (const auto& tree : round) {
      json nodes = json::array();
      for (const auto& n : tree.nodes) {
        if (n.feature < 0) {
          nodes.push_back({n.value});
        } else {
          nodes.push_back({n.feature, n.threshold, n.left, n.right});
        }
      }
      trees.push_back(std::move(nodes));
    }
    rounds.push_back(std::move(trees));
  }
  return {
      {"backend", "gbdt"},
      {"num_classes", num_classes_},
      {"num_features", num_features_},
      {"params",
       {{"learning_rate", params_.learning_rate},
        {"max_depth", params_.max_depth},
        {"n_estimators", params_.n_estimators},
        {"reg_lambda", params_.reg_lambda},
        {"min_child_weight", params_.min_child_weight},
        {"min_split_loss", params_.min_split_loss},
        {"max_bin", params_.max_bin},
        {"early_stopping_rounds", params_.early_stopping_rounds}}},
      {"training_loss", training_loss_},
      {"rounds", std::move(rounds)},
  };
}

GbdtModel GbdtModel::from_json(const json& j) {
  GbdtParams p;
  const auto& jp = j.at("params");
  p.learning_rate = jp.at("learning_rate");
  p.max_depth = jp.at("max_depth");
  p.n_estimators = jp.at("n_estimators");
  p.reg_lambda = jp.at("reg_lambda");
  p.min_child_weight = jp.at("min_child_weight");
  p.min_split_loss = jp.at("min_split_loss");
  p.max_bin = jp.at("max_bin");
  p.early_stopping_rounds = jp.at("early_stopping_rounds");
  GbdtModel m(j.at("num_classes").get<std::size_t>(), j.at("num_features").get<std::size_t>(), p);
  m.training_loss_ = j.at("training_loss").get<std::vector<double>>();
  for (const auto& round : j.at("rounds")) {
    std::vector<RegressionTree> trees;
    for (const auto& tree : round) {
      RegressionTree t;
      for (const auto& n : tree) {
        TreeNode node;
        if (n.size() == 1) {
          node.value = n[0];
        } else {
          node.feature = n[0];
          node.threshold = n[1];
          node.left = n[2];
          node.right = n[3];
        }
        t.nodes.push_back(node);
      }
      trees.push_back(std::move(t));
    }
    if (trees.size() != m.num_classes_) fail(ErrorKind::Parse, "GBDT snapshot round has wrong tree count");
    m.rounds_.push_back(std::move(trees));
  }
  return m;
}

// ---- softmax regression ----

SoftmaxRegression::SoftmaxRegression(std::size_t num_classes, std::size_t num_features)
    : num_classes_(num_classes), num_features_(num_features), weights_(num_classes * (num_features + 1), 0.0) {}

std::vector<double> SoftmaxRegression::predict_proba(std::span<const double> x) const {
  if (x.size() != num_features_) fail(ErrorKind::Shape, "logistic aggregator feature width mismatch");
  std::vector<double> s(num_classes_);
  const std::size_t stride = num_features_ + 1;
  for (std::size_t k = 0; k < num_classes_; ++k) {
    const double* w = weights_.data() + k * stride;
    double acc = w[num_features_];
    for (std::size_t f = 0; f < num_features_; ++f) acc += w[f] * x[f];
    s[k] = acc;
  }
  return softmax(s);
}

SoftmaxRegression train_softmax_regression(const Dataset& train, const LogisticParams& params) {
  check_training_set(train);
  const std::size_t K = train.num_classes;
  const std::size_t F = train.num_features();
  const std::size_t stride = F + 1;
  SoftmaxRegression model(K, F);
  std::vector<double> grad(model.weights_.size());
  const double inv_n = 1.0 / static_cast<double>(train.size());
  for (int it = 0; it < params.iterations; ++it) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t i = 0; i < train.size(); ++i) {
      const auto p = model.predict_proba(train.rows[i]);
      for (std::size_t k = 0; k < K; ++k) {
        const double d = (p[k] - (train.labels[i] == k ? 1.0 : 0.0)) * inv_n;
        double* g = grad.data() + k * stride;
        for (std::size_t f = 0; f < F; ++f) g[f] += d * train.rows[i][f];
        g[F] += d;
      }
    }
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t f = 0; f < F; ++f) grad[k * stride + f] += params.l2 * model.weights_[k * stride + f];
    }
    for (std::size_t w = 0; w < grad.size(); ++w) model.weights_[w] -= params.learning_rate * grad[w];
  }
  return model;
}

json SoftmaxRegression::to_json() const {
  return {{"backend", "logistic"}, {"num_classes", num_classes_}, {"num_features", num_features_}, {"weights", weights_}};
}

SoftmaxRegression SoftmaxRegression::from_json(const json& j) {
  SoftmaxRegression m(j.at("num_classes").get<std::size_t>(), j.at("num_features").get<std::size_t>());
  m.weights_ = j.at("weights").get<std::vector<double>>();
  if (m.weights_.size() != m.num_classes_ * (m.num_features_ + 1)) {
    fail(ErrorKind::Parse, "logistic snapshot has wrong weight count");
  }
  return m;
}

// ---- dispatch ----

AggregatorBackend parse_aggregator_backend(std::string_view name) {
  if (name == "gbdt") return AggregatorBackend::Gbdt;
  if (name == "logistic") return AggregatorBackend::Logistic;
  fail(ErrorKind::Config, "unknown aggregator backend '" + std::string(name) + "' (gbdt, logistic)");
}

std::string_view to_string(AggregatorBackend backend) {
  return backend == AggregatorBackend::Gbdt ? "gbdt" : "logistic";
}

std::unique_ptr<Aggregator> train_aggregator(const AggregatorConfig& config, const Dataset& train,
                                             const Dataset* validation, std::uint64_t seed) {
  if (config.backend == AggregatorBackend::Gbdt) {
    return std::make_unique<GbdtModel>(train_gbdt(train, config.gbdt, seed, validation));
  }
  return std::make_unique<SoftmaxRegression>(train_softmax_regression(train, config.logistic));
}

std::unique_ptr<Aggregator> aggregator_from_json(const json& j) {
  const auto backend = parse_aggregator_backend(j.at("backend").get<std::string>());
  if (backend == AggregatorBackend::Gbdt) return std::make_unique<GbdtModel>(GbdtModel::from_json(j));
  return std::make_unique<SoftmaxRegression>(SoftmaxRegression::from_json(j));
}

}  // namespace mollia
