#include <doctest.h>

#include <numeric>
#include <sstream>

#include "mollia/classifier.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace mollia;

namespace {

// Class k owns features 2k and 2k+1; a shared noise feature is on everywhere.
struct Split {
  std::vector<RobustExample> train;
  std::vector<SparseVector> val_x;
  std::vector<ClassIndex> val_y;
};

Split separable(std::size_t K, std::size_t n, std::uint64_t seed) {
  auto r = gen::rng(seed);
  Split s;
  for (std::size_t i = 0; i < 2 * n; ++i) {
    const ClassIndex k = i % K;
    std::vector<double> d(2 * K + 1, 0.0);
    d[2 * k + uniform_index(r, 2)] = 1.0;
    d[2 * K] = 0.5 + 0.5 * uniform01(r);
    auto x = dense_to_sparse(d);
    if (i < n) {
      RobustExample e;
      e.features = std::move(x);
      e.target.y_plus = k;
      e.is_gold = true;
      s.train.push_back(std::move(e));
    } else {
      s.val_x.push_back(std::move(x));
      s.val_y.push_back(k);
    }
  }
  return s;
}

}  // namespace

TEST_SUITE("classifier") {
  TEST_CASE("separable two-class data reaches perfect validation F1") {
    const auto s = separable(2, 60, 1);
    for (auto arch : {Architecture::Linear, Architecture::Mlp}) {
      ClassifierConfig cfg;
      cfg.architecture = arch;
      cfg.hidden = 16;
      TrainReport rep;
      const auto m = train_classifier(s.train, 5, 2, cfg, {}, 3, {s.val_x, s.val_y}, &rep);
      CHECK(rep.best_validation_f1 == 1.0);
      CHECK(rep.epochs_run <= 40);
      for (const auto& e : s.train) CHECK(predict(m, std::span(&e.features, 1))[0].label == e.target.y_plus);
    }
  }

  TEST_CASE("patience zero stops at the first non-improving epoch") {
    const auto s = separable(3, 60, 2);
    ClassifierConfig cfg;
    cfg.patience = 0;
    TrainReport rep;
    train_classifier(s.train, 7, 3, cfg, {}, 3, {s.val_x, s.val_y}, &rep);
    REQUIRE(rep.epochs_run >= 1);
    REQUIRE(rep.validation_f1.size() == std::size_t(rep.epochs_run));
    // Every epoch but the last improved on all earlier ones.
    for (int e = 1; e + 1 < rep.epochs_run; ++e) CHECK(rep.validation_f1[e] > rep.validation_f1[e - 1]);
    if (rep.epochs_run < cfg.max_epochs) {
      CHECK(rep.validation_f1.back() <= *std::max_element(rep.validation_f1.begin(), rep.validation_f1.end() - 1));
    }
  }

  TEST_CASE("identical data and seed give identical parameters") {
    const auto s = separable(4, 80, 3);
    ClassifierConfig cfg;
    cfg.architecture = Architecture::Mlp;
    cfg.hidden = 8;
    const auto a = train_classifier(s.train, 9, 4, cfg, {0.5, 0.4}, 11, {s.val_x, s.val_y});
    const auto b = train_classifier(s.train, 9, 4, cfg, {0.5, 0.4}, 11, {s.val_x, s.val_y});
    CHECK(a == b);
    const auto c = train_classifier(s.train, 9, 4, cfg, {0.5, 0.4}, 12, {s.val_x, s.val_y});
    CHECK_FALSE(a == c);
  }

  TEST_CASE("predictions are distributions with low-index ties") {
    const auto zero = ClassifierModel::initialize(4, 2, ClassifierConfig{.init_scale = 0.0}, 1);
    const auto p = predict(zero, std::vector<SparseVector>{dense_to_sparse({1, 0, 0, 1})});
    CHECK(p[0].probs == std::vector<double>{0.5, 0.5});
    CHECK(p[0].label == 0);
    const auto m = ClassifierModel::initialize(6, 5, ClassifierConfig{.init_scale = 3.0}, 2);
    auto r = gen::rng(5);
    for (int i = 0; i < 50; ++i) {
      std::vector<double> d(6);
      for (auto& v : d) v = normal01(r);
      const auto probs = m.predict_proba(dense_to_sparse(d));
      CHECK(std::accumulate(probs.begin(), probs.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-6));
    }
  }

  TEST_CASE("snapshot round trip") {
    for (auto arch : {Architecture::Linear, Architecture::Mlp}) {
      ClassifierConfig cfg;
      cfg.architecture = arch;
      cfg.hidden = 5;
      const auto m = ClassifierModel::initialize(12, 3, cfg, 9);
      std::stringstream buf;
      m.write(buf);
      CHECK(ClassifierModel::read(buf) == m);
    }
    std::stringstream junk("not a model");
    CHECK(testutil::kind_of([&] { ClassifierModel::read(junk); }) == ErrorKind::Parse);
  }

  TEST_CASE("error kinds") {
    auto s = separable(2, 10, 4);
    for (auto& e : s.train) e.target.y_plus = 1;
    CHECK(testutil::kind_of([&] { train_classifier(s.train, 5, 2, {}, {}, 1); }) == ErrorKind::DegenerateModel);
    CHECK(testutil::kind_of([&] { train_classifier({}, 5, 2, {}, {}, 1); }) == ErrorKind::Validation);
    CHECK(testutil::kind_of([] { parse_architecture("transformer"); }) == ErrorKind::Config);
    const auto m = ClassifierModel::initialize(3, 2, {}, 1);
    CHECK(testutil::kind_of([&] { m.logits(dense_to_sparse({0, 0, 0, 1})); }) == ErrorKind::Shape);
  }
}
