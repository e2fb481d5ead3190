#include <doctest.h>

#include <cmath>

#include "mollia/classifier.hpp"
#include "mollia/robust_loss.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace mollia;

namespace {

const std::vector<double> kP = {0.1, 0.7, 0.05, 0.15};

std::vector<long double> widen(const std::vector<double>& p) { return {p.begin(), p.end()}; }

std::vector<double> softmax_d(const std::vector<double>& z) {
  const auto p = oracle::softmax(widen(z));
  return {p.begin(), p.end()};
}

RobustTarget random_target(Rng& r, std::size_t K) {
  RobustTarget t;
  t.y_plus = uniform_index(r, K);
  for (std::size_t k = 0; k < K; ++k) {
    if (k != t.y_plus && uniform01(r) < 0.4) t.y_minus.push_back(k);
  }
  t.w_d = uniform01(r) < 0.5 ? 1.0 : 0.5;
  return t;
}

}  // namespace

TEST_SUITE("robust_loss") {
  TEST_CASE("negative loss examples") {
    CHECK(negative_loss(kP, std::vector<ClassIndex>{0, 2}) == doctest::Approx(0.15665).epsilon(1e-4));
    CHECK(negative_loss(kP, std::vector<ClassIndex>{}) == 0.0);
    CHECK(negative_loss(std::vector<double>{0.0, 1.0, 0.0}, std::vector<ClassIndex>{0, 2}) == 0.0);
    // Clamping keeps a certain negative finite.
    CHECK(std::isfinite(negative_loss(std::vector<double>{1.0, 0.0}, std::vector<ClassIndex>{0})));
  }

  TEST_CASE("discrepancy weight") {
    CHECK(discrepancy_weight(false, 0.5) == 1.0);
    CHECK(discrepancy_weight(true, 0.5) == 0.5);
    CHECK(discrepancy_weight(true, 0.25) == 0.25);
    for (double a : {0.1, 0.5, 0.9}) {
      CHECK(discrepancy_weight(false, a) == oracle::discrepancy_weight(0, a));
      CHECK(discrepancy_weight(true, a) == oracle::discrepancy_weight(1, a));
    }
  }

  TEST_CASE("total loss examples") {
    const RobustTarget t{1, {0, 2}, 0.5};
    CHECK(total_loss(t, kP, {0.5, 0.4}) == doctest::Approx(0.24100).epsilon(1e-4));
    CHECK(total_loss(RobustTarget{2, {}, 1.0}, std::vector<double>{0, 0, 1, 0}, {}) == 0.0);
    CHECK(total_loss(RobustTarget{1, {0, 2}, 1.0}, kP, {0.5, 0.0}) == cross_entropy(kP, 1));
  }

  TEST_CASE("losses match the long double oracle") {
    auto r = gen::rng(31);
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t K = gen::between(r, 2, 8);
      const auto p = gen::simplex(r, K, true);
      const auto t = random_target(r, K);
      const double lambda = 2.0 * uniform01(r);
      CHECK(std::abs(negative_loss(p, t.y_minus) - double(oracle::negative_loss(widen(p), t.y_minus))) <= 1e-10);
      CHECK(std::abs(total_loss(t, p, {0.5, lambda}) - double(oracle::total_loss(t, widen(p), lambda))) <= 1e-10);
    }
  }

  TEST_CASE("analytic gradient matches central differences") {
    auto r = gen::rng(32);
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t K = gen::between(r, 2, 8);
      std::vector<double> z(K);
      for (auto& v : z) v = 2.0 * normal01(r);
      const auto t = random_target(r, K);
      const double lambda = 2.0 * uniform01(r);
      const auto g = total_loss_gradient(t, z, {0.5, lambda});
      const auto fd = oracle::fd_gradient(t, z, lambda);
      for (std::size_t k = 0; k < K; ++k) {
        const double scale = std::max(1e-8, std::max(std::abs(g[k]), std::abs(fd[k])));
        CHECK(std::abs(g[k] - fd[k]) / scale <= 1e-5);
      }
    }
  }

  TEST_CASE("property: enlarging the negative set never lowers the loss") {
    auto r = gen::rng(33);
    for (int trial = 0; trial < 300; ++trial) {
      const std::size_t K = gen::between(r, 2, 8);
      const auto p = gen::simplex(r, K);
      std::vector<ClassIndex> small, large;
      for (std::size_t k = 0; k < K; ++k) {
        const double u = uniform01(r);
        if (u < 0.3) small.push_back(k);
        if (u < 0.7) large.push_back(k);
      }
      CHECK(negative_loss(p, large) >= negative_loss(p, small));
    }
  }

  TEST_CASE("property: discrepant loss is exactly alpha CE plus lambda NL") {
    auto r = gen::rng(34);
    for (int trial = 0; trial < 300; ++trial) {
      const std::size_t K = gen::between(r, 2, 8);
      const auto p = gen::simplex(r, K);
      auto t = random_target(r, K);
      const double alpha = 0.05 + 0.9 * uniform01(r), lambda = uniform01(r);
      t.w_d = discrepancy_weight(true, alpha);
      CHECK(total_loss(t, p, {alpha, lambda}) == alpha * cross_entropy(p, t.y_plus) + lambda * negative_loss(p, t.y_minus));
    }
  }

  TEST_CASE("property: with lambda = 0 the one-hot at y_plus minimizes the loss") {
    auto r = gen::rng(35);
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t K = gen::between(r, 2, 6);
      const auto t = random_target(r, K);
      std::vector<double> onehot(K, 0.0);
      onehot[t.y_plus] = 1.0;
      CHECK(total_loss(t, onehot, {0.5, 0.0}) <= total_loss(t, gen::simplex(r, K), {0.5, 0.0}));
    }
  }

  TEST_CASE("training with negative labels removes mass from them") {
    // Noisy 3-class data where class 2 is always a negative label.
    auto r = gen::rng(36);
    std::vector<RobustExample> ex;
    for (int i = 0; i < 120; ++i) {
      RobustExample e;
      const std::uint32_t f = static_cast<std::uint32_t>(uniform_index(r, 6));
      e.features = dense_to_sparse([&] {
        std::vector<double> d(8, 0.0);
        d[f] = 1.0;
        d[6 + i % 2] = 0.5;
        return d;
      }());
      e.target.y_plus = uniform01(r) < 0.7 ? (f % 2) : 2;
      if (e.target.y_plus != 2) e.target.y_minus = {2};
      ex.push_back(e);
    }
    ClassifierConfig cfg;
    cfg.max_epochs = 20;
    cfg.patience = 100;
    const auto with_nl = train_classifier(ex, 8, 3, cfg, {1.0, 1.0}, 5);
    const auto control = train_classifier(ex, 8, 3, cfg, {1.0, 0.0}, 5);
    double mass_nl = 0.0, mass_ctrl = 0.0;
    for (const auto& e : ex) {
      mass_nl += with_nl.predict_proba(e.features)[2];
      mass_ctrl += control.predict_proba(e.features)[2];
    }
    CHECK(mass_nl < mass_ctrl);
  }

  TEST_CASE("gradient of plain cross-entropy is p - onehot") {
    const std::vector<double> z = {0.3, -1.0, 2.0};
    const auto p = softmax_d(z);
    const auto g = total_loss_gradient(RobustTarget{2, {}, 1.0}, z, {});
    CHECK(g[0] == doctest::Approx(p[0]));
    CHECK(g[2] == doctest::Approx(p[2] - 1.0));
  }
}
