#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "mollia/query.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace mollia;

namespace {

std::vector<std::string> make_ids(std::size_t n) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("id-" + std::to_string(100 + i));
  return ids;
}

SparseVector point(std::vector<double> x) {
  // Keep zeros explicit-free but distances exact: dense_to_sparse drops only zeros.
  return dense_to_sparse(x);
}

}  // namespace

TEST_SUITE("query") {
  TEST_CASE("random selection") {
    const auto ids = make_ids(10);
    QueryContext ctx{.ids = ids, .batch_size = 3, .seed = 5};
    const auto a = select_random(ctx);
    CHECK(a.size() == 3);
    CHECK(std::set(a.begin(), a.end()).size() == 3);
    CHECK(a == select_random(ctx));
    ctx.batch_size = 10;
    const auto all = select_random(ctx);
    CHECK(std::set(all.begin(), all.end()) == std::set(ids.begin(), ids.end()));
    ctx.batch_size = 0;
    CHECK(select_random(ctx).empty());
    ctx.batch_size = 11;
    CHECK(testutil::kind_of([&] { select_random(ctx); }) == ErrorKind::Validation);
  }

  TEST_CASE("uncertainty examples") {
    const std::vector<std::string> ids = {"a", "b"};
    const std::vector<std::vector<double>> probs = {{0.5, 0.5}, {0.9, 0.1}};
    const QueryContext ctx{.ids = ids, .probs = probs, .batch_size = 1};
    CHECK(uncertainty_score(probs[0], UncertaintyMode::Entropy) == doctest::Approx(0.693147).epsilon(1e-6));
    CHECK(uncertainty_score(probs[1], UncertaintyMode::Entropy) == doctest::Approx(0.325083).epsilon(1e-6));
    CHECK(select_uncertainty(ctx, UncertaintyMode::Entropy) == std::vector<std::string>{"a"});
    CHECK(select_uncertainty(ctx, UncertaintyMode::Margin) == std::vector<std::string>{"a"});
    CHECK(select_uncertainty(ctx, UncertaintyMode::LeastConfidence) == std::vector<std::string>{"a"});
  }

  TEST_CASE("uniform predictions fall back to id order") {
    const std::vector<std::string> ids = {"d", "b", "e", "a", "c"};
    const std::vector<std::vector<double>> probs(5, std::vector<double>(3, 1.0 / 3.0));
    const QueryContext ctx{.ids = ids, .probs = probs, .batch_size = 3};
    for (auto mode : {UncertaintyMode::Entropy, UncertaintyMode::Margin, UncertaintyMode::LeastConfidence}) {
      CHECK(select_uncertainty(ctx, mode) == std::vector<std::string>{"a", "b", "c"});
    }
  }

  TEST_CASE("property: uncertainty ranking survives monotone rescaling") {
    // Entropy of a two-class distribution is monotone in the minority mass,
    // so ranking by entropy equals ranking by least confidence.
    auto r = gen::rng(41);
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t n = gen::between(r, 1, 30);
      const auto ids = make_ids(n);
      std::vector<std::vector<double>> probs;
      for (std::size_t i = 0; i < n; ++i) {
        const double q = uniform01(r);
        probs.push_back({q, 1.0 - q});
      }
      const QueryContext ctx{.ids = ids, .probs = probs, .batch_size = gen::between(r, 0, n)};
      const auto e = select_uncertainty(ctx, UncertaintyMode::Entropy);
      const auto l = select_uncertainty(ctx, UncertaintyMode::LeastConfidence);
      CHECK(std::set(e.begin(), e.end()) == std::set(l.begin(), l.end()));
    }
  }

  TEST_CASE("coreset one-dimensional examples") {
    const std::vector<std::string> ids = {"one", "ten"};
    const std::vector<SparseVector> x = {point({1.0}), point({10.0})};
    const std::vector<SparseVector> labeled = {point({0.0})};
    QueryContext ctx{.ids = ids, .features = x, .labeled_features = labeled, .batch_size = 1};
    CHECK(select_coreset(ctx) == std::vector<std::string>{"ten"});
    ctx.batch_size = 2;
    CHECK(select_coreset(ctx) == std::vector<std::string>{"ten", "one"});
  }

  TEST_CASE("property: coreset equals brute-force greedy, including ties") {
    auto r = gen::rng(42);
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t n = gen::between(r, 1, 40), dim = gen::between(r, 1, 3);
      const bool grid = uniform01(r) < 0.5;  // small integer coordinates force ties
      auto coord = [&] { return grid ? double(uniform_index(r, 3)) : normal01(r); };
      std::vector<std::string> ids;
      std::vector<std::vector<double>> dense;
      std::vector<SparseVector> x;
      for (std::size_t i = 0; i < n; ++i) {
        ids.push_back("p" + std::to_string(uniform_index(r, 1000000)) + "-" + std::to_string(i));
        std::vector<double> d(dim);
        for (auto& v : d) v = coord();
        x.push_back(point(d));
        dense.push_back(std::move(d));
      }
      std::vector<std::vector<double>> lab_dense;
      std::vector<SparseVector> lab;
      const std::size_t m = uniform01(r) < 0.3 ? 0 : gen::between(r, 1, 5);
      for (std::size_t i = 0; i < m; ++i) {
        std::vector<double> d(dim);
        for (auto& v : d) v = coord();
        lab.push_back(point(d));
        lab_dense.push_back(std::move(d));
      }
      const std::size_t B = gen::between(r, 0, n);
      const QueryContext ctx{.ids = ids, .features = x, .labeled_features = lab, .batch_size = B};
      const auto got = select_coreset(ctx);
      REQUIRE(got == oracle::coreset(ids, dense, lab_dense, B));
      CHECK(std::set(got.begin(), got.end()).size() == B);
    }
  }

  TEST_CASE("property: coreset ignores input order") {
    auto r = gen::rng(43);
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t n = gen::between(r, 2, 30);
      const auto ids = make_ids(n);
      std::vector<SparseVector> x;
      for (std::size_t i = 0; i < n; ++i) x.push_back(point({normal01(r), normal01(r)}));
      const std::vector<SparseVector> lab = {point({normal01(r), normal01(r)})};
      const std::size_t B = gen::between(r, 1, n);
      const auto a = select_coreset({.ids = ids, .features = x, .labeled_features = lab, .batch_size = B});
      std::vector<std::size_t> perm(n);
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      shuffle(perm.begin(), perm.end(), r);
      std::vector<std::string> pids;
      std::vector<SparseVector> px;
      for (auto i : perm) {
        pids.push_back(ids[i]);
        px.push_back(x[i]);
      }
      CHECK(a == select_coreset({.ids = pids, .features = px, .labeled_features = lab, .batch_size = B}));
    }
  }

  TEST_CASE("strategy registry") {
    const auto names = strategy_names();
    for (auto n : {"random", "entropy", "margin", "least_confidence", "coreset"}) {
      CHECK(std::find(names.begin(), names.end(), n) != names.end());
    }
    register_strategy("first", [](const QueryContext& c) {
      return std::vector<std::string>(c.ids.begin(), c.ids.begin() + static_cast<std::ptrdiff_t>(c.batch_size));
    });
    const auto ids = make_ids(4);
    CHECK(find_strategy("first")({.ids = ids, .batch_size = 2}) == std::vector<std::string>{"id-100", "id-101"});
    CHECK(testutil::kind_of([] { find_strategy("bemps"); }) == ErrorKind::Config);
  }
}
