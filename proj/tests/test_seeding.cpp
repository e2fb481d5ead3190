#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "mollia/seeding.hpp"
#include "test_util.hpp"

using namespace mollia;

TEST_SUITE("seeding") {
  TEST_CASE("fnv1a matches published vectors") {
    CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a("foobar") == 0x85944171f73967e8ULL);
  }

  TEST_CASE("derived seeds are stable and separate streams") {
    CHECK(derive_seed(7, {"query", "3"}) == derive_seed(7, {"query", "3"}));
    CHECK(derive_seed(7, {"query", "3"}) != derive_seed(7, {"query", "4"}));
    CHECK(derive_seed(7, {"query", "3"}) != derive_seed(8, {"query", "3"}));
    // Part boundaries matter.
    CHECK(derive_seed(7, {"ab", "c"}) != derive_seed(7, {"a", "bc"}));
    std::set<std::uint64_t> seen;
    for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(derive_seed(1, i));
    CHECK(seen.size() == 1000);
  }

  TEST_CASE("uniform draws stay in range and are flat") {
    Rng rng(11);
    std::vector<double> counts(10, 0.0);
    for (int i = 0; i < 50000; ++i) {
      const double u = uniform01(rng);
      REQUIRE(u >= 0.0);
      REQUIRE(u < 1.0);
      counts[static_cast<std::size_t>(u * 10)] += 1;
    }
    CHECK(testutil::chi_square(counts, std::vector<double>(10, 5000.0)) < testutil::chi_square_critical(9));

    std::vector<double> idx(7, 0.0);
    for (int i = 0; i < 70000; ++i) idx[uniform_index(rng, 7)] += 1;
    CHECK(testutil::chi_square(idx, std::vector<double>(7, 10000.0)) < testutil::chi_square_critical(6));
  }

  TEST_CASE("categorical draws follow their weights") {
    Rng rng(3);
    const std::vector<double> w = {0.5, 0.0, 1.5, 2.0};
    std::vector<double> counts(4, 0.0);
    const int n = 40000;
    for (int i = 0; i < n; ++i) counts[categorical_draw(rng, w)] += 1;
    CHECK(counts[1] == 0.0);
    const std::vector<double> expected = {n * 0.125, 0.0, n * 0.375, n * 0.5};
    CHECK(testutil::chi_square(counts, expected) < testutil::chi_square_critical(2));
    CHECK(categorical_draw(rng, std::vector<double>{0.0, 0.0}) == 2);
  }

  TEST_CASE("gamma draws have the right mean and variance") {
    Rng rng(5);
    for (double shape : {0.3, 1.0, 4.0}) {
      const int n = 40000;
      double sum = 0.0, sq = 0.0;
      for (int i = 0; i < n; ++i) {
        const double g = gamma_draw(rng, shape);
        REQUIRE(g >= 0.0);
        sum += g;
        sq += g * g;
      }
      const double mean = sum / n;
      const double var = sq / n - mean * mean;
      // Standard error of the mean is sqrt(shape / n).
      CHECK(std::abs(mean - shape) < 5.0 * std::sqrt(shape / n));
      CHECK(var == doctest::Approx(shape).epsilon(0.08));
    }
  }

  TEST_CASE("shuffle is a permutation and deterministic") {
    std::vector<int> a(50), b(50);
    std::iota(a.begin(), a.end(), 0);
    b = a;
    Rng r1(9), r2(9);
    shuffle(a.begin(), a.end(), r1);
    shuffle(b.begin(), b.end(), r2);
    CHECK(a == b);
    auto sorted = a;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 50; ++i) CHECK(sorted[i] == i);
  }
}
