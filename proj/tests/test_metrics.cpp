#include <doctest.h>

#include <numeric>

#include "mollia/metrics.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace mollia;

namespace {

DetectionRecord rec(int d, bool correct, std::vector<double> probs = {0.5, 0.5}, double c = 0.5) {
  return {d, correct, std::move(probs), c};
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("micro F1 examples") {
    CHECK(micro_f1(std::vector<ClassIndex>{0, 1, 2, 2}, std::vector<ClassIndex>{0, 1, 2, 1}) == 0.75);
    CHECK(micro_f1(std::vector<ClassIndex>{3, 3}, std::vector<ClassIndex>{3, 3}) == 1.0);
    CHECK(micro_f1(std::vector<ClassIndex>{0, 1}, std::vector<ClassIndex>{1, 0}) == 0.0);
    CHECK(testutil::kind_of([] { micro_f1({}, {}); }) == ErrorKind::Validation);
    CHECK(testutil::kind_of([] { micro_f1(std::vector<ClassIndex>{1}, std::vector<ClassIndex>{1, 2}); }) == ErrorKind::Shape);
  }

  TEST_CASE("property: micro F1 equals the confusion-matrix oracle") {
    auto r = gen::rng(51);
    for (int trial = 0; trial < 300; ++trial) {
      const std::size_t n = gen::between(r, 1, 60), K = gen::between(r, 2, 7);
      std::vector<ClassIndex> pred(n), gold(n);
      for (std::size_t i = 0; i < n; ++i) {
        gold[i] = uniform_index(r, K);
        pred[i] = uniform01(r) < 0.6 ? gold[i] : uniform_index(r, K);
      }
      CHECK(micro_f1(pred, gold) == doctest::Approx(oracle::accuracy(pred, gold)).epsilon(1e-12));
    }
  }

  TEST_CASE("negative label audit example") {
    const std::vector<std::vector<ClassIndex>> y_minus = {{0, 3}, {2}};
    const auto a = negative_label_audit(y_minus, std::vector<ClassIndex>{1, 2}, 4);
    CHECK(a.slots == 8);
    CHECK(a.true_negative_rate == 0.25);
    CHECK(a.false_negative_rate == 0.125);
    const std::vector<std::vector<ClassIndex>> none(3);
    const auto z = negative_label_audit(none, std::vector<ClassIndex>{0, 1, 2}, 3);
    CHECK(z.true_negative_rate == 0.0);
    CHECK(z.false_negative_rate == 0.0);
  }

  TEST_CASE("property: audit ignores instance order") {
    auto r = gen::rng(52);
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t n = gen::between(r, 1, 30), K = gen::between(r, 2, 6);
      std::vector<std::vector<ClassIndex>> ym(n);
      std::vector<ClassIndex> gold(n);
      for (std::size_t i = 0; i < n; ++i) {
        gold[i] = uniform_index(r, K);
        for (std::size_t k = 0; k < K; ++k)
          if (uniform01(r) < 0.3) ym[i].push_back(k);
      }
      std::vector<std::size_t> perm(n);
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      shuffle(perm.begin(), perm.end(), r);
      std::vector<std::vector<ClassIndex>> pym;
      std::vector<ClassIndex> pgold;
      for (auto i : perm) {
        pym.push_back(ym[i]);
        pgold.push_back(gold[i]);
      }
      const auto a = negative_label_audit(ym, gold, K), b = negative_label_audit(pym, pgold, K);
      CHECK(a.true_negative_rate == b.true_negative_rate);
      CHECK(a.false_negative_rate == b.false_negative_rate);
    }
  }

  TEST_CASE("detection extremes") {
    const std::vector all_ok = {rec(0, true), rec(0, true), rec(0, true)};
    CHECK(discrepancy_detection(all_ok).d_anno == 1.0);
    const std::vector all_flagged = {rec(1, true), rec(1, false)};
    const auto r = discrepancy_detection(all_flagged);
    CHECK(r.d_anno == 0.0);
    CHECK(r.entropy == 0.0);
    CHECK(r.flagged == 2);
  }

  TEST_CASE("baselines flag the same number, most uncertain first, ties to the earlier record") {
    // d_anno flags one record; entropy flags the flattest distribution.
    const std::vector records = {
        rec(0, true, {0.9, 0.1}, 0.9),
        rec(1, true, {0.55, 0.45}, 0.6),
        rec(0, false, {0.5, 0.5}, 0.2),
        rec(0, true, {0.5, 0.5}, 0.2),
    };
    const auto r = discrepancy_detection(records);
    CHECK(r.flagged == 1);
    CHECK(r.d_anno == 0.5);       // records 0 and 3 of 4
    // Baselines flag record 2, which ties with record 3 and comes first.
    CHECK(r.entropy == 0.75);
    CHECK(r.margin == 0.75);
    CHECK(r.consistency == 0.75);
    CHECK(accurate_identification_rate(records, {false, false, false, true}) == 0.5);
  }
}
