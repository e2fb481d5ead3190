#include <doctest.h>

#include <sstream>

#include "mollia/report.hpp"
#include "test_util.hpp"

using namespace mollia;

namespace {

const LabelSpace kLabels({"a", "b", "c"});

RunState fake_state(int iterations, double offset) {
  RunState s;
  s.iteration = iterations;
  for (int i = 0; i < iterations; ++i) {
    IterationMetrics m;
    m.iteration = i;
    m.pool_size = 100 + 50 * std::size_t(i);
    m.micro_f1 = 0.5 + 0.01 * i + offset;
    m.batch_annotation_acc = 0.8;
    m.cumulative_annotation_acc = 0.8;
    s.history.push_back(m);
  }
  s.records.push_back({"x1", 0, 1, {2}, 0, 1.0, 0.9, {0.05, 0.9, 0.05}, 1.0, 1});
  s.records.push_back({"x2", 0, 0, {}, 1, 0.5, 0.5, {0.5, 0.3, 0.2}, 0.4, 2});
  return s;
}

std::size_t lines(const std::string& s) { return std::size_t(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_SUITE("report") {
  TEST_CASE("ten iterations give ten curve rows") {
    const auto csv = curve_csv(fake_state(10, 0.0));
    CHECK(csv.rfind("iteration,pool_size,micro_f1,annotation_acc\n", 0) == 0);
    CHECK(lines(csv) == 11);
    CHECK(lines(metrics_jsonl(fake_state(10, 0.0))) == 10);
    std::istringstream in(metrics_jsonl(fake_state(10, 0.0)));
    std::string first;
    std::getline(in, first);
    const auto j = nlohmann::json::parse(first);
    CHECK(j["iteration"] == 0);
    CHECK(j["pool_size"] == 100);
  }

  TEST_CASE("averaging two seeds") {
    const auto csv = average_curves({fake_state(3, 0.0).history, fake_state(3, 0.1).history});
    CHECK(lines(csv) == 4);
    const auto ms = mean_std({0.5, 0.6});
    CHECK(ms.mean == doctest::Approx(0.55));
    CHECK(ms.std == doctest::Approx(0.0707106781).epsilon(1e-8));
    CHECK(mean_std({0.3}).std == 0.0);
  }

  TEST_CASE("ablation table has one row per variant") {
    const auto t = ablation_table(
        {{Ablation::A, {0.9, 0.8}}, {Ablation::B, {0.7}}, {Ablation::C, {0.7}}, {Ablation::D, {0.6}}});
    CHECK(lines(t) == 5);
    CHECK(t.find("D,no,no,1,") != std::string::npos);
    CHECK(t.find("A,yes,yes,2,") != std::string::npos);
  }

  TEST_CASE("audit over gold-carrying records") {
    const auto a = audit(fake_state(1, 0.0), 3);
    CHECK(a.audited == 2);
    CHECK(a.negatives.slots == 6);
    CHECK(a.negatives.true_negatives == 1);
    CHECK(a.detection.flagged == 1);
    CHECK(a.detection.d_anno == 0.5);
  }

  TEST_CASE("equal states give byte-identical artifacts") {
    const auto d1 = testutil::scratch("report-a"), d2 = testutil::scratch("report-b");
    emit_report(fake_state(4, 0.0), kLabels, d1);
    emit_report(fake_state(4, 0.0), kLabels, d2);
    for (auto f : {"metrics.jsonl", "curve.csv", "records.jsonl", "audit.json", "summary.txt"}) {
      CHECK(testutil::slurp(d1 / f) == testutil::slurp(d2 / f));
    }
    CHECK(testutil::kind_of([] { emit_report(RunState{}, kLabels, "/proc/forbidden/out"); }) == ErrorKind::Io);
  }
}
