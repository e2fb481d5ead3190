#include <doctest.h>

#include <filesystem>

#include "mollia/orchestrator.hpp"
#include "mollia/report.hpp"
#include "mollia/synthetic.hpp"
#include "test_util.hpp"

using namespace mollia;
namespace fs = std::filesystem;

namespace {

// Small enough to run in a few seconds, large enough for a real loop.
RunConfig small_run(const std::string& name, std::size_t pool = 400, int iterations = 3) {
  SyntheticRunOptions o;
  o.pool_size = pool;
  o.validation_size = 100;
  o.test_size = 200;
  o.iterations = iterations;
  o.buckets_log2 = 12;
  o.data_seed = 4;
  o.run_seed = 9;
  auto cfg = write_synthetic_run(testutil::scratch(name + "-data"), o);
  cfg.molam.max_rounds = 2;
  return cfg;
}

std::string metrics_of(const fs::path& dir) { return testutil::slurp(dir / "metrics.jsonl"); }

}  // namespace

TEST_SUITE("orchestrator") {
  TEST_CASE("lambda schedule") {
    CHECK(lambda_at(0, 10, 0.4, 1.0) == 0.4);
    CHECK(lambda_at(9, 10, 0.4, 1.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(lambda_at(3, 10, 0.4, 1.0) == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(lambda_at(0, 1, 0.4, 1.0) == 0.4);
    for (int t = 0; t < 5; ++t) CHECK(lambda_at(t, 5, 0.7, 0.7) == 0.7);
  }

  TEST_CASE("discrepancy against the previous model") {
    // A zero-initialized model predicts class 0 everywhere.
    const auto m = ClassifierModel::initialize(3, 3, ClassifierConfig{.init_scale = 0.0}, 1);
    const auto x = dense_to_sparse({1.0, 0.0, 1.0});
    CHECK(compute_discrepancy(m, x, 0) == 0);
    CHECK(compute_discrepancy(m, x, 2) == 1);
  }

  TEST_CASE("ablation switches") {
    CHECK(uses_negative_learning(Ablation::A));
    CHECK(uses_discrepancy(Ablation::A));
    CHECK_FALSE(uses_discrepancy(Ablation::B));
    CHECK_FALSE(uses_negative_learning(Ablation::C));
    CHECK_FALSE(uses_negative_learning(Ablation::D));
    CHECK_FALSE(uses_discrepancy(Ablation::D));
    CHECK(parse_ablation("C") == Ablation::C);
    CHECK(testutil::kind_of([] { parse_ablation("E"); }) == ErrorKind::Config);
  }

  TEST_CASE("a three-iteration run grows the pool by B each time") {
    const auto cfg = small_run("orch-basic");
    const auto dir = testutil::scratch("orch-basic-run");
    const auto s = run(cfg, {.out_dir = dir});
    CHECK(s.iteration == 3);
    CHECK(s.pools.labeled.size() == 200);
    REQUIRE(s.history.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(s.history[i].pool_size == 100 + 50 * i);
      CHECK(s.history[i].lambda == doctest::Approx(0.4 + 0.3 * double(i)));
    }
    CHECK(s.records.size() == 150);
    for (const auto& r : s.records) {
      CHECK((r.d_anno == 0 || r.d_anno == 1));
      CHECK(r.w_d == (r.d_anno ? 0.5 : 1.0));
      CHECK(std::find(r.y_minus.begin(), r.y_minus.end(), r.y_plus) == r.y_minus.end());
    }
    for (auto f : {"metrics.jsonl", "curve.csv", "records.jsonl", "audit.json", "summary.txt", "manifest.json",
                   "config.json", "molam.json"}) {
      CHECK(fs::exists(dir / f));
    }
    CHECK(testutil::kind_of([&] { run(cfg, {.out_dir = dir}); }) == ErrorKind::State);
  }

  TEST_CASE("ablation D trains with unit weights and no negatives") {
    const auto cfg = small_run("orch-d", 400, 2);
    const auto s = run(cfg, {.out_dir = testutil::scratch("orch-d-run"), .ablation = Ablation::D});
    for (const auto& h : s.history) {
      CHECK(h.lambda == 0.0);
      CHECK(h.mean_w_d == 1.0);
    }
    for (const auto& r : s.records) CHECK(r.w_d == 1.0);
  }

  TEST_CASE("repeat runs and resumed runs are identical") {
    const auto cfg = small_run("orch-det");
    const auto a = testutil::scratch("orch-det-a"), b = testutil::scratch("orch-det-b"),
               c = testutil::scratch("orch-det-c");
    run(cfg, {.out_dir = a});
    run(cfg, {.out_dir = b});
    CHECK(metrics_of(a) == metrics_of(b));
    for (int i = 0; i < 4; ++i) run(cfg, {.out_dir = c, .resume = true, .max_iterations = 1});
    CHECK(metrics_of(a) == metrics_of(c));
    CHECK(testutil::slurp(a / "records.jsonl") == testutil::slurp(c / "records.jsonl"));
    const auto loaded = load_checkpoint(c);
    CHECK(loaded.iteration == 3);
    CHECK(state_to_json(loaded) == state_to_json(load_checkpoint(a)));
    CHECK(loaded.current == load_checkpoint(a).current);
  }

  TEST_CASE("resuming under a different configuration is refused") {
    auto cfg = small_run("orch-fp", 400, 2);
    const auto dir = testutil::scratch("orch-fp-run");
    run(cfg, {.out_dir = dir, .max_iterations = 1});
    cfg.batch_size = 40;
    CHECK(testutil::kind_of([&] { run(cfg, {.out_dir = dir, .resume = true}); }) == ErrorKind::State);
  }

  TEST_CASE("pool exhaustion ends the run cleanly") {
    auto cfg = small_run("orch-exhaust", 130, 5);
    cfg.molam.pseudo_label = false;
    const auto s = run(cfg, {.out_dir = testutil::scratch("orch-exhaust-run")});
    CHECK(s.terminated);
    CHECK(s.iteration == 1);
    CHECK(s.pools.unlabeled.size() == 30);
    CHECK(s.termination_reason.find("exhausted") != std::string::npos);
  }

  TEST_CASE("state json round trip") {
    RunState s;
    s.iteration = 2;
    s.ablation = Ablation::C;
    s.records.push_back({"x", 1, 2, {0, 3}, 1, 0.5, 0.7, {0.1, 0.2, 0.7}, 0.8, 2});
    IterationMetrics m;
    m.iteration = 1;
    m.micro_f1 = 0.5;
    m.batch_annotation_acc = 0.25;
    s.history.push_back(m);
    const auto back = state_from_json(nlohmann::json::parse(state_to_json(s).dump()));
    CHECK(state_to_json(back) == state_to_json(s));
    CHECK(testutil::kind_of([] { state_from_json({{"format", "nope"}}); }) == ErrorKind::Parse);
  }
}
