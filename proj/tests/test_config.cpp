#include <doctest.h>

#include <cstdlib>

#include "mollia/config.hpp"
#include "test_util.hpp"

using namespace mollia;

namespace {

const char* kMinimal = R"(
seed = 3

[data]
pool = "pool.jsonl"
test = "test.jsonl"
labels = ["neg", "pos"]

[query]
strategy = "coreset"
batch_size = 20
iterations = 4

[[annotators]]
name = "a"
confusion = [[0.8, 0.2], [0.3, 0.7]]

[[annotators]]
name = "b"
repeats = 3
confusion = [[0.6, 0.4], [0.1, 0.9]]
)";

std::string with(const std::string& extra) { return std::string(kMinimal) + extra; }

std::string message_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("minimal config picks up defaults") {
    const auto c = parse_config(kMinimal, "/base");
    CHECK(validate(c).empty());
    CHECK(c.seed == 3);
    CHECK(c.data.pool == "/base/pool.jsonl");
    CHECK(c.strategy == "coreset");
    CHECK(c.iterations == 4);
    CHECK(c.annotators.size() == 2);
    CHECK(c.annotators[1].repeats == 3);
    CHECK(c.molam.sigma == 0.9);
    CHECK(c.molam.delta == 0.001);
    CHECK(c.robust.alpha == 0.5);
    CHECK(c.robust.lambda_start == 0.4);
    CHECK(c.robust.lambda_end == 1.0);
    CHECK(c.n_init == 50);
    CHECK(c.classifier.patience == 10);
    CHECK(c.classifier.max_epochs == 40);
  }

  TEST_CASE("sigma outside its range is reported with its bounds") {
    const auto c = parse_config(with("\n[molam]\nsigma = 1.5\n"));
    const auto errors = validate(c);
    REQUIRE(errors.size() == 1);
    CHECK(errors[0].find("σ ∈ (0,1]") != std::string::npos);
    CHECK(testutil::kind_of([&] { require_valid(c); }) == ErrorKind::Config);
  }

  TEST_CASE("every violation is listed") {
    auto c = parse_config(with("\n[robust]\nalpha = 1.0\nlambda_start = 2.0\n[molam]\ndelta = 0\n"));
    c.iterations = 0;
    const auto errors = validate(c);
    CHECK(errors.size() == 4);
    const auto msg = message_of([&] { require_valid(c); });
    CHECK(msg.find("α ∈ (0,1)") != std::string::npos);
    CHECK(msg.find("δ ∈ (0,1)") != std::string::npos);
    CHECK(msg.find("R >= 1") != std::string::npos);
    CHECK(msg.find("λ_start ≤ λ_end") != std::string::npos);
  }

  TEST_CASE("unknown keys and bad types are config errors") {
    CHECK(message_of([] { parse_config(with("\n[pools]\nninit = 3\n")); }).find("pools.ninit") != std::string::npos);
    CHECK(message_of([] { parse_config(with("\nbogus = 1\n")); }).find("bogus") != std::string::npos);
    CHECK(testutil::kind_of([] { parse_config(with("\n[molam]\nsigma = \"high\"\n")); }) == ErrorKind::Config);
    CHECK(testutil::kind_of([] { parse_config("seed = = 3"); }) == ErrorKind::Parse);
    CHECK(testutil::kind_of([] { load_config("/nonexistent/c.toml"); }) == ErrorKind::Io);
  }

  TEST_CASE("single mode must name a configured annotator") {
    auto c = parse_config(with("\n[annotation]\nmode = \"single\"\nsingle_annotator = \"zed\"\n"));
    CHECK(validate(c).size() == 1);
    c.single_annotator = "b";
    CHECK(validate(c).empty());
  }

  TEST_CASE("generated annotator tables parse back") {
    const auto c = parse_config(kMinimal);
    const auto again = parse_config(std::string(R"(
[data]
pool = "p"
test = "t"
labels = ["neg", "pos"]
)") + annotators_to_toml(c.annotators));
    CHECK(to_json(again)["annotators"] == to_json(c)["annotators"]);
  }

  TEST_CASE("remote api keys never reach json") {
    setenv("MOLLIA_TEST_KEY", "sk-secret-123", 1);
    const auto c = parse_config(with(R"(
[[annotators]]
name = "llm"
kind = "remote"
model = "m"
base_url = "http://localhost:1/v1"
api_key_env = "MOLLIA_TEST_KEY"
)"));
    CHECK(std::get<RemoteAnnotator>(c.annotators[2].backend).api_key == "sk-secret-123");
    CHECK(to_json(c).dump().find("sk-secret") == std::string::npos);
  }
}
