#include <doctest.h>

#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mollia/corpus.hpp"
#include "mollia/error.hpp"
#include "mollia/seeding.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace mollia;

namespace {

const LabelSpace kAgNews({"World", "Sports", "Business", "Sci/Tech"});

Corpus numbered(std::size_t n, std::size_t K, std::size_t unlabeled_every = 0) {
  std::vector<Instance> v;
  for (std::size_t i = 0; i < n; ++i) {
    Instance inst;
    inst.id = "doc-" + std::to_string(1000 + i);
    inst.text = "text " + std::to_string(i);
    if (unlabeled_every == 0 || i % unlabeled_every != 0) inst.gold_label = i % K;
    v.push_back(std::move(inst));
  }
  return Corpus(std::move(v), K);
}

}  // namespace

TEST_SUITE("corpus") {
  TEST_CASE("label space rejects duplicates and tiny spaces") {
    CHECK(kAgNews.size() == 4);
    CHECK(kAgNews.index_of("Sports") == ClassIndex{1});
    CHECK_FALSE(kAgNews.index_of("sports").has_value());
    CHECK(testutil::kind_of([] { LabelSpace({"a", "a"}); }) == ErrorKind::Validation);
    CHECK(testutil::kind_of([] { LabelSpace({"only"}); }) == ErrorKind::Validation);
  }

  TEST_CASE("jsonl with three valid rows") {
    std::istringstream in(R"({"id": "a", "text": "x", "label": "World"}
{"id": 7, "text": "y"}

{"id": "c", "text": "z", "label": "Sci/Tech"}
)");
    const auto c = read_corpus(in, CorpusFormat::Jsonl, kAgNews);
    REQUIRE(c.size() == 3);
    CHECK(c[0].gold_label == ClassIndex{0});
    CHECK(c[1].id == "7");
    CHECK_FALSE(c[1].gold_label.has_value());
    CHECK(c.at("c").gold_label == ClassIndex{3});
  }

  TEST_CASE("an unknown label is reported with its line and name") {
    std::istringstream in("{\"id\": \"a\", \"text\": \"x\", \"label\": \"World\"}\n"
                          "{\"id\": \"b\", \"text\": \"y\", \"label\": \"Sprots\"}\n");
    try {
      read_corpus(in, CorpusFormat::Jsonl, kAgNews);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
      CHECK(std::string(e.what()).find("Sprots") != std::string::npos);
    }
  }

  TEST_CASE("malformed json and duplicate ids") {
    std::istringstream bad("{\"id\": \"a\", \"text\": \"x\"}\n{not json}\n");
    CHECK_THROWS_AS(read_corpus(bad, CorpusFormat::Jsonl, kAgNews), ParseError);
    std::istringstream dup("{\"id\": \"a\", \"text\": \"x\"}\n{\"id\": \"a\", \"text\": \"y\"}\n");
    CHECK(testutil::kind_of([&] { read_corpus(dup, CorpusFormat::Jsonl, kAgNews); }) == ErrorKind::Validation);
  }

  TEST_CASE("csv with five rows, two without gold labels") {
    std::istringstream in("id,text,label\n"
                          "1,plain,World\n"
                          "2,\"quoted, with comma\",Sports\n"
                          "3,\"multi\nline\",\n"
                          "4,\"say \"\"hi\"\"\",Business\n"
                          "5,last,\n");
    const auto c = read_corpus(in, CorpusFormat::Csv, kAgNews);
    REQUIRE(c.size() == 5);
    CHECK(c[1].text == "quoted, with comma");
    CHECK(c[2].text == "multi\nline");
    CHECK(c[3].text == "say \"hi\"");
    int missing = 0;
    for (const auto& inst : c) missing += !inst.gold_label.has_value();
    CHECK(missing == 2);
  }

  TEST_CASE("csv field count mismatch is a parse error") {
    std::istringstream in("id,text\n1,a,extra\n");
    CHECK_THROWS_AS(read_corpus(in, CorpusFormat::Csv, kAgNews), ParseError);
  }

  TEST_CASE("jsonl round trip") {
    const auto c = numbered(5, 4, 2);
    std::ostringstream out;
    write_corpus_jsonl(out, c, kAgNews);
    std::istringstream in(out.str());
    const auto back = read_corpus(in, CorpusFormat::Jsonl, kAgNews);
    REQUIRE(back.size() == c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
      CHECK(back[i].id == c[i].id);
      CHECK(back[i].text == c[i].text);
      CHECK(back[i].gold_label == c[i].gold_label);
    }
  }

  TEST_CASE("missing file is an io error") {
    CHECK(testutil::kind_of([] { load_corpus("/nonexistent/none.jsonl", CorpusFormat::Jsonl, kAgNews); }) == ErrorKind::Io);
    CHECK(format_from_extension("a/b.csv") == CorpusFormat::Csv);
    CHECK(format_from_extension("a/b.jsonl") == CorpusFormat::Jsonl);
  }

  TEST_CASE("seed_pools sizes and determinism") {
    const auto c = numbered(1000, 4);
    const auto p = seed_pools(c, 50, 7);
    CHECK(p.labeled.size() == 50);
    CHECK(p.unlabeled.size() == 950);
    CHECK(p == seed_pools(c, 50, 7));
    CHECK_FALSE(p == seed_pools(c, 50, 8));
    const auto empty = seed_pools(c, 0, 7);
    CHECK(empty.labeled.empty());
    CHECK(empty.unlabeled.size() == 1000);
    for (const auto& e : p.labeled) {
      CHECK(e.source == LabelSource::Gold);
      CHECK(e.label == *c.at(e.id).gold_label);
      CHECK_FALSE(p.unlabeled.count(e.id));
    }
  }

  TEST_CASE("seed_pools only draws gold-labeled instances") {
    const auto c = numbered(30, 3, 3);  // 10 without labels
    const auto p = seed_pools(c, 20, 1);
    for (const auto& e : p.labeled) CHECK(c.at(e.id).gold_label.has_value());
    CHECK(testutil::kind_of([&] { seed_pools(c, 21, 1); }) == ErrorKind::InsufficientLabels);
  }

  TEST_CASE("stratified seeding balances classes") {
    const auto c = numbered(400, 4);
    const auto p = seed_pools(c, 50, 3, SeedOptions{true});
    std::map<ClassIndex, int> counts;
    for (const auto& e : p.labeled) counts[e.label]++;
    for (const auto& [k, n] : counts) CHECK((n == 12 || n == 13));
  }

  TEST_CASE("property: seeded pools partition the corpus") {
    auto r = gen::rng(17);
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t n = 5 + uniform_index(r, 200);
      const auto c = numbered(n, 2 + uniform_index(r, 4));
      const std::size_t k = uniform_index(r, n + 1);
      const auto p = seed_pools(c, k, r(), SeedOptions{uniform01(r) < 0.5});
      REQUIRE(p.labeled.size() == k);
      REQUIRE(p.total() == n);
      std::set<std::string> all(p.unlabeled);
      for (const auto& e : p.labeled) CHECK(all.insert(e.id).second);
      CHECK(all.size() == n);
    }
  }

  TEST_CASE("transfer moves ids and guards disjointness") {
    const auto c = numbered(200, 4);
    const auto p = seed_pools(c, 50, 7);
    std::vector<LabeledEntry> batch;
    auto it = p.unlabeled.begin();
    for (int i = 0; i < 50; ++i, ++it) batch.push_back({*it, 1, LabelSource::Molam});
    const auto q = transfer(p, batch);
    CHECK(q.labeled.size() == 100);
    CHECK(q.unlabeled.size() == 100);
    CHECK(transfer(p, {}) == p);
    CHECK(testutil::kind_of([&] { transfer(q, {batch.front()}); }) == ErrorKind::State);
    CHECK(testutil::kind_of([&] { transfer(p, {batch[0], batch[0]}); }) == ErrorKind::Validation);
    CHECK(testutil::kind_of([&] { transfer(p, {{*p.unlabeled.begin(), 9, LabelSource::Molam}}, 4); }) == ErrorKind::Validation);
    CHECK(q.is_labeled(batch[3].id));
  }

  TEST_CASE("pools survive json") {
    const auto p = seed_pools(numbered(40, 2), 10, 2);
    nlohmann::json j = p;
    CHECK(j.get<DataPools>() == p);
  }
}
