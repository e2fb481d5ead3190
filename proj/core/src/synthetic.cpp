#include "mollia/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <numeric>
#include <set>

#include "mollia/error.hpp"
#include "mollia/seeding.hpp"

namespace mollia {

namespace {

constexpr std::array<const char*, 8> kTopicNames = {"world",  "sports", "business", "science",
                                                    "health", "arts",   "travel",   "food"};

constexpr std::array<const char*, 24> kSyllables = {"ka", "lo", "mi", "ne", "ru", "sa", "ti", "vo",
                                                    "be", "da", "fu", "go", "hi", "ja", "ke", "lu",
                                                    "ma", "no", "pi", "qua", "re", "so", "tu", "ze"};

std::vector<std::string> make_words(std::size_t count, std::set<std::string>& used, Rng& rng) {
  std::vector<std::string> words;
  while (words.size() < count) {
    const auto syllables = 2 + uniform_index(rng, 3);
    std::string w;
    for (std::uint64_t s = 0; s < syllables; ++s) w += kSyllables[uniform_index(rng, kSyllables.size())];
    if (used.insert(w).second) words.push_back(std::move(w));
  }
  return words;
}

struct Vocabulary {
  std::vector<std::vector<std::string>> topical;
  std::vector<std::string> shared;
};

Instance make_document(const SyntheticTextConfig& cfg, const Vocabulary& vocab, std::string id, ClassIndex gold,
                       Rng& rng) {
  const std::size_t K = cfg.num_classes;
  const auto length = cfg.min_length + uniform_index(rng, cfg.max_length - cfg.min_length + 1);
  std::string text;
  for (std::uint64_t t = 0; t < length; ++t) {
    const double u = uniform01(rng);
    const std::string* word;
    if (u < cfg.topical_rate) {
      const auto& v = vocab.topical[gold];
      word = &v[uniform_index(rng, v.size())];
    } else if (u < cfg.topical_rate + cfg.cross_rate) {
      const auto other = (gold + 1 + uniform_index(rng, K - 1)) % K;
      const auto& v = vocab.topical[other];
      word = &v[uniform_index(rng, v.size())];
    } else {
      word = &vocab.shared[uniform_index(rng, vocab.shared.size())];
    }
    if (!text.empty()) text += ' ';
    text += *word;
  }
  text += '.';
  Instance inst;
  inst.id = std::move(id);
  inst.text = std::move(text);
  inst.gold_label = gold;
  return inst;
}

}  // namespace

SyntheticBenchmark make_text_benchmark(const SyntheticTextConfig& cfg, std::size_t pool_size,
                                       std::size_t validation_size, std::size_t test_size, std::uint64_t seed) {
  const std::size_t K = cfg.num_classes;
  if (K < 2) fail(ErrorKind::Config, "synthetic benchmark needs at least 2 classes");
  if (cfg.min_length == 0 || cfg.max_length < cfg.min_length) fail(ErrorKind::Config, "bad document length range");
  if (cfg.words_per_class == 0 || cfg.shared_words == 0) fail(ErrorKind::Config, "vocabularies must be non-empty");
  if (cfg.topical_rate < 0.0 || cfg.cross_rate < 0.0 || cfg.topical_rate + cfg.cross_rate > 1.0) {
    fail(ErrorKind::Config, "topical_rate + cross_rate must lie in [0, 1]");
  }
  if (cfg.decoy_rate < 0.0 || cfg.decoy_rate > 1.0) fail(ErrorKind::Config, "decoy_rate must lie in [0, 1]");

  std::vector<std::string> names;
  for (std::size_t k = 0; k < K; ++k) {
    names.push_back(k < kTopicNames.size() ? kTopicNames[k] : "class_" + std::to_string(k));
  }

  Rng vocab_rng(derive_seed(seed, {"synthetic", "vocabulary"}));
  std::set<std::string> used;
  Vocabulary vocab;
  for (std::size_t k = 0; k < K; ++k) vocab.topical.push_back(make_words(cfg.words_per_class, used, vocab_rng));
  vocab.shared = make_words(cfg.shared_words, used, vocab_rng);

  auto build = [&](std::string_view split, std::size_t n, bool decoys) {
    Rng rng(derive_seed(seed, {"synthetic", split}));
    std::vector<Instance> docs;
    docs.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      // Zero-padded ids keep lexicographic order equal to generation order.
      char id[32];
      std::snprintf(id, sizeof id, "%.*s-%06zu", static_cast<int>(split.size()), split.data(), i);
      const auto gold = static_cast<ClassIndex>(uniform_index(rng, K));
      auto doc = make_document(cfg, vocab, id, gold, rng);
      if (decoys && uniform01(rng) < cfg.decoy_rate) doc.decoy_label = (gold + 1 + uniform_index(rng, K - 1)) % K;
      docs.push_back(std::move(doc));
    }
    return Corpus(std::move(docs), K);
  };

  SyntheticBenchmark b;
  b.labels = LabelSpace(names);
  b.pool = build("pool", pool_size, true);
  b.validation = build("val", validation_size, false);
  b.test = build("test", test_size, false);
  return b;
}

std::vector<AnnotatorSpec> make_annotator_panel(const PanelConfig& cfg, std::size_t K, std::uint64_t seed) {
  if (K < 2) fail(ErrorKind::Config, "annotator panel needs at least 2 classes");
  if (cfg.experts_per_annotator > K) fail(ErrorKind::Config, "more expert classes than classes");
  // Expert classes are dealt round-robin over a shuffled class order, so every
  // class has an expert whenever annotators * experts_per_annotator >= K.
  std::vector<ClassIndex> order(K);
  std::iota(order.begin(), order.end(), ClassIndex{0});
  Rng order_rng(derive_seed(seed, {"panel", "experts"}));
  shuffle(order.begin(), order.end(), order_rng);

  std::vector<AnnotatorSpec> panel;
  for (std::size_t a = 0; a < cfg.accuracies.size(); ++a) {
    Rng rng(derive_seed(seed, {"panel", std::to_string(a)}));
    std::set<ClassIndex> experts;
    for (std::size_t j = 0; j < cfg.experts_per_annotator; ++j) experts.insert(order[(a * cfg.experts_per_annotator + j) % K]);
    const auto bias = static_cast<ClassIndex>(uniform_index(rng, K));

    // Diagonal on the non-expert classes so that the mean diagonal hits the target.
    const std::size_t weak = K - experts.size();
    double low = cfg.expert_accuracy;
    if (weak > 0) {
      low = (static_cast<double>(K) * cfg.accuracies[a] - static_cast<double>(experts.size()) * cfg.expert_accuracy) /
            static_cast<double>(weak);
    }
    if (!(low > 0.0 && low <= 1.0) || cfg.expert_accuracy > 1.0) {
      fail(ErrorKind::Config, "annotator accuracy " + std::to_string(cfg.accuracies[a]) +
                                  " is unreachable with the chosen expert accuracy");
    }

    SimulatedAnnotator sim;
    sim.confusion.assign(K, std::vector<double>(K, 0.0));
    for (ClassIndex g = 0; g < K; ++g) {
      const double acc = experts.count(g) ? cfg.expert_accuracy : low;
      auto& row = sim.confusion[g];
      const double err = 1.0 - acc;
      const ClassIndex b = bias != g ? bias : (bias + 1) % K;
      if (K == 2) {
        row[b] = err;
      } else {
        for (ClassIndex k = 0; k < K; ++k)
          if (k != g) row[k] = err * (1.0 - cfg.bias_share) / static_cast<double>(K - 2);
        row[b] = err * cfg.bias_share;
      }
      row[g] = acc;
      // Renormalize away rounding so rows sum to 1 within validation tolerance.
      const double s = std::accumulate(row.begin(), row.end(), 0.0);
      for (auto& v : row) v /= s;
    }
    sim.concentration = cfg.concentration;
    sim.invalid_rate = cfg.invalid_rate;
    sim.decoy_susceptibility = cfg.decoy_susceptibility;

    AnnotatorSpec spec;
    spec.name = "sim-" + std::to_string(a);
    spec.repeats = cfg.repeats;
    spec.backend = std::move(sim);
    spec.validate(K);
    panel.push_back(std::move(spec));
  }
  return panel;
}

CalibratedSample make_calibrated_signals(std::size_t n, std::size_t K, std::size_t num_annotators,
                                         std::size_t repeats, double concentration, std::uint64_t seed) {
  if (K < 2 || num_annotators == 0 || repeats == 0 || !(concentration > 0.0)) {
    fail(ErrorKind::Config, "calibrated world needs K >= 2, annotators, repeats and positive concentration");
  }
  Rng rng(derive_seed(seed, {"calibrated"}));
  CalibratedSample out;
  out.gold.reserve(n);
  out.signals.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> p(K);
    double total = 0.0;
    while (total <= 0.0) {
      total = 0.0;
      for (auto& v : p) total += v = gamma_draw(rng, concentration);
    }
    for (auto& v : p) v /= total;
    out.gold.push_back(categorical_draw(rng, p));
    std::vector<AnnotatorSignal> row;
    for (std::size_t a = 0; a < num_annotators; ++a) {
      AnnotatorSignal s;
      s.z = p;
      for (std::size_t t = 0; t < repeats; ++t) s.decoded.emplace_back(categorical_draw(rng, p));
      s.c = consistency_scores(s.decoded, K);
      row.push_back(std::move(s));
    }
    out.signals.push_back(std::move(row));
  }
  return out;
}

RunConfig write_synthetic_run(const std::filesystem::path& dir, const SyntheticRunOptions& o) {
  std::filesystem::create_directories(dir);
  const auto bench = make_text_benchmark(o.text, o.pool_size, o.validation_size, o.test_size, o.data_seed);
  const auto panel = make_annotator_panel(o.panel, o.text.num_classes, o.data_seed);
  auto write = [&](const char* name, const Corpus& corpus) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot write " + (dir / name).string());
    write_corpus_jsonl(out, corpus, bench.labels);
  };
  write("pool.jsonl", bench.pool);
  write("test.jsonl", bench.test);
  if (o.validation_size > 0) write("validation.jsonl", bench.validation);

  std::ostringstream toml;
  toml << "seed = " << o.run_seed << "\n\n[data]\npool = \"pool.jsonl\"\ntest = \"test.jsonl\"\n";
  if (o.validation_size > 0) toml << "validation = \"validation.jsonl\"\n";
  toml << "labels = [";
  for (std::size_t k = 0; k < bench.labels.size(); ++k) toml << (k ? ", " : "") << '"' << bench.labels.name(k) << '"';
  toml << "]\n\n[featurizer]\nbuckets_log2 = " << o.buckets_log2 << "\n\n[pools]\nn_init = " << o.n_init
       << "\n\n[query]\nstrategy = \"" << o.strategy << "\"\nbatch_size = " << o.batch_size
       << "\niterations = " << o.iterations << "\n\n[annotation]\nmode = \"molam\"\n\n[molam]\nprofile = \"agnews\"\n"
       << "\n[robust]\nalpha = 0.5\nlambda_start = 0.4\nlambda_end = 1.0\n\n[classifier]\narchitecture = \"linear\"\nlearning_rate = " << o.learning_rate
       << "\nbatch_size = " << o.classifier_batch_size << "\n\n"
       << annotators_to_toml(panel);
  {
    std::ofstream out(dir / "config.toml", std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot write " + (dir / "config.toml").string());
    out << toml.str();
  }
  return load_config(dir / "config.toml");
}

}  // namespace mollia
