#include "mollia/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "mollia/error.hpp"
#include "mollia/query.hpp"

namespace mollia {

AnnotationMode parse_annotation_mode(std::string_view name) {
  if (name == "molam") return AnnotationMode::Molam;
  if (name == "vote") return AnnotationMode::Vote;
  if (name == "logits") return AnnotationMode::Logits;
  if (name == "single") return AnnotationMode::Single;
  fail(ErrorKind::Config, "unknown annotation mode '" + std::string(name) + "' (molam, vote, logits, single)");
}

std::string_view to_string(AnnotationMode mode) {
  switch (mode) {
    case AnnotationMode::Molam: return "molam";
    case AnnotationMode::Vote: return "vote";
    case AnnotationMode::Logits: return "logits";
    case AnnotationMode::Single: return "single";
  }
  return "molam";
}

AggregatorConfig RunConfig::aggregator_config() const {
  AggregatorConfig cfg;
  cfg.backend = molam.backend;
  cfg.gbdt = gbdt_profile(molam.profile);
  if (molam.early_stopping_rounds) cfg.gbdt.early_stopping_rounds = *molam.early_stopping_rounds;
  return cfg;
}

namespace {

// Reads typed values out of one TOML table, recording type errors and
// unknown keys instead of stopping at the first one.
class Section {
 public:
  Section(const toml::table* table, std::string path, std::vector<std::string>& errors)
      : table_(table), path_(std::move(path)), errors_(errors) {}

  bool present() const { return table_ != nullptr; }

  template <typename T>
  void get(std::string_view key, T& out) {
    seen_.insert(std::string(key));
    if (!table_) return;
    const toml::node* node = table_->get(key);
    if (!node) return;
    if constexpr (std::is_same_v<T, bool>) {
      if (auto v = node->value_exact<bool>()) {
        out = *v;
        return;
      }
      type_error(key, "a boolean");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (auto v = node->value_exact<std::string>()) {
        out = *v;
        return;
      }
      type_error(key, "a string");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (auto v = node->value<double>()) {
        out = *v;
        return;
      }
      type_error(key, "a number");
    } else if constexpr (std::is_unsigned_v<T>) {
      if (auto v = node->value_exact<std::int64_t>()) {
        if (*v < 0) {
          errors_.push_back(where(key) + " must be non-negative");
          return;
        }
        out = static_cast<T>(*v);
        return;
      }
      type_error(key, "an integer");
    } else {
      if (auto v = node->value_exact<std::int64_t>()) {
        out = static_cast<T>(*v);
        return;
      }
      type_error(key, "an integer");
    }
  }

  bool has(std::string_view key) const { return table_ && table_->get(key); }

  const toml::node* node(std::string_view key) {
    seen_.insert(std::string(key));
    return table_ ? table_->get(key) : nullptr;
  }

  std::string where(std::string_view key) const { return path_.empty() ? std::string(key) : path_ + "." + std::string(key); }

  void finish() {
    if (!table_) return;
    for (const auto& [k, _] : *table_) {
      if (!seen_.count(std::string(k.str()))) errors_.push_back("unknown key '" + where(k.str()) + "'");
    }
  }

 private:
  void type_error(std::string_view key, const char* expected) { errors_.push_back(where(key) + " must be " + expected); }

  const toml::table* table_;
  std::string path_;
  std::vector<std::string>& errors_;
  std::set<std::string> seen_;
};

template <typename F>
void guarded(std::vector<std::string>& errors, F&& f) {
  try {
    f();
  } catch (const Error& e) {
    errors.push_back(e.what());
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  std::filesystem::path path(p);
  return path.is_relative() && !base.empty() ? base / path : path;
}

AnnotatorSpec parse_annotator(const toml::table& t, std::size_t index, std::vector<std::string>& errors) {
  Section s(&t, "annotators[" + std::to_string(index) + "]", errors);
  AnnotatorSpec spec;
  std::string kind = "simulated";
  s.get("name", spec.name);
  s.get("kind", kind);
  s.get("repeats", spec.repeats);
  if (kind == "simulated") {
    SimulatedAnnotator sim;
    s.get("concentration", sim.concentration);
    s.get("invalid_rate", sim.invalid_rate);
    s.get("decoy_susceptibility", sim.decoy_susceptibility);
    if (const auto* node = s.node("confusion")) {
      const auto* rows = node->as_array();
      bool ok = rows != nullptr;
      if (ok) {
        for (const auto& r : *rows) {
          const auto* row = r.as_array();
          if (!row) {
            ok = false;
            break;
          }
          std::vector<double> values;
          for (const auto& v : *row) {
            auto d = v.value<double>();
            if (!d) {
              ok = false;
              break;
            }
            values.push_back(*d);
          }
          sim.confusion.push_back(std::move(values));
        }
      }
      if (!ok) errors.push_back(s.where("confusion") + " must be an array of numeric arrays");
    } else {
      errors.push_back(s.where("confusion") + " is required for simulated annotators");
    }
    spec.backend = std::move(sim);
  } else if (kind == "remote") {
    RemoteAnnotator remote;
    std::string api_key_env = "OPENAI_API_KEY";
    std::int64_t timeout_ms = remote.timeout.count();
    std::int64_t backoff_ms = remote.backoff.count();
    s.get("model", remote.model);
    s.get("base_url", remote.base_url);
    s.get("api_key_env", api_key_env);
    s.get("timeout_ms", timeout_ms);
    s.get("retries", remote.retries);
    s.get("backoff_ms", backoff_ms);
    s.get("temperature", remote.temperature);
    s.get("top_logprobs", remote.top_logprobs);
    s.get("max_tokens", remote.max_tokens);
    remote.timeout = std::chrono::milliseconds(timeout_ms);
    remote.backoff = std::chrono::milliseconds(backoff_ms);
    if (const char* key = std::getenv(api_key_env.c_str())) remote.api_key = key;
    spec.backend = std::move(remote);
  } else {
    errors.push_back(s.where("kind") + " must be 'simulated' or 'remote', got '" + kind + "'");
  }
  s.finish();
  return spec;
}

}  // namespace

RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    throw ParseError(e.source().begin.line, std::string(e.description()));
  }

  std::vector<std::string> errors;
  RunConfig cfg;
  Section top(&root, "", errors);
  std::int64_t seed = 0;
  top.get("seed", seed);
  cfg.seed = static_cast<std::uint64_t>(seed);

  auto table = [&](std::string_view key) -> const toml::table* {
    const auto* n = top.node(key);
    if (!n) return nullptr;
    if (!n->is_table()) {
      errors.push_back("'" + std::string(key) + "' must be a table");
      return nullptr;
    }
    return n->as_table();
  };

  {
    Section s(table("data"), "data", errors);
    std::string pool, test, validation, format;
    s.get("pool", pool);
    s.get("test", test);
    s.get("validation", validation);
    s.get("format", format);
    cfg.data.pool = resolve(base_dir, pool);
    cfg.data.test = resolve(base_dir, test);
    cfg.data.validation = resolve(base_dir, validation);
    if (!format.empty()) guarded(errors, [&] { cfg.data.format = parse_corpus_format(format); });
    if (const auto* n = s.node("labels")) {
      const auto* arr = n->as_array();
      if (!arr) {
        errors.push_back("data.labels must be an array of strings");
      } else {
        for (const auto& v : *arr) {
          if (auto str = v.value_exact<std::string>()) {
            cfg.data.labels.push_back(*str);
          } else {
            errors.push_back("data.labels must be an array of strings");
            break;
          }
        }
      }
    }
    s.finish();
  }
  {
    Section s(table("featurizer"), "featurizer", errors);
    std::string norm = "l2";
    s.get("ngram_min", cfg.featurizer.ngram_min);
    s.get("ngram_max", cfg.featurizer.ngram_max);
    s.get("buckets_log2", cfg.featurizer.buckets_log2);
    s.get("normalization", norm);
    if (norm == "l2") {
      cfg.featurizer.normalization = Normalization::L2;
    } else if (norm == "none") {
      cfg.featurizer.normalization = Normalization::None;
    } else {
      errors.push_back("featurizer.normalization must be 'l2' or 'none'");
    }
    s.finish();
  }
  {
    Section s(table("pools"), "pools", errors);
    s.get("n_init", cfg.n_init);
    s.get("stratified", cfg.stratified);
    s.finish();
  }
  {
    Section s(table("query"), "query", errors);
    s.get("strategy", cfg.strategy);
    s.get("batch_size", cfg.batch_size);
    s.get("iterations", cfg.iterations);
    s.finish();
  }
  {
    Section s(table("annotation"), "annotation", errors);
    std::string mode = "molam";
    s.get("mode", mode);
    s.get("single_annotator", cfg.single_annotator);
    s.get("max_in_flight", cfg.max_in_flight);
    guarded(errors, [&] { cfg.mode = parse_annotation_mode(mode); });
    s.finish();
  }
  if (const auto* n = top.node("annotators")) {
    const auto* arr = n->as_array();
    if (!arr) {
      errors.push_back("'annotators' must be an array of tables ([[annotators]])");
    } else {
      for (std::size_t i = 0; i < arr->size(); ++i) {
        const auto* t = (*arr)[i].as_table();
        if (!t) {
          errors.push_back("annotators[" + std::to_string(i) + "] must be a table");
          continue;
        }
        cfg.annotators.push_back(parse_annotator(*t, i, errors));
      }
    }
  }
  {
    Section s(table("molam"), "molam", errors);
    std::string backend = "gbdt";
    s.get("profile", cfg.molam.profile);
    s.get("backend", backend);
    s.get("sigma", cfg.molam.sigma);
    s.get("delta", cfg.molam.delta);
    s.get("pseudo_label", cfg.molam.pseudo_label);
    s.get("max_rounds", cfg.molam.max_rounds);
    s.get("pseudo_label_sample", cfg.molam.pseudo_label_sample);
    if (s.has("early_stopping_rounds")) {
      int r = 0;
      s.get("early_stopping_rounds", r);
      cfg.molam.early_stopping_rounds = r;
    } else {
      s.node("early_stopping_rounds");
    }
    guarded(errors, [&] { cfg.molam.backend = parse_aggregator_backend(backend); });
    s.finish();
  }
  {
    Section s(table("robust"), "robust", errors);
    s.get("alpha", cfg.robust.alpha);
    s.get("lambda_start", cfg.robust.lambda_start);
    s.get("lambda_end", cfg.robust.lambda_end);
    s.finish();
  }
  {
    Section s(table("classifier"), "classifier", errors);
    std::string arch = "linear";
    s.get("architecture", arch);
    s.get("hidden", cfg.classifier.hidden);
    s.get("learning_rate", cfg.classifier.learning_rate);
    s.get("batch_size", cfg.classifier.batch_size);
    s.get("max_epochs", cfg.classifier.max_epochs);
    s.get("patience", cfg.classifier.patience);
    s.get("init_scale", cfg.classifier.init_scale);
    guarded(errors, [&] { cfg.classifier.architecture = parse_architecture(arch); });
    s.finish();
  }
  top.finish();

  if (!errors.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& e : errors) msg += "\n  - " + e;
    fail(ErrorKind::Config, msg);
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.parent_path());
}

std::vector<std::string> validate(const RunConfig& c) {
  std::vector<std::string> errors;
  auto check = [&](bool ok, std::string msg) {
    if (!ok) errors.push_back(std::move(msg));
  };
  auto num = [](double v) {
    std::ostringstream os;
    os << v;
    return os.str();
  };

  check(!c.data.pool.empty(), "data.pool is required");
  check(!c.data.test.empty(), "data.test is required");
  if (c.data.labels.size() < 2) {
    errors.push_back("data.labels must list at least 2 classes");
  } else {
    guarded(errors, [&] { LabelSpace check_labels(c.data.labels); });
  }
  check(c.featurizer.ngram_min >= 1 && c.featurizer.ngram_max >= c.featurizer.ngram_min,
        "featurizer n-gram range must satisfy 1 <= ngram_min <= ngram_max");
  check(c.featurizer.buckets_log2 >= 1 && c.featurizer.buckets_log2 <= 30, "featurizer.buckets_log2 must be in [1, 30]");
  check(c.n_init >= 1, "pools.n_init must be >= 1");
  check(c.batch_size >= 1, "query.batch_size B must be >= 1");
  check(c.iterations >= 1, "query.iterations R = " + std::to_string(c.iterations) + " violates R >= 1");
  guarded(errors, [&] { find_strategy(c.strategy); });

  check(!c.annotators.empty(), "at least one [[annotators]] entry is required");
  std::set<std::string> names;
  for (const auto& a : c.annotators) {
    if (!a.name.empty() && !names.insert(a.name).second) errors.push_back("duplicate annotator name '" + a.name + "'");
    if (c.data.labels.size() >= 2) guarded(errors, [&] { a.validate(c.data.labels.size()); });
  }
  if (c.mode == AnnotationMode::Single) {
    check(names.count(c.single_annotator) > 0,
          "annotation.single_annotator must name a configured annotator (got '" + c.single_annotator + "')");
  }
  check(c.max_in_flight >= 1, "annotation.max_in_flight must be >= 1");

  check(c.molam.sigma > 0.0 && c.molam.sigma <= 1.0, "molam.sigma = " + num(c.molam.sigma) + " violates σ ∈ (0,1]");
  check(c.molam.delta > 0.0 && c.molam.delta < 1.0, "molam.delta = " + num(c.molam.delta) + " violates δ ∈ (0,1)");
  check(c.molam.max_rounds >= 0, "molam.max_rounds must be >= 0");
  guarded(errors, [&] { gbdt_profile(c.molam.profile); });
  if (c.molam.early_stopping_rounds) check(*c.molam.early_stopping_rounds >= 0, "molam.early_stopping_rounds must be >= 0");

  check(c.robust.alpha > 0.0 && c.robust.alpha < 1.0, "robust.alpha = " + num(c.robust.alpha) + " violates α ∈ (0,1)");
  check(c.robust.lambda_start >= 0.0, "robust.lambda_start must be >= 0");
  check(c.robust.lambda_start <= c.robust.lambda_end, "robust.lambda_start = " + num(c.robust.lambda_start) +
                                                          " exceeds lambda_end = " + num(c.robust.lambda_end) +
                                                          " (λ_start ≤ λ_end required)");

  check(c.classifier.learning_rate > 0.0, "classifier.learning_rate must be > 0");
  check(c.classifier.batch_size >= 1, "classifier.batch_size must be >= 1");
  check(c.classifier.max_epochs >= 1, "classifier.max_epochs must be >= 1");
  check(c.classifier.patience >= 0, "classifier.patience must be >= 0");
  check(c.classifier.init_scale >= 0.0, "classifier.init_scale must be >= 0");
  if (c.classifier.architecture == Architecture::Mlp) check(c.classifier.hidden >= 1, "classifier.hidden must be >= 1");
  return errors;
}

void require_valid(const RunConfig& config) {
  const auto errors = validate(config);
  if (errors.empty()) return;
  std::string msg = "invalid configuration (" + std::to_string(errors.size()) + " problem" +
                    (errors.size() == 1 ? "" : "s") + "):";
  for (const auto& e : errors) msg += "\n  - " + e;
  fail(ErrorKind::Config, msg);
}

nlohmann::json to_json(const RunConfig& c) {
  using nlohmann::json;
  json annotators = json::array();
  for (const auto& a : c.annotators) {
    json j{{"name", a.name}, {"repeats", a.repeats}};
    if (const auto* sim = std::get_if<SimulatedAnnotator>(&a.backend)) {
      j["kind"] = "simulated";
      j["confusion"] = sim->confusion;
      j["concentration"] = sim->concentration;
      j["invalid_rate"] = sim->invalid_rate;
      j["decoy_susceptibility"] = sim->decoy_susceptibility;
    } else {
      const auto& r = std::get<RemoteAnnotator>(a.backend);
      j["kind"] = "remote";
      j["model"] = r.model;
      j["base_url"] = r.base_url;
      j["timeout_ms"] = r.timeout.count();
      j["retries"] = r.retries;
      j["backoff_ms"] = r.backoff.count();
      j["temperature"] = r.temperature;
      j["top_logprobs"] = r.top_logprobs;
      j["max_tokens"] = r.max_tokens;
    }
    annotators.push_back(std::move(j));
  }
  json data{{"pool", c.data.pool.generic_string()},
            {"test", c.data.test.generic_string()},
            {"validation", c.data.validation.generic_string()},
            {"labels", c.data.labels}};
  if (c.data.format) data["format"] = *c.data.format == CorpusFormat::Csv ? "csv" : "jsonl";
  json molam{{"profile", c.molam.profile},
             {"backend", to_string(c.molam.backend)},
             {"sigma", c.molam.sigma},
             {"delta", c.molam.delta},
             {"pseudo_label", c.molam.pseudo_label},
             {"max_rounds", c.molam.max_rounds},
             {"pseudo_label_sample", c.molam.pseudo_label_sample}};
  if (c.molam.early_stopping_rounds) molam["early_stopping_rounds"] = *c.molam.early_stopping_rounds;
  return json{
      {"seed", c.seed},
      {"data", std::move(data)},
      {"featurizer",
       {{"ngram_min", c.featurizer.ngram_min},
        {"ngram_max", c.featurizer.ngram_max},
        {"buckets_log2", c.featurizer.buckets_log2},
        {"normalization", c.featurizer.normalization == Normalization::L2 ? "l2" : "none"}}},
      {"pools", {{"n_init", c.n_init}, {"stratified", c.stratified}}},
      {"query", {{"strategy", c.strategy}, {"batch_size", c.batch_size}, {"iterations", c.iterations}}},
      {"annotation",
       {{"mode", to_string(c.mode)}, {"single_annotator", c.single_annotator}, {"max_in_flight", c.max_in_flight}}},
      {"annotators", std::move(annotators)},
      {"molam", std::move(molam)},
      {"robust",
       {{"alpha", c.robust.alpha}, {"lambda_start", c.robust.lambda_start}, {"lambda_end", c.robust.lambda_end}}},
      {"classifier",
       {{"architecture", to_string(c.classifier.architecture)},
        {"hidden", c.classifier.hidden},
        {"learning_rate", c.classifier.learning_rate},
        {"batch_size", c.classifier.batch_size},
        {"max_epochs", c.classifier.max_epochs},
        {"patience", c.classifier.patience},
        {"init_scale", c.classifier.init_scale}}},
  };
}

namespace {

// Shortest text that parses back to the same double.
std::string shortest(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

}  // namespace

std::string annotators_to_toml(const std::vector<AnnotatorSpec>& annotators) {
  std::ostringstream os;
  for (const auto& a : annotators) {
    os << "[[annotators]]\nname = \"" << a.name << "\"\nrepeats = " << a.repeats << "\n";
    if (const auto* sim = std::get_if<SimulatedAnnotator>(&a.backend)) {
      os << "kind = \"simulated\"\nconcentration = " << shortest(sim->concentration)
         << "\ninvalid_rate = " << shortest(sim->invalid_rate)
         << "\ndecoy_susceptibility = " << shortest(sim->decoy_susceptibility) << "\nconfusion = [\n";
      for (const auto& row : sim->confusion) {
        os << "  [";
        for (std::size_t k = 0; k < row.size(); ++k) os << (k ? ", " : "") << shortest(row[k]);
        os << "],\n";
      }
      os << "]\n\n";
    } else {
      const auto& r = std::get<RemoteAnnotator>(a.backend);
      os << "kind = \"remote\"\nmodel = \"" << r.model << "\"\nbase_url = \"" << r.base_url
         << "\"\ntemperature = " << shortest(r.temperature) << "\n\n";
    }
  }
  return os.str();
}

}  // namespace mollia
