#include "mollia/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mollia/error.hpp"
#include "mollia/seeding.hpp"

namespace mollia {

using json = nlohmann::json;

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::State: return "state";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::Config: return "config";
    case ErrorKind::Io: return "io";
    case ErrorKind::AnnotatorUnavailable: return "annotator-unavailable";
    case ErrorKind::Protocol: return "protocol";
    case ErrorKind::DegenerateSignal: return "degenerate-signal";
    case ErrorKind::DegenerateModel: return "degenerate-model";
    case ErrorKind::InsufficientLabels: return "insufficient-labels";
  }
  return "unknown";
}

LabelSpace::LabelSpace(std::vector<std::string> labels) : labels_(std::move(labels)) {
  if (labels_.size() < 2) {
    fail(ErrorKind::Validation, "label space needs at least 2 classes, got " + std::to_string(labels_.size()));
  }
  for (std::size_t k = 0; k < labels_.size(); ++k) {
    if (labels_[k].empty()) fail(ErrorKind::Validation, "label " + std::to_string(k) + " is empty");
    if (!index_.emplace(labels_[k], k).second) {
      fail(ErrorKind::Validation, "duplicate label '" + labels_[k] + "'");
    }
  }
}

std::optional<ClassIndex> LabelSpace::index_of(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Corpus::Corpus(std::vector<Instance> instances, std::size_t num_classes)
    : instances_(std::move(instances)), num_classes_(num_classes) {
  by_id_.reserve(instances_.size());
  for (std::size_t i = 0; i < instances_.size(); ++i) {
    const auto& inst = instances_[i];
    if (inst.id.empty()) fail(ErrorKind::Validation, "instance " + std::to_string(i) + " has an empty id");
    if (!by_id_.emplace(inst.id, i).second) fail(ErrorKind::Validation, "duplicate id '" + inst.id + "'");
    if (inst.gold_label && *inst.gold_label >= num_classes_) {
      fail(ErrorKind::Validation, "instance '" + inst.id + "' has out-of-range label");
    }
  }
}

const Instance* Corpus::find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  return it == by_id_.end() ? nullptr : &instances_[it->second];
}

const Instance& Corpus::at(std::string_view id) const {
  const auto* inst = find(id);
  if (!inst) fail(ErrorKind::State, "unknown instance id '" + std::string(id) + "'");
  return *inst;
}

CorpusFormat parse_corpus_format(std::string_view name) {
  if (name == "jsonl") return CorpusFormat::Jsonl;
  if (name == "csv") return CorpusFormat::Csv;
  fail(ErrorKind::Config, "unknown corpus format '" + std::string(name) + "' (expected jsonl or csv)");
}

CorpusFormat format_from_extension(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? CorpusFormat::Csv : CorpusFormat::Jsonl;
}

namespace {

std::optional<ClassIndex> resolve_label(const LabelSpace& labels, const std::string& name, std::size_t line,
                                        std::string_view field) {
  if (name.empty()) return std::nullopt;
  auto k = labels.index_of(name);
  if (!k) throw ParseError(line, "unknown " + std::string(field) + " '" + name + "'");
  return k;
}

std::string id_from_json(const json& v, std::size_t line) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  throw ParseError(line, "field 'id' must be a string or integer");
}

std::vector<Instance> read_jsonl(std::istream& in, const LabelSpace& labels) {
  std::vector<Instance> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(line_no, std::string("malformed JSON: ") + e.what());
    }
    if (!rec.is_object()) throw ParseError(line_no, "record is not a JSON object");
    if (!rec.contains("id")) throw ParseError(line_no, "missing field 'id'");
    if (!rec.contains("text") || !rec["text"].is_string()) throw ParseError(line_no, "missing string field 'text'");
    Instance inst;
    inst.id = id_from_json(rec["id"], line_no);
    inst.text = rec["text"].get<std::string>();
    for (const char* field : {"label", "decoy"}) {
      if (!rec.contains(field) || rec[field].is_null()) continue;
      if (!rec[field].is_string()) throw ParseError(line_no, std::string("field '") + field + "' must be a string");
      auto k = resolve_label(labels, rec[field].get<std::string>(), line_no, field);
      (std::string_view(field) == "label" ? inst.gold_label : inst.decoy_label) = k;
    }
    out.push_back(std::move(inst));
  }
  return out;
}

// RFC 4180 records; quoted fields may contain separators, quotes and newlines.
// Returns false at end of input. `line_no` tracks the physical line of the record start.
bool read_csv_record(std::istream& in, std::vector<std::string>& fields, std::size_t& line_no) {
  fields.clear();
  std::string field;
  bool in_quotes = false;
  bool any = false;
  bool was_quoted = false;
  int c;
  ++line_no;
  const std::size_t start_line = line_no;
  while ((c = in.get()) != EOF) {
    any = true;
    const char ch = static_cast<char>(c);
    if (in_quotes) {
      if (ch == '"') {
        if (in.peek() == '"') {
          field.push_back('"');
          in.get();
        } else {
          in_quotes = false;
        }
      } else {
        if (ch == '\n') ++line_no;
        field.push_back(ch);
      }
      continue;
    }
    if (ch == '"' && field.empty() && !was_quoted) {
      in_quotes = true;
      was_quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
      was_quoted = false;
    } else if (ch == '\n') {
      break;
    } else if (ch != '\r') {
      field.push_back(ch);
    }
  }
  if (in_quotes) throw ParseError(start_line, "unterminated quoted field");
  if (!any) return false;
  fields.push_back(std::move(field));
  return true;
}

std::vector<Instance> read_csv(std::istream& in, const LabelSpace& labels) {
  std::vector<std::string> header;
  std::size_t line_no = 0;
  if (!read_csv_record(in, header, line_no)) return {};
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  if (!col.count("id") || !col.count("text")) throw ParseError(1, "CSV header must contain 'id' and 'text'");
  std::vector<Instance> out;
  std::vector<std::string> fields;
  while (true) {
    const std::size_t record_line = line_no + 1;
    if (!read_csv_record(in, fields, line_no)) break;
    if (fields.size() == 1 && fields[0].empty()) continue;
    if (fields.size() != header.size()) {
      throw ParseError(record_line, "expected " + std::to_string(header.size()) + " fields, got " +
                                        std::to_string(fields.size()));
    }
    Instance inst;
    inst.id = fields[col["id"]];
    inst.text = fields[col["text"]];
    if (col.count("label")) inst.gold_label = resolve_label(labels, fields[col["label"]], record_line, "label");
    if (col.count("decoy")) inst.decoy_label = resolve_label(labels, fields[col["decoy"]], record_line, "decoy");
    out.push_back(std::move(inst));
  }
  return out;
}

}  // namespace

Corpus read_corpus(std::istream& in, CorpusFormat format, const LabelSpace& labels) {
  auto instances = format == CorpusFormat::Jsonl ? read_jsonl(in, labels) : read_csv(in, labels);
  return Corpus(std::move(instances), labels.size());
}

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format, const LabelSpace& labels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open corpus file " + path.string());
  return read_corpus(in, format, labels);
}

void write_corpus_jsonl(std::ostream& out, const Corpus& corpus, const LabelSpace& labels) {
  for (const auto& inst : corpus) {
    json rec = {{"id", inst.id}, {"text", inst.text}};
    if (inst.gold_label) rec["label"] = labels.name(*inst.gold_label);
    if (inst.decoy_label) rec["decoy"] = labels.name(*inst.decoy_label);
    out << rec.dump() << '\n';
  }
}

std::string_view to_string(LabelSource source) { return source == LabelSource::Gold ? "gold" : "molam"; }

LabelSource parse_label_source(std::string_view name) {
  if (name == "gold") return LabelSource::Gold;
  if (name == "molam") return LabelSource::Molam;
  fail(ErrorKind::Parse, "unknown label source '" + std::string(name) + "'");
}

bool DataPools::is_labeled(std::string_view id) const {
  return std::any_of(labeled.begin(), labeled.end(), [&](const LabeledEntry& e) { return e.id == id; });
}

void to_json(json& j, const DataPools& pools) {
  json labeled = json::array();
  for (const auto& e : pools.labeled) {
    labeled.push_back({{"id", e.id}, {"label", e.label}, {"source", to_string(e.source)}});
  }
  j = {{"labeled", std::move(labeled)}, {"unlabeled", pools.unlabeled}};
}

void from_json(const json& j, DataPools& pools) {
  pools.labeled.clear();
  for (const auto& e : j.at("labeled")) {
    pools.labeled.push_back(
        {e.at("id").get<std::string>(), e.at("label").get<ClassIndex>(), parse_label_source(e.at("source").get<std::string>())});
  }
  pools.unlabeled = j.at("unlabeled").get<std::set<std::string>>();
}

namespace {

std::vector<std::size_t> gold_positions(const Corpus& corpus, const std::set<std::string>& exclude) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (corpus[i].gold_label && !exclude.count(corpus[i].id)) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> draw_positions(const Corpus& corpus, std::vector<std::size_t> candidates, std::size_t n,
                                        Rng& rng, bool stratified) {
  if (!stratified) {
    shuffle(candidates.begin(), candidates.end(), rng);
    candidates.resize(n);
    return candidates;
  }
  // Round-robin over classes, each class list shuffled independently.
  std::vector<std::vector<std::size_t>> by_class(corpus.num_classes());
  for (auto i : candidates) by_class[*corpus[i].gold_label].push_back(i);
  for (auto& v : by_class) shuffle(v.begin(), v.end(), rng);
  std::vector<std::size_t> out;
  for (std::size_t round = 0; out.size() < n; ++round) {
    for (auto& v : by_class) {
      if (round < v.size() && out.size() < n) out.push_back(v[round]);
    }
  }
  return out;
}

}  // namespace

DataPools seed_pools(const Corpus& corpus, std::size_t n_init, std::uint64_t seed, SeedOptions options) {
  auto candidates = gold_positions(corpus, {});
  if (candidates.size() < n_init) {
    fail(ErrorKind::InsufficientLabels, "need " + std::to_string(n_init) + " gold-labeled instances, corpus has " +
                                            std::to_string(candidates.size()));
  }
  Rng rng(derive_seed(seed, {"seed_pools"}));
  auto chosen = draw_positions(corpus, std::move(candidates), n_init, rng, options.stratified);
  std::sort(chosen.begin(), chosen.end());

  DataPools pools;
  std::set<std::string> taken;
  for (auto i : chosen) {
    pools.labeled.push_back({corpus[i].id, *corpus[i].gold_label, LabelSource::Gold});
    taken.insert(corpus[i].id);
  }
  for (const auto& inst : corpus) {
    if (!taken.count(inst.id)) pools.unlabeled.insert(inst.id);
  }
  return pools;
}

std::vector<std::string> sample_gold_ids(const Corpus& corpus, std::size_t n, std::uint64_t seed,
                                         const std::set<std::string>& exclude) {
  auto candidates = gold_positions(corpus, exclude);
  if (candidates.size() < n) {
    fail(ErrorKind::InsufficientLabels,
         "need " + std::to_string(n) + " spare gold-labeled instances, corpus has " + std::to_string(candidates.size()));
  }
  Rng rng(derive_seed(seed, {"sample_gold_ids"}));
  auto chosen = draw_positions(corpus, std::move(candidates), n, rng, false);
  std::sort(chosen.begin(), chosen.end());
  std::vector<std::string> out;
  for (auto i : chosen) out.push_back(corpus[i].id);
  return out;
}

DataPools transfer(const DataPools& pools, const std::vector<LabeledEntry>& batch,
                   std::optional<std::size_t> num_classes) {
  std::set<std::string> seen;
  for (const auto& e : batch) {
    if (num_classes && e.label >= *num_classes) {
      fail(ErrorKind::Validation, "label " + std::to_string(e.label) + " for '" + e.id + "' is out of range");
    }
    if (!seen.insert(e.id).second) fail(ErrorKind::Validation, "duplicate id '" + e.id + "' in transfer batch");
    if (!pools.unlabeled.count(e.id)) {
      fail(ErrorKind::State, "id '" + e.id + "' is not in the unlabeled pool");
    }
  }
  DataPools out = pools;
  for (const auto& e : batch) {
    out.unlabeled.erase(e.id);
    out.labeled.push_back(e);
  }
  return out;
}

}  // namespace mollia
