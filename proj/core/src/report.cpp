#include "mollia/report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "mollia/error.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace mollia {

AuditReport audit(const RunState& state, std::size_t num_classes) {
  AuditReport a;
  std::vector<std::vector<ClassIndex>> negatives;
  std::vector<ClassIndex> golds;
  std::vector<DetectionRecord> detection;
  for (const auto& r : state.records) {
    if (!r.gold) continue;
    negatives.push_back(r.y_minus);
    golds.push_back(*r.gold);
    detection.push_back(DetectionRecord{r.d_anno, r.y_plus == *r.gold, r.probs, r.consistency});
  }
  a.audited = golds.size();
  a.negatives = negative_label_audit(negatives, golds, num_classes);
  a.detection = discrepancy_detection(detection);
  return a;
}

json to_json(const AuditReport& r) {
  return json{{"audited", r.audited},
              {"negative_labels",
               {{"instances", r.negatives.instances},
                {"slots", r.negatives.slots},
                {"true_negatives", r.negatives.true_negatives},
                {"false_negatives", r.negatives.false_negatives},
                {"true_negative_rate", r.negatives.true_negative_rate},
                {"false_negative_rate", r.negatives.false_negative_rate}}},
              {"discrepancy_detection",
               {{"records", r.detection.records},
                {"flagged", r.detection.flagged},
                {"d_anno", r.detection.d_anno},
                {"entropy", r.detection.entropy},
                {"margin", r.detection.margin},
                {"consistency", r.detection.consistency}}}};
}

std::string metrics_jsonl(const RunState& state) {
  std::string out;
  for (const auto& m : state.history) out += to_json(m).dump() + "\n";
  return out;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::string curve_csv(const RunState& state) {
  std::string out = "iteration,pool_size,micro_f1,annotation_acc\n";
  for (const auto& m : state.history) {
    out += std::to_string(m.iteration) + "," + std::to_string(m.pool_size) + "," + fmt(m.micro_f1) + "," +
           (m.batch_annotation_acc ? fmt(*m.batch_annotation_acc) : "") + "\n";
  }
  return out;
}

std::string records_jsonl(const RunState& state) {
  std::string out;
  for (const auto& r : state.records) out += to_json(r).dump() + "\n";
  return out;
}

std::string summary_text(const RunState& state, const LabelSpace& labels) {
  std::ostringstream os;
  os << "ablation            " << to_string(state.ablation) << "\n";
  os << "iterations          " << state.iteration << "\n";
  os << "labeled pool        " << state.pools.labeled.size() << "\n";
  os << "initial micro-F1    " << fmt(state.initial_micro_f1) << "\n";
  if (!state.history.empty()) {
    const auto& last = state.history.back();
    os << "final micro-F1      " << fmt(last.micro_f1) << "\n";
    if (last.cumulative_annotation_acc) os << "annotation accuracy " << fmt(*last.cumulative_annotation_acc) << "\n";
  }
  os << "annotation model    " << state.molam_training_size << " training rows, " << state.molam_admissions
     << " pseudo-labeled\n";
  if (state.terminated) os << "terminated          " << state.termination_reason << "\n";
  const auto a = audit(state, labels.size());
  if (a.audited > 0) {
    os << "\nnegative labels over " << a.negatives.instances << " instances (" << a.negatives.slots << " slots)\n";
    os << "  true-negative rate  " << fmt(a.negatives.true_negative_rate) << "\n";
    os << "  false-negative rate " << fmt(a.negatives.false_negative_rate) << "\n";
    os << "\naccurate-annotation detection, " << a.detection.flagged << " of " << a.detection.records << " flagged\n";
    os << "  discrepancy " << fmt(a.detection.d_anno) << "\n";
    os << "  entropy     " << fmt(a.detection.entropy) << "\n";
    os << "  margin      " << fmt(a.detection.margin) << "\n";
    os << "  consistency " << fmt(a.detection.consistency) << "\n";
  }
  return os.str();
}

void emit_report(const RunState& state, const LabelSpace& labels, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create " + out_dir.string() + ": " + ec.message());
  write_atomic(out_dir / "metrics.jsonl", metrics_jsonl(state));
  write_atomic(out_dir / "curve.csv", curve_csv(state));
  write_atomic(out_dir / "records.jsonl", records_jsonl(state));
  write_atomic(out_dir / "audit.json", to_json(audit(state, labels.size())).dump(1) + "\n");
  write_atomic(out_dir / "summary.txt", summary_text(state, labels));
}

MeanStd mean_std(const std::vector<double>& v) {
  MeanStd r;
  if (v.empty()) return r;
  for (double x : v) r.mean += x;
  r.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - r.mean) * (x - r.mean);
    r.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return r;
}

std::string average_curves(const std::vector<std::vector<IterationMetrics>>& runs) {
  std::string out = "iteration,pool_size,runs,micro_f1_mean,micro_f1_std,annotation_acc_mean,annotation_acc_std\n";
  std::size_t longest = 0;
  for (const auto& r : runs) longest = std::max(longest, r.size());
  for (std::size_t i = 0; i < longest; ++i) {
    std::vector<double> f1, acc;
    std::size_t pool = 0;
    for (const auto& r : runs) {
      if (i >= r.size()) continue;
      f1.push_back(r[i].micro_f1);
      pool = r[i].pool_size;
      if (r[i].batch_annotation_acc) acc.push_back(*r[i].batch_annotation_acc);
    }
    const auto f = mean_std(f1);
    out += std::to_string(i) + "," + std::to_string(pool) + "," + std::to_string(f1.size()) + "," + fmt(f.mean) + "," +
           fmt(f.std) + ",";
    if (!acc.empty()) {
      const auto a = mean_std(acc);
      out += fmt(a.mean) + "," + fmt(a.std);
    } else {
      out += ",";
    }
    out += "\n";
  }
  return out;
}

std::string ablation_table(const std::vector<std::pair<Ablation, std::vector<double>>>& final_f1) {
  std::string out = "variant,negative_learning,discrepancy,runs,final_micro_f1_mean,final_micro_f1_std\n";
  for (const auto& [ab, values] : final_f1) {
    const auto s = mean_std(values);
    out += std::string(to_string(ab)) + "," + (uses_negative_learning(ab) ? "yes" : "no") + "," +
           (uses_discrepancy(ab) ? "yes" : "no") + "," + std::to_string(values.size()) + "," + fmt(s.mean) + "," +
           fmt(s.std) + "\n";
  }
  return out;
}

}  // namespace mollia
