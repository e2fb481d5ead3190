#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mollia/metrics.hpp"
#include "mollia/orchestrator.hpp"

namespace mollia {

// Diagnostics over the MoLAM-labeled records that carry gold labels.
struct AuditReport {
  std::size_t audited = 0;  // records with a gold label
  NegativeLabelAudit negatives;
  DetectionRates detection;
};

AuditReport audit(const RunState& state, std::size_t num_classes);
nlohmann::json to_json(const AuditReport& report);

// One JSON object per iteration, newline-terminated.
std::string metrics_jsonl(const RunState& state);
// iteration,pool_size,micro_f1,annotation_acc
std::string curve_csv(const RunState& state);
std::string records_jsonl(const RunState& state);
std::string summary_text(const RunState& state, const LabelSpace& labels);

// Writes metrics.jsonl, curve.csv, records.jsonl, audit.json and summary.txt.
// The content depends on the state alone, so equal states give identical files.
void emit_report(const RunState& state, const LabelSpace& labels, const std::filesystem::path& out_dir);

// Per-iteration mean and sample standard deviation across runs (e.g. seeds):
// iteration,pool_size,runs,micro_f1_mean,micro_f1_std,annotation_acc_mean,annotation_acc_std
std::string average_curves(const std::vector<std::vector<IterationMetrics>>& runs);

// Final micro-F1 per ablation variant, averaged over the given runs.
std::string ablation_table(const std::vector<std::pair<Ablation, std::vector<double>>>& final_f1);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};
MeanStd mean_std(const std::vector<double>& values);

}  // namespace mollia
