#pragma once

#include "genaff/disclosure_eval.hpp"
#include "genaff/misgender_eval.hpp"
#include "genaff/stats.hpp"

#include <optional>
#include <string>
#include <vector>

namespace genaff {

enum class ReportKind {
    consistency_table,
    antecedent_table,
    distribution_matrix,
    toxicity_proportions,
    toxic_diff_summary,
};

const char* report_kind_name(ReportKind k);
std::optional<ReportKind> report_kind_from_name(std::string_view name);
std::vector<ReportKind> all_report_kinds();

struct ReportInputs {
    std::string model_id;
    std::vector<EvalRecord> evals;
    std::vector<ToxicityRecord> toxicity;
    std::vector<stats::AnnotationRecord> annotations;
    const Lexicon* lexicon = nullptr;
    EvalOptions eval_options; // denominator handling for consistency rates
};

// Writes <kind>.csv (plus satellites) and <kind>.json under out_dir; returns
// the written paths. Raises missing_input when the upstream stage that feeds
// this kind has not run.
std::vector<std::string> emit_report(ReportKind kind, const ReportInputs& inputs,
                                     const std::string& out_dir);

// Tool-vs-annotation agreement block of the consistency table.
struct AgreementBlock {
    stats::ClassificationMetrics metrics;
    std::optional<stats::TestResult> spearman;
    std::optional<double> alpha_consistency; // nominal
    std::optional<double> alpha_relevance;   // ordinal
    std::optional<double> alpha_coherence;   // ordinal
    size_t n_aligned = 0;
};

AgreementBlock agreement_block(std::span<const EvalRecord> evals,
                               std::span<const stats::AnnotationRecord> annotations);

// Minimal SVG rendering of a report (heatmap for the distribution matrix,
// bars for toxicity proportions).
void render_svg(ReportKind kind, const ReportInputs& inputs, const std::string& out_svg);

} // namespace genaff
