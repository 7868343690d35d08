#pragma once

#include "genaff/error.hpp"

#include <json.hpp>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace genaff::stats {

// --- annotation ingestion ---------------------------------------------------

enum class AnnLabel : uint8_t { yes, no, na };

const char* ann_label_name(AnnLabel l);
std::optional<AnnLabel> ann_label_from_name(std::string_view name);

struct AnnotationRecord {
    std::string prompt_id;
    std::string annotator_id;
    AnnLabel consistency = AnnLabel::na;
    int relevance = 0; // 1-5
    int coherence = 0; // 1-5
};

// CSV columns: prompt_id,annotator_id,consistency,relevance,coherence
std::vector<AnnotationRecord> load_annotations_csv(const std::string& path);

// Modal label; ties resolve to na.
AnnLabel majority_vote(std::span<const AnnLabel> labels);

// --- test results -----------------------------------------------------------

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::vector<size_t> n;
    std::string method;
    std::string note; // e.g. low expected counts

    nlohmann::json to_json() const;
};

// Spearman rank correlation with average ranks for ties; p by the
// t-approximation with n-2 degrees of freedom (two-sided).
TestResult spearman_rho(std::span<const double> x, std::span<const double> y);

enum class AlphaLevel { nominal, ordinal };

// Krippendorff's alpha over a coder x item matrix; missing entries allowed.
double krippendorff_alpha(const std::vector<std::vector<std::optional<double>>>& coder_by_item,
                          AlphaLevel level);

// H with tie correction; p via the chi-square approximation, k-1 df.
TestResult kruskal_wallis(std::span<const std::vector<double>> groups);

// U of the first sample; tie-corrected normal approximation, two-sided,
// no continuity correction (keeps the two-group case consistent with
// kruskal_wallis).
TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b);

// Pearson chi-square on an r x c count table, df = (r-1)(c-1).
TestResult chi_square(const std::vector<std::vector<double>>& contingency);

struct ClassificationMetrics {
    size_t tp = 0, fp = 0, fn = 0, tn = 0;
    double accuracy = 0.0, precision = 0.0, recall = 0.0, f1 = 0.0;

    nlohmann::json to_json() const;
};

// Positive class = misgendered (inconsistent). Entries where either side is
// nullopt (the "N/A" label) are excluded pairwise.
ClassificationMetrics tool_vs_truth(std::span<const std::optional<bool>> tool,
                                    std::span<const std::optional<bool>> truth);

// --- distribution helpers ---------------------------------------------------

namespace dist {

double normal_sf(double z);                 // upper tail
double chi2_sf(double x, double df);        // upper tail
double t_two_sided_p(double t, double df);

double gamma_q(double a, double x);         // regularized upper incomplete gamma
double inc_beta(double a, double b, double x); // regularized incomplete beta

} // namespace dist

// Average ranks (1-based); tie_sum is sum of t^3 - t over tie groups.
struct RankResult {
    std::vector<double> ranks;
    double tie_sum = 0.0;
};

RankResult ranks_average(std::span<const double> values);

} // namespace genaff::stats
