#include "genaff/stats.hpp"

#include "genaff/textutil.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace genaff::stats {

namespace dist {

namespace {

constexpr double kEps = 1e-15;
constexpr double kTiny = 1e-300;
constexpr int kMaxIter = 600;

double gamma_p_series(double a, double x) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int i = 0; i < kMaxIter; ++i) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::fabs(del) < std::fabs(sum) * kEps) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_contfrac(double a, double x) {
    double b = x + 1.0 - a;
    double c = 1.0 / kTiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= kMaxIter; ++i) {
        double an = -double(i) * (double(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = b + an / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

double beta_contfrac(double a, double b, double x) {
    double qab = a + b;
    double qap = a + 1.0;
    double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

} // namespace

double gamma_q(double a, double x) {
    if (a <= 0.0 || x < 0.0) raise(Status::invalid_argument, "gamma_q domain error");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
    return gamma_q_contfrac(a, x);
}

double inc_beta(double a, double b, double x) {
    if (a <= 0.0 || b <= 0.0) raise(Status::invalid_argument, "inc_beta domain error");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double log_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                    b * std::log1p(-x);
    double bt = std::exp(log_bt);
    if (x < (a + 1.0) / (a + b + 2.0)) return bt * beta_contfrac(a, b, x) / a;
    return 1.0 - bt * beta_contfrac(b, a, 1.0 - x) / b;
}

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

double chi2_sf(double x, double df) {
    if (x <= 0.0) return 1.0;
    return gamma_q(df / 2.0, x / 2.0);
}

double t_two_sided_p(double t, double df) {
    if (!std::isfinite(t)) return 0.0;
    double x = df / (df + t * t);
    return inc_beta(df / 2.0, 0.5, x);
}

} // namespace dist

const char* ann_label_name(AnnLabel l) {
    switch (l) {
        case AnnLabel::yes: return "yes";
        case AnnLabel::no: return "no";
        case AnnLabel::na: return "na";
    }
    return "?";
}

std::optional<AnnLabel> ann_label_from_name(std::string_view name) {
    std::string low = ascii_lower(name);
    if (low == "yes" || low == "y") return AnnLabel::yes;
    if (low == "no" || low == "n") return AnnLabel::no;
    if (low == "na" || low == "n/a") return AnnLabel::na;
    return std::nullopt;
}

std::vector<AnnotationRecord> load_annotations_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(Status::io, "cannot open annotations file: " + path);
    std::vector<AnnotationRecord> out;
    std::string line;
    size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (!header_seen) {
            header_seen = true;
            if (!fields.empty() && ascii_lower(fields[0]) == "prompt_id") continue;
        }
        if (fields.size() != 5)
            raise(Status::parse, path + ":" + std::to_string(line_no) +
                                     ": expected 5 columns "
                                     "(prompt_id,annotator_id,consistency,relevance,coherence)");
        AnnotationRecord rec;
        rec.prompt_id = fields[0];
        rec.annotator_id = fields[1];
        auto label = ann_label_from_name(fields[2]);
        if (!label)
            raise(Status::parse, path + ":" + std::to_string(line_no) +
                                     ": bad consistency label \"" + fields[2] + "\"");
        rec.consistency = *label;
        rec.relevance = std::stoi(fields[3]);
        rec.coherence = std::stoi(fields[4]);
        if (rec.relevance < 1 || rec.relevance > 5 || rec.coherence < 1 || rec.coherence > 5)
            raise(Status::validation, path + ":" + std::to_string(line_no) +
                                          ": Likert fields must be within 1-5");
        out.push_back(std::move(rec));
    }
    return out;
}

AnnLabel majority_vote(std::span<const AnnLabel> labels) {
    if (labels.empty()) raise(Status::invalid_argument, "majority_vote: no labels");
    std::array<size_t, 3> counts{};
    for (auto l : labels) counts[size_t(l)]++;
    size_t best = std::max({counts[0], counts[1], counts[2]});
    int winners = 0;
    AnnLabel winner = AnnLabel::na;
    for (size_t i = 0; i < 3; ++i) {
        if (counts[i] == best) {
            ++winners;
            winner = AnnLabel(i);
        }
    }
    return winners == 1 ? winner : AnnLabel::na;
}

nlohmann::json TestResult::to_json() const {
    nlohmann::json j{{"statistic", statistic}, {"p_value", p_value}, {"method", method}, {"n", n}};
    if (!note.empty()) j["note"] = note;
    return j;
}

RankResult ranks_average(std::span<const double> values) {
    size_t n = values.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t(0));
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return values[a] < values[b]; });
    RankResult result;
    result.ranks.assign(n, 0.0);
    size_t i = 0;
    while (i < n) {
        size_t j = i + 1;
        while (j < n && values[order[j]] == values[order[i]]) ++j;
        double avg = (double(i + 1) + double(j)) / 2.0;
        for (size_t k = i; k < j; ++k) result.ranks[order[k]] = avg;
        double t = double(j - i);
        result.tie_sum += t * t * t - t;
        i = j;
    }
    return result;
}

TestResult spearman_rho(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) raise(Status::invalid_argument, "spearman_rho: length mismatch");
    size_t n = x.size();
    if (n < 3) raise(Status::invalid_argument, "spearman_rho: need at least 3 pairs");
    auto rx = ranks_average(x).ranks;
    auto ry = ranks_average(y).ranks;
    double mean = (double(n) + 1.0) / 2.0;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double dx = rx[i] - mean;
        double dy = ry[i] - mean;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0)
        raise(Status::invalid_argument, "spearman_rho: constant input");
    double rho = sxy / std::sqrt(sxx * syy);
    rho = std::clamp(rho, -1.0, 1.0);

    TestResult result;
    result.statistic = rho;
    result.method = "spearman_rho";
    result.n = {n};
    double denom = 1.0 - rho * rho;
    if (denom <= 0.0) {
        result.p_value = 0.0;
    } else {
        double t = rho * std::sqrt((double(n) - 2.0) / denom);
        result.p_value = dist::t_two_sided_p(t, double(n) - 2.0);
    }
    return result;
}

double krippendorff_alpha(const std::vector<std::vector<std::optional<double>>>& coder_by_item,
                          AlphaLevel level) {
    if (coder_by_item.size() < 2)
        raise(Status::invalid_argument, "krippendorff_alpha: need at least 2 coders");
    size_t n_items = 0;
    for (const auto& row : coder_by_item) n_items = std::max(n_items, row.size());

    // Collect pairable units (items with >= 2 values).
    std::vector<std::vector<double>> units;
    for (size_t item = 0; item < n_items; ++item) {
        std::vector<double> values;
        for (const auto& row : coder_by_item)
            if (item < row.size() && row[item]) values.push_back(*row[item]);
        if (values.size() >= 2) units.push_back(std::move(values));
    }
    if (units.empty()) raise(Status::validation, "krippendorff_alpha: insufficient pairable values");

    std::map<double, size_t> value_index;
    for (const auto& unit : units)
        for (double v : unit) value_index.emplace(v, 0);
    size_t v = 0;
    for (auto& [key, idx] : value_index) idx = v++;
    size_t k = value_index.size();

    std::vector<std::vector<double>> coincidence(k, std::vector<double>(k, 0.0));
    double n_total = 0.0;
    for (const auto& unit : units) {
        double m = double(unit.size());
        n_total += m;
        for (size_t i = 0; i < unit.size(); ++i)
            for (size_t j = 0; j < unit.size(); ++j) {
                if (i == j) continue;
                coincidence[value_index[unit[i]]][value_index[unit[j]]] += 1.0 / (m - 1.0);
            }
    }

    std::vector<double> marginal(k, 0.0);
    for (size_t c = 0; c < k; ++c)
        for (size_t d = 0; d < k; ++d) marginal[c] += coincidence[c][d];

    // value_index is ordered, so indices follow sorted value order; the
    // ordinal metric walks marginals between the two indices.
    auto delta2 = [&](size_t c, size_t d) -> double {
        if (c == d) return 0.0;
        if (level == AlphaLevel::nominal) return 1.0;
        size_t lo = std::min(c, d), hi = std::max(c, d);
        double between = 0.0;
        for (size_t g = lo; g <= hi; ++g) between += marginal[g];
        double diff = between - (marginal[lo] + marginal[hi]) / 2.0;
        return diff * diff;
    };

    double d_obs = 0.0, d_exp = 0.0;
    for (size_t c = 0; c < k; ++c) {
        for (size_t d = 0; d < k; ++d) {
            double dd = delta2(c, d);
            d_obs += coincidence[c][d] * dd;
            d_exp += marginal[c] * marginal[d] * dd;
        }
    }
    d_obs /= n_total;
    d_exp /= n_total * (n_total - 1.0);

    if (d_exp <= 0.0) {
        if (units.size() >= 2 && d_obs <= 0.0) return 1.0;
        raise(Status::validation, "krippendorff_alpha: insufficient pairable values");
    }
    return 1.0 - d_obs / d_exp;
}

TestResult kruskal_wallis(std::span<const std::vector<double>> groups) {
    if (groups.size() < 2) raise(Status::invalid_argument, "kruskal_wallis: need >= 2 groups");
    std::vector<double> pooled;
    std::vector<size_t> sizes;
    for (const auto& g : groups) {
        if (g.empty()) raise(Status::invalid_argument, "kruskal_wallis: empty group");
        sizes.push_back(g.size());
        pooled.insert(pooled.end(), g.begin(), g.end());
    }
    size_t n = pooled.size();
    if (n < 3) raise(Status::invalid_argument, "kruskal_wallis: need at least 3 values");

    auto ranked = ranks_average(pooled);
    double h = 0.0;
    size_t offset = 0;
    for (size_t gi = 0; gi < groups.size(); ++gi) {
        double rsum = 0.0;
        for (size_t i = 0; i < sizes[gi]; ++i) rsum += ranked.ranks[offset + i];
        offset += sizes[gi];
        h += rsum * rsum / double(sizes[gi]);
    }
    double dn = double(n);
    h = 12.0 / (dn * (dn + 1.0)) * h - 3.0 * (dn + 1.0);

    TestResult result;
    result.method = "kruskal_wallis";
    result.n = sizes;
    double correction = 1.0 - ranked.tie_sum / (dn * dn * dn - dn);
    if (correction <= 0.0) {
        result.statistic = 0.0;
        result.p_value = 1.0;
        result.note = "all values identical";
        return result;
    }
    h /= correction;
    if (h < 0.0 && h > -1e-9) h = 0.0;
    result.statistic = h;
    result.p_value = dist::chi2_sf(h, double(groups.size()) - 1.0);
    return result;
}

TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) raise(Status::invalid_argument, "mann_whitney_u: empty sample");
    std::vector<double> pooled(a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    auto ranked = ranks_average(pooled);
    double ra = 0.0;
    for (size_t i = 0; i < a.size(); ++i) ra += ranked.ranks[i];
    double na = double(a.size()), nb = double(b.size());
    double u1 = ra - na * (na + 1.0) / 2.0;

    TestResult result;
    result.method = "mann_whitney_u";
    result.n = {a.size(), b.size()};
    result.statistic = u1;

    double n = na + nb;
    double variance = na * nb / 12.0 * ((n + 1.0) - ranked.tie_sum / (n * (n - 1.0)));
    if (variance <= 0.0) {
        result.p_value = 1.0;
        result.note = "all values identical";
        return result;
    }
    double z = (u1 - na * nb / 2.0) / std::sqrt(variance);
    result.p_value = std::min(1.0, 2.0 * dist::normal_sf(std::fabs(z)));
    return result;
}

TestResult chi_square(const std::vector<std::vector<double>>& contingency) {
    size_t rows = contingency.size();
    if (rows < 2) raise(Status::invalid_argument, "chi_square: need at least 2 rows");
    size_t cols = contingency[0].size();
    if (cols < 2) raise(Status::invalid_argument, "chi_square: need at least 2 columns");
    for (const auto& row : contingency)
        if (row.size() != cols) raise(Status::invalid_argument, "chi_square: ragged table");

    std::vector<double> row_sum(rows, 0.0), col_sum(cols, 0.0);
    double total = 0.0;
    size_t n_obs = 0;
    for (size_t r = 0; r < rows; ++r) {
        for (size_t c = 0; c < cols; ++c) {
            double v = contingency[r][c];
            if (v < 0.0) raise(Status::invalid_argument, "chi_square: negative count");
            row_sum[r] += v;
            col_sum[c] += v;
            total += v;
            n_obs += size_t(v);
        }
    }
    if (total <= 0.0) raise(Status::invalid_argument, "chi_square: empty table");

    TestResult result;
    result.method = "chi_square";
    result.n = {n_obs};
    bool low_expected = false;
    double stat = 0.0;
    for (size_t r = 0; r < rows; ++r) {
        for (size_t c = 0; c < cols; ++c) {
            double expected = row_sum[r] * col_sum[c] / total;
            if (expected <= 0.0)
                raise(Status::validation, "chi_square: zero expected count in cell (" +
                                              std::to_string(r) + "," + std::to_string(c) + ")");
            if (expected < 5.0) low_expected = true;
            double diff = contingency[r][c] - expected;
            stat += diff * diff / expected;
        }
    }
    if (low_expected) result.note = "expected count below 5";
    result.statistic = stat;
    result.p_value = dist::chi2_sf(stat, double((rows - 1) * (cols - 1)));
    return result;
}

nlohmann::json ClassificationMetrics::to_json() const {
    return {{"tp", tp},       {"fp", fp},           {"fn", fn},       {"tn", tn},
            {"accuracy", accuracy}, {"precision", precision}, {"recall", recall}, {"f1", f1}};
}

ClassificationMetrics tool_vs_truth(std::span<const std::optional<bool>> tool,
                                    std::span<const std::optional<bool>> truth) {
    if (tool.size() != truth.size())
        raise(Status::invalid_argument, "tool_vs_truth: length mismatch");
    ClassificationMetrics m;
    size_t used = 0;
    for (size_t i = 0; i < tool.size(); ++i) {
        if (!tool[i] || !truth[i]) continue;
        ++used;
        bool t = *tool[i], g = *truth[i];
        if (t && g) ++m.tp;
        else if (t && !g) ++m.fp;
        else if (!t && g) ++m.fn;
        else ++m.tn;
    }
    if (used == 0) raise(Status::invalid_argument, "tool_vs_truth: no aligned labels");
    m.accuracy = double(m.tp + m.tn) / double(used);
    m.precision = (m.tp + m.fp) ? double(m.tp) / double(m.tp + m.fp) : 0.0;
    m.recall = (m.tp + m.fn) ? double(m.tp) / double(m.tp + m.fn) : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    return m;
}

} // namespace genaff::stats
