#include "genaff/report.hpp"

#include "genaff/jsonl.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

namespace genaff {

namespace fs = std::filesystem;

namespace {

const std::array<const char*, 5> kKindNames = {"consistency_table", "antecedent_table",
                                               "distribution_matrix", "toxicity_proportions",
                                               "toxic_diff_summary"};

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) raise(Status::io, "cannot write report file: " + path);
    return out;
}

void write_json(const std::string& path, const nlohmann::json& doc) {
    auto out = open_out(path);
    out << doc.dump(1) << '\n';
}

std::string opt_cell(const std::optional<double>& v) {
    return v ? csv_number(*v) : std::string();
}

const std::array<const char*, 3> kPronounGroups = {"binary", "they", "neo"};

} // namespace

const char* report_kind_name(ReportKind k) { return kKindNames[size_t(k)]; }

std::optional<ReportKind> report_kind_from_name(std::string_view name) {
    for (size_t i = 0; i < kKindNames.size(); ++i)
        if (name == kKindNames[i]) return ReportKind(i);
    return std::nullopt;
}

std::vector<ReportKind> all_report_kinds() {
    std::vector<ReportKind> kinds;
    for (size_t i = 0; i < kKindNames.size(); ++i) kinds.push_back(ReportKind(i));
    return kinds;
}

// --- agreement block ----------------------------------------------------

AgreementBlock agreement_block(std::span<const EvalRecord> evals,
                               std::span<const stats::AnnotationRecord> annotations) {
    AgreementBlock block;

    std::map<std::string, const EvalRecord*> eval_by_id;
    for (const auto& e : evals) eval_by_id[e.prompt_id] = &e;

    // Annotator x item matrices over the annotated prompt ids.
    std::vector<std::string> item_ids;
    std::map<std::string, size_t> item_index;
    std::map<std::string, size_t> coder_index;
    for (const auto& a : annotations) {
        if (!eval_by_id.count(a.prompt_id)) continue;
        if (!item_index.count(a.prompt_id)) {
            item_index[a.prompt_id] = item_ids.size();
            item_ids.push_back(a.prompt_id);
        }
        coder_index.emplace(a.annotator_id, coder_index.size());
    }
    if (item_ids.empty()) raise(Status::missing_input, "no annotations align with evaluations");

    size_t n_items = item_ids.size();
    size_t n_coders = coder_index.size();
    using Matrix = std::vector<std::vector<std::optional<double>>>;
    Matrix consistency(n_coders, std::vector<std::optional<double>>(n_items));
    Matrix relevance(n_coders, std::vector<std::optional<double>>(n_items));
    Matrix coherence(n_coders, std::vector<std::optional<double>>(n_items));
    std::map<std::string, std::vector<stats::AnnLabel>> votes;

    for (const auto& a : annotations) {
        auto it = item_index.find(a.prompt_id);
        if (it == item_index.end()) continue;
        size_t item = it->second;
        size_t coder = coder_index[a.annotator_id];
        consistency[coder][item] = double(uint8_t(a.consistency));
        relevance[coder][item] = double(a.relevance);
        coherence[coder][item] = double(a.coherence);
        votes[a.prompt_id].push_back(a.consistency);
    }

    // Tool and ground-truth labels; positive class = misgendered.
    std::vector<std::optional<bool>> tool, truth;
    std::vector<double> tool_values, truth_values;
    block.n_aligned = 0;
    for (const auto& id : item_ids) {
        const EvalRecord& eval = *eval_by_id[id];
        std::optional<bool> t;
        if (eval.label.value == Consistency::consistent) t = false;
        else if (eval.label.value == Consistency::inconsistent) t = true;
        stats::AnnLabel vote = stats::majority_vote(votes[id]);
        std::optional<bool> g;
        if (vote == stats::AnnLabel::yes) g = false;
        else if (vote == stats::AnnLabel::no) g = true;
        tool.push_back(t);
        truth.push_back(g);
        if (t && g) {
            ++block.n_aligned;
            tool_values.push_back(*t ? 1.0 : 0.0);
            truth_values.push_back(*g ? 1.0 : 0.0);
        }
    }
    block.metrics = stats::tool_vs_truth(tool, truth);

    if (tool_values.size() >= 3) {
        try {
            block.spearman = stats::spearman_rho(tool_values, truth_values);
        } catch (const Error&) {
            // constant labels: correlation undefined, leave empty
        }
    }
    auto try_alpha = [](const Matrix& m, stats::AlphaLevel level) -> std::optional<double> {
        try {
            return stats::krippendorff_alpha(m, level);
        } catch (const Error&) {
            return std::nullopt;
        }
    };
    block.alpha_consistency = try_alpha(consistency, stats::AlphaLevel::nominal);
    block.alpha_relevance = try_alpha(relevance, stats::AlphaLevel::ordinal);
    block.alpha_coherence = try_alpha(coherence, stats::AlphaLevel::ordinal);
    return block;
}

// --- consistency table ----------------------------------------------------

namespace {

struct GroupMeans {
    std::map<std::string, double> value;
    std::map<std::string, size_t> count;

    void add(const std::string& group, double v) {
        value[group] += v;
        count[group] += 1;
    }
    std::optional<double> mean(const std::string& group) const {
        auto it = count.find(group);
        if (it == count.end() || it->second == 0) return std::nullopt;
        return value.at(group) / double(it->second);
    }
};

std::vector<std::string> consistency_files(const ReportInputs& inputs, const std::string& out_dir) {
    if (inputs.evals.empty())
        raise(Status::missing_input, "consistency_table needs misgendering evaluations");

    auto groups = grouped_comparison(inputs.evals, GroupKey::pronoun_group, inputs.eval_options);
    std::map<std::string, GroupStats> by_group;
    for (const auto& row : groups.rows) by_group[row.group] = row;

    GroupMeans ttr_means;
    std::map<std::string, std::string> family_group; // prompt_id -> pronoun group
    for (const auto& e : inputs.evals) {
        if (!e.prompt.pronoun_family) continue;
        std::string group = pronoun_group(*e.prompt.pronoun_family);
        family_group[e.prompt_id] = group;
        if (e.ttr) ttr_means.add(group, *e.ttr);
    }

    std::optional<AgreementBlock> agreement;
    GroupMeans relevance_means, coherence_means;
    if (!inputs.annotations.empty()) {
        agreement = agreement_block(inputs.evals, inputs.annotations);
        for (const auto& a : inputs.annotations) {
            auto it = family_group.find(a.prompt_id);
            if (it == family_group.end()) continue;
            relevance_means.add(it->second, double(a.relevance));
            coherence_means.add(it->second, double(a.coherence));
        }
    }

    std::string csv_path = (fs::path(out_dir) / "consistency_table.csv").string();
    {
        auto out = open_out(csv_path);
        out << "model,accuracy,recall,precision,f1,spearman_rho,spearman_p,"
               "alpha_consistency,alpha_relevance,alpha_coherence";
        for (const char* g : kPronounGroups) out << ",consistency_" << g;
        for (const char* g : kPronounGroups) out << ",no_pronoun_rate_" << g;
        for (const char* g : kPronounGroups) out << ",relevance_" << g;
        for (const char* g : kPronounGroups) out << ",coherence_" << g;
        for (const char* g : kPronounGroups) out << ",ttr_" << g;
        out << "\n";

        out << csv_escape(inputs.model_id);
        if (agreement) {
            const auto& m = agreement->metrics;
            out << ',' << csv_number(m.accuracy) << ',' << csv_number(m.recall) << ','
                << csv_number(m.precision) << ',' << csv_number(m.f1);
            if (agreement->spearman)
                out << ',' << csv_number(agreement->spearman->statistic) << ','
                    << csv_number(agreement->spearman->p_value);
            else
                out << ",,";
            out << ',' << opt_cell(agreement->alpha_consistency) << ','
                << opt_cell(agreement->alpha_relevance) << ','
                << opt_cell(agreement->alpha_coherence);
        } else {
            out << ",,,,,,,,,";
        }
        for (const char* g : kPronounGroups)
            out << ',' << (by_group.count(g) ? csv_number(by_group[g].consistency) : "");
        for (const char* g : kPronounGroups)
            out << ',' << (by_group.count(g) ? csv_number(by_group[g].no_pronoun_rate) : "");
        for (const char* g : kPronounGroups) out << ',' << opt_cell(relevance_means.mean(g));
        for (const char* g : kPronounGroups) out << ',' << opt_cell(coherence_means.mean(g));
        for (const char* g : kPronounGroups) out << ',' << opt_cell(ttr_means.mean(g));
        out << "\n";
    }

    nlohmann::json summary{{"model", inputs.model_id}, {"groups", groups.to_json()}};
    if (agreement) {
        summary["tool_vs_annotation"] = agreement->metrics.to_json();
        summary["n_aligned"] = agreement->n_aligned;
        if (agreement->spearman) summary["spearman"] = agreement->spearman->to_json();
        if (agreement->alpha_consistency)
            summary["alpha_consistency"] = *agreement->alpha_consistency;
        if (agreement->alpha_relevance) summary["alpha_relevance"] = *agreement->alpha_relevance;
        if (agreement->alpha_coherence) summary["alpha_coherence"] = *agreement->alpha_coherence;
    }
    nlohmann::json ttr_json = nlohmann::json::object();
    for (const char* g : kPronounGroups)
        if (auto m = ttr_means.mean(g)) ttr_json[g] = *m;
    summary["ttr_mean"] = std::move(ttr_json);

    std::string json_path = (fs::path(out_dir) / "consistency_table.json").string();
    write_json(json_path, summary);
    return {csv_path, json_path};
}

// --- antecedent table -------------------------------------------------------

std::vector<std::string> antecedent_files(const ReportInputs& inputs, const std::string& out_dir) {
    if (inputs.evals.empty())
        raise(Status::missing_input, "antecedent_table needs misgendering evaluations");

    std::string csv_path = (fs::path(out_dir) / "antecedent_table.csv").string();
    nlohmann::json summary = nlohmann::json::array();
    {
        auto out = open_out(csv_path);
        out << "pronoun_group,named_consistency,distal_consistency,delta_consistency,"
               "named_perplexity,distal_perplexity,delta_perplexity,"
               "n_named,n_distal,mwu_perplexity_p\n";

        for (const char* group : kPronounGroups) {
            std::vector<EvalRecord> subset;
            std::vector<double> named_ppl, distal_ppl;
            for (const auto& e : inputs.evals) {
                if (!e.prompt.pronoun_family || !e.prompt.antecedent_kind) continue;
                if (pronoun_group(*e.prompt.pronoun_family) != group) continue;
                subset.push_back(e);
                if (e.perplexity) {
                    if (*e.prompt.antecedent_kind == AntecedentKind::distal)
                        distal_ppl.push_back(*e.perplexity);
                    else
                        named_ppl.push_back(*e.perplexity);
                }
            }
            if (subset.empty()) continue;
            auto table = grouped_comparison(subset, GroupKey::antecedent_kind, inputs.eval_options);

            GroupStats named{}, distal{};
            size_t n_named = 0, n_distal = 0;
            double named_cons_num = 0, named_cons_den = 0;
            for (const auto& row : table.rows) {
                if (row.group == "distal") {
                    distal = row;
                    n_distal = row.n_consistent + row.n_inconsistent + row.n_no_pronoun;
                } else {
                    named_cons_num += double(row.n_consistent);
                    named_cons_den += double(row.n_consistent + row.n_inconsistent);
                    if (inputs.eval_options.count_no_pronoun_in_denominator)
                        named_cons_den += double(row.n_no_pronoun);
                    n_named += row.n_consistent + row.n_inconsistent + row.n_no_pronoun;
                }
            }
            named.consistency = named_cons_den > 0 ? named_cons_num / named_cons_den : 0.0;
            double named_mean_ppl = 0.0, distal_mean_ppl = 0.0;
            for (double v : named_ppl) named_mean_ppl += v;
            for (double v : distal_ppl) distal_mean_ppl += v;
            if (!named_ppl.empty()) named_mean_ppl /= double(named_ppl.size());
            if (!distal_ppl.empty()) distal_mean_ppl /= double(distal_ppl.size());

            std::optional<stats::TestResult> mwu;
            if (named_ppl.size() >= 1 && distal_ppl.size() >= 1)
                mwu = stats::mann_whitney_u(named_ppl, distal_ppl);

            out << group << ',' << csv_number(named.consistency) << ','
                << csv_number(distal.consistency) << ','
                << csv_number(std::fabs(named.consistency - distal.consistency)) << ','
                << (named_ppl.empty() ? "" : csv_number(named_mean_ppl)) << ','
                << (distal_ppl.empty() ? "" : csv_number(distal_mean_ppl)) << ','
                << ((named_ppl.empty() || distal_ppl.empty())
                        ? ""
                        : csv_number(std::fabs(named_mean_ppl - distal_mean_ppl)))
                << ',' << n_named << ',' << n_distal << ','
                << (mwu ? csv_number(mwu->p_value) : "") << "\n";

            nlohmann::json row{{"pronoun_group", group},
                               {"named_consistency", named.consistency},
                               {"distal_consistency", distal.consistency},
                               {"antecedent_groups", table.to_json()}};
            if (mwu) row["mwu_perplexity"] = mwu->to_json();
            summary.push_back(std::move(row));
        }
    }
    std::string json_path = (fs::path(out_dir) / "antecedent_table.json").string();
    write_json(json_path, nlohmann::json{{"model", inputs.model_id}, {"rows", summary}});
    return {csv_path, json_path};
}

// --- distribution matrix ------------------------------------------------

std::vector<std::string> matrix_files(const ReportInputs& inputs, const std::string& out_dir) {
    if (inputs.evals.empty())
        raise(Status::missing_input, "distribution_matrix needs misgendering evaluations");
    if (!inputs.lexicon) raise(Status::missing_input, "distribution_matrix needs a lexicon");

    auto matrix = pronoun_distribution(inputs.evals, *inputs.lexicon);
    auto normalized = matrix.row_normalized();

    std::string counts_path = (fs::path(out_dir) / "distribution_matrix_counts.csv").string();
    {
        auto out = open_out(counts_path);
        out << "template_family";
        for (const auto& label : matrix.detected_labels) out << ',' << label;
        out << "\n";
        for (size_t r = 0; r < matrix.template_families.size(); ++r) {
            out << matrix.template_families[r];
            for (long v : matrix.counts[r]) out << ',' << v;
            out << "\n";
        }
    }
    std::string norm_path = (fs::path(out_dir) / "distribution_matrix_normalized.csv").string();
    {
        auto out = open_out(norm_path);
        out << "template_family";
        for (const auto& label : matrix.detected_labels) out << ',' << label;
        out << "\n";
        for (size_t r = 0; r < matrix.template_families.size(); ++r) {
            out << matrix.template_families[r];
            for (double v : normalized[r]) out << ',' << csv_number(v);
            out << "\n";
        }
    }
    std::string case_path = (fs::path(out_dir) / "case_diversity.csv").string();
    {
        auto diversity = case_diversity(inputs.evals);
        auto out = open_out(case_path);
        out << "template_family,detected_case,count\n";
        for (const auto& [family, buckets] : diversity)
            for (const auto& [bucket, count] : buckets)
                out << family << ',' << csv_escape(bucket) << ',' << count << "\n";
    }

    nlohmann::json summary{{"model", inputs.model_id},
                           {"template_families", matrix.template_families},
                           {"detected_labels", matrix.detected_labels},
                           {"counts", matrix.counts},
                           {"normalized", normalized}};
    std::string json_path = (fs::path(out_dir) / "distribution_matrix.json").string();
    write_json(json_path, summary);
    return {counts_path, norm_path, case_path, json_path};
}

// --- toxicity proportions -----------------------------------------------

std::vector<std::string> toxicity_files(const ReportInputs& inputs, const std::string& out_dir) {
    if (inputs.toxicity.empty())
        raise(Status::missing_input, "toxicity_proportions needs disclosure evaluations");
    if (!inputs.lexicon) raise(Status::missing_input, "toxicity_proportions needs a lexicon");

    auto by_gender =
        toxic_proportions(inputs.toxicity, ToxicityGrouping::canonical_gender, *inputs.lexicon);
    auto by_group =
        toxic_proportions(inputs.toxicity, ToxicityGrouping::binary_vs_tgnb, *inputs.lexicon);

    std::string csv_path = (fs::path(out_dir) / "toxicity_proportions.csv").string();
    {
        auto out = open_out(csv_path);
        out << "grouping,group,n,n_toxic,proportion_toxic,n_term_present,proportion_term_present\n";
        for (const auto& row : by_gender.rows)
            out << "gender," << csv_escape(row.group) << ',' << row.n << ',' << row.n_toxic << ','
                << csv_number(row.proportion) << ',' << row.n_term_present << ','
                << csv_number(row.term_proportion) << "\n";
        for (const auto& row : by_group.rows)
            out << "binary_vs_tgnb," << csv_escape(row.group) << ',' << row.n << ',' << row.n_toxic
                << ',' << csv_number(row.proportion) << ',' << row.n_term_present << ','
                << csv_number(row.term_proportion) << "\n";
    }

    nlohmann::json summary{{"model", inputs.model_id},
                           {"by_gender", by_gender.to_json()},
                           {"by_group", by_group.to_json()}};
    auto add_tests = [&summary](const char* key, const ProportionTable& table, bool term_audit) {
        if (table.contingency.size() >= 2) {
            try {
                summary[std::string(key) + "_chi_square"] =
                    stats::chi_square(table.contingency).to_json();
            } catch (const Error& e) {
                summary[std::string(key) + "_chi_square_error"] = e.what();
            }
        }
        if (term_audit) {
            // term presence contingency over the same grouping
            std::vector<std::vector<double>> term_table;
            for (const auto& row : table.rows)
                term_table.push_back(
                    {double(row.n_term_present), double(row.n - row.n_term_present)});
            if (term_table.size() >= 2) {
                try {
                    summary[std::string(key) + "_term_chi_square"] =
                        stats::chi_square(term_table).to_json();
                } catch (const Error& e) {
                    summary[std::string(key) + "_term_chi_square_error"] = e.what();
                }
            }
        }
    };
    add_tests("by_gender", by_gender, false);
    add_tests("by_group", by_group, true);

    std::string json_path = (fs::path(out_dir) / "toxicity_proportions.json").string();
    write_json(json_path, summary);
    return {csv_path, json_path};
}

// --- toxic diff summary ---------------------------------------------------

std::vector<std::string> toxic_diff_files(const ReportInputs& inputs, const std::string& out_dir) {
    if (inputs.toxicity.empty())
        raise(Status::missing_input, "toxic_diff_summary needs disclosure evaluations");

    auto summary = toxic_diff_summary(inputs.toxicity);
    std::string csv_path = (fs::path(out_dir) / "toxic_diff_summary.csv").string();
    {
        auto out = open_out(csv_path);
        out << "form_id,group,n_pairs,mean_static,mean_dynamic,mean_diff,median_diff,"
               "share_negative,mwu_u,mwu_p\n";
        for (const auto& row : summary.rows) {
            out << row.form_id << ',' << row.group << ',' << row.n_pairs << ','
                << csv_number(row.mean_static) << ',' << csv_number(row.mean_dynamic) << ','
                << csv_number(row.mean_diff) << ',' << csv_number(row.median_diff) << ','
                << csv_number(row.share_negative) << ','
                << (row.mwu ? csv_number(row.mwu->statistic) : "") << ','
                << (row.mwu ? csv_number(row.mwu->p_value) : "") << "\n";
        }
    }
    std::string json_path = (fs::path(out_dir) / "toxic_diff_summary.json").string();
    write_json(json_path, nlohmann::json{{"model", inputs.model_id},
                                         {"summary", summary.to_json()}});
    return {csv_path, json_path};
}

} // namespace

std::vector<std::string> emit_report(ReportKind kind, const ReportInputs& inputs,
                                     const std::string& out_dir) {
    fs::create_directories(out_dir);
    switch (kind) {
        case ReportKind::consistency_table: return consistency_files(inputs, out_dir);
        case ReportKind::antecedent_table: return antecedent_files(inputs, out_dir);
        case ReportKind::distribution_matrix: return matrix_files(inputs, out_dir);
        case ReportKind::toxicity_proportions: return toxicity_files(inputs, out_dir);
        case ReportKind::toxic_diff_summary: return toxic_diff_files(inputs, out_dir);
    }
    raise(Status::invalid_argument, "unknown report kind");
}

void render_svg(ReportKind kind, const ReportInputs& inputs, const std::string& out_svg) {
    auto out = open_out(out_svg);
    if (kind == ReportKind::distribution_matrix) {
        if (!inputs.lexicon || inputs.evals.empty())
            raise(Status::missing_input, "matrix plot needs misgendering evaluations");
        auto matrix = pronoun_distribution(inputs.evals, *inputs.lexicon);
        auto norm = matrix.row_normalized();
        const int cell = 48, left = 90, top = 60;
        int width = left + cell * int(matrix.detected_labels.size()) + 20;
        int height = top + cell * int(matrix.template_families.size()) + 20;
        out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
            << height << "\">\n";
        for (size_t c = 0; c < matrix.detected_labels.size(); ++c)
            out << "<text x=\"" << left + int(c) * cell + cell / 2 << "\" y=\"" << top - 8
                << "\" text-anchor=\"middle\" font-size=\"11\">" << matrix.detected_labels[c]
                << "</text>\n";
        for (size_t r = 0; r < matrix.template_families.size(); ++r) {
            out << "<text x=\"" << left - 6 << "\" y=\"" << top + int(r) * cell + cell / 2 + 4
                << "\" text-anchor=\"end\" font-size=\"11\">" << matrix.template_families[r]
                << "</text>\n";
            for (size_t c = 0; c < norm[r].size(); ++c) {
                int shade = int(255.0 * (1.0 - norm[r][c]));
                out << "<rect x=\"" << left + int(c) * cell << "\" y=\"" << top + int(r) * cell
                    << "\" width=\"" << cell << "\" height=\"" << cell << "\" fill=\"rgb(" << shade
                    << ',' << shade << ",255)\" stroke=\"#999\"/>\n";
                out << "<text x=\"" << left + int(c) * cell + cell / 2 << "\" y=\""
                    << top + int(r) * cell + cell / 2 + 4
                    << "\" text-anchor=\"middle\" font-size=\"10\">" << csv_number(norm[r][c])
                    << "</text>\n";
            }
        }
        out << "</svg>\n";
        return;
    }
    if (kind == ReportKind::toxicity_proportions) {
        if (!inputs.lexicon || inputs.toxicity.empty())
            raise(Status::missing_input, "toxicity plot needs disclosure evaluations");
        auto table =
            toxic_proportions(inputs.toxicity, ToxicityGrouping::canonical_gender, *inputs.lexicon);
        const int bar_h = 22, left = 180, top = 30, bar_max = 420;
        int height = top + bar_h * int(table.rows.size()) + 20;
        out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << left + bar_max + 80
            << "\" height=\"" << height << "\">\n";
        for (size_t i = 0; i < table.rows.size(); ++i) {
            const auto& row = table.rows[i];
            int y = top + int(i) * bar_h;
            int w = int(row.proportion * bar_max);
            out << "<text x=\"" << left - 6 << "\" y=\"" << y + bar_h - 8
                << "\" text-anchor=\"end\" font-size=\"11\">" << row.group << "</text>\n";
            out << "<rect x=\"" << left << "\" y=\"" << y << "\" width=\"" << std::max(w, 1)
                << "\" height=\"" << bar_h - 6 << "\" fill=\"#4466cc\"/>\n";
            out << "<text x=\"" << left + w + 5 << "\" y=\"" << y + bar_h - 8
                << "\" font-size=\"10\">" << csv_number(row.proportion) << "</text>\n";
        }
        out << "</svg>\n";
        return;
    }
    raise(Status::invalid_argument,
          std::string("no plot renderer for report kind ") + report_kind_name(kind));
}

} // namespace genaff
