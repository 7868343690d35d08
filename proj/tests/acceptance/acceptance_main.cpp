// Acceptance suite: exercises every headline requirement end to end and
// prints one PASS/FAIL line per criterion.

#include <genaff.h>

#include "genaff/disclosure_eval.hpp"
#include "genaff/jsonl.hpp"
#include "genaff/misgender_eval.hpp"
#include "genaff/pipeline.hpp"
#include "genaff/prompt_factory.hpp"
#include "genaff/run_store.hpp"
#include "genaff/stats.hpp"
#include "reference_stats.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <unistd.h>

using namespace genaff;
namespace fs = std::filesystem;

namespace {

std::string g_data_dir = GENAFF_TEST_DATA_DIR;
std::string g_fixture_dir = GENAFF_TEST_FIXTURE_DIR;

std::string lexicon_path() { return g_data_dir + "/lexicon.json"; }
std::string templates_path() { return g_data_dir + "/misgendering_templates.txt"; }

struct Outcome {
    bool pass = true;
    std::string detail;

    void fail(const std::string& why) {
        pass = false;
        if (!detail.empty()) detail += "; ";
        detail += why;
    }
    void note(const std::string& info) {
        if (!detail.empty()) detail += "; ";
        detail += info;
    }
    void expect(bool ok, const std::string& why) {
        if (!ok) fail(why);
    }
};

double z99() { return 2.5758293035489004; } // two-sided 99% normal quantile

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

class TempTree {
public:
    TempTree() {
        root_ = fs::temp_directory_path() / ("genaff-acceptance-" + std::to_string(::getpid()));
        fs::remove_all(root_);
        fs::create_directories(root_);
    }
    ~TempTree() {
        std::error_code ec;
        fs::remove_all(root_, ec);
    }
    std::string file(const std::string& name) const { return (root_ / name).string(); }

private:
    fs::path root_;
};

// ---------------------------------------------------------------------------
// Criterion 1: prompt-count reproduction with the shipped inputs.
// ---------------------------------------------------------------------------
Outcome criterion_counts() {
    Outcome out;
    auto start = std::chrono::steady_clock::now();

    Lexicon lex = Lexicon::load(lexicon_path());
    auto templates = load_templates(templates_path());
    auto misgendering = build_misgendering_set(templates, lex);
    out.expect(misgendering.size() == 2880,
               "misgendering set has " + std::to_string(misgendering.size()) + ", expected 2880");

    std::map<std::string, size_t> per_family;
    std::map<std::string, size_t> per_kind;
    for (const auto& rec : misgendering) {
        per_family[*rec.pronoun_family]++;
        per_kind[antecedent_kind_name(*rec.antecedent_kind)]++;
    }
    for (const auto& [family, n] : per_family)
        out.expect(n == 480, family + " has " + std::to_string(n) + " prompts, expected 480");
    out.expect(per_family.size() == 6, "expected 6 pronoun families");
    for (const auto& [kind, n] : per_kind)
        out.expect(n == 720, kind + " has " + std::to_string(n) + " prompts, expected 720");
    out.expect(per_kind.size() == 4, "expected 4 antecedent kinds");

    out.expect(lex.names().size() == 1520,
               "names: " + std::to_string(lex.names().size()) + ", expected 1520");
    out.expect(lex.disclosure_forms().size() == 18,
               "forms: " + std::to_string(lex.disclosure_forms().size()) + ", expected 18");
    out.expect(lex.disclosure_genders().size() == 52,
               "genders: " + std::to_string(lex.disclosure_genders().size()) + ", expected 52");

    size_t disclosure_count = 0;
    build_disclosure_set(lex, [&disclosure_count](PromptRecord&&) { ++disclosure_count; });
    out.expect(disclosure_count == 1422720, "disclosure set has " +
                                                std::to_string(disclosure_count) +
                                                ", expected 1422720 = 52 x 18 x 1520");

    double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.expect(seconds < 30.0, "runtime " + fmt(seconds) + "s exceeds 30s");
    out.note("2880 misgendering + 1422720 disclosure prompts in " + fmt(seconds) + "s");
    return out;
}

// ---------------------------------------------------------------------------
// Criterion 2: 100% agreement with the hand-labeled fixture corpus.
// ---------------------------------------------------------------------------
Outcome criterion_fixture() {
    Outcome out;
    Lexicon lex = Lexicon::load(lexicon_path());

    size_t total = 0, agree = 0;
    std::set<std::string> families_seen;
    size_t echo_cases = 0, det_cases = 0, no_pronoun_cases = 0;

    for_each_jsonl(g_fixture_dir + "/misgender_fixture.jsonl", [&](const nlohmann::json& row) {
        ++total;
        GenerationRecord gen;
        gen.prompt_id = row.at("prompt_id").get<std::string>();
        gen.model_id = "fixture";
        gen.continuation = row.at("continuation").get<std::string>();
        gen.prompt.id = gen.prompt_id;
        gen.prompt.kind = PromptKind::misgendering;
        gen.prompt.text = row.at("prompt_text").get<std::string>();
        gen.prompt.pronoun_family = row.at("pronoun_family").get<std::string>();
        families_seen.insert(*gen.prompt.pronoun_family);

        const auto& expect = row.at("expect");
        auto eval = evaluate_generation(gen, lex);

        bool ok = consistency_name(eval.label.value) == expect.at("label").get<std::string>();
        if (expect.contains("detected_family"))
            ok = ok && eval.label.detected_family == expect["detected_family"].get<std::string>();
        else
            ok = ok && !eval.label.detected_family.has_value();
        if (expect.contains("detected_case"))
            ok = ok && eval.label.detected_case &&
                 case_bucket_name(*eval.label.detected_case) ==
                     expect["detected_case"].get<std::string>();
        ok = ok && eval.det_errors == expect.at("det_errors").get<size_t>();
        ok = ok && eval.echo_stripped == expect.at("echo_stripped").get<bool>();

        if (expect.at("echo_stripped").get<bool>()) ++echo_cases;
        if (expect.at("det_errors").get<size_t>() > 0) ++det_cases;
        if (expect.at("label") == "no_pronoun") ++no_pronoun_cases;

        if (ok) ++agree;
        else out.fail("disagrees on " + gen.prompt_id);
    });

    out.expect(total >= 60, "fixture has only " + std::to_string(total) + " cases");
    out.expect(families_seen.size() == 6, "fixture misses a pronoun family");
    out.expect(echo_cases >= 2, "fixture lacks echo cases");
    out.expect(det_cases >= 2, "fixture lacks determiner-preceded cases");
    out.expect(no_pronoun_cases >= 2, "fixture lacks no-pronoun cases");
    out.expect(agree == total,
               std::to_string(agree) + "/" + std::to_string(total) + " agreement");
    out.note(std::to_string(agree) + "/" + std::to_string(total) + " labels agree");
    return out;
}

// ---------------------------------------------------------------------------
// Criterion 3: mock-model oracle at rates {0, 0.1, 0.5, 1.0}, n = 10,000.
// ---------------------------------------------------------------------------
Outcome criterion_mock_oracle() {
    Outcome out;
    auto start = std::chrono::steady_clock::now();

    Lexicon lex = Lexicon::load(lexicon_path());
    auto templates = load_templates(templates_path());
    auto base = build_misgendering_set(templates, lex);

    const size_t n = 10000;
    std::vector<PromptRecord> prompts;
    prompts.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        PromptRecord rec = base[i % base.size()];
        rec.id += "#" + std::to_string(i / base.size());
        prompts.push_back(std::move(rec));
    }

    for (double rate : {0.0, 0.1, 0.5, 1.0}) {
        MockParams params;
        params.misgender_rate = rate;
        params.seed = 104729 + uint64_t(rate * 1000);

        size_t inconsistent = 0, labeled = 0;
        std::map<std::string, std::vector<double>> by_kind;
        for (const auto& prompt : prompts) {
            auto gen = mock_generate(prompt, lex, params);
            auto eval = evaluate_generation(gen, lex);
            if (eval.label.value == Consistency::no_pronoun) continue;
            ++labeled;
            double v = eval.label.value == Consistency::inconsistent ? 1.0 : 0.0;
            inconsistent += size_t(v);
            by_kind[antecedent_kind_name(*prompt.antecedent_kind)].push_back(v);
        }
        out.expect(labeled == n, "mock produced no_pronoun records");
        double measured = double(inconsistent) / double(labeled);

        if (rate == 0.0 || rate == 1.0) {
            out.expect(measured == rate, "rate " + fmt(rate) + " measured " + fmt(measured) +
                                             ", expected exact boundary");
        } else {
            double half = z99() * std::sqrt(rate * (1.0 - rate) / double(labeled));
            out.expect(std::fabs(measured - rate) <= half,
                       "rate " + fmt(rate) + " measured " + fmt(measured) + " outside 99% CI +-" +
                           fmt(half));
        }

        std::vector<std::vector<double>> groups;
        for (auto& [kind, values] : by_kind) groups.push_back(std::move(values));
        auto kw = stats::kruskal_wallis(groups);
        out.expect(kw.p_value > 0.01, "rate " + fmt(rate) + " grouped KW p " + fmt(kw.p_value) +
                                          " <= 0.01 despite group-independent mock");
    }

    double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.expect(seconds < 120.0, "runtime " + fmt(seconds) + "s exceeds 2min");
    out.note("4 rates x 10000 prompts in " + fmt(seconds) + "s");
    return out;
}

// ---------------------------------------------------------------------------
// Criterion 4: statistics cross-checked against independent references.
// ---------------------------------------------------------------------------
Outcome criterion_stats_crosscheck() {
    Outcome out;
    std::mt19937_64 rng(20260808);

    auto rand_values = [&rng](size_t n) {
        std::vector<double> v(n);
        for (auto& x : v) x = double(rng() % 12);
        return v;
    };
    auto is_constant = [](const std::vector<double>& v) {
        for (double x : v)
            if (x != v[0]) return false;
        return true;
    };
    auto stat_close = [](double a, double b) {
        return std::fabs(a - b) <= 1e-6 * std::max(1.0, std::max(std::fabs(a), std::fabs(b)));
    };
    auto p_close = [](double a, double b) { return std::fabs(a - b) <= 1e-4; };

    // spearman
    int done = 0, bad = 0;
    while (done < 100) {
        size_t n = 3 + rng() % 28;
        auto x = rand_values(n), y = rand_values(n);
        if (is_constant(x) || is_constant(y)) continue;
        auto mine = stats::spearman_rho(x, y);
        if (!stat_close(mine.statistic, refstats::spearman_rho(x, y))) ++bad;
        if (!p_close(mine.p_value, refstats::spearman_p(x, y))) ++bad;
        ++done;
    }
    out.expect(bad == 0, "spearman mismatches: " + std::to_string(bad));

    // kruskal-wallis
    bad = 0;
    for (int iter = 0; iter < 100; ++iter) {
        std::vector<std::vector<double>> groups;
        size_t k = 2 + rng() % 3;
        std::vector<double> pooled;
        for (size_t g = 0; g < k; ++g) {
            groups.push_back(rand_values(3 + rng() % 10));
            pooled.insert(pooled.end(), groups.back().begin(), groups.back().end());
        }
        if (is_constant(pooled)) continue;
        auto mine = stats::kruskal_wallis(groups);
        if (!stat_close(mine.statistic, refstats::kruskal_wallis_h(groups))) ++bad;
        if (!p_close(mine.p_value, refstats::kruskal_wallis_p(groups))) ++bad;
    }
    out.expect(bad == 0, "kruskal-wallis mismatches: " + std::to_string(bad));

    // mann-whitney
    bad = 0;
    for (int iter = 0; iter < 100; ++iter) {
        auto a = rand_values(2 + rng() % 15);
        auto b = rand_values(2 + rng() % 15);
        auto mine = stats::mann_whitney_u(a, b);
        if (!stat_close(mine.statistic, refstats::mann_whitney_u(a, b))) ++bad;
        std::vector<double> pooled(a.begin(), a.end());
        pooled.insert(pooled.end(), b.begin(), b.end());
        if (!is_constant(pooled) && !p_close(mine.p_value, refstats::mann_whitney_p(a, b))) ++bad;
    }
    out.expect(bad == 0, "mann-whitney mismatches: " + std::to_string(bad));

    // chi-square
    bad = 0;
    for (int iter = 0; iter < 100; ++iter) {
        size_t rows = 2 + rng() % 3, cols = 2 + rng() % 3;
        std::vector<std::vector<double>> table(rows, std::vector<double>(cols));
        for (auto& row : table)
            for (auto& cell : row) cell = double(1 + rng() % 60);
        auto mine = stats::chi_square(table);
        if (!stat_close(mine.statistic, refstats::chi_square_stat(table))) ++bad;
        if (!p_close(mine.p_value, refstats::chi_square_p(table))) ++bad;
    }
    out.expect(bad == 0, "chi-square mismatches: " + std::to_string(bad));

    // krippendorff
    bad = 0;
    done = 0;
    while (done < 100) {
        size_t coders = 2 + rng() % 3, items = 4 + rng() % 10;
        std::vector<std::vector<std::optional<double>>> matrix(
            coders, std::vector<std::optional<double>>(items));
        for (auto& row : matrix)
            for (auto& cell : row)
                if (rng() % 5 != 0) cell = double(1 + rng() % 5);
        try {
            double mine = stats::krippendorff_alpha(matrix, stats::AlphaLevel::nominal);
            double ref = refstats::krippendorff_alpha(matrix, false);
            if (!stat_close(mine, ref)) ++bad;
            double mine_ord = stats::krippendorff_alpha(matrix, stats::AlphaLevel::ordinal);
            double ref_ord = refstats::krippendorff_alpha(matrix, true);
            if (!stat_close(mine_ord, ref_ord)) ++bad;
        } catch (const Error&) {
            continue;
        } catch (const std::exception&) {
            continue;
        }
        ++done;
    }
    out.expect(bad == 0, "krippendorff mismatches: " + std::to_string(bad));

    // published worked example, nominal level
    {
        const std::optional<double> none = std::nullopt;
        std::vector<std::vector<std::optional<double>>> example = {
            {1, 2, 3, 3, 2, 1, 4, 1, 2, none, none, none},
            {1, 2, 3, 3, 2, 2, 4, 1, 2, 5, none, 3},
            {none, 3, 3, 3, 2, 3, 4, 2, 2, 5, 1, none},
            {1, 2, 3, 3, 2, 4, 4, 1, 2, 5, 1, none},
        };
        double alpha = stats::krippendorff_alpha(example, stats::AlphaLevel::nominal);
        out.expect(std::fabs(alpha - 113.0 / 152.0) < 1e-6,
                   "worked example alpha " + fmt(alpha) + " != " + fmt(113.0 / 152.0));
    }

    // Table-3-shaped metrics on the hand confusion matrix
    {
        std::vector<std::optional<bool>> tool, truth;
        auto add = [&](bool t, bool g, int n) {
            for (int i = 0; i < n; ++i) {
                tool.emplace_back(t);
                truth.emplace_back(g);
            }
        };
        add(true, true, 3);   // TP
        add(true, false, 1);  // FP
        add(false, true, 2);  // FN
        add(false, false, 4); // TN
        auto m = stats::tool_vs_truth(tool, truth);
        out.expect(m.precision == 0.75, "precision " + fmt(m.precision));
        out.expect(m.recall == 0.6, "recall " + fmt(m.recall));
        out.expect(std::fabs(m.f1 - 2.0 * 0.75 * 0.6 / 1.35) < 1e-12, "f1 " + fmt(m.f1));
        out.expect(m.accuracy == 0.7, "accuracy " + fmt(m.accuracy));
    }

    out.note("5 tests x 100 random datasets within 1e-6 / 1e-4");
    return out;
}

// ---------------------------------------------------------------------------
// Criterion 5: perplexity reproduces the analytic examples.
// ---------------------------------------------------------------------------
Outcome criterion_perplexity() {
    Outcome out;

    std::vector<double> certain(6, 0.0);
    double p1 = perplexity_from_logprobs(certain);
    out.expect(std::fabs(std::log(p1) - std::log(1.0)) < 1e-9, "certainty gives " + fmt(p1));

    for (size_t len : {1u, 4u, 9u}) {
        std::vector<double> halves(len, std::log(0.5));
        double p2 = perplexity_from_logprobs(halves);
        out.expect(std::fabs(std::log(p2) - std::log(2.0)) < 1e-9,
                   "uniform half at length " + std::to_string(len) + " gives " + fmt(p2));
    }

    std::vector<double> triple = {std::log(0.5), std::log(0.25), std::log(0.125)};
    double p3 = perplexity_from_logprobs(triple);
    out.expect(std::fabs(std::log(p3) - std::log(4.0)) < 1e-9,
               "(0.5, 0.25, 0.125) gives " + fmt(p3) + ", analytic value is 4");

    out.note("three analytic examples exact at 1e-9 on the log scale");
    return out;
}

// ---------------------------------------------------------------------------
// Criterion 6: directional ordering checks on a stratified 600-prompt sample.
// Live when GENAFF_ENDPOINT_URL / GENAFF_ENDPOINT_MODEL are set, otherwise
// backed by the graded mock so the harness itself stays verified.
// ---------------------------------------------------------------------------
Outcome criterion_directional() {
    Outcome out;
    auto lex = std::make_shared<const Lexicon>(Lexicon::load(lexicon_path()));
    auto templates = load_templates(templates_path());
    auto base = build_misgendering_set(templates, *lex);

    std::vector<std::string> strata;
    for (const auto& rec : base) strata.push_back(*rec.pronoun_family);
    auto keep = stratified_sample_indices(strata, 600, 13);
    std::vector<PromptRecord> sample;
    for (size_t i : keep) sample.push_back(base[i]);

    const char* url = std::getenv("GENAFF_ENDPOINT_URL");
    const char* model = std::getenv("GENAFF_ENDPOINT_MODEL");
    std::unique_ptr<Endpoint> endpoint;
    bool live = url && *url && model && *model;
    if (live) {
        HttpEndpointConfig config;
        config.base_url = url;
        config.model = model;
        if (const char* api = std::getenv("GENAFF_ENDPOINT_API")) config.api = api;
        endpoint = std::make_unique<HttpEndpoint>(config);
    } else {
        MockParams params;
        params.seed = 31337;
        // Table-3-like consistency profile: binary 0.82, they 0.46, neo 0.10.
        params.rate_by_family = {{"she", 0.18}, {"he", 0.18}, {"they", 0.54},
                                 {"ey", 0.90},  {"xe", 0.90}, {"fae", 0.90}};
        endpoint = std::make_unique<MockModel>(lex, params);
    }

    std::map<std::string, std::pair<size_t, size_t>> consistency; // group -> (consistent, labeled)
    std::map<std::string, std::pair<double, size_t>> perplexity;  // group -> (sum, n)
    for (const auto& prompt : sample) {
        auto gen = generate(prompt, DecodeConfig{}, *endpoint);
        auto eval = evaluate_generation(gen, *lex);
        std::string group = pronoun_group(*prompt.pronoun_family);
        if (eval.label.value != Consistency::no_pronoun) {
            auto& c = consistency[group];
            c.second++;
            if (eval.label.value == Consistency::consistent) c.first++;
        }
        double ppl = score_perplexity(prompt.text, *endpoint);
        auto& p = perplexity[group];
        p.first += ppl;
        p.second++;
    }

    auto rate_of = [&](const std::string& g) {
        auto [consistent, labeled] = consistency[g];
        return labeled ? double(consistent) / double(labeled) : 0.0;
    };
    auto ppl_of = [&](const std::string& g) {
        auto [sum, n] = perplexity[g];
        return n ? sum / double(n) : 0.0;
    };

    double c_binary = rate_of("binary"), c_they = rate_of("they"), c_neo = rate_of("neo");
    out.expect(c_binary > c_they && c_they > c_neo,
               "consistency ordering violated: binary " + fmt(c_binary) + ", they " +
                   fmt(c_they) + ", neo " + fmt(c_neo));

    double p_binary = ppl_of("binary"), p_they = ppl_of("they"), p_neo = ppl_of("neo");
    out.expect(p_neo > p_they && p_they > p_binary,
               "perplexity ordering violated: neo " + fmt(p_neo) + ", they " + fmt(p_they) +
                   ", binary " + fmt(p_binary));

    out.note(std::string(live ? "live endpoint" : "mock-backed (set GENAFF_ENDPOINT_URL and "
                                                  "GENAFF_ENDPOINT_MODEL for a live run)") +
             "; consistency " + fmt(c_binary) + "/" + fmt(c_they) + "/" + fmt(c_neo) +
             ", perplexity " + fmt(p_binary) + "/" + fmt(p_they) + "/" + fmt(p_neo));
    return out;
}

// ---------------------------------------------------------------------------
// Criterion 7: end-to-end smoke through the C API on a 1,000-prompt sample.
// ---------------------------------------------------------------------------
Outcome criterion_smoke() {
    Outcome out;
    auto start = std::chrono::steady_clock::now();

    TempTree tmp;
    std::string run = tmp.file("run");
    fs::create_directories(run);
    std::string mis_prompts = (fs::path(run) / RunStore::kPrompts).string();
    std::string disc_prompts = tmp.file("disclosure_prompts.jsonl");
    std::string mis_generations = (fs::path(run) / RunStore::kGenerations).string();
    std::string disc_generations = tmp.file("disclosure_generations.jsonl");
    std::string evals = (fs::path(run) / RunStore::kEvals).string();
    std::string toxicity = (fs::path(run) / RunStore::kToxicity).string();

    auto check_status = [&out](genaff_status status, const std::string& stage) {
        if (status != GENAFF_OK)
            out.fail(stage + " failed: " + genaff_last_error());
        return status == GENAFF_OK;
    };

    uint64_t count = 0;
    genaff_sample_opts mis_sample{600, 21};
    if (!check_status(genaff_generate_prompts(lexicon_path().c_str(), templates_path().c_str(),
                                              "misgendering", mis_prompts.c_str(), &mis_sample,
                                              run.c_str(), &count),
                      "generate-prompts misgendering"))
        return out;
    out.expect(count == 600, "sampled " + std::to_string(count) + " misgendering prompts");

    genaff_sample_opts disc_sample{400, 22};
    if (!check_status(genaff_generate_prompts(lexicon_path().c_str(), nullptr, "disclosure",
                                              disc_prompts.c_str(), &disc_sample, nullptr,
                                              &count),
                      "generate-prompts disclosure"))
        return out;
    out.expect(count == 400, "sampled " + std::to_string(count) + " disclosure prompts");

    genaff_generate_opts gen{};
    gen.max_new_tokens = 100;
    gen.top_k = 50;
    gen.top_p = 0.95;
    gen.workers = 2;
    if (!check_status(genaff_run_generation(mis_prompts.c_str(), "mock:misgender=0.35,seed=77",
                                            nullptr, lexicon_path().c_str(),
                                            mis_generations.c_str(), &gen, nullptr, run.c_str(),
                                            &count),
                      "run-generation misgendering"))
        return out;
    out.expect(count == 600, "generated " + std::to_string(count));

    if (!check_status(genaff_run_generation(disc_prompts.c_str(), "mock:seed=78", nullptr,
                                            lexicon_path().c_str(), disc_generations.c_str(),
                                            &gen, nullptr, nullptr, &count),
                      "run-generation disclosure"))
        return out;

    if (!check_status(genaff_evaluate_misgendering(mis_generations.c_str(),
                                                   lexicon_path().c_str(), evals.c_str(), nullptr,
                                                   1, 0, nullptr, run.c_str(), &count),
                      "evaluate-misgendering"))
        return out;
    out.expect(count == 600, "evaluated " + std::to_string(count));

    if (!check_status(genaff_evaluate_disclosure(disc_generations.c_str(),
                                                 "mockrate:tgnb=0.06,binary=0.02,seed=5",
                                                 lexicon_path().c_str(), toxicity.c_str(),
                                                 nullptr, 1, run.c_str(), &count),
                      "evaluate-disclosure"))
        return out;
    out.expect(count == 400, "scored " + std::to_string(count));

    // Synthetic 3-coder annotations derived from the tool labels (one coder
    // flips every ninth item) so the agreement battery has input.
    std::string annotations = (fs::path(run) / RunStore::kAnnotations).string();
    {
        std::ofstream ann(annotations);
        ann << "prompt_id,annotator_id,consistency,relevance,coherence\n";
        size_t i = 0;
        for_each_jsonl(evals, [&](const nlohmann::json& row) {
            if (i >= 120) return;
            std::string label = row["label"] == "consistent" ? "yes"
                                : row["label"] == "inconsistent" ? "no"
                                                                 : "na";
            for (int coder = 0; coder < 3; ++coder) {
                std::string coder_label = label;
                if (coder == 2 && i % 9 == 0)
                    coder_label = label == "yes" ? "no" : "yes";
                ann << row["prompt_id"].get<std::string>() << ",a" << coder << ',' << coder_label
                    << ',' << (2 + (i + coder) % 3) << ',' << (3 + (i + coder) % 3) << "\n";
            }
            ++i;
        });
    }

    if (!check_status(genaff_stats(evals.c_str(), annotations.c_str(), toxicity.c_str(),
                                   (fs::path(run) / RunStore::kStats).string().c_str(),
                                   run.c_str()),
                      "stats"))
        return out;

    if (!check_status(genaff_report(run.c_str(), "all", nullptr, lexicon_path().c_str(), 0),
                      "report"))
        return out;

    for (const char* file :
         {"consistency_table.csv", "antecedent_table.csv", "distribution_matrix_counts.csv",
          "toxicity_proportions.csv", "toxic_diff_summary.csv"})
        out.expect(fs::exists(fs::path(run) / "reports" / file),
                   std::string("missing report file ") + file);

    // Invariants over the produced records.
    std::set<std::string> prompt_ids;
    for_each_jsonl(mis_prompts, [&](const nlohmann::json& row) {
        prompt_ids.insert(row.at("id").get<std::string>());
    });
    std::vector<EvalRecord> eval_records;
    for_each_jsonl(evals, [&](const nlohmann::json& row) {
        eval_records.push_back(EvalRecord::from_json(row));
    });
    size_t consistent = 0, inconsistent = 0, no_pronoun = 0;
    for (const auto& rec : eval_records) {
        out.expect(prompt_ids.count(rec.prompt_id) == 1,
                   "eval prompt_id chain broken: " + rec.prompt_id);
        switch (rec.label.value) {
            case Consistency::consistent: ++consistent; break;
            case Consistency::inconsistent: ++inconsistent; break;
            case Consistency::no_pronoun: ++no_pronoun; break;
        }
    }
    out.expect(consistent + inconsistent + no_pronoun == eval_records.size(),
               "partition law violated");

    Lexicon lex = Lexicon::load(lexicon_path());
    auto matrix = pronoun_distribution(eval_records, lex);
    std::map<std::string, long> family_counts;
    for (const auto& rec : eval_records) family_counts[*rec.prompt.pronoun_family]++;
    for (size_t r = 0; r < matrix.template_families.size(); ++r)
        out.expect(matrix.row_total(r) == family_counts[matrix.template_families[r]],
                   "matrix row sum mismatch for " + matrix.template_families[r]);
    for (const auto& row : matrix.row_normalized()) {
        double sum = 0.0;
        for (double v : row) sum += v;
        if (sum > 0.0)
            out.expect(std::fabs(sum - 1.0) < 1e-9, "normalized row does not sum to 1");
    }

    std::set<std::string> disc_ids;
    for_each_jsonl(disc_prompts, [&](const nlohmann::json& row) {
        disc_ids.insert(row.at("id").get<std::string>());
    });
    for_each_jsonl(toxicity, [&](const nlohmann::json& row) {
        auto rec = ToxicityRecord::from_json(row);
        out.expect(disc_ids.count(rec.prompt_id) == 1,
                   "toxicity prompt_id chain broken: " + rec.prompt_id);
        out.expect(rec.toxic == (rec.score > 0.5), "threshold law violated");
    });

    double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.expect(seconds < 60.0, "runtime " + fmt(seconds) + "s exceeds 1min");
    out.note("five report kinds + invariants on 1000 prompts in " + fmt(seconds) + "s");
    return out;
}

} // namespace

int main() {
    if (const char* env = std::getenv("GENAFF_DATA_DIR"); env && *env) g_data_dir = env;

    struct Criterion {
        int number;
        const char* name;
        std::function<Outcome()> run;
    };
    std::vector<Criterion> criteria = {
        {1, "prompt-count reproduction (2880 / 480 / 720; 1422720 = 52 x 18 x 1520)",
         criterion_counts},
        {2, "automatic tool agrees 100% with the hand-labeled fixture corpus",
         criterion_fixture},
        {3, "mock-model oracle within 99% binomial intervals; antecedent groups null",
         criterion_mock_oracle},
        {4, "statistics match independent references (1e-6 stats, 1e-4 p-values)",
         criterion_stats_crosscheck},
        {5, "perplexity reproduces the analytic examples (1e-9 log scale)",
         criterion_perplexity},
        {6, "directional orderings: consistency binary > they > neo, perplexity neo > they > binary",
         criterion_directional},
        {7, "end-to-end smoke on a 1000-prompt sample in under a minute",
         criterion_smoke},
    };

    int failures = 0;
    for (const auto& criterion : criteria) {
        Outcome outcome;
        try {
            outcome = criterion.run();
        } catch (const std::exception& e) {
            outcome.fail(std::string("exception: ") + e.what());
        }
        if (!outcome.pass) ++failures;
        std::printf("%s criterion %d: %s%s%s\n", outcome.pass ? "PASS" : "FAIL",
                    criterion.number, criterion.name,
                    outcome.detail.empty() ? "" : " -- ", outcome.detail.c_str());
        std::fflush(stdout);
    }
    if (failures)
        std::printf("%d of %zu criteria failed\n", failures, criteria.size());
    else
        std::printf("all %zu criteria passed\n", criteria.size());
    return failures == 0 ? 0 : 1;
}
