#include "genaff.h"

#include "genaff/lexicon.hpp"
#include "genaff/misgender_eval.hpp"
#include "genaff/pipeline.hpp"
#include "genaff/run_store.hpp"
#include "genaff/textutil.hpp"

#include <cstring>
#include <string>
#include <vector>

namespace {

thread_local std::string g_last_error;

genaff_status status_of(const genaff::Error& e) {
    switch (e.status()) {
        case genaff::Status::ok: return GENAFF_OK;
        case genaff::Status::invalid_argument: return GENAFF_ERR_INVALID_ARGUMENT;
        case genaff::Status::io: return GENAFF_ERR_IO;
        case genaff::Status::parse: return GENAFF_ERR_PARSE;
        case genaff::Status::validation: return GENAFF_ERR_VALIDATION;
        case genaff::Status::endpoint: return GENAFF_ERR_ENDPOINT;
        case genaff::Status::missing_input: return GENAFF_ERR_MISSING_INPUT;
        case genaff::Status::internal: return GENAFF_ERR_INTERNAL;
    }
    return GENAFF_ERR_INTERNAL;
}

template <typename Fn>
genaff_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return GENAFF_OK;
    } catch (const genaff::Error& e) {
        g_last_error = e.what();
        return status_of(e);
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return GENAFF_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return GENAFF_ERR_INTERNAL;
    }
}

genaff_status fail(genaff_status code, const char* message) {
    g_last_error = message;
    return code;
}

bool copy_out(const std::string& value, char* buf, size_t bufsize) {
    if (!buf || bufsize == 0) return false;
    if (value.size() + 1 > bufsize) return false;
    std::memcpy(buf, value.c_str(), value.size() + 1);
    return true;
}

std::string arg_or(const char* value, const char* fallback_value = "") {
    if (!value) return fallback_value;
    return value;
}

std::string resolve_lexicon_path(const char* path) {
    std::string p = arg_or(path);
    if (p.empty() || p == "default") return genaff::default_lexicon_path();
    return p;
}

genaff::pipeline::SampleOpts sample_opts(const genaff_sample_opts* sample) {
    genaff::pipeline::SampleOpts opts;
    if (sample) {
        opts.sample = sample->sample;
        opts.seed = uint64_t(sample->seed);
    }
    return opts;
}

} // namespace

struct genaff_lexicon {
    genaff::Lexicon impl;
};

struct genaff_tokens {
    std::vector<std::string> tokens;
};

extern "C" {

const char* genaff_version(void) {
    static std::string version = genaff::toolkit_version();
    return version.c_str();
}

const char* genaff_last_error(void) { return g_last_error.c_str(); }

genaff_status genaff_lexicon_open(const char* path, genaff_lexicon** out) {
    if (!out) return fail(GENAFF_ERR_INVALID_ARGUMENT, "out handle is NULL");
    *out = nullptr;
    return guarded([&] {
        auto* handle = new genaff_lexicon{genaff::Lexicon::load(resolve_lexicon_path(path))};
        *out = handle;
    });
}

void genaff_lexicon_close(genaff_lexicon* lexicon) { delete lexicon; }

int genaff_lexicon_family_count(const genaff_lexicon* lexicon) {
    if (!lexicon) return -1;
    return int(lexicon->impl.families().size());
}

genaff_status genaff_lexicon_family_name(const genaff_lexicon* lexicon, int index, char* buf,
                                         size_t bufsize) {
    if (!lexicon) return fail(GENAFF_ERR_INVALID_ARGUMENT, "lexicon handle is NULL");
    if (index < 0 || size_t(index) >= lexicon->impl.families().size())
        return fail(GENAFF_ERR_INVALID_ARGUMENT, "family index out of range");
    if (!copy_out(lexicon->impl.families()[size_t(index)].family, buf, bufsize))
        return fail(GENAFF_ERR_INVALID_ARGUMENT, "buffer too small");
    return GENAFF_OK;
}

int genaff_family_of(const genaff_lexicon* lexicon, const char* token, char* family,
                     size_t family_size, char* case_bucket, size_t case_size) {
    if (!lexicon || !token) {
        g_last_error = "lexicon/token is NULL";
        return -1;
    }
    auto match = lexicon->impl.family_of(token);
    if (!match) return 0;
    if (family && !copy_out(match->family, family, family_size)) {
        g_last_error = "family buffer too small";
        return -1;
    }
    if (case_bucket && !copy_out(genaff::case_bucket_name(match->cases), case_bucket, case_size)) {
        g_last_error = "case buffer too small";
        return -1;
    }
    return 1;
}

genaff_status genaff_normalize_gender(const genaff_lexicon* lexicon, const char* raw,
                                      char* canonical, size_t canonical_size, char* group,
                                      size_t group_size, int* curated) {
    if (!lexicon || !raw) return fail(GENAFF_ERR_INVALID_ARGUMENT, "lexicon/raw is NULL");
    if (!*raw) return fail(GENAFF_ERR_INVALID_ARGUMENT, "raw gender label is empty");
    return guarded([&] {
        auto label = lexicon->impl.normalize_gender(raw);
        if (canonical && !copy_out(label.canonical, canonical, canonical_size))
            genaff::raise(genaff::Status::invalid_argument, "canonical buffer too small");
        if (group && !copy_out(genaff::gender_group_name(label.group), group, group_size))
            genaff::raise(genaff::Status::invalid_argument, "group buffer too small");
        if (curated) *curated = label.curated ? 1 : 0;
    });
}

genaff_status genaff_tokenize(const char* text, genaff_tokens** out) {
    if (!out) return fail(GENAFF_ERR_INVALID_ARGUMENT, "out handle is NULL");
    *out = nullptr;
    if (!text) return fail(GENAFF_ERR_INVALID_ARGUMENT, "text is NULL");
    return guarded([&] { *out = new genaff_tokens{genaff::tokenize(text)}; });
}

size_t genaff_tokens_count(const genaff_tokens* tokens) {
    return tokens ? tokens->tokens.size() : 0;
}

const char* genaff_tokens_get(const genaff_tokens* tokens, size_t index) {
    if (!tokens || index >= tokens->tokens.size()) return nullptr;
    return tokens->tokens[index].c_str();
}

void genaff_tokens_free(genaff_tokens* tokens) { delete tokens; }

genaff_status genaff_generate_prompts(const char* lexicon_path, const char* templates_path,
                                      const char* set_name, const char* out_jsonl,
                                      const genaff_sample_opts* sample, const char* run_dir,
                                      uint64_t* count_out) {
    if (!set_name || !out_jsonl)
        return fail(GENAFF_ERR_INVALID_ARGUMENT, "set_name/out_jsonl is NULL");
    return guarded([&] {
        size_t count = genaff::pipeline::generate_prompts(
            resolve_lexicon_path(lexicon_path), arg_or(templates_path), set_name, out_jsonl,
            sample_opts(sample), arg_or(run_dir));
        if (count_out) *count_out = count;
    });
}

genaff_status genaff_run_generation(const char* prompts_jsonl, const char* model_spec,
                                    const char* config_path, const char* lexicon_path,
                                    const char* out_jsonl, const genaff_generate_opts* opts,
                                    const genaff_sample_opts* sample, const char* run_dir,
                                    uint64_t* count_out) {
    if (!prompts_jsonl || !model_spec || !out_jsonl)
        return fail(GENAFF_ERR_INVALID_ARGUMENT, "prompts/model/out is NULL");
    return guarded([&] {
        genaff::pipeline::GenerateOpts gen;
        if (opts) {
            if (opts->max_new_tokens > 0) gen.decode.max_new_tokens = opts->max_new_tokens;
            if (opts->top_k >= 0) gen.decode.top_k = opts->top_k;
            if (opts->top_p > 0.0) gen.decode.top_p = opts->top_p;
            if (opts->has_seed) gen.decode.seed = opts->seed;
            if (opts->workers > 0) gen.workers = opts->workers;
            if (opts->cache_path) gen.cache_path = opts->cache_path;
            if (opts->retry_attempts > 0) gen.retry.max_attempts = opts->retry_attempts;
            if (opts->retry_base_ms > 0.0) gen.retry.base_delay_ms = opts->retry_base_ms;
            if (opts->rate_per_sec > 0.0) {
                gen.rate_per_sec = opts->rate_per_sec;
                gen.rate_burst = opts->rate_per_sec * 2.0;
            }
        }
        size_t count = genaff::pipeline::run_generation(
            prompts_jsonl, model_spec, arg_or(config_path), resolve_lexicon_path(lexicon_path),
            out_jsonl, gen, sample_opts(sample), arg_or(run_dir));
        if (count_out) *count_out = count;
    });
}

genaff_status genaff_score_perplexity_file(const char* prompts_jsonl, const char* model_spec,
                                           const char* config_path, const char* lexicon_path,
                                           const char* out_jsonl,
                                           const genaff_sample_opts* sample, const char* run_dir,
                                           uint64_t* count_out) {
    if (!prompts_jsonl || !model_spec || !out_jsonl)
        return fail(GENAFF_ERR_INVALID_ARGUMENT, "prompts/model/out is NULL");
    return guarded([&] {
        size_t count = genaff::pipeline::score_perplexity_file(
            prompts_jsonl, model_spec, arg_or(config_path), resolve_lexicon_path(lexicon_path),
            out_jsonl, sample_opts(sample), arg_or(run_dir));
        if (count_out) *count_out = count;
    });
}

genaff_status genaff_evaluate_misgendering(const char* generations_jsonl,
                                           const char* lexicon_path, const char* out_jsonl,
                                           const char* report_dir, int strip_echo,
                                           int count_no_pronoun, const char* perplexity_jsonl,
                                           const char* run_dir, uint64_t* count_out) {
    if (!generations_jsonl || !out_jsonl)
        return fail(GENAFF_ERR_INVALID_ARGUMENT, "generations/out is NULL");
    return guarded([&] {
        genaff::pipeline::MisgenderEvalOpts opts;
        opts.strip_echo = strip_echo != 0;
        opts.count_no_pronoun = count_no_pronoun != 0;
        opts.perplexity_jsonl = arg_or(perplexity_jsonl);
        size_t count = genaff::pipeline::evaluate_misgendering(
            generations_jsonl, resolve_lexicon_path(lexicon_path), out_jsonl, arg_or(report_dir),
            opts, arg_or(run_dir));
        if (count_out) *count_out = count;
    });
}

genaff_status genaff_evaluate_disclosure(const char* generations_jsonl,
                                         const char* toxicity_endpoint, const char* lexicon_path,
                                         const char* out_jsonl, const char* report_dir,
                                         int strip_echo, const char* run_dir,
                                         uint64_t* count_out) {
    if (!generations_jsonl || !toxicity_endpoint || !out_jsonl)
        return fail(GENAFF_ERR_INVALID_ARGUMENT, "generations/endpoint/out is NULL");
    return guarded([&] {
        genaff::pipeline::DisclosureEvalOpts opts;
        opts.strip_echo = strip_echo != 0;
        size_t count = genaff::pipeline::evaluate_disclosure(
            generations_jsonl, toxicity_endpoint, resolve_lexicon_path(lexicon_path), out_jsonl,
            arg_or(report_dir), opts, arg_or(run_dir));
        if (count_out) *count_out = count;
    });
}

genaff_status genaff_stats(const char* evals_jsonl, const char* annotations_csv,
                           const char* toxicity_jsonl, const char* out_dir,
                           const char* run_dir) {
    if (!out_dir) return fail(GENAFF_ERR_INVALID_ARGUMENT, "out_dir is NULL");
    return guarded([&] {
        genaff::pipeline::run_stats(arg_or(evals_jsonl), arg_or(annotations_csv),
                                    arg_or(toxicity_jsonl), out_dir, arg_or(run_dir));
    });
}

genaff_status genaff_report(const char* run_dir, const char* kind, const char* out_dir,
                            const char* lexicon_path, int seal) {
    if (!run_dir || !kind) return fail(GENAFF_ERR_INVALID_ARGUMENT, "run_dir/kind is NULL");
    return guarded([&] {
        genaff::pipeline::emit_reports(run_dir, kind, arg_or(out_dir),
                                       resolve_lexicon_path(lexicon_path));
        if (seal) genaff::RunStore::open(run_dir).seal();
    });
}

genaff_status genaff_plot(const char* run_dir, const char* kind, const char* out_svg,
                          const char* lexicon_path) {
    if (!run_dir || !kind || !out_svg)
        return fail(GENAFF_ERR_INVALID_ARGUMENT, "run_dir/kind/out_svg is NULL");
    return guarded([&] {
        genaff::pipeline::plot(run_dir, kind, out_svg, resolve_lexicon_path(lexicon_path));
    });
}

genaff_status genaff_perplexity(const double* logprobs, size_t n, double* out) {
    if (!logprobs || !out) return fail(GENAFF_ERR_INVALID_ARGUMENT, "logprobs/out is NULL");
    return guarded([&] { *out = genaff::perplexity_from_logprobs({logprobs, n}); });
}

genaff_status genaff_spearman(const double* x, const double* y, size_t n, double* rho,
                              double* p_value) {
    if (!x || !y) return fail(GENAFF_ERR_INVALID_ARGUMENT, "x/y is NULL");
    return guarded([&] {
        auto result = genaff::stats::spearman_rho({x, n}, {y, n});
        if (rho) *rho = result.statistic;
        if (p_value) *p_value = result.p_value;
    });
}

genaff_status genaff_mann_whitney(const double* a, size_t n_a, const double* b, size_t n_b,
                                  double* u, double* p_value) {
    if (!a || !b) return fail(GENAFF_ERR_INVALID_ARGUMENT, "a/b is NULL");
    return guarded([&] {
        auto result = genaff::stats::mann_whitney_u({a, n_a}, {b, n_b});
        if (u) *u = result.statistic;
        if (p_value) *p_value = result.p_value;
    });
}

genaff_status genaff_kruskal_wallis(const double* values, const size_t* group_sizes,
                                    size_t n_groups, double* h, double* p_value) {
    if (!values || !group_sizes)
        return fail(GENAFF_ERR_INVALID_ARGUMENT, "values/group_sizes is NULL");
    return guarded([&] {
        std::vector<std::vector<double>> groups;
        size_t offset = 0;
        for (size_t g = 0; g < n_groups; ++g) {
            groups.emplace_back(values + offset, values + offset + group_sizes[g]);
            offset += group_sizes[g];
        }
        auto result = genaff::stats::kruskal_wallis(groups);
        if (h) *h = result.statistic;
        if (p_value) *p_value = result.p_value;
    });
}

genaff_status genaff_chi_square(const double* counts, size_t rows, size_t cols, double* statistic,
                                double* p_value) {
    if (!counts) return fail(GENAFF_ERR_INVALID_ARGUMENT, "counts is NULL");
    return guarded([&] {
        std::vector<std::vector<double>> table(rows, std::vector<double>(cols));
        for (size_t r = 0; r < rows; ++r)
            for (size_t c = 0; c < cols; ++c) table[r][c] = counts[r * cols + c];
        auto result = genaff::stats::chi_square(table);
        if (statistic) *statistic = result.statistic;
        if (p_value) *p_value = result.p_value;
    });
}

genaff_status genaff_krippendorff_alpha(const double* values, const uint8_t* present,
                                        size_t n_coders, size_t n_items, int ordinal,
                                        double* alpha) {
    if (!values || !present || !alpha)
        return fail(GENAFF_ERR_INVALID_ARGUMENT, "values/present/alpha is NULL");
    return guarded([&] {
        std::vector<std::vector<std::optional<double>>> matrix(
            n_coders, std::vector<std::optional<double>>(n_items));
        for (size_t c = 0; c < n_coders; ++c)
            for (size_t i = 0; i < n_items; ++i)
                if (present[c * n_items + i]) matrix[c][i] = values[c * n_items + i];
        *alpha = genaff::stats::krippendorff_alpha(
            matrix, ordinal ? genaff::stats::AlphaLevel::ordinal
                            : genaff::stats::AlphaLevel::nominal);
    });
}

} // extern "C"
