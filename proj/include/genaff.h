/*
 * genaff — misgendering and gender-disclosure toxicity evaluation for open
 * language generation, exposed as a C shared-library API.
 *
 * All functions return genaff_status (GENAFF_OK on success). On failure,
 * genaff_last_error() returns a thread-local message describing what went
 * wrong. Handles are opaque; free them with the matching *_close / *_free.
 */
#ifndef GENAFF_H
#define GENAFF_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define GENAFF_API __declspec(dllexport)
#else
#define GENAFF_API __attribute__((visibility("default")))
#endif

typedef enum genaff_status {
    GENAFF_OK = 0,
    GENAFF_ERR_INVALID_ARGUMENT = 1,
    GENAFF_ERR_IO = 2,
    GENAFF_ERR_PARSE = 3,
    GENAFF_ERR_VALIDATION = 4,
    GENAFF_ERR_ENDPOINT = 5,
    GENAFF_ERR_MISSING_INPUT = 6,
    GENAFF_ERR_INTERNAL = 7
} genaff_status;

GENAFF_API const char* genaff_version(void);

/* Thread-local message for the most recent failing call. */
GENAFF_API const char* genaff_last_error(void);

/* ------------------------------------------------------------------ */
/* lexicon                                                            */
/* ------------------------------------------------------------------ */

typedef struct genaff_lexicon genaff_lexicon;

/* path may be NULL or "default" to use $GENAFF_DATA_DIR/lexicon.json. */
GENAFF_API genaff_status genaff_lexicon_open(const char* path, genaff_lexicon** out);
GENAFF_API void genaff_lexicon_close(genaff_lexicon* lexicon);

GENAFF_API int genaff_lexicon_family_count(const genaff_lexicon* lexicon);
GENAFF_API genaff_status genaff_lexicon_family_name(const genaff_lexicon* lexicon, int index,
                                                    char* buf, size_t bufsize);

/* Returns 1 when the token is a pronoun form (family/case_bucket filled),
 * 0 when it is not, -1 on error. case_bucket uses names like
 * "accusative|genitive_attributive" for forms owned in several slots. */
GENAFF_API int genaff_family_of(const genaff_lexicon* lexicon, const char* token, char* family,
                                size_t family_size, char* case_bucket, size_t case_size);

/* group receives "binary" or "tgnb"; curated (may be NULL) receives 1 when
 * the canonical label is in the shipped curated set. */
GENAFF_API genaff_status genaff_normalize_gender(const genaff_lexicon* lexicon, const char* raw,
                                                 char* canonical, size_t canonical_size,
                                                 char* group, size_t group_size, int* curated);

/* ------------------------------------------------------------------ */
/* tokenization                                                       */
/* ------------------------------------------------------------------ */

typedef struct genaff_tokens genaff_tokens;

GENAFF_API genaff_status genaff_tokenize(const char* text, genaff_tokens** out);
GENAFF_API size_t genaff_tokens_count(const genaff_tokens* tokens);
GENAFF_API const char* genaff_tokens_get(const genaff_tokens* tokens, size_t index);
GENAFF_API void genaff_tokens_free(genaff_tokens* tokens);

/* ------------------------------------------------------------------ */
/* pipeline stages (JSONL in, JSONL/CSV out)                          */
/* ------------------------------------------------------------------ */

typedef struct genaff_sample_opts {
    uint64_t sample; /* 0 = keep everything */
    int64_t seed;
} genaff_sample_opts;

typedef struct genaff_generate_opts {
    int max_new_tokens; /* <= 0 -> default 100 */
    int top_k;          /* <  0 -> default 50  */
    double top_p;       /* <= 0 -> default 0.95 */
    int64_t seed;
    int has_seed;
    int workers;              /* <= 0 -> 1 */
    const char* cache_path;   /* NULL = no cache */
    int retry_attempts;       /* <= 0 -> 4 */
    double retry_base_ms;     /* <= 0 -> 250 */
    double rate_per_sec;      /* <= 0 -> unlimited */
} genaff_generate_opts;

/* set_name: "misgendering" | "disclosure" | "static".
 * templates_path may be NULL for the default template file. */
GENAFF_API genaff_status genaff_generate_prompts(const char* lexicon_path,
                                                 const char* templates_path, const char* set_name,
                                                 const char* out_jsonl,
                                                 const genaff_sample_opts* sample,
                                                 const char* run_dir, uint64_t* count_out);

/* model_spec: "mock[:k=v,...]" or a model id present in config_path's
 * endpoints section. */
GENAFF_API genaff_status genaff_run_generation(const char* prompts_jsonl, const char* model_spec,
                                               const char* config_path, const char* lexicon_path,
                                               const char* out_jsonl,
                                               const genaff_generate_opts* opts,
                                               const genaff_sample_opts* sample,
                                               const char* run_dir, uint64_t* count_out);

GENAFF_API genaff_status genaff_score_perplexity_file(const char* prompts_jsonl,
                                                      const char* model_spec,
                                                      const char* config_path,
                                                      const char* lexicon_path,
                                                      const char* out_jsonl,
                                                      const genaff_sample_opts* sample,
                                                      const char* run_dir, uint64_t* count_out);

/* perplexity_jsonl may be NULL; strip_echo: 0/1. count_no_pronoun controls
 * whether no-pronoun generations enter consistency denominators (default 0
 * keeps them out, reporting their rate separately). */
GENAFF_API genaff_status genaff_evaluate_misgendering(const char* generations_jsonl,
                                                      const char* lexicon_path,
                                                      const char* out_jsonl,
                                                      const char* report_dir, int strip_echo,
                                                      int count_no_pronoun,
                                                      const char* perplexity_jsonl,
                                                      const char* run_dir, uint64_t* count_out);

/* toxicity_endpoint: URL, "mock:<file>", or "mockrate:tgnb=..,binary=..". */
GENAFF_API genaff_status genaff_evaluate_disclosure(const char* generations_jsonl,
                                                    const char* toxicity_endpoint,
                                                    const char* lexicon_path,
                                                    const char* out_jsonl, const char* report_dir,
                                                    int strip_echo, const char* run_dir,
                                                    uint64_t* count_out);

GENAFF_API genaff_status genaff_stats(const char* evals_jsonl, const char* annotations_csv,
                                      const char* toxicity_jsonl, const char* out_dir,
                                      const char* run_dir);

/* kind: "all", a report kind name, or a table alias (amt, antecedent,
 * matrix, toxicity, toxic-diff). out_dir NULL -> <run>/reports. seal != 0
 * marks the run manifest immutable after emitting. */
GENAFF_API genaff_status genaff_report(const char* run_dir, const char* kind, const char* out_dir,
                                       const char* lexicon_path, int seal);

/* kind: "matrix" | "toxicity". */
GENAFF_API genaff_status genaff_plot(const char* run_dir, const char* kind, const char* out_svg,
                                     const char* lexicon_path);

/* ------------------------------------------------------------------ */
/* scalar statistics                                                  */
/* ------------------------------------------------------------------ */

GENAFF_API genaff_status genaff_perplexity(const double* logprobs, size_t n, double* out);

GENAFF_API genaff_status genaff_spearman(const double* x, const double* y, size_t n, double* rho,
                                         double* p_value);

GENAFF_API genaff_status genaff_mann_whitney(const double* a, size_t n_a, const double* b,
                                             size_t n_b, double* u, double* p_value);

/* values holds all groups back to back; group_sizes lists each length. */
GENAFF_API genaff_status genaff_kruskal_wallis(const double* values, const size_t* group_sizes,
                                               size_t n_groups, double* h, double* p_value);

/* counts is row-major rows x cols. */
GENAFF_API genaff_status genaff_chi_square(const double* counts, size_t rows, size_t cols,
                                           double* statistic, double* p_value);

/* values / present are row-major coders x items; present[i]=0 marks a
 * missing entry. ordinal: 0 = nominal metric, 1 = ordinal. */
GENAFF_API genaff_status genaff_krippendorff_alpha(const double* values, const uint8_t* present,
                                                   size_t n_coders, size_t n_items, int ordinal,
                                                   double* alpha);

#ifdef __cplusplus
}
#endif

#endif /* GENAFF_H */
