#pragma once

#include "genaff/gen_client.hpp"
#include "genaff/report.hpp"
#include "genaff/run_store.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace genaff::pipeline {

struct SampleOpts {
    uint64_t sample = 0; // 0 = keep everything
    uint64_t seed = 0;
};

struct GenerateOpts {
    DecodeConfig decode;
    int workers = 1;
    std::string cache_path; // empty = no cache
    RetryPolicy retry;
    double rate_per_sec = 0.0; // 0 = unlimited
    double rate_burst = 0.0;
};

// set_name: misgendering | disclosure | static. Returns record count.
size_t generate_prompts(const std::string& lexicon_path, const std::string& templates_path,
                        const std::string& set_name, const std::string& out_jsonl,
                        const SampleOpts& sample, const std::string& run_dir = "");

// model_spec: "mock[:k=v,...]" or a model id resolved in config_path's
// endpoints section.
size_t run_generation(const std::string& prompts_jsonl, const std::string& model_spec,
                      const std::string& config_path, const std::string& lexicon_path,
                      const std::string& out_jsonl, const GenerateOpts& opts,
                      const SampleOpts& sample, const std::string& run_dir = "");

size_t score_perplexity_file(const std::string& prompts_jsonl, const std::string& model_spec,
                             const std::string& config_path, const std::string& lexicon_path,
                             const std::string& out_jsonl, const SampleOpts& sample,
                             const std::string& run_dir = "");

struct MisgenderEvalOpts {
    bool strip_echo = true;
    // Count no_pronoun records in consistency denominators (default keeps
    // them out and reports their rate separately).
    bool count_no_pronoun = false;
    std::string perplexity_jsonl; // optional join on prompt_id
};

size_t evaluate_misgendering(const std::string& generations_jsonl,
                             const std::string& lexicon_path, const std::string& out_jsonl,
                             const std::string& report_dir, const MisgenderEvalOpts& opts,
                             const std::string& run_dir = "");

struct DisclosureEvalOpts {
    bool strip_echo = true;
};

size_t evaluate_disclosure(const std::string& generations_jsonl,
                           const std::string& toxicity_endpoint,
                           const std::string& lexicon_path, const std::string& out_jsonl,
                           const std::string& report_dir, const DisclosureEvalOpts& opts,
                           const std::string& run_dir = "");

// Full statistical battery over whatever inputs are present.
void run_stats(const std::string& evals_jsonl, const std::string& annotations_csv,
               const std::string& toxicity_jsonl, const std::string& out_dir,
               const std::string& run_dir = "");

// kind: a report kind name or "all". Reads conventional file names from the
// run directory; returns written paths.
std::vector<std::string> emit_reports(const std::string& run_dir, const std::string& kind,
                                      const std::string& out_dir,
                                      const std::string& lexicon_path = "");

void plot(const std::string& run_dir, const std::string& kind, const std::string& out_svg,
          const std::string& lexicon_path = "");

Endpoint* make_endpoint(const std::string& model_spec, const std::string& config_path,
                        const Lexicon& lexicon, std::unique_ptr<Endpoint>& holder);

} // namespace genaff::pipeline
