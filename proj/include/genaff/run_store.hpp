#pragma once

#include "genaff/error.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace genaff {

// Append-only record of a pipeline run: one manifest per run directory with
// input digests recorded per stage. Timestamps live here and only here.
class RunStore {
public:
    static RunStore open(const std::string& dir, const std::string& model_id = "");

    const std::string& dir() const { return dir_; }
    std::string path(const std::string& filename) const;

    void record_stage(const std::string& stage, const nlohmann::json& inputs,
                      const nlohmann::json& outputs, const nlohmann::json& config);
    void seal();
    bool sealed() const;

    std::string model_id() const;
    void set_model_id(const std::string& model_id);

    const nlohmann::json& manifest() const { return manifest_; }

    // {"path": ..., "sha256": ...}; digest taken before the stage runs.
    static nlohmann::json file_digest(const std::string& path);

    // Conventional file names inside a run directory.
    static constexpr const char* kPrompts = "prompts.jsonl";
    static constexpr const char* kGenerations = "generations.jsonl";
    static constexpr const char* kPerplexity = "perplexity.jsonl";
    static constexpr const char* kEvals = "evals.jsonl";
    static constexpr const char* kToxicity = "toxicity.jsonl";
    static constexpr const char* kAnnotations = "annotations.csv";
    static constexpr const char* kReports = "reports";
    static constexpr const char* kStats = "stats";

private:
    void save() const;

    std::string dir_;
    nlohmann::json manifest_;
};

// Proportional per-stratum uniform sampling, deterministic under seed, output
// in input order. sample_n >= population returns everything.
std::vector<size_t> stratified_sample_indices(const std::vector<std::string>& strata,
                                              size_t sample_n, uint64_t seed);

std::string toolkit_version();

} // namespace genaff
