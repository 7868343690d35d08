#pragma once

#include "genaff/lexicon.hpp"
#include "genaff/prompt_factory.hpp"

#include <json.hpp>

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace genaff {

struct DecodeConfig {
    int max_new_tokens = 100;
    int top_k = 50;
    double top_p = 0.95;
    std::optional<int64_t> seed;

    void validate() const;
    nlohmann::json to_json() const;
    static DecodeConfig from_json(const nlohmann::json& j);
};

struct TokenLogprob {
    std::string token;
    double logprob; // natural log, <= 0
};

struct GenerationRecord {
    std::string prompt_id;
    std::string model_id;
    std::string continuation;
    bool echo_stripped = false;
    std::optional<std::vector<TokenLogprob>> token_logprobs;
    std::optional<std::string> created_at; // absent for deterministic endpoints
    DecodeConfig config;
    PromptRecord prompt;

    nlohmann::json to_json() const;
    static GenerationRecord from_json(const nlohmann::json& j);
};

struct CompletionResult {
    std::string text;
    std::optional<std::vector<TokenLogprob>> logprobs;
};

class Endpoint {
public:
    virtual ~Endpoint() = default;
    virtual std::string model_id() const = 0;
    virtual CompletionResult complete(const PromptRecord& prompt, const DecodeConfig& cfg) = 0;
    // Teacher-forced per-token log probabilities over the full text.
    virtual std::vector<TokenLogprob> score_tokens(const std::string& text) = 0;
    // Deterministic endpoints produce timestamp-free records.
    virtual bool deterministic() const { return false; }
};

struct RetryPolicy {
    int max_attempts = 4;
    double base_delay_ms = 250.0;
    double multiplier = 2.0;
};

// Token bucket. acquire() blocks until a token is available.
class RateLimiter {
public:
    RateLimiter(double rate_per_sec, double burst);

    void acquire();

    // Test seam: fake time source returning seconds.
    void set_clock(std::function<double()> now_seconds);
    double available() const;

private:
    void refill_locked(double now);

    mutable std::mutex mutex_;
    std::function<double()> now_;
    double rate_;
    double burst_;
    double tokens_;
    double last_;
};

// HTTP endpoint speaking the common completion / chat JSON shapes.
struct HttpEndpointConfig {
    std::string base_url;                // e.g. http://127.0.0.1:8080
    std::string model;                   // remote model name
    std::string api = "completion";      // completion | chat
    std::string completion_path = "/v1/completions";
    std::string chat_path = "/v1/chat/completions";
    std::string api_key_env;             // env var holding the bearer token
    double rate_per_sec = 2.0;
    double rate_burst = 4.0;
    double timeout_sec = 60.0;

    static HttpEndpointConfig from_json(const nlohmann::json& j);
};

class HttpEndpoint : public Endpoint {
public:
    explicit HttpEndpoint(HttpEndpointConfig config);
    ~HttpEndpoint() override;

    std::string model_id() const override { return config_.model; }
    CompletionResult complete(const PromptRecord& prompt, const DecodeConfig& cfg) override;
    std::vector<TokenLogprob> score_tokens(const std::string& text) override;

private:
    nlohmann::json post_json(const std::string& path, const nlohmann::json& body);

    HttpEndpointConfig config_;
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Deterministic pipeline oracle. The first pronoun of the continuation is in
// the prompt family with probability 1 - misgender_rate, otherwise in a
// uniformly drawn other family. Optional prompt echo and determiner-before-
// neopronoun insertion, all driven by (seed, prompt id).
struct MockParams {
    double misgender_rate = 0.0;
    double echo_rate = 0.0;
    double det_error_rate = 0.0;
    uint64_t seed = 0;
    // Per-family override of misgender_rate, e.g. {"xe", 0.9}.
    std::map<std::string, double> rate_by_family;
};

GenerationRecord mock_generate(const PromptRecord& prompt, const Lexicon& lexicon,
                               const MockParams& params, const DecodeConfig& cfg = {});

class MockModel : public Endpoint {
public:
    MockModel(std::shared_ptr<const Lexicon> lexicon, MockParams params);

    std::string model_id() const override;
    CompletionResult complete(const PromptRecord& prompt, const DecodeConfig& cfg) override;
    std::vector<TokenLogprob> score_tokens(const std::string& text) override;
    bool deterministic() const override { return true; }

    const MockParams& params() const { return params_; }

private:
    std::shared_ptr<const Lexicon> lexicon_;
    MockParams params_;
};

// Parses "mock:misgender=0.3,echo=0.1,det=0.05,seed=7[,binary=0.2,they=0.5,neo=0.9]".
MockParams parse_mock_spec(const std::string& spec, const Lexicon& lexicon);
bool is_mock_spec(const std::string& spec);

// On-disk content-addressed store. Concurrent readers, serialized writers.
class GenerationCache {
public:
    explicit GenerationCache(std::string path);

    static std::string key_for(const std::string& model_id, const std::string& prompt_text,
                               const DecodeConfig& cfg);

    std::optional<GenerationRecord> get(const std::string& key) const;
    void put(const std::string& key, const GenerationRecord& record);
    size_t size() const;

private:
    std::string path_;
    mutable std::shared_mutex mutex_;
    std::unordered_map<std::string, GenerationRecord> entries_;
};

GenerationRecord generate(const PromptRecord& prompt, const DecodeConfig& cfg, Endpoint& endpoint,
                          GenerationCache* cache = nullptr, const RetryPolicy& retry = {},
                          RateLimiter* limiter = nullptr);

// Bounded-parallel fan-out preserving input order in the result.
std::vector<GenerationRecord> generate_all(std::span<const PromptRecord> prompts,
                                           const DecodeConfig& cfg, Endpoint& endpoint,
                                           GenerationCache* cache, int workers,
                                           const RetryPolicy& retry = {},
                                           RateLimiter* limiter = nullptr);

// exp(-mean natural-log token probability).
double perplexity_from_logprobs(std::span<const double> logprobs);
double score_perplexity(const std::string& text, Endpoint& endpoint);

} // namespace genaff
