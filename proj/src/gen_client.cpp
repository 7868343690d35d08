#include "genaff/gen_client.hpp"

#include "genaff/jsonl.hpp"
#include "genaff/sha256.hpp"
#include "genaff/textutil.hpp"
#include "genaff/timeutil.hpp"

#include <httplib.h>

#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

namespace genaff {

namespace {

uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

// Engine output is standard-specified; the [0,1) mapping keeps draws
// identical across library implementations.
double uniform01(std::mt19937_64& rng) { return double(rng() >> 11) * 0x1.0p-53; }

bool transient_status(int code) { return code == 429 || (code >= 500 && code < 600); }

} // namespace

void DecodeConfig::validate() const {
    if (max_new_tokens < 0) raise(Status::invalid_argument, "max_new_tokens must be >= 0");
    if (top_k < 0) raise(Status::invalid_argument, "top_k must be >= 0");
    if (!(top_p > 0.0 && top_p <= 1.0)) raise(Status::invalid_argument, "top_p must be in (0, 1]");
}

nlohmann::json DecodeConfig::to_json() const {
    nlohmann::json j{{"max_new_tokens", max_new_tokens}, {"top_k", top_k}, {"top_p", top_p}};
    if (seed) j["seed"] = *seed;
    return j;
}

DecodeConfig DecodeConfig::from_json(const nlohmann::json& j) {
    DecodeConfig cfg;
    cfg.max_new_tokens = j.value("max_new_tokens", 100);
    cfg.top_k = j.value("top_k", 50);
    cfg.top_p = j.value("top_p", 0.95);
    if (j.contains("seed")) cfg.seed = j["seed"].get<int64_t>();
    cfg.validate();
    return cfg;
}

nlohmann::json GenerationRecord::to_json() const {
    nlohmann::json j{{"schema_version", 1},
                     {"prompt_id", prompt_id},
                     {"model_id", model_id},
                     {"continuation", continuation},
                     {"echo_stripped", echo_stripped},
                     {"config", config.to_json()},
                     {"prompt", prompt.to_json()}};
    if (token_logprobs) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& tl : *token_logprobs) arr.push_back({tl.token, tl.logprob});
        j["token_logprobs"] = std::move(arr);
    }
    if (created_at) j["created_at"] = *created_at;
    return j;
}

GenerationRecord GenerationRecord::from_json(const nlohmann::json& j) {
    GenerationRecord r;
    r.prompt_id = j.at("prompt_id").get<std::string>();
    r.model_id = j.at("model_id").get<std::string>();
    r.continuation = j.at("continuation").get<std::string>();
    r.echo_stripped = j.value("echo_stripped", false);
    r.config = DecodeConfig::from_json(j.at("config"));
    r.prompt = PromptRecord::from_json(j.at("prompt"));
    if (j.contains("token_logprobs")) {
        std::vector<TokenLogprob> lps;
        for (const auto& item : j["token_logprobs"]) {
            TokenLogprob tl{item.at(0).get<std::string>(), item.at(1).get<double>()};
            if (tl.logprob > 0.0)
                raise(Status::validation, "token logprob above 0 for prompt " + r.prompt_id);
            lps.push_back(std::move(tl));
        }
        r.token_logprobs = std::move(lps);
    }
    if (j.contains("created_at")) r.created_at = j["created_at"].get<std::string>();
    return r;
}

// --- rate limiter -----------------------------------------------------------

RateLimiter::RateLimiter(double rate_per_sec, double burst)
    : rate_(rate_per_sec), burst_(burst), tokens_(burst), last_(0.0) {
    if (rate_ <= 0.0 || burst_ < 1.0)
        raise(Status::invalid_argument, "rate limiter needs positive rate and burst >= 1");
    now_ = [] {
        using namespace std::chrono;
        return duration<double>(steady_clock::now().time_since_epoch()).count();
    };
    last_ = now_();
}

void RateLimiter::set_clock(std::function<double()> now_seconds) {
    std::lock_guard lock(mutex_);
    now_ = std::move(now_seconds);
    last_ = now_();
}

void RateLimiter::refill_locked(double now) {
    double elapsed = std::max(0.0, now - last_);
    tokens_ = std::min(burst_, tokens_ + elapsed * rate_);
    last_ = now;
}

double RateLimiter::available() const {
    std::lock_guard lock(mutex_);
    const_cast<RateLimiter*>(this)->refill_locked(now_());
    return tokens_;
}

void RateLimiter::acquire() {
    while (true) {
        double wait_s = 0.0;
        {
            std::lock_guard lock(mutex_);
            refill_locked(now_());
            if (tokens_ >= 1.0) {
                tokens_ -= 1.0;
                return;
            }
            wait_s = (1.0 - tokens_) / rate_;
        }
        std::this_thread::sleep_for(std::chrono::duration<double>(std::min(wait_s, 0.25)));
    }
}

// --- HTTP endpoint ----------------------------------------------------------

HttpEndpointConfig HttpEndpointConfig::from_json(const nlohmann::json& j) {
    HttpEndpointConfig cfg;
    cfg.base_url = j.at("base_url").get<std::string>();
    cfg.model = j.at("model").get<std::string>();
    cfg.api = j.value("api", std::string("completion"));
    cfg.completion_path = j.value("completion_path", cfg.completion_path);
    cfg.chat_path = j.value("chat_path", cfg.chat_path);
    cfg.api_key_env = j.value("api_key_env", std::string());
    cfg.rate_per_sec = j.value("rate_per_sec", cfg.rate_per_sec);
    cfg.rate_burst = j.value("rate_burst", cfg.rate_burst);
    cfg.timeout_sec = j.value("timeout_sec", cfg.timeout_sec);
    if (cfg.api != "completion" && cfg.api != "chat")
        raise(Status::validation, "endpoint api must be completion or chat");
    return cfg;
}

struct HttpEndpoint::Impl {
    httplib::Client client;
    explicit Impl(const std::string& base) : client(base) {}
};

HttpEndpoint::HttpEndpoint(HttpEndpointConfig config)
    : config_(std::move(config)), impl_(std::make_unique<Impl>(config_.base_url)) {
    impl_->client.set_connection_timeout(std::chrono::duration<double>(config_.timeout_sec));
    impl_->client.set_read_timeout(std::chrono::duration<double>(config_.timeout_sec));
    if (!config_.api_key_env.empty()) {
        const char* key = std::getenv(config_.api_key_env.c_str());
        if (!key || !*key)
            raise(Status::endpoint,
                  "auth failure: environment variable " + config_.api_key_env + " not set");
        impl_->client.set_default_headers({{"Authorization", std::string("Bearer ") + key}});
    }
}

HttpEndpoint::~HttpEndpoint() = default;

nlohmann::json HttpEndpoint::post_json(const std::string& path, const nlohmann::json& body) {
    auto res = impl_->client.Post(path, body.dump(), "application/json");
    if (!res)
        raise(Status::endpoint, "transport error calling " + config_.base_url + path + ": " +
                                    httplib::to_string(res.error()));
    if (res->status == 401 || res->status == 403)
        raise(Status::endpoint, "auth failure (" + std::to_string(res->status) + ") from " +
                                    config_.base_url + path);
    if (transient_status(res->status))
        raise(Status::endpoint, "transient:" + std::to_string(res->status) + " from " +
                                    config_.base_url + path);
    if (res->status != 200)
        raise(Status::endpoint, "endpoint error " + std::to_string(res->status) + " from " +
                                    config_.base_url + path);
    auto parsed = nlohmann::json::parse(res->body, nullptr, false);
    if (parsed.is_discarded())
        raise(Status::endpoint, "malformed response from " + config_.base_url + path);
    return parsed;
}

CompletionResult HttpEndpoint::complete(const PromptRecord& prompt, const DecodeConfig& cfg) {
    cfg.validate();
    CompletionResult out;
    if (config_.api == "chat") {
        nlohmann::json body{{"model", config_.model},
                            {"messages", nlohmann::json::array({nlohmann::json{
                                             {"role", "user"},
                                             {"content", to_chat_prompt(prompt, cfg.max_new_tokens)}}})},
                            {"top_p", cfg.top_p}};
        if (cfg.seed) body["seed"] = *cfg.seed;
        auto resp = post_json(config_.chat_path, body);
        if (!resp.contains("choices") || resp["choices"].empty() ||
            !resp["choices"][0].contains("message"))
            raise(Status::endpoint, "malformed chat response: missing choices[0].message");
        out.text = resp["choices"][0]["message"].value("content", std::string());
        return out;
    }

    nlohmann::json body{{"model", config_.model},
                        {"prompt", prompt.text},
                        {"max_tokens", cfg.max_new_tokens},
                        {"top_p", cfg.top_p},
                        {"top_k", cfg.top_k}};
    if (cfg.seed) body["seed"] = *cfg.seed;
    auto resp = post_json(config_.completion_path, body);
    if (!resp.contains("choices") || resp["choices"].empty())
        raise(Status::endpoint, "malformed completion response: missing choices");
    const auto& choice = resp["choices"][0];
    out.text = choice.value("text", std::string());
    if (choice.contains("logprobs") && choice["logprobs"].is_object() &&
        choice["logprobs"].contains("token_logprobs")) {
        std::vector<TokenLogprob> lps;
        const auto& tokens = choice["logprobs"].value("tokens", nlohmann::json::array());
        const auto& values = choice["logprobs"]["token_logprobs"];
        for (size_t i = 0; i < values.size(); ++i) {
            if (values[i].is_null()) continue; // first token has no conditional probability
            std::string tok = i < tokens.size() && tokens[i].is_string()
                                  ? tokens[i].get<std::string>()
                                  : std::string();
            lps.push_back({std::move(tok), values[i].get<double>()});
        }
        out.logprobs = std::move(lps);
    }
    return out;
}

std::vector<TokenLogprob> HttpEndpoint::score_tokens(const std::string& text) {
    nlohmann::json body{{"model", config_.model}, {"prompt", text},    {"max_tokens", 0},
                        {"echo", true},           {"logprobs", 0}};
    auto resp = post_json(config_.completion_path, body);
    if (!resp.contains("choices") || resp["choices"].empty())
        raise(Status::endpoint, "malformed completion response: missing choices");
    const auto& choice = resp["choices"][0];
    if (!choice.contains("logprobs") || choice["logprobs"].is_null())
        raise(Status::endpoint, "endpoint lacks log-probability support");
    const auto& lp = choice["logprobs"];
    if (!lp.contains("token_logprobs"))
        raise(Status::endpoint, "endpoint lacks log-probability support");
    std::vector<TokenLogprob> out;
    const auto& tokens = lp.value("tokens", nlohmann::json::array());
    const auto& values = lp["token_logprobs"];
    for (size_t i = 0; i < values.size(); ++i) {
        if (values[i].is_null()) continue;
        std::string tok =
            i < tokens.size() && tokens[i].is_string() ? tokens[i].get<std::string>() : std::string();
        out.push_back({std::move(tok), values[i].get<double>()});
    }
    return out;
}

// --- mock model ---------------------------------------------------------

GenerationRecord mock_generate(const PromptRecord& prompt, const Lexicon& lexicon,
                               const MockParams& params, const DecodeConfig& cfg) {
    auto check_rate = [](double r, const char* what) {
        if (r < 0.0 || r > 1.0)
            raise(Status::invalid_argument, std::string(what) + " must be within [0,1]");
    };
    check_rate(params.misgender_rate, "misgender_rate");
    check_rate(params.echo_rate, "echo_rate");
    check_rate(params.det_error_rate, "det_error_rate");
    if (!prompt.pronoun_family)
        raise(Status::invalid_argument, "mock_generate needs a misgendering prompt");
    auto family_index = lexicon.family_index(*prompt.pronoun_family);
    if (!family_index)
        raise(Status::invalid_argument, "unknown pronoun family " + *prompt.pronoun_family);

    std::mt19937_64 rng(params.seed ^ fnv1a64(prompt.id) * 0x9e3779b97f4a7c15ull);

    double rate = params.misgender_rate;
    if (auto it = params.rate_by_family.find(*prompt.pronoun_family);
        it != params.rate_by_family.end())
        rate = it->second;
    check_rate(rate, "rate_by_family");

    size_t chosen = *family_index;
    const size_t n_families = lexicon.families().size();
    if (n_families > 1 && uniform01(rng) < rate) {
        size_t offset = 1 + size_t(uniform01(rng) * double(n_families - 1));
        if (offset >= n_families) offset = n_families - 1;
        chosen = (*family_index + offset) % n_families;
    }
    const PronounEntry& fam = lexicon.family_at(chosen);

    std::string text;
    if (uniform01(rng) < params.echo_rate) text += prompt.text + " ";
    if (uniform01(rng) < params.det_error_rate) {
        // Determiner directly before a neopronoun form: a pronoun-hood error
        // the evaluator must count and skip.
        static const std::array<const char*, 3> kNeoForms = {"ey", "xe", "fae"};
        const char* neo = kNeoForms[rng() % kNeoForms.size()];
        text += std::string(*neo == 'e' ? "An " : "A ") + neo + " story came first. ";
    }
    text += "After the ceremony, " + fam.form(PronounCase::nominative) + " thanked " +
            fam.form(PronounCase::genitive_attributive) + " supporters and the evening belonged to " +
            fam.form(PronounCase::accusative) + ".";

    GenerationRecord record;
    record.prompt_id = prompt.id;
    record.model_id = "mock";
    record.continuation = text;
    record.config = cfg;
    record.prompt = prompt;
    return record;
}

MockModel::MockModel(std::shared_ptr<const Lexicon> lexicon, MockParams params)
    : lexicon_(std::move(lexicon)), params_(std::move(params)) {}

std::string MockModel::model_id() const { return "mock"; }

CompletionResult MockModel::complete(const PromptRecord& prompt, const DecodeConfig& cfg) {
    if (prompt.kind == PromptKind::misgendering) {
        auto rec = mock_generate(prompt, *lexicon_, params_, cfg);
        return CompletionResult{rec.continuation, std::nullopt};
    }
    // Disclosure prompts get a deterministic filler continuation. The
    // archive tag keeps texts distinct per prompt so hash-keyed mock scoring
    // and the text-hash cache see independent entries.
    std::mt19937_64 rng(params_.seed ^ fnv1a64(prompt.id) * 0x9e3779b97f4a7c15ull);
    static const std::array<const char*, 4> kFillers = {
        " and spoke about the new project with friends that evening.",
        " and the interview continued without interruption.",
        " and the profile mentioned several collaborations.",
        " and readers left supportive comments below the article.",
    };
    std::string text = kFillers[rng() % kFillers.size()];
    std::string tag;
    for (int i = 0; i < 6; ++i) tag += char('a' + rng() % 26);
    text += " The archive entry was filed under " + tag + ".";
    if (uniform01(rng) < params_.echo_rate) text = prompt.text + text;
    return CompletionResult{text, std::nullopt};
}

std::vector<TokenLogprob> MockModel::score_tokens(const std::string& text) {
    // Family-graded surprisal: binary pronoun forms read as likeliest,
    // singular they next, neopronouns least likely. Other tokens hash to a
    // stable mid-range value.
    std::vector<TokenLogprob> out;
    for (const auto& token : tokenize(text)) {
        double base = 2.5;
        if (auto match = lexicon_->family_of(token)) {
            const std::string& fam = match->family;
            if (fam == "she" || fam == "he") base = 2.0;
            else if (fam == "they") base = 3.5;
            else base = 6.0;
        }
        uint64_t h = fnv1a64(token) ^ params_.seed;
        double jitter = double(h % 1000) / 2000.0; // [0, 0.5)
        out.push_back({token, -(base + jitter)});
    }
    return out;
}

bool is_mock_spec(const std::string& spec) {
    return spec == "mock" || spec.rfind("mock:", 0) == 0;
}

MockParams parse_mock_spec(const std::string& spec, const Lexicon& lexicon) {
    if (!is_mock_spec(spec)) raise(Status::invalid_argument, "not a mock model spec: " + spec);
    MockParams params;
    if (spec == "mock") return params;
    std::string args = spec.substr(5);
    size_t start = 0;
    while (start <= args.size()) {
        size_t end = args.find(',', start);
        std::string part =
            args.substr(start, end == std::string::npos ? std::string::npos : end - start);
        if (!part.empty()) {
            size_t eq = part.find('=');
            if (eq == std::string::npos)
                raise(Status::invalid_argument, "bad mock spec entry: " + part);
            std::string key = part.substr(0, eq);
            double value = std::stod(part.substr(eq + 1));
            if (key == "misgender") params.misgender_rate = value;
            else if (key == "echo") params.echo_rate = value;
            else if (key == "det") params.det_error_rate = value;
            else if (key == "seed") params.seed = uint64_t(value);
            else if (key == "binary") {
                params.rate_by_family["she"] = value;
                params.rate_by_family["he"] = value;
            } else if (key == "they") {
                params.rate_by_family["they"] = value;
            } else if (key == "neo") {
                for (const auto& fam : lexicon.families())
                    if (fam.family != "she" && fam.family != "he" && fam.family != "they")
                        params.rate_by_family[fam.family] = value;
            } else if (lexicon.family(key)) {
                params.rate_by_family[key] = value;
            } else {
                raise(Status::invalid_argument, "unknown mock spec key: " + key);
            }
        }
        if (end == std::string::npos) break;
        start = end + 1;
    }
    return params;
}

// --- cache --------------------------------------------------------------

GenerationCache::GenerationCache(std::string path) : path_(std::move(path)) {
    if (std::filesystem::exists(path_)) {
        for_each_jsonl(path_, [this](const nlohmann::json& row) {
            entries_[row.at("key").get<std::string>()] =
                GenerationRecord::from_json(row.at("record"));
        });
    }
}

std::string GenerationCache::key_for(const std::string& model_id, const std::string& prompt_text,
                                     const DecodeConfig& cfg) {
    nlohmann::json key{{"model", model_id},
                       {"prompt_sha256", sha256_hex(prompt_text)},
                       {"config", cfg.to_json()}};
    return sha256_hex(key.dump());
}

std::optional<GenerationRecord> GenerationCache::get(const std::string& key) const {
    std::shared_lock lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void GenerationCache::put(const std::string& key, const GenerationRecord& record) {
    std::unique_lock lock(mutex_);
    auto [it, inserted] = entries_.emplace(key, record);
    if (!inserted) return; // identical keys never rewrite a stored continuation
    std::ofstream out(path_, std::ios::app);
    if (!out) raise(Status::io, "cannot append to cache: " + path_);
    out << nlohmann::json{{"key", key}, {"record", record.to_json()}}.dump() << '\n';
}

size_t GenerationCache::size() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
}

// --- driver ---------------------------------------------------------------

GenerationRecord generate(const PromptRecord& prompt, const DecodeConfig& cfg, Endpoint& endpoint,
                          GenerationCache* cache, const RetryPolicy& retry, RateLimiter* limiter) {
    if (prompt.text.empty()) raise(Status::invalid_argument, "empty prompt");
    cfg.validate();

    std::string key;
    if (cache) {
        key = GenerationCache::key_for(endpoint.model_id(), prompt.text, cfg);
        if (auto hit = cache->get(key)) return *hit;
    }

    CompletionResult result;
    int attempt = 0;
    while (true) {
        ++attempt;
        try {
            if (limiter) limiter->acquire();
            result = endpoint.complete(prompt, cfg);
            break;
        } catch (const Error& e) {
            bool transient = e.status() == Status::endpoint &&
                             (std::string_view(e.what()).find("transport error") !=
                                  std::string_view::npos ||
                              std::string_view(e.what()).find("transient:") !=
                                  std::string_view::npos);
            if (!transient || attempt >= retry.max_attempts)
                throw Error(e.status(), std::string(e.what()) + " (after " +
                                            std::to_string(attempt) + " attempts)");
            double delay = retry.base_delay_ms * std::pow(retry.multiplier, attempt - 1);
            std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(delay));
        }
    }

    GenerationRecord record;
    record.prompt_id = prompt.id;
    record.model_id = endpoint.model_id();
    record.continuation = result.text;
    record.token_logprobs = result.logprobs;
    record.config = cfg;
    record.prompt = prompt;
    if (!endpoint.deterministic()) record.created_at = now_iso8601();
    if (record.token_logprobs) {
        for (const auto& tl : *record.token_logprobs)
            if (tl.logprob > 0.0)
                raise(Status::validation, "endpoint returned logprob above 0");
    }
    if (cache) cache->put(key, record);
    return record;
}

std::vector<GenerationRecord> generate_all(std::span<const PromptRecord> prompts,
                                           const DecodeConfig& cfg, Endpoint& endpoint,
                                           GenerationCache* cache, int workers,
                                           const RetryPolicy& retry, RateLimiter* limiter) {
    if (workers < 1) workers = 1;
    std::vector<GenerationRecord> results(prompts.size());
    std::atomic<size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto worker = [&] {
        while (!failed.load()) {
            size_t i = next.fetch_add(1);
            if (i >= prompts.size()) return;
            try {
                results[i] = generate(prompts[i], cfg, endpoint, cache, retry, limiter);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                failed.store(true);
                return;
            }
        }
    };

    if (workers == 1 || prompts.size() <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (int w = 0; w < workers; ++w) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);
    return results;
}

double perplexity_from_logprobs(std::span<const double> logprobs) {
    if (logprobs.empty())
        raise(Status::invalid_argument, "perplexity needs at least one scored token");
    double sum = 0.0;
    for (double lp : logprobs) sum += lp;
    return std::exp(-sum / double(logprobs.size()));
}

double score_perplexity(const std::string& text, Endpoint& endpoint) {
    auto scored = endpoint.score_tokens(text);
    if (scored.empty()) raise(Status::endpoint, "endpoint lacks log-probability support");
    std::vector<double> lps;
    lps.reserve(scored.size());
    for (const auto& tl : scored) lps.push_back(tl.logprob);
    return perplexity_from_logprobs(lps);
}

} // namespace genaff
