#include "genaff/run_store.hpp"

#include "genaff/sha256.hpp"
#include "genaff/timeutil.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>

namespace genaff {

namespace fs = std::filesystem;

namespace {

constexpr const char* kManifestName = "manifest.json";

uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string make_run_id() {
    std::string stamp = now_iso8601();
    std::string id = "run-";
    for (char c : stamp)
        if (c != ':' && c != '-' && c != 'Z') id.push_back(c);
    return id;
}

} // namespace

std::string toolkit_version() { return "0.1.0"; }

RunStore RunStore::open(const std::string& dir, const std::string& model_id) {
    RunStore store;
    store.dir_ = dir;
    fs::create_directories(dir);
    std::string manifest_path = store.path(kManifestName);
    if (fs::exists(manifest_path)) {
        std::ifstream in(manifest_path);
        store.manifest_ = nlohmann::json::parse(in, nullptr, false);
        if (store.manifest_.is_discarded())
            raise(Status::parse, "malformed manifest: " + manifest_path);
        if (!model_id.empty()) store.set_model_id(model_id);
        return store;
    }
    store.manifest_ = {{"schema_version", 1},
                       {"run_id", make_run_id()},
                       {"created_at", now_iso8601()},
                       {"toolkit_version", toolkit_version()},
                       {"model_id", model_id},
                       {"sealed", false},
                       {"stages", nlohmann::json::array()}};
    store.save();
    return store;
}

std::string RunStore::path(const std::string& filename) const {
    return (fs::path(dir_) / filename).string();
}

void RunStore::record_stage(const std::string& stage, const nlohmann::json& inputs,
                            const nlohmann::json& outputs, const nlohmann::json& config) {
    if (sealed()) raise(Status::validation, "run manifest is sealed: " + dir_);
    manifest_["stages"].push_back({{"stage", stage},
                                   {"completed_at", now_iso8601()},
                                   {"inputs", inputs},
                                   {"outputs", outputs},
                                   {"config", config}});
    save();
}

void RunStore::seal() {
    manifest_["sealed"] = true;
    save();
}

bool RunStore::sealed() const { return manifest_.value("sealed", false); }

std::string RunStore::model_id() const { return manifest_.value("model_id", std::string()); }

void RunStore::set_model_id(const std::string& model_id) {
    std::string existing = manifest_.value("model_id", std::string());
    if (existing.empty()) {
        manifest_["model_id"] = model_id;
        save();
    } else if (!model_id.empty() && existing != model_id) {
        raise(Status::validation,
              "run " + dir_ + " belongs to model " + existing + ", not " + model_id);
    }
}

void RunStore::save() const {
    std::string tmp = path(std::string(kManifestName) + ".tmp");
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) raise(Status::io, "cannot write manifest: " + tmp);
        out << manifest_.dump(1) << '\n';
    }
    fs::rename(tmp, path(kManifestName));
}

nlohmann::json RunStore::file_digest(const std::string& path) {
    return {{"path", path}, {"sha256", sha256_file_hex(path)}};
}

std::vector<size_t> stratified_sample_indices(const std::vector<std::string>& strata,
                                              size_t sample_n, uint64_t seed) {
    size_t population = strata.size();
    std::vector<size_t> out;
    if (sample_n == 0 || sample_n >= population) {
        out.resize(population);
        for (size_t i = 0; i < population; ++i) out[i] = i;
        return out;
    }

    std::map<std::string, std::vector<size_t>> groups;
    for (size_t i = 0; i < population; ++i) groups[strata[i]].push_back(i);

    // Proportional quotas, remainder to the largest fractional parts.
    struct Quota {
        std::string name;
        size_t base;
        double frac;
    };
    std::vector<Quota> quotas;
    size_t assigned = 0;
    for (const auto& [name, members] : groups) {
        double exact = double(sample_n) * double(members.size()) / double(population);
        size_t base = size_t(exact);
        base = std::min(base, members.size());
        quotas.push_back({name, base, exact - double(base)});
        assigned += base;
    }
    std::stable_sort(quotas.begin(), quotas.end(), [](const Quota& a, const Quota& b) {
        if (a.frac != b.frac) return a.frac > b.frac;
        return a.name < b.name;
    });
    size_t remaining = sample_n - assigned;
    for (auto& q : quotas) {
        if (remaining == 0) break;
        if (q.base < groups[q.name].size()) {
            ++q.base;
            --remaining;
        }
    }

    for (const auto& q : quotas) {
        auto& members = groups[q.name];
        std::mt19937_64 rng(seed ^ fnv1a64(q.name) * 0x9e3779b97f4a7c15ull);
        // Partial Fisher-Yates: the first q.base slots become the sample.
        for (size_t i = 0; i < q.base && i + 1 < members.size(); ++i) {
            size_t j = i + size_t(rng() % uint64_t(members.size() - i));
            std::swap(members[i], members[j]);
        }
        out.insert(out.end(), members.begin(), members.begin() + std::min(q.base, members.size()));
    }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace genaff
