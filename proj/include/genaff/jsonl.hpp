#pragma once

#include "genaff/error.hpp"

#include <json.hpp>

#include <fstream>
#include <functional>
#include <string>

namespace genaff {

class JsonlReader {
public:
    explicit JsonlReader(const std::string& path);

    // Returns false at end of file. Skips blank lines. Malformed JSON is a
    // parse error carrying the line number.
    bool next(nlohmann::json& out);

    size_t line_number() const { return line_; }
    const std::string& path() const { return path_; }

private:
    std::string path_;
    std::ifstream in_;
    size_t line_ = 0;
};

class JsonlWriter {
public:
    explicit JsonlWriter(const std::string& path);

    void write(const nlohmann::json& value);
    void flush();
    size_t count() const { return count_; }

private:
    std::string path_;
    std::ofstream out_;
    size_t count_ = 0;
};

void for_each_jsonl(const std::string& path, const std::function<void(const nlohmann::json&)>& fn);

// Deterministic float formatting for CSV cells (shortest round-trip-ish,
// fixed across runs on one platform).
std::string csv_number(double v);

std::string csv_escape(const std::string& field);

} // namespace genaff
