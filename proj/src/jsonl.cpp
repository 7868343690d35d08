#include "genaff/jsonl.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

namespace genaff {

JsonlReader::JsonlReader(const std::string& path) : path_(path), in_(path) {
    if (!in_) raise(Status::io, "cannot open for reading: " + path);
}

bool JsonlReader::next(nlohmann::json& out) {
    std::string line;
    while (std::getline(in_, line)) {
        ++line_;
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
        out = nlohmann::json::parse(line, nullptr, false);
        if (out.is_discarded())
            raise(Status::parse, path_ + ":" + std::to_string(line_) + ": malformed JSON line");
        return true;
    }
    return false;
}

JsonlWriter::JsonlWriter(const std::string& path) : path_(path) {
    auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(parent, ec);
    }
    out_.open(path, std::ios::trunc);
    if (!out_) raise(Status::io, "cannot open for writing: " + path);
}

void JsonlWriter::write(const nlohmann::json& value) {
    out_ << value.dump() << '\n';
    if (!out_) raise(Status::io, "write failed: " + path_);
    ++count_;
}

void JsonlWriter::flush() { out_.flush(); }

void for_each_jsonl(const std::string& path, const std::function<void(const nlohmann::json&)>& fn) {
    JsonlReader reader(path);
    nlohmann::json row;
    while (reader.next(row)) fn(row);
}

std::string csv_number(double v) {
    if (std::isnan(v)) return "";
    char buf[64];
    // %.10g keeps proportions and rank statistics readable while staying
    // stable across repeated runs.
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

std::string csv_escape(const std::string& field) {
    bool needs_quote = field.find_first_of(",\"\n") != std::string::npos;
    if (!needs_quote) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

} // namespace genaff
