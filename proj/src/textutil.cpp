#include "genaff/textutil.hpp"

#include <cstdint>

namespace genaff {

namespace {

struct Cp {
    uint32_t value = 0;
    size_t width = 1;
};

Cp decode_utf8(std::string_view s, size_t i) {
    uint8_t b0 = uint8_t(s[i]);
    if (b0 < 0x80) return {b0, 1};
    auto cont = [&](size_t k) -> int {
        if (i + k >= s.size()) return -1;
        uint8_t b = uint8_t(s[i + k]);
        return (b & 0xc0) == 0x80 ? int(b & 0x3f) : -1;
    };
    if ((b0 & 0xe0) == 0xc0) {
        int c1 = cont(1);
        if (c1 >= 0) return {(uint32_t(b0 & 0x1f) << 6) | uint32_t(c1), 2};
    } else if ((b0 & 0xf0) == 0xe0) {
        int c1 = cont(1), c2 = cont(2);
        if (c1 >= 0 && c2 >= 0)
            return {(uint32_t(b0 & 0x0f) << 12) | (uint32_t(c1) << 6) | uint32_t(c2), 3};
    } else if ((b0 & 0xf8) == 0xf0) {
        int c1 = cont(1), c2 = cont(2), c3 = cont(3);
        if (c1 >= 0 && c2 >= 0 && c3 >= 0)
            return {(uint32_t(b0 & 0x07) << 18) | (uint32_t(c1) << 12) | (uint32_t(c2) << 6) |
                        uint32_t(c3),
                    4};
    }
    return {0xfffd, 1};
}

bool ascii_alpha(uint32_t cp) {
    return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
}

// Letter classification for tokenization. ASCII uses isalpha; outside ASCII
// we treat codepoints as letters unless they fall in well-known punctuation,
// symbol, or whitespace blocks. Closed-class pronoun matching is ASCII, so
// this only has to keep foreign names and diacritics intact.
bool is_letter_cp(uint32_t cp) {
    if (cp < 0x80) return ascii_alpha(cp);
    if (cp >= 0xa0 && cp <= 0xbf) return false;   // latin-1 punctuation and signs
    if (cp == 0xd7 || cp == 0xf7) return false;   // multiplication, division
    if (cp >= 0x2000 && cp <= 0x206f) return false; // general punctuation
    if (cp >= 0x2190 && cp <= 0x2bff) return false; // arrows, math, symbols
    if (cp >= 0x3000 && cp <= 0x303f) return false; // CJK punctuation
    if (cp >= 0xfe30 && cp <= 0xfe4f) return false;
    if (cp >= 0xff00 && cp <= 0xff0f) return false;
    return true;
}

bool is_apostrophe_cp(uint32_t cp) { return cp == '\'' || cp == 0x2019; }

void append_lower_cp(std::string& out, std::string_view src, size_t pos, const Cp& cp) {
    if (cp.value < 0x80) {
        char c = char(cp.value);
        if (c >= 'A' && c <= 'Z') c = char(c - 'A' + 'a');
        out.push_back(c);
    } else {
        out.append(src.substr(pos, cp.width));
    }
}

} // namespace

std::string ascii_lower(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) out.push_back((c >= 'A' && c <= 'Z') ? char(c - 'A' + 'a') : c);
    return out;
}

bool is_ascii_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string collapse_spaces(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool in_space = true; // leading whitespace dropped
    for (char c : s) {
        if (is_ascii_space(c)) {
            in_space = true;
        } else {
            if (in_space && !out.empty()) out.push_back(' ');
            in_space = false;
            out.push_back(c);
        }
    }
    return out;
}

std::string capitalize_sentence(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
        if (c >= 'a' && c <= 'z') {
            c = char(c - 'a' + 'A');
            break;
        }
        if ((c >= 'A' && c <= 'Z') || uint8_t(c) >= 0x80) break;
    }
    return out;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    size_t i = 0;
    bool prev_letter = false;
    while (i < text.size()) {
        Cp cp = decode_utf8(text, i);
        if (is_letter_cp(cp.value)) {
            append_lower_cp(current, text, i, cp);
            prev_letter = true;
        } else if (is_apostrophe_cp(cp.value) && prev_letter && i + cp.width < text.size()) {
            Cp next = decode_utf8(text, i + cp.width);
            if (is_letter_cp(next.value)) {
                current.append(text.substr(i, cp.width));
            } else {
                if (!current.empty()) tokens.push_back(std::move(current));
                current.clear();
            }
            prev_letter = false;
        } else {
            if (!current.empty()) tokens.push_back(std::move(current));
            current.clear();
            prev_letter = false;
        }
        i += cp.width;
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

bool is_lower_alpha_word(std::string_view s) {
    if (s.empty()) return false;
    for (char c : s)
        if (c < 'a' || c > 'z') return false;
    return true;
}

} // namespace genaff
