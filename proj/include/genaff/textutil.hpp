#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace genaff {

// ASCII-range lowering; non-ASCII bytes pass through untouched. Pronoun
// forms and template text are ASCII, so this is exact where it matters.
std::string ascii_lower(std::string_view s);

bool is_ascii_space(char c);

// Trims ASCII whitespace and collapses internal runs to single spaces.
std::string collapse_spaces(std::string_view s);

// Uppercases the first ASCII letter of the string, leaving everything else
// alone. Used for sentence-initial capitalization after template fill.
std::string capitalize_sentence(std::string_view s);

// Lowercase word tokens. Splits on anything that is not a letter, keeping
// apostrophes that sit between two letters ("casey's" stays one token).
// Non-ASCII letters are kept verbatim; common Unicode punctuation splits.
std::vector<std::string> tokenize(std::string_view text);

// True when every byte is an ASCII lowercase letter.
bool is_lower_alpha_word(std::string_view s);

} // namespace genaff
