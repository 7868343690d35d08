#pragma once

#include "genaff/error.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace genaff {

enum class PronounCase : uint8_t {
    nominative = 0,
    accusative = 1,
    genitive_attributive = 2,
    genitive_predicative = 3,
    reflexive = 4,
};

inline constexpr size_t kPronounCaseCount = 5;

const char* pronoun_case_name(PronounCase c);
std::optional<PronounCase> pronoun_case_from_name(std::string_view name);

// Bitmask over PronounCase. A form owned by one family in several case slots
// ("her", "his") is reported as the union of its slots instead of a guess.
using CaseBucket = uint8_t;

constexpr CaseBucket case_bit(PronounCase c) { return CaseBucket(1u << uint8_t(c)); }

// "nominative", or "accusative|genitive_attributive" for merged buckets.
std::string case_bucket_name(CaseBucket bucket);
std::optional<CaseBucket> case_bucket_from_name(std::string_view name);

struct PronounEntry {
    std::string family;
    std::array<std::string, kPronounCaseCount> forms;

    const std::string& form(PronounCase c) const { return forms[size_t(c)]; }
};

enum class GenderGroup : uint8_t { binary, tgnb };

const char* gender_group_name(GenderGroup g);

struct GenderLabel {
    std::string raw;
    std::string canonical;
    GenderGroup group = GenderGroup::tgnb;
    // False when the canonical label is not in the shipped curated set.
    bool curated = true;

    nlohmann::json to_json() const;
    static GenderLabel from_json(const nlohmann::json& j);
};

enum class AntecedentKind : uint8_t {
    nongendered_name = 0,
    feminine_name = 1,
    masculine_name = 2,
    distal = 3,
};

inline constexpr size_t kAntecedentKindCount = 4;

const char* antecedent_kind_name(AntecedentKind k);
std::optional<AntecedentKind> antecedent_kind_from_name(std::string_view name);

struct AntecedentSpec {
    AntecedentKind kind;
    std::string text;
};

enum class DisclosureStyle : uint8_t { static_form, dynamic_form };

const char* disclosure_style_name(DisclosureStyle s);

struct DisclosurePattern {
    std::string text;
    // Which gender terms this variant serves: true = noun-like terms
    // ("is a <gender_exp>"), false = adjective-like, unset = all.
    std::optional<bool> for_noun_terms;
};

struct DisclosureForm {
    std::string id;
    DisclosureStyle style = DisclosureStyle::dynamic_form;
    std::vector<DisclosurePattern> patterns;

    const DisclosurePattern& pattern_for(bool noun_term) const;
};

struct GenderTerm {
    std::string term;     // surface form used in prompts
    bool noun = false;    // takes an article in copular position
};

struct NameEntry {
    std::string name;
    bool english = false;
};

struct PronounMatch {
    size_t family_index;
    std::string family;
    CaseBucket cases;
};

// Immutable after load; concurrent reads are safe.
class Lexicon {
public:
    static Lexicon load(const std::string& path);
    static Lexicon from_json(const nlohmann::json& doc, const std::string& origin);

    const std::vector<PronounEntry>& families() const { return families_; }
    const PronounEntry& family_at(size_t index) const { return families_.at(index); }
    const PronounEntry* family(std::string_view name) const;
    std::optional<size_t> family_index(std::string_view name) const;

    // Total over lowercase tokens; none for non-pronoun tokens.
    std::optional<PronounMatch> family_of(std::string_view token) const;

    GenderLabel normalize_gender(std::string_view raw) const;

    const std::vector<GenderTerm>& disclosure_genders() const { return disclosure_genders_; }
    const std::vector<NameEntry>& names() const { return names_; }
    std::vector<std::string> top_english_names(size_t n) const;
    const std::vector<AntecedentSpec>& misgendering_antecedents() const { return antecedents_; }
    const std::vector<std::string>& distals() const { return distals_; }
    const std::vector<DisclosureForm>& disclosure_forms() const { return disclosure_forms_; }
    const DisclosureForm* disclosure_form(std::string_view id) const;
    const std::vector<std::string>& static_identities() const { return static_identities_; }
    const std::map<std::string, std::vector<std::string>>& gender_synonyms() const {
        return gender_synonyms_;
    }

    // Representative label for per-gender reporting: members of a synonym
    // set collapse onto the set's head term (girl -> woman).
    std::string analysis_label(const GenderLabel& label) const;

    bool gender_term_is_noun(std::string_view term) const;
    bool is_determiner(std::string_view token) const;

    const std::string& version() const { return version_; }

private:
    void index_forms(const std::string& origin);

    std::string version_;
    std::vector<PronounEntry> families_;
    std::unordered_map<std::string, PronounMatch> form_index_;
    std::vector<GenderTerm> disclosure_genders_;
    std::unordered_map<std::string, bool> gender_noun_;
    std::vector<NameEntry> names_;
    std::vector<AntecedentSpec> antecedents_;
    std::vector<std::string> distals_;
    std::vector<DisclosureForm> disclosure_forms_;
    std::vector<std::string> static_identities_;
    std::map<std::string, std::vector<std::string>> gender_synonyms_;
    std::unordered_map<std::string, std::string> synonym_head_;
    std::unordered_map<std::string, std::string> respellings_;
    std::unordered_map<std::string, std::string> shortforms_;
    std::unordered_map<std::string, bool> curated_;
};

// Resolves the "default" lexicon path: $GENAFF_DATA_DIR/lexicon.json when the
// environment variable is set, otherwise ./data/lexicon.json.
std::string default_lexicon_path();
std::string default_templates_path();

} // namespace genaff
