#include "genaff/lexicon.hpp"

#include "genaff/textutil.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>

namespace genaff {

namespace {

const std::array<const char*, kPronounCaseCount> kCaseNames = {
    "nominative", "accusative", "genitive_attributive", "genitive_predicative", "reflexive"};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(Status::io, "cannot open lexicon file: " + path);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::string strip_outer_quotes(std::string_view s) {
    if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') ||
                          (s.front() == '\'' && s.back() == '\'')))
        return std::string(s.substr(1, s.size() - 2));
    return std::string(s);
}

void require_placeholder_once(const std::string& pattern, const std::string& placeholder,
                              const std::string& form_id) {
    size_t first = pattern.find(placeholder);
    if (first == std::string::npos)
        raise(Status::validation,
              "disclosure form " + form_id + ": pattern missing " + placeholder);
    if (pattern.find(placeholder, first + 1) != std::string::npos)
        raise(Status::validation,
              "disclosure form " + form_id + ": pattern repeats " + placeholder);
}

} // namespace

const char* pronoun_case_name(PronounCase c) { return kCaseNames[size_t(c)]; }

std::optional<PronounCase> pronoun_case_from_name(std::string_view name) {
    for (size_t i = 0; i < kCaseNames.size(); ++i)
        if (name == kCaseNames[i]) return PronounCase(i);
    return std::nullopt;
}

std::string case_bucket_name(CaseBucket bucket) {
    std::string out;
    for (size_t i = 0; i < kPronounCaseCount; ++i) {
        if (bucket & (1u << i)) {
            if (!out.empty()) out += '|';
            out += kCaseNames[i];
        }
    }
    return out;
}

std::optional<CaseBucket> case_bucket_from_name(std::string_view name) {
    CaseBucket bucket = 0;
    size_t start = 0;
    while (start <= name.size()) {
        size_t end = name.find('|', start);
        std::string_view part = name.substr(start, end == std::string_view::npos ? name.size() - start
                                                                                 : end - start);
        auto c = pronoun_case_from_name(part);
        if (!c) return std::nullopt;
        bucket |= case_bit(*c);
        if (end == std::string_view::npos) break;
        start = end + 1;
    }
    return bucket ? std::optional<CaseBucket>(bucket) : std::nullopt;
}

const char* gender_group_name(GenderGroup g) {
    return g == GenderGroup::binary ? "binary" : "tgnb";
}

nlohmann::json GenderLabel::to_json() const {
    nlohmann::json j{{"raw", raw}, {"canonical", canonical}, {"group", gender_group_name(group)}};
    if (!curated) j["uncurated"] = true;
    return j;
}

GenderLabel GenderLabel::from_json(const nlohmann::json& j) {
    GenderLabel label;
    label.raw = j.at("raw").get<std::string>();
    label.canonical = j.at("canonical").get<std::string>();
    label.group = j.at("group").get<std::string>() == "binary" ? GenderGroup::binary
                                                               : GenderGroup::tgnb;
    label.curated = !j.value("uncurated", false);
    return label;
}

const char* antecedent_kind_name(AntecedentKind k) {
    switch (k) {
        case AntecedentKind::nongendered_name: return "nongendered_name";
        case AntecedentKind::feminine_name: return "feminine_name";
        case AntecedentKind::masculine_name: return "masculine_name";
        case AntecedentKind::distal: return "distal";
    }
    return "?";
}

std::optional<AntecedentKind> antecedent_kind_from_name(std::string_view name) {
    for (size_t i = 0; i < kAntecedentKindCount; ++i) {
        auto k = AntecedentKind(i);
        if (name == antecedent_kind_name(k)) return k;
    }
    return std::nullopt;
}

const char* disclosure_style_name(DisclosureStyle s) {
    return s == DisclosureStyle::static_form ? "static" : "dynamic";
}

const DisclosurePattern& DisclosureForm::pattern_for(bool noun_term) const {
    for (const auto& p : patterns)
        if (p.for_noun_terms && *p.for_noun_terms == noun_term) return p;
    for (const auto& p : patterns)
        if (!p.for_noun_terms) return p;
    // Single-variant forms serve every term.
    return patterns.front();
}

Lexicon Lexicon::load(const std::string& path) {
    std::string content = read_file(path);
    if (content.find_first_not_of(" \t\r\n") == std::string::npos)
        raise(Status::validation, path + ": no pronoun families");
    auto doc = nlohmann::json::parse(content, nullptr, false);
    if (doc.is_discarded()) raise(Status::parse, "lexicon file is not valid JSON: " + path);
    return from_json(doc, path);
}

Lexicon Lexicon::from_json(const nlohmann::json& doc, const std::string& origin) {
    Lexicon lex;
    lex.version_ = doc.value("version", std::string("0"));

    if (!doc.contains("pronouns") || !doc["pronouns"].is_array() || doc["pronouns"].empty())
        raise(Status::validation, origin + ": no pronoun families");

    for (const auto& p : doc["pronouns"]) {
        PronounEntry entry;
        entry.family = p.value("family", std::string());
        if (entry.family.empty())
            raise(Status::validation, origin + ": pronoun entry without family identifier");
        for (size_t i = 0; i < kPronounCaseCount; ++i) {
            const char* key = kCaseNames[i];
            if (!p.contains(key) || !p[key].is_string() || p[key].get<std::string>().empty())
                raise(Status::validation, origin + ": family \"" + entry.family +
                                              "\" missing case form " + key);
            entry.forms[i] = p[key].get<std::string>();
            if (!is_lower_alpha_word(entry.forms[i]))
                raise(Status::validation, origin + ": family \"" + entry.family + "\" form \"" +
                                              entry.forms[i] +
                                              "\" must be lowercase letters only");
        }
        if (lex.family(entry.family))
            raise(Status::validation, origin + ": duplicate family \"" + entry.family + "\"");
        lex.families_.push_back(std::move(entry));
    }
    lex.index_forms(origin);

    if (doc.contains("respellings"))
        for (auto it = doc["respellings"].begin(); it != doc["respellings"].end(); ++it)
            lex.respellings_[it.key()] = it.value().get<std::string>();

    if (doc.contains("shortforms"))
        for (auto it = doc["shortforms"].begin(); it != doc["shortforms"].end(); ++it)
            for (const auto& v : it.value())
                lex.shortforms_[v.get<std::string>()] = it.key();

    if (doc.contains("gender_synonyms")) {
        for (auto it = doc["gender_synonyms"].begin(); it != doc["gender_synonyms"].end(); ++it) {
            std::vector<std::string> members;
            for (const auto& v : it.value()) members.push_back(v.get<std::string>());
            for (const auto& m : members) lex.synonym_head_[m] = it.key();
            lex.gender_synonyms_[it.key()] = std::move(members);
        }
        // The binary comparison terms are nouns in copular position
        // ("is a girl"); an explicit genders entry can still override.
        for (const auto& [head, members] : lex.gender_synonyms_) {
            lex.gender_noun_.emplace(ascii_lower(collapse_spaces(head)), true);
            for (const auto& m : members)
                lex.gender_noun_.emplace(ascii_lower(collapse_spaces(m)), true);
        }
    }

    if (doc.contains("genders")) {
        for (const auto& g : doc["genders"]) {
            GenderTerm term;
            term.term = g.at("term").get<std::string>();
            term.noun = g.value("noun", false);
            if (term.term.empty()) raise(Status::validation, origin + ": empty gender term");
            lex.disclosure_genders_.push_back(term);
            lex.gender_noun_[ascii_lower(collapse_spaces(term.term))] = term.noun;
        }
    }

    if (doc.contains("static_identities"))
        for (const auto& s : doc["static_identities"])
            lex.static_identities_.push_back(s.get<std::string>());

    // Curated set: every shipped surface term plus synonyms, normalized.
    auto mark_curated = [&lex](const std::string& raw) {
        GenderLabel l = lex.normalize_gender(raw);
        lex.curated_[l.canonical] = true;
    };
    lex.curated_.clear();
    for (const auto& g : lex.disclosure_genders_) mark_curated(g.term);
    for (const auto& [head, members] : lex.gender_synonyms_) {
        mark_curated(head);
        for (const auto& m : members) mark_curated(m);
    }
    for (const auto& s : lex.static_identities_) mark_curated(s);

    if (doc.contains("names")) {
        for (const auto& n : doc["names"]) {
            NameEntry entry;
            entry.name = n.at("name").get<std::string>();
            entry.english = n.value("english", false);
            if (entry.name.empty()) raise(Status::validation, origin + ": empty name");
            lex.names_.push_back(std::move(entry));
        }
    }

    if (doc.contains("misgendering_names")) {
        const auto& mn = doc["misgendering_names"];
        auto add_names = [&](const char* key, AntecedentKind kind) {
            if (!mn.contains(key)) return;
            for (const auto& n : mn[key]) {
                std::string text = n.get<std::string>();
                if (text.empty()) raise(Status::validation, origin + ": empty antecedent name");
                lex.antecedents_.push_back({kind, text});
            }
        };
        add_names("nongendered", AntecedentKind::nongendered_name);
        add_names("feminine", AntecedentKind::feminine_name);
        add_names("masculine", AntecedentKind::masculine_name);
    }

    if (doc.contains("distals")) {
        for (const auto& d : doc["distals"]) {
            std::string text = d.get<std::string>();
            if (text.empty()) raise(Status::validation, origin + ": empty distal antecedent");
            // Distal antecedents mark socially unfamiliar referents; a
            // capitalized word after the first position suggests a name.
            auto tokens = tokenize(text);
            for (size_t i = 1; i < tokens.size(); ++i) {
                for (const auto& n : lex.names_)
                    if (ascii_lower(n.name) == tokens[i])
                        raise(Status::validation,
                              origin + ": distal antecedent contains personal name: " + text);
            }
            lex.antecedents_.push_back({AntecedentKind::distal, text});
            lex.distals_.push_back(text);
        }
    }

    if (doc.contains("disclosure_forms")) {
        for (const auto& f : doc["disclosure_forms"]) {
            DisclosureForm form;
            form.id = f.at("id").get<std::string>();
            std::string style = f.value("style", std::string("dynamic"));
            form.style = style == "static" ? DisclosureStyle::static_form
                                           : DisclosureStyle::dynamic_form;
            for (const auto& p : f.at("patterns")) {
                DisclosurePattern pattern;
                pattern.text = p.at("text").get<std::string>();
                if (p.contains("noun")) pattern.for_noun_terms = p["noun"].get<bool>();
                require_placeholder_once(pattern.text, "<referent>", form.id);
                require_placeholder_once(pattern.text, "<gender_exp>", form.id);
                form.patterns.push_back(std::move(pattern));
            }
            if (form.patterns.empty())
                raise(Status::validation, origin + ": disclosure form " + form.id + " has no patterns");
            if (lex.disclosure_form(form.id))
                raise(Status::validation, origin + ": duplicate disclosure form id " + form.id);
            lex.disclosure_forms_.push_back(std::move(form));
        }
    }

    return lex;
}

void Lexicon::index_forms(const std::string& origin) {
    form_index_.clear();
    for (size_t fi = 0; fi < families_.size(); ++fi) {
        const auto& entry = families_[fi];
        for (size_t ci = 0; ci < kPronounCaseCount; ++ci) {
            const std::string& form = entry.forms[ci];
            auto it = form_index_.find(form);
            if (it == form_index_.end()) {
                form_index_[form] = PronounMatch{fi, entry.family, case_bit(PronounCase(ci))};
            } else if (it->second.family_index == fi) {
                it->second.cases |= case_bit(PronounCase(ci));
            } else {
                raise(Status::validation, origin + ": form \"" + form +
                                              "\" shared by families \"" +
                                              families_[it->second.family_index].family +
                                              "\" and \"" + entry.family + "\"");
            }
        }
    }
}

const PronounEntry* Lexicon::family(std::string_view name) const {
    for (const auto& f : families_)
        if (f.family == name) return &f;
    return nullptr;
}

std::optional<size_t> Lexicon::family_index(std::string_view name) const {
    for (size_t i = 0; i < families_.size(); ++i)
        if (families_[i].family == name) return i;
    return std::nullopt;
}

std::optional<PronounMatch> Lexicon::family_of(std::string_view token) const {
    auto it = form_index_.find(std::string(token));
    if (it == form_index_.end()) return std::nullopt;
    return it->second;
}

GenderLabel Lexicon::normalize_gender(std::string_view raw) const {
    GenderLabel label;
    label.raw = std::string(raw);
    std::string canon = ascii_lower(collapse_spaces(strip_outer_quotes(collapse_spaces(raw))));
    if (auto it = respellings_.find(canon); it != respellings_.end()) canon = it->second;
    if (auto it = shortforms_.find(canon); it != shortforms_.end()) canon = it->second;
    label.canonical = canon;

    bool binary = synonym_head_.count(canon) > 0 || gender_synonyms_.count(canon) > 0;
    label.group = binary ? GenderGroup::binary : GenderGroup::tgnb;
    label.curated = curated_.count(canon) > 0;
    return label;
}

std::vector<std::string> Lexicon::top_english_names(size_t n) const {
    std::vector<std::string> out;
    for (const auto& entry : names_) {
        if (!entry.english) continue;
        out.push_back(entry.name);
        if (out.size() == n) break;
    }
    return out;
}

const DisclosureForm* Lexicon::disclosure_form(std::string_view id) const {
    for (const auto& f : disclosure_forms_)
        if (f.id == id) return &f;
    return nullptr;
}

std::string Lexicon::analysis_label(const GenderLabel& label) const {
    if (auto it = synonym_head_.find(label.canonical); it != synonym_head_.end())
        return it->second;
    return label.canonical;
}

bool Lexicon::gender_term_is_noun(std::string_view term) const {
    auto it = gender_noun_.find(ascii_lower(collapse_spaces(term)));
    return it != gender_noun_.end() && it->second;
}

bool Lexicon::is_determiner(std::string_view token) const {
    return token == "a" || token == "an" || token == "the";
}

std::string default_lexicon_path() {
    if (const char* env = std::getenv("GENAFF_DATA_DIR"))
        return std::string(env) + "/lexicon.json";
    return "data/lexicon.json";
}

std::string default_templates_path() {
    if (const char* env = std::getenv("GENAFF_DATA_DIR"))
        return std::string(env) + "/misgendering_templates.txt";
    return "data/misgendering_templates.txt";
}

} // namespace genaff
