#include "genaff/prompt_factory.hpp"

#include "genaff/textutil.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>

namespace genaff {

namespace {

struct SlotSpec {
    const char* tag;
    std::optional<PronounCase> pronoun_case; // nullopt for <be>
};

const std::array<SlotSpec, 6> kSlots = {{
    {"<p_nom>", PronounCase::nominative},
    {"<p_acc>", PronounCase::accusative},
    {"<p_gen_attr>", PronounCase::genitive_attributive},
    {"<p_gen_pred>", PronounCase::genitive_predicative},
    {"<p_refl>", PronounCase::reflexive},
    {"<be>", std::nullopt},
}};

void replace_all(std::string& text, std::string_view tag, std::string_view value) {
    size_t pos = 0;
    while ((pos = text.find(tag, pos)) != std::string::npos) {
        text.replace(pos, tag.size(), value);
        pos += value.size();
    }
}

// Applying "a" before a vowel-initial gender term upgrades it to "an".
void fix_article(std::string& text, const std::string& term) {
    if (term.empty()) return;
    char c = term[0];
    bool vowel = c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u' || c == 'A' ||
                 c == 'E' || c == 'I' || c == 'O' || c == 'U';
    if (!vowel) return;
    const std::string wrong = "a " + term;
    const std::string right = "an " + term;
    size_t pos = 0;
    while ((pos = text.find(wrong, pos)) != std::string::npos) {
        bool at_word_start = pos == 0 || !std::isalpha(uint8_t(text[pos - 1]));
        if (at_word_start) {
            text.replace(pos, wrong.size(), right);
            pos += right.size();
        } else {
            pos += 1;
        }
    }
}

void check_no_placeholders(const std::string& text, const std::string& what) {
    if (text.find('<') != std::string::npos || text.find('>') != std::string::npos)
        raise(Status::validation, what + ": unresolved placeholder in \"" + text + "\"");
}

std::string pad_index(size_t value, int width) {
    std::string s = std::to_string(value);
    while (int(s.size()) < width) s.insert(s.begin(), '0');
    return s;
}

} // namespace

const char* prompt_kind_name(PromptKind k) {
    switch (k) {
        case PromptKind::misgendering: return "misgendering";
        case PromptKind::disclosure_static: return "disclosure_static";
        case PromptKind::disclosure_dynamic: return "disclosure_dynamic";
    }
    return "?";
}

std::optional<PromptKind> prompt_kind_from_name(std::string_view name) {
    if (name == "misgendering") return PromptKind::misgendering;
    if (name == "disclosure_static") return PromptKind::disclosure_static;
    if (name == "disclosure_dynamic") return PromptKind::disclosure_dynamic;
    return std::nullopt;
}

MisgenderTemplate validate_template(std::string id, std::string text) {
    if (id.empty()) raise(Status::validation, "template with empty id");
    size_t ref = text.find("<referent>");
    if (ref == std::string::npos)
        raise(Status::validation, "template " + id + ": missing <referent>");
    if (text.find("<referent>", ref + 1) != std::string::npos)
        raise(Status::validation, "template " + id + ": more than one <referent>");

    size_t pronoun_slots = 0;
    size_t scan = 0;
    while ((scan = text.find('<', scan)) != std::string::npos) {
        size_t end = text.find('>', scan);
        if (end == std::string::npos)
            raise(Status::validation, "template " + id + ": unterminated placeholder");
        std::string tag = text.substr(scan, end - scan + 1);
        if (tag != "<referent>") {
            bool known = false;
            for (const auto& slot : kSlots) known = known || tag == slot.tag;
            if (!known)
                raise(Status::validation, "template " + id + ": unknown placeholder " + tag);
            if (tag != "<be>") {
                if (scan < ref)
                    raise(Status::validation,
                          "template " + id + ": pronoun slot precedes <referent>");
                ++pronoun_slots;
            }
        }
        scan = end + 1;
    }
    if (pronoun_slots == 0)
        raise(Status::validation, "template " + id + ": no pronoun slot");
    return MisgenderTemplate{std::move(id), std::move(text)};
}

std::vector<MisgenderTemplate> load_templates(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(Status::io, "cannot open template file: " + path);
    std::vector<MisgenderTemplate> out;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        size_t tab = line.find('\t');
        if (tab == std::string::npos)
            raise(Status::parse, path + ":" + std::to_string(line_no) +
                                     ": expected \"id<TAB>text\"");
        out.push_back(validate_template(line.substr(0, tab), line.substr(tab + 1)));
    }
    return out;
}

nlohmann::json PromptRecord::to_json() const {
    nlohmann::json j{{"schema_version", 1},
                     {"id", id},
                     {"kind", prompt_kind_name(kind)},
                     {"text", text}};
    if (pronoun_family) j["pronoun_family"] = *pronoun_family;
    if (antecedent_kind) j["antecedent_kind"] = antecedent_kind_name(*antecedent_kind);
    if (gender) j["gender"] = gender->to_json();
    if (disclosure_form) j["disclosure_form"] = *disclosure_form;
    if (name) j["name"] = *name;
    if (template_id) j["template_id"] = *template_id;
    return j;
}

PromptRecord PromptRecord::from_json(const nlohmann::json& j) {
    PromptRecord r;
    r.id = j.at("id").get<std::string>();
    r.text = j.at("text").get<std::string>();
    auto kind = prompt_kind_from_name(j.at("kind").get<std::string>());
    if (!kind) raise(Status::parse, "prompt record " + r.id + ": unknown kind");
    r.kind = *kind;
    if (j.contains("pronoun_family")) r.pronoun_family = j["pronoun_family"].get<std::string>();
    if (j.contains("antecedent_kind")) {
        auto k = antecedent_kind_from_name(j["antecedent_kind"].get<std::string>());
        if (!k) raise(Status::parse, "prompt record " + r.id + ": unknown antecedent kind");
        r.antecedent_kind = *k;
    }
    if (j.contains("gender")) r.gender = GenderLabel::from_json(j["gender"]);
    if (j.contains("disclosure_form")) r.disclosure_form = j["disclosure_form"].get<std::string>();
    if (j.contains("name")) r.name = j["name"].get<std::string>();
    if (j.contains("template_id")) r.template_id = j["template_id"].get<std::string>();
    return r;
}

std::string fill_template(const MisgenderTemplate& tpl, const AntecedentSpec& antecedent,
                          const PronounEntry& family) {
    if (antecedent.text.empty())
        raise(Status::invalid_argument, "empty antecedent for template " + tpl.id);
    std::string text = tpl.text;
    replace_all(text, "<referent>", antecedent.text);
    for (const auto& slot : kSlots) {
        if (text.find(slot.tag) == std::string::npos) continue;
        std::string value;
        if (slot.pronoun_case) {
            value = family.form(*slot.pronoun_case);
            if (value.empty())
                raise(Status::validation, "family " + family.family + " lacks case " +
                                              pronoun_case_name(*slot.pronoun_case));
        } else {
            value = family.family == "they" ? "are" : "is";
        }
        replace_all(text, slot.tag, value);
    }
    check_no_placeholders(text, "template " + tpl.id);
    return capitalize_sentence(text);
}

std::vector<PromptRecord> build_misgendering_set(std::span<const MisgenderTemplate> templates,
                                                 std::span<const AntecedentSpec> antecedents,
                                                 std::span<const PronounEntry> families) {
    std::vector<PromptRecord> out;
    out.reserve(templates.size() * antecedents.size() * families.size());
    for (const auto& tpl : templates) {
        for (size_t ai = 0; ai < antecedents.size(); ++ai) {
            const auto& ant = antecedents[ai];
            for (const auto& fam : families) {
                PromptRecord rec;
                rec.kind = PromptKind::misgendering;
                rec.id = "m-" + tpl.id + "-a" + pad_index(ai, 2) + "-" + fam.family;
                rec.text = fill_template(tpl, ant, fam);
                rec.pronoun_family = fam.family;
                rec.antecedent_kind = ant.kind;
                rec.template_id = tpl.id;
                if (ant.kind != AntecedentKind::distal) rec.name = ant.text;
                out.push_back(std::move(rec));
            }
        }
    }
    return out;
}

std::vector<PromptRecord> build_misgendering_set(std::span<const MisgenderTemplate> templates,
                                                 const Lexicon& lexicon) {
    return build_misgendering_set(templates, lexicon.misgendering_antecedents(),
                                  lexicon.families());
}

void build_disclosure_set(const Lexicon& lexicon,
                          const std::function<void(PromptRecord&&)>& sink) {
    const auto& names = lexicon.names();
    const auto& forms = lexicon.disclosure_forms();
    const auto& genders = lexicon.disclosure_genders();
    for (size_t ni = 0; ni < names.size(); ++ni) {
        for (const auto& form : forms) {
            for (size_t gi = 0; gi < genders.size(); ++gi) {
                const auto& gender = genders[gi];
                const auto& pattern = form.pattern_for(gender.noun);
                std::string text = pattern.text;
                replace_all(text, "<referent>", names[ni].name);
                replace_all(text, "<gender_exp>", gender.term);
                fix_article(text, gender.term);
                check_no_placeholders(text, "disclosure form " + form.id);

                PromptRecord rec;
                rec.kind = form.style == DisclosureStyle::static_form
                               ? PromptKind::disclosure_static
                               : PromptKind::disclosure_dynamic;
                rec.id = "d-" + pad_index(ni, 4) + "-" + form.id + "-g" + pad_index(gi, 2);
                rec.text = capitalize_sentence(text);
                rec.gender = lexicon.normalize_gender(gender.term);
                rec.disclosure_form = form.id;
                rec.name = names[ni].name;
                sink(std::move(rec));
            }
        }
    }
}

std::vector<PromptRecord> build_disclosure_set(const Lexicon& lexicon) {
    std::vector<PromptRecord> out;
    out.reserve(lexicon.names().size() * lexicon.disclosure_forms().size() *
                lexicon.disclosure_genders().size());
    build_disclosure_set(lexicon, [&out](PromptRecord&& rec) { out.push_back(std::move(rec)); });
    return out;
}

std::vector<PromptRecord> build_static_continuation_prompts(std::span<const std::string> names,
                                                            std::span<const std::string> gender_terms,
                                                            const Lexicon& lexicon) {
    std::vector<PromptRecord> out;
    out.reserve(names.size() * gender_terms.size());
    for (size_t ni = 0; ni < names.size(); ++ni) {
        for (size_t gi = 0; gi < gender_terms.size(); ++gi) {
            const std::string& term = gender_terms[gi];
            std::string text = names[ni] + " is ";
            if (lexicon.gender_term_is_noun(term)) {
                char c = term.empty() ? 'x' : term[0];
                bool vowel = c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u';
                text += vowel ? "an " : "a ";
            }
            text += term + " and";

            PromptRecord rec;
            rec.kind = PromptKind::disclosure_static;
            rec.id = "s-" + pad_index(ni, 3) + "-g" + pad_index(gi, 2);
            rec.text = capitalize_sentence(text);
            rec.gender = lexicon.normalize_gender(term);
            rec.disclosure_form = "f01";
            rec.name = names[ni];
            out.push_back(std::move(rec));
        }
    }
    return out;
}

std::string to_chat_prompt(const PromptRecord& record, int max_tokens) {
    if (record.text.empty()) raise(Status::invalid_argument, "empty prompt");
    return "Please generate " + std::to_string(max_tokens) +
           " tokens using the following prompt: " + ascii_lower(record.text);
}

} // namespace genaff
