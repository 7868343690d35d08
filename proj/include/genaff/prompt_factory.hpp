#pragma once

#include "genaff/lexicon.hpp"

#include <json.hpp>

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace genaff {

// A sentence with a referent slot followed by case-tagged pronoun slots.
// Tags: <referent>, <p_nom>, <p_acc>, <p_gen_attr>, <p_gen_pred>, <p_refl>,
// plus <be> which resolves to "are" for singular they and "is" otherwise.
struct MisgenderTemplate {
    std::string id;
    std::string text;
};

std::vector<MisgenderTemplate> load_templates(const std::string& path);
MisgenderTemplate validate_template(std::string id, std::string text);

enum class PromptKind : uint8_t { misgendering, disclosure_static, disclosure_dynamic };

const char* prompt_kind_name(PromptKind k);
std::optional<PromptKind> prompt_kind_from_name(std::string_view name);

struct PromptRecord {
    std::string id;
    std::string text;
    PromptKind kind = PromptKind::misgendering;
    std::optional<std::string> pronoun_family;
    std::optional<AntecedentKind> antecedent_kind;
    std::optional<GenderLabel> gender;
    std::optional<std::string> disclosure_form;
    std::optional<std::string> name;
    std::optional<std::string> template_id;

    nlohmann::json to_json() const;
    static PromptRecord from_json(const nlohmann::json& j);
};

std::string fill_template(const MisgenderTemplate& tpl, const AntecedentSpec& antecedent,
                          const PronounEntry& family);

std::vector<PromptRecord> build_misgendering_set(std::span<const MisgenderTemplate> templates,
                                                 std::span<const AntecedentSpec> antecedents,
                                                 std::span<const PronounEntry> families);
std::vector<PromptRecord> build_misgendering_set(std::span<const MisgenderTemplate> templates,
                                                 const Lexicon& lexicon);

// Streams the full names x forms x genders product without materializing it.
void build_disclosure_set(const Lexicon& lexicon,
                          const std::function<void(PromptRecord&&)>& sink);
std::vector<PromptRecord> build_disclosure_set(const Lexicon& lexicon);

// One "<referent> is <gender term> and" continuation trigger per pair.
std::vector<PromptRecord> build_static_continuation_prompts(std::span<const std::string> names,
                                                            std::span<const std::string> gender_terms,
                                                            const Lexicon& lexicon);

// Dialogue-API adaptation: instruction wrapper plus lowercased prompt.
std::string to_chat_prompt(const PromptRecord& record, int max_tokens = 100);

} // namespace genaff
