#pragma once

#include "genaff/gen_client.hpp"
#include "genaff/lexicon.hpp"
#include "genaff/textutil.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace genaff {

// Only valid for prompts with a single referent and a single pronoun family;
// the prompt factory guarantees that precondition.

// If the continuation begins with the prompt (case- and whitespace-
// insensitive), returns the remainder and true.
std::pair<std::string, bool> strip_echo(std::string_view prompt_text,
                                        std::string_view continuation);

struct PronounDetection {
    size_t family_index = 0;
    std::string family;
    CaseBucket cases = 0;
    size_t token_index = 0;
};

// First token owned by any family, skipping (and counting elsewhere) tokens
// directly preceded by a determiner.
std::optional<PronounDetection> first_pronoun(std::span<const std::string> tokens,
                                              const Lexicon& lexicon);

enum class Consistency : uint8_t { consistent, inconsistent, no_pronoun };

const char* consistency_name(Consistency c);
std::optional<Consistency> consistency_from_name(std::string_view name);

struct ConsistencyLabel {
    Consistency value = Consistency::no_pronoun;
    std::optional<std::string> detected_family;
    std::optional<CaseBucket> detected_case;
    std::optional<size_t> detected_index;
};

ConsistencyLabel consistency_label(std::string_view prompt_family,
                                   const std::optional<PronounDetection>& detection);

// Bigrams (a|an|the, pronoun form).
size_t determiner_errors(std::span<const std::string> tokens, const Lexicon& lexicon);

// Distinct / total tokens; throws on an empty token list.
double ttr(std::span<const std::string> tokens);

struct EvalRecord {
    std::string prompt_id;
    ConsistencyLabel label;
    size_t det_errors = 0;
    std::optional<double> ttr; // absent when the stripped continuation has no tokens
    std::optional<double> perplexity;
    bool echo_stripped = false;
    PromptRecord prompt;

    nlohmann::json to_json() const;
    static EvalRecord from_json(const nlohmann::json& j);
};

struct EvalOptions {
    bool strip_echo = true;
    // Count no_pronoun records in the consistency denominator instead of
    // reporting their rate separately.
    bool count_no_pronoun_in_denominator = false;
};

EvalRecord evaluate_generation(const GenerationRecord& generation, const Lexicon& lexicon,
                               const EvalOptions& options = {});

// Template family x detected family counts, with a trailing no_pronoun column.
struct DistributionMatrix {
    std::vector<std::string> template_families;
    std::vector<std::string> detected_labels; // families + "no_pronoun"
    std::vector<std::vector<long>> counts;

    std::vector<std::vector<double>> row_normalized() const;
    long row_total(size_t row) const;
};

DistributionMatrix pronoun_distribution(std::span<const EvalRecord> records,
                                        const Lexicon& lexicon);

// Per template family, counts of detected case buckets (merged buckets like
// "accusative|genitive_attributive" stay merged).
using CaseDiversity = std::map<std::string, std::map<std::string, long>>;

CaseDiversity case_diversity(std::span<const EvalRecord> records);

// she/he -> binary, they -> they, everything else -> neo.
std::string pronoun_group(std::string_view family);

enum class GroupKey { antecedent_kind, pronoun_group };

struct GroupStats {
    std::string group;
    size_t n_consistent = 0;
    size_t n_inconsistent = 0;
    size_t n_no_pronoun = 0;
    double consistency = 0.0;    // consistent / (consistent + inconsistent)
    double no_pronoun_rate = 0.0;
    std::optional<double> mean_perplexity;
    size_t n_perplexity = 0;
};

struct GroupDelta {
    std::string a;
    std::string b;
    double abs_delta_consistency = 0.0;
    std::optional<double> abs_delta_perplexity;
};

struct GroupTable {
    std::vector<GroupStats> rows;
    std::vector<GroupDelta> deltas;
    std::vector<std::string> warnings;

    nlohmann::json to_json() const;
};

// For antecedent_kind the delta row compares the named kinds pooled against
// distal; for pronoun_group all pairs are reported.
GroupTable grouped_comparison(std::span<const EvalRecord> records, GroupKey key,
                              const EvalOptions& options = {});

} // namespace genaff
