#include "genaff/pipeline.hpp"

#include "genaff/jsonl.hpp"

#include <filesystem>
#include <fstream>
#include <map>

namespace genaff::pipeline {

namespace fs = std::filesystem;

namespace {

std::string fallback(const std::string& value, const std::string& fallback_value) {
    return value.empty() ? fallback_value : value;
}

std::vector<PromptRecord> load_prompts(const std::string& path) {
    std::vector<PromptRecord> out;
    for_each_jsonl(path, [&out](const nlohmann::json& row) {
        out.push_back(PromptRecord::from_json(row));
    });
    return out;
}

std::vector<PromptRecord> apply_sample(std::vector<PromptRecord> records,
                                       const SampleOpts& sample) {
    if (sample.sample == 0 || sample.sample >= records.size()) return records;
    std::vector<std::string> strata;
    strata.reserve(records.size());
    for (const auto& r : records) {
        // Stratify misgendering prompts by pronoun family, disclosure prompts
        // by gender group.
        if (r.pronoun_family) strata.push_back(*r.pronoun_family);
        else if (r.gender) strata.push_back(gender_group_name(r.gender->group));
        else strata.push_back("other");
    }
    auto keep = stratified_sample_indices(strata, sample.sample, sample.seed);
    std::vector<PromptRecord> out;
    out.reserve(keep.size());
    for (size_t i : keep) out.push_back(std::move(records[i]));
    return out;
}

nlohmann::json sample_json(const SampleOpts& sample) {
    return {{"sample", sample.sample}, {"seed", sample.seed}};
}

std::shared_ptr<const Lexicon> load_lexicon_shared(const std::string& path) {
    return std::make_shared<const Lexicon>(Lexicon::load(fallback(path, default_lexicon_path())));
}

} // namespace

Endpoint* make_endpoint(const std::string& model_spec, const std::string& config_path,
                        const Lexicon& lexicon, std::unique_ptr<Endpoint>& holder) {
    if (is_mock_spec(model_spec)) {
        auto params = parse_mock_spec(model_spec, lexicon);
        auto shared = std::make_shared<const Lexicon>(lexicon);
        holder = std::make_unique<MockModel>(shared, params);
        return holder.get();
    }
    if (config_path.empty())
        raise(Status::missing_input,
              "model \"" + model_spec + "\" needs --config with an endpoints section");
    std::ifstream in(config_path);
    if (!in) raise(Status::io, "cannot open config: " + config_path);
    auto doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded()) raise(Status::parse, "config is not valid JSON: " + config_path);
    if (!doc.contains("endpoints") || !doc["endpoints"].contains(model_spec))
        raise(Status::missing_input,
              "config " + config_path + " has no endpoint for model \"" + model_spec + "\"");
    auto cfg = HttpEndpointConfig::from_json(doc["endpoints"][model_spec]);
    holder = std::make_unique<HttpEndpoint>(cfg);
    return holder.get();
}

size_t generate_prompts(const std::string& lexicon_path, const std::string& templates_path,
                        const std::string& set_name, const std::string& out_jsonl,
                        const SampleOpts& sample, const std::string& run_dir) {
    std::string lex_path = fallback(lexicon_path, default_lexicon_path());
    Lexicon lexicon = Lexicon::load(lex_path);

    std::vector<PromptRecord> records;
    std::string templates_used;
    if (set_name == "misgendering") {
        templates_used = fallback(templates_path, default_templates_path());
        auto templates = load_templates(templates_used);
        records = build_misgendering_set(templates, lexicon);
    } else if (set_name == "disclosure") {
        // The full product is large; stream it instead of materializing.
        JsonlWriter writer(out_jsonl);
        if (sample.sample > 0) {
            const auto& genders = lexicon.disclosure_genders();
            size_t total = lexicon.names().size() * lexicon.disclosure_forms().size() *
                           genders.size();
            std::vector<std::string> group_of_gender;
            for (const auto& g : genders)
                group_of_gender.push_back(
                    gender_group_name(lexicon.normalize_gender(g.term).group));
            std::vector<std::string> strata;
            strata.reserve(total);
            for (size_t i = 0; i < total; ++i)
                strata.push_back(group_of_gender[i % genders.size()]);
            auto keep = stratified_sample_indices(strata, sample.sample, sample.seed);
            std::vector<bool> selected(total, false);
            for (size_t i : keep) selected[i] = true;
            size_t index = 0;
            build_disclosure_set(lexicon, [&](PromptRecord&& rec) {
                if (selected[index++]) writer.write(rec.to_json());
            });
        } else {
            build_disclosure_set(lexicon,
                                 [&writer](PromptRecord&& rec) { writer.write(rec.to_json()); });
        }
        if (!run_dir.empty()) {
            auto store = RunStore::open(run_dir);
            store.record_stage("generate-prompts",
                               {{"lexicon", RunStore::file_digest(lex_path)}},
                               {{"prompts", out_jsonl}, {"count", writer.count()}},
                               {{"set", set_name}, {"sample", sample_json(sample)}});
        }
        return writer.count();
    } else if (set_name == "static") {
        auto names = lexicon.top_english_names(100);
        std::vector<std::string> terms = lexicon.static_identities();
        for (const auto& [head, members] : lexicon.gender_synonyms())
            for (const auto& m : members) terms.push_back(m);
        records = build_static_continuation_prompts(names, terms, lexicon);
    } else {
        raise(Status::invalid_argument,
              "unknown prompt set \"" + set_name + "\" (misgendering|disclosure|static)");
    }

    records = apply_sample(std::move(records), sample);
    JsonlWriter writer(out_jsonl);
    for (const auto& rec : records) writer.write(rec.to_json());

    if (!run_dir.empty()) {
        nlohmann::json inputs{{"lexicon", RunStore::file_digest(lex_path)}};
        if (!templates_used.empty())
            inputs["templates"] = RunStore::file_digest(templates_used);
        auto store = RunStore::open(run_dir);
        store.record_stage("generate-prompts", inputs,
                           {{"prompts", out_jsonl}, {"count", writer.count()}},
                           {{"set", set_name}, {"sample", sample_json(sample)}});
    }
    return writer.count();
}

size_t run_generation(const std::string& prompts_jsonl, const std::string& model_spec,
                      const std::string& config_path, const std::string& lexicon_path,
                      const std::string& out_jsonl, const GenerateOpts& opts,
                      const SampleOpts& sample, const std::string& run_dir) {
    auto lexicon = load_lexicon_shared(lexicon_path);
    std::unique_ptr<Endpoint> holder;
    Endpoint* endpoint = make_endpoint(model_spec, config_path, *lexicon, holder);

    auto prompts = apply_sample(load_prompts(prompts_jsonl), sample);

    std::unique_ptr<GenerationCache> cache;
    if (!opts.cache_path.empty()) cache = std::make_unique<GenerationCache>(opts.cache_path);
    std::unique_ptr<RateLimiter> limiter;
    if (opts.rate_per_sec > 0.0)
        limiter = std::make_unique<RateLimiter>(opts.rate_per_sec,
                                                std::max(opts.rate_burst, 1.0));

    auto results = generate_all(prompts, opts.decode, *endpoint, cache.get(), opts.workers,
                                opts.retry, limiter.get());
    JsonlWriter writer(out_jsonl);
    for (const auto& rec : results) writer.write(rec.to_json());

    if (!run_dir.empty()) {
        auto store = RunStore::open(run_dir, endpoint->model_id());
        store.record_stage("run-generation",
                           {{"prompts", RunStore::file_digest(prompts_jsonl)}},
                           {{"generations", out_jsonl}, {"count", writer.count()}},
                           {{"model", model_spec},
                            {"decode", opts.decode.to_json()},
                            {"workers", opts.workers},
                            {"sample", sample_json(sample)}});
    }
    return writer.count();
}

size_t score_perplexity_file(const std::string& prompts_jsonl, const std::string& model_spec,
                             const std::string& config_path, const std::string& lexicon_path,
                             const std::string& out_jsonl, const SampleOpts& sample,
                             const std::string& run_dir) {
    auto lexicon = load_lexicon_shared(lexicon_path);
    std::unique_ptr<Endpoint> holder;
    Endpoint* endpoint = make_endpoint(model_spec, config_path, *lexicon, holder);

    auto prompts = apply_sample(load_prompts(prompts_jsonl), sample);
    JsonlWriter writer(out_jsonl);
    for (const auto& prompt : prompts) {
        double ppl = score_perplexity(prompt.text, *endpoint);
        writer.write({{"schema_version", 1},
                      {"prompt_id", prompt.id},
                      {"perplexity", ppl},
                      {"model_id", endpoint->model_id()}});
    }
    if (!run_dir.empty()) {
        auto store = RunStore::open(run_dir, endpoint->model_id());
        store.record_stage("score-perplexity",
                           {{"prompts", RunStore::file_digest(prompts_jsonl)}},
                           {{"perplexity", out_jsonl}, {"count", writer.count()}},
                           {{"model", model_spec}, {"sample", sample_json(sample)}});
    }
    return writer.count();
}

size_t evaluate_misgendering(const std::string& generations_jsonl,
                             const std::string& lexicon_path, const std::string& out_jsonl,
                             const std::string& report_dir, const MisgenderEvalOpts& opts,
                             const std::string& run_dir) {
    std::string lex_path = fallback(lexicon_path, default_lexicon_path());
    Lexicon lexicon = Lexicon::load(lex_path);

    std::map<std::string, double> perplexity;
    if (!opts.perplexity_jsonl.empty()) {
        for_each_jsonl(opts.perplexity_jsonl, [&perplexity](const nlohmann::json& row) {
            perplexity[row.at("prompt_id").get<std::string>()] =
                row.at("perplexity").get<double>();
        });
    }

    EvalOptions eval_opts;
    eval_opts.strip_echo = opts.strip_echo;
    eval_opts.count_no_pronoun_in_denominator = opts.count_no_pronoun;

    std::vector<EvalRecord> evals;
    std::string model_id;
    for_each_jsonl(generations_jsonl, [&](const nlohmann::json& row) {
        auto gen = GenerationRecord::from_json(row);
        if (model_id.empty()) model_id = gen.model_id;
        auto eval = evaluate_generation(gen, lexicon, eval_opts);
        if (auto it = perplexity.find(eval.prompt_id); it != perplexity.end())
            eval.perplexity = it->second;
        evals.push_back(std::move(eval));
    });

    JsonlWriter writer(out_jsonl);
    for (const auto& rec : evals) writer.write(rec.to_json());

    if (!report_dir.empty()) {
        ReportInputs inputs;
        inputs.model_id = model_id;
        inputs.evals = evals;
        inputs.lexicon = &lexicon;
        inputs.eval_options = eval_opts;
        emit_report(ReportKind::distribution_matrix, inputs, report_dir);
        emit_report(ReportKind::antecedent_table, inputs, report_dir);
    }

    if (!run_dir.empty()) {
        auto store = RunStore::open(run_dir, model_id);
        store.record_stage("evaluate-misgendering",
                           {{"generations", RunStore::file_digest(generations_jsonl)},
                            {"lexicon", RunStore::file_digest(lex_path)}},
                           {{"evals", out_jsonl}, {"count", writer.count()}},
                           {{"strip_echo", opts.strip_echo},
                            {"count_no_pronoun", opts.count_no_pronoun}});
    }
    return writer.count();
}

size_t evaluate_disclosure(const std::string& generations_jsonl,
                           const std::string& toxicity_endpoint,
                           const std::string& lexicon_path, const std::string& out_jsonl,
                           const std::string& report_dir, const DisclosureEvalOpts& opts,
                           const std::string& run_dir) {
    std::string lex_path = fallback(lexicon_path, default_lexicon_path());
    Lexicon lexicon = Lexicon::load(lex_path);

    auto client = make_toxicity_client(toxicity_endpoint);
    ToxicityScorer scorer(*client);

    std::vector<ToxicityRecord> records;
    size_t skipped = 0;
    std::map<std::string, size_t> skip_reasons;
    std::string model_id;
    for_each_jsonl(generations_jsonl, [&](const nlohmann::json& row) {
        auto gen = GenerationRecord::from_json(row);
        if (model_id.empty()) model_id = gen.model_id;
        std::string reason;
        auto rec = score_toxicity(gen, scorer, default_audit_terms(), opts.strip_echo, &reason);
        if (!rec) {
            ++skipped;
            ++skip_reasons[reason];
            return;
        }
        records.push_back(std::move(*rec));
    });

    JsonlWriter writer(out_jsonl);
    for (const auto& rec : records) writer.write(rec.to_json());

    if (!report_dir.empty()) {
        ReportInputs inputs;
        inputs.model_id = model_id;
        inputs.toxicity = records;
        inputs.lexicon = &lexicon;
        emit_report(ReportKind::toxicity_proportions, inputs, report_dir);
        emit_report(ReportKind::toxic_diff_summary, inputs, report_dir);
    }

    if (!run_dir.empty()) {
        nlohmann::json skips = nlohmann::json::object();
        for (const auto& [reason, count] : skip_reasons) skips[reason] = count;
        auto store = RunStore::open(run_dir, model_id);
        store.record_stage("evaluate-disclosure",
                           {{"generations", RunStore::file_digest(generations_jsonl)}},
                           {{"toxicity", out_jsonl},
                            {"count", writer.count()},
                            {"skipped", skipped},
                            {"skip_reasons", skips}},
                           {{"endpoint", client->id()}, {"strip_echo", opts.strip_echo}});
    }
    return writer.count();
}

void run_stats(const std::string& evals_jsonl, const std::string& annotations_csv,
               const std::string& toxicity_jsonl, const std::string& out_dir,
               const std::string& run_dir) {
    if (evals_jsonl.empty() && toxicity_jsonl.empty())
        raise(Status::missing_input, "stats needs evaluations or toxicity records");
    fs::create_directories(out_dir);

    nlohmann::json doc{{"schema_version", 1}};
    std::vector<std::pair<std::string, stats::TestResult>> test_rows;

    if (!evals_jsonl.empty()) {
        std::vector<EvalRecord> evals;
        for_each_jsonl(evals_jsonl, [&evals](const nlohmann::json& row) {
            evals.push_back(EvalRecord::from_json(row));
        });

        // Consistency indicator per pronoun group / antecedent kind, plus
        // per-group lexical diversity and perplexity.
        std::map<std::string, std::vector<double>> by_group, by_kind;
        std::map<std::string, std::vector<double>> ppl_by_group, ttr_by_group;
        std::map<std::string, std::string> group_of_prompt;
        std::vector<double> named_ppl, distal_ppl;
        for (const auto& e : evals) {
            if (!e.prompt.pronoun_family) continue;
            std::string group = pronoun_group(*e.prompt.pronoun_family);
            group_of_prompt[e.prompt_id] = group;
            if (e.label.value != Consistency::no_pronoun) {
                double v = e.label.value == Consistency::consistent ? 1.0 : 0.0;
                by_group[group].push_back(v);
                if (e.prompt.antecedent_kind)
                    by_kind[antecedent_kind_name(*e.prompt.antecedent_kind)].push_back(v);
            }
            if (e.ttr) ttr_by_group[group].push_back(*e.ttr);
            if (e.perplexity) {
                ppl_by_group[group].push_back(*e.perplexity);
                if (e.prompt.antecedent_kind) {
                    if (*e.prompt.antecedent_kind == AntecedentKind::distal)
                        distal_ppl.push_back(*e.perplexity);
                    else
                        named_ppl.push_back(*e.perplexity);
                }
            }
        }
        auto groups_of = [](const std::map<std::string, std::vector<double>>& m) {
            std::vector<std::vector<double>> out;
            for (const auto& [k, v] : m)
                if (!v.empty()) out.push_back(v);
            return out;
        };
        if (auto groups = groups_of(by_group); groups.size() >= 2) {
            auto r = stats::kruskal_wallis(groups);
            doc["consistency_by_pronoun_group_kw"] = r.to_json();
            test_rows.emplace_back("consistency_by_pronoun_group_kw", r);
        }
        if (auto groups = groups_of(by_kind); groups.size() >= 2) {
            auto r = stats::kruskal_wallis(groups);
            doc["consistency_by_antecedent_kind_kw"] = r.to_json();
            test_rows.emplace_back("consistency_by_antecedent_kind_kw", r);
        }
        if (auto groups = groups_of(ppl_by_group); groups.size() >= 2) {
            auto r = stats::kruskal_wallis(groups);
            doc["perplexity_by_pronoun_group_kw"] = r.to_json();
            test_rows.emplace_back("perplexity_by_pronoun_group_kw", r);
        }
        if (auto groups = groups_of(ttr_by_group); groups.size() >= 2) {
            auto r = stats::kruskal_wallis(groups);
            doc["ttr_by_pronoun_group_kw"] = r.to_json();
            test_rows.emplace_back("ttr_by_pronoun_group_kw", r);
        }
        if (!named_ppl.empty() && !distal_ppl.empty()) {
            auto r = stats::mann_whitney_u(named_ppl, distal_ppl);
            doc["perplexity_named_vs_distal_mwu"] = r.to_json();
            test_rows.emplace_back("perplexity_named_vs_distal_mwu", r);
        }

        if (!annotations_csv.empty()) {
            auto annotations = stats::load_annotations_csv(annotations_csv);

            std::map<std::string, std::vector<double>> relevance_by_group, coherence_by_group;
            for (const auto& a : annotations) {
                auto it = group_of_prompt.find(a.prompt_id);
                if (it == group_of_prompt.end()) continue;
                relevance_by_group[it->second].push_back(double(a.relevance));
                coherence_by_group[it->second].push_back(double(a.coherence));
            }
            if (auto groups = groups_of(relevance_by_group); groups.size() >= 2) {
                auto r = stats::kruskal_wallis(groups);
                doc["relevance_by_pronoun_group_kw"] = r.to_json();
                test_rows.emplace_back("relevance_by_pronoun_group_kw", r);
            }
            if (auto groups = groups_of(coherence_by_group); groups.size() >= 2) {
                auto r = stats::kruskal_wallis(groups);
                doc["coherence_by_pronoun_group_kw"] = r.to_json();
                test_rows.emplace_back("coherence_by_pronoun_group_kw", r);
            }

            auto block = agreement_block(evals, annotations);
            doc["tool_vs_annotation"] = block.metrics.to_json();
            doc["n_aligned"] = block.n_aligned;
            if (block.spearman) {
                doc["spearman_tool_vs_annotation"] = block.spearman->to_json();
                test_rows.emplace_back("spearman_tool_vs_annotation", *block.spearman);
            }
            if (block.alpha_consistency) doc["alpha_consistency"] = *block.alpha_consistency;
            if (block.alpha_relevance) doc["alpha_relevance"] = *block.alpha_relevance;
            if (block.alpha_coherence) doc["alpha_coherence"] = *block.alpha_coherence;
        }
    }

    if (!toxicity_jsonl.empty()) {
        std::vector<ToxicityRecord> tox;
        for_each_jsonl(toxicity_jsonl, [&tox](const nlohmann::json& row) {
            tox.push_back(ToxicityRecord::from_json(row));
        });
        std::map<std::string, std::pair<double, double>> counts; // group -> (toxic, nontoxic)
        std::map<std::string, std::pair<double, double>> term_counts;
        for (const auto& t : tox) {
            auto& c = counts[gender_group_name(t.gender.group)];
            (t.toxic ? c.first : c.second) += 1.0;
            auto& tc = term_counts[gender_group_name(t.gender.group)];
            (t.term_present ? tc.first : tc.second) += 1.0;
        }
        auto to_table = [](const std::map<std::string, std::pair<double, double>>& m) {
            std::vector<std::vector<double>> table;
            for (const auto& [k, v] : m) table.push_back({v.first, v.second});
            return table;
        };
        if (counts.size() >= 2) {
            try {
                auto r = stats::chi_square(to_table(counts));
                doc["toxicity_group_chi_square"] = r.to_json();
                test_rows.emplace_back("toxicity_group_chi_square", r);
            } catch (const Error& e) {
                doc["toxicity_group_chi_square_error"] = e.what();
            }
            try {
                auto r = stats::chi_square(to_table(term_counts));
                doc["term_presence_group_chi_square"] = r.to_json();
                test_rows.emplace_back("term_presence_group_chi_square", r);
            } catch (const Error& e) {
                doc["term_presence_group_chi_square_error"] = e.what();
            }
        }
    }

    {
        std::ofstream out(fs::path(out_dir) / "stats.json", std::ios::trunc);
        if (!out) raise(Status::io, "cannot write stats.json under " + out_dir);
        out << doc.dump(1) << '\n';
    }
    {
        std::ofstream out(fs::path(out_dir) / "stat_tests.csv", std::ios::trunc);
        if (!out) raise(Status::io, "cannot write stat_tests.csv under " + out_dir);
        out << "test,method,statistic,p_value,n\n";
        for (const auto& [name, r] : test_rows) {
            out << name << ',' << r.method << ',' << csv_number(r.statistic) << ','
                << csv_number(r.p_value) << ',';
            for (size_t i = 0; i < r.n.size(); ++i) out << (i ? ";" : "") << r.n[i];
            out << "\n";
        }
    }

    if (!run_dir.empty()) {
        nlohmann::json inputs = nlohmann::json::object();
        if (!evals_jsonl.empty()) inputs["evals"] = RunStore::file_digest(evals_jsonl);
        if (!annotations_csv.empty())
            inputs["annotations"] = RunStore::file_digest(annotations_csv);
        if (!toxicity_jsonl.empty()) inputs["toxicity"] = RunStore::file_digest(toxicity_jsonl);
        auto store = RunStore::open(run_dir);
        store.record_stage("stats", inputs, {{"out_dir", out_dir}}, nlohmann::json::object());
    }
}

std::vector<std::string> emit_reports(const std::string& run_dir, const std::string& kind,
                                      const std::string& out_dir,
                                      const std::string& lexicon_path) {
    auto store = RunStore::open(run_dir);
    Lexicon lexicon = Lexicon::load(fallback(lexicon_path, default_lexicon_path()));

    ReportInputs inputs;
    inputs.model_id = store.model_id();
    inputs.lexicon = &lexicon;
    // Reports honor the denominator choice the evaluation stage ran with.
    for (const auto& stage : store.manifest().value("stages", nlohmann::json::array())) {
        if (stage.value("stage", "") == "evaluate-misgendering")
            inputs.eval_options.count_no_pronoun_in_denominator =
                stage["config"].value("count_no_pronoun", false);
    }
    std::string evals_path = store.path(RunStore::kEvals);
    if (fs::exists(evals_path)) {
        for_each_jsonl(evals_path, [&inputs](const nlohmann::json& row) {
            inputs.evals.push_back(EvalRecord::from_json(row));
        });
    }
    std::string tox_path = store.path(RunStore::kToxicity);
    if (fs::exists(tox_path)) {
        for_each_jsonl(tox_path, [&inputs](const nlohmann::json& row) {
            inputs.toxicity.push_back(ToxicityRecord::from_json(row));
        });
    }
    std::string ann_path = store.path(RunStore::kAnnotations);
    if (fs::exists(ann_path)) inputs.annotations = stats::load_annotations_csv(ann_path);

    std::string target = out_dir.empty() ? store.path(RunStore::kReports) : out_dir;
    std::vector<std::string> written;
    if (kind == "all") {
        // Emit every kind whose upstream stage has run; error only when
        // nothing can be produced.
        std::string first_error;
        for (auto k : all_report_kinds()) {
            try {
                auto files = emit_report(k, inputs, target);
                written.insert(written.end(), files.begin(), files.end());
            } catch (const Error& e) {
                if (e.status() != Status::missing_input) throw;
                if (first_error.empty()) first_error = e.what();
            }
        }
        if (written.empty())
            raise(Status::missing_input,
                  "no report inputs found in " + run_dir + " (" + first_error + ")");
        return written;
    }
    std::vector<ReportKind> kinds;
    {
        auto k = report_kind_from_name(kind);
        if (!k) {
            // Short table aliases used by the CLI.
            if (kind == "amt") k = ReportKind::consistency_table;
            else if (kind == "antecedent") k = ReportKind::antecedent_table;
            else if (kind == "matrix") k = ReportKind::distribution_matrix;
            else if (kind == "toxicity") k = ReportKind::toxicity_proportions;
            else if (kind == "toxic-diff") k = ReportKind::toxic_diff_summary;
        }
        if (!k) raise(Status::invalid_argument, "unknown report kind \"" + kind + "\"");
        kinds.push_back(*k);
    }
    for (auto k : kinds) {
        auto files = emit_report(k, inputs, target);
        written.insert(written.end(), files.begin(), files.end());
    }
    return written;
}

void plot(const std::string& run_dir, const std::string& kind, const std::string& out_svg,
          const std::string& lexicon_path) {
    auto store = RunStore::open(run_dir);
    Lexicon lexicon = Lexicon::load(fallback(lexicon_path, default_lexicon_path()));
    ReportInputs inputs;
    inputs.model_id = store.model_id();
    inputs.lexicon = &lexicon;

    ReportKind k;
    if (kind == "matrix" || kind == "distribution_matrix") k = ReportKind::distribution_matrix;
    else if (kind == "toxicity" || kind == "toxicity_proportions")
        k = ReportKind::toxicity_proportions;
    else raise(Status::invalid_argument, "plot supports kinds: matrix, toxicity");

    if (k == ReportKind::distribution_matrix) {
        std::string evals_path = store.path(RunStore::kEvals);
        if (!fs::exists(evals_path))
            raise(Status::missing_input, "run has no evals.jsonl; run evaluate-misgendering first");
        for_each_jsonl(evals_path, [&inputs](const nlohmann::json& row) {
            inputs.evals.push_back(EvalRecord::from_json(row));
        });
    } else {
        std::string tox_path = store.path(RunStore::kToxicity);
        if (!fs::exists(tox_path))
            raise(Status::missing_input, "run has no toxicity.jsonl; run evaluate-disclosure first");
        for_each_jsonl(tox_path, [&inputs](const nlohmann::json& row) {
            inputs.toxicity.push_back(ToxicityRecord::from_json(row));
        });
    }
    render_svg(k, inputs, out_svg);
}

} // namespace genaff::pipeline
