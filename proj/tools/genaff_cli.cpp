// Command-line front end. Everything goes through the C API in genaff.h; the
// heavy lifting lives in the shared library.

#include <genaff.h>

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <string>

namespace {

std::string json_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size() + 8);
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (uint8_t(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                    out += buf;
                } else {
                    out.push_back(c);
                }
        }
    }
    return out;
}

const char* status_name(genaff_status s) {
    switch (s) {
        case GENAFF_OK: return "ok";
        case GENAFF_ERR_INVALID_ARGUMENT: return "invalid_argument";
        case GENAFF_ERR_IO: return "io";
        case GENAFF_ERR_PARSE: return "parse";
        case GENAFF_ERR_VALIDATION: return "validation";
        case GENAFF_ERR_ENDPOINT: return "endpoint";
        case GENAFF_ERR_MISSING_INPUT: return "missing_input";
        case GENAFF_ERR_INTERNAL: return "internal";
    }
    return "unknown";
}

int finish(genaff_status status, const std::string& success_message) {
    if (status == GENAFF_OK) {
        if (!success_message.empty()) std::printf("%s\n", success_message.c_str());
        return 0;
    }
    std::fprintf(stderr, "{\"error\":{\"code\":%d,\"status\":\"%s\",\"message\":\"%s\"}}\n",
                 int(status), status_name(status), json_escape(genaff_last_error()).c_str());
    return 1;
}

const char* opt_cstr(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Misgendering and gender-disclosure toxicity evaluation for open language "
                 "generation"};
    app.require_subcommand(1);
    app.set_version_flag("--version", []() { return std::string(genaff_version()); });

    // Common option storage.
    std::string lexicon = "default", templates, set_name, out, run_dir, config;
    std::string prompts, model, generations, report_dir, perplexity_file, toxicity_endpoint;
    std::string evals, annotations, toxicity, table, plot_kind;
    uint64_t sample = 0;
    int64_t sample_seed = 0;
    genaff_generate_opts gen{};
    gen.max_new_tokens = 100;
    gen.top_k = 50;
    gen.top_p = 0.95;
    gen.workers = 1;
    gen.retry_attempts = 4;
    gen.retry_base_ms = 250.0;
    std::string cache_path;
    int64_t decode_seed = 0;
    bool no_strip_echo = false;

    auto add_sample_flags = [&](CLI::App* cmd) {
        cmd->add_option("--sample", sample, "Uniform stratified subsample size (0 = all)");
        cmd->add_option("--sample-seed", sample_seed, "Seed for subsampling");
    };

    auto* gp = app.add_subcommand("generate-prompts", "Instantiate a prompt set as JSONL");
    gp->add_option("--set", set_name, "misgendering | disclosure | static")->required();
    gp->add_option("--lexicon", lexicon, "Lexicon file ('default' = $GENAFF_DATA_DIR)");
    gp->add_option("--templates", templates, "Misgendering template file");
    gp->add_option("--out", out, "Output JSONL")->required();
    gp->add_option("--run", run_dir, "Run directory for the manifest");
    add_sample_flags(gp);

    auto* rg = app.add_subcommand("run-generation", "Drive a completion endpoint over prompts");
    rg->add_option("--prompts", prompts, "Prompt JSONL")->required();
    rg->add_option("--model", model, "mock[:k=v,...] or model id from --config")->required();
    rg->add_option("--config", config, "Endpoint config JSON");
    rg->add_option("--lexicon", lexicon, "Lexicon file");
    rg->add_option("--out", out, "Output JSONL")->required();
    rg->add_option("--max-new-tokens", gen.max_new_tokens, "Decode length (default 100)");
    rg->add_option("--top-k", gen.top_k, "Top-k (default 50)");
    rg->add_option("--top-p", gen.top_p, "Nucleus mass (default 0.95)");
    auto* seed_opt = rg->add_option("--seed", decode_seed, "Decode seed");
    rg->add_option("--workers", gen.workers, "Parallel request workers");
    rg->add_option("--cache", cache_path, "Generation cache JSONL");
    rg->add_option("--retries", gen.retry_attempts, "Max attempts per request");
    rg->add_option("--rate", gen.rate_per_sec, "Requests per second (0 = unlimited)");
    rg->add_option("--run", run_dir, "Run directory for the manifest");
    add_sample_flags(rg);

    auto* sp = app.add_subcommand("score-perplexity", "Teacher-forced perplexity per prompt");
    sp->add_option("--prompts", prompts, "Prompt JSONL")->required();
    sp->add_option("--model", model, "mock[:k=v,...] or model id from --config")->required();
    sp->add_option("--config", config, "Endpoint config JSON");
    sp->add_option("--lexicon", lexicon, "Lexicon file");
    sp->add_option("--out", out, "Output JSONL")->required();
    sp->add_option("--run", run_dir, "Run directory for the manifest");
    add_sample_flags(sp);

    auto* em = app.add_subcommand("evaluate-misgendering",
                                  "First-pronoun consistency over generations");
    em->add_option("--generations", generations, "Generation JSONL")->required();
    em->add_option("--lexicon", lexicon, "Lexicon file");
    em->add_option("--out", out, "Evaluation JSONL")->required();
    em->add_option("--report", report_dir, "Report directory (matrix + antecedent table)");
    em->add_flag("--no-strip-echo", no_strip_echo, "Keep echoed prompts in continuations");
    bool count_no_pronoun = false;
    em->add_flag("--count-no-pronoun", count_no_pronoun,
                 "Count no-pronoun generations in consistency denominators");
    em->add_option("--perplexity", perplexity_file, "Per-prompt perplexity JSONL to join");
    em->add_option("--run", run_dir, "Run directory for the manifest");

    auto* ed = app.add_subcommand("evaluate-disclosure",
                                  "Toxicity scoring over disclosure generations");
    ed->add_option("--generations", generations, "Generation JSONL")->required();
    ed->add_option("--toxicity-endpoint", toxicity_endpoint,
                   "URL, mock:<file>, or mockrate:tgnb=..,binary=..")
        ->required();
    ed->add_option("--lexicon", lexicon, "Lexicon file");
    ed->add_option("--out", out, "Toxicity JSONL")->required();
    ed->add_option("--report", report_dir, "Report directory (proportions + toxic diff)");
    ed->add_flag("--no-strip-echo", no_strip_echo, "Keep echoed prompts in scored text");
    ed->add_option("--run", run_dir, "Run directory for the manifest");

    auto* st = app.add_subcommand("stats", "Statistical battery over evaluation records");
    st->add_option("--evals", evals, "Misgendering evaluation JSONL");
    st->add_option("--annotations", annotations, "Annotation CSV");
    st->add_option("--toxicity", toxicity, "Toxicity JSONL");
    st->add_option("--out", out, "Output directory")->required();
    st->add_option("--run", run_dir, "Run directory for the manifest");

    auto* rp = app.add_subcommand("report", "Emit table/figure data from a run directory");
    rp->add_option("--run", run_dir, "Run directory")->required();
    rp->add_option("--table", table, "all | amt | antecedent | matrix | toxicity | toxic-diff")
        ->required();
    rp->add_option("--out", out, "Output directory (default <run>/reports)");
    rp->add_option("--lexicon", lexicon, "Lexicon file");
    bool seal_run = false;
    rp->add_flag("--seal", seal_run, "Mark the run manifest immutable after emitting");

    auto* pl = app.add_subcommand("plot", "Render a simple SVG for a report kind");
    pl->add_option("--run", run_dir, "Run directory")->required();
    pl->add_option("--kind", plot_kind, "matrix | toxicity")->required();
    pl->add_option("--out", out, "Output SVG path")->required();
    pl->add_option("--lexicon", lexicon, "Lexicon file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2; // unknown subcommand / bad flags: usage error
    }

    genaff_sample_opts sample_opts{sample, sample_seed};
    gen.cache_path = opt_cstr(cache_path);
    if (seed_opt->count() > 0) {
        gen.seed = decode_seed;
        gen.has_seed = 1;
    }

    uint64_t count = 0;
    if (gp->parsed()) {
        auto status = genaff_generate_prompts(lexicon.c_str(), opt_cstr(templates),
                                              set_name.c_str(), out.c_str(), &sample_opts,
                                              opt_cstr(run_dir), &count);
        return finish(status, std::to_string(count) + " prompts -> " + out);
    }
    if (rg->parsed()) {
        auto status = genaff_run_generation(prompts.c_str(), model.c_str(), opt_cstr(config),
                                            lexicon.c_str(), out.c_str(), &gen, &sample_opts,
                                            opt_cstr(run_dir), &count);
        return finish(status, std::to_string(count) + " generations -> " + out);
    }
    if (sp->parsed()) {
        auto status = genaff_score_perplexity_file(prompts.c_str(), model.c_str(),
                                                   opt_cstr(config), lexicon.c_str(), out.c_str(),
                                                   &sample_opts, opt_cstr(run_dir), &count);
        return finish(status, std::to_string(count) + " perplexity scores -> " + out);
    }
    if (em->parsed()) {
        auto status = genaff_evaluate_misgendering(generations.c_str(), lexicon.c_str(),
                                                   out.c_str(), opt_cstr(report_dir),
                                                   no_strip_echo ? 0 : 1,
                                                   count_no_pronoun ? 1 : 0,
                                                   opt_cstr(perplexity_file), opt_cstr(run_dir),
                                                   &count);
        return finish(status, std::to_string(count) + " evaluations -> " + out);
    }
    if (ed->parsed()) {
        auto status = genaff_evaluate_disclosure(generations.c_str(), toxicity_endpoint.c_str(),
                                                 lexicon.c_str(), out.c_str(),
                                                 opt_cstr(report_dir), no_strip_echo ? 0 : 1,
                                                 opt_cstr(run_dir), &count);
        return finish(status, std::to_string(count) + " toxicity records -> " + out);
    }
    if (st->parsed()) {
        auto status = genaff_stats(opt_cstr(evals), opt_cstr(annotations), opt_cstr(toxicity),
                                   out.c_str(), opt_cstr(run_dir));
        return finish(status, "stats -> " + out);
    }
    if (rp->parsed()) {
        auto status = genaff_report(run_dir.c_str(), table.c_str(), opt_cstr(out),
                                    lexicon.c_str(), seal_run ? 1 : 0);
        return finish(status, "report " + table + " -> " +
                                  (out.empty() ? run_dir + "/reports" : out));
    }
    if (pl->parsed()) {
        auto status = genaff_plot(run_dir.c_str(), plot_kind.c_str(), out.c_str(),
                                  lexicon.c_str());
        return finish(status, "plot -> " + out);
    }
    return 2;
}
