// Command-line front end: ingestion, annotation, metrics, diversity, SAE
// measures, attribution scoring, the puzzle engine, and the estimation
// commands, wired over the library headers.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tracelab/attribution.hpp"
#include "tracelab/config.hpp"
#include "tracelab/countdown.hpp"
#include "tracelab/endpoint.hpp"
#include "tracelab/judge.hpp"
#include "tracelab/metrics.hpp"
#include "tracelab/pipeline.hpp"
#include "tracelab/prompts.hpp"
#include "tracelab/sae.hpp"
#include "tracelab/sem.hpp"
#include "tracelab/stats.hpp"
#include "tracelab/table.hpp"
#include "tracelab/trace.hpp"

namespace fs = std::filesystem;
using namespace tracelab;
using ordered_json = nlohmann::ordered_json;

namespace {

struct GlobalArgs {
    std::string config_path;
    std::string cache_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
    std::string corpus;
    std::string out_dir;
};

RunConfig effective_config(const GlobalArgs& g) {
    RunConfig config;
    if (!g.config_path.empty()) config = load_run_config(g.config_path);
    if (!g.cache_path.empty()) config.cache = g.cache_path;
    if (g.seed) config.seed = *g.seed;
    if (g.jobs) config.jobs = *g.jobs;
    if (!g.corpus.empty()) config.corpus = g.corpus;
    if (!g.out_dir.empty()) config.out_dir = g.out_dir;
    config.validate();
    return config;
}

std::unique_ptr<judge::CompletionClient> make_endpoint(const RunConfig& config) {
    if (config.endpoint_base_url.empty()) return nullptr;
    judge::EndpointConfig ec;
    ec.base_url = config.endpoint_base_url;
    ec.model = config.endpoint_model;
    ec.temperature = config.endpoint_temperature;
    ec.api_key_env = config.api_key_env;
    return std::make_unique<judge::HttpCompletionClient>(ec);
}

std::vector<std::int64_t> parse_number_list(const std::string& csv) {
    std::vector<std::int64_t> out;
    for (const auto& piece : split(csv, ','))
        if (!trim(piece).empty()) out.push_back(std::stoll(trim(piece)));
    return out;
}

std::vector<double> read_vector_file(const fs::path& path) {
    std::istringstream in(read_file(path));
    std::vector<double> out;
    double v;
    while (in >> v) out.push_back(v);
    return out;
}

stats::PanelDataset panel_from_table(const Table& table, const std::string& fe_col,
                                     const std::string& unit_col,
                                     const std::vector<std::string>& numeric_cols) {
    stats::PanelDataset panel;
    panel.task_id = table.string_column(fe_col);
    panel.unit_id = unit_col.empty() ? panel.task_id : table.string_column(unit_col);
    for (const auto& col : numeric_cols) panel.numeric[col] = table.numeric_column(col);
    return panel;
}

int cmd_ingest(const RunConfig& config) {
    auto traces = trace::load_corpus(config.corpus);
    for (auto& t : traces) trace::extract_tagged_fields(t);
    fs::create_directories(config.out_dir);
    atomic_write_file(config.out_dir / "corpus.jsonl", trace::serialize_corpus(traces));
    std::cout << "ingested " << traces.size() << " traces -> "
              << (config.out_dir / "corpus.jsonl").string() << "\n";
    return 0;
}

int run_stages(const RunConfig& config, const std::vector<pipeline::Stage>& stages) {
    std::unique_ptr<judge::CompletionClient> endpoint = make_endpoint(config);
    std::optional<judge::ReplayCache> cache;
    if (!config.cache.empty()) cache.emplace(config.cache);
    auto result = pipeline::run_pipeline(config, stages, endpoint.get(),
                                         cache ? &*cache : nullptr);
    for (const auto& s : result.completed_stages)
        std::cout << "stage " << s << ": artifact written\n";
    if (!result.annotate_failures.empty())
        std::cerr << result.annotate_failures.size()
                  << " annotation request(s) failed; see annotate_failures.tsv\n";
    return result.exit_status;
}

int cmd_attribution_score(const std::string& truth_path, const std::string& pred_path,
                          const std::string& out_path) {
    std::map<std::string, std::pair<std::string, std::vector<int>>> truth;  // id -> (text, labels)
    {
        std::ifstream in(truth_path);
        if (!in) throw std::runtime_error("cannot open truth file: " + truth_path);
        std::string line;
        while (std::getline(in, line)) {
            if (trim(line).empty()) continue;
            auto j = ordered_json::parse(line);
            std::vector<int> labels;
            for (const auto& v : j.at("labels")) labels.push_back(v.get<int>());
            truth[j.at("conversation_id").get<std::string>()] = {
                j.at("text").get<std::string>(), std::move(labels)};
        }
    }
    Table out;
    out.columns = {"conversation_id", "n_speakers", "tokens", "accuracy"};
    std::map<int, std::vector<double>> by_speaker_count;
    std::ifstream in(pred_path);
    if (!in) throw std::runtime_error("cannot open prediction file: " + pred_path);
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        auto j = ordered_json::parse(line);
        std::string id = j.at("conversation_id").get<std::string>();
        auto it = truth.find(id);
        if (it == truth.end())
            throw std::runtime_error("prediction for unknown conversation " + id);
        judge::SegmentList segments;
        for (const auto& s : j.at("segments"))
            segments.segments.push_back(
                {s.at("perspective_id").get<int>(), s.at("start_text").get<std::string>()});
        const auto& [text, labels] = it->second;
        auto aligned = attribution::align_segments(text, segments);
        if (aligned.token_count != labels.size())
            throw std::runtime_error("conversation " + id + ": truth labels cover " +
                                     std::to_string(labels.size()) + " tokens but the text has " +
                                     std::to_string(aligned.token_count));
        // tokens the prediction never covered count as misses
        std::vector<int> true_scored, pred_scored;
        for (const auto& tl : aligned.labeling) {
            true_scored.push_back(labels[tl.token_index]);
            pred_scored.push_back(tl.label);
        }
        double accuracy = 0.0;
        if (!true_scored.empty()) {
            auto cm = attribution::confusion_matrix(true_scored, pred_scored);
            accuracy = static_cast<double>(attribution::hungarian_match(cm).agreement) /
                       static_cast<double>(labels.size());
        }
        std::set<int> speakers(labels.begin(), labels.end());
        out.add_row({id, std::to_string(speakers.size()), std::to_string(labels.size()),
                     format_number(accuracy)});
        by_speaker_count[static_cast<int>(speakers.size())].push_back(accuracy);
    }
    // weighted summary: weight = number of conversations in each speaker bucket
    std::vector<attribution::WeightedItem> items;
    Table summary;
    summary.columns = {"n_speakers", "conversations", "mean_accuracy"};
    for (const auto& [n, accs] : by_speaker_count) {
        double mean = 0;
        for (double a : accs) mean += a / static_cast<double>(accs.size());
        summary.add_row({std::to_string(n), std::to_string(accs.size()), format_number(mean)});
        items.push_back({mean, static_cast<double>(accs.size())});
    }
    double weighted = attribution::weighted_accuracy(items);
    if (!out_path.empty()) {
        atomic_write_file(out_path, out.to_tsv());
        std::cout << summary.to_tsv();
    } else {
        std::cout << out.to_tsv() << "\n" << summary.to_tsv();
    }
    std::cout << "weighted_accuracy\t" << format_number(weighted) << "\n";
    return 0;
}

std::unordered_set<int> category_from_catalog(const sae::FeatureCatalog& catalog,
                                              const std::string& category) {
    std::unordered_set<int> out;
    for (const auto& f : catalog.features) {
        auto labels = sae::classify_feature(f.personality_score, f.expertise_score);
        for (auto label : labels) {
            if (category == "personality" && label == sae::FeatureLabel::Personality)
                out.insert(f.feature_id);
            if (category == "expertise" && label == sae::FeatureLabel::Expertise)
                out.insert(f.feature_id);
        }
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"reasoning-trace measurement toolkit"};
    app.require_subcommand(1);

    GlobalArgs global;
    app.add_option("--config", global.config_path, "key = value configuration file");
    app.add_option("--cache", global.cache_path, "annotation replay cache file");
    app.add_option("--seed", global.seed, "seed overriding the configuration");
    app.add_option("--jobs", global.jobs, "annotation concurrency bound");

    // ingest
    auto* ingest = app.add_subcommand("ingest", "normalize a corpus and extract tagged blocks");
    ingest->add_option("--corpus", global.corpus, "corpus jsonl path");
    ingest->add_option("--out-dir", global.out_dir, "output directory");

    // stage runners
    std::vector<std::string> stage_names;
    auto add_stage_cmd = [&](const char* name, const char* help) {
        auto* cmd = app.add_subcommand(name, help);
        cmd->add_option("--corpus", global.corpus, "corpus jsonl path");
        cmd->add_option("--out-dir", global.out_dir, "output directory");
        return cmd;
    };
    auto* annotate_cmd = add_stage_cmd("annotate", "run the judge over the corpus");
    auto* metrics_cmd = add_stage_cmd("metrics", "derive per-trace measurement columns");
    auto* diversity_cmd = add_stage_cmd("diversity", "persona personality/expertise dispersion");
    auto* pipeline_cmd = add_stage_cmd("pipeline", "run several stages in order");
    pipeline_cmd->add_option("--stages", stage_names, "subset of annotate,metrics,diversity,sae,stats")
        ->delimiter(',');

    // sae
    auto* sae_cmd = app.add_subcommand("sae", "sparse-feature diversity and steering");
    sae_cmd->require_subcommand(1);
    std::string sae_activations, sae_catalog, sae_category = "personality", sae_mode = "curated";
    bool sae_raw = false;
    auto* sae_cov = sae_cmd->add_subcommand("coverage", "distinct activated features in a category");
    sae_cov->add_option("--activations", sae_activations, "activation file")->required();
    sae_cov->add_option("--catalog", sae_catalog, "feature catalog tsv")->required();
    sae_cov->add_option("--category", sae_category, "personality or expertise");
    auto* sae_ent = sae_cmd->add_subcommand("entropy", "activation evenness in a category");
    sae_ent->add_option("--activations", sae_activations, "activation file")->required();
    sae_ent->add_option("--catalog", sae_catalog, "feature catalog tsv")->required();
    sae_ent->add_option("--category", sae_category, "personality or expertise");
    sae_ent->add_flag("--raw", sae_raw, "use the unnormalized count form");
    auto* sae_sel = sae_cmd->add_subcommand("select", "conversational feature pools");
    sae_sel->add_option("--catalog", sae_catalog, "feature catalog tsv")->required();
    sae_sel->add_option("--mode", sae_mode, "curated, random-pool, or non-conversational");
    std::string steer_decoder, steer_input;
    double steer_strength = 0.0;
    int steer_feature = -1;
    auto* sae_steer = sae_cmd->add_subcommand("steer-vector", "apply h' = h + s*d");
    sae_steer->add_option("--decoder", steer_decoder, "decoder direction file")->required();
    sae_steer->add_option("--input", steer_input, "activation vector file")->required();
    sae_steer->add_option("--strength", steer_strength, "steering strength s");
    sae_steer->add_option("--feature", steer_feature, "catalog feature id for the default strength");
    sae_steer->add_option("--catalog", sae_catalog, "feature catalog tsv");
    auto* sae_stage = sae_cmd->add_subcommand("stage", "per-trace coverage/entropy table");
    sae_stage->add_option("--corpus", global.corpus, "corpus jsonl path");
    sae_stage->add_option("--out-dir", global.out_dir, "output directory");

    // attribution
    auto* attr = app.add_subcommand("attribution", "speaker attribution scoring");
    attr->require_subcommand(1);
    std::string attr_truth, attr_pred, attr_out;
    auto* attr_score = attr->add_subcommand("score", "align predictions and score token agreement");
    attr_score->add_option("--truth", attr_truth, "ground-truth jsonl")->required();
    attr_score->add_option("--pred", attr_pred, "predicted segments jsonl")->required();
    attr_score->add_option("--out", attr_out, "per-conversation table output");

    // countdown
    auto* cd = app.add_subcommand("countdown", "arithmetic puzzle engine");
    cd->require_subcommand(1);
    int cd_count = 10, cd_k = 3;
    std::uint64_t cd_seed = 0;
    std::string cd_out, cd_numbers, cd_expr, cd_problem_file, cd_completion_file;
    std::int64_t cd_target = 0;
    auto* cd_gen = cd->add_subcommand("gen", "generate solvable problems");
    cd_gen->add_option("--count", cd_count, "number of problems");
    cd_gen->add_option("--k", cd_k, "numbers per problem (2..6)");
    cd_gen->add_option("--seed", cd_seed, "generator seed");
    cd_gen->add_option("--out", cd_out, "output file (default stdout)");
    auto* cd_verify = cd->add_subcommand("verify", "check a claimed solution");
    cd_verify->add_option("--numbers", cd_numbers, "comma-separated numbers")->required();
    cd_verify->add_option("--target", cd_target, "target value")->required();
    cd_verify->add_option("--expr", cd_expr, "candidate expression")->required();
    auto* cd_reward = cd->add_subcommand("reward", "score completions against problems");
    cd_reward->add_option("--problem-file", cd_problem_file, "one problem per line")->required();
    cd_reward->add_option("--completion-file", cd_completion_file,
                          "jsonl with a completion field per line")->required();
    auto* cd_solve = cd->add_subcommand("solve", "brute-force a single problem");
    cd_solve->add_option("--numbers", cd_numbers, "comma-separated numbers")->required();
    cd_solve->add_option("--target", cd_target, "target value")->required();

    // stats
    auto* st = app.add_subcommand("stats", "estimation commands");
    st->require_subcommand(1);
    std::string st_input, st_outcome, st_by, st_reference, st_fe = "problem_id", st_x, st_y,
                st_spec_path, st_out;
    std::vector<std::string> st_controls, st_regressors;
    auto* st_fe_cmd = st->add_subcommand("fe-lpm", "task fixed-effects linear probability model");
    st_fe_cmd->add_option("--input", st_input, "metrics table tsv")->required();
    st_fe_cmd->add_option("--outcome", st_outcome, "outcome column")->required();
    st_fe_cmd->add_option("--by", st_by, "categorical column turned into dummies");
    st_fe_cmd->add_option("--reference", st_reference, "reference level for --by");
    st_fe_cmd->add_option("--regressors", st_regressors, "explicit numeric regressors")
        ->delimiter(',');
    st_fe_cmd->add_option("--controls", st_controls, "numeric control columns")->delimiter(',');
    st_fe_cmd->add_option("--fe", st_fe, "fixed-effect / cluster column");
    st_fe_cmd->add_option("--out", st_out, "write the coefficient table here");
    auto* st_sem = st->add_subcommand("sem", "recursive path system with composite effects");
    st_sem->add_option("--input", st_input, "long-format table tsv")->required();
    st_sem->add_option("--spec", st_spec_path, "path system spec (key = value)")->required();
    st_sem->add_option("--out", st_out, "write the composites table here");
    auto* st_icc = st->add_subcommand("icc", "two-way mixed consistency ICC(3,1)");
    st_icc->add_option("--input", st_input, "targets x raters tsv (no header)")->required();
    auto* st_sp = st->add_subcommand("spearman", "rank correlation with Fisher-z inference");
    st_sp->add_option("--input", st_input, "table tsv")->required();
    st_sp->add_option("--x", st_x, "first column")->required();
    st_sp->add_option("--y", st_y, "second column")->required();

    // judge utilities
    auto* judge_cmd = app.add_subcommand("judge", "prompt template utilities");
    judge_cmd->require_subcommand(1);
    std::string judge_kind, judge_payload;
    auto* judge_render = judge_cmd->add_subcommand("render", "render a prompt to stdout");
    judge_render->add_option("--kind", judge_kind, "judge kind name")->required();
    judge_render->add_option("--payload", judge_payload, "substitution payload")->required();
    auto* judge_sums = judge_cmd->add_subcommand("checksums", "print template digests");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ingest) return cmd_ingest(effective_config(global));
        if (*annotate_cmd) return run_stages(effective_config(global), {pipeline::Stage::Annotate});
        if (*metrics_cmd) return run_stages(effective_config(global), {pipeline::Stage::Metrics});
        if (*diversity_cmd)
            return run_stages(effective_config(global), {pipeline::Stage::Diversity});
        if (*pipeline_cmd) {
            std::vector<pipeline::Stage> stages;
            if (stage_names.empty())
                stages = {pipeline::Stage::Annotate, pipeline::Stage::Metrics,
                          pipeline::Stage::Diversity, pipeline::Stage::Stats};
            else
                for (const auto& s : stage_names) stages.push_back(pipeline::stage_from_name(s));
            return run_stages(effective_config(global), stages);
        }
        if (*sae_stage) return run_stages(effective_config(global), {pipeline::Stage::Sae});

        if (*sae_cov || *sae_ent) {
            auto catalog = sae::load_catalog(sae_catalog);
            auto matrix = sae::load_activations(sae_activations);
            auto category = category_from_catalog(catalog, sae_category);
            if (*sae_cov)
                std::cout << sae::coverage(matrix, category) << "\n";
            else
                std::cout << format_number(sae::entropy(matrix, category, !sae_raw)) << "\n";
            return 0;
        }
        if (*sae_sel) {
            auto catalog = sae::load_catalog(sae_catalog);
            sae::SelectionMode mode;
            if (sae_mode == "curated") mode = sae::SelectionMode::Curated;
            else if (sae_mode == "random-pool") mode = sae::SelectionMode::RandomPool;
            else if (sae_mode == "non-conversational") mode = sae::SelectionMode::NonConversationalPool;
            else throw std::runtime_error("unknown selection mode: " + sae_mode);
            auto ids = sae::select_conversational(catalog, mode);
            std::vector<int> sorted(ids.begin(), ids.end());
            std::sort(sorted.begin(), sorted.end());
            for (int id : sorted) std::cout << id << "\n";
            return 0;
        }
        if (*sae_steer) {
            sae::SteeringConfig cfg;
            cfg.decoder = read_vector_file(steer_decoder);
            cfg.strength = steer_strength;
            if (steer_feature >= 0) {
                if (sae_catalog.empty())
                    throw std::runtime_error("--feature needs --catalog for the default strength");
                cfg.feature_id = steer_feature;
                cfg.strength = sae::default_strength(sae::load_catalog(sae_catalog).by_id(steer_feature));
            }
            auto h = read_vector_file(steer_input);
            auto steered = sae::apply_steering(h, cfg);
            for (std::size_t i = 0; i < steered.size(); ++i)
                std::cout << (i ? " " : "") << format_number(steered[i]);
            std::cout << "\n";
            return 0;
        }

        if (*attr_score) return cmd_attribution_score(attr_truth, attr_pred, attr_out);

        if (*cd_gen) {
            countdown::GeneratorOptions opt;
            opt.k_numbers = cd_k;
            auto problems = countdown::generate_problems(cd_count, opt, cd_seed);
            std::string text;
            for (const auto& p : problems) text += countdown::format_problem_line(p) + "\n";
            if (cd_out.empty()) std::cout << text;
            else atomic_write_file(cd_out, text);
            return 0;
        }
        if (*cd_verify) {
            countdown::CountdownProblem p{parse_number_list(cd_numbers), cd_target};
            auto result = countdown::verify_solution(p, cd_expr);
            std::cout << "valid\t" << (result.valid ? "true" : "false") << "\n";
            for (const auto& r : result.reasons) std::cout << "reason\t" << r << "\n";
            return result.valid ? 0 : 1;
        }
        if (*cd_solve) {
            countdown::CountdownProblem p{parse_number_list(cd_numbers), cd_target};
            auto witness = countdown::solve_brute_force(p);
            if (!witness) {
                std::cout << "unsolvable\n";
                return 1;
            }
            std::cout << witness->render() << "\n";
            return 0;
        }
        if (*cd_reward) {
            std::ifstream problems_in(cd_problem_file);
            if (!problems_in) throw std::runtime_error("cannot open " + cd_problem_file);
            std::vector<countdown::CountdownProblem> problems;
            std::string line;
            while (std::getline(problems_in, line))
                if (!trim(line).empty()) problems.push_back(countdown::parse_problem_line(line));
            std::ifstream completions_in(cd_completion_file);
            if (!completions_in) throw std::runtime_error("cannot open " + cd_completion_file);
            std::vector<std::string> completions;
            while (std::getline(completions_in, line)) {
                if (trim(line).empty()) continue;
                auto j = ordered_json::parse(line);
                completions.push_back(j.is_string() ? j.get<std::string>()
                                                    : j.at("completion").get<std::string>());
            }
            if (problems.size() != completions.size())
                throw std::runtime_error("problem/completion count mismatch");
            std::cout << "index\taccuracy\tformat\treward\n";
            for (std::size_t i = 0; i < problems.size(); ++i) {
                auto r = countdown::reward(problems[i], completions[i]);
                std::cout << i << "\t" << r.accuracy << "\t" << r.format_ok << "\t"
                          << format_number(r.reward) << "\n";
            }
            return 0;
        }

        if (*st_fe_cmd) {
            Table table = Table::load_tsv(st_input);
            std::vector<std::string> regressors = st_regressors;
            stats::PanelDataset panel;
            panel.task_id = table.string_column(st_fe);
            panel.unit_id = st_by.empty() ? panel.task_id : table.string_column(st_by);
            // rows with NA in the outcome or controls are dropped
            std::vector<std::string> numeric_cols = {st_outcome};
            for (const auto& c : st_controls) numeric_cols.push_back(c);
            for (const auto& c : st_regressors) numeric_cols.push_back(c);
            std::vector<std::size_t> keep;
            for (std::size_t r = 0; r < table.rows.size(); ++r) {
                bool ok = true;
                for (const auto& col : numeric_cols) ok &= table.cell(r, col) != "NA";
                if (ok) keep.push_back(r);
            }
            stats::PanelDataset kept;
            for (std::size_t r : keep) {
                kept.task_id.push_back(panel.task_id[r]);
                kept.unit_id.push_back(panel.unit_id[r]);
            }
            for (const auto& col : numeric_cols) {
                std::vector<double> vals;
                for (std::size_t r : keep) vals.push_back(std::stod(table.cell(r, col)));
                kept.numeric[col] = vals;
            }
            if (!st_by.empty()) {
                std::set<std::string> levels;
                for (std::size_t r : keep) levels.insert(table.cell(r, st_by));
                if (levels.size() < 2) throw std::runtime_error("--by column has one level");
                std::string reference = st_reference.empty() ? *levels.begin() : st_reference;
                if (!levels.count(reference))
                    throw std::runtime_error("reference level not present: " + reference);
                for (const auto& level : levels) {
                    if (level == reference) continue;
                    std::vector<double> dummy;
                    for (std::size_t r : keep)
                        dummy.push_back(table.cell(r, st_by) == level ? 1.0 : 0.0);
                    std::string term = st_by + "_" + level;
                    kept.numeric[term] = dummy;
                    regressors.push_back(term);
                }
            }
            for (const auto& c : st_controls) regressors.push_back(c);
            auto fit = stats::fe_lpm(kept, st_outcome, regressors);
            Table out;
            out.columns = {"term", "estimate", "se", "t", "df", "ci_low", "ci_high", "p"};
            for (const auto& c : fit.coefficients)
                out.add_row({c.term, format_number(c.estimate), format_number(c.se),
                             format_number(c.t), format_number(c.df), format_number(c.ci_low),
                             format_number(c.ci_high), format_number(c.p)});
            if (st_out.empty()) std::cout << out.to_tsv();
            else atomic_write_file(st_out, out.to_tsv());
            return 0;
        }
        if (*st_sem) {
            Table table = Table::load_tsv(st_input);
            auto kv = parse_config_text(read_file(st_spec_path));
            stats::SemSpec spec;
            spec.treatment = kv.at("treatment");
            for (const auto& s : split(kv.at("social"), ',')) spec.social.push_back(trim(s));
            for (const auto& s : split(kv.at("cognitive"), ',')) spec.cognitive.push_back(trim(s));
            spec.outcome = kv.at("outcome");
            if (kv.count("controls"))
                for (const auto& s : split(kv.at("controls"), ','))
                    if (!trim(s).empty()) spec.controls.push_back(trim(s));
            if (kv.count("replicates")) spec.bootstrap_replicates = std::stoi(kv.at("replicates"));
            if (kv.count("seed")) spec.seed = std::stoull(kv.at("seed"));
            std::string fe_col = kv.count("fe") ? kv.at("fe") : "problem_id";
            std::vector<std::string> numeric_cols{spec.treatment, spec.outcome};
            for (const auto& s : spec.social) numeric_cols.push_back(s);
            for (const auto& s : spec.cognitive) numeric_cols.push_back(s);
            for (const auto& s : spec.controls) numeric_cols.push_back(s);
            auto panel = panel_from_table(table, fe_col, "", numeric_cols);
            auto fit = stats::path_sem(panel, spec);
            Table out;
            out.columns = {"effect", "estimate", "ci_low", "ci_high", "share"};
            auto share = [&](const std::string& name) {
                auto it = fit.proportional_share.find(name);
                return it == fit.proportional_share.end() ? std::string("NA")
                                                          : format_number(it->second);
            };
            out.add_row({"direct", format_number(fit.boot_direct.estimate),
                         format_number(fit.boot_direct.ci_low),
                         format_number(fit.boot_direct.ci_high), share("direct")});
            out.add_row({"social", format_number(fit.boot_social.estimate),
                         format_number(fit.boot_social.ci_low),
                         format_number(fit.boot_social.ci_high), share("social")});
            out.add_row({"cognitive", format_number(fit.boot_cognitive.estimate),
                         format_number(fit.boot_cognitive.ci_low),
                         format_number(fit.boot_cognitive.ci_high), share("cognitive")});
            out.add_row({"social_cognitive", format_number(fit.boot_social_cognitive.estimate),
                         format_number(fit.boot_social_cognitive.ci_low),
                         format_number(fit.boot_social_cognitive.ci_high),
                         share("social_cognitive")});
            out.add_row({"total_reduced_form", format_number(fit.boot_total.estimate),
                         format_number(fit.boot_total.ci_low),
                         format_number(fit.boot_total.ci_high), "NA"});
            out.add_row({"social_cognitive_delta_variant",
                         format_number(fit.social_cognitive_delta_variant), "NA", "NA", "NA"});
            out.add_row({"dropped_replicates", std::to_string(fit.dropped_replicates), "NA", "NA",
                         "NA"});
            if (st_out.empty()) std::cout << out.to_tsv();
            else atomic_write_file(st_out, out.to_tsv());
            return 0;
        }
        if (*st_icc) {
            std::vector<std::vector<double>> ratings;
            for (const auto& line : split(read_file(st_input), '\n')) {
                if (trim(line).empty()) continue;
                std::vector<double> row;
                for (const auto& cell : split(line, '\t')) row.push_back(std::stod(cell));
                ratings.push_back(std::move(row));
            }
            std::cout << format_number(stats::icc31(ratings)) << "\n";
            return 0;
        }
        if (*st_sp) {
            Table table = Table::load_tsv(st_input);
            auto r = stats::spearman(table.numeric_column(st_x), table.numeric_column(st_y));
            std::cout << "rho\t" << format_number(r.rho) << "\nz\t" << format_number(r.z)
                      << "\np\t" << format_number(r.p) << "\n";
            return 0;
        }

        if (*judge_render) {
            std::cout << judge::render_prompt(judge::kind_from_name(judge_kind), judge_payload);
            return 0;
        }
        if (*judge_sums) {
            for (judge::JudgeKind k : judge::kAllJudgeKinds)
                std::cout << judge::kind_name(k) << "\t"
                          << sha256_hex(judge::prompt_template(k)) << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
