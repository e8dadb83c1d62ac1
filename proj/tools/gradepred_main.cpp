// gradepred command line: simulate grade data, ingest transcripts, and run
// the grade-prediction experiment end to end.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "gradepred/io.hpp"
#include "gradepred/pipeline.hpp"

namespace fs = std::filesystem;
using namespace gradepred;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNothingPredictable = 3;

std::vector<GradeRecord> read_records_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open input file " + path.string());
    auto result = parse_records(in);
    for (const auto& warning : result.report.warnings) std::cerr << "warning: " << warning << "\n";
    return std::move(result.records);
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
    fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    body(out);
}

int cmd_ingest(const fs::path& input, const std::optional<fs::path>& allowlist,
               const fs::path& output) {
    std::ifstream in(input);
    if (!in) throw DataError("cannot open input file " + input.string());
    ParseResult parsed = parse_records(in);
    for (const auto& warning : parsed.report.warnings) std::cerr << "warning: " << warning << "\n";

    std::vector<GradeRecord> records = std::move(parsed.records);
    std::size_t off_allowlist = 0;
    if (allowlist) {
        std::ifstream allow_in(*allowlist);
        if (!allow_in) throw DataError("cannot open allow-list " + allowlist->string());
        const auto allowed = read_allowlist(allow_in);
        const std::size_t before = records.size();
        records = apply_allowlist(std::move(records), allowed);
        off_allowlist = before - records.size();
    }
    records = dedupe_retakes(std::move(records), &parsed.report);
    records = sorted_records(std::move(records));
    if (records.empty()) throw DataError("no usable records in " + input.string());

    write_file(output, [&](std::ostream& out) { write_records(out, records); });

    const ParseReport& report = parsed.report;
    std::cout << "kept " << records.size() << " records\n"
              << "dropped " << report.dropped() << " lines (" << report.dropped_passfail
              << " pass/fail, " << report.dropped_range << " out of range, "
              << report.dropped_malformed << " malformed)\n"
              << "collapsed " << report.retakes_collapsed << " retakes\n";
    if (allowlist) std::cout << "dropped " << off_allowlist << " records off the allow-list\n";
    std::cout << "wrote " << output.string() << "\n";
    return kExitOk;
}

int cmd_simulate(const fs::path& config_path, const fs::path& out_prefix) {
    SynthConfig config;
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw DataError("cannot open synth config " + config_path.string());
        config = load_synth_config(in);
    }
    SynthResult result = generate(config);

    const fs::path records_path = out_prefix.string() + ".csv";
    const fs::path truth_path = out_prefix.string() + ".truth";
    write_file(records_path,
               [&](std::ostream& out) { write_records(out, result.records); });
    write_file(truth_path, [&](std::ostream& out) { save_truth(out, result.truth); });

    std::cout << "simulated " << result.records.size() << " records for " << config.n_students
              << " students over " << config.n_terms << " terms (clip rate "
              << format_double(result.truth.clip_rate) << ")\n"
              << "wrote " << records_path.string() << " and " << truth_path.string() << "\n";
    return kExitOk;
}

void print_run_summary(const RunResult& result) {
    std::cout << "predicted term " << result.experiment.target_term << " with k="
              << result.experiment.k << ": " << result.experiment.courses.size()
              << " courses, " << result.experiment.n_targets() << " grades";
    if (!result.experiment.skipped.empty())
        std::cout << " (" << result.experiment.skipped.size() << " courses gated out)";
    std::cout << "\n";
    write_metrics_table(std::cout, result);
}

int cmd_run(const RunConfig& config) {
    const std::vector<GradeRecord> records = read_records_file(config.input);

    for (Method method : config.methods)
        if (grid_for(method, config).policy == SelectionPolicy::test_set_best)
            std::cerr << "warning: " << method_name(method)
                      << " selects hyperparameters on the test set; treat its RMSE as optimistic\n";

    RunResult result = run_pipeline(records, config);

    const fs::path out = config.out_dir;
    write_file(out / "predictions.csv",
               [&](std::ostream& o) { write_predictions_file(o, result); });
    write_file(out / "metrics.csv", [&](std::ostream& o) { write_metrics_file(o, result); });
    write_file(out / "stats.csv",
               [&](std::ostream& o) { write_statistics_file(o, {result.statistics}); });
    for (const auto& outcome : result.outcomes)
        write_file(out / ("grid_" + std::string(method_name(outcome.method)) + ".csv"),
                   [&](std::ostream& o) { write_grid_file(o, outcome); });

    print_run_summary(result);
    std::cout << "wrote predictions.csv, metrics.csv, stats.csv and grid CSVs to "
              << out.string() << "\n";
    return kExitOk;
}

int cmd_stats(const fs::path& input, std::vector<int> ks, std::optional<int> target_term,
              int min_students, const fs::path& output) {
    const std::vector<GradeRecord> records = read_records_file(input);
    int term = target_term.value_or(-1);
    if (term < 0)
        for (const auto& r : records) term = std::max(term, r.term);

    std::vector<DatasetStatistics> rows;
    for (int k : ks)
        rows.push_back(dataset_statistics(build_experiment(records, term, k, min_students)));

    write_statistics_table(std::cout, rows);
    if (!output.empty())
        write_file(output, [&](std::ostream& o) { write_statistics_file(o, rows); });
    return kExitOk;
}

int cmd_grid(const RunConfig& config, const std::string& method_name_arg, const fs::path& output) {
    auto method = parse_method(method_name_arg);
    if (!method) throw CLI::ValidationError("--method", "unknown method " + method_name_arg);

    const std::vector<GradeRecord> records = read_records_file(config.input);
    RunConfig one = config;
    one.methods = {*method};
    RunResult result = run_pipeline(records, one);

    const MethodOutcome& outcome = result.outcomes.front();
    if (!output.empty())
        write_file(output, [&](std::ostream& o) { write_grid_file(o, outcome); });
    else
        write_grid_file(std::cout, outcome);
    std::cerr << "best cell:";
    for (const auto& [name, value] : outcome.best_params)
        std::cerr << ' ' << name << '=' << format_double(value);
    std::cerr << " rmse=" << format_double(outcome.report.rmse) << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"grade prediction from historical student-course grades"};
    app.require_subcommand(1);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "validate, convert and canonicalize raw records");
    fs::path ingest_input, ingest_output = "records.csv";
    std::optional<fs::path> ingest_allowlist;
    ingest->add_option("input", ingest_input, "raw CSV/TSV with student,course,term,grade")->required();
    ingest->add_option("-o,--out", ingest_output, "canonical records file");
    ingest->add_option("--allow-list", ingest_allowlist, "file with one allowed course id per line");

    // simulate
    auto* simulate = app.add_subcommand("simulate", "generate synthetic records with planted structure");
    fs::path synth_config_path, synth_out = "synthetic";
    simulate->add_option("config", synth_config_path, "key=value generator config (defaults when omitted)");
    simulate->add_option("-o,--out", synth_out, "output prefix (<prefix>.csv and <prefix>.truth)");

    // shared run/grid options
    RunConfig config;
    fs::path config_path;
    std::string methods_text, policy_text;
    std::vector<std::string> grid_override_args;
    int target_term_flag = -1;

    auto add_run_options = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "key=value run manifest (flags win)");
        cmd->add_option("-i,--input", config.input, "canonical records file");
        cmd->add_option("--out", config.out_dir, "output directory");
        cmd->add_option("--cache", [&config](const std::vector<std::string>& v) {
            config.cache_dir = fs::path(v.front());
            return true;
        }, "dataset cache directory");
        cmd->add_option("--target-term", target_term_flag, "term to predict (default: last term)");
        cmd->add_option("-k,--k", config.k, "minimum prior courses (paper uses 5, 7, 9)");
        cmd->add_option("--min-students", config.min_students, "course dataset floor");
        cmd->add_option("--methods", methods_text, "comma list: csr,csr-rc,ssr,biasonly,sbcf,mf,mf-gb,csmf,csmf-star");
        cmd->add_option("--policy", policy_text, "test-best | prior-semester | holdout");
        cmd->add_option("--seed", config.seed, "run seed");
        cmd->add_option("-j,--jobs", config.jobs, "parallel workers");
        cmd->add_flag("--clamp", config.clamp, "clamp predictions to [0,4]");
        cmd->add_flag("--common-subset", config.common_subset_report,
                      "also score methods on their common predicted pairs");
        cmd->add_option("--sbcf-r", config.sbcf_r, "SBCF significance lower limit");
        cmd->add_option("--grid", grid_override_args,
                        "override, e.g. --grid csr.lambda1=0,2.5,5 (repeatable)");
    };

    auto* run = app.add_subcommand("run", "full experiment: split, build, search, predict, evaluate");
    add_run_options(run);

    auto* grid_cmd = app.add_subcommand("grid", "grid-search one method and dump per-cell metrics");
    std::string grid_method;
    fs::path grid_out;
    grid_cmd->add_option("--method", grid_method, "method to search")->required();
    grid_cmd->add_option("--grid-out", grid_out, "per-cell CSV (stdout when omitted)");
    add_run_options(grid_cmd);

    auto* stats = app.add_subcommand("stats", "dataset statistics per k");
    fs::path stats_input, stats_out;
    std::vector<int> stats_ks = {5, 7, 9};
    int stats_min_students = 20;
    int stats_term_flag = -1;
    stats->add_option("-i,--input", stats_input, "canonical records file")->required();
    stats->add_option("-k,--k", stats_ks, "k values to tabulate");
    stats->add_option("--target-term", stats_term_flag, "term to predict (default: last term)");
    stats->add_option("--min-students", stats_min_students, "course dataset floor");
    stats->add_option("--out", stats_out, "also write CSV here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e); // help text, exit 0
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (*ingest) return cmd_ingest(ingest_input, ingest_allowlist, ingest_output);
        if (*simulate) return cmd_simulate(synth_config_path, synth_out);

        if (*run || *grid_cmd) {
            RunConfig final_config;
            if (!config_path.empty()) {
                std::ifstream in(config_path);
                if (!in) throw DataError("cannot open config " + config_path.string());
                final_config = load_run_config(in, config_path.parent_path());
            }
            // flags win over the manifest
            CLI::App* cmd = *run ? static_cast<CLI::App*>(run) : static_cast<CLI::App*>(grid_cmd);
            auto flag_set = [&](const std::string& name) { return cmd->count(name) > 0; };
            if (flag_set("--input")) final_config.input = config.input;
            if (flag_set("--out")) final_config.out_dir = config.out_dir;
            if (flag_set("--cache")) final_config.cache_dir = config.cache_dir;
            if (flag_set("--target-term")) final_config.target_term = target_term_flag;
            if (flag_set("--k")) final_config.k = config.k;
            if (flag_set("--min-students")) final_config.min_students = config.min_students;
            if (flag_set("--seed")) final_config.seed = config.seed;
            if (flag_set("--jobs")) final_config.jobs = config.jobs;
            if (flag_set("--clamp")) final_config.clamp = config.clamp;
            if (flag_set("--common-subset"))
                final_config.common_subset_report = config.common_subset_report;
            if (flag_set("--sbcf-r")) final_config.sbcf_r = config.sbcf_r;
            if (!methods_text.empty()) {
                final_config.methods.clear();
                std::istringstream list(methods_text);
                std::string name;
                while (std::getline(list, name, ',')) {
                    auto method = parse_method(name);
                    if (!method) throw CLI::ValidationError("--methods", "unknown method " + name);
                    final_config.methods.push_back(*method);
                }
            }
            if (!policy_text.empty()) {
                auto policy = parse_policy(policy_text);
                if (!policy) throw CLI::ValidationError("--policy", "unknown policy " + policy_text);
                final_config.policy = *policy;
            }
            for (const auto& arg : grid_override_args) {
                const auto eq = arg.find('=');
                const auto dot = arg.find('.');
                if (eq == std::string::npos || dot == std::string::npos || dot > eq)
                    throw CLI::ValidationError("--grid", "expected <method>.<param>=v1,v2,...");
                const std::string method = arg.substr(0, dot);
                const std::string param = arg.substr(dot + 1, eq - dot - 1);
                if (!parse_method(method))
                    throw CLI::ValidationError("--grid", "unknown method " + method);
                std::vector<double> values;
                std::istringstream list(arg.substr(eq + 1));
                std::string token;
                while (std::getline(list, token, ',')) {
                    auto value = parse_double(token);
                    if (!value) throw CLI::ValidationError("--grid", "bad number " + token);
                    values.push_back(*value);
                }
                final_config.grid_overrides[method][param] = values;
            }
            if (final_config.input.empty())
                throw CLI::ValidationError("--input", "an input records file is required");

            if (*run) return cmd_run(final_config);
            return cmd_grid(final_config, grid_method, grid_out);
        }

        if (*stats) {
            std::optional<int> term;
            if (stats->count("--target-term")) term = stats_term_flag;
            return cmd_stats(stats_input, stats_ks, term, stats_min_students, stats_out);
        }
    } catch (const CLI::Error& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const NoPredictableCourses& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNothingPredictable;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}
