#include "gradepred/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include "gradepred/io.hpp"

namespace gradepred {

GridSpec grid_for(Method method, const RunConfig& config) {
    GridSpec grid = default_grids(method);
    if (config.policy) grid.policy = *config.policy;
    auto overrides = config.grid_overrides.find(std::string(method_name(method)));
    if (overrides != config.grid_overrides.end())
        for (const auto& [param, values] : overrides->second) grid.set(param, values);
    if (method == Method::sbcf && !config.grid_overrides.contains("sbcf"))
        grid.set("r", {static_cast<double>(config.sbcf_r)});
    return grid;
}

namespace {

namespace fs = std::filesystem;

/// Loads a cached dataset when present; otherwise builds it and, when a
/// cache directory is configured, stores it keyed by input hash, course
/// and k.
CourseDataset cached_course_dataset(const std::string& course, const Cohort& cohort, int k,
                                    const std::optional<fs::path>& cache_dir,
                                    std::uint64_t input_hash) {
    fs::path file;
    if (cache_dir) {
        std::ostringstream name;
        name << std::hex << input_hash;
        file = *cache_dir / name.str() / ("k" + std::to_string(k)) / (course + ".ds");
        if (fs::exists(file)) {
            std::ifstream in(file);
            CourseDataset ds = load_dataset(in);
            if (ds.target_course == course && ds.k == k) return ds;
        }
    }
    CourseDataset ds = build_course_dataset(course, cohort, k);
    if (cache_dir) {
        fs::create_directories(file.parent_path());
        std::ofstream out(file);
        save_dataset(out, ds);
    }
    return ds;
}

Experiment build_experiment_cached(const std::vector<GradeRecord>& records, const RunConfig& config,
                                   int target_term) {
    std::uint64_t input_hash = 0;
    if (config.cache_dir) {
        std::ostringstream canonical;
        write_records(canonical, records);
        std::istringstream in(canonical.str());
        input_hash = content_hash(in);
    }

    Experiment experiment;
    experiment.target_term = target_term;
    experiment.k = config.k;
    experiment.min_students = config.min_students;

    ActiveSplit split = split_active(records, target_term);
    std::set<std::string> predicted_courses;
    for (const auto& r : split.active.records)
        if (r.term == target_term) predicted_courses.insert(r.course_id);

    for (const auto& course : predicted_courses) {
        CourseTask task;
        task.course_id = course;
        task.train =
            cached_course_dataset(course, split.inactive, config.k, config.cache_dir, input_hash);
        if (!min_students_gate(task.train, config.min_students)) {
            experiment.skipped.emplace_back(
                course, "training set has " + std::to_string(task.train.design.rows()) +
                            " students (floor " + std::to_string(config.min_students) + ")");
            continue;
        }
        task.targets = build_targets(course, split.active, target_term, config.k);
        if (task.targets.empty()) {
            experiment.skipped.emplace_back(course, "no active student passes the k filter");
            continue;
        }
        experiment.courses.push_back(std::move(task));
    }
    experiment.train_cohort = std::move(split.inactive);
    return experiment;
}

} // namespace

RunResult run_pipeline(const std::vector<GradeRecord>& records, const RunConfig& config) {
    if (records.empty()) throw DataError("no records to run on");

    int target_term = config.target_term.value_or(-1);
    if (target_term < 0)
        for (const auto& r : records) target_term = std::max(target_term, r.term);

    RunResult result;
    result.experiment = build_experiment_cached(records, config, target_term);
    if (result.experiment.courses.empty())
        throw NoPredictableCourses(
            "no course passed the min-students and k gates at term " + std::to_string(target_term));
    result.statistics = dataset_statistics(result.experiment);

    RunOptions options;
    options.seed = config.seed;
    options.jobs = config.jobs;
    options.clamp = config.clamp;
    options.sbcf_r = config.sbcf_r;

    for (Method method : config.methods) {
        const GridSpec grid = grid_for(method, config);
        GridSearchResult search = grid_search(method, result.experiment, records, grid, options);

        MethodOutcome outcome;
        outcome.method = method;
        outcome.best_params = std::move(search.best_params);
        outcome.report = std::move(search.best_report);
        outcome.cells = std::move(search.cells);
        outcome.predictions = std::move(search.best_run.predictions);
        outcome.skipped_courses = search.best_run.skipped_courses;
        outcome.skipped_targets = search.best_run.skipped_targets;

        std::sort(outcome.predictions.begin(), outcome.predictions.end(),
                  [](const ScoredPrediction& a, const ScoredPrediction& b) {
                      if (a.prediction.course_id != b.prediction.course_id)
                          return a.prediction.course_id < b.prediction.course_id;
                      return a.prediction.student_id < b.prediction.student_id;
                  });
        result.outcomes.push_back(std::move(outcome));
    }

    if (config.common_subset_report) {
        std::vector<std::vector<ScoredPrediction>> per_method;
        per_method.reserve(result.outcomes.size());
        for (const auto& outcome : result.outcomes) per_method.push_back(outcome.predictions);
        auto restricted = common_subset(per_method);
        std::vector<MetricReport> reports;
        for (const auto& predictions : restricted)
            reports.push_back(predictions.empty() ? MetricReport{} : compute_metrics(predictions));
        result.common_subset_reports = std::move(reports);
    }

    audit_leakage(result);
    return result;
}

void audit_leakage(const RunResult& result) {
    std::set<std::pair<std::string, std::string>> training_pairs;
    for (const auto& task : result.experiment.courses) {
        const auto& design = task.train.design;
        for (const auto& e : design.entries())
            training_pairs.emplace(design.row_ids().name(e.row), design.col_ids().name(e.col));
        for (int r = 0; r < design.rows(); ++r)
            training_pairs.emplace(design.row_ids().name(r), task.course_id);
    }
    const SparseGradeMatrix& mf = result.experiment.mf_matrix();
    for (const auto& e : mf.entries())
        training_pairs.emplace(mf.row_ids().name(e.row), mf.col_ids().name(e.col));

    for (const auto& outcome : result.outcomes)
        for (const auto& scored : outcome.predictions)
            if (training_pairs.contains(
                    {scored.prediction.student_id, scored.prediction.course_id}))
                throw LeakageError("prediction for (" + scored.prediction.student_id + ", " +
                                   scored.prediction.course_id + ") appears in training data");
}

void write_predictions_file(std::ostream& out, const RunResult& result) {
    out << "student,course,method,predicted,actual\n";
    for (const auto& outcome : result.outcomes)
        for (const auto& scored : outcome.predictions) {
            const Prediction& p = scored.prediction;
            out << p.student_id << ',' << p.course_id << ',' << method_name(p.method) << ','
                << format_double(p.value) << ',' << format_double(scored.actual) << '\n';
        }
}

namespace {

std::string params_text(const std::map<std::string, double>& params) {
    std::string text;
    for (const auto& [name, value] : params) {
        if (!text.empty()) text += ' ';
        text += name + "=" + format_double(value);
    }
    return text;
}

} // namespace

void write_metrics_file(std::ostream& out, const RunResult& result) {
    out << "method,rmse,avg_rmse,n_courses,n_grades,skipped_courses,skipped_targets,best_params\n";
    for (std::size_t i = 0; i < result.outcomes.size(); ++i) {
        const MethodOutcome& outcome = result.outcomes[i];
        out << method_name(outcome.method) << ',' << format_double(outcome.report.rmse) << ','
            << format_double(outcome.report.avg_rmse) << ',' << outcome.report.n_courses << ','
            << outcome.report.n_grades << ',' << outcome.skipped_courses << ','
            << outcome.skipped_targets << ',' << params_text(outcome.best_params) << '\n';
    }
    if (result.common_subset_reports) {
        for (std::size_t i = 0; i < result.outcomes.size(); ++i) {
            const MetricReport& report = (*result.common_subset_reports)[i];
            out << method_name(result.outcomes[i].method) << "-common,"
                << format_double(report.rmse) << ',' << format_double(report.avg_rmse) << ','
                << report.n_courses << ',' << report.n_grades << ",,,\n";
        }
    }
}

void write_metrics_table(std::ostream& out, const RunResult& result) {
    out << "k=" << result.experiment.k << " target_term=" << result.experiment.target_term << "\n";
    out << std::left << std::setw(12) << "method" << std::right << std::setw(10) << "RMSE"
        << std::setw(10) << "AvgRMSE" << std::setw(10) << "courses" << std::setw(10) << "grades"
        << "  best\n";
    for (const auto& outcome : result.outcomes) {
        std::ostringstream rmse, avg;
        rmse << std::fixed << std::setprecision(3) << outcome.report.rmse;
        avg << std::fixed << std::setprecision(3) << outcome.report.avg_rmse;
        out << std::left << std::setw(12) << method_name(outcome.method) << std::right
            << std::setw(10) << rmse.str() << std::setw(10) << avg.str() << std::setw(10)
            << outcome.report.n_courses << std::setw(10) << outcome.report.n_grades << "  "
            << params_text(outcome.best_params) << "\n";
    }
}

void write_statistics_file(std::ostream& out, const std::vector<DatasetStatistics>& rows) {
    out << "k,avg_train_students,avg_test_students,avg_prior_courses,avg_grades,"
           "courses_predicted,grades_predicted\n";
    for (const auto& s : rows)
        out << s.k << ',' << format_double(s.avg_train_students) << ','
            << format_double(s.avg_test_students) << ',' << format_double(s.avg_prior_courses)
            << ',' << format_double(s.avg_grades) << ',' << s.courses_predicted << ','
            << s.grades_predicted << '\n';
}

void write_statistics_table(std::ostream& out, const std::vector<DatasetStatistics>& rows) {
    out << std::left << std::setw(42) << "Prior courses";
    for (const auto& s : rows) out << std::right << std::setw(10) << s.k;
    out << '\n';
    auto line = [&](const std::string& label, auto value_of, int precision) {
        out << std::left << std::setw(42) << label;
        for (const auto& s : rows) {
            std::ostringstream cell;
            cell << std::fixed << std::setprecision(precision) << value_of(s);
            out << std::right << std::setw(10) << cell.str();
        }
        out << '\n';
    };
    line("Average number of students in training set",
         [](const DatasetStatistics& s) { return s.avg_train_students; }, 1);
    line("Average number of students in test set",
         [](const DatasetStatistics& s) { return s.avg_test_students; }, 1);
    line("Average number of prior courses",
         [](const DatasetStatistics& s) { return s.avg_prior_courses; }, 1);
    line("Average number of grades",
         [](const DatasetStatistics& s) { return s.avg_grades; }, 1);
    line("Courses predicted",
         [](const DatasetStatistics& s) { return static_cast<double>(s.courses_predicted); }, 0);
    line("Grades predicted",
         [](const DatasetStatistics& s) { return static_cast<double>(s.grades_predicted); }, 0);
}

void write_grid_file(std::ostream& out, const MethodOutcome& outcome) {
    std::vector<std::string> param_names;
    if (!outcome.cells.empty())
        for (const auto& [name, value] : outcome.cells.front().params) param_names.push_back(name);

    out << "method,course";
    for (const auto& name : param_names) out << ',' << name;
    out << ",rmse,avg_rmse,n\n";

    for (const auto& cell : outcome.cells) {
        std::string params;
        for (const auto& name : param_names) params += ',' + format_double(cell.params.at(name));
        out << method_name(outcome.method) << ",ALL" << params << ','
            << format_double(cell.report.rmse) << ',' << format_double(cell.report.avg_rmse) << ','
            << cell.report.n_grades << '\n';
        for (const auto& [course, metric] : cell.report.per_course)
            out << method_name(outcome.method) << ',' << course << params << ','
                << format_double(metric.rmse) << ',' << format_double(metric.rmse) << ','
                << metric.n_grades << '\n';
    }
}

namespace {

std::vector<double> parse_value_list(const std::string& text, const std::string& key) {
    std::vector<double> values;
    std::istringstream in(text);
    std::string token;
    while (std::getline(in, token, ',')) {
        auto value = parse_double(token);
        if (!value) throw DataError("config key " + key + ": bad number '" + token + "'");
        values.push_back(*value);
    }
    if (values.empty()) throw DataError("config key " + key + " has no values");
    return values;
}

std::optional<std::pair<std::string, std::string>> next_key_value(std::istream& in) {
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            bool blank = line.find_first_not_of(" \t\r") == std::string::npos;
            if (!blank) throw DataError("config line is not key=value: " + line);
            continue;
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            if (b == std::string::npos) return std::string{};
            const auto e = s.find_last_not_of(" \t\r");
            return s.substr(b, e - b + 1);
        };
        return std::make_pair(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return std::nullopt;
}

} // namespace

RunConfig load_run_config(std::istream& in, const std::filesystem::path& base_dir) {
    RunConfig config;
    while (auto kv = next_key_value(in)) {
        const auto& [key, value] = *kv;
        auto number = [&]() {
            auto v = parse_double(value);
            if (!v) throw DataError("config key " + key + ": '" + value + "' is not a number");
            return *v;
        };
        if (key == "input") config.input = base_dir / value;
        else if (key == "out") config.out_dir = base_dir / value;
        else if (key == "cache") config.cache_dir = base_dir / value;
        else if (key == "target_term") config.target_term = static_cast<int>(number());
        else if (key == "k") config.k = static_cast<int>(number());
        else if (key == "min_students") config.min_students = static_cast<int>(number());
        else if (key == "seed") config.seed = static_cast<std::uint64_t>(number());
        else if (key == "jobs") config.jobs = static_cast<unsigned>(number());
        else if (key == "clamp") config.clamp = value == "1" || value == "true";
        else if (key == "common_subset") config.common_subset_report = value == "1" || value == "true";
        else if (key == "sbcf_r") config.sbcf_r = static_cast<int>(number());
        else if (key == "policy") {
            auto policy = parse_policy(value);
            if (!policy) throw DataError("config key policy: unknown policy '" + value + "'");
            config.policy = *policy;
        } else if (key == "methods") {
            config.methods.clear();
            std::istringstream list(value);
            std::string name;
            while (std::getline(list, name, ',')) {
                auto method = parse_method(name);
                if (!method) throw DataError("config key methods: unknown method '" + name + "'");
                config.methods.push_back(*method);
            }
            if (config.methods.empty()) throw DataError("config key methods is empty");
        } else if (key.starts_with("grid.")) {
            const auto rest = key.substr(5);
            const auto dot = rest.find('.');
            if (dot == std::string::npos)
                throw DataError("grid override keys look like grid.<method>.<param>: " + key);
            const std::string method = rest.substr(0, dot);
            if (!parse_method(method)) throw DataError("grid override for unknown method " + method);
            config.grid_overrides[method][rest.substr(dot + 1)] = parse_value_list(value, key);
        } else {
            throw DataError("unknown config key '" + key + "'");
        }
    }
    return config;
}

SynthConfig load_synth_config(std::istream& in) {
    SynthConfig config;
    while (auto kv = next_key_value(in)) {
        const auto& [key, value] = *kv;
        auto number = [&](const char* field) {
            auto v = parse_double(value);
            if (!v) throw DataError("invalid synth config field '" + std::string(field) + "': '" +
                                    value + "' is not a number");
            return *v;
        };
        if (key == "kind") {
            auto kind = parse_synth_kind(value);
            if (!kind) throw DataError("invalid synth config field 'kind': unknown kind '" + value + "'");
            config.kind = *kind;
        } else if (key == "n_students") config.n_students = static_cast<int>(number("n_students"));
        else if (key == "n_courses") config.n_courses = static_cast<int>(number("n_courses"));
        else if (key == "n_terms") config.n_terms = static_cast<int>(number("n_terms"));
        else if (key == "n_levels") config.n_levels = static_cast<int>(number("n_levels"));
        else if (key == "noise_sigma") config.noise_sigma = number("noise_sigma");
        else if (key == "courses_per_term_min")
            config.courses_per_term_min = static_cast<int>(number("courses_per_term_min"));
        else if (key == "courses_per_term_max")
            config.courses_per_term_max = static_cast<int>(number("courses_per_term_max"));
        else if (key == "prereq_density") config.prereq_density = number("prereq_density");
        else if (key == "rank") config.rank = static_cast<int>(number("rank"));
        else if (key == "core_fraction") config.core_fraction = number("core_fraction");
        else if (key == "elective_prob_own") config.elective_prob_own = number("elective_prob_own");
        else if (key == "elective_prob_other")
            config.elective_prob_other = number("elective_prob_other");
        else if (key == "seed") config.seed = static_cast<std::uint64_t>(number("seed"));
        else throw DataError("unknown synth config key '" + key + "'");
    }
    return config;
}

} // namespace gradepred
