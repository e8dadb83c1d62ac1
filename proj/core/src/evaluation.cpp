#include "gradepred/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "gradepred/parallel.hpp"
#include "gradepred/rng.hpp"

namespace gradepred {

MetricReport compute_metrics(const std::vector<ScoredPrediction>& predictions) {
    if (predictions.empty()) throw DataError("cannot compute metrics over zero predictions");

    // squared errors are summed in sorted order per sorted course so the
    // result is exactly permutation-invariant, not just up to rounding
    std::map<std::string, std::vector<double>> squared;
    for (const auto& scored : predictions) {
        const double err = scored.prediction.value - scored.actual;
        squared[scored.prediction.course_id].push_back(err * err);
    }

    MetricReport report;
    report.n_grades = predictions.size();
    double pooled_sq = 0.0;
    double rmse_sum = 0.0;
    for (auto& [course, errors] : squared) {
        std::sort(errors.begin(), errors.end());
        double course_sq = 0.0;
        for (double e : errors) course_sq += e;
        pooled_sq += course_sq;
        const double rmse = std::sqrt(course_sq / static_cast<double>(errors.size()));
        report.per_course.emplace(course, CourseMetric{rmse, errors.size()});
        rmse_sum += rmse;
    }
    report.rmse = std::sqrt(pooled_sq / static_cast<double>(predictions.size()));
    report.n_courses = report.per_course.size();
    report.avg_rmse = rmse_sum / static_cast<double>(report.n_courses);
    return report;
}

std::string_view policy_name(SelectionPolicy policy) {
    switch (policy) {
        case SelectionPolicy::test_set_best: return "test-best";
        case SelectionPolicy::prior_semester: return "prior-semester";
        case SelectionPolicy::training_holdout: return "holdout";
    }
    throw Error("unknown selection policy");
}

std::optional<SelectionPolicy> parse_policy(std::string_view name) {
    if (name == "test-best") return SelectionPolicy::test_set_best;
    if (name == "prior-semester") return SelectionPolicy::prior_semester;
    if (name == "holdout") return SelectionPolicy::training_holdout;
    return std::nullopt;
}

const std::vector<double>* GridSpec::values(std::string_view name) const {
    for (const auto& [param, list] : params)
        if (param == name) return &list;
    return nullptr;
}

void GridSpec::set(const std::string& name, std::vector<double> values) {
    if (values.empty()) throw DataError("grid parameter " + name + " must have values");
    for (auto& [param, list] : params) {
        if (param == name) {
            list = std::move(values);
            return;
        }
    }
    params.emplace_back(name, std::move(values));
}

std::size_t GridSpec::cell_count() const {
    std::size_t count = 1;
    for (const auto& [name, list] : params) count *= list.size();
    return count;
}

std::map<std::string, double> GridSpec::cell(std::size_t index) const {
    std::map<std::string, double> cell;
    // row-major: the last declared parameter varies fastest
    for (auto it = params.rbegin(); it != params.rend(); ++it) {
        const auto& [name, list] = *it;
        cell.emplace(name, list[index % list.size()]);
        index /= list.size();
    }
    return cell;
}

namespace {

std::vector<double> steps(double from, double step, int count) {
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) values.push_back(from + step * static_cast<double>(i));
    return values;
}

} // namespace

GridSpec default_grids(Method method) {
    GridSpec grid;
    switch (method) {
        case Method::csr:
        case Method::csr_rc:
            grid.params.emplace_back("lambda1", steps(0.0, 2.5, 17)); // 0..40
            grid.params.emplace_back("lambda2", steps(0.0, 2.5, 21)); // 0..50
            grid.policy = SelectionPolicy::test_set_best;
            return grid;
        case Method::ssr: {
            // 0.3 to 1 in increments of 0.04 stops at 0.98; the 1.0
            // boundary is appended so the sweep reaches full overlap
            std::vector<double> t = steps(0.3, 0.04, 18);
            t.push_back(1.0);
            grid.params.emplace_back("t", std::move(t));
            grid.params.emplace_back("lambda1", steps(0.0, 1.0, 11)); // 0..10
            grid.params.emplace_back("lambda2", steps(0.0, 2.0, 8));  // 0..14
            grid.policy = SelectionPolicy::test_set_best;
            return grid;
        }
        case Method::bias_only:
            grid.params.emplace_back("lambda", steps(0.0, 0.05, 121)); // 0..6
            grid.policy = SelectionPolicy::prior_semester;
            return grid;
        case Method::sbcf:
            grid.params.emplace_back("r", std::vector<double>{10.0});
            grid.policy = SelectionPolicy::test_set_best;
            return grid;
        case Method::mf:
        case Method::mf_gb:
        case Method::csmf:
            grid.params.emplace_back("l", std::vector<double>{2.0, 5.0, 8.0});
            grid.params.emplace_back("lambda", steps(0.0, 0.05, 121)); // 0..6
            grid.policy = SelectionPolicy::prior_semester;
            return grid;
        case Method::csmf_star:
            // the latent dimension is selected per course on the
            // training holdout, so only lambda is searched here
            grid.params.emplace_back("lambda", steps(0.0, 0.05, 121));
            grid.policy = SelectionPolicy::training_holdout;
            return grid;
    }
    throw DataError("unknown method");
}

const SparseGradeMatrix& Experiment::mf_matrix() const {
    if (!mf_matrix_) {
        std::vector<std::pair<const CourseDataset*, const std::vector<TargetInstance>*>> inputs;
        std::vector<std::vector<TargetInstance>> instances;
        instances.reserve(courses.size());
        for (const auto& task : courses) instances.push_back(strip_labels(task.targets));
        for (std::size_t i = 0; i < courses.size(); ++i)
            inputs.emplace_back(&courses[i].train, &instances[i]);
        mf_matrix_ = build_mf_matrix(
            inputs, validation_split ? HeldOutCells::drop : HeldOutCells::fail);
    }
    return *mf_matrix_;
}

std::size_t Experiment::n_targets() const {
    std::size_t count = 0;
    for (const auto& task : courses) count += task.targets.size();
    return count;
}

Experiment build_experiment(const std::vector<GradeRecord>& records, int target_term, int k,
                            int min_students) {
    Experiment experiment;
    experiment.target_term = target_term;
    experiment.k = k;
    experiment.min_students = min_students;

    ActiveSplit split = split_active(records, target_term);

    std::set<std::string> predicted_courses;
    for (const auto& r : split.active.records)
        if (r.term == target_term) predicted_courses.insert(r.course_id);

    for (const auto& course : predicted_courses) {
        CourseTask task;
        task.course_id = course;
        task.train = build_course_dataset(course, split.inactive, k);
        if (!min_students_gate(task.train, min_students)) {
            experiment.skipped.emplace_back(
                course, "training set has " + std::to_string(task.train.design.rows()) +
                            " students (floor " + std::to_string(min_students) + ")");
            continue;
        }
        task.targets = build_targets(course, split.active, target_term, k);
        if (task.targets.empty()) {
            experiment.skipped.emplace_back(course, "no active student passes the k filter");
            continue;
        }
        experiment.courses.push_back(std::move(task));
    }
    experiment.train_cohort = std::move(split.inactive);
    return experiment;
}

namespace {

double param(const std::map<std::string, double>& params, const std::string& name) {
    auto it = params.find(name);
    if (it == params.end()) throw DataError("grid cell is missing parameter " + name);
    return it->second;
}

/// Per-course jobs that each produce their own prediction slice keep the
/// merged output deterministic under any scheduling.
MethodRun run_per_course(const Experiment& experiment, const RunOptions& options,
                         const std::function<void(const CourseTask&, std::uint64_t,
                                                  std::vector<ScoredPrediction>&, std::size_t&,
                                                  bool&)>& job) {
    std::vector<std::vector<ScoredPrediction>> slices(experiment.courses.size());
    std::vector<std::size_t> target_skips(experiment.courses.size(), 0);
    std::vector<char> course_skipped(experiment.courses.size(), 0);

    parallel_for(experiment.courses.size(), options.jobs, [&](std::size_t i) {
        const CourseTask& task = experiment.courses[i];
        bool skipped = false;
        job(task, derive_seed(options.seed, task.course_id), slices[i], target_skips[i], skipped);
        course_skipped[i] = skipped ? 1 : 0;
    });

    MethodRun run;
    for (std::size_t i = 0; i < slices.size(); ++i) {
        run.skipped_targets += target_skips[i];
        run.skipped_courses += course_skipped[i] ? 1 : 0;
        for (auto& scored : slices[i]) {
            if (options.clamp) scored.prediction = clamp_prediction(scored.prediction);
            run.predictions.push_back(std::move(scored));
        }
    }
    return run;
}

} // namespace

MethodRun run_method(Method method, const Experiment& experiment,
                     const std::map<std::string, double>& params, const RunOptions& options) {
    const int min_students = experiment.min_students;

    switch (method) {
        case Method::csr:
        case Method::csr_rc: {
            const bool centered = method == Method::csr_rc;
            const double lambda1 = param(params, "lambda1");
            const double lambda2 = param(params, "lambda2");
            return run_per_course(
                experiment, options,
                [&](const CourseTask& task, std::uint64_t, std::vector<ScoredPrediction>& out,
                    std::size_t& skips, bool& skipped) {
                    auto model = csr_train_on(task.train, lambda1, lambda2, centered, min_students);
                    if (!model) {
                        skipped = true;
                        return;
                    }
                    for (const auto& target : task.targets) {
                        // at k = 0 a target can have no priors; centering
                        // needs a GPA, so such targets are skipped
                        if (centered && target.instance.prior.empty()) {
                            ++skips;
                            continue;
                        }
                        out.push_back({csr_predict(*model, target.instance, centered), target.actual});
                    }
                });
        }
        case Method::ssr: {
            SsrOptions ssr;
            ssr.overlap_threshold = param(params, "t");
            ssr.lambda1 = param(params, "lambda1");
            ssr.lambda2 = param(params, "lambda2");
            ssr.min_students = min_students;
            return run_per_course(
                experiment, options,
                [&](const CourseTask& task, std::uint64_t, std::vector<ScoredPrediction>& out,
                    std::size_t& skips, bool&) {
                    for (const auto& target : task.targets) {
                        if (target.instance.prior.empty()) {
                            ++skips; // no prior courses, no overlap ratio
                            continue;
                        }
                        auto prediction = ssr_train_predict(target.instance, task.train, ssr);
                        if (prediction) out.push_back({*prediction, target.actual});
                        else ++skips;
                    }
                });
        }
        case Method::sbcf: {
            const int r = static_cast<int>(param(params, "r"));
            return run_per_course(
                experiment, options,
                [&](const CourseTask& task, std::uint64_t, std::vector<ScoredPrediction>& out,
                    std::size_t& skips, bool&) {
                    for (const auto& target : task.targets) {
                        if (target.instance.prior.empty()) {
                            ++skips; // the prior mean is undefined
                            continue;
                        }
                        out.push_back({sbcf_predict(target.instance, task.train, r), target.actual});
                    }
                });
        }
        case Method::bias_only:
        case Method::mf:
        case Method::mf_gb: {
            const double lambda = param(params, "lambda");
            const int l = method == Method::bias_only ? 0 : static_cast<int>(param(params, "l"));
            const bool global_bias = method != Method::mf_gb;

            const SparseGradeMatrix& matrix = experiment.mf_matrix();
            std::vector<TargetInstance> held_out;
            std::vector<double> actuals;
            for (const auto& task : experiment.courses) {
                for (const auto& target : task.targets) {
                    held_out.push_back(target.instance);
                    actuals.push_back(target.actual);
                }
            }
            SgdOptions sgd = options.sgd;
            sgd.seed = derive_seed(options.seed, "mf-global");
            auto predictions = mf_train_predict(matrix, held_out, l, lambda, global_bias, sgd);

            MethodRun run;
            for (std::size_t i = 0; i < predictions.size(); ++i) {
                predictions[i].method = method;
                if (options.clamp) predictions[i] = clamp_prediction(predictions[i]);
                run.predictions.push_back({std::move(predictions[i]), actuals[i]});
            }
            return run;
        }
        case Method::csmf: {
            const double lambda = param(params, "lambda");
            const int l = static_cast<int>(param(params, "l"));
            return run_per_course(
                experiment, options,
                [&](const CourseTask& task, std::uint64_t seed, std::vector<ScoredPrediction>& out,
                    std::size_t&, bool& skipped) {
                    SgdOptions sgd = options.sgd;
                    sgd.seed = seed;
                    auto predictions = csmf_train_predict(task.course_id, task.train,
                                                          strip_labels(task.targets), l, lambda,
                                                          sgd, min_students);
                    if (!predictions) {
                        skipped = true;
                        return;
                    }
                    for (std::size_t t = 0; t < predictions->size(); ++t)
                        out.push_back({std::move((*predictions)[t]), task.targets[t].actual});
                });
        }
        case Method::csmf_star: {
            const double lambda = param(params, "lambda");
            static constexpr std::array<int, 3> kLatentGrid = {2, 5, 8};
            return run_per_course(
                experiment, options,
                [&](const CourseTask& task, std::uint64_t seed, std::vector<ScoredPrediction>& out,
                    std::size_t&, bool& skipped) {
                    auto result = csmf_star_select(task.course_id, task.train,
                                                   strip_labels(task.targets), kLatentGrid, lambda,
                                                   seed, options.sgd, min_students);
                    if (!result) {
                        skipped = true;
                        return;
                    }
                    for (std::size_t t = 0; t < result->predictions.size(); ++t)
                        out.push_back({std::move(result->predictions[t]), task.targets[t].actual});
                });
        }
    }
    throw DataError("unknown method");
}

namespace {

/// Validation experiment for the training-holdout policy: each course's
/// training rows are split 90/10 with a per-course seed; the held rows
/// become the targets.
Experiment holdout_experiment(const Experiment& experiment, std::uint64_t seed) {
    Experiment validation;
    validation.target_term = experiment.target_term;
    validation.k = experiment.k;
    validation.min_students = experiment.min_students;
    validation.validation_split = true;
    validation.train_cohort = experiment.train_cohort;

    for (const auto& task : experiment.courses) {
        const auto& base = task.train;
        const int n = base.design.rows();
        const int n_val = n / 10;
        if (n_val < 1) continue;

        std::vector<int> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        Rng rng(derive_seed(seed, "holdout:" + task.course_id));
        rng.shuffle(order);
        std::vector<bool> is_val(static_cast<std::size_t>(n), false);
        for (int i = 0; i < n_val; ++i) is_val[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = true;

        CourseTask split_task;
        split_task.course_id = task.course_id;
        split_task.train.target_course = base.target_course;
        split_task.train.k = base.k;

        IndexMap rows;
        std::vector<SparseGradeMatrix::Entry> entries;
        for (int r = 0; r < n; ++r) {
            if (is_val[static_cast<std::size_t>(r)]) {
                TargetInstance instance;
                instance.student_id = base.design.row_ids().name(r);
                instance.course_id = task.course_id;
                for (const auto& e : base.design.row(r))
                    instance.prior.emplace(base.design.col_ids().name(e.col), e.value);
                split_task.targets.push_back(
                    {std::move(instance), base.targets[static_cast<std::size_t>(r)]});
            } else {
                const int row = rows.add(base.design.row_ids().name(r));
                for (const auto& e : base.design.row(r)) entries.push_back({row, e.col, e.value});
                split_task.train.targets.push_back(base.targets[static_cast<std::size_t>(r)]);
            }
        }
        split_task.train.design = SparseGradeMatrix(std::move(rows), base.design.col_ids(),
                                                    std::move(entries), /*check_grade_range=*/true);
        validation.courses.push_back(std::move(split_task));
    }
    return validation;
}

bool is_global_method(Method method) {
    return method == Method::mf || method == Method::mf_gb || method == Method::bias_only;
}

} // namespace

GridSearchResult grid_search(Method method, const Experiment& experiment,
                             const std::vector<GradeRecord>& records, const GridSpec& grid,
                             const RunOptions& options) {
    if (grid.params.empty() || grid.cell_count() == 0)
        throw DataError("grid must have at least one cell");

    // the experiment each cell is scored on, per the selection policy
    const Experiment* selection_experiment = &experiment;
    Experiment validation;
    switch (grid.policy) {
        case SelectionPolicy::test_set_best:
            break;
        case SelectionPolicy::prior_semester: {
            std::set<int> earlier_terms;
            for (const auto& r : records)
                if (r.term < experiment.target_term) earlier_terms.insert(r.term);
            if (earlier_terms.size() < 2)
                throw DataError("prior-semester selection needs at least two terms before the target");
            const int validation_term = *earlier_terms.rbegin();
            std::vector<GradeRecord> earlier;
            for (const auto& r : records)
                if (r.term < experiment.target_term) earlier.push_back(r);
            validation = build_experiment(earlier, validation_term, experiment.k,
                                          experiment.min_students);
            selection_experiment = &validation;
            break;
        }
        case SelectionPolicy::training_holdout:
            validation = holdout_experiment(experiment, options.seed);
            selection_experiment = &validation;
            break;
    }

    GridSearchResult result;
    const std::size_t n_cells = grid.cell_count();
    result.cells.resize(n_cells);

    auto evaluate_cell = [&](std::size_t index) {
        GridCell& cell = result.cells[index];
        cell.params = grid.cell(index);
        RunOptions cell_options = options;
        if (is_global_method(method)) cell_options.jobs = 1; // cells already fan out
        const MethodRun run = run_method(method, *selection_experiment, cell.params, cell_options);
        if (run.predictions.empty()) {
            cell.report.rmse = std::numeric_limits<double>::infinity();
            cell.report.avg_rmse = std::numeric_limits<double>::infinity();
        } else {
            cell.report = compute_metrics(run.predictions);
        }
    };

    if (is_global_method(method)) {
        // one SGD fit per cell: parallelism pays off across cells
        selection_experiment->mf_matrix();
        parallel_for(n_cells, options.jobs, evaluate_cell);
    } else {
        for (std::size_t index = 0; index < n_cells; ++index) evaluate_cell(index);
    }

    std::size_t best_index = n_cells;
    for (std::size_t index = 0; index < n_cells; ++index) {
        if (result.cells[index].report.n_grades == 0) continue;
        if (best_index == n_cells ||
            result.cells[index].report.rmse < result.cells[best_index].report.rmse)
            best_index = index;
    }
    if (best_index == n_cells) throw DataError("no grid cell produced any prediction");

    result.best_params = result.cells[best_index].params;
    result.best_run = run_method(method, experiment, result.best_params, options);
    if (!result.best_run.predictions.empty())
        result.best_report = compute_metrics(result.best_run.predictions);
    return result;
}

DatasetStatistics dataset_statistics(const Experiment& experiment) {
    DatasetStatistics stats;
    stats.k = experiment.k;
    stats.courses_predicted = experiment.courses.size();
    if (experiment.courses.empty()) return stats;

    double train_students = 0.0, test_students = 0.0, prior_courses = 0.0, grades = 0.0;
    for (const auto& task : experiment.courses) {
        train_students += static_cast<double>(task.train.design.rows());
        test_students += static_cast<double>(task.targets.size());
        prior_courses += static_cast<double>(task.train.design.cols());
        grades += static_cast<double>(task.train.design.nnz() + task.train.targets.size());
        stats.grades_predicted += task.targets.size();
    }
    const double n = static_cast<double>(experiment.courses.size());
    stats.avg_train_students = train_students / n;
    stats.avg_test_students = test_students / n;
    stats.avg_prior_courses = prior_courses / n;
    stats.avg_grades = grades / n;
    return stats;
}

std::vector<std::vector<ScoredPrediction>> common_subset(
    const std::vector<std::vector<ScoredPrediction>>& per_method) {
    if (per_method.empty()) return {};
    std::map<std::pair<std::string, std::string>, std::size_t> counts;
    for (const auto& predictions : per_method) {
        std::set<std::pair<std::string, std::string>> seen;
        for (const auto& scored : predictions)
            seen.emplace(scored.prediction.student_id, scored.prediction.course_id);
        for (const auto& pair : seen) ++counts[pair];
    }
    std::vector<std::vector<ScoredPrediction>> restricted;
    restricted.reserve(per_method.size());
    for (const auto& predictions : per_method) {
        std::vector<ScoredPrediction> kept;
        for (const auto& scored : predictions) {
            auto it = counts.find({scored.prediction.student_id, scored.prediction.course_id});
            if (it != counts.end() && it->second == per_method.size()) kept.push_back(scored);
        }
        restricted.push_back(std::move(kept));
    }
    return restricted;
}

} // namespace gradepred
