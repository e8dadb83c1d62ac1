#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gradepred/dataset.hpp"
#include "gradepred/predictors.hpp"
#include "gradepred/types.hpp"

namespace gradepred {

struct ScoredPrediction {
    Prediction prediction;
    double actual = 0.0;
};

struct CourseMetric {
    double rmse = 0.0;
    std::size_t n_grades = 0;
};

/// Pooled RMSE over every grade plus the unweighted mean of the per-course
/// RMSE values. The two diverge when course sizes differ.
struct MetricReport {
    double rmse = 0.0;
    double avg_rmse = 0.0;
    std::map<std::string, CourseMetric> per_course;
    std::size_t n_courses = 0;
    std::size_t n_grades = 0;
};

MetricReport compute_metrics(const std::vector<ScoredPrediction>& predictions);

enum class SelectionPolicy {
    test_set_best,    // pick the cell with the lowest test RMSE (optimistic)
    prior_semester,   // select on the semester before the target semester
    training_holdout, // select on a seeded 10% row split of the training data
};

std::string_view policy_name(SelectionPolicy policy);
std::optional<SelectionPolicy> parse_policy(std::string_view name);

/// Named parameter lists forming a full cartesian grid, plus the selection
/// policy used to pick one cell.
struct GridSpec {
    std::vector<std::pair<std::string, std::vector<double>>> params;
    SelectionPolicy policy = SelectionPolicy::test_set_best;

    const std::vector<double>* values(std::string_view name) const;
    void set(const std::string& name, std::vector<double> values);
    std::size_t cell_count() const;
    /// Cell `index` of the row-major enumeration, as (name, value) pairs.
    std::map<std::string, double> cell(std::size_t index) const;
};

/// The hyperparameter grids the methods are searched over, with each
/// method's default selection policy.
GridSpec default_grids(Method method);

/// One course's training design and evaluation targets.
struct CourseTask {
    std::string course_id;
    CourseDataset train;
    std::vector<LabeledTarget> targets;
};

/// Everything a method needs to train and score on one cohort split:
/// per-course datasets for the gate-passing courses, the raw records (for
/// validation re-splits), and the global completion matrix.
struct Experiment {
    int target_term = 0;
    int k = 0;
    int min_students = 20;
    /// Set on artificial validation splits: a held-out row's grade may then
    /// legitimately reappear as a prior in another course's design, and is
    /// dropped from the global matrix rather than treated as leakage.
    bool validation_split = false;
    std::vector<CourseTask> courses;
    std::vector<std::pair<std::string, std::string>> skipped; // (course, reason)
    Cohort train_cohort;

    const SparseGradeMatrix& mf_matrix() const; // built on first use
    std::size_t n_targets() const;

private:
    mutable std::optional<SparseGradeMatrix> mf_matrix_;
};

/// Splits records at `target_term`, builds each predicted course's training
/// design from the inactive cohort and its targets from the active one, and
/// applies the min-students gate.
Experiment build_experiment(const std::vector<GradeRecord>& records, int target_term, int k,
                            int min_students = 20);

struct RunOptions {
    std::uint64_t seed = 0;
    unsigned jobs = 1;
    bool clamp = false;
    int sbcf_r = 10;
    SgdOptions sgd = {};
};

struct MethodRun {
    std::vector<ScoredPrediction> predictions;
    std::size_t skipped_targets = 0; // SSR-style per-target skips
    std::size_t skipped_courses = 0;
};

/// Trains and predicts one method at fixed hyperparameters across the
/// whole experiment. Course-level jobs fan out to `options.jobs` workers;
/// the merged output is ordered by course, then student.
MethodRun run_method(Method method, const Experiment& experiment,
                     const std::map<std::string, double>& params, const RunOptions& options);

struct GridCell {
    std::map<std::string, double> params;
    MetricReport report; // scored per the selection policy
};

struct GridSearchResult {
    std::map<std::string, double> best_params;
    std::vector<GridCell> cells;
    MethodRun best_run;       // the best cell applied to the experiment
    MetricReport best_report; // metrics of best_run on the experiment
};

/// Evaluates every cell of the grid, selects per the policy, and reports
/// the selected cell's performance on the experiment itself. Cells are
/// scored sequentially; courses within a cell run in parallel.
GridSearchResult grid_search(Method method, const Experiment& experiment,
                             const std::vector<GradeRecord>& records, const GridSpec& grid,
                             const RunOptions& options);

/// Table of course-specific dataset statistics for one k.
struct DatasetStatistics {
    int k = 0;
    double avg_train_students = 0.0;
    double avg_test_students = 0.0;
    double avg_prior_courses = 0.0;
    double avg_grades = 0.0; // design entries + training targets
    std::size_t courses_predicted = 0;
    std::size_t grades_predicted = 0;
};

DatasetStatistics dataset_statistics(const Experiment& experiment);

/// Restricts each method's predictions to the (student, course) pairs
/// predicted by every method, for like-for-like metric comparisons.
std::vector<std::vector<ScoredPrediction>> common_subset(
    const std::vector<std::vector<ScoredPrediction>>& per_method);

} // namespace gradepred
