#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gradepred/evaluation.hpp"
#include "gradepred/synth.hpp"
#include "gradepred/types.hpp"

namespace gradepred {

/// Declarative run manifest: the config-file keys mirror these fields and
/// command-line flags override them.
struct RunConfig {
    std::filesystem::path input;
    std::filesystem::path out_dir = ".";
    std::optional<std::filesystem::path> cache_dir;
    std::optional<int> target_term; // default: the data's last term
    int k = 5;
    int min_students = 20;
    std::vector<Method> methods = {Method::csr_rc};
    std::optional<SelectionPolicy> policy; // override for every method
    std::map<std::string, std::map<std::string, std::vector<double>>> grid_overrides;
    std::uint64_t seed = 0;
    unsigned jobs = 1;
    bool clamp = false;
    bool common_subset_report = false;
    int sbcf_r = 10;
};

struct MethodOutcome {
    Method method = Method::csr;
    std::map<std::string, double> best_params;
    MetricReport report;
    std::vector<GridCell> cells;
    std::vector<ScoredPrediction> predictions;
    std::size_t skipped_courses = 0;
    std::size_t skipped_targets = 0;
};

struct RunResult {
    Experiment experiment;
    DatasetStatistics statistics;
    std::vector<MethodOutcome> outcomes;
    std::optional<std::vector<MetricReport>> common_subset_reports; // parallel to outcomes
};

/// Thrown when gating leaves nothing to predict (CLI exit code 3).
struct NoPredictableCourses : Error {
    using Error::Error;
};

/// The full experiment: split at the target term, build and gate the
/// per-course datasets (through the cache when configured), grid-search
/// each requested method, and audit the predictions for training leakage.
RunResult run_pipeline(const std::vector<GradeRecord>& records, const RunConfig& config);

/// Applies config-file grid overrides on top of a method's default grid.
GridSpec grid_for(Method method, const RunConfig& config);

/// Verifies no emitted prediction pair was observed in any training
/// design or in the global completion matrix. Throws LeakageError.
void audit_leakage(const RunResult& result);

/// Writers for the four run outputs. All output is byte-deterministic for
/// a fixed (records, config) pair.
void write_predictions_file(std::ostream& out, const RunResult& result);
void write_metrics_file(std::ostream& out, const RunResult& result);
void write_metrics_table(std::ostream& out, const RunResult& result);
void write_statistics_file(std::ostream& out, const std::vector<DatasetStatistics>& rows);
void write_statistics_table(std::ostream& out, const std::vector<DatasetStatistics>& rows);
void write_grid_file(std::ostream& out, const MethodOutcome& outcome);

/// Key=value configuration file: '#' comments, blank lines ignored.
/// Unknown keys are an error (catches typos in run manifests).
RunConfig load_run_config(std::istream& in, const std::filesystem::path& base_dir);

/// Same key=value format for the generator: kind, n_students, seed, ...
SynthConfig load_synth_config(std::istream& in);

} // namespace gradepred
