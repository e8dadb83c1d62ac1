#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gradepred {

/// Base class for all errors raised by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed or out-of-contract input data.
struct DataError : Error {
    using Error::Error;
};

/// A held-out (student, course) pair was found inside a training matrix.
struct LeakageError : Error {
    using Error::Error;
};

inline constexpr double kMinGrade = 0.0;
inline constexpr double kMaxGrade = 4.0;

/// One (student, course, term, grade-points) observation. Grade points are
/// on the 0-4 scale; terms are integer indices where smaller means earlier.
struct GradeRecord {
    std::string student_id;
    std::string course_id;
    int term = 0;
    double grade = 0.0;

    bool operator==(const GradeRecord&) const = default;
};

/// Validates the GradeRecord invariants, throwing DataError on violation.
GradeRecord make_record(std::string student_id, std::string course_id, int term, double grade);

/// Letter grade to grade points on the standard 4-point scale with the
/// thirds convention (A- = 3.667, B+ = 3.333, ...). Returns nullopt for
/// anything outside the A..F scale, including pass/fail marks (S/N/P),
/// which callers must drop.
std::optional<double> letter_to_points(std::string_view letter);

/// The letters letter_to_points accepts, from A down to F.
std::span<const std::string_view> letter_scale();

/// Bijective mapping between opaque string ids and dense indices [0, size).
class IndexMap {
public:
    /// Returns the index of `name`, inserting it if new.
    int add(std::string name);
    std::optional<int> find(std::string_view name) const;
    const std::string& name(int index) const;
    int size() const { return static_cast<int>(names_.size()); }
    const std::vector<std::string>& names() const { return names_; }

    bool operator==(const IndexMap& other) const { return names_ == other.names_; }

private:
    std::vector<std::string> names_;
    std::map<std::string, int, std::less<>> ids_;
};

/// Partially observed students x courses matrix. Stores explicit (row, col,
/// value) entries, at most one per cell, with both row-major and
/// column-major views. Immutable after construction.
class SparseGradeMatrix {
public:
    struct Entry {
        int row = 0;
        int col = 0;
        double value = 0.0;
        bool operator==(const Entry&) const = default;
    };
    struct ColEntry {
        int row = 0;
        double value = 0.0;
    };

    SparseGradeMatrix() = default;

    /// `check_grade_range` enforces values in [0, 4] (pre-centering data).
    SparseGradeMatrix(IndexMap row_ids, IndexMap col_ids, std::vector<Entry> entries,
                      bool check_grade_range = false);

    int rows() const { return row_ids_.size(); }
    int cols() const { return col_ids_.size(); }
    std::size_t nnz() const { return entries_.size(); }

    const IndexMap& row_ids() const { return row_ids_; }
    const IndexMap& col_ids() const { return col_ids_; }

    /// All entries, sorted row-major.
    const std::vector<Entry>& entries() const { return entries_; }
    /// Entries of one row, sorted by column.
    std::span<const Entry> row(int r) const;
    /// Entries of one column, sorted by row.
    std::span<const ColEntry> col(int c) const;

    std::optional<double> at(int r, int c) const;

private:
    IndexMap row_ids_;
    IndexMap col_ids_;
    std::vector<Entry> entries_;       // row-major sorted
    std::vector<std::size_t> row_ptr_; // rows()+1 offsets into entries_
    std::vector<ColEntry> col_entries_;
    std::vector<std::size_t> col_ptr_;
};

/// Mean of the observed values in a row. A student with no prior grades
/// cannot be centered or predicted, so an empty row is an error.
double row_gpa(const SparseGradeMatrix& matrix, int row);

/// Per-target-course training design: design rows are the students that
/// took the course, columns their strictly prior courses, targets the
/// grades obtained in the course itself. `centering`, when present, is the
/// per-row GPA that was subtracted from both design entries and targets.
struct CourseDataset {
    SparseGradeMatrix design;
    std::vector<double> targets;
    std::string target_course;
    std::optional<std::vector<double>> centering;
    int k = 0; // prior-course floor used when the dataset was built

    int n_students() const { return design.rows(); }
};

/// Sparse linear model: prediction = bias + sum over taken courses of
/// weight * grade. Courses absent from `weights` have coefficient exactly 0.
struct LinearModel {
    double bias = 0.0;
    std::map<std::string, double> weights;
    bool nonneg = false;
    double lambda1 = 0.0;
    double lambda2 = 0.0;

    double weight(std::string_view course) const;
};

/// Row-major dense matrix, only as large as factor matrices need.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {}

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    double& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
    double operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
    std::span<const double> row(int r) const { return {data_.data() + static_cast<std::size_t>(r) * cols_, static_cast<std::size_t>(cols_)}; }
    std::span<double> row(int r) { return {data_.data() + static_cast<std::size_t>(r) * cols_, static_cast<std::size_t>(cols_)}; }
    const std::vector<double>& data() const { return data_; }

    bool operator==(const DenseMatrix&) const = default;

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

/// Biased matrix-completion model: prediction for cell (i, j) is
/// mu + student_bias[i] + course_bias[j] + dot(p.row(i), q.row(j)).
struct MfModel {
    double mu = 0.0;
    std::vector<double> student_bias; // length n
    std::vector<double> course_bias;  // length m
    DenseMatrix p;                    // n x l
    DenseMatrix q;                    // m x l
    int latent_dim = 0;
    double lambda = 0.0;
    bool use_global_bias = true;
    std::uint64_t seed = 0; // the SGD stream that produced the model
    IndexMap students;
    IndexMap courses;

    double predict(int student_row, int course_col) const;
    /// Students or courses unseen in training contribute zero bias and
    /// zero factors, so a fully unknown pair predicts mu.
    double predict_ids(std::string_view student_id, std::string_view course_id) const;
};

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);
/// Strict double parser; nullopt when the text is not a full double.
std::optional<double> parse_double(std::string_view text);

} // namespace gradepred
