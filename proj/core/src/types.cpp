#include "gradepred/types.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>

namespace gradepred {

GradeRecord make_record(std::string student_id, std::string course_id, int term, double grade) {
    if (student_id.empty() || course_id.empty())
        throw DataError("grade record needs non-empty student and course ids");
    if (term < 0)
        throw DataError("grade record term must be >= 0, got " + std::to_string(term));
    if (!std::isfinite(grade) || grade < kMinGrade || grade > kMaxGrade)
        throw DataError("grade out of range [0,4]: " + format_double(grade) + " for " + student_id + "/" + course_id);
    return GradeRecord{std::move(student_id), std::move(course_id), term, grade};
}

namespace {

constexpr std::array<std::string_view, 11> kLetters = {
    "A", "A-", "B+", "B", "B-", "C+", "C", "C-", "D+", "D", "F"};
constexpr std::array<double, 11> kPoints = {
    4.0, 3.667, 3.333, 3.0, 2.667, 2.333, 2.0, 1.667, 1.333, 1.0, 0.0};

} // namespace

std::optional<double> letter_to_points(std::string_view letter) {
    for (std::size_t i = 0; i < kLetters.size(); ++i)
        if (kLetters[i] == letter) return kPoints[i];
    return std::nullopt;
}

std::span<const std::string_view> letter_scale() {
    return {kLetters.data(), kLetters.size()};
}

int IndexMap::add(std::string name) {
    auto it = ids_.find(name);
    if (it != ids_.end()) return it->second;
    int index = size();
    ids_.emplace(name, index);
    names_.push_back(std::move(name));
    return index;
}

std::optional<int> IndexMap::find(std::string_view name) const {
    auto it = ids_.find(name);
    if (it == ids_.end()) return std::nullopt;
    return it->second;
}

const std::string& IndexMap::name(int index) const {
    if (index < 0 || index >= size())
        throw Error("index map lookup out of range: " + std::to_string(index));
    return names_[static_cast<std::size_t>(index)];
}

SparseGradeMatrix::SparseGradeMatrix(IndexMap row_ids, IndexMap col_ids,
                                     std::vector<Entry> entries, bool check_grade_range)
    : row_ids_(std::move(row_ids)), col_ids_(std::move(col_ids)), entries_(std::move(entries)) {
    const int n = rows();
    const int m = cols();
    for (const Entry& e : entries_) {
        if (e.row < 0 || e.row >= n || e.col < 0 || e.col >= m)
            throw DataError("sparse matrix entry out of bounds");
        if (!std::isfinite(e.value))
            throw DataError("sparse matrix entry is not finite");
        if (check_grade_range && (e.value < kMinGrade || e.value > kMaxGrade))
            throw DataError("grade matrix value out of range [0,4]: " + format_double(e.value));
    }
    std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    for (std::size_t i = 1; i < entries_.size(); ++i)
        if (entries_[i].row == entries_[i - 1].row && entries_[i].col == entries_[i - 1].col)
            throw DataError("duplicate matrix cell (" + row_ids_.name(entries_[i].row) + ", " +
                            col_ids_.name(entries_[i].col) + ")");

    row_ptr_.assign(static_cast<std::size_t>(n) + 1, 0);
    for (const Entry& e : entries_) ++row_ptr_[static_cast<std::size_t>(e.row) + 1];
    for (std::size_t r = 0; r < row_ptr_.size() - 1; ++r) row_ptr_[r + 1] += row_ptr_[r];

    col_ptr_.assign(static_cast<std::size_t>(m) + 1, 0);
    for (const Entry& e : entries_) ++col_ptr_[static_cast<std::size_t>(e.col) + 1];
    for (std::size_t c = 0; c < col_ptr_.size() - 1; ++c) col_ptr_[c + 1] += col_ptr_[c];
    col_entries_.resize(entries_.size());
    std::vector<std::size_t> fill(col_ptr_.begin(), col_ptr_.end() - 1);
    for (const Entry& e : entries_)
        col_entries_[fill[static_cast<std::size_t>(e.col)]++] = ColEntry{e.row, e.value};
}

std::span<const SparseGradeMatrix::Entry> SparseGradeMatrix::row(int r) const {
    if (r < 0 || r >= rows()) throw Error("row index out of range: " + std::to_string(r));
    return {entries_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
}

std::span<const SparseGradeMatrix::ColEntry> SparseGradeMatrix::col(int c) const {
    if (c < 0 || c >= cols()) throw Error("column index out of range: " + std::to_string(c));
    return {col_entries_.data() + col_ptr_[c], col_ptr_[c + 1] - col_ptr_[c]};
}

std::optional<double> SparseGradeMatrix::at(int r, int c) const {
    auto span = row(r);
    auto it = std::lower_bound(span.begin(), span.end(), c,
                               [](const Entry& e, int col) { return e.col < col; });
    if (it == span.end() || it->col != c) return std::nullopt;
    return it->value;
}

double row_gpa(const SparseGradeMatrix& matrix, int row) {
    auto span = matrix.row(row);
    if (span.empty())
        throw DataError("cannot compute GPA of a row with no observed grades: " +
                        matrix.row_ids().name(row));
    double sum = 0.0;
    for (const auto& e : span) sum += e.value;
    return sum / static_cast<double>(span.size());
}

double LinearModel::weight(std::string_view course) const {
    auto it = weights.find(std::string(course));
    return it == weights.end() ? 0.0 : it->second;
}

double MfModel::predict(int student_row, int course_col) const {
    double value = mu;
    if (student_row >= 0) value += student_bias[static_cast<std::size_t>(student_row)];
    if (course_col >= 0) value += course_bias[static_cast<std::size_t>(course_col)];
    if (student_row >= 0 && course_col >= 0) {
        auto pr = p.row(student_row);
        auto qr = q.row(course_col);
        for (int f = 0; f < latent_dim; ++f) value += pr[f] * qr[f];
    }
    return value;
}

double MfModel::predict_ids(std::string_view student_id, std::string_view course_id) const {
    const int i = students.find(student_id).value_or(-1);
    const int j = courses.find(course_id).value_or(-1);
    return predict(i, j);
}

std::string format_double(double value) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    if (ec != std::errc{}) throw Error("failed to format double");
    return std::string(buf.data(), ptr);
}

std::optional<double> parse_double(std::string_view text) {
    if (text.empty()) return std::nullopt;
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
    return value;
}

} // namespace gradepred
