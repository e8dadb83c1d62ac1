#include "gradepred/ingest.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace gradepred {

namespace {

constexpr std::size_t kMaxWarnings = 50;

void warn(ParseReport& report, std::size_t line_no, const std::string& what) {
    if (report.warnings.size() < kMaxWarnings)
        report.warnings.push_back("line " + std::to_string(line_no) + ": " + what);
}

std::vector<std::string> split_line(const std::string& line, char delim) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, delim)) fields.push_back(field);
    if (!line.empty() && line.back() == delim) fields.emplace_back();
    return fields;
}

std::string strip(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

} // namespace

Cohort make_cohort(std::vector<GradeRecord> records) {
    Cohort cohort;
    cohort.records = std::move(records);
    for (const auto& r : cohort.records) cohort.last_term = std::max(cohort.last_term, r.term);
    return cohort;
}

ParseResult parse_records(std::istream& source) {
    ParseResult result;
    std::string line;
    if (!std::getline(source, line))
        throw DataError("empty input: no header row");

    const char delim = line.find('\t') != std::string::npos ? '\t' : ',';
    auto header = split_line(line, delim);
    int col_student = -1, col_course = -1, col_term = -1, col_grade = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        const std::string name = strip(header[i]);
        if (name == "student") col_student = static_cast<int>(i);
        else if (name == "course") col_course = static_cast<int>(i);
        else if (name == "term") col_term = static_cast<int>(i);
        else if (name == "grade") col_grade = static_cast<int>(i);
    }
    if (col_student < 0 || col_course < 0 || col_term < 0 || col_grade < 0)
        throw DataError("header must name columns student, course, term, grade; got: " + line);
    const std::size_t need = static_cast<std::size_t>(
        std::max({col_student, col_course, col_term, col_grade}) + 1);

    ParseReport& report = result.report;
    std::size_t line_no = 1;
    while (std::getline(source, line)) {
        ++line_no;
        if (strip(line).empty()) continue;
        ++report.lines;
        auto fields = split_line(line, delim);
        if (fields.size() < need) {
            ++report.dropped_malformed;
            warn(report, line_no, "expected " + std::to_string(need) + " fields");
            continue;
        }
        const std::string student = strip(fields[static_cast<std::size_t>(col_student)]);
        const std::string course = strip(fields[static_cast<std::size_t>(col_course)]);
        const std::string term_text = strip(fields[static_cast<std::size_t>(col_term)]);
        const std::string grade_text = strip(fields[static_cast<std::size_t>(col_grade)]);
        if (student.empty() || course.empty()) {
            ++report.dropped_malformed;
            warn(report, line_no, "empty student or course id");
            continue;
        }
        const auto term_value = parse_double(term_text);
        if (!term_value || *term_value != static_cast<int>(*term_value) || *term_value < 0) {
            ++report.dropped_range;
            warn(report, line_no, "bad term '" + term_text + "'");
            continue;
        }
        double grade = 0.0;
        if (auto numeric = parse_double(grade_text)) {
            if (*numeric < kMinGrade || *numeric > kMaxGrade) {
                ++report.dropped_range;
                warn(report, line_no, "grade out of range [0,4]: " + grade_text);
                continue;
            }
            grade = *numeric;
        } else if (auto points = letter_to_points(grade_text)) {
            grade = *points;
        } else {
            // pass/fail marks (S/N/P) and anything else off the A-F scale
            ++report.dropped_passfail;
            warn(report, line_no, "unconvertible grade '" + grade_text + "' (pass/fail records are excluded)");
            continue;
        }
        result.records.push_back(make_record(student, course, static_cast<int>(*term_value), grade));
        ++report.kept;
    }
    return result;
}

void write_records(std::ostream& out, const std::vector<GradeRecord>& records) {
    out << "student,course,term,grade\n";
    for (const auto& r : records)
        out << r.student_id << ',' << r.course_id << ',' << r.term << ','
            << format_double(r.grade) << '\n';
}

std::vector<GradeRecord> sorted_records(std::vector<GradeRecord> records) {
    std::sort(records.begin(), records.end(), [](const GradeRecord& a, const GradeRecord& b) {
        if (a.student_id != b.student_id) return a.student_id < b.student_id;
        if (a.term != b.term) return a.term < b.term;
        return a.course_id < b.course_id;
    });
    return records;
}

std::vector<GradeRecord> dedupe_retakes(std::vector<GradeRecord> records, ParseReport* report) {
    std::map<std::pair<std::string, std::string>, std::size_t> latest;
    std::vector<GradeRecord> kept;
    kept.reserve(records.size());
    std::size_t collapsed = 0;
    for (auto& r : records) {
        auto key = std::make_pair(r.student_id, r.course_id);
        auto it = latest.find(key);
        if (it == latest.end()) {
            latest.emplace(std::move(key), kept.size());
            kept.push_back(std::move(r));
        } else {
            ++collapsed;
            // keep the chronologically latest taking; ties keep the later line
            if (r.term >= kept[it->second].term) kept[it->second] = std::move(r);
        }
    }
    if (report) report->retakes_collapsed += collapsed;
    return kept;
}

std::set<std::string> read_allowlist(std::istream& in) {
    std::set<std::string> allowed;
    std::string line;
    while (std::getline(in, line)) {
        const std::string id = strip(line);
        if (id.empty() || id.front() == '#') continue;
        allowed.insert(id);
    }
    return allowed;
}

std::vector<GradeRecord> apply_allowlist(std::vector<GradeRecord> records,
                                         const std::set<std::string>& allowed) {
    std::erase_if(records, [&](const GradeRecord& r) { return !allowed.contains(r.course_id); });
    return records;
}

ActiveSplit split_active(const std::vector<GradeRecord>& records, int target_term) {
    std::set<std::string> active_students;
    for (const auto& r : records)
        if (r.term == target_term) active_students.insert(r.student_id);
    if (active_students.empty())
        throw DataError("no records at target term " + std::to_string(target_term));

    std::vector<GradeRecord> active, inactive;
    for (const auto& r : records) {
        if (active_students.contains(r.student_id)) active.push_back(r);
        else inactive.push_back(r);
    }
    return ActiveSplit{make_cohort(std::move(active)), make_cohort(std::move(inactive))};
}

} // namespace gradepred
