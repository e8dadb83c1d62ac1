#pragma once

#include <iosfwd>
#include <set>
#include <string>
#include <vector>

#include "gradepred/types.hpp"

namespace gradepred {

/// A set of students' records plus the latest term present. last_term is -1
/// when the cohort is empty.
struct Cohort {
    std::vector<GradeRecord> records;
    int last_term = -1;
};

Cohort make_cohort(std::vector<GradeRecord> records);

struct ParseReport {
    std::size_t lines = 0;            // data lines seen (header excluded)
    std::size_t kept = 0;
    std::size_t dropped_passfail = 0; // S/N/P or otherwise unknown letters
    std::size_t dropped_range = 0;    // numeric grade outside [0,4] or bad term
    std::size_t dropped_malformed = 0;
    std::size_t retakes_collapsed = 0; // filled in by dedupe_retakes
    std::vector<std::string> warnings; // capped, one per dropped line

    std::size_t dropped() const { return dropped_passfail + dropped_range + dropped_malformed; }
};

struct ParseResult {
    std::vector<GradeRecord> records;
    ParseReport report;
};

/// Reads delimiter-separated text with a header row naming the columns
/// student, course, term, grade (any order; comma or tab auto-detected from
/// the header). Grades are accepted as letters (A..F, converted to points)
/// or as reals in [0,4]. Invalid lines are dropped and counted; a bad
/// header is fatal.
ParseResult parse_records(std::istream& source);

/// Canonical CSV form of the records: fixed header, one row per record,
/// shortest round-trip decimals. parse_records(write_records(x)) == x.
void write_records(std::ostream& out, const std::vector<GradeRecord>& records);

/// Sorts by (student, term, course); the order cmd_ingest emits.
std::vector<GradeRecord> sorted_records(std::vector<GradeRecord> records);

/// Collapses duplicate (student, course) observations, keeping the grade of
/// the chronologically latest term (registrar convention for retakes).
/// Increments report.retakes_collapsed per collapsed record.
std::vector<GradeRecord> dedupe_retakes(std::vector<GradeRecord> records, ParseReport* report = nullptr);

/// One course_id per line; blank lines and '#' comments ignored.
std::set<std::string> read_allowlist(std::istream& in);

/// Keeps only the records whose course is in the allow-list.
std::vector<GradeRecord> apply_allowlist(std::vector<GradeRecord> records,
                                         const std::set<std::string>& allowed);

struct ActiveSplit {
    Cohort active;   // students with >= 1 record at the target term
    Cohort inactive; // everyone else
};

/// Splits students by whether they have a record in `target_term`. The two
/// student sets partition the input. Throws DataError when no record has
/// the target term.
ActiveSplit split_active(const std::vector<GradeRecord>& records, int target_term);

} // namespace gradepred
