#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "gradepred/ingest.hpp"
#include "gradepred/types.hpp"

namespace gradepred {

/// One grade to predict: the student, the course, and the student's
/// strictly-earlier grades. Deliberately does NOT carry the true grade, so
/// nothing reachable from a predictor can read it; evaluation keeps the
/// actual value next to the instance in LabeledTarget.
struct TargetInstance {
    std::string student_id;
    std::string course_id;
    int term = 0; // term of the (hidden) observation; priors are strictly earlier
    std::map<std::string, double> prior;

    /// Mean of the prior grades (the student's GPA before the target course).
    double prior_gpa() const;
};

struct LabeledTarget {
    TargetInstance instance;
    double actual = 0.0;
};

std::vector<TargetInstance> strip_labels(const std::vector<LabeledTarget>& labeled);

/// Training design for one target course: rows are the cohort students that
/// took `course` and took at least k other courses strictly before it
/// (by term); columns are all courses appearing in those prior records;
/// targets are the grades obtained in `course`. A student with several
/// takings of `course` uses the first taking's term as the cutoff.
CourseDataset build_course_dataset(const std::string& course, const Cohort& train_cohort, int k);

/// Evaluation instances for one course: the cohort students with a grade in
/// `course` at exactly `target_term` whose strictly-earlier records span at
/// least k other courses.
std::vector<LabeledTarget> build_targets(const std::string& course, const Cohort& cohort,
                                         int target_term, int k);

/// Subtracts each row's GPA from its design entries and its target, and
/// records the GPA vector. Throws DataError when a design row is empty.
CourseDataset center_dataset(const CourseDataset& ds);

/// |target ∩ other| / |target|. Throws DataError on an empty target set.
double overlap_ratio(const std::set<std::string>& target_courses,
                     const std::set<std::string>& other_courses);

/// Student-specific design: base columns restricted to the target student's
/// prior courses, base rows restricted to students whose overlap ratio with
/// the target (computed on full prior-course sets, before the column
/// restriction) is at least t. May return an empty dataset.
CourseDataset build_ssr_dataset(const TargetInstance& target, const CourseDataset& base, double t);

/// The course-specific completion matrix: base students stacked above the
/// target students, one column per course with at least one grade in either
/// group's priors, plus a final column holding the base students' grades in
/// `course`. The target rows' final-column cells are the ones to predict.
SparseGradeMatrix build_csmf_matrix(const std::string& course, const CourseDataset& base,
                                    const std::vector<TargetInstance>& targets);

/// What to do when a held-out (student, course) cell shows up among the
/// training grades. In a real cohort split that cannot happen, so it is a
/// fatal leakage bug; in artificial validation splits (training-holdout
/// policy) a held-out row's grade legitimately reappears as another
/// course's prior and is silently dropped instead.
enum class HeldOutCells { fail, drop };

/// The global completion matrix: union of every course's training design,
/// training targets, and target-student priors, with the held-out
/// (target student, target course) cells guaranteed absent.
SparseGradeMatrix build_mf_matrix(
    const std::vector<std::pair<const CourseDataset*, const std::vector<TargetInstance>*>>& per_course,
    HeldOutCells on_held_out = HeldOutCells::fail);

/// Models with fewer than `floor` students in their dataset are skipped.
bool min_students_gate(const CourseDataset& ds, int floor = 20);

} // namespace gradepred
