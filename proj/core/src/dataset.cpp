#include "gradepred/dataset.hpp"

#include <algorithm>

namespace gradepred {

namespace {

struct CourseTaking {
    int first_term = -1;  // cutoff for "prior to course c"
    int last_term = -1;   // the kept grade's term (latest taking wins)
    double last_grade = 0.0;
};

struct StudentHistory {
    std::map<std::string, CourseTaking> by_course;
};

/// Groups a cohort by student, collapsing duplicate (student, course)
/// records to the latest taking's grade (mirrors dedupe_retakes for raw
/// input) while remembering the first taking's term.
std::map<std::string, StudentHistory> group_by_student(const Cohort& cohort) {
    std::map<std::string, StudentHistory> students;
    for (const auto& r : cohort.records) {
        auto& taking = students[r.student_id].by_course[r.course_id];
        if (taking.first_term < 0 || r.term < taking.first_term) taking.first_term = r.term;
        if (r.term >= taking.last_term) {
            taking.last_term = r.term;
            taking.last_grade = r.grade;
        }
    }
    return students;
}

/// The strictly-earlier grades of one student.
std::map<std::string, double> prior_grades(const StudentHistory& history, int cutoff_term) {
    std::map<std::string, double> prior;
    for (const auto& [course, taking] : history.by_course)
        if (taking.last_term < cutoff_term) prior.emplace(course, taking.last_grade);
    return prior;
}

} // namespace

double TargetInstance::prior_gpa() const {
    if (prior.empty())
        throw DataError("student " + student_id + " has no prior grades; GPA undefined");
    double sum = 0.0;
    for (const auto& [course, grade] : prior) sum += grade;
    return sum / static_cast<double>(prior.size());
}

std::vector<TargetInstance> strip_labels(const std::vector<LabeledTarget>& labeled) {
    std::vector<TargetInstance> instances;
    instances.reserve(labeled.size());
    for (const auto& l : labeled) instances.push_back(l.instance);
    return instances;
}

CourseDataset build_course_dataset(const std::string& course, const Cohort& train_cohort, int k) {
    if (k < 0) throw DataError("prior-course floor k must be >= 0");
    CourseDataset ds;
    ds.target_course = course;
    ds.k = k;

    IndexMap rows, cols;
    std::vector<SparseGradeMatrix::Entry> entries;
    std::vector<double> targets;

    for (const auto& [student, history] : group_by_student(train_cohort)) {
        auto it = history.by_course.find(course);
        if (it == history.by_course.end()) continue;
        // first taking's term is the cutoff; all retake grades of `course`
        // itself land at or after it and so never enter the design row
        auto prior = prior_grades(history, it->second.first_term);
        if (static_cast<int>(prior.size()) < k) continue;

        const int row = rows.add(student);
        for (const auto& [prior_course, grade] : prior)
            entries.push_back({row, cols.add(prior_course), grade});
        targets.push_back(it->second.last_grade);
    }

    ds.design = SparseGradeMatrix(std::move(rows), std::move(cols), std::move(entries),
                                  /*check_grade_range=*/true);
    ds.targets = std::move(targets);
    return ds;
}

std::vector<LabeledTarget> build_targets(const std::string& course, const Cohort& cohort,
                                         int target_term, int k) {
    std::vector<LabeledTarget> targets;
    for (const auto& [student, history] : group_by_student(cohort)) {
        auto it = history.by_course.find(course);
        if (it == history.by_course.end() || it->second.last_term != target_term) continue;
        TargetInstance instance;
        instance.student_id = student;
        instance.course_id = course;
        instance.term = target_term;
        instance.prior = prior_grades(history, target_term);
        instance.prior.erase(course);
        if (static_cast<int>(instance.prior.size()) < k) continue;
        targets.push_back(LabeledTarget{std::move(instance), it->second.last_grade});
    }
    return targets;
}

CourseDataset center_dataset(const CourseDataset& ds) {
    CourseDataset centered;
    centered.target_course = ds.target_course;
    centered.k = ds.k;

    std::vector<double> gpa(static_cast<std::size_t>(ds.design.rows()), 0.0);
    for (int r = 0; r < ds.design.rows(); ++r) gpa[static_cast<std::size_t>(r)] = row_gpa(ds.design, r);

    std::vector<SparseGradeMatrix::Entry> entries;
    entries.reserve(ds.design.nnz());
    for (const auto& e : ds.design.entries())
        entries.push_back({e.row, e.col, e.value - gpa[static_cast<std::size_t>(e.row)]});

    centered.design = SparseGradeMatrix(ds.design.row_ids(), ds.design.col_ids(), std::move(entries));
    centered.targets.reserve(ds.targets.size());
    for (std::size_t i = 0; i < ds.targets.size(); ++i)
        centered.targets.push_back(ds.targets[i] - gpa[i]);
    centered.centering = std::move(gpa);
    return centered;
}

double overlap_ratio(const std::set<std::string>& target_courses,
                     const std::set<std::string>& other_courses) {
    if (target_courses.empty())
        throw DataError("overlap ratio undefined for an empty target course set");
    std::size_t common = 0;
    for (const auto& c : target_courses)
        if (other_courses.contains(c)) ++common;
    return static_cast<double>(common) / static_cast<double>(target_courses.size());
}

CourseDataset build_ssr_dataset(const TargetInstance& target, const CourseDataset& base, double t) {
    if (t < 0.0 || t > 1.0) throw DataError("overlap threshold t must be in [0,1]");
    if (base.centering)
        throw DataError("build_ssr_dataset expects the uncentered base dataset");

    std::set<std::string> target_courses;
    for (const auto& [course, grade] : target.prior) target_courses.insert(course);

    CourseDataset ds;
    ds.target_course = base.target_course;
    ds.k = base.k;

    IndexMap rows, cols;
    std::vector<SparseGradeMatrix::Entry> entries;
    std::vector<double> targets;

    for (int r = 0; r < base.design.rows(); ++r) {
        // overlap is computed on the full prior-course sets, before any
        // column restriction
        std::set<std::string> peer_courses;
        for (const auto& e : base.design.row(r)) peer_courses.insert(base.design.col_ids().name(e.col));
        if (overlap_ratio(target_courses, peer_courses) < t) continue;

        const int row = rows.add(base.design.row_ids().name(r));
        for (const auto& e : base.design.row(r)) {
            const std::string& course = base.design.col_ids().name(e.col);
            if (target_courses.contains(course)) entries.push_back({row, cols.add(course), e.value});
        }
        targets.push_back(base.targets[static_cast<std::size_t>(r)]);
    }

    ds.design = SparseGradeMatrix(std::move(rows), std::move(cols), std::move(entries),
                                  /*check_grade_range=*/true);
    ds.targets = std::move(targets);
    return ds;
}

SparseGradeMatrix build_csmf_matrix(const std::string& course, const CourseDataset& base,
                                    const std::vector<TargetInstance>& targets) {
    if (base.design.col_ids().find(course))
        throw DataError("base design must not contain the target course " + course);
    std::set<std::string> prior_courses;
    for (int c = 0; c < base.design.cols(); ++c)
        if (!base.design.col(c).empty()) prior_courses.insert(base.design.col_ids().name(c));
    for (const auto& target : targets) {
        if (target.course_id != course)
            throw DataError("csmf target for wrong course: " + target.course_id);
        if (base.design.row_ids().find(target.student_id))
            throw DataError("csmf target student also present in base: " + target.student_id);
        if (target.prior.contains(course))
            throw DataError("target student " + target.student_id + " has a prior grade in " +
                            course + " itself");
        for (const auto& [prior_course, grade] : target.prior) prior_courses.insert(prior_course);
    }

    IndexMap rows, cols;
    for (const auto& c : prior_courses) cols.add(c);
    const int last_col = cols.add(course); // final column holds the y^c grades

    std::vector<SparseGradeMatrix::Entry> entries;
    for (int r = 0; r < base.design.rows(); ++r) {
        const int row = rows.add(base.design.row_ids().name(r));
        for (const auto& e : base.design.row(r))
            entries.push_back({row, *cols.find(base.design.col_ids().name(e.col)), e.value});
        entries.push_back({row, last_col, base.targets[static_cast<std::size_t>(r)]});
    }
    for (const auto& target : targets) {
        const int row = rows.add(target.student_id);
        for (const auto& [prior_course, grade] : target.prior)
            entries.push_back({row, *cols.find(prior_course), grade});
        // the (row, last_col) cell stays missing: it is what gets predicted
    }

    return SparseGradeMatrix(std::move(rows), std::move(cols), std::move(entries),
                             /*check_grade_range=*/true);
}

SparseGradeMatrix build_mf_matrix(
    const std::vector<std::pair<const CourseDataset*, const std::vector<TargetInstance>*>>& per_course,
    HeldOutCells on_held_out) {
    std::set<std::pair<std::string, std::string>> held_out;
    for (const auto& [ds, targets] : per_course)
        for (const auto& target : *targets) held_out.emplace(target.student_id, target.course_id);

    // (student, course) -> grade over every training design, training
    // target and target-student prior; sources overlap but always agree,
    // coming from the same underlying records
    std::map<std::pair<std::string, std::string>, double> cells;
    auto put = [&](const std::string& student, const std::string& course, double grade) {
        auto [it, inserted] = cells.emplace(std::make_pair(student, course), grade);
        if (!inserted && it->second != grade)
            throw DataError("conflicting grades for (" + student + ", " + course + ")");
    };

    for (const auto& [ds, targets] : per_course) {
        const auto& design = ds->design;
        for (const auto& e : design.entries())
            put(design.row_ids().name(e.row), design.col_ids().name(e.col), e.value);
        for (int r = 0; r < design.rows(); ++r)
            put(design.row_ids().name(r), ds->target_course, ds->targets[static_cast<std::size_t>(r)]);
        for (const auto& target : *targets)
            for (const auto& [course, grade] : target.prior) put(target.student_id, course, grade);
    }

    IndexMap rows, cols;
    std::vector<SparseGradeMatrix::Entry> entries;
    for (const auto& [key, grade] : cells) {
        if (held_out.contains(key)) {
            if (on_held_out == HeldOutCells::fail)
                throw LeakageError("held-out pair (" + key.first + ", " + key.second +
                                   ") reached the training matrix");
            continue;
        }
        entries.push_back({rows.add(key.first), cols.add(key.second), grade});
    }
    return SparseGradeMatrix(std::move(rows), std::move(cols), std::move(entries),
                             /*check_grade_range=*/true);
}

bool min_students_gate(const CourseDataset& ds, int floor) {
    return ds.design.rows() >= floor;
}

} // namespace gradepred
