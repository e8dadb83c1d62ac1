#include "gradepred/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "gradepred/rng.hpp"

namespace gradepred {

std::string_view synth_kind_name(SynthKind kind) {
    switch (kind) {
        case SynthKind::planted_linear: return "planted-linear";
        case SynthKind::planted_lowrank: return "planted-lowrank";
        case SynthKind::planted_bias: return "planted-bias";
        case SynthKind::two_cluster: return "two-cluster";
    }
    throw Error("unknown synth kind");
}

std::optional<SynthKind> parse_synth_kind(std::string_view name) {
    if (name == "planted-linear") return SynthKind::planted_linear;
    if (name == "planted-lowrank") return SynthKind::planted_lowrank;
    if (name == "planted-bias") return SynthKind::planted_bias;
    if (name == "two-cluster") return SynthKind::two_cluster;
    return std::nullopt;
}

namespace {

struct Course {
    std::string id;
    int level = 0;
    bool core = false;
    char pool = 'A';        // elective pool for two-cluster enrollment
    double popularity = 1.0; // take probability for single-population kinds
    std::vector<int> prereqs;
};

std::string course_id(int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "C%03d", index);
    return buf;
}

std::string student_id(int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "s%04d", index);
    return buf;
}

void validate(const SynthConfig& config) {
    auto fail = [](const std::string& field, const std::string& why) {
        throw DataError("invalid synth config field '" + field + "': " + why);
    };
    if (config.n_students < 1) fail("n_students", "must be >= 1");
    if (config.n_courses < 1) fail("n_courses", "must be >= 1");
    if (config.n_terms < 2) fail("n_terms", "must be >= 2");
    if (config.noise_sigma < 0) fail("noise_sigma", "must be >= 0");
    if (config.courses_per_term_min < 1) fail("courses_per_term_min", "must be >= 1");
    if (config.courses_per_term_max < config.courses_per_term_min)
        fail("courses_per_term_max", "must be >= courses_per_term_min");
    if (config.prereq_density < 0 || config.prereq_density > 1)
        fail("prereq_density", "must be in [0,1]");
    if (config.rank < 0) fail("rank", "must be >= 0");
    if (config.core_fraction < 0 || config.core_fraction > 1)
        fail("core_fraction", "must be in [0,1]");
    if (config.elective_prob_own < 0 || config.elective_prob_own > 1)
        fail("elective_prob_own", "must be in [0,1]");
    if (config.elective_prob_other < 0 || config.elective_prob_other > 1)
        fail("elective_prob_other", "must be in [0,1]");
    if (config.levels() < 2 || config.levels() > config.n_terms)
        fail("n_levels", "must be in [2, n_terms]");
    if (config.n_courses < config.levels()) fail("n_courses", "need at least one course per level");
}

/// Courses in contiguous level blocks, core first within each level.
std::vector<Course> build_curriculum(const SynthConfig& config, Rng& rng, SynthTruth& truth) {
    const int n_levels = config.levels();
    std::vector<Course> courses(static_cast<std::size_t>(config.n_courses));
    std::vector<std::vector<int>> by_level(static_cast<std::size_t>(n_levels));
    for (int j = 0; j < config.n_courses; ++j) {
        courses[static_cast<std::size_t>(j)].id = course_id(j);
        const int level = static_cast<int>(
            (static_cast<long long>(j) * n_levels) / config.n_courses);
        courses[static_cast<std::size_t>(j)].level = level;
        by_level[static_cast<std::size_t>(level)].push_back(j);
    }

    // core courses exist only at the entry level: a deeper course taken by
    // every student in a dataset would make its noise-free column an exact
    // affine combination of its prerequisites' columns, and the planted
    // weights would stop being identifiable
    static constexpr double kPopularityTiers[3] = {0.75, 0.35, 0.12};
    for (int level = 0; level < n_levels; ++level) {
        const auto& members = by_level[static_cast<std::size_t>(level)];
        if (static_cast<int>(members.size()) < config.courses_per_term_min)
            throw DataError("infeasible prerequisite DAG: level " + std::to_string(level) + " has " +
                            std::to_string(members.size()) + " courses but courses_per_term_min is " +
                            std::to_string(config.courses_per_term_min));
        const int n_core =
            level == 0 ? static_cast<int>(
                             std::ceil(config.core_fraction * static_cast<double>(members.size())))
                       : 0;
        int elective_index = 0;
        for (std::size_t i = 0; i < members.size(); ++i) {
            Course& course = courses[static_cast<std::size_t>(members[i])];
            course.core = static_cast<int>(i) < n_core;
            if (!course.core) {
                course.pool = elective_index % 2 == 0 ? 'A' : 'B';
                course.popularity = kPopularityTiers[elective_index % 3];
                ++elective_index;
            }
        }
    }

    // prerequisites sampled from all lower-level courses
    for (int j = 0; j < config.n_courses; ++j) {
        Course& course = courses[static_cast<std::size_t>(j)];
        if (course.level == 0) continue;
        std::vector<int> candidates;
        for (int level = 0; level < course.level; ++level)
            for (int c : by_level[static_cast<std::size_t>(level)]) candidates.push_back(c);
        for (int c : candidates) {
            if (static_cast<int>(course.prereqs.size()) >= 6) break;
            if (rng.bernoulli(config.prereq_density)) course.prereqs.push_back(c);
        }
        if (course.prereqs.empty())
            course.prereqs.push_back(candidates[static_cast<std::size_t>(rng.below(candidates.size()))]);
    }

    for (const Course& course : courses) {
        truth.course_level.emplace(course.id, course.level);
        auto& list = truth.prereqs[course.id];
        for (int p : course.prereqs) list.push_back(courses[static_cast<std::size_t>(p)].id);
    }
    return courses;
}

/// w0 and nonneg prerequisite weights scaled so that w0 + 4 * sum(w) stays
/// below the grade ceiling: noise-free grades never clip.
PlantedLinear sample_linear_model(const Course& course, const std::vector<Course>& courses,
                                  Rng& rng) {
    PlantedLinear model;
    model.w0 = rng.uniform(1.2, 2.2);
    if (course.prereqs.empty()) return model;
    double total = 0.0;
    std::vector<double> weights;
    weights.reserve(course.prereqs.size());
    for (std::size_t i = 0; i < course.prereqs.size(); ++i) {
        weights.push_back(rng.uniform(0.15, 0.4));
        total += weights.back();
    }
    const double budget = (3.9 - model.w0) / kMaxGrade;
    if (total > budget)
        for (double& w : weights) w *= budget / total;
    for (std::size_t i = 0; i < course.prereqs.size(); ++i)
        model.weights.emplace(courses[static_cast<std::size_t>(course.prereqs[i])].id, weights[i]);
    return model;
}

struct Taking {
    int course = 0;
    int term = 0;
};

/// Term-ordered enrollment: each student starts at a staggered term and
/// follows the curriculum level by level, taking every core course plus a
/// preference-biased sample of electives. Taken prerequisites therefore
/// always precede their dependants.
std::vector<Taking> enroll_student(const SynthConfig& config, const std::vector<Course>& courses,
                                   char cluster, Rng& rng) {
    const int n_levels = config.levels();
    const int t0 = rng.range(0, config.n_terms - 2);
    const int max_span = std::min(n_levels, config.n_terms - t0);
    const int span = rng.range(2, max_span);

    std::vector<Taking> takings;
    for (int level = 0; level < span; ++level) {
        const int term = t0 + level;
        std::vector<int> core, electives;
        for (std::size_t j = 0; j < courses.size(); ++j) {
            if (courses[j].level != level) continue;
            if (courses[j].core) core.push_back(static_cast<int>(j));
            else electives.push_back(static_cast<int>(j));
        }

        // one preference draw per elective keeps the random stream aligned
        // whatever the target count turns out to be; unpreferred courses
        // fill the remaining slots when preferences fall short
        std::vector<int> wanted, backup;
        for (int j : electives) {
            const Course& course = courses[static_cast<std::size_t>(j)];
            double p = course.popularity;
            if (config.kind == SynthKind::two_cluster)
                p = course.pool == cluster ? config.elective_prob_own : config.elective_prob_other;
            (rng.bernoulli(p) ? wanted : backup).push_back(j);
        }
        rng.shuffle(wanted);
        rng.shuffle(backup);
        wanted.insert(wanted.end(), backup.begin(), backup.end());

        const int available = static_cast<int>(core.size() + electives.size());
        int target = rng.range(config.courses_per_term_min, config.courses_per_term_max);
        target = std::clamp(target, static_cast<int>(core.size()), available);

        for (int j : core) takings.push_back({j, term});
        const int n_electives = std::min<int>(target - static_cast<int>(core.size()),
                                              static_cast<int>(wanted.size()));
        for (int i = 0; i < n_electives; ++i) takings.push_back({wanted[static_cast<std::size_t>(i)], term});
    }
    return takings;
}

} // namespace

SynthResult generate(const SynthConfig& config) {
    validate(config);

    SynthResult result;
    SynthTruth& truth = result.truth;
    truth.kind = config.kind;
    truth.seed = config.seed;
    truth.noise_sigma = config.noise_sigma;

    Rng rng_curriculum(derive_seed(config.seed, "curriculum"));
    Rng rng_truth(derive_seed(config.seed, "truth"));
    Rng rng_enroll(derive_seed(config.seed, "enroll"));
    Rng rng_grade(derive_seed(config.seed, "grades"));

    const std::vector<Course> courses = build_curriculum(config, rng_curriculum, truth);

    const bool linear_kind =
        config.kind == SynthKind::planted_linear || config.kind == SynthKind::two_cluster;
    if (linear_kind) {
        for (const Course& course : courses) {
            truth.linear_a.emplace(course.id, sample_linear_model(course, courses, rng_truth));
            if (config.kind == SynthKind::two_cluster)
                truth.linear_b.emplace(course.id, sample_linear_model(course, courses, rng_truth));
        }
    } else {
        truth.rank = config.kind == SynthKind::planted_bias ? 0 : config.rank;
        truth.mu = 2.5;
        const double factor_scale = truth.rank > 0 ? std::sqrt(0.5 / truth.rank) : 0.0;
        for (int i = 0; i < config.n_students; ++i) {
            const std::string id = student_id(i);
            truth.student_bias.emplace(id, rng_truth.uniform(-0.35, 0.35));
            auto& factors = truth.p[id];
            for (int f = 0; f < truth.rank; ++f)
                factors.push_back(rng_truth.uniform(-factor_scale, factor_scale));
        }
        for (const Course& course : courses) {
            truth.course_bias.emplace(course.id, rng_truth.uniform(-0.35, 0.35));
            auto& factors = truth.q[course.id];
            for (int f = 0; f < truth.rank; ++f)
                factors.push_back(rng_truth.uniform(-factor_scale, factor_scale));
        }
    }

    std::size_t clipped = 0;
    for (int i = 0; i < config.n_students; ++i) {
        const std::string sid = student_id(i);
        const char cluster = config.kind == SynthKind::two_cluster && i % 2 == 1 ? 'B' : 'A';
        truth.student_cluster.emplace(sid, cluster);

        const auto takings = enroll_student(config, courses, cluster, rng_enroll);
        std::map<std::string, double> grades_so_far;
        for (const Taking& taking : takings) {
            const Course& course = courses[static_cast<std::size_t>(taking.course)];
            double grade = 0.0;
            if (linear_kind) {
                const PlantedLinear& model =
                    cluster == 'B' ? truth.linear_b.at(course.id) : truth.linear_a.at(course.id);
                grade = model.w0;
                if (model.weights.empty()) {
                    // prerequisite-free courses carry exogenous per-student
                    // spread; without it the design columns of noise-free
                    // data collapse to constants and the planted weights
                    // stop being identifiable
                    grade += rng_grade.uniform(-1.0, 1.0);
                } else {
                    for (const auto& [prereq, weight] : model.weights) {
                        auto it = grades_so_far.find(prereq);
                        if (it != grades_so_far.end()) grade += weight * it->second;
                    }
                }
            } else {
                grade = truth.mu + truth.student_bias.at(sid) + truth.course_bias.at(course.id);
                const auto& pf = truth.p.at(sid);
                const auto& qf = truth.q.at(course.id);
                for (int f = 0; f < truth.rank; ++f) grade += pf[static_cast<std::size_t>(f)] * qf[static_cast<std::size_t>(f)];
            }
            if (config.noise_sigma > 0) grade += rng_grade.gaussian(0.0, config.noise_sigma);

            if (grade < kMinGrade) {
                grade = kMinGrade;
                ++clipped;
            } else if (grade > kMaxGrade) {
                grade = kMaxGrade;
                ++clipped;
            }
            grades_so_far[course.id] = grade;
            result.records.push_back(GradeRecord{sid, course.id, taking.term, grade});
        }
    }

    truth.clip_rate = result.records.empty()
                          ? 0.0
                          : static_cast<double>(clipped) / static_cast<double>(result.records.size());
    return result;
}

} // namespace gradepred
