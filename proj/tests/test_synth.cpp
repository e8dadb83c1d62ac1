#include <doctest.h>

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "gradepred/ingest.hpp"
#include "gradepred/synth.hpp"

using namespace gradepred;

TEST_CASE("generator is byte-deterministic under its seed") {
    SynthConfig config;
    config.n_students = 60;
    config.seed = 77;
    const auto a = generate(config);
    const auto b = generate(config);
    CHECK(a.records == b.records);

    std::ostringstream csv_a, csv_b;
    write_records(csv_a, a.records);
    write_records(csv_b, b.records);
    CHECK(csv_a.str() == csv_b.str());

    config.seed = 78;
    const auto c = generate(config);
    CHECK(a.records != c.records);
}

TEST_CASE("every generated record satisfies the grade invariants") {
    for (SynthKind kind : {SynthKind::planted_linear, SynthKind::planted_lowrank,
                           SynthKind::planted_bias, SynthKind::two_cluster}) {
        SynthConfig config;
        config.kind = kind;
        config.n_students = 80;
        config.seed = 5;
        const auto result = generate(config);
        CHECK(!result.records.empty());
        for (const auto& r : result.records) CHECK_NOTHROW(make_record(r.student_id, r.course_id, r.term, r.grade));
    }
}

TEST_CASE("noise-free planted-linear grades regenerate from the truth") {
    SynthConfig config;
    config.kind = SynthKind::planted_linear;
    config.noise_sigma = 0.0;
    config.n_students = 100;
    config.seed = 13;
    const auto result = generate(config);
    CHECK(result.truth.clip_rate == 0.0);

    std::map<std::string, std::map<std::string, double>> grades;
    for (const auto& r : result.records) grades[r.student_id][r.course_id] = r.grade;

    std::size_t checked = 0;
    for (const auto& r : result.records) {
        const auto& model = result.truth.linear_a.at(r.course_id);
        if (model.weights.empty()) continue; // exogenous base courses
        double expected = model.w0;
        for (const auto& [prereq, weight] : model.weights) {
            const auto& mine = grades.at(r.student_id);
            auto it = mine.find(prereq);
            if (it != mine.end()) expected += weight * it->second;
        }
        CHECK(r.grade == doctest::Approx(expected).epsilon(1e-12));
        ++checked;
    }
    CHECK(checked > result.records.size() / 4);
}

TEST_CASE("prerequisites always precede their dependants") {
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        SynthConfig config;
        config.kind = SynthKind::two_cluster;
        config.n_students = 80;
        config.seed = seed;
        const auto result = generate(config);

        std::map<std::string, std::map<std::string, int>> term_of;
        for (const auto& r : result.records) term_of[r.student_id][r.course_id] = r.term;
        for (const auto& r : result.records) {
            auto prereqs = result.truth.prereqs.find(r.course_id);
            if (prereqs == result.truth.prereqs.end()) continue;
            for (const auto& p : prereqs->second) {
                auto it = term_of[r.student_id].find(p);
                if (it != term_of[r.student_id].end()) CHECK(it->second < r.term);
            }
        }
    }
}

TEST_CASE("observation pattern is non-uniform under every default kind") {
    for (SynthKind kind : {SynthKind::planted_linear, SynthKind::planted_lowrank,
                           SynthKind::two_cluster}) {
        SynthConfig config;
        config.kind = kind;
        config.n_students = 300;
        config.seed = 9;
        const auto result = generate(config);

        std::map<std::string, std::size_t> counts;
        for (const auto& r : result.records) ++counts[r.course_id];
        double mean = 0.0;
        for (const auto& [course, count] : counts) mean += static_cast<double>(count);
        mean /= static_cast<double>(counts.size());
        double var = 0.0;
        for (const auto& [course, count] : counts) {
            const double d = static_cast<double>(count) - mean;
            var += d * d;
        }
        var /= static_cast<double>(counts.size());
        const double cv = std::sqrt(var) / mean;
        CHECK(cv > 0.3);
    }
}

TEST_CASE("noise-free rank-2 data has numerical rank 2 after bias removal") {
    SynthConfig config;
    config.kind = SynthKind::planted_lowrank;
    config.rank = 2;
    config.n_students = 20;
    config.n_courses = 10;
    config.n_terms = 2;
    config.n_levels = 2;
    config.courses_per_term_min = 5;
    config.courses_per_term_max = 5;
    config.core_fraction = 1.0;
    config.noise_sigma = 0.0;
    config.seed = 21;
    const auto result = generate(config);
    REQUIRE(result.records.size() == 200); // complete matrix
    REQUIRE(result.truth.clip_rate == 0.0);

    Eigen::MatrixXd residual(20, 10);
    std::map<std::string, int> srow, ccol;
    for (const auto& r : result.records) {
        if (!srow.contains(r.student_id)) {
            const int next = static_cast<int>(srow.size());
            srow[r.student_id] = next;
        }
        if (!ccol.contains(r.course_id)) {
            const int next = static_cast<int>(ccol.size());
            ccol[r.course_id] = next;
        }
        residual(srow[r.student_id], ccol[r.course_id]) =
            r.grade - result.truth.mu - result.truth.student_bias.at(r.student_id) -
            result.truth.course_bias.at(r.course_id);
    }
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(residual);
    const auto& sv = svd.singularValues();
    REQUIRE(sv.size() >= 3);
    CHECK(sv(2) < 1e-8 * sv(0));
    CHECK(sv(1) > 1e-6 * sv(0)); // genuinely rank 2, not rank 1
}

TEST_CASE("two-cluster electives mostly separate the populations") {
    SynthConfig config;
    config.kind = SynthKind::two_cluster;
    config.n_students = 400;
    config.seed = 33;
    const auto result = generate(config);

    // per course, the cluster balance among its takers
    std::map<std::string, std::pair<std::size_t, std::size_t>> takers; // (A, B)
    for (const auto& r : result.records) {
        auto& slot = takers[r.course_id];
        if (result.truth.student_cluster.at(r.student_id) == 'A') ++slot.first;
        else ++slot.second;
    }
    std::size_t skewed = 0, balanced = 0;
    for (const auto& [course, counts] : takers) {
        const auto total = counts.first + counts.second;
        if (total < 10) continue;
        const double share =
            static_cast<double>(std::max(counts.first, counts.second)) / static_cast<double>(total);
        if (share > 0.75) ++skewed;   // cluster-owned electives
        if (share < 0.65) ++balanced; // core courses stay mixed
    }
    CHECK(skewed > 0);
    CHECK(balanced > 0);
}

TEST_CASE("infeasible courses-per-term configuration is rejected") {
    SynthConfig config;
    config.n_courses = 8;
    config.n_levels = 4;           // two courses per level
    config.courses_per_term_min = 3;
    CHECK_THROWS_WITH_AS(generate(config), doctest::Contains("infeasible"), DataError);
}

TEST_CASE("invalid config names the offending field") {
    SynthConfig config;
    config.noise_sigma = -1.0;
    CHECK_THROWS_WITH_AS(generate(config), doctest::Contains("noise_sigma"), DataError);
    config = SynthConfig{};
    config.n_students = 0;
    CHECK_THROWS_WITH_AS(generate(config), doctest::Contains("n_students"), DataError);
}

TEST_CASE("clip rate is reported") {
    SynthConfig config;
    config.kind = SynthKind::planted_lowrank;
    config.noise_sigma = 2.0; // violent noise to force clipping
    config.n_students = 100;
    config.seed = 3;
    const auto result = generate(config);
    CHECK(result.truth.clip_rate > 0.0);
    for (const auto& r : result.records) {
        CHECK(r.grade >= 0.0);
        CHECK(r.grade <= 4.0);
    }
}
