#include <doctest.h>

#include <cmath>
#include <numeric>

#include "gradepred/predictors.hpp"
#include "gradepred/rng.hpp"
#include "gradepred/synth.hpp"
#include "test_util.hpp"

using namespace gradepred;
using gradepred::test::dataset_of;
using gradepred::test::matrix_of;
using gradepred::test::rec;
using gradepred::test::target_of;

TEST_CASE("method names round-trip and unknown names are rejected") {
    for (Method m : all_methods()) CHECK(parse_method(method_name(m)) == m);
    CHECK_FALSE(parse_method("pagerank").has_value());
    CHECK_FALSE(parse_method("").has_value());
}

namespace {

/// Planted fixture: target = 2 + 0.5 * grade(a); course b is noise.
CourseDataset planted_fixture() {
    Rng rng(3);
    std::vector<std::pair<std::vector<std::pair<std::string, double>>, double>> rows;
    for (int i = 0; i < 30; ++i) {
        const double ga = rng.uniform(0.0, 4.0);
        const double gb = rng.uniform(0.0, 4.0);
        rows.push_back({{{"a", ga}, {"b", gb}}, 2.0 + 0.5 * ga});
    }
    return dataset_of("T", rows);
}

} // namespace

TEST_CASE("csr_train recovers a planted noiseless model") {
    const auto base = planted_fixture();
    const auto model = csr_train_on(base, 0.0, 0.0, false, 20);
    REQUIRE(model.has_value());
    CHECK(model->bias == doctest::Approx(2.0).epsilon(1e-4));
    CHECK(model->weight("a") == doctest::Approx(0.5).epsilon(1e-4));
    CHECK(model->weight("b") == doctest::Approx(0.0).epsilon(1e-4));
    CHECK(model->nonneg);
}

TEST_CASE("csr_train zeroes a negatively planted weight under nonnegativity") {
    Rng rng(5);
    std::vector<std::pair<std::vector<std::pair<std::string, double>>, double>> rows;
    for (int i = 0; i < 30; ++i) {
        const double ga = rng.uniform(0.0, 4.0);
        const double gb = rng.uniform(0.0, 4.0);
        rows.push_back({{{"a", ga}, {"b", gb}}, std::max(0.0, 2.5 + 0.3 * ga - 0.5 * gb)});
    }
    const auto model = csr_train_on(dataset_of("T", rows), 0.0, 0.0, false, 20);
    REQUIRE(model.has_value());
    CHECK(model->weight("b") == 0.0);
}

TEST_CASE("csr gate failure yields a skip") {
    const auto tiny = dataset_of("T", {{{{"a", 3.0}}, 2.0}});
    CHECK_FALSE(csr_train_on(tiny, 0, 0, false, 20).has_value());
    CHECK(csr_train_on(tiny, 0, 0, false, 1).has_value());
}

TEST_CASE("csr-rc on target-equals-GPA data shrinks to the GPA baseline") {
    Rng rng(7);
    std::vector<std::pair<std::vector<std::pair<std::string, double>>, double>> rows;
    for (int i = 0; i < 40; ++i) {
        std::vector<std::pair<std::string, double>> row;
        double sum = 0.0;
        int count = 0;
        for (int c = 0; c < 6; ++c) {
            if (!rng.bernoulli(0.7)) continue;
            const double g = rng.uniform(0.0, 4.0);
            row.emplace_back("c" + std::to_string(c), g);
            sum += g;
            ++count;
        }
        if (row.empty()) {
            row.emplace_back("c0", 2.0);
            sum = 2.0;
            count = 1;
        }
        rows.push_back({row, sum / count}); // target is exactly the GPA
    }
    const auto base = dataset_of("T", rows);
    const auto model = csr_train_on(base, 0.0, 1.0, true, 20);
    REQUIRE(model.has_value());
    for (const auto& [course, weight] : model->weights) CHECK(std::abs(weight) < 1e-3);

    const auto target = target_of("x", "T", 9, {{"c0", 3.2}, {"c1", 3.2}});
    const auto prediction = csr_predict(*model, target, true);
    CHECK(prediction.value == doctest::Approx(3.2).epsilon(1e-3));
}

TEST_CASE("csr_predict evaluates the linear form") {
    LinearModel model;
    model.bias = 1.0;
    model.weights["a"] = 0.5;

    SUBCASE("uncentered dot product") {
        const auto p = csr_predict(model, target_of("x", "T", 9, {{"a", 4.0}}), false);
        CHECK(p.value == 3.0);
        CHECK(p.method == Method::csr);
    }
    SUBCASE("prior courses absent from the model contribute nothing") {
        const auto p = csr_predict(model, target_of("x", "T", 9, {{"z", 4.0}}), false);
        CHECK(p.value == 1.0); // bias only
    }
    SUBCASE("all-zero weights with centering fall back to the GPA") {
        LinearModel zero;
        const auto p = csr_predict(zero, target_of("x", "T", 9, {{"u", 3.2}, {"v", 3.2}}), true);
        CHECK(p.value == doctest::Approx(3.2));
        CHECK(p.method == Method::csr_rc);
    }
    SUBCASE("centered prediction needs a prior") {
        CHECK_THROWS_AS(csr_predict(model, target_of("x", "T", 9, {}), true), DataError);
    }
}

TEST_CASE("csr-rc prediction is shift-equivariant at fixed weights") {
    LinearModel model;
    model.bias = 0.3;
    model.weights["a"] = 0.4;
    model.weights["b"] = -0.2;
    const auto base_target = target_of("x", "T", 9, {{"a", 3.0}, {"b", 1.0}, {"c", 2.0}});
    const double base_value = csr_predict(model, base_target, true).value;
    for (double delta : {0.5, -1.0, 2.0}) {
        auto shifted = base_target;
        for (auto& [course, grade] : shifted.prior) grade += delta; // may leave [0,4]; fine here
        const double shifted_value = csr_predict(model, shifted, true).value;
        CHECK(shifted_value - base_value == doctest::Approx(delta).epsilon(1e-9));
    }
}

TEST_CASE("ssr with t=0 and covering priors equals csr") {
    const auto base = planted_fixture();
    // target took exactly the base columns
    const auto target = target_of("x", "T", 9, {{"a", 3.0}, {"b", 2.0}});
    SsrOptions options;
    options.overlap_threshold = 0.0;
    options.lambda1 = 0.5;
    options.lambda2 = 0.5;
    const auto ssr = ssr_train_predict(target, base, options);
    REQUIRE(ssr.has_value());

    const auto csr_model = csr_train_on(base, 0.5, 0.5, false, 20);
    const auto csr = csr_predict(*csr_model, target, false);
    CHECK(ssr->value == doctest::Approx(csr.value).epsilon(1e-12));
    CHECK(ssr->method == Method::ssr);
}

TEST_CASE("ssr skips when no peer covers the target at t=1") {
    const auto base = planted_fixture(); // peers took {a, b}
    const auto target = target_of("x", "T", 9, {{"a", 3.0}, {"q", 2.0}}); // q unseen
    SsrOptions options;
    options.overlap_threshold = 1.0;
    options.min_students = 1;
    CHECK_FALSE(ssr_train_predict(target, base, options).has_value());
}

TEST_CASE("ssr beats csr when clusters follow different models") {
    // both clusters grade off the shared core course z but with opposite
    // strength, so one global model must compromise; cluster membership
    // shows in the elective sets (A takes {a, z}, B takes {b, z})
    Rng rng(11);
    std::vector<std::pair<std::vector<std::pair<std::string, double>>, double>> rows;
    for (int i = 0; i < 25; ++i) {
        const double gz = rng.uniform(0.0, 4.0);
        rows.push_back({{{"a", rng.uniform(0.0, 4.0)}, {"z", gz}}, 0.3 + 0.9 * gz});
    }
    for (int i = 0; i < 25; ++i) {
        const double gz = rng.uniform(0.0, 4.0);
        rows.push_back({{{"b", rng.uniform(0.0, 4.0)}, {"z", gz}}, 2.8 + 0.05 * gz});
    }
    const auto base = dataset_of("T", rows);

    // an A-cluster target student; the true grade follows A's model
    const auto target = target_of("x", "T", 9, {{"a", 2.0}, {"z", 3.0}});
    const double truth = 0.3 + 0.9 * 3.0;

    SsrOptions options;
    options.overlap_threshold = 0.9; // B peers share only z: OR 0.5, dropped
    options.min_students = 10;
    const auto ssr = ssr_train_predict(target, base, options);
    REQUIRE(ssr.has_value());

    const auto csr_model = csr_train_on(base, 0.0, 0.0, false, 10);
    const auto csr = csr_predict(*csr_model, target, false);

    CHECK(std::abs(ssr->value - truth) < std::abs(csr.value - truth));
    CHECK(std::abs(ssr->value - truth) < 0.05);
}

TEST_CASE("bias_only on a constant matrix predicts the constant everywhere") {
    std::vector<std::tuple<std::string, std::string, double>> cells;
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 5; ++j)
            cells.emplace_back("s" + std::to_string(i), "c" + std::to_string(j), 3.0);
    const auto model = bias_only_train(matrix_of(cells), 0.0);
    CHECK(model.predict_ids("s1", "c2") == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(model.predict_ids("s5", "c0") == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(model.latent_dim == 0);
}

TEST_CASE("bias_only attributes a consistently high student to their bias") {
    // 30 students x 20 courses of 3.0; s0 is one full point above
    std::vector<std::tuple<std::string, std::string, double>> cells;
    for (int i = 0; i < 30; ++i)
        for (int j = 0; j < 20; ++j)
            cells.emplace_back("s" + std::to_string(i), "c" + std::to_string(j),
                               i == 0 ? 4.0 : 3.0);
    SgdOptions sgd;
    sgd.epochs = 2000;
    const auto model = bias_only_train(matrix_of(cells), 0.01, sgd);
    const int s0 = *model.students.find("s0");
    CHECK(model.student_bias[static_cast<std::size_t>(s0)] + model.mu - 3.0 ==
          doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("bias magnitudes shrink monotonically as lambda grows") {
    Rng rng(13);
    std::vector<std::tuple<std::string, std::string, double>> cells;
    for (int i = 0; i < 12; ++i)
        for (int j = 0; j < 8; ++j)
            if (rng.bernoulli(0.7))
                cells.emplace_back("s" + std::to_string(i), "c" + std::to_string(j),
                                   rng.uniform(1.0, 4.0));
    const auto matrix = matrix_of(cells);
    double previous = std::numeric_limits<double>::infinity();
    for (double lambda : {0.0, 1.0, 2.0, 4.0}) {
        SgdOptions sgd;
        sgd.epochs = 500;
        sgd.seed = 1;
        const auto model = bias_only_train(matrix, lambda, sgd);
        double norm = 0.0;
        for (double b : model.student_bias) norm += b * b;
        norm = std::sqrt(norm);
        CHECK(norm <= previous + 1e-6);
        previous = norm;
    }
}

TEST_CASE("sbcf single identical peer transfers the peer's offset") {
    // peer's grades equal the target's on the common courses
    const auto peers = dataset_of("T", {{{{"a", 3.0}, {"b", 2.0}, {"c", 4.0}}, 3.5}});
    const auto target = target_of("x", "T", 9, {{"a", 3.0}, {"b", 2.0}, {"c", 4.0}});
    // peer mean = 3.0, so the offset is +0.5; sim = 1, r = 1 keeps it whole
    const auto p = sbcf_predict(target, peers, 1);
    CHECK(p.value == doctest::Approx(3.0 + 0.5).epsilon(1e-12));
    CHECK_FALSE(p.fallback);
}

TEST_CASE("sbcf single-peer prediction ignores the similarity magnitude") {
    // with one kept peer the similarity cancels between numerator and
    // denominator: prediction = target mean + peer offset, whatever sim is
    const auto peers = dataset_of("T", {{{{"a", 3.0}, {"b", 1.0}, {"c", 2.2}}, 3.1}});
    // positively but not perfectly correlated with the peer
    const auto target = target_of("x", "T", 9, {{"a", 3.5}, {"b", 0.5}, {"c", 3.0}});
    const double target_mean = (3.5 + 0.5 + 3.0) / 3.0;
    const double peer_offset = 3.1 - (3.0 + 1.0 + 2.2) / 3.0;
    const auto p = sbcf_predict(target, peers, 1);
    CHECK(p.value == doctest::Approx(target_mean + peer_offset).epsilon(1e-12));
}

TEST_CASE("sbcf shrinks the neighborhood term by min(r, nbr)/r") {
    // two identical positive-similarity peers, both +0.5 above their mean
    const auto peers = dataset_of("T", {{{{"a", 3.0}, {"b", 2.0}}, 3.0},
                                        {{{"a", 3.5}, {"b", 1.5}}, 3.0}});
    const auto target = target_of("x", "T", 9, {{"a", 3.0}, {"b", 2.0}});
    const double target_mean = 2.5;
    // both peers: mean 2.5, offset +0.5, sim 1 => neighborhood term +0.5
    const auto r1 = sbcf_predict(target, peers, 1);
    CHECK(r1.value == doctest::Approx(target_mean + 0.5).epsilon(1e-9));
    const auto r10 = sbcf_predict(target, peers, 10);
    CHECK(r10.value == doctest::Approx(target_mean + (2.0 / 10.0) * 0.5).epsilon(1e-9));
}

TEST_CASE("sbcf matches an independent scalar evaluation on a 5-peer fixture") {
    const std::vector<std::vector<std::pair<std::string, double>>> peer_rows = {
        {{"a", 3.0}, {"b", 2.0}, {"c", 4.0}, {"d", 1.0}},
        {{"a", 2.0}, {"b", 3.0}, {"c", 2.5}},
        {{"a", 4.0}, {"b", 1.0}, {"d", 3.0}},
        {{"b", 2.0}, {"c", 3.0}, {"d", 2.0}},
        {{"a", 1.0}, {"c", 1.5}, {"d", 3.5}},
    };
    const std::vector<double> peer_grades = {3.5, 2.0, 4.0, 2.5, 1.0};
    std::vector<std::pair<std::vector<std::pair<std::string, double>>, double>> rows;
    for (std::size_t i = 0; i < peer_rows.size(); ++i) rows.push_back({peer_rows[i], peer_grades[i]});
    const auto peers = dataset_of("T", rows);

    const std::vector<std::pair<std::string, double>> target_prior = {
        {"a", 3.2}, {"b", 2.8}, {"c", 3.9}, {"d", 0.5}};
    const auto target = target_of("x", "T", 9, target_prior);

    for (int r : {1, 2, 10}) {
        // independent evaluation with raw loops
        double gbar_s = 0.0;
        for (const auto& [c, g] : target_prior) gbar_s += g;
        gbar_s /= static_cast<double>(target_prior.size());

        double num = 0.0, den = 0.0;
        int nbr = 0;
        for (std::size_t i = 0; i < peer_rows.size(); ++i) {
            std::vector<double> xs, ys;
            for (const auto& [c, g] : peer_rows[i])
                for (const auto& [tc, tg] : target_prior)
                    if (tc == c) {
                        xs.push_back(tg);
                        ys.push_back(g);
                    }
            if (xs.size() < 2) continue;
            double mx = 0, my = 0;
            for (double v : xs) mx += v;
            for (double v : ys) my += v;
            mx /= static_cast<double>(xs.size());
            my /= static_cast<double>(ys.size());
            double sxy = 0, sxx = 0, syy = 0;
            for (std::size_t t = 0; t < xs.size(); ++t) {
                sxy += (xs[t] - mx) * (ys[t] - my);
                sxx += (xs[t] - mx) * (xs[t] - mx);
                syy += (ys[t] - my) * (ys[t] - my);
            }
            if (sxx == 0 || syy == 0) continue;
            const double sim = sxy / std::sqrt(sxx * syy);
            if (sim <= 0) continue;
            double peer_mean = 0.0;
            for (const auto& [c, g] : peer_rows[i]) peer_mean += g;
            peer_mean /= static_cast<double>(peer_rows[i].size());
            num += (peer_grades[i] - peer_mean) * sim;
            den += sim;
            ++nbr;
        }
        const double expected =
            nbr == 0 ? gbar_s
                     : gbar_s + (static_cast<double>(std::min(r, nbr)) / r) * num / den;

        const auto p = sbcf_predict(target, peers, r);
        CHECK(p.value == doctest::Approx(expected).epsilon(1e-9));
    }
}

TEST_CASE("sbcf falls back to the prior mean on degenerate similarity") {
    const auto peers = dataset_of("T", {{{{"a", 3.0}, {"b", 2.0}}, 3.5}});
    // constant prior vector: correlation undefined against every peer
    const auto target = target_of("x", "T", 9, {{"a", 3.0}, {"b", 3.0}});
    const auto p = sbcf_predict(target, peers, 2);
    CHECK(p.value == 3.0);
    CHECK(p.fallback);
}

TEST_CASE("sbcf drops peers with fewer than two common courses") {
    const auto peers = dataset_of("T", {{{{"a", 4.0}}, 4.0}}); // one common course only
    const auto target = target_of("x", "T", 9, {{"a", 3.0}, {"b", 2.0}});
    const auto p = sbcf_predict(target, peers, 1);
    CHECK(p.fallback);
    CHECK(p.value == 2.5);
}

TEST_CASE("mf_train_predict on constant data predicts the constant") {
    std::vector<std::tuple<std::string, std::string, double>> cells;
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 5; ++j)
            cells.emplace_back("s" + std::to_string(i), "c" + std::to_string(j), 3.0);
    const auto matrix = matrix_of(cells);
    const std::vector<TargetInstance> held_out = {target_of("s0", "new", 9, {})};
    const auto predictions = mf_train_predict(matrix, held_out, 2, 0.0, true);
    REQUIRE(predictions.size() == 1);
    CHECK(predictions[0].value == doctest::Approx(3.0).epsilon(1e-3));
}

TEST_CASE("mf_train_predict raises on a leaked held-out pair") {
    const auto matrix = matrix_of({{"s1", "a", 3.0}, {"s1", "b", 2.0}});
    const std::vector<TargetInstance> held_out = {target_of("s1", "a", 9, {})};
    CHECK_THROWS_AS(mf_train_predict(matrix, held_out, 0, 0.0, true), LeakageError);
}

TEST_CASE("mf recovers planted low-rank held-out cells") {
    SynthConfig config;
    config.kind = SynthKind::planted_lowrank;
    config.rank = 2;
    config.n_students = 50;
    config.n_courses = 20;
    config.n_terms = 2;
    config.n_levels = 2;
    config.courses_per_term_min = 10;
    config.courses_per_term_max = 10;
    config.core_fraction = 1.0;
    config.noise_sigma = 0.1;
    config.seed = 17;
    const auto synth = generate(config);

    // hold out 10% of the cells
    Rng rng(99);
    IndexMap rows, cols;
    std::vector<SparseGradeMatrix::Entry> entries;
    std::vector<TargetInstance> held_out;
    std::vector<double> actuals;
    for (const auto& r : synth.records) {
        if (rng.bernoulli(0.1)) {
            held_out.push_back(target_of(r.student_id, r.course_id, r.term, {}));
            actuals.push_back(r.grade);
        } else {
            entries.push_back({rows.add(r.student_id), cols.add(r.course_id), r.grade});
        }
    }
    const SparseGradeMatrix matrix(rows, cols, entries, true);

    SgdOptions sgd;
    sgd.learning_rate = 0.02;
    sgd.epochs = 800;
    sgd.seed = 3;
    const auto predictions = mf_train_predict(matrix, held_out, 2, 0.02, true, sgd);
    double sum_sq = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double err = predictions[i].value - actuals[i];
        sum_sq += err * err;
    }
    CHECK(std::sqrt(sum_sq / static_cast<double>(predictions.size())) < 0.15);
}

TEST_CASE("mf-gb differs from mf only through the removed global bias") {
    const auto matrix = matrix_of({{"s1", "a", 3.0}, {"s1", "b", 2.0}, {"s2", "a", 4.0},
                                   {"s2", "b", 3.0}});
    const std::vector<TargetInstance> held_out = {target_of("s1", "c", 9, {})};
    const auto predictions = mf_train_predict(matrix, held_out, 1, 0.1, false);
    CHECK(predictions[0].method == Method::mf_gb);
}

namespace {

/// Complete low-rank base plus one target whose priors copy a base row.
struct CsmfFixture {
    CourseDataset base;
    std::vector<TargetInstance> targets;
    double expected;
};

CsmfFixture csmf_duplicate_fixture() {
    SynthConfig config;
    config.kind = SynthKind::planted_lowrank;
    config.rank = 2;
    config.n_students = 40;
    config.n_courses = 12;
    config.n_terms = 2;
    config.n_levels = 2;
    config.courses_per_term_min = 6;
    config.courses_per_term_max = 6;
    config.core_fraction = 1.0;
    config.noise_sigma = 0.0;
    config.seed = 29;
    const auto synth = generate(config);

    // last course becomes the target course; everything else is prior
    const std::string course = "C011";
    std::map<std::string, std::map<std::string, double>> by_student;
    for (const auto& r : synth.records) by_student[r.student_id][r.course_id] = r.grade;

    CsmfFixture fixture;
    std::vector<std::pair<std::vector<std::pair<std::string, double>>, double>> rows;
    IndexMap row_ids, col_ids;
    std::vector<SparseGradeMatrix::Entry> entries;
    CourseDataset base;
    base.target_course = course;
    for (const auto& [student, grades] : by_student) {
        const int row = row_ids.add(student);
        for (const auto& [c, g] : grades)
            if (c != course) entries.push_back({row, col_ids.add(c), g});
        base.targets.push_back(grades.at(course));
    }
    base.design = SparseGradeMatrix(row_ids, col_ids, entries, true);
    fixture.expected = base.targets[0];

    TargetInstance clone;
    clone.student_id = "clone";
    clone.course_id = course;
    clone.term = 9;
    for (const auto& e : base.design.row(0))
        clone.prior.emplace(base.design.col_ids().name(e.col), e.value);
    fixture.targets.push_back(std::move(clone));
    fixture.base = std::move(base);
    return fixture;
}

} // namespace

TEST_CASE("csmf predicts a duplicated student like the original") {
    const auto fixture = csmf_duplicate_fixture();
    SgdOptions sgd;
    sgd.learning_rate = 0.02;
    sgd.epochs = 1500;
    sgd.rel_tol = 0.0;
    sgd.seed = 11;
    const auto predictions =
        csmf_train_predict(fixture.base.target_course, fixture.base, fixture.targets, 2, 0.0, sgd);
    REQUIRE(predictions.has_value());
    REQUIRE(predictions->size() == 1);
    CHECK((*predictions)[0].value == doctest::Approx(fixture.expected).epsilon(0.05));
}

TEST_CASE("csmf with l=0 equals bias-only on the csmf matrix") {
    const auto fixture = csmf_duplicate_fixture();
    SgdOptions sgd;
    sgd.epochs = 300;
    sgd.seed = 4;
    const auto predictions =
        csmf_train_predict(fixture.base.target_course, fixture.base, fixture.targets, 0, 0.1, sgd);
    REQUIRE(predictions.has_value());

    const auto x = build_csmf_matrix(fixture.base.target_course, fixture.base, fixture.targets);
    const auto bias_model = bias_only_train(x, 0.1, sgd);
    const double expected = bias_model.predict_ids("clone", fixture.base.target_course);
    CHECK((*predictions)[0].value == expected); // identical code path, bitwise
}

TEST_CASE("csmf skips when the base fails the gate") {
    const auto tiny = dataset_of("T", {{{{"a", 3.0}}, 2.0}});
    const std::vector<TargetInstance> targets = {target_of("x", "T", 9, {{"a", 2.0}})};
    CHECK_FALSE(csmf_train_predict("T", tiny, targets, 2, 0.1).has_value());
}

TEST_CASE("select_latent_dim breaks ties toward the smaller dimension") {
    CHECK(select_latent_dim({{5, 0.3}, {2, 0.3}}) == 2);
    CHECK(select_latent_dim({{2, 0.4}, {5, 0.3}}) == 5);
    CHECK(select_latent_dim({{8, 0.2}, {5, 0.25}, {2, 0.31}}) == 8);
    CHECK_THROWS_AS(select_latent_dim({}), DataError);
}

TEST_CASE("csmf_star degenerate grid returns its only member") {
    const auto fixture = csmf_duplicate_fixture();
    const std::vector<int> grid = {2};
    SgdOptions sgd;
    sgd.epochs = 100;
    const auto result = csmf_star_select(fixture.base.target_course, fixture.base, fixture.targets,
                                         grid, 0.1, 7, sgd);
    REQUIRE(result.has_value());
    CHECK(result->best_latent_dim == 2);
    CHECK_FALSE(result->validation_fallback);
    CHECK(result->predictions.size() == 1);
    CHECK(result->predictions[0].method == Method::csmf_star);
}

TEST_CASE("csmf_star falls back to the smallest l when validation is infeasible") {
    // 12 rows: a 10% split has one row, below the 2-row floor
    std::vector<std::pair<std::vector<std::pair<std::string, double>>, double>> rows;
    Rng rng(19);
    for (int i = 0; i < 12; ++i)
        rows.push_back({{{"a", rng.uniform(0, 4)}, {"b", rng.uniform(0, 4)}}, rng.uniform(0, 4)});
    const auto base = dataset_of("T", rows);
    const std::vector<TargetInstance> targets = {target_of("x", "T", 9, {{"a", 2.0}})};
    const std::vector<int> grid = {8, 2, 5};
    SgdOptions sgd;
    sgd.epochs = 50;
    const auto result = csmf_star_select("T", base, targets, grid, 0.1, 7, sgd, 10);
    REQUIRE(result.has_value());
    CHECK(result->validation_fallback);
    CHECK(result->best_latent_dim == 2);
}

TEST_CASE("csmf_star prefers the planted rank on most seeds") {
    SynthConfig config;
    config.kind = SynthKind::planted_lowrank;
    config.rank = 2;
    config.n_students = 200;
    config.n_courses = 12;
    config.n_terms = 2;
    config.n_levels = 2;
    config.courses_per_term_min = 6;
    config.courses_per_term_max = 6;
    config.core_fraction = 1.0;
    config.noise_sigma = 0.4; // enough noise for extra factors to overfit
    config.seed = 31;
    const auto synth = generate(config);

    const std::string course = "C011";
    std::map<std::string, std::map<std::string, double>> by_student;
    for (const auto& r : synth.records) by_student[r.student_id][r.course_id] = r.grade;
    CourseDataset base;
    base.target_course = course;
    IndexMap row_ids, col_ids;
    std::vector<SparseGradeMatrix::Entry> entries;
    for (const auto& [student, grades] : by_student) {
        const int row = row_ids.add(student);
        for (const auto& [c, g] : grades)
            if (c != course) entries.push_back({row, col_ids.add(c), g});
        base.targets.push_back(grades.at(course));
    }
    base.design = SparseGradeMatrix(row_ids, col_ids, entries, true);
    const std::vector<TargetInstance> targets = {target_of("probe", course, 9, {})};

    const std::vector<int> grid = {2, 5, 8};
    SgdOptions sgd;
    sgd.learning_rate = 0.03;
    sgd.epochs = 2000;
    sgd.rel_tol = 0.0;
    int rank2_wins = 0;
    const int trials = 20;
    for (int trial = 0; trial < trials; ++trial) {
        const auto result = csmf_star_select(course, base, targets, grid, 0.0,
                                             static_cast<std::uint64_t>(trial), sgd);
        REQUIRE(result.has_value());
        if (result->best_latent_dim == 2) ++rank2_wins;
    }
    CHECK(rank2_wins >= trials * 8 / 10);
}

TEST_CASE("clamp_prediction pulls values into the grade range") {
    Prediction p;
    p.value = 4.5;
    const auto clamped = clamp_prediction(p);
    CHECK(clamped.value == 4.0);
    CHECK(clamped.clamped);
    p.value = -0.2;
    CHECK(clamp_prediction(p).value == 0.0);
    p.value = 3.0;
    CHECK_FALSE(clamp_prediction(p).clamped);
}
