#include "gradepred/predictors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "gradepred/rng.hpp"

namespace gradepred {

namespace {

constexpr std::array<std::pair<Method, std::string_view>, 9> kMethodNames = {{
    {Method::csr, "csr"},
    {Method::csr_rc, "csr-rc"},
    {Method::ssr, "ssr"},
    {Method::bias_only, "biasonly"},
    {Method::sbcf, "sbcf"},
    {Method::mf, "mf"},
    {Method::mf_gb, "mf-gb"},
    {Method::csmf, "csmf"},
    {Method::csmf_star, "csmf-star"},
}};

} // namespace

std::string_view method_name(Method method) {
    for (const auto& [m, name] : kMethodNames)
        if (m == method) return name;
    throw Error("unknown method tag");
}

std::optional<Method> parse_method(std::string_view name) {
    for (const auto& [m, n] : kMethodNames)
        if (n == name) return m;
    return std::nullopt;
}

std::span<const Method> all_methods() {
    static constexpr std::array<Method, 9> methods = {
        Method::csr,  Method::csr_rc, Method::ssr,  Method::bias_only, Method::sbcf,
        Method::mf,   Method::mf_gb,  Method::csmf, Method::csmf_star,
    };
    return methods;
}

Prediction clamp_prediction(Prediction prediction) {
    if (prediction.value < kMinGrade) {
        prediction.value = kMinGrade;
        prediction.clamped = true;
    } else if (prediction.value > kMaxGrade) {
        prediction.value = kMaxGrade;
        prediction.clamped = true;
    }
    return prediction;
}

std::optional<LinearModel> csr_train_on(const CourseDataset& base, double lambda1, double lambda2,
                                        bool centered, int min_students) {
    if (!min_students_gate(base, min_students)) return std::nullopt;
    const CourseDataset* data = &base;
    CourseDataset centered_copy;
    if (centered) {
        // a student without prior grades cannot be centered; the model is
        // not estimable, which is a skip rather than an error
        for (int r = 0; r < base.design.rows(); ++r)
            if (base.design.row(r).empty()) return std::nullopt;
        centered_copy = center_dataset(base);
        data = &centered_copy;
    }
    ElasticNetProblem problem;
    problem.design = &data->design;
    problem.targets = data->targets;
    problem.lambda1 = lambda1;
    problem.lambda2 = lambda2;
    problem.nonneg = !centered; // the centered variant drops the constraint
    problem.fit_bias = true;
    return solve_elastic_net(problem).model;
}

std::optional<LinearModel> csr_train(const std::string& course, const Cohort& cohort, int k,
                                     double lambda1, double lambda2, bool centered,
                                     int min_students) {
    return csr_train_on(build_course_dataset(course, cohort, k), lambda1, lambda2, centered,
                        min_students);
}

Prediction csr_predict(const LinearModel& model, const TargetInstance& target, bool centered) {
    Prediction prediction;
    prediction.student_id = target.student_id;
    prediction.course_id = target.course_id;
    prediction.method = centered ? Method::csr_rc : Method::csr;

    if (!centered) {
        double value = model.bias;
        for (const auto& [course, grade] : target.prior) value += model.weight(course) * grade;
        prediction.value = value;
        return prediction;
    }

    // center the student's priors by their own GPA, apply the model, add
    // the GPA back
    const double gpa = target.prior_gpa();
    double value = gpa + model.bias;
    for (const auto& [course, grade] : target.prior) value += model.weight(course) * (grade - gpa);
    prediction.value = value;
    return prediction;
}

std::optional<Prediction> ssr_train_predict(const TargetInstance& target, const CourseDataset& base,
                                            const SsrOptions& options) {
    const CourseDataset restricted = build_ssr_dataset(target, base, options.overlap_threshold);
    auto model = csr_train_on(restricted, options.lambda1, options.lambda2, options.centered,
                              options.min_students);
    if (!model) return std::nullopt;
    Prediction prediction = csr_predict(*model, target, options.centered);
    prediction.method = Method::ssr;
    return prediction;
}

std::optional<Prediction> ssr_train_predict(const TargetInstance& target, const Cohort& cohort,
                                            int k, const SsrOptions& options) {
    return ssr_train_predict(target, build_course_dataset(target.course_id, cohort, k), options);
}

MfModel bias_only_train(const SparseGradeMatrix& matrix, double lambda, const SgdOptions& sgd) {
    CompletionProblem problem;
    problem.matrix = &matrix;
    problem.latent_dim = 0;
    problem.lambda = lambda;
    problem.use_global_bias = true;
    problem.sgd = sgd;
    return solve_completion(problem).model;
}

Prediction sbcf_predict(const TargetInstance& target, const CourseDataset& peers, int r) {
    if (r < 1) throw DataError("sbcf significance limit r must be >= 1");
    if (peers.centering) throw DataError("sbcf_predict expects the uncentered course dataset");

    Prediction prediction;
    prediction.student_id = target.student_id;
    prediction.course_id = target.course_id;
    prediction.method = Method::sbcf;

    const double target_mean = target.prior_gpa();

    double weighted_offsets = 0.0;
    double similarity_sum = 0.0;
    int nbr = 0;
    for (int row = 0; row < peers.design.rows(); ++row) {
        // pair up the commonly observed courses
        std::vector<double> mine, theirs;
        for (const auto& e : peers.design.row(row)) {
            auto it = target.prior.find(peers.design.col_ids().name(e.col));
            if (it == target.prior.end()) continue;
            mine.push_back(it->second);
            theirs.push_back(e.value);
        }
        if (mine.size() < 2) continue; // correlation undefined

        const double n = static_cast<double>(mine.size());
        const double mean_mine = std::accumulate(mine.begin(), mine.end(), 0.0) / n;
        const double mean_theirs = std::accumulate(theirs.begin(), theirs.end(), 0.0) / n;
        double cov = 0.0, var_mine = 0.0, var_theirs = 0.0;
        for (std::size_t i = 0; i < mine.size(); ++i) {
            const double dm = mine[i] - mean_mine;
            const double dt = theirs[i] - mean_theirs;
            cov += dm * dt;
            var_mine += dm * dm;
            var_theirs += dt * dt;
        }
        if (var_mine == 0.0 || var_theirs == 0.0) continue; // undefined, peer dropped
        const double similarity = cov / std::sqrt(var_mine * var_theirs);
        if (similarity <= 0.0) continue;

        const double peer_mean = row_gpa(peers.design, row);
        weighted_offsets += (peers.targets[static_cast<std::size_t>(row)] - peer_mean) * similarity;
        similarity_sum += similarity;
        ++nbr;
    }

    if (nbr == 0) {
        prediction.value = target_mean;
        prediction.fallback = true;
        return prediction;
    }

    const double significance = static_cast<double>(std::min(r, nbr)) / static_cast<double>(r);
    prediction.value = target_mean + significance * weighted_offsets / similarity_sum;
    return prediction;
}

std::vector<Prediction> mf_train_predict(const SparseGradeMatrix& matrix,
                                         std::span<const TargetInstance> held_out, int latent_dim,
                                         double lambda, bool use_global_bias,
                                         const SgdOptions& sgd) {
    for (const auto& target : held_out) {
        auto row = matrix.row_ids().find(target.student_id);
        auto col = matrix.col_ids().find(target.course_id);
        if (row && col && matrix.at(*row, *col))
            throw LeakageError("held-out pair (" + target.student_id + ", " + target.course_id +
                               ") is observed in the training matrix");
    }

    CompletionProblem problem;
    problem.matrix = &matrix;
    problem.latent_dim = latent_dim;
    problem.lambda = lambda;
    problem.use_global_bias = use_global_bias;
    problem.sgd = sgd;
    const MfModel model = solve_completion(problem).model;

    std::vector<Prediction> predictions;
    predictions.reserve(held_out.size());
    for (const auto& target : held_out) {
        Prediction prediction;
        prediction.student_id = target.student_id;
        prediction.course_id = target.course_id;
        prediction.method = use_global_bias ? Method::mf : Method::mf_gb;
        prediction.value = model.predict_ids(target.student_id, target.course_id);
        predictions.push_back(std::move(prediction));
    }
    return predictions;
}

std::optional<std::vector<Prediction>> csmf_train_predict(const std::string& course,
                                                          const CourseDataset& base,
                                                          std::span<const TargetInstance> targets,
                                                          int latent_dim, double lambda,
                                                          const SgdOptions& sgd, int min_students) {
    if (!min_students_gate(base, min_students)) return std::nullopt;

    std::vector<TargetInstance> target_vec(targets.begin(), targets.end());
    const SparseGradeMatrix x = build_csmf_matrix(course, base, target_vec);

    // shape contract: (n_c + n_t) x (m_c + 1), last column observed exactly
    // for the base rows
    const int n_c = base.design.rows();
    const int n_t = static_cast<int>(targets.size());
    if (x.rows() != n_c + n_t || x.col(x.cols() - 1).size() != static_cast<std::size_t>(n_c))
        throw Error("csmf matrix shape violated for course " + course);

    CompletionProblem problem;
    problem.matrix = &x;
    problem.latent_dim = latent_dim;
    problem.lambda = lambda;
    problem.use_global_bias = true;
    problem.sgd = sgd;
    const MfModel model = solve_completion(problem).model;

    std::vector<Prediction> predictions;
    predictions.reserve(targets.size());
    for (const auto& target : targets) {
        Prediction prediction;
        prediction.student_id = target.student_id;
        prediction.course_id = course;
        prediction.method = Method::csmf;
        prediction.value = model.predict_ids(target.student_id, course);
        predictions.push_back(std::move(prediction));
    }
    return predictions;
}

int select_latent_dim(const std::vector<std::pair<int, double>>& validation_rmse) {
    if (validation_rmse.empty()) throw DataError("latent grid must not be empty");
    auto best = validation_rmse.front();
    for (const auto& candidate : validation_rmse)
        if (candidate.second < best.second ||
            (candidate.second == best.second && candidate.first < best.first))
            best = candidate;
    return best.first;
}

std::optional<CsmfStarResult> csmf_star_select(const std::string& course, const CourseDataset& base,
                                               std::span<const TargetInstance> targets,
                                               std::span<const int> latent_grid, double lambda,
                                               std::uint64_t seed, const SgdOptions& sgd,
                                               int min_students) {
    if (latent_grid.empty()) throw DataError("latent grid must not be empty");
    if (!min_students_gate(base, min_students)) return std::nullopt;

    CsmfStarResult result;

    const int n = base.design.rows();
    const int n_val = n / 10;
    if (n_val < 2) {
        result.validation_fallback = true;
        result.best_latent_dim = *std::min_element(latent_grid.begin(), latent_grid.end());
    } else {
        std::vector<int> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        Rng rng(derive_seed(seed, "csmf-star-split"));
        rng.shuffle(order);
        std::vector<bool> is_val(static_cast<std::size_t>(n), false);
        for (int i = 0; i < n_val; ++i) is_val[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = true;

        // 90% of the rows as a smaller course dataset
        IndexMap rows;
        std::vector<SparseGradeMatrix::Entry> entries;
        CourseDataset train;
        train.target_course = base.target_course;
        train.k = base.k;
        // the 10% as pseudo targets with their design rows as priors
        std::vector<TargetInstance> val_targets;
        std::vector<double> val_actuals;
        for (int r = 0; r < n; ++r) {
            if (is_val[static_cast<std::size_t>(r)]) {
                TargetInstance instance;
                instance.student_id = base.design.row_ids().name(r);
                instance.course_id = course;
                for (const auto& e : base.design.row(r))
                    instance.prior.emplace(base.design.col_ids().name(e.col), e.value);
                val_targets.push_back(std::move(instance));
                val_actuals.push_back(base.targets[static_cast<std::size_t>(r)]);
            } else {
                const int row = rows.add(base.design.row_ids().name(r));
                for (const auto& e : base.design.row(r)) entries.push_back({row, e.col, e.value});
                train.targets.push_back(base.targets[static_cast<std::size_t>(r)]);
            }
        }
        train.design = SparseGradeMatrix(std::move(rows), base.design.col_ids(), std::move(entries),
                                         /*check_grade_range=*/true);

        SgdOptions cell_sgd = sgd;
        cell_sgd.seed = seed;
        for (int l : latent_grid) {
            auto predictions =
                csmf_train_predict(course, train, val_targets, l, lambda, cell_sgd, /*min_students=*/1);
            double sum_sq = 0.0;
            for (std::size_t i = 0; i < predictions->size(); ++i) {
                const double err = (*predictions)[i].value - val_actuals[i];
                sum_sq += err * err;
            }
            result.validation_rmse.emplace_back(
                l, std::sqrt(sum_sq / static_cast<double>(val_actuals.size())));
        }
        result.best_latent_dim = select_latent_dim(result.validation_rmse);
    }

    SgdOptions final_sgd = sgd;
    final_sgd.seed = seed;
    auto predictions = csmf_train_predict(course, base, targets, result.best_latent_dim, lambda,
                                          final_sgd, min_students);
    result.predictions = std::move(*predictions);
    for (auto& p : result.predictions) p.method = Method::csmf_star;
    return result;
}

} // namespace gradepred
