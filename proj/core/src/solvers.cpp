#include "gradepred/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gradepred/rng.hpp"

namespace gradepred {

namespace {

void check_finite(const ElasticNetProblem& p) {
    for (double y : p.targets)
        if (!std::isfinite(y)) throw Error("elastic net targets contain a non-finite value");
    // matrix entries are validated at construction
}

double soft_threshold(double value, double threshold) {
    if (value > threshold) return value - threshold;
    if (value < -threshold) return value + threshold;
    return 0.0;
}

} // namespace

ElasticNetResult solve_elastic_net(const ElasticNetProblem& p) {
    const SparseGradeMatrix& design = *p.design;
    const int n = design.rows();
    const int m = design.cols();
    if (n < 1) throw DataError("elastic net needs at least one sample row");
    if (p.targets.size() != static_cast<std::size_t>(n))
        throw DataError("elastic net target length does not match design rows");
    if (p.lambda1 < 0 || p.lambda2 < 0) throw DataError("regularization weights must be >= 0");
    check_finite(p);

    // column sums of squares, fixed for the whole solve
    std::vector<double> col_sq(static_cast<std::size_t>(m), 0.0);
    for (int j = 0; j < m; ++j)
        for (const auto& e : design.col(j)) col_sq[static_cast<std::size_t>(j)] += e.value * e.value;

    std::vector<double> w(static_cast<std::size_t>(m), 0.0);
    double bias = 0.0;
    std::vector<double> residual = p.targets; // y - bias - X w

    const double threshold = p.lambda2 / 2.0;
    ElasticNetResult result;

    auto objective = [&]() {
        double value = 0.0;
        for (double r : residual) value += r * r;
        for (double wj : w) value += p.lambda1 * wj * wj + p.lambda2 * std::abs(wj);
        return value;
    };

    int sweep = 0;
    bool converged = false;
    for (; sweep < kMaxSweeps && !converged; ++sweep) {
        double max_change = 0.0;

        if (p.fit_bias) {
            const double mean_residual =
                std::accumulate(residual.begin(), residual.end(), 0.0) / static_cast<double>(n);
            if (mean_residual != 0.0) {
                bias += mean_residual;
                for (double& r : residual) r -= mean_residual;
            }
            max_change = std::abs(mean_residual);
        }

        for (int j = 0; j < m; ++j) {
            const double a = col_sq[static_cast<std::size_t>(j)] + p.lambda1;
            const double old = w[static_cast<std::size_t>(j)];
            double updated = 0.0;
            if (a > 0.0) {
                // g = x_j' (y - bias - X w_{-j})
                double g = col_sq[static_cast<std::size_t>(j)] * old;
                for (const auto& e : design.col(j)) g += e.value * residual[static_cast<std::size_t>(e.row)];
                updated = p.nonneg ? std::max(0.0, (g - threshold) / a)
                                   : soft_threshold(g, threshold) / a;
            }
            if (updated != old) {
                const double delta = updated - old;
                for (const auto& e : design.col(j))
                    residual[static_cast<std::size_t>(e.row)] -= e.value * delta;
                w[static_cast<std::size_t>(j)] = updated;
                max_change = std::max(max_change, std::abs(delta));
            }
        }

        result.objective_trace.push_back(objective());
        converged = max_change < kCoordinateTol;
    }

    result.converged = converged;
    result.sweeps = sweep;
    result.model.bias = bias;
    result.model.nonneg = p.nonneg;
    result.model.lambda1 = p.lambda1;
    result.model.lambda2 = p.lambda2;
    for (int j = 0; j < m; ++j)
        if (w[static_cast<std::size_t>(j)] != 0.0)
            result.model.weights.emplace(design.col_ids().name(j), w[static_cast<std::size_t>(j)]);
    return result;
}

double objective_elastic_net(const ElasticNetProblem& p, const LinearModel& m) {
    const SparseGradeMatrix& design = *p.design;
    if (p.targets.size() != static_cast<std::size_t>(design.rows()))
        throw DataError("target length does not match design rows");

    std::vector<double> w(static_cast<std::size_t>(design.cols()), 0.0);
    for (const auto& [course, weight] : m.weights) {
        auto col = design.col_ids().find(course);
        if (!col) throw DataError("model weight for course absent from design: " + course);
        w[static_cast<std::size_t>(*col)] = weight;
    }

    std::vector<double> residual = p.targets;
    for (double& r : residual) r -= m.bias;
    for (const auto& e : design.entries())
        residual[static_cast<std::size_t>(e.row)] -= e.value * w[static_cast<std::size_t>(e.col)];

    double value = 0.0;
    for (double r : residual) value += r * r;
    for (double wj : w) value += p.lambda1 * wj * wj + p.lambda2 * std::abs(wj);
    return value;
}

CompletionResult solve_completion(const CompletionProblem& p) {
    const SparseGradeMatrix& matrix = *p.matrix;
    if (matrix.nnz() == 0) throw DataError("completion needs at least one observed entry");
    if (p.latent_dim < 0) throw DataError("latent dimension must be >= 0");
    if (p.lambda < 0) throw DataError("lambda must be >= 0");

    const int n = matrix.rows();
    const int m = matrix.cols();
    const int l = p.latent_dim;

    CompletionResult result;
    MfModel& model = result.model;
    model.latent_dim = l;
    model.lambda = p.lambda;
    model.use_global_bias = p.use_global_bias;
    model.seed = p.sgd.seed;
    model.students = matrix.row_ids();
    model.courses = matrix.col_ids();
    model.student_bias.assign(static_cast<std::size_t>(n), 0.0);
    model.course_bias.assign(static_cast<std::size_t>(m), 0.0);
    model.p = DenseMatrix(n, l);
    model.q = DenseMatrix(m, l);

    if (p.use_global_bias) {
        double sum = 0.0;
        for (const auto& e : matrix.entries()) sum += e.value;
        model.mu = sum / static_cast<double>(matrix.nnz());
    } else {
        model.mu = 0.0;
    }

    Rng init_rng(derive_seed(p.sgd.seed, "factor-init"));
    for (int i = 0; i < n; ++i)
        for (int f = 0; f < l; ++f) model.p(i, f) = init_rng.uniform(-0.005, 0.005);
    for (int j = 0; j < m; ++j)
        for (int f = 0; f < l; ++f) model.q(j, f) = init_rng.uniform(-0.005, 0.005);

    std::vector<std::size_t> order(matrix.nnz());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(p.sgd.seed, "epoch-shuffle"));

    const double lr = p.sgd.learning_rate;
    const double lambda = p.lambda;
    double previous = objective_completion(p, model);

    for (int epoch = 0; epoch < p.sgd.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        for (std::size_t idx : order) {
            const auto& e = matrix.entries()[idx];
            const std::size_t i = static_cast<std::size_t>(e.row);
            const std::size_t j = static_cast<std::size_t>(e.col);
            double pred = model.mu + model.student_bias[i] + model.course_bias[j];
            auto pr = model.p.row(e.row);
            auto qr = model.q.row(e.col);
            for (int f = 0; f < l; ++f) pred += pr[f] * qr[f];
            const double err = e.value - pred;

            if (p.use_global_bias) model.mu += lr * err;
            model.student_bias[i] += lr * (err - lambda * model.student_bias[i]);
            model.course_bias[j] += lr * (err - lambda * model.course_bias[j]);
            for (int f = 0; f < l; ++f) {
                const double pf = pr[f];
                pr[f] += lr * (err * qr[f] - lambda * pf);
                qr[f] += lr * (err * pf - lambda * qr[f]);
            }
        }

        const double current = objective_completion(p, model);
        if (!std::isfinite(current))
            throw Error("completion SGD diverged (objective not finite) at learning rate " +
                        format_double(lr));
        result.objective_trace.push_back(current);
        result.epochs_run = epoch + 1;
        if (p.sgd.rel_tol > 0.0 &&
            std::abs(previous - current) < p.sgd.rel_tol * std::max(previous, 1e-12)) {
            break;
        }
        previous = current;
    }

    result.objective = result.objective_trace.empty() ? previous : result.objective_trace.back();
    return result;
}

double objective_completion(const CompletionProblem& p, const MfModel& m) {
    const SparseGradeMatrix& matrix = *p.matrix;
    if (m.student_bias.size() != static_cast<std::size_t>(matrix.rows()) ||
        m.course_bias.size() != static_cast<std::size_t>(matrix.cols()))
        throw DataError("model dimensions do not match the matrix");

    double value = 0.0;
    for (const auto& e : matrix.entries()) {
        const double err = e.value - m.predict(e.row, e.col);
        value += err * err;
    }
    double penalty = 0.0;
    for (double v : m.p.data()) penalty += v * v;
    for (double v : m.q.data()) penalty += v * v;
    for (double v : m.student_bias) penalty += v * v;
    for (double v : m.course_bias) penalty += v * v;
    return value + p.lambda * penalty;
}

} // namespace gradepred
