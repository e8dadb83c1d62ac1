// Independent oracles for solver checks: a brute-force elastic-net solver
// built on exhaustive sign-pattern enumeration with exact reduced linear
// solves, and a closed-form ridge solution via the normal equations. Both
// go through Eigen, sharing no code with the library's coordinate descent.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "gradepred/types.hpp"

namespace gradepred::test {

struct OracleProblem {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    bool nonneg = false;
    bool fit_bias = true;
};

struct OracleSolution {
    Eigen::VectorXd w;
    double bias = 0.0;
    double objective = std::numeric_limits<double>::infinity();
};

inline double oracle_objective(const OracleProblem& p, const Eigen::VectorXd& w, double bias) {
    const Eigen::VectorXd residual =
        p.y - Eigen::VectorXd::Constant(p.y.size(), bias) - p.x * w;
    return residual.squaredNorm() + p.lambda1 * w.squaredNorm() + p.lambda2 * w.lpNorm<1>();
}

/// Solves the elastic net by enumerating every sign pattern in {-1,0,+1}^m
/// ({0,+1}^m under non-negativity), solving the sign-linearized reduced
/// problem exactly, and keeping the feasible candidate with the smallest
/// true objective. The optimum's own pattern yields the optimum, so the
/// minimum over candidates is the global solution. Only viable for small m.
inline OracleSolution elastic_net_oracle(const OracleProblem& p) {
    const int m = static_cast<int>(p.x.cols());
    const int n = static_cast<int>(p.x.rows());
    const int signs_per_var = p.nonneg ? 2 : 3; // {0,+} or {-,0,+}

    OracleSolution best;
    long total = 1;
    for (int j = 0; j < m; ++j) total *= signs_per_var;

    for (long code = 0; code < total; ++code) {
        std::vector<int> sign(static_cast<std::size_t>(m), 0);
        long rest = code;
        for (int j = 0; j < m; ++j) {
            const int digit = static_cast<int>(rest % signs_per_var);
            rest /= signs_per_var;
            sign[static_cast<std::size_t>(j)] = p.nonneg ? digit : digit - 1;
        }

        std::vector<int> active;
        for (int j = 0; j < m; ++j)
            if (sign[static_cast<std::size_t>(j)] != 0) active.push_back(j);
        const int a = static_cast<int>(active.size());
        const int dim = a + (p.fit_bias ? 1 : 0);

        Eigen::VectorXd w = Eigen::VectorXd::Zero(m);
        double bias = 0.0;
        if (dim > 0) {
            Eigen::MatrixXd xa(n, a);
            for (int i = 0; i < a; ++i) xa.col(i) = p.x.col(active[static_cast<std::size_t>(i)]);

            Eigen::MatrixXd lhs(dim, dim);
            Eigen::VectorXd rhs(dim);
            lhs.topLeftCorner(a, a) =
                xa.transpose() * xa + p.lambda1 * Eigen::MatrixXd::Identity(a, a);
            rhs.head(a) = xa.transpose() * p.y;
            for (int i = 0; i < a; ++i)
                rhs(i) -= (p.lambda2 / 2.0) * static_cast<double>(sign[static_cast<std::size_t>(active[static_cast<std::size_t>(i)])]);
            if (p.fit_bias) {
                const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
                lhs.block(0, a, a, 1) = xa.transpose() * ones;
                lhs.block(a, 0, 1, a) = (xa.transpose() * ones).transpose();
                lhs(a, a) = static_cast<double>(n);
                rhs(a) = p.y.sum();
            }

            Eigen::FullPivLU<Eigen::MatrixXd> lu(lhs);
            if (!lu.isInvertible()) continue;
            const Eigen::VectorXd solution = lu.solve(rhs);
            for (int i = 0; i < a; ++i) w(active[static_cast<std::size_t>(i)]) = solution(i);
            if (p.fit_bias) bias = solution(a);
        }

        if (p.nonneg) {
            bool feasible = true;
            for (int j = 0; j < m; ++j) {
                if (w(j) < -1e-10) feasible = false;
                else if (w(j) < 0.0) w(j) = 0.0;
            }
            if (!feasible) continue;
        }

        const double objective = oracle_objective(p, w, bias);
        if (objective < best.objective) {
            best.w = w;
            best.bias = bias;
            best.objective = objective;
        }
    }
    return best;
}

/// Unconstrained ridge (lambda2 = 0) via the normal equations with an
/// unpenalized bias.
inline OracleSolution ridge_closed_form(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                        double lambda1, bool fit_bias) {
    const int m = static_cast<int>(x.cols());
    const int n = static_cast<int>(x.rows());
    const int dim = m + (fit_bias ? 1 : 0);
    Eigen::MatrixXd lhs(dim, dim);
    Eigen::VectorXd rhs(dim);
    lhs.topLeftCorner(m, m) = x.transpose() * x + lambda1 * Eigen::MatrixXd::Identity(m, m);
    rhs.head(m) = x.transpose() * y;
    if (fit_bias) {
        const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
        lhs.block(0, m, m, 1) = x.transpose() * ones;
        lhs.block(m, 0, 1, m) = (x.transpose() * ones).transpose();
        lhs(m, m) = static_cast<double>(n);
        rhs(m) = y.sum();
    }
    const Eigen::VectorXd solution = lhs.ldlt().solve(rhs);
    OracleSolution result;
    result.w = solution.head(m);
    result.bias = fit_bias ? solution(m) : 0.0;
    OracleProblem p{x, y, lambda1, 0.0, false, fit_bias};
    result.objective = oracle_objective(p, result.w, result.bias);
    return result;
}

/// Dense view of a sparse grade matrix (missing entries as zero), matching
/// the regression's zero-imputation reading.
inline Eigen::MatrixXd dense_of(const SparseGradeMatrix& matrix) {
    Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(matrix.rows(), matrix.cols());
    for (const auto& e : matrix.entries()) dense(e.row, e.col) = e.value;
    return dense;
}

} // namespace gradepred::test
