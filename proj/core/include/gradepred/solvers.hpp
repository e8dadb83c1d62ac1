#pragma once

#include <cstdint>
#include <vector>

#include "gradepred/types.hpp"

namespace gradepred {

/// Least squares with ridge (lambda1) and lasso (lambda2) penalties and an
/// optional non-negativity constraint on the weights. Missing design
/// entries count as zero; the unpenalized bias is fitted when fit_bias is
/// set. The design's column ids become the model's weight keys.
struct ElasticNetProblem {
    const SparseGradeMatrix* design = nullptr; // rows = samples
    std::vector<double> targets;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    bool nonneg = false;
    bool fit_bias = true;
};

struct ElasticNetResult {
    LinearModel model;
    bool converged = false;
    int sweeps = 0;
    /// Objective after each coordinate-descent sweep; non-increasing.
    std::vector<double> objective_trace;
};

// Tighter than strictly needed for the objective: on ill-conditioned
// designs a per-sweep change of 1e-7 can still sit ~1e-5 from the optimum,
// which would break the closed-form ridge equivalence the tests assert.
inline constexpr double kCoordinateTol = 1e-9;
inline constexpr int kMaxSweeps = 10000;

/// Cyclic coordinate descent with closed-form soft-threshold updates
/// (threshold lambda2/2) and a max(., 0) projection when nonneg. The bias
/// is refit to the residual mean every sweep. Stops when the largest
/// coordinate change in a sweep drops below kCoordinateTol or after
/// kMaxSweeps sweeps; the problem is convex, so the result is the global
/// optimum up to that tolerance.
ElasticNetResult solve_elastic_net(const ElasticNetProblem& p);

/// Exact value of the elastic-net objective for a given model.
double objective_elastic_net(const ElasticNetProblem& p, const LinearModel& m);

struct SgdOptions {
    double learning_rate = 0.005;
    int epochs = 1000;
    std::uint64_t seed = 0;
    /// Stop once the relative epoch-to-epoch objective change falls below
    /// this; 0 disables early stopping.
    double rel_tol = 1e-6;
};

/// Biased low-rank completion over the observed entries only. l = 0 is the
/// bias-only model; use_global_bias = false pins mu at 0 and removes it
/// from the updates.
struct CompletionProblem {
    const SparseGradeMatrix* matrix = nullptr;
    int latent_dim = 0;
    double lambda = 0.0;
    bool use_global_bias = true;
    SgdOptions sgd;
};

struct CompletionResult {
    MfModel model;
    double objective = 0.0;
    int epochs_run = 0;
    /// Objective at the end of each epoch.
    std::vector<double> objective_trace;
};

/// Stochastic gradient descent over the observed entries, one pass per
/// epoch in a per-epoch reshuffled order. mu starts at the observed mean
/// (0 when the global bias is disabled), biases at 0, factors at
/// uniform(-0.005, 0.005) from the seeded generator. Identical seed and
/// inputs give a bitwise-identical model. Throws Error naming the learning
/// rate if the objective stops being finite.
CompletionResult solve_completion(const CompletionProblem& p);

/// Exact value of the completion objective: the squared error over the
/// observed entries plus lambda * (|P|_F^2 + |Q|_F^2 + |sb|^2 + |cb|^2).
double objective_completion(const CompletionProblem& p, const MfModel& m);

} // namespace gradepred
