#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gradepred/dataset.hpp"
#include "gradepred/solvers.hpp"
#include "gradepred/types.hpp"

namespace gradepred {

enum class Method {
    csr,
    csr_rc,
    ssr,
    bias_only,
    sbcf,
    mf,
    mf_gb,
    csmf,
    csmf_star,
};

/// CLI/file tag: "csr", "csr-rc", "ssr", "biasonly", "sbcf", "mf",
/// "mf-gb", "csmf", "csmf-star".
std::string_view method_name(Method method);
std::optional<Method> parse_method(std::string_view name);
std::span<const Method> all_methods();

struct Prediction {
    std::string student_id;
    std::string course_id;
    double value = 0.0;
    Method method = Method::csr;
    bool clamped = false;  // value was pulled back into [0,4]
    bool fallback = false; // degenerate input forced a mean fallback
};

Prediction clamp_prediction(Prediction prediction);

/// Course-specific regression. centered = false fits the non-negative
/// model on raw grades; centered = true (the row-centered variant) centers
/// the dataset first and drops the non-negativity constraint. Returns
/// nullopt when the dataset fails the min-students gate, or when centering
/// is requested and a design row has no grades to center.
std::optional<LinearModel> csr_train(const std::string& course, const Cohort& cohort, int k,
                                     double lambda1, double lambda2, bool centered,
                                     int min_students = 20);

/// Same, for a prebuilt (uncentered) dataset.
std::optional<LinearModel> csr_train_on(const CourseDataset& base, double lambda1, double lambda2,
                                        bool centered, int min_students = 20);

/// Applies a linear model to a student's prior grades. The centered
/// variant centers the priors by the student's own GPA, applies the model,
/// and adds the GPA back, so the relative prediction becomes an absolute
/// grade.
Prediction csr_predict(const LinearModel& model, const TargetInstance& target, bool centered);

struct SsrOptions {
    double overlap_threshold = 0.5; // t
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    /// Off by default: the literal formulation is uncentered with the
    /// non-negativity constraint. The centered variant is available but
    /// makes no reproduction claim.
    bool centered = false;
    int min_students = 20;
};

/// Student-specific regression: restricts the course dataset to the target
/// student's prior courses and to peers with overlap ratio >= t, then fits
/// and predicts like CSR. Returns nullopt (a skip, not an error) when the
/// restricted dataset fails the gate.
std::optional<Prediction> ssr_train_predict(const TargetInstance& target, const CourseDataset& base,
                                            const SsrOptions& options);
std::optional<Prediction> ssr_train_predict(const TargetInstance& target, const Cohort& cohort,
                                            int k, const SsrOptions& options);

/// Global/student/course biases only: the completion model with l = 0.
MfModel bias_only_train(const SparseGradeMatrix& matrix, double lambda, const SgdOptions& sgd = {});

/// Student-based collaborative filtering. Pearson similarity between the
/// target's prior grades and each peer's design row over their >= 2
/// commonly observed courses; peers with positive similarity form the
/// neighborhood, whose weighted mean-offset is shrunk by min(r, nbr) / r.
/// Falls back to the target's prior mean when no peer qualifies.
Prediction sbcf_predict(const TargetInstance& target, const CourseDataset& peers, int r);

/// Fits the completion model on the global matrix and predicts every
/// held-out cell. Throws LeakageError if a held-out pair is observed in
/// the matrix. Students or courses unseen in training contribute zero
/// bias and zero factors.
std::vector<Prediction> mf_train_predict(const SparseGradeMatrix& matrix,
                                         std::span<const TargetInstance> held_out, int latent_dim,
                                         double lambda, bool use_global_bias,
                                         const SgdOptions& sgd = {});

/// Course-specific matrix factorization: builds the per-course completion
/// matrix and predicts the target rows' final-column cells. Returns
/// nullopt when the base dataset fails the gate.
std::optional<std::vector<Prediction>> csmf_train_predict(const std::string& course,
                                                          const CourseDataset& base,
                                                          std::span<const TargetInstance> targets,
                                                          int latent_dim, double lambda,
                                                          const SgdOptions& sgd = {},
                                                          int min_students = 20);

struct CsmfStarResult {
    int best_latent_dim = 0;
    std::vector<Prediction> predictions;
    bool validation_fallback = false; // validation split too small, smallest l used
    std::vector<std::pair<int, double>> validation_rmse; // (l, rmse) per grid point
};

/// Per-course latent-dimension selection on a seeded 90/10 row split of the
/// training data; ties pick the smaller dimension. Retrains on the full
/// base before predicting.
std::optional<CsmfStarResult> csmf_star_select(const std::string& course, const CourseDataset& base,
                                               std::span<const TargetInstance> targets,
                                               std::span<const int> latent_grid, double lambda,
                                               std::uint64_t seed, const SgdOptions& sgd = {},
                                               int min_students = 20);

/// Exposed for the tie-break contract: smallest RMSE wins, equal RMSE
/// picks the smaller latent dimension.
int select_latent_dim(const std::vector<std::pair<int, double>>& validation_rmse);

} // namespace gradepred
