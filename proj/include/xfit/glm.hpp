#pragma once

#include <cstddef>
#include <span>

#include <Eigen/Dense>

namespace xfit {

struct GlmSpec {
    bool include_intercept = true;
    std::size_t design_columns = 0;
    int max_iterations = 100;
    /// Bound on the max absolute score at convergence, in units of the mean
    /// positive weight.
    double convergence_tolerance = 1e-10;
    /// When false, a diverged fit throws ConvergenceError.
    bool allow_divergence = true;

    void validate() const;
};

struct GlmFit {
    /// Intercept first (when fitted), then one entry per design column.
    Eigen::VectorXd coefficients;
    bool converged = false;
    /// The likelihood keeps improving along a ray (separation, or a scaled
    /// mean outside [0,1]); the last iterate is returned.
    bool diverged = false;
    double final_score_norm = 0.0;
    int iterations_used = 0;
};

/// Weighted logistic regression with offsets for responses in [0,1], by
/// Newton's method with step-halving (gradient steps where the information
/// matrix is singular). Separation yields diverged=true, never an exception,
/// unless spec.allow_divergence is false.
GlmFit fit_glm_logistic(std::span<const double> responses, const Eigen::MatrixXd& design,
                        std::span<const double> offsets, std::span<const double> weights,
                        const GlmSpec& spec);

/// Same fitter for the scaled logistic loss, where responses may leave [0,1].
GlmFit scaled_logistic_fit(std::span<const double> responses, const Eigen::MatrixXd& design,
                           std::span<const double> offsets, std::span<const double> weights,
                           const GlmSpec& spec);

/// Weighted Bernoulli log-likelihood sum_i w_i [y_i log mu_i + (1-y_i) log(1-mu_i)]
/// at coefficients `beta` (layout as in GlmFit).
double glm_log_likelihood(std::span<const double> responses, const Eigen::MatrixXd& design,
                          std::span<const double> offsets, std::span<const double> weights,
                          bool include_intercept, const Eigen::VectorXd& beta);

/// Analytic gradient of glm_log_likelihood.
Eigen::VectorXd glm_score(std::span<const double> responses, const Eigen::MatrixXd& design,
                          std::span<const double> offsets, std::span<const double> weights,
                          bool include_intercept, const Eigen::VectorXd& beta);

/// Linear predictor offset + [1, design] * beta for every row.
Eigen::VectorXd glm_linear_predictor(const Eigen::MatrixXd& design, std::span<const double> offsets,
                                     bool include_intercept, const Eigen::VectorXd& beta);

}  // namespace xfit
