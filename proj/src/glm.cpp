#include "xfit/glm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <string>

#include "xfit/errors.hpp"
#include "xfit/logistic.hpp"

namespace xfit {

void GlmSpec::validate() const {
    if (!include_intercept && design_columns == 0) {
        throw InvalidArgument("GLM without intercept needs at least one design column");
    }
    if (max_iterations < 1) throw InvalidArgument("GLM max_iterations must be positive");
    if (!(convergence_tolerance > 0.0)) throw InvalidArgument("GLM tolerance must be positive");
}

namespace {

constexpr int kMaxHalvings = 30;
constexpr int kMaxDoublings = 64;
constexpr double kRecessionTolerance = 1e-8;
constexpr double kRoundingSlack = 1e-13;

Eigen::MatrixXd augmented_design(const Eigen::MatrixXd& design, bool include_intercept) {
    if (!include_intercept) return design;
    Eigen::MatrixXd z(design.rows(), design.cols() + 1);
    z.col(0).setOnes();
    z.rightCols(design.cols()) = design;
    return z;
}

struct Problem {
    Eigen::Map<const Eigen::VectorXd> y;
    Eigen::Map<const Eigen::VectorXd> offset;
    Eigen::Map<const Eigen::VectorXd> w;
    Eigen::MatrixXd z;

    Problem(std::span<const double> responses, const Eigen::MatrixXd& design,
            std::span<const double> offsets, std::span<const double> weights, bool intercept)
        : y(responses.data(), static_cast<Eigen::Index>(responses.size())),
          offset(offsets.data(), static_cast<Eigen::Index>(offsets.size())),
          w(weights.data(), static_cast<Eigen::Index>(weights.size())),
          z(augmented_design(design, intercept)) {}

    Eigen::VectorXd eta(const Eigen::VectorXd& beta) const {
        Eigen::VectorXd e = offset;
        if (z.cols() > 0) e.noalias() += z * beta;
        return e;
    }

    // Negative log-likelihood; +inf when any term is not finite.
    double nll(const Eigen::VectorXd& beta) const {
        const Eigen::VectorXd e = eta(beta);
        double total = 0.0;
        for (Eigen::Index i = 0; i < e.size(); ++i) {
            if (w[i] == 0.0) continue;
            total += w[i] * (softplus(e[i]) - y[i] * e[i]);
        }
        return std::isfinite(total) ? total : std::numeric_limits<double>::infinity();
    }

    Eigen::VectorXd mean(const Eigen::VectorXd& beta) const {
        Eigen::VectorXd e = eta(beta);
        for (Eigen::Index i = 0; i < e.size(); ++i) e[i] = expit(e[i]);
        return e;
    }

    Eigen::VectorXd score(const Eigen::VectorXd& mu) const {
        return z.transpose() * (w.array() * (y - mu).array()).matrix();
    }

    Eigen::MatrixXd information(const Eigen::VectorXd& mu) const {
        const Eigen::VectorXd v = (w.array() * mu.array() * (1.0 - mu.array())).matrix();
        return z.transpose() * v.asDiagonal() * z;
    }

    // Slope of the negative log-likelihood at infinity along `d`, relative to
    // sum_i w_i |z_i d|. Zero or negative means the likelihood never turns
    // back along the ray.
    bool unbounded_along(const Eigen::VectorXd& d) const {
        const Eigen::VectorXd zd = z * d;
        double slope = 0.0;
        double scale = 0.0;
        for (Eigen::Index i = 0; i < zd.size(); ++i) {
            slope += w[i] * (std::max(0.0, zd[i]) - y[i] * zd[i]);
            scale += w[i] * std::abs(zd[i]);
        }
        return scale > 0.0 && slope <= kRecessionTolerance * scale;
    }
};

void validate_inputs(std::span<const double> responses, const Eigen::MatrixXd& design,
                     std::span<const double> offsets, std::span<const double> weights,
                     const GlmSpec& spec, bool unit_interval) {
    spec.validate();
    const std::size_t n = responses.size();
    if (n == 0) throw InvalidArgument("GLM needs at least one observation");
    if (offsets.size() != n || weights.size() != n || static_cast<std::size_t>(design.rows()) != n) {
        throw InvalidArgument("GLM inputs have mismatched lengths");
    }
    if (static_cast<std::size_t>(design.cols()) != spec.design_columns) {
        throw InvalidArgument("GLM design has " + std::to_string(design.cols()) +
                              " columns, spec says " + std::to_string(spec.design_columns));
    }
    if (!design.allFinite()) throw InvalidArgument("GLM design must be finite");
    std::size_t positive = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(responses[i]) || !std::isfinite(offsets[i]) || !std::isfinite(weights[i])) {
            throw InvalidArgument("GLM inputs must be finite");
        }
        if (weights[i] < 0.0) throw InvalidArgument("GLM weights must be nonnegative");
        if (unit_interval && (responses[i] < 0.0 || responses[i] > 1.0)) {
            throw InvalidArgument("GLM responses must lie in [0,1]");
        }
        if (weights[i] > 0.0) ++positive;
    }
    if (positive == 0) throw InvalidArgument("GLM weights are all zero");
    const std::size_t p = spec.design_columns + (spec.include_intercept ? 1 : 0);
    if (p > positive) {
        throw RankDeficiency("GLM has " + std::to_string(p) + " coefficients but only " +
                             std::to_string(positive) + " positively weighted observations");
    }
}

// First IRLS iterate of the usual binomial GLM initialization: working
// response from mu0 = (w y + 1/2) / (w + 1), ignoring the offset in mu0.
// Where the likelihood is flat this decides which maximizer is returned.
Eigen::VectorXd starting_point(const Problem& prob) {
    const auto q = prob.z.cols();
    if (q == 0) return Eigen::VectorXd::Zero(0);
    const Eigen::Index n = prob.y.size();
    Eigen::VectorXd working(n);
    Eigen::VectorXd irls_weight(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double mu0 = std::clamp((prob.w[i] * prob.y[i] + 0.5) / (prob.w[i] + 1.0), 1e-6, 1.0 - 1e-6);
        const double v = mu0 * (1.0 - mu0);
        working[i] = logit(mu0) - prob.offset[i] + (prob.y[i] - mu0) / v;
        irls_weight[i] = prob.w[i] * v;
    }
    const Eigen::MatrixXd info = prob.z.transpose() * irls_weight.asDiagonal() * prob.z;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return Eigen::VectorXd::Zero(q);
    const Eigen::VectorXd pivots = ldlt.vectorD();
    if (!(pivots.minCoeff() > 1e-13 * std::max(pivots.maxCoeff(), 0.0))) return Eigen::VectorXd::Zero(q);
    Eigen::VectorXd beta = ldlt.solve(prob.z.transpose() * (irls_weight.array() * working.array()).matrix());
    if (!beta.allFinite() || !std::isfinite(prob.nll(beta))) return Eigen::VectorXd::Zero(q);
    return beta;
}

GlmFit newton_fit(const Problem& prob, const GlmSpec& spec) {
    const auto q = prob.z.cols();
    GlmFit fit;
    fit.coefficients = starting_point(prob);
    Eigen::VectorXd& beta = fit.coefficients;

    double current = prob.nll(beta);
    Eigen::VectorXd mu = prob.mean(beta);
    Eigen::VectorXd score = prob.score(mu);
    Eigen::VectorXd last_step = Eigen::VectorXd::Zero(q);
    bool score_small = false;
    double weight_sum = 0.0;
    double positive = 0.0;
    for (Eigen::Index i = 0; i < prob.w.size(); ++i) {
        weight_sum += prob.w[i];
        positive += prob.w[i] > 0.0 ? 1.0 : 0.0;
    }
    const double tolerance = spec.convergence_tolerance * weight_sum / positive;

    int it = 0;
    for (; it < spec.max_iterations; ++it) {
        if (score.cwiseAbs().maxCoeff() <= tolerance) {
            score_small = true;
            break;
        }

        Eigen::VectorXd direction;
        bool newton = false;
        const Eigen::LDLT<Eigen::MatrixXd> ldlt(prob.information(mu));
        if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
            const Eigen::VectorXd pivots = ldlt.vectorD();
            if (pivots.minCoeff() > 1e-13 * std::max(pivots.maxCoeff(), 0.0)) {
                direction = ldlt.solve(score);
                newton = direction.allFinite();
            }
        }
        // Returns the accepted point along `d`, or nothing when no tried step decreases the loss.
        const auto line_search = [&](const Eigen::VectorXd& d, bool is_newton) -> std::optional<std::pair<Eigen::VectorXd, double>> {
            double step = 1.0;
            Eigen::VectorXd candidate = beta + d;
            double value = prob.nll(candidate);
            // Near the optimum a Newton decrease is below the rounding of the summed loss.
            const double slack = is_newton ? kRoundingSlack * (1.0 + std::abs(current)) : 0.0;
            bool accepted = value <= current + slack;
            if (accepted && !is_newton) {
                // Gradient steps start at unit length and grow while they keep paying off;
                // a saturated offset can sit thousands of logits away.
                for (int k = 0; k < kMaxDoublings; ++k) {
                    const Eigen::VectorXd longer = beta + (2.0 * step) * d;
                    const double longer_value = prob.nll(longer);
                    if (!(longer_value < value)) break;
                    step *= 2.0;
                    candidate = longer;
                    value = longer_value;
                }
            }
            for (int k = 0; !accepted && k < kMaxHalvings; ++k) {
                step *= 0.5;
                candidate = beta + step * d;
                value = prob.nll(candidate);
                accepted = value <= current + slack;
            }
            if (!accepted) return std::nullopt;
            return std::make_pair(std::move(candidate), value);
        };

        auto found = newton ? line_search(direction, true) : std::nullopt;
        // A near-singular information matrix can make the Newton step useless.
        if (!found) found = line_search(score / score.norm(), false);
        const bool accepted = found.has_value();
        if (!accepted) break;

        auto& [candidate, value] = *found;
        last_step = candidate - beta;
        if (last_step.cwiseAbs().maxCoeff() == 0.0) break;
        beta = candidate;
        current = value;
        mu = prob.mean(beta);
        score = prob.score(mu);
    }
    if (!score_small && score.cwiseAbs().maxCoeff() <= tolerance) score_small = true;

    fit.iterations_used = it;
    fit.final_score_norm = score.cwiseAbs().maxCoeff();
    const bool moved = last_step.cwiseAbs().maxCoeff() > 0.0;
    fit.diverged = !score_small || (moved && prob.unbounded_along(last_step));
    fit.converged = score_small && !fit.diverged;
    if (fit.diverged && !spec.allow_divergence) {
        throw ConvergenceError("logistic GLM diverged after " + std::to_string(it) + " iterations");
    }
    return fit;
}

}  // namespace

GlmFit fit_glm_logistic(std::span<const double> responses, const Eigen::MatrixXd& design,
                        std::span<const double> offsets, std::span<const double> weights,
                        const GlmSpec& spec) {
    validate_inputs(responses, design, offsets, weights, spec, true);
    return newton_fit(Problem(responses, design, offsets, weights, spec.include_intercept), spec);
}

GlmFit scaled_logistic_fit(std::span<const double> responses, const Eigen::MatrixXd& design,
                           std::span<const double> offsets, std::span<const double> weights,
                           const GlmSpec& spec) {
    validate_inputs(responses, design, offsets, weights, spec, false);
    return newton_fit(Problem(responses, design, offsets, weights, spec.include_intercept), spec);
}

double glm_log_likelihood(std::span<const double> responses, const Eigen::MatrixXd& design,
                          std::span<const double> offsets, std::span<const double> weights,
                          bool include_intercept, const Eigen::VectorXd& beta) {
    const Problem prob(responses, design, offsets, weights, include_intercept);
    return -prob.nll(beta);
}

Eigen::VectorXd glm_score(std::span<const double> responses, const Eigen::MatrixXd& design,
                          std::span<const double> offsets, std::span<const double> weights,
                          bool include_intercept, const Eigen::VectorXd& beta) {
    const Problem prob(responses, design, offsets, weights, include_intercept);
    return prob.score(prob.mean(beta));
}

Eigen::VectorXd glm_linear_predictor(const Eigen::MatrixXd& design, std::span<const double> offsets,
                                     bool include_intercept, const Eigen::VectorXd& beta) {
    const Eigen::VectorXd no_response = Eigen::VectorXd::Zero(design.rows());
    const Problem prob(std::span<const double>(no_response.data(), static_cast<std::size_t>(no_response.size())),
                       design, offsets, std::span<const double>(no_response.data(), static_cast<std::size_t>(no_response.size())),
                       include_intercept);
    return prob.eta(beta);
}

}  // namespace xfit
