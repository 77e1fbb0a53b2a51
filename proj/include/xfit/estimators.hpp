#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xfit/data.hpp"
#include "xfit/eif.hpp"
#include "xfit/glm.hpp"
#include "xfit/learners.hpp"
#include "xfit/rng.hpp"

namespace xfit {

enum class EstimatorFamily {
    naive,
    tmle_c,
    tmle_w,
    tmle_cp,
    tmle_wp,
    dml,
    dml_cl,
    tmle_c_trans,
    tmle_w_trans,
    tmle_cp_trans,
    tmle_wp_trans,
};

/// c/w: fold-wise clever covariate / weighted; cp/wp: one pooled regression.
enum class TmleVariant { c, w, cp, wp };

struct QBounds {
    double lower = 0.0;
    double upper = 1.0;

    void validate() const;
    friend bool operator==(const QBounds&, const QBounds&) = default;
};

struct EstimatorKind {
    EstimatorFamily family = EstimatorFamily::naive;
    std::optional<QBounds> q_bounds;  // required by the *_trans families

    bool is_tmle() const noexcept;
    bool is_trans() const noexcept;
    TmleVariant variant() const;
    void validate() const;
    /// "tmle_c", "dml_cl", "tmle_w_trans[0:0.05]", ...
    std::string name() const;
    static EstimatorKind parse(const std::string& text);

    friend bool operator==(const EstimatorKind&, const EstimatorKind&) = default;
};

std::string family_name(EstimatorFamily family);

enum class TargetingMode { clever_covariate, weighted };
std::string to_string(TargetingMode mode);

struct FluctuationRecord {
    std::optional<std::size_t> fold;  // empty for the pooled regression
    double epsilon = 0.0;
    bool diverged = false;
    TargetingMode targeting_mode = TargetingMode::clever_covariate;
};

/// A fitted fluctuation of the initial outcome regression on the logit scale.
struct Fluctuation {
    TargetingMode mode = TargetingMode::clever_covariate;
    double epsilon = 0.0;
    double logit_clip = 1e4;

    /// logit(q) clipped to [-logit_clip, logit_clip].
    double offset(double q) const noexcept;
    /// H = g / (pi (1 - g)) for the clever covariate, 1 for weighting.
    double covariate(double g, double pi) const;
    double targeted_logit(double q, double g, double pi) const { return offset(q) + epsilon * covariate(g, pi); }
    double apply(double q, double g, double pi) const;
};

/// Observations entering a targeting regression: treatment, (possibly
/// scaled) outcome, initial Q, clipped g and the fold's pi, all aligned.
struct TargetingData {
    std::span<const int> a;
    std::span<const double> y;
    std::span<const double> q;
    std::span<const double> g;
    std::span<const double> pi;
};

struct TargetingResult {
    Fluctuation fluctuation;
    FluctuationRecord record;
    GlmFit fit;
};

/// Slope-only logistic regression of y on H with offset clipped-logit(Q),
/// over the control observations.
TargetingResult target_clever_covariate(const TargetingData& data, double logit_clip,
                                        LossMode mode = LossMode::standard);

/// Intercept-only logistic regression with offset clipped-logit(Q) and
/// weight 1(a=0) g / (pi (1 - g)) over all observations.
TargetingResult target_weighted(const TargetingData& data, double logit_clip,
                                LossMode mode = LossMode::standard);

struct LearnerConfig {
    std::vector<LearnerSpec> candidates = default_candidates();
    std::size_t v_cv = 5;
    double propensity_lower = 0.05;
    double propensity_upper = 0.5;

    static std::vector<LearnerSpec> default_candidates();
    void validate() const;
};

struct EstimationOptions {
    double logit_clip = 1e4;
    double level = 0.95;

    void validate() const;
};

/// Per-observation initial and targeted outcome regression, on the outcome
/// scale, with the logits used to build them.
struct ObservationFit {
    std::size_t index = 0;
    std::size_t fold = 0;
    double q_initial = 0.0;
    double q_targeted = 0.0;
    double logit_initial = 0.0;
    double logit_targeted = 0.0;
};

struct NuisanceMeta {
    double clip_lower = 0.0;
    double clip_upper = 1.0;
    std::vector<std::string> q_learners;  // one per fold
    std::vector<std::string> g_learners;
    std::vector<std::string> warnings;
};

struct EstimateReport {
    EstimatorKind kind;
    double psi_hat = 0.0;
    double theta_hat = 0.0;
    std::optional<WaldInterval> psi_ci;
    std::optional<WaldInterval> theta_ci;
    std::vector<FluctuationRecord> fluctuations;
    std::vector<ObservationFit> observation_fits;
    std::optional<double> mrad;
    /// Mean EIF-weighted residual per fold (TMLE fold-wise, DML), or a single
    /// pooled entry (TMLE cp/wp).
    std::vector<double> estimating_equation_residuals;
    /// psi-EIF per observation, as used for the standard error.
    std::vector<double> eif;
    NuisanceMeta nuisance_meta;

    double max_abs_epsilon() const noexcept;
    bool any_diverged() const noexcept;
};

/// Q among out-of-fold controls, clipped g on all out-of-fold data, pi within
/// the fold. Throws EstimationDegenerate when a fold has no treated units or
/// no out-of-fold controls.
NuisanceFit fit_nuisances(const Dataset& data, const FoldPlan& plan, const LearnerConfig& config,
                          const RngStream& rng);

EstimateReport estimate_naive(const Dataset& data, const NuisanceFit& nuisance);

EstimateReport estimate_tmle(const Dataset& data, const NuisanceFit& nuisance, TmleVariant variant,
                             const EstimationOptions& options = {});

EstimateReport estimate_dml(const Dataset& data, const NuisanceFit& nuisance, bool clip_to_unit,
                            const EstimationOptions& options = {});

/// TMLE with the outcome rescaled to (y - l)/(u - l). Q is refit per fold on
/// the scaled scale with loss-based learners; g and pi come from `nuisance`.
/// `rng` must be the stream given to fit_nuisances, so that bounds [0,1]
/// reproduce the standard TMLE exactly.
EstimateReport estimate_bounded_tmle(const Dataset& data, const NuisanceFit& nuisance,
                                     const LearnerConfig& config, TmleVariant variant, QBounds bounds,
                                     const RngStream& rng, const EstimationOptions& options = {});

struct AttEstimate {
    double theta_hat = 0.0;
    std::optional<WaldInterval> theta_ci;
};

/// theta = treated outcome mean - psi, with an EIF-based interval when the
/// report carries EIF values.
AttEstimate estimate_att(const Dataset& data, const NuisanceFit& nuisance, const EstimateReport& psi_report,
                         double level = 0.95);

/// Dispatches on kind.family.
EstimateReport run_estimator(const EstimatorKind& kind, const Dataset& data, const NuisanceFit& nuisance,
                             const LearnerConfig& config, const RngStream& rng,
                             const EstimationOptions& options = {});

}  // namespace xfit
