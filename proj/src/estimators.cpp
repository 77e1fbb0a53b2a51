#include "xfit/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "xfit/errors.hpp"
#include "xfit/format.hpp"
#include "xfit/logistic.hpp"
#include "xfit/mrad.hpp"

namespace xfit {

// ---------------------------------------------------------------------------
// Estimator kinds

void QBounds::validate() const {
    if (!(lower >= 0.0 && lower < upper && upper <= 1.0)) {
        throw InvalidArgument("outcome-regression bounds must satisfy 0 <= l < u <= 1");
    }
}

std::string family_name(EstimatorFamily family) {
    switch (family) {
        case EstimatorFamily::naive: return "naive";
        case EstimatorFamily::tmle_c: return "tmle_c";
        case EstimatorFamily::tmle_w: return "tmle_w";
        case EstimatorFamily::tmle_cp: return "tmle_cp";
        case EstimatorFamily::tmle_wp: return "tmle_wp";
        case EstimatorFamily::dml: return "dml";
        case EstimatorFamily::dml_cl: return "dml_cl";
        case EstimatorFamily::tmle_c_trans: return "tmle_c_trans";
        case EstimatorFamily::tmle_w_trans: return "tmle_w_trans";
        case EstimatorFamily::tmle_cp_trans: return "tmle_cp_trans";
        case EstimatorFamily::tmle_wp_trans: return "tmle_wp_trans";
    }
    return "unknown";
}

bool EstimatorKind::is_trans() const noexcept {
    switch (family) {
        case EstimatorFamily::tmle_c_trans:
        case EstimatorFamily::tmle_w_trans:
        case EstimatorFamily::tmle_cp_trans:
        case EstimatorFamily::tmle_wp_trans: return true;
        default: return false;
    }
}

bool EstimatorKind::is_tmle() const noexcept {
    switch (family) {
        case EstimatorFamily::tmle_c:
        case EstimatorFamily::tmle_w:
        case EstimatorFamily::tmle_cp:
        case EstimatorFamily::tmle_wp: return true;
        default: return is_trans();
    }
}

TmleVariant EstimatorKind::variant() const {
    switch (family) {
        case EstimatorFamily::tmle_c:
        case EstimatorFamily::tmle_c_trans: return TmleVariant::c;
        case EstimatorFamily::tmle_w:
        case EstimatorFamily::tmle_w_trans: return TmleVariant::w;
        case EstimatorFamily::tmle_cp:
        case EstimatorFamily::tmle_cp_trans: return TmleVariant::cp;
        case EstimatorFamily::tmle_wp:
        case EstimatorFamily::tmle_wp_trans: return TmleVariant::wp;
        default: throw InvalidArgument(family_name(family) + " is not a TMLE");
    }
}

void EstimatorKind::validate() const {
    if (is_trans()) {
        if (!q_bounds) throw InvalidArgument(family_name(family) + " requires q_bounds");
        q_bounds->validate();
    } else if (q_bounds) {
        throw InvalidArgument(family_name(family) + " does not take q_bounds");
    }
}

std::string EstimatorKind::name() const {
    std::string s = family_name(family);
    if (q_bounds) s += "[" + format_double(q_bounds->lower) + ":" + format_double(q_bounds->upper) + "]";
    return s;
}

EstimatorKind EstimatorKind::parse(const std::string& text) {
    std::string base = text;
    std::optional<QBounds> bounds;
    if (const auto open = text.find('['); open != std::string::npos) {
        const auto colon = text.find(':', open);
        if (text.back() != ']' || colon == std::string::npos) {
            throw InvalidArgument("malformed estimator bounds in '" + text + "'");
        }
        base = text.substr(0, open);
        try {
            bounds = QBounds{std::stod(text.substr(open + 1, colon - open - 1)),
                             std::stod(text.substr(colon + 1, text.size() - colon - 2))};
        } catch (const std::logic_error&) {
            throw InvalidArgument("malformed estimator bounds in '" + text + "'");
        }
    }
    for (int f = 0; f <= static_cast<int>(EstimatorFamily::tmle_wp_trans); ++f) {
        const auto family = static_cast<EstimatorFamily>(f);
        if (family_name(family) == base) {
            EstimatorKind kind{family, bounds};
            if (!kind.is_trans() && bounds) throw InvalidArgument(base + " does not take bounds");
            if (bounds) bounds->validate();
            return kind;
        }
    }
    throw InvalidArgument("unknown estimator kind '" + base + "'");
}

std::string to_string(TargetingMode mode) {
    return mode == TargetingMode::clever_covariate ? "clever_covariate" : "weighted";
}

// ---------------------------------------------------------------------------
// Targeting

double Fluctuation::offset(double q) const noexcept {
    return std::clamp(logit(q), -logit_clip, logit_clip);
}

double Fluctuation::covariate(double g, double pi) const {
    if (mode == TargetingMode::weighted) return 1.0;
    if (pi == 0.0 || g == 1.0) throw DivisionByZero("clever covariate: pi = 0 or g = 1");
    return g / (pi * (1.0 - g));
}

double Fluctuation::apply(double q, double g, double pi) const { return expit(targeted_logit(q, g, pi)); }

namespace {

double clever_weight(double g, double pi) {
    if (pi == 0.0 || g == 1.0) throw DivisionByZero("targeting weight: pi = 0 or g = 1");
    return g / (pi * (1.0 - g));
}

void check_targeting_data(const TargetingData& d) {
    const std::size_t n = d.a.size();
    if (d.y.size() != n || d.q.size() != n || d.g.size() != n || d.pi.size() != n) {
        throw InvalidArgument("targeting inputs have mismatched lengths");
    }
}

GlmFit run_targeting_glm(std::span<const double> y, const Eigen::MatrixXd& design, std::span<const double> offsets,
                         std::span<const double> weights, bool intercept, LossMode mode) {
    GlmSpec spec;
    spec.include_intercept = intercept;
    spec.design_columns = static_cast<std::size_t>(design.cols());
    return mode == LossMode::standard ? fit_glm_logistic(y, design, offsets, weights, spec)
                                      : scaled_logistic_fit(y, design, offsets, weights, spec);
}

}  // namespace

TargetingResult target_clever_covariate(const TargetingData& data, double logit_clip, LossMode mode) {
    check_targeting_data(data);
    Fluctuation fl{TargetingMode::clever_covariate, 0.0, logit_clip};
    std::vector<double> y;
    std::vector<double> offsets;
    std::vector<double> h;
    for (std::size_t i = 0; i < data.a.size(); ++i) {
        if (data.a[i] != 0) continue;
        y.push_back(data.y[i]);
        offsets.push_back(fl.offset(data.q[i]));
        h.push_back(fl.covariate(data.g[i], data.pi[i]));
    }
    if (y.empty()) throw TargetingDegenerate("clever-covariate targeting: no control observations");
    const Eigen::MatrixXd design = Eigen::Map<const Eigen::VectorXd>(h.data(), static_cast<Eigen::Index>(h.size()));
    const std::vector<double> ones(y.size(), 1.0);
    GlmFit fit = run_targeting_glm(y, design, offsets, ones, false, mode);
    fl.epsilon = fit.coefficients[0];
    return TargetingResult{fl, FluctuationRecord{std::nullopt, fl.epsilon, fit.diverged, fl.mode}, std::move(fit)};
}

TargetingResult target_weighted(const TargetingData& data, double logit_clip, LossMode mode) {
    check_targeting_data(data);
    Fluctuation fl{TargetingMode::weighted, 0.0, logit_clip};
    const std::size_t n = data.a.size();
    std::vector<double> offsets(n);
    std::vector<double> weights(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        offsets[i] = fl.offset(data.q[i]);
        weights[i] = data.a[i] == 0 ? clever_weight(data.g[i], data.pi[i]) : 0.0;
        total += weights[i];
    }
    if (!(total > 0.0)) throw TargetingDegenerate("weighted targeting: total weight is zero");
    const Eigen::MatrixXd design(static_cast<Eigen::Index>(n), 0);
    GlmFit fit = run_targeting_glm(data.y, design, offsets, weights, true, mode);
    fl.epsilon = fit.coefficients[0];
    return TargetingResult{fl, FluctuationRecord{std::nullopt, fl.epsilon, fit.diverged, fl.mode}, std::move(fit)};
}

// ---------------------------------------------------------------------------
// Configuration

std::vector<LearnerSpec> LearnerConfig::default_candidates() {
    return {LearnerSpec::logistic(), LearnerSpec::boosted(100, 1, 0.1), LearnerSpec::boosted(100, 2, 0.05),
            LearnerSpec::knn(25), LearnerSpec::constant()};
}

void LearnerConfig::validate() const {
    if (candidates.empty()) throw InvalidArgument("learner config needs at least one candidate");
    for (const auto& c : candidates) c.validate();
    if (v_cv < 2) throw InvalidArgument("super learner v_cv must be at least 2");
    clip_propensity(0.0, propensity_lower, propensity_upper);
    if (propensity_upper >= 1.0) throw InvalidArgument("propensity upper clip must be below 1");
}

void EstimationOptions::validate() const {
    if (!(logit_clip > 0.0)) throw InvalidArgument("logit clip bound must be positive");
    if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("confidence level must lie in (0,1)");
}

double EstimateReport::max_abs_epsilon() const noexcept {
    double m = 0.0;
    for (const auto& f : fluctuations) m = std::max(m, std::abs(f.epsilon));
    return m;
}

bool EstimateReport::any_diverged() const noexcept {
    return std::any_of(fluctuations.begin(), fluctuations.end(), [](const auto& f) { return f.diverged; });
}

// ---------------------------------------------------------------------------
// Nuisances

namespace {

constexpr std::uint64_t kOutcomeStream = 1;
constexpr std::uint64_t kPropensityStream = 2;

std::vector<double> gather(std::span<const double> values, std::span<const std::size_t> idx) {
    std::vector<double> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(values[i]);
    return out;
}

std::vector<std::size_t> controls_among(const Dataset& data, std::span<const std::size_t> idx) {
    std::vector<std::size_t> out;
    for (std::size_t i : idx) {
        if (data.a(i) == 0) out.push_back(i);
    }
    return out;
}

void require_treated_in_every_fold(const Dataset& data, const FoldPlan& plan) {
    for (std::size_t v = 0; v < plan.v_count(); ++v) {
        const auto in = plan.in_fold(v);
        if (std::none_of(in.begin(), in.end(), [&](std::size_t i) { return data.a(i) == 1; })) {
            throw EstimationDegenerate(v, "fold " + std::to_string(v + 1) + " has no treated observations");
        }
    }
}

NuisanceMeta meta_of(const NuisanceFit& nuisance) {
    NuisanceMeta meta;
    meta.clip_lower = nuisance.clip_lower;
    meta.clip_upper = nuisance.clip_upper;
    for (const auto& f : nuisance.folds) {
        meta.q_learners.push_back(f.q.description());
        meta.g_learners.push_back(f.g.description());
        meta.warnings.insert(meta.warnings.end(), f.warnings.begin(), f.warnings.end());
    }
    return meta;
}

}  // namespace

NuisanceFit fit_nuisances(const Dataset& data, const FoldPlan& plan, const LearnerConfig& config,
                          const RngStream& rng) {
    config.validate();
    if (plan.size() != data.size()) throw InvalidArgument("fold plan does not match the dataset size");
    require_treated_in_every_fold(data, plan);

    std::vector<double> a_real(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) a_real[i] = data.a(i);

    NuisanceFit nf{plan, {}, std::vector<double>(data.size()), std::vector<double>(data.size()),
                   config.propensity_lower, config.propensity_upper};
    nf.folds.reserve(plan.v_count());
    for (std::size_t v = 0; v < plan.v_count(); ++v) {
        const auto out = plan.out_of_fold(v);
        const auto controls = controls_among(data, out);
        if (controls.empty()) {
            throw EstimationDegenerate(v, "no control observations outside fold " + std::to_string(v + 1));
        }
        auto q_fit = discrete_super_learner(config.candidates, data.covariate_rows(controls),
                                            gather(data.outcome(), controls), config.v_cv,
                                            rng.substream(kOutcomeStream).substream(v));
        auto g_fit = discrete_super_learner(config.candidates, data.covariate_rows(out), gather(a_real, out),
                                            config.v_cv, rng.substream(kPropensityStream).substream(v));
        std::vector<std::string> warnings = q_fit.warnings;
        warnings.insert(warnings.end(), g_fit.warnings.begin(), g_fit.warnings.end());
        nf.folds.push_back(FoldNuisance{
            std::move(q_fit.regressor),
            clip_regressor(std::move(g_fit.regressor), config.propensity_lower, config.propensity_upper),
            treated_fraction(data, plan.in_fold(v)), std::move(warnings)});
    }

    std::vector<double> row(data.dim());
    for (std::size_t i = 0; i < data.size(); ++i) {
        for (std::size_t j = 0; j < data.dim(); ++j) {
            row[j] = data.covariates()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        }
        const auto& f = nf.folds[plan.fold_of(i)];
        nf.q_own[i] = f.q.predict(row);
        nf.g_own[i] = f.g.predict(row);
    }
    return nf;
}

// ---------------------------------------------------------------------------
// Estimators

namespace {

struct FoldAverages {
    std::vector<double> per_fold;
    double cross_fit = 0.0;
};

// psi_v = treated mean of `values` within fold v; cross-fit = n^-1 sum |I_v| psi_v.
FoldAverages treated_fold_means(const Dataset& data, const FoldPlan& plan, std::span<const double> values) {
    FoldAverages out;
    double total = 0.0;
    for (std::size_t v = 0; v < plan.v_count(); ++v) {
        double sum = 0.0;
        std::size_t treated = 0;
        for (std::size_t i : plan.in_fold(v)) {
            if (data.a(i) != 1) continue;
            sum += values[i];
            ++treated;
        }
        if (treated == 0) {
            throw EstimationDegenerate(v, "fold " + std::to_string(v + 1) + " has no treated observations");
        }
        const double psi_v = sum / static_cast<double>(treated);
        out.per_fold.push_back(psi_v);
        total += static_cast<double>(plan.in_fold(v).size()) * psi_v;
    }
    out.cross_fit = total / static_cast<double>(data.size());
    return out;
}

double treated_outcome_mean(const Dataset& data) {
    double sum = 0.0;
    std::size_t treated = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (data.a(i) != 1) continue;
        sum += data.y(i);
        ++treated;
    }
    if (treated == 0) throw InvalidArgument("ATT needs at least one treated observation");
    return sum / static_cast<double>(treated);
}

void finish_report(EstimateReport& report, const Dataset& data, const NuisanceFit& nuisance,
                   std::span<const double> q_for_eif, double psi_for_eif, double level, bool with_ci) {
    report.nuisance_meta = meta_of(nuisance);
    if (with_ci) {
        report.eif = eif_values(data, nuisance, psi_for_eif, q_for_eif);
        report.psi_ci = wald_interval_or_point(report.psi_hat, standard_error_from_eif(report.eif), level);
    }
    const AttEstimate att = estimate_att(data, nuisance, report, level);
    report.theta_hat = att.theta_hat;
    report.theta_ci = att.theta_ci;
}

// Shared by the standard and bounded TMLEs: `y_fit` and `q_fit` live on the
// targeting scale; Q on the outcome scale is lower + scale * Q_fit.
EstimateReport tmle_core(const Dataset& data, const NuisanceFit& nuisance, std::span<const double> y_fit,
                         std::span<const double> q_fit, TmleVariant variant, double lower, double scale,
                         LossMode mode, const EstimationOptions& options, EstimatorKind kind) {
    options.validate();
    const FoldPlan& plan = nuisance.plan;
    const std::size_t n = data.size();
    const bool clever = variant == TmleVariant::c || variant == TmleVariant::cp;
    const bool pooled = variant == TmleVariant::cp || variant == TmleVariant::wp;
    const auto target = [&](const TargetingData& td) {
        return clever ? target_clever_covariate(td, options.logit_clip, mode)
                      : target_weighted(td, options.logit_clip, mode);
    };

    std::vector<double> pi(n);
    for (std::size_t i = 0; i < n; ++i) pi[i] = nuisance.pi_own(i);

    EstimateReport report;
    report.kind = kind;
    report.observation_fits.resize(n);
    std::vector<double> q_star(n);

    const auto fill = [&](std::size_t i, const Fluctuation& fl) {
        auto& o = report.observation_fits[i];
        o.index = i;
        o.fold = plan.fold_of(i);
        o.logit_initial = fl.offset(q_fit[i]);
        o.logit_targeted = fl.targeted_logit(q_fit[i], nuisance.g_own[i], pi[i]);
        // clamped so rounding cannot leave [lower, lower + scale]
        o.q_initial = std::min(lower + scale * q_fit[i], lower + scale);
        o.q_targeted = std::min(lower + scale * expit(o.logit_targeted), lower + scale);
        q_star[i] = o.q_targeted;
    };
    const auto weighted_residual = [&](std::span<const std::size_t> idx) {
        double sum = 0.0;
        for (std::size_t i : idx) {
            if (data.a(i) == 0) sum += clever_weight(nuisance.g_own[i], pi[i]) * (data.y(i) - q_star[i]);
        }
        return sum / static_cast<double>(idx.size());
    };

    if (!pooled) {
        for (std::size_t v = 0; v < plan.v_count(); ++v) {
            const auto idx = plan.in_fold(v);
            std::vector<int> a;
            for (std::size_t i : idx) a.push_back(data.a(i));
            const auto yv = gather(y_fit, idx);
            const auto qv = gather(q_fit, idx);
            const auto gv = gather(nuisance.g_own, idx);
            const auto pv = gather(pi, idx);
            auto res = target(TargetingData{a, yv, qv, gv, pv});
            res.record.fold = v;
            report.fluctuations.push_back(res.record);
            for (std::size_t i : idx) fill(i, res.fluctuation);
            report.estimating_equation_residuals.push_back(weighted_residual(idx));
        }
        report.psi_hat = treated_fold_means(data, plan, q_star).cross_fit;
    } else {
        auto res = target(TargetingData{data.treatment(), y_fit, q_fit, nuisance.g_own, pi});
        report.fluctuations.push_back(res.record);
        for (std::size_t i = 0; i < n; ++i) fill(i, res.fluctuation);
        std::vector<std::size_t> all(n);
        for (std::size_t i = 0; i < n; ++i) all[i] = i;
        report.estimating_equation_residuals.push_back(weighted_residual(all));
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (data.a(i) == 1) sum += q_star[i];
        }
        report.psi_hat = sum / static_cast<double>(data.treated_count());
    }
    // an average of values in [lower, lower + scale] can round past either end
    report.psi_hat = std::clamp(report.psi_hat, lower, lower + scale);

    double mrad = 0.0;
    for (const auto& o : report.observation_fits) {
        mrad += relative_abs_difference(o.logit_initial, o.logit_targeted, lower, scale);
    }
    report.mrad = mrad / static_cast<double>(n);

    finish_report(report, data, nuisance, q_star, report.psi_hat, options.level, true);
    return report;
}

EstimatorFamily tmle_family(TmleVariant v, bool trans) {
    switch (v) {
        case TmleVariant::c: return trans ? EstimatorFamily::tmle_c_trans : EstimatorFamily::tmle_c;
        case TmleVariant::w: return trans ? EstimatorFamily::tmle_w_trans : EstimatorFamily::tmle_w;
        case TmleVariant::cp: return trans ? EstimatorFamily::tmle_cp_trans : EstimatorFamily::tmle_cp;
        case TmleVariant::wp: return trans ? EstimatorFamily::tmle_wp_trans : EstimatorFamily::tmle_wp;
    }
    return EstimatorFamily::tmle_c;
}

}  // namespace

EstimateReport estimate_naive(const Dataset& data, const NuisanceFit& nuisance) {
    EstimateReport report;
    report.kind = EstimatorKind{EstimatorFamily::naive, std::nullopt};
    report.psi_hat = treated_fold_means(data, nuisance.plan, nuisance.q_own).cross_fit;
    finish_report(report, data, nuisance, nuisance.q_own, report.psi_hat, 0.95, false);
    return report;
}

EstimateReport estimate_tmle(const Dataset& data, const NuisanceFit& nuisance, TmleVariant variant,
                             const EstimationOptions& options) {
    return tmle_core(data, nuisance, data.outcome(), nuisance.q_own, variant, 0.0, 1.0, LossMode::standard,
                     options, EstimatorKind{tmle_family(variant, false), std::nullopt});
}

EstimateReport estimate_dml(const Dataset& data, const NuisanceFit& nuisance, bool clip_to_unit,
                            const EstimationOptions& options) {
    options.validate();
    const FoldPlan& plan = nuisance.plan;
    const auto naive = treated_fold_means(data, plan, nuisance.q_own);

    EstimateReport report;
    report.kind = EstimatorKind{clip_to_unit ? EstimatorFamily::dml_cl : EstimatorFamily::dml, std::nullopt};
    double total = 0.0;
    std::vector<double> psi_fold(plan.v_count());
    for (std::size_t v = 0; v < plan.v_count(); ++v) {
        const auto idx = plan.in_fold(v);
        double correction = 0.0;
        for (std::size_t i : idx) {
            if (data.a(i) != 0) continue;
            correction += clever_weight(nuisance.g_own[i], nuisance.pi_own(i)) * (data.y(i) - nuisance.q_own[i]);
        }
        psi_fold[v] = naive.per_fold[v] + correction / static_cast<double>(idx.size());
        total += static_cast<double>(idx.size()) * psi_fold[v];
    }
    const double psi = total / static_cast<double>(data.size());
    report.psi_hat = clip_to_unit ? std::min(std::max(psi, 0.0), 1.0) : psi;

    for (std::size_t v = 0; v < plan.v_count(); ++v) {
        const auto idx = plan.in_fold(v);
        double sum = 0.0;
        for (std::size_t i : idx) {
            sum += eif_value(nuisance.q_own[i], nuisance.g_own[i], nuisance.pi_own(i), psi_fold[v], data.a(i),
                             data.y(i));
        }
        report.estimating_equation_residuals.push_back(sum / static_cast<double>(idx.size()));
    }
    // dml_cl keeps the unclipped EIF, centered at the clipped estimate
    finish_report(report, data, nuisance, nuisance.q_own, psi, options.level, true);
    return report;
}

EstimateReport estimate_bounded_tmle(const Dataset& data, const NuisanceFit& nuisance,
                                     const LearnerConfig& config, TmleVariant variant, QBounds bounds,
                                     const RngStream& rng, const EstimationOptions& options) {
    bounds.validate();
    config.validate();
    std::vector<LearnerSpec> candidates;
    for (const auto& c : config.candidates) {
        if (c.supports(LossMode::scaled)) candidates.push_back(c);
    }
    if (candidates.empty()) throw InvalidArgument("no candidate learner supports the scaled logistic loss");

    const double scale = bounds.upper - bounds.lower;
    std::vector<double> y_scaled(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) y_scaled[i] = (data.y(i) - bounds.lower) / scale;

    const FoldPlan& plan = nuisance.plan;
    std::vector<double> q_scaled(data.size());
    std::vector<double> row(data.dim());
    for (std::size_t v = 0; v < plan.v_count(); ++v) {
        const auto controls = controls_among(data, plan.out_of_fold(v));
        if (controls.empty()) {
            throw EstimationDegenerate(v, "no control observations outside fold " + std::to_string(v + 1));
        }
        const auto fit = discrete_super_learner(candidates, data.covariate_rows(controls),
                                                gather(y_scaled, controls), config.v_cv,
                                                rng.substream(kOutcomeStream).substream(v), LossMode::scaled);
        for (std::size_t i : plan.in_fold(v)) {
            for (std::size_t j = 0; j < data.dim(); ++j) {
                row[j] = data.covariates()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            }
            q_scaled[i] = fit.regressor.predict(row);
        }
    }
    return tmle_core(data, nuisance, y_scaled, q_scaled, variant, bounds.lower, scale, LossMode::scaled, options,
                     EstimatorKind{tmle_family(variant, true), bounds});
}

AttEstimate estimate_att(const Dataset& data, const NuisanceFit& nuisance, const EstimateReport& psi_report,
                         double level) {
    const double treated_mean = treated_outcome_mean(data);
    AttEstimate out;
    out.theta_hat = treated_mean - psi_report.psi_hat;
    if (psi_report.eif.size() == data.size()) {
        std::vector<double> d(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) {
            d[i] = att_eif_value(nuisance.pi_own(i), treated_mean, data.a(i), data.y(i), psi_report.eif[i]);
        }
        out.theta_ci = wald_interval_or_point(out.theta_hat, standard_error_from_eif(d), level);
    }
    return out;
}

EstimateReport run_estimator(const EstimatorKind& kind, const Dataset& data, const NuisanceFit& nuisance,
                             const LearnerConfig& config, const RngStream& rng, const EstimationOptions& options) {
    kind.validate();
    switch (kind.family) {
        case EstimatorFamily::naive: return estimate_naive(data, nuisance);
        case EstimatorFamily::dml: return estimate_dml(data, nuisance, false, options);
        case EstimatorFamily::dml_cl: return estimate_dml(data, nuisance, true, options);
        default: break;
    }
    if (kind.is_trans()) {
        return estimate_bounded_tmle(data, nuisance, config, kind.variant(), *kind.q_bounds, rng, options);
    }
    return estimate_tmle(data, nuisance, kind.variant(), options);
}

}  // namespace xfit
