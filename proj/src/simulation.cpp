#include "xfit/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

#include <omp.h>

#include "xfit/errors.hpp"
#include "xfit/format.hpp"

namespace xfit {

std::vector<EstimatorKind> default_estimators() {
    return {{EstimatorFamily::dml, std::nullopt},    {EstimatorFamily::dml_cl, std::nullopt},
            {EstimatorFamily::tmle_c, std::nullopt}, {EstimatorFamily::tmle_cp, std::nullopt},
            {EstimatorFamily::tmle_w, std::nullopt}, {EstimatorFamily::tmle_wp, std::nullopt}};
}

void SimulationConfig::validate() const {
    dgp.validate();
    if (reps < 1) throw InvalidArgument("simulation needs at least one repetition");
    if (v_folds < 2) throw InvalidArgument("simulation needs at least 2 folds");
    if (estimators.empty()) throw InvalidArgument("simulation needs at least one estimator");
    for (const auto& e : estimators) e.validate();
    learners.validate();
    estimation.validate();
}

namespace {

constexpr std::uint64_t kDataStream = 1;
constexpr std::uint64_t kFoldStream = 2;
constexpr std::uint64_t kNuisanceStream = 3;

EstimatorOutcome outcome_of(const EstimateReport& r, const TruthRecord& truth, const DiagnosisThresholds& th) {
    EstimatorOutcome o;
    o.kind = r.kind;
    o.psi_hat = r.psi_hat;
    o.theta_hat = r.theta_hat;
    o.psi_ci = r.psi_ci;
    o.theta_ci = r.theta_ci;
    if (r.theta_ci) o.covered = r.theta_ci->contains(truth.theta_true);
    if (r.psi_ci) o.psi_covered = r.psi_ci->contains(truth.psi_true);
    o.negative = r.psi_hat < 0.0;
    o.fluctuations = r.fluctuations;
    o.mrad = r.mrad;
    o.max_abs_epsilon = r.max_abs_epsilon();
    o.any_diverged = r.any_diverged();
    if (r.kind.is_tmle()) {
        o.epsilon_flag = epsilon_flagged(o.max_abs_epsilon, th.epsilon);
        o.mrad_flag = r.mrad && mrad_flagged(*r.mrad, th.mrad);
    }
    o.residuals = r.estimating_equation_residuals;
    return o;
}

}  // namespace

RepetitionResult run_repetition(const SimulationConfig& config, const TruthRecord& truth, std::size_t rep) {
    RepetitionResult result;
    result.rep = rep;
    const RngStream rep_stream = RngStream{config.master_seed, 0}.substream(rep);
    try {
        const Dataset data = sample_dgp(config.dgp, rep_stream.substream(kDataStream));
        const FoldPlan plan = make_fold_plan(data.size(), config.v_folds, rep_stream.substream(kFoldStream));
        const RngStream nuisance_stream = rep_stream.substream(kNuisanceStream);
        const NuisanceFit nuisance = fit_nuisances(data, plan, config.learners, nuisance_stream);
        const bool keep_pairs = config.concordance_rep && *config.concordance_rep == rep;
        for (const auto& kind : config.estimators) {
            auto report = run_estimator(kind, data, nuisance, config.learners, nuisance_stream, config.estimation);
            result.outcomes.push_back(outcome_of(report, truth, config.thresholds));
            if (keep_pairs && kind.is_tmle()) result.concordance_reports.push_back(std::move(report));
        }
    } catch (const EstimationDegenerate& e) {
        result.degenerate = true;
        result.degeneracy_reason = e.what();
        result.outcomes.clear();
        result.concordance_reports.clear();
    } catch (const TargetingDegenerate& e) {
        result.degenerate = true;
        result.degeneracy_reason = e.what();
        result.outcomes.clear();
        result.concordance_reports.clear();
    }
    return result;
}

std::vector<RepetitionResult> run_monte_carlo(const SimulationConfig& config, const TruthRecord& truth) {
    config.validate();
    std::vector<RepetitionResult> results(config.reps);
    std::vector<std::exception_ptr> errors(config.reps);
    const int threads = config.workers > 0 ? config.workers : omp_get_max_threads();

#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
    for (std::int64_t r = 0; r < static_cast<std::int64_t>(config.reps); ++r) {
        const auto rep = static_cast<std::size_t>(r);
        try {
            results[rep] = run_repetition(config, truth, rep);
        } catch (...) {
            errors[rep] = std::current_exception();
        }
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return results;
}

std::vector<RepetitionResult> run_monte_carlo_serial(const SimulationConfig& config, const TruthRecord& truth) {
    config.validate();
    std::vector<RepetitionResult> results;
    results.reserve(config.reps);
    for (std::size_t rep = 0; rep < config.reps; ++rep) results.push_back(run_repetition(config, truth, rep));
    return results;
}

// ---------------------------------------------------------------------------
// Summaries

std::string FilterSpec::label() const {
    switch (rule) {
        case FilterRule::none: return "none";
        case FilterRule::epsilon: return "epsilon:" + format_double(threshold);
        case FilterRule::mrad: return "mrad:" + format_double(threshold);
    }
    return "none";
}

FilterSpec FilterSpec::parse(const std::string& text) {
    if (text == "none") return {};
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw InvalidArgument("filter must be none, epsilon:T or mrad:T");
    const std::string rule = text.substr(0, colon);
    double t = 0.0;
    try {
        std::size_t used = 0;
        t = std::stod(text.substr(colon + 1), &used);
        if (used != text.size() - colon - 1) throw std::invalid_argument("trailing");
    } catch (const std::logic_error&) {
        throw InvalidArgument("filter threshold is not a number: '" + text + "'");
    }
    if (std::isnan(t) || t < 0.0) throw InvalidArgument("filter threshold must be nonnegative");
    if (rule == "epsilon") return {FilterRule::epsilon, t};
    if (rule == "mrad") return {FilterRule::mrad, t};
    throw InvalidArgument("unknown filter rule '" + rule + "'");
}

std::string to_string(FilterScope scope) {
    return scope == FilterScope::per_estimator ? "per-estimator" : "run";
}

FilterScope filter_scope_from_string(const std::string& text) {
    if (text == "per-estimator" || text == "per_estimator") return FilterScope::per_estimator;
    if (text == "run" || text == "run_level" || text == "run-level") return FilterScope::run_level;
    throw InvalidArgument("filter scope must be per-estimator or run");
}

const EstimatorSummary& MonteCarloSummary::at(const std::string& estimator) const {
    for (const auto& e : estimators) {
        if (e.estimator == estimator) return e;
    }
    throw InvalidArgument("summary has no estimator '" + estimator + "'");
}

bool outcome_flagged(const EstimatorOutcome& outcome, const FilterSpec& filter) {
    if (!outcome.kind.is_tmle()) return false;
    switch (filter.rule) {
        case FilterRule::none: return false;
        case FilterRule::epsilon: return epsilon_flagged(outcome.max_abs_epsilon, filter.threshold);
        case FilterRule::mrad: return outcome.mrad && mrad_flagged(*outcome.mrad, filter.threshold);
    }
    return false;
}

MonteCarloSummary summarize(const std::vector<RepetitionResult>& results, const TruthRecord& truth,
                            const FilterSpec& filter, FilterScope scope) {
    MonteCarloSummary summary;
    summary.filter = filter;
    summary.scope = scope;
    summary.reps_total = results.size();

    std::vector<const RepetitionResult*> ordered;
    for (const auto& r : results) {
        if (r.degenerate) {
            ++summary.degenerate_reps;
        } else {
            ordered.push_back(&r);
        }
    }
    std::sort(ordered.begin(), ordered.end(), [](auto* a, auto* b) { return a->rep < b->rep; });
    if (ordered.empty()) throw SummaryError("every repetition is degenerate");

    const auto& kinds = ordered.front()->outcomes;
    for (std::size_t k = 0; k < kinds.size(); ++k) {
        EstimatorSummary s;
        s.estimator = kinds[k].kind.name();
        std::vector<double> theta_err;
        std::vector<double> psi;
        std::size_t covered = 0;
        std::size_t with_ci = 0;
        std::size_t psi_covered = 0;
        std::size_t negative = 0;
        for (const auto* rep : ordered) {
            const auto& o = rep->outcomes.at(k);
            const bool dropped =
                scope == FilterScope::per_estimator
                    ? outcome_flagged(o, filter)
                    : std::any_of(rep->outcomes.begin(), rep->outcomes.end(),
                                  [&](const EstimatorOutcome& x) { return outcome_flagged(x, filter); });
            if (dropped) continue;
            theta_err.push_back(o.theta_hat - truth.theta_true);
            psi.push_back(o.psi_hat);
            if (o.covered) {
                ++with_ci;
                covered += *o.covered ? 1 : 0;
                psi_covered += o.psi_covered.value_or(false) ? 1 : 0;
            }
            negative += o.negative ? 1 : 0;
        }
        if (theta_err.empty()) {
            throw SummaryError("no repetitions survive filter " + filter.label() + " for " + s.estimator);
        }
        const double m = static_cast<double>(theta_err.size());
        s.reps_used = theta_err.size();
        double sum = 0.0;
        double sum_sq = 0.0;
        for (double e : theta_err) {
            sum += e;
            sum_sq += e * e;
        }
        s.bias = sum / m;
        s.mse = sum_sq / m;
        double var = 0.0;
        for (double e : theta_err) var += (e - s.bias) * (e - s.bias);
        s.variance = var / m;
        s.bias_se = theta_err.size() > 1 ? std::sqrt(var / (m - 1.0) / m) : 0.0;
        if (with_ci > 0) {
            const double c = static_cast<double>(covered) / static_cast<double>(with_ci);
            s.ci_coverage = c;
            s.coverage_se = std::sqrt(c * (1.0 - c) / static_cast<double>(with_ci));
            s.psi_ci_coverage = static_cast<double>(psi_covered) / static_cast<double>(with_ci);
        }
        s.negative_proportion = static_cast<double>(negative) / m;
        double psi_sum = 0.0;
        for (double p : psi) psi_sum += p;
        s.psi_mean = psi_sum / m;
        s.psi_bias = s.psi_mean - truth.psi_true;
        std::vector<double> sorted = psi;
        std::sort(sorted.begin(), sorted.end());
        const std::size_t mid = sorted.size() / 2;
        s.psi_median = sorted.size() % 2 == 1 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
        summary.estimators.push_back(std::move(s));
    }
    return summary;
}

}  // namespace xfit
