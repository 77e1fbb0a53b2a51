#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "xfit/dgp.hpp"
#include "xfit/diagnostics.hpp"
#include "xfit/estimators.hpp"

namespace xfit {

std::vector<EstimatorKind> default_estimators();

struct SimulationConfig {
    DgpSpec dgp;
    std::size_t reps = 200;
    std::vector<EstimatorKind> estimators = default_estimators();
    LearnerConfig learners;
    EstimationOptions estimation;
    std::size_t v_folds = 2;
    std::uint64_t master_seed = 20240601;
    int workers = 0;  // 0 = OpenMP default
    DiagnosisThresholds thresholds;
    /// Repetition whose TMLE concordance pairs are kept (for plotting).
    std::optional<std::size_t> concordance_rep = 0;

    void validate() const;
};

struct EstimatorOutcome {
    EstimatorKind kind;
    double psi_hat = 0.0;
    double theta_hat = 0.0;
    std::optional<WaldInterval> psi_ci;
    std::optional<WaldInterval> theta_ci;
    std::optional<bool> covered;      // theta_true in theta CI
    std::optional<bool> psi_covered;  // psi_true in psi CI
    bool negative = false;            // psi_hat < 0
    std::vector<FluctuationRecord> fluctuations;
    std::optional<double> mrad;
    double max_abs_epsilon = 0.0;
    bool epsilon_flag = false;
    bool mrad_flag = false;
    bool any_diverged = false;
    std::vector<double> residuals;
};

struct RepetitionResult {
    std::size_t rep = 0;
    bool degenerate = false;
    std::string degeneracy_reason;
    std::vector<EstimatorOutcome> outcomes;
    /// TMLE reports kept only for the configured concordance repetition.
    std::vector<EstimateReport> concordance_reports;
};

/// Streams: master -> rep -> {data, folds, nuisance}.
RepetitionResult run_repetition(const SimulationConfig& config, const TruthRecord& truth, std::size_t rep);

/// Repetitions in parallel (OpenMP); results ordered by rep id and identical
/// for any worker count.
std::vector<RepetitionResult> run_monte_carlo(const SimulationConfig& config, const TruthRecord& truth);

/// Plain loop over repetitions; reference for run_monte_carlo.
std::vector<RepetitionResult> run_monte_carlo_serial(const SimulationConfig& config, const TruthRecord& truth);

enum class FilterRule { none, epsilon, mrad };
enum class FilterScope { per_estimator, run_level };

struct FilterSpec {
    FilterRule rule = FilterRule::none;
    double threshold = 0.0;

    /// "none", "epsilon:T", "mrad:T".
    std::string label() const;
    static FilterSpec parse(const std::string& text);
    friend bool operator==(const FilterSpec&, const FilterSpec&) = default;
};

std::string to_string(FilterScope scope);
FilterScope filter_scope_from_string(const std::string& text);

struct EstimatorSummary {
    std::string estimator;
    std::size_t reps_used = 0;
    // theta scale
    double bias = 0.0;
    double bias_se = 0.0;
    double mse = 0.0;
    double variance = 0.0;
    std::optional<double> ci_coverage;
    std::optional<double> coverage_se;
    // psi scale
    double negative_proportion = 0.0;
    double psi_mean = 0.0;
    double psi_median = 0.0;
    double psi_bias = 0.0;
    std::optional<double> psi_ci_coverage;

    friend bool operator==(const EstimatorSummary&, const EstimatorSummary&) = default;
};

struct MonteCarloSummary {
    FilterSpec filter;
    FilterScope scope = FilterScope::run_level;
    std::size_t reps_total = 0;
    std::size_t degenerate_reps = 0;
    std::vector<EstimatorSummary> estimators;

    const EstimatorSummary& at(const std::string& estimator) const;
    friend bool operator==(const MonteCarloSummary&, const MonteCarloSummary&) = default;
};

/// A TMLE outcome is flagged when its statistic exceeds the filter threshold.
bool outcome_flagged(const EstimatorOutcome& outcome, const FilterSpec& filter);

/// Bias/MSE/coverage on the theta scale over non-degenerate repetitions that
/// survive the filter. Per-estimator scope drops only the flagged TMLE's
/// repetition; run-level scope drops the repetition for every estimator when
/// any TMLE in it is flagged. Throws SummaryError if an estimator keeps no
/// repetitions.
MonteCarloSummary summarize(const std::vector<RepetitionResult>& results, const TruthRecord& truth,
                            const FilterSpec& filter = {}, FilterScope scope = FilterScope::run_level);

}  // namespace xfit
