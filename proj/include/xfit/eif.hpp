#pragma once

#include <span>
#include <string>
#include <vector>

#include "xfit/data.hpp"
#include "xfit/learners.hpp"

namespace xfit {

struct FoldNuisance {
    FittedRegressor q;  // outcome regression among controls, fit out of fold
    FittedRegressor g;  // clipped propensity score, fit out of fold
    double pi = 0.0;    // treated fraction within the fold
    std::vector<std::string> warnings;
};

/// Cross-fitted nuisance estimates plus their evaluations at every
/// observation using that observation's own fold.
struct NuisanceFit {
    FoldPlan plan;
    std::vector<FoldNuisance> folds;
    std::vector<double> q_own;
    std::vector<double> g_own;
    double clip_lower = 0.0;
    double clip_upper = 1.0;

    double pi_own(std::size_t i) const { return folds.at(plan.fold_of(i)).pi; }
};

struct WaldInterval {
    double estimate = 0.0;
    double standard_error = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    double level = 0.95;

    bool contains(double value) const noexcept { return lower <= value && value <= upper; }
};

/// D(Q,g,pi,psi)(x,a,y) for a single observation.
double eif_value(double q, double g, double pi, double psi, int a, double y);

/// Efficient influence function of theta = E[Y|A=1] - psi for one observation,
/// given the treated outcome mean and that observation's psi-EIF value.
double att_eif_value(double pi, double treated_mean, int a, double y, double psi_eif);

/// {n^-1 sum D_i^2}^{1/2} / sqrt(n).
double standard_error_from_eif(std::span<const double> eif);

/// psi-EIF at every observation, using own-fold g and pi and the supplied
/// outcome-regression values (initial or targeted).
std::vector<double> eif_values(const Dataset& data, const NuisanceFit& nuisance, double psi,
                               std::span<const double> q_values);

enum class QSource { initial, targeted };

/// EIF-based standard error. `targeted_q` is required (one value per
/// observation) when `source` is targeted and ignored otherwise.
double eif_standard_error(const Dataset& data, const NuisanceFit& nuisance, double psi, QSource source,
                          std::span<const double> targeted_q = {});

/// (1 - (1-level)/2) quantile of the standard normal.
double normal_quantile_two_sided(double level);

/// estimate -/+ z * se; not truncated to any parameter range.
WaldInterval wald_interval(double estimate, double se, double level);

/// wald_interval, except that se == 0 yields the zero-width interval.
WaldInterval wald_interval_or_point(double estimate, double se, double level);

}  // namespace xfit
