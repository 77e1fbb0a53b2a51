#pragma once

#include <iosfwd>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "xfit/estimators.hpp"
#include "xfit/mrad.hpp"

namespace xfit {

struct DiagnosisThresholds {
    double epsilon = 10.0;
    double mrad = 10.0;
};

/// Advisory TMLE fluctuation diagnostics; never alters an estimate.
struct DiagnosisReport {
    double max_abs_epsilon = 0.0;
    bool epsilon_flag = false;
    double mrad = 0.0;
    bool mrad_flag = false;
    std::vector<std::pair<double, double>> concordance_pairs;  // (Q_i, Q*_i)
    DiagnosisThresholds thresholds;
};

bool epsilon_flagged(double max_abs_epsilon, double threshold) noexcept;
bool mrad_flagged(double mrad, double threshold) noexcept;

/// Throws InvalidArgument for reports without fluctuation records.
DiagnosisReport diagnose(const EstimateReport& report, DiagnosisThresholds thresholds = {});

/// CSV with columns observation_index,fold,q_initial,q_targeted,estimator_kind.
/// Folds are printed 1-based.
void write_concordance_header(std::ostream& out);
void write_concordance_rows(std::ostream& out, const EstimateReport& report);

}  // namespace xfit
