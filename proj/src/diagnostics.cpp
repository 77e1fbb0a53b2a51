#include "xfit/diagnostics.hpp"

#include <cmath>
#include <ostream>

#include "xfit/errors.hpp"
#include "xfit/format.hpp"
#include "xfit/logistic.hpp"

namespace xfit {

double compute_mrad(std::span<const std::pair<double, double>> q_pairs) {
    if (q_pairs.empty()) throw InvalidArgument("MRAD of an empty list");
    double sum = 0.0;
    for (const auto& [q, q_star] : q_pairs) {
        if (q_star == 0.0) throw DivisionByZero("MRAD: targeted value is zero");
        sum += std::abs((q_star - q) / q_star);
    }
    return sum / static_cast<double>(q_pairs.size());
}

double relative_abs_difference(double logit_initial, double logit_targeted, double lower, double scale) {
    if (logit_initial == logit_targeted) return 0.0;
    if (lower > 0.0) {
        const double q = lower + scale * expit(logit_initial);
        const double q_star = lower + scale * expit(logit_targeted);
        return std::abs((q_star - q) / q_star);
    }
    // Q/Q* = expit(a)/expit(b); log expit(t) = -softplus(-t).
    const double log_ratio = softplus(-logit_targeted) - softplus(-logit_initial);
    return std::abs(1.0 - std::exp(log_ratio));
}

bool epsilon_flagged(double max_abs_epsilon, double threshold) noexcept { return max_abs_epsilon > threshold; }
bool mrad_flagged(double mrad, double threshold) noexcept { return mrad > threshold; }

DiagnosisReport diagnose(const EstimateReport& report, DiagnosisThresholds thresholds) {
    if (!report.kind.is_tmle() || report.fluctuations.empty() || !report.mrad) {
        throw InvalidArgument("diagnose: " + report.kind.name() + " is not a TMLE report");
    }
    DiagnosisReport d;
    d.thresholds = thresholds;
    d.max_abs_epsilon = report.max_abs_epsilon();
    d.epsilon_flag = epsilon_flagged(d.max_abs_epsilon, thresholds.epsilon);
    d.mrad = *report.mrad;
    d.mrad_flag = mrad_flagged(d.mrad, thresholds.mrad);
    d.concordance_pairs.reserve(report.observation_fits.size());
    for (const auto& o : report.observation_fits) d.concordance_pairs.emplace_back(o.q_initial, o.q_targeted);
    return d;
}

void write_concordance_header(std::ostream& out) {
    out << "observation_index,fold,q_initial,q_targeted,estimator_kind\n";
}

void write_concordance_rows(std::ostream& out, const EstimateReport& report) {
    const std::string kind = report.kind.name();
    for (const auto& o : report.observation_fits) {
        out << o.index << ',' << (o.fold + 1) << ',' << format_double(o.q_initial) << ','
            << format_double(o.q_targeted) << ',' << kind << '\n';
    }
}

}  // namespace xfit
