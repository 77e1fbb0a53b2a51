#include "xfit/eif.hpp"

#include <cmath>

#include <boost/math/distributions/normal.hpp>

#include "xfit/errors.hpp"

namespace xfit {

double eif_value(double q, double g, double pi, double psi, int a, double y) {
    if (pi == 0.0) throw DivisionByZero("EIF: treated fraction pi is zero");
    if (a == 1) return (q - psi) / pi;
    if (g == 1.0) throw DivisionByZero("EIF: propensity g equals 1");
    return g / (pi * (1.0 - g)) * (y - q);
}

double att_eif_value(double pi, double treated_mean, int a, double y, double psi_eif) {
    if (pi == 0.0) throw DivisionByZero("EIF: treated fraction pi is zero");
    const double treated_part = a == 1 ? (y - treated_mean) / pi : 0.0;
    return treated_part - psi_eif;
}

double standard_error_from_eif(std::span<const double> eif) {
    if (eif.empty()) throw InvalidArgument("standard error of an empty EIF vector");
    double sum_sq = 0.0;
    for (double d : eif) sum_sq += d * d;
    const double n = static_cast<double>(eif.size());
    return std::sqrt(sum_sq / n) / std::sqrt(n);
}

std::vector<double> eif_values(const Dataset& data, const NuisanceFit& nuisance, double psi,
                               std::span<const double> q_values) {
    if (q_values.size() != data.size() || nuisance.g_own.size() != data.size()) {
        throw InvalidArgument("EIF evaluation: nuisance values do not match the dataset");
    }
    if (!std::isfinite(psi)) throw InvalidArgument("EIF evaluation: psi must be finite");
    std::vector<double> d(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        d[i] = eif_value(q_values[i], nuisance.g_own[i], nuisance.pi_own(i), psi, data.a(i), data.y(i));
    }
    return d;
}

double eif_standard_error(const Dataset& data, const NuisanceFit& nuisance, double psi, QSource source,
                          std::span<const double> targeted_q) {
    if (source == QSource::targeted && targeted_q.size() != data.size()) {
        throw InvalidArgument("targeted standard error needs one targeted Q value per observation");
    }
    const auto q = source == QSource::initial ? std::span<const double>(nuisance.q_own) : targeted_q;
    return standard_error_from_eif(eif_values(data, nuisance, psi, q));
}

double normal_quantile_two_sided(double level) {
    if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("confidence level must lie in (0,1)");
    return boost::math::quantile(boost::math::normal_distribution<double>(), 1.0 - (1.0 - level) / 2.0);
}

WaldInterval wald_interval(double estimate, double se, double level) {
    if (!(se > 0.0) || !std::isfinite(se)) throw InvalidArgument("Wald interval needs a positive standard error");
    const double z = normal_quantile_two_sided(level);
    return WaldInterval{estimate, se, estimate - z * se, estimate + z * se, level};
}

WaldInterval wald_interval_or_point(double estimate, double se, double level) {
    if (se == 0.0) {
        normal_quantile_two_sided(level);
        return WaldInterval{estimate, 0.0, estimate, estimate, level};
    }
    return wald_interval(estimate, se, level);
}

}  // namespace xfit
