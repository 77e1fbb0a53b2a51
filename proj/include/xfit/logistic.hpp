#pragma once

#include <cmath>

namespace xfit {

inline double expit(double eta) noexcept {
    if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
    const double e = std::exp(eta);
    return e / (1.0 + e);
}

/// logit(0) = -inf and logit(1) = +inf.
inline double logit(double p) noexcept { return std::log(p) - std::log1p(-p); }

/// log(1 + exp(eta)) without overflow.
inline double softplus(double eta) noexcept {
    return eta > 0.0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
}

}  // namespace xfit
