#pragma once

#include <span>
#include <utility>

namespace xfit {

/// n^-1 sum_i |(q*_i - q_i) / q*_i| over (q_initial, q_targeted) pairs.
/// Throws DivisionByZero when some q_targeted is 0.
double compute_mrad(std::span<const std::pair<double, double>> q_pairs);

/// Relative absolute difference for Q = lower + scale * expit(logit), computed
/// from the logits so that targeted values that underflow to 0 in double
/// precision still give a finite (or +inf) ratio instead of 0/0.
double relative_abs_difference(double logit_initial, double logit_targeted, double lower, double scale);

}  // namespace xfit
