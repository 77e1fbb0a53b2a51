#pragma once

#include <memory>
#include <vector>

#include "xfit/data.hpp"
#include "xfit/eif.hpp"
#include "xfit/learners.hpp"

namespace xfit::testing {

class ConstantModel final : public RegressorModel {
public:
    explicit ConstantModel(double value) : value_(value) {}
    double predict(std::span<const double>) const override { return value_; }

private:
    double value_;
};

inline FittedRegressor constant_regressor(double value) {
    return FittedRegressor(std::make_shared<ConstantModel>(value), "constant");
}

/// Nuisance fit with hand-chosen per-observation Q and g; pi is the in-fold
/// treated fraction unless `pi_override` is given (one entry per fold).
inline NuisanceFit hand_nuisance(const Dataset& data, const FoldPlan& plan, std::vector<double> q,
                                 std::vector<double> g, std::vector<double> pi_override = {}) {
    NuisanceFit nf{plan, {}, std::move(q), std::move(g), 0.0, 1.0};
    for (std::size_t v = 0; v < plan.v_count(); ++v) {
        const double pi = pi_override.empty() ? treated_fraction(data, plan.in_fold(v)) : pi_override[v];
        nf.folds.push_back({constant_regressor(0.0), constant_regressor(0.0), pi, {}});
    }
    return nf;
}

inline Dataset make_dataset(const std::vector<std::vector<double>>& x, const std::vector<int>& a,
                            const std::vector<double>& y) {
    const auto n = static_cast<Eigen::Index>(x.size());
    const auto d = x.empty() ? Eigen::Index{1} : static_cast<Eigen::Index>(x.front().size());
    Eigen::MatrixXd m(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) m(i, j) = x[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    return Dataset(std::move(m), a, y);
}

/// One-column dataset with covariate 0 for every row.
inline Dataset flat_dataset(const std::vector<int>& a, const std::vector<double>& y) {
    return make_dataset(std::vector<std::vector<double>>(a.size(), std::vector<double>{0.0}), a, y);
}

}  // namespace xfit::testing
