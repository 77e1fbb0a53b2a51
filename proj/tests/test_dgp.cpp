#include <doctest.h>

#include <cmath>
#include <limits>

#include "xfit/dgp.hpp"
#include "xfit/errors.hpp"

using namespace xfit;

namespace {

double expit_ref(double t) { return 1.0 / (1.0 + std::exp(-t)); }

// E[expit(c + s S)] with S the sum of three Unif(-1,1): integrate against the
// piecewise-quadratic density of S with a fine midpoint rule.
double mean_over_sum_of_uniforms(double c, double s) {
    auto density = [](double t) {
        const double u = (t + 3.0) / 2.0;  // Irwin-Hall on [0,3], rescaled by 1/2
        double f = 0.0;
        if (u < 1.0) {
            f = u * u / 2.0;
        } else if (u < 2.0) {
            f = (-2.0 * u * u + 6.0 * u - 3.0) / 2.0;
        } else {
            f = (3.0 - u) * (3.0 - u) / 2.0;
        }
        return f / 2.0;
    };
    const int m = 600000;
    const double h = 6.0 / m;
    double sum = 0.0;
    for (int k = 0; k < m; ++k) {
        const double t = -3.0 + (k + 0.5) * h;
        sum += density(t) * expit_ref(c + s * t);
    }
    return sum * h;
}

}  // namespace

TEST_CASE("treated rows never have the outcome") {
    DgpSpec spec;
    spec.n = 20000;
    const auto d = sample_dgp(spec, {1, 1});
    std::size_t treated = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (d.a(i) == 1) {
            ++treated;
            CHECK(d.y(i) == 0.0);
        }
        for (std::size_t j = 0; j < 3; ++j) {
            const double x = d.covariates()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            REQUIRE(x >= -1.0);
            REQUIRE(x < 1.0);
        }
    }
    CHECK(treated > 0);
}

TEST_CASE("sampling is deterministic given the stream") {
    DgpSpec spec;
    spec.n = 50;
    const auto a = sample_dgp(spec, {3, 3});
    const auto b = sample_dgp(spec, {3, 3});
    const auto c = sample_dgp(spec, {3, 4});
    CHECK(a.covariates() == b.covariates());
    CHECK(a.covariates() != c.covariates());
}

TEST_CASE("empirical marginals agree with quadrature within 4 standard errors") {
    DgpSpec spec;
    spec.n = 200000;
    const auto d = sample_dgp(spec, {2024, 0});
    double treated = 0.0;
    double control_events = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        treated += d.a(i);
        if (d.a(i) == 0) control_events += d.y(i);
    }
    const double n = static_cast<double>(d.size());
    const auto m = dgp_marginals(spec);
    const double pa = treated / n;
    CHECK(std::abs(pa - m.pr_treated) <= 4.0 * std::sqrt(m.pr_treated * (1 - m.pr_treated) / n));
    const double controls = n - treated;
    const double py = control_events / controls;
    CHECK(std::abs(py - m.pr_outcome_given_control) <=
          4.0 * std::sqrt(m.pr_outcome_given_control * (1 - m.pr_outcome_given_control) / controls));
    // target prevalences 19.8% and 1.01%
    CHECK(m.pr_treated == doctest::Approx(0.198).epsilon(0.002 / 0.198));
    CHECK(std::abs(m.pr_outcome_given_control - 0.0101) < 0.0005);
}

TEST_CASE("quadrature truth") {
    DgpSpec spec;
    const auto t = compute_truth(spec);
    CHECK(t.method == TruthMethod::quadrature);
    CHECK(t.theta_true == -t.psi_true);
    CHECK(std::abs(t.psi_true - 0.0101) < 1e-4);
    CHECK(t.precision_estimate < 1e-12);
}

TEST_CASE("truth with a vanishing outcome intercept collapses to zero") {
    DgpSpec spec;
    spec.outcome_intercept = -60.0;
    CHECK(compute_truth(spec).psi_true < 1e-25);
}

TEST_CASE("truth without treatment slopes reduces to a one-dimensional integral") {
    DgpSpec spec;
    spec.treatment_slopes = {0.0, 0.0, 0.0};
    const double expected = mean_over_sum_of_uniforms(spec.outcome_intercept, spec.outcome_slope_scale);
    CHECK(compute_truth(spec).psi_true == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("oracle Monte Carlo agrees with quadrature and its serial reference") {
    DgpSpec spec;
    const auto q = compute_truth(spec);
    const std::uint64_t draws = 1'000'000;
    const auto par = oracle_truth(spec, draws, {99, 0}, 3);
    const auto ser = oracle_truth_serial(spec, draws, {99, 0});
    CHECK(par.method == TruthMethod::oracle_monte_carlo);
    CHECK(par.psi_true == doctest::Approx(ser.psi_true).epsilon(1e-12));
    CHECK(par.precision_estimate == doctest::Approx(ser.precision_estimate).epsilon(1e-9));
    CHECK(std::abs(par.psi_true - q.psi_true) <= 3.0 * par.precision_estimate);
    // the worker count only changes the schedule
    const auto one = oracle_truth(spec, draws, {99, 0}, 1);
    CHECK(one.psi_true == par.psi_true);
    CHECK_THROWS_AS(oracle_truth(spec, 0, {1, 1}), InvalidArgument);
}

TEST_CASE("spec validation") {
    DgpSpec spec;
    spec.covariate_lower = 1.0;
    spec.covariate_upper = -1.0;
    CHECK_THROWS_AS(spec.validate(), InvalidArgument);
    DgpSpec empty;
    empty.n = 0;
    CHECK_THROWS_AS(empty.validate(), InvalidArgument);
}
