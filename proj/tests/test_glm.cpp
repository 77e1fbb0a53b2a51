#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "xfit/errors.hpp"
#include "xfit/glm.hpp"
#include "xfit/logistic.hpp"

using namespace xfit;

namespace {

struct Inputs {
    std::vector<double> y;
    Eigen::MatrixXd x;
    std::vector<double> offset;
    std::vector<double> weight;
};

Inputs intercept_only(std::vector<double> y, double offset = 0.0) {
    const auto n = y.size();
    return {std::move(y), Eigen::MatrixXd(static_cast<Eigen::Index>(n), 0), std::vector<double>(n, offset),
            std::vector<double>(n, 1.0)};
}

GlmSpec spec_for(const Eigen::MatrixXd& x, bool intercept) {
    GlmSpec s;
    s.include_intercept = intercept;
    s.design_columns = static_cast<std::size_t>(x.cols());
    return s;
}

GlmFit fit(const Inputs& in, bool intercept = true) {
    return fit_glm_logistic(in.y, in.x, in.offset, in.weight, spec_for(in.x, intercept));
}

Inputs from_problem(const oracle::GlmProblem& p) {
    const auto n = static_cast<Eigen::Index>(p.y.size());
    const auto cols = static_cast<Eigen::Index>(p.x.front().size());
    Eigen::MatrixXd x(n, cols);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) x(i, j) = p.x[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    return {p.y, x, p.offset, p.weight};
}

}  // namespace

TEST_CASE("intercept-only on y={1,0,1,0} gives logit(0.5)=0") {
    const auto r = fit(intercept_only({1, 0, 1, 0}));
    CHECK(r.converged);
    CHECK(r.coefficients.size() == 1);
    CHECK(std::abs(r.coefficients[0]) < 1e-12);
}

TEST_CASE("intercept-only with unit offsets and mean 0.5 gives -1") {
    const auto r = fit(intercept_only({1, 0, 1, 0}, 1.0));
    CHECK(r.converged);
    CHECK(r.coefficients[0] == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("intercept-only with y all 1 diverges towards +inf") {
    const auto in = intercept_only({1, 1, 1});
    const auto r = fit(in);
    CHECK(r.diverged);
    CHECK_FALSE(r.converged);
    CHECK(r.coefficients[0] > 10.0);
    CHECK(expit(r.coefficients[0]) > 0.99999);

    GlmSpec strict = spec_for(in.x, true);
    strict.allow_divergence = false;
    CHECK_THROWS_AS(fit_glm_logistic(in.y, in.x, in.offset, in.weight, strict), ConvergenceError);
}

TEST_CASE("slope-only fit at a zero score stays at the origin") {
    Inputs in{{1.0, 0.0}, Eigen::MatrixXd::Ones(2, 1), {0.0, 0.0}, {1.0, 1.0}};
    const auto r = fit(in, false);
    CHECK(r.converged);
    CHECK(std::abs(r.coefficients[0]) < 1e-14);
}

TEST_CASE("complete separation on a slope is flagged, not thrown") {
    Eigen::MatrixXd x(4, 1);
    x << -2, -1, 1, 2;
    Inputs in{{0, 0, 1, 1}, x, {0, 0, 0, 0}, {1, 1, 1, 1}};
    const auto r = fit(in);
    CHECK(r.diverged);
    CHECK(r.coefficients[1] > 5.0);
}

TEST_CASE("input validation") {
    auto in = intercept_only({1, 0});
    SUBCASE("length mismatch") {
        in.offset.pop_back();
        CHECK_THROWS_AS(fit(in), InvalidArgument);
    }
    SUBCASE("negative weight") {
        in.weight[0] = -1.0;
        CHECK_THROWS_AS(fit(in), InvalidArgument);
    }
    SUBCASE("all-zero weights") {
        in.weight = {0.0, 0.0};
        CHECK_THROWS_AS(fit(in), InvalidArgument);
    }
    SUBCASE("non-finite offset") {
        in.offset[1] = INFINITY;
        CHECK_THROWS_AS(fit(in), InvalidArgument);
    }
    SUBCASE("response out of range") {
        in.y[0] = 1.5;
        CHECK_THROWS_AS(fit(in), InvalidArgument);
    }
    SUBCASE("too many coefficients for the positively weighted rows") {
        Inputs wide{{1, 0}, Eigen::MatrixXd::Random(2, 2), {0, 0}, {1, 0}};
        CHECK_THROWS_AS(fit(wide), RankDeficiency);
    }
    SUBCASE("no intercept and no columns") {
        CHECK_THROWS_AS(fit(in, false), InvalidArgument);
    }
}

TEST_CASE("fits agree with a brute-force likelihood maximizer in every mode") {
    Pcg32 rng({2024, 9});
    const oracle::GlmMode modes[] = {oracle::GlmMode::full, oracle::GlmMode::offset, oracle::GlmMode::weighted,
                                     oracle::GlmMode::no_intercept, oracle::GlmMode::intercept_only};
    for (int k = 0; k < 25; ++k) {
        const auto mode = modes[k % 5];
        const auto p = oracle::random_glm_problem(rng, mode);
        Inputs in = mode == oracle::GlmMode::intercept_only
                        ? Inputs{p.y, Eigen::MatrixXd(static_cast<Eigen::Index>(p.y.size()), 0), p.offset, p.weight}
                        : from_problem(p);
        const auto r = fit(in, p.intercept);
        REQUIRE(r.converged);
        const auto ref = oracle::maximize_likelihood(p);
        REQUIRE(ref.size() == static_cast<std::size_t>(r.coefficients.size()));
        for (std::size_t j = 0; j < ref.size(); ++j) {
            CHECK(std::abs(r.coefficients[static_cast<Eigen::Index>(j)] - ref[j]) < 1e-6);
        }
        std::vector<double> beta(r.coefficients.data(), r.coefficients.data() + r.coefficients.size());
        CHECK(glm_log_likelihood(in.y, in.x, in.offset, in.weight, p.intercept, r.coefficients) ==
              doctest::Approx(oracle::log_likelihood(p, beta)).epsilon(1e-12));
    }
}

TEST_CASE("analytic score matches central finite differences") {
    Pcg32 rng({55, 1});
    for (int k = 0; k < 20; ++k) {
        const auto p = oracle::random_glm_problem(rng, oracle::GlmMode::weighted);
        const auto in = from_problem(p);
        Eigen::VectorXd beta(static_cast<Eigen::Index>(p.coefficient_count()));
        for (auto& b : beta) b = rng.uniform(-1.0, 1.0);
        const auto s = glm_score(in.y, in.x, in.offset, in.weight, true, beta);
        for (Eigen::Index j = 0; j < beta.size(); ++j) {
            const double h = 1e-5;
            Eigen::VectorXd up = beta;
            Eigen::VectorXd down = beta;
            up[j] += h;
            down[j] -= h;
            const double fd = (glm_log_likelihood(in.y, in.x, in.offset, in.weight, true, up) -
                               glm_log_likelihood(in.y, in.x, in.offset, in.weight, true, down)) /
                              (2 * h);
            CHECK(std::abs(fd - s[j]) <= 1e-5 * std::max(1.0, std::abs(s[j])));
        }
    }
}

TEST_CASE("converged fits have score norm within tolerance") {
    Pcg32 rng({8, 8});
    for (int k = 0; k < 10; ++k) {
        const auto p = oracle::random_glm_problem(rng, oracle::GlmMode::offset);
        const auto in = from_problem(p);
        const auto r = fit(in);
        REQUIRE(r.converged);
        CHECK(r.final_score_norm <= 1e-10);
        CHECK(glm_score(in.y, in.x, in.offset, in.weight, true, r.coefficients).cwiseAbs().maxCoeff() <= 1e-10);
    }
}

TEST_CASE("scaling all weights leaves coefficients unchanged") {
    Pcg32 rng({31, 4});
    for (int k = 0; k < 10; ++k) {
        const auto p = oracle::random_glm_problem(rng, oracle::GlmMode::weighted);
        auto in = from_problem(p);
        const auto base = fit(in);
        for (double c : {1e-3, 7.0, 1e4}) {
            auto scaled = in;
            for (auto& w : scaled.weight) w *= c;
            const auto r = fit(scaled);
            CHECK((r.coefficients - base.coefficients).cwiseAbs().maxCoeff() < 1e-8);
        }
    }
}

TEST_CASE("scaled logistic fit") {
    SUBCASE("responses inside [0,1] reproduce the standard fit") {
        Pcg32 rng({4, 4});
        const auto p = oracle::random_glm_problem(rng, oracle::GlmMode::offset);
        const auto in = from_problem(p);
        const auto a = fit(in);
        const auto b = scaled_logistic_fit(in.y, in.x, in.offset, in.weight, spec_for(in.x, true));
        CHECK((a.coefficients - b.coefficients).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("intercept-only with mean m in (0,1) gives logit(m)") {
        const auto in = intercept_only({-0.5, 1.3, 0.2, 0.6});
        const auto r = scaled_logistic_fit(in.y, in.x, in.offset, in.weight, spec_for(in.x, true));
        CHECK(r.converged);
        CHECK(r.coefficients[0] == doctest::Approx(logit(0.4)).epsilon(1e-12));
    }
    SUBCASE("intercept-only with mean 1.2 diverges") {
        const auto in = intercept_only({1.0, 1.4, 1.2});
        const auto r = scaled_logistic_fit(in.y, in.x, in.offset, in.weight, spec_for(in.x, true));
        CHECK(r.diverged);
        CHECK(r.coefficients[0] > 10.0);
    }
    SUBCASE("fit_glm_logistic rejects responses the scaled fit accepts") {
        const auto in = intercept_only({-0.5, 1.3});
        CHECK_THROWS_AS(fit(in), InvalidArgument);
    }
}

TEST_CASE("huge offsets with the other label still fit") {
    // Q = 0 clipped to logit -1e4 and one event: the slope must be huge.
    Inputs in{{1.0, 0.0, 0.0}, Eigen::MatrixXd::Ones(3, 1), {-1e4, -1e4, -1e4}, {1.0, 1.0, 1.0}};
    in.x(1, 0) = 0.5;
    in.x(2, 0) = 0.25;
    const auto r = fit(in, false);
    CHECK(std::isfinite(r.coefficients[0]));
    CHECK(r.coefficients[0] > 1e3);
}
