#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "xfit/dgp.hpp"
#include "xfit/errors.hpp"
#include "xfit/estimators.hpp"
#include "xfit/logistic.hpp"

using namespace xfit;
using testing::flat_dataset;
using testing::hand_nuisance;

namespace {

// Two folds holding the same rows: fold 0 = first half, fold 1 = second half.
FoldPlan halves(std::size_t n) {
    std::vector<std::size_t> assign(n);
    for (std::size_t i = 0; i < n; ++i) assign[i] = i < n / 2 ? 0 : 1;
    return FoldPlan(2, assign);
}

template <typename T>
std::vector<T> twice(std::vector<T> v) {
    const auto copy = v;
    v.insert(v.end(), copy.begin(), copy.end());
    return v;
}

struct RandomInstance {
    Dataset data;
    NuisanceFit nuisance;
};

// Random outcomes, Q and g; every fold keeps at least one treated and one control.
RandomInstance random_instance(Pcg32& rng, std::size_t n, bool rare) {
    std::vector<int> a(n);
    std::vector<double> y(n);
    std::vector<double> q(n);
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = i < 4 ? static_cast<int>(i / 2) : (rng.uniform() < 0.3 ? 1 : 0);
        const double p = rare ? 0.03 : 0.4;
        y[i] = a[i] == 0 && rng.uniform() < p ? 1.0 : 0.0;
        q[i] = rare && rng.uniform() < 0.2 ? 0.0 : rng.uniform(0.0, rare ? 0.1 : 0.9);
        g[i] = rng.uniform(0.05, 0.5);
    }
    std::vector<std::size_t> assign(n);
    for (std::size_t i = 0; i < n; ++i) assign[i] = i % 2;
    const FoldPlan plan(2, assign);
    auto data = flat_dataset(a, y);
    auto nf = hand_nuisance(data, plan, q, g);
    return {std::move(data), std::move(nf)};
}

LearnerConfig cheap_learners() {
    LearnerConfig c;
    c.candidates = {LearnerSpec::logistic(), LearnerSpec::boosted(20, 1, 0.1), LearnerSpec::constant()};
    c.v_cv = 3;
    return c;
}

}  // namespace

TEST_CASE("estimator kind names round-trip") {
    for (const char* name : {"naive", "tmle_c", "tmle_w", "tmle_cp", "tmle_wp", "dml", "dml_cl"}) {
        CHECK(EstimatorKind::parse(name).name() == name);
    }
    const auto k = EstimatorKind::parse("tmle_wp_trans[0:0.05]");
    CHECK(k.is_trans());
    CHECK(k.q_bounds->upper == 0.05);
    CHECK(EstimatorKind::parse(k.name()) == k);
    CHECK_THROWS_AS(EstimatorKind::parse("tmle_x"), InvalidArgument);
    CHECK_THROWS_AS(EstimatorKind::parse("dml[0:1]"), InvalidArgument);
    CHECK_THROWS_AS(EstimatorKind::parse("tmle_c_trans[0.2:0.1]"), InvalidArgument);
    CHECK_THROWS_AS((EstimatorKind{EstimatorFamily::tmle_c_trans, std::nullopt}.validate()), InvalidArgument);
}

TEST_CASE("naive estimator") {
    SUBCASE("constant Q gives that constant") {
        const auto d = flat_dataset({1, 0, 1, 0, 0, 1}, {0, 1, 0, 0, 0, 0});
        const auto nf = hand_nuisance(d, halves(6), std::vector<double>(6, 0.37), std::vector<double>(6, 0.3));
        CHECK(estimate_naive(d, nf).psi_hat == doctest::Approx(0.37).epsilon(1e-15));
    }
    SUBCASE("one treated per fold with Q=0.4") {
        const auto d = flat_dataset({1, 0, 1, 0}, {0, 0, 0, 1});
        const auto nf = hand_nuisance(d, halves(4), {0.4, 0.1, 0.4, 0.9}, {0.3, 0.3, 0.3, 0.3});
        CHECK(estimate_naive(d, nf).psi_hat == doctest::Approx(0.4).epsilon(1e-15));
    }
    SUBCASE("matches direct summation on random instances") {
        Pcg32 rng({1, 9});
        for (int k = 0; k < 20; ++k) {
            auto inst = random_instance(rng, 11 + rng.below(20), false);
            double total = 0.0;
            for (std::size_t v = 0; v < 2; ++v) {
                double s = 0.0;
                double t = 0.0;
                for (std::size_t i = v; i < inst.data.size(); i += 2) {
                    if (inst.data.a(i) == 1) {
                        s += inst.nuisance.q_own[i];
                        t += 1.0;
                    }
                }
                total += static_cast<double>(inst.nuisance.plan.in_fold(v).size()) * s / t;
            }
            CHECK(estimate_naive(inst.data, inst.nuisance).psi_hat ==
                  doctest::Approx(total / static_cast<double>(inst.data.size())).epsilon(1e-14));
        }
    }
    SUBCASE("a fold without treated units is degenerate") {
        const auto d = flat_dataset({0, 0, 1, 0}, {0, 0, 0, 1});
        const auto nf = hand_nuisance(d, halves(4), {0.4, 0.1, 0.4, 0.9}, {0.3, 0.3, 0.3, 0.3}, {0.5, 0.5});
        CHECK_THROWS_AS(estimate_naive(d, nf), EstimationDegenerate);
    }
}

TEST_CASE("dml closed form on a fold of two") {
    const auto d = flat_dataset(twice<int>({1, 0}), twice<double>({0, 0}));
    SUBCASE("inside the unit interval") {
        const auto nf = hand_nuisance(d, halves(4), twice<double>({0.4, 0.2}), twice<double>({0.3, 0.5}));
        CHECK(nf.folds[0].pi == 0.5);
        const auto r = estimate_dml(d, nf, false);
        CHECK(r.psi_hat == doctest::Approx(0.2).epsilon(1e-14));
        CHECK(estimate_dml(d, nf, true).psi_hat == r.psi_hat);
    }
    SUBCASE("bound violation and clipping") {
        const auto nf =
            hand_nuisance(d, halves(4), twice<double>({0.4, 0.9}), twice<double>({0.3, 0.8}), {0.2, 0.2});
        const auto r = estimate_dml(d, nf, false);
        CHECK(r.psi_hat == doctest::Approx(-8.6).epsilon(1e-13));
        const auto cl = estimate_dml(d, nf, true);
        CHECK(cl.psi_hat == 0.0);
        // same SE, centered at the clipped value
        CHECK(cl.psi_ci->standard_error == doctest::Approx(r.psi_ci->standard_error).epsilon(1e-14));
        CHECK(cl.psi_ci->estimate == 0.0);
    }
    SUBCASE("zero residuals reduce to the naive estimate") {
        const auto z = flat_dataset(twice<int>({1, 0}), twice<double>({0, 0.25}));
        const auto nf = hand_nuisance(z, halves(4), twice<double>({0.4, 0.25}), twice<double>({0.3, 0.4}));
        CHECK(estimate_dml(z, nf, false).psi_hat == doctest::Approx(estimate_naive(z, nf).psi_hat).epsilon(1e-15));
    }
}

TEST_CASE("dml identity and within-fold EIF mean on random instances") {
    Pcg32 rng({5, 5});
    for (int k = 0; k < 50; ++k) {
        auto inst = random_instance(rng, 10 + rng.below(40), k % 2 == 0);
        const auto& d = inst.data;
        const auto& nf = inst.nuisance;
        const auto r = estimate_dml(d, nf, false);
        double correction = 0.0;
        for (std::size_t i = 0; i < d.size(); ++i) {
            if (d.a(i) == 0) {
                const double g = nf.g_own[i];
                correction += g / (nf.pi_own(i) * (1 - g)) * (d.y(i) - nf.q_own[i]);
            }
        }
        const double expected = estimate_naive(d, nf).psi_hat + correction / static_cast<double>(d.size());
        CHECK(std::abs(r.psi_hat - expected) < 1e-12);
        for (double res : r.estimating_equation_residuals) CHECK(std::abs(res) <= 1e-10);
        const auto cl = estimate_dml(d, nf, true);
        if (r.psi_hat >= 0.0 && r.psi_hat <= 1.0) CHECK(cl.psi_hat == r.psi_hat);
        CHECK(cl.psi_hat >= 0.0);
        CHECK(cl.psi_hat <= 1.0);
    }
}

TEST_CASE("clever covariate targeting") {
    SUBCASE("zero score leaves Q untouched") {
        const std::vector<int> a{0, 0, 1};
        const std::vector<double> y{1.0, 0.0, 0.0};
        const std::vector<double> q{0.5, 0.5, 0.3};
        const std::vector<double> g{0.3, 0.3, 0.4};
        const std::vector<double> pi{0.4, 0.4, 0.4};
        const auto r = target_clever_covariate({a, y, q, g, pi}, 1e4);
        CHECK(r.fluctuation.epsilon == 0.0);
        CHECK_FALSE(r.record.diverged);
        CHECK(r.fluctuation.apply(0.3, 0.4, 0.4) == doctest::Approx(0.3).epsilon(1e-15));
    }
    SUBCASE("all control outcomes zero drive epsilon to minus infinity") {
        const std::vector<int> a{0, 0, 0, 1};
        const std::vector<double> y{0.0, 0.0, 0.0, 0.0};
        const std::vector<double> q{0.02, 0.05, 0.01, 0.03};
        const std::vector<double> g{0.2, 0.3, 0.1, 0.25};
        const std::vector<double> pi(4, 0.25);
        const auto r = target_clever_covariate({a, y, q, g, pi}, 1e4);
        CHECK(r.record.diverged);
        CHECK(r.fluctuation.epsilon < -10.0);
        CHECK(r.fluctuation.apply(0.03, 0.25, 0.25) < 1e-6);
        // longer iteration budgets only push further down
        CHECK(r.fluctuation.apply(0.03, 0.25, 0.25) < 0.03);
    }
    SUBCASE("single control with y=1 and H=1 diverges upwards") {
        const std::vector<int> a{0, 1};
        const std::vector<double> y{1.0, 0.0};
        const std::vector<double> q{0.5, 0.5};
        const std::vector<double> g{1.0 / 3.0, 0.4};
        const std::vector<double> pi{0.5, 0.5};
        const auto r = target_clever_covariate({a, y, q, g, pi}, 1e4);
        CHECK(r.fluctuation.covariate(g[0], pi[0]) == doctest::Approx(1.0));
        CHECK(r.record.diverged);
        CHECK(r.fluctuation.epsilon > 10.0);
    }
    SUBCASE("no controls is degenerate") {
        const std::vector<int> a{1, 1};
        const std::vector<double> zero{0.0, 0.0};
        const std::vector<double> g{0.3, 0.3};
        const std::vector<double> pi{1.0, 1.0};
        CHECK_THROWS_AS(target_clever_covariate({a, zero, g, g, pi}, 1e4), TargetingDegenerate);
        CHECK_THROWS_AS(target_weighted({a, zero, g, g, pi}, 1e4), TargetingDegenerate);
    }
}

TEST_CASE("weighted targeting") {
    const std::vector<int> a{0, 0, 1};
    const std::vector<double> y{1.0, 0.0, 0.0};
    const std::vector<double> q{0.5, 0.5, 0.4};
    const std::vector<double> g{0.3, 0.3, 0.2};
    SUBCASE("symmetric outcomes give zero") {
        const std::vector<double> pi(3, 0.3);
        const auto r = target_weighted({a, y, q, g, pi}, 1e4);
        CHECK(std::abs(r.fluctuation.epsilon) < 1e-14);
    }
    SUBCASE("weight scale does not matter") {
        const std::vector<double> q2{0.2, 0.7, 0.4};
        const std::vector<double> g2{0.1, 0.45, 0.2};
        const std::vector<double> pi1(3, 0.3);
        const std::vector<double> pi2(3, 0.03);
        const auto r1 = target_weighted({a, y, q2, g2, pi1}, 1e4);
        const auto r2 = target_weighted({a, y, q2, g2, pi2}, 1e4);
        CHECK(r1.fluctuation.epsilon == doctest::Approx(r2.fluctuation.epsilon).epsilon(1e-12));
    }
    SUBCASE("all control outcomes zero diverge negative") {
        const std::vector<double> y0{0.0, 0.0, 0.0};
        const std::vector<double> pi(3, 0.3);
        const auto r = target_weighted({a, y0, q, g, pi}, 1e4);
        CHECK(r.record.diverged);
        CHECK(r.fluctuation.epsilon < -10.0);
    }
}

TEST_CASE("targeting direction follows a common residual sign") {
    Pcg32 rng({3, 1});
    for (int k = 0; k < 100; ++k) {
        const std::size_t n = 3 + rng.below(10);
        std::vector<int> a(n, 0);
        std::vector<double> y(n);
        std::vector<double> q(n);
        std::vector<double> g(n);
        const std::vector<double> pi(n, 0.3);
        const bool up = rng.below(2) == 1;
        for (std::size_t i = 0; i < n; ++i) {
            q[i] = rng.uniform(0.05, 0.95);
            y[i] = up ? rng.uniform(q[i], 1.0) : rng.uniform(0.0, q[i]);
            g[i] = rng.uniform(0.05, 0.5);
        }
        const auto c = target_clever_covariate({a, y, q, g, pi}, 1e4);
        const auto w = target_weighted({a, y, q, g, pi}, 1e4);
        CHECK((up ? c.fluctuation.epsilon > 0 : c.fluctuation.epsilon < 0));
        CHECK((up ? w.fluctuation.epsilon > 0 : w.fluctuation.epsilon < 0));
    }
}

TEST_CASE("TMLE with zero fluctuation equals the naive estimate") {
    // each fold: two controls with y={1,0}, Q=0.5 and equal g, one treated
    const auto d = flat_dataset(twice<int>({0, 0, 1}), twice<double>({1, 0, 0}));
    const auto nf = hand_nuisance(d, halves(6), twice<double>({0.5, 0.5, 0.2}), twice<double>({0.3, 0.3, 0.4}));
    const double naive = estimate_naive(d, nf).psi_hat;
    for (auto v : {TmleVariant::c, TmleVariant::w, TmleVariant::cp, TmleVariant::wp}) {
        const auto r = estimate_tmle(d, nf, v);
        CHECK(r.max_abs_epsilon() < 1e-14);
        CHECK(r.psi_hat == doctest::Approx(naive).epsilon(1e-14));
        CHECK(*r.mrad < 1e-14);
    }
}

TEST_CASE("identical folds make pooled and fold-wise TMLE agree") {
    const auto d = flat_dataset(twice<int>({0, 0, 0, 1, 1}), twice<double>({1, 0, 0, 0, 0}));
    const auto nf = hand_nuisance(d, halves(10), twice<double>({0.1, 0.3, 0.2, 0.25, 0.15}),
                                  twice<double>({0.2, 0.4, 0.3, 0.35, 0.45}));
    const auto c = estimate_tmle(d, nf, TmleVariant::c);
    const auto cp = estimate_tmle(d, nf, TmleVariant::cp);
    REQUIRE(c.fluctuations.size() == 2);
    REQUIRE(cp.fluctuations.size() == 1);
    CHECK(c.fluctuations[0].epsilon == doctest::Approx(c.fluctuations[1].epsilon).epsilon(1e-14));
    CHECK(cp.fluctuations[0].epsilon == doctest::Approx(c.fluctuations[0].epsilon).epsilon(1e-10));
    CHECK(cp.psi_hat == doctest::Approx(c.psi_hat).epsilon(1e-10));
    const auto w = estimate_tmle(d, nf, TmleVariant::w);
    const auto wp = estimate_tmle(d, nf, TmleVariant::wp);
    CHECK(wp.psi_hat == doctest::Approx(w.psi_hat).epsilon(1e-10));
}

TEST_CASE("all-zero control outcomes push fold-wise TMLE towards zero") {
    const auto d = flat_dataset(twice<int>({0, 0, 0, 1}), twice<double>({0, 0, 0, 0}));
    const auto nf = hand_nuisance(d, halves(8), twice<double>({0.02, 0.05, 0.01, 0.03}),
                                  twice<double>({0.2, 0.3, 0.1, 0.25}));
    for (auto v : {TmleVariant::c, TmleVariant::w}) {
        const auto r = estimate_tmle(d, nf, v);
        CHECK(r.any_diverged());
        CHECK(r.psi_hat < 1e-6);
        CHECK(r.psi_hat >= 0.0);
    }
}

TEST_CASE("TMLE records and residuals on random instances") {
    Pcg32 rng({17, 2});
    for (int k = 0; k < 60; ++k) {
        auto inst = random_instance(rng, 10 + rng.below(60), k % 2 == 0);
        for (auto v : {TmleVariant::c, TmleVariant::w, TmleVariant::cp, TmleVariant::wp}) {
            const auto r = estimate_tmle(inst.data, inst.nuisance, v);
            const bool pooled = v == TmleVariant::cp || v == TmleVariant::wp;
            CHECK(r.fluctuations.size() == (pooled ? 1u : 2u));
            CHECK(r.psi_hat >= 0.0);
            CHECK(r.psi_hat <= 1.0);
            CHECK(r.observation_fits.size() == inst.data.size());
            if (!r.any_diverged()) {
                for (double res : r.estimating_equation_residuals) CHECK(std::abs(res) <= 1e-8);
            }
            // ATT in a DGP where treated outcomes are all zero
            CHECK(r.theta_hat == -r.psi_hat);
            CHECK(r.theta_ci->lower == doctest::Approx(-r.psi_ci->upper).epsilon(1e-12));
            CHECK(r.theta_ci->upper == doctest::Approx(-r.psi_ci->lower).epsilon(1e-12));
        }
    }
}

TEST_CASE("ATT wrapper") {
    const auto d = flat_dataset({1, 0, 1, 0}, {0.3, 0, 0.3, 1});
    const auto nf = hand_nuisance(d, halves(4), {0.4, 0.1, 0.4, 0.9}, {0.3, 0.3, 0.3, 0.3});
    EstimateReport r;
    r.psi_hat = 0.0;
    CHECK(estimate_att(d, nf, r).theta_hat == doctest::Approx(0.3));
    r.psi_hat = 0.3;
    CHECK(estimate_att(d, nf, r).theta_hat == 0.0);
    CHECK_FALSE(estimate_att(d, nf, r).theta_ci.has_value());
    const auto none = flat_dataset({0, 0}, {0, 1});
    CHECK_THROWS_AS(estimate_att(none, nf, r), InvalidArgument);
}

TEST_CASE("nuisance fitting") {
    DgpSpec spec;
    spec.n = 200;
    SUBCASE("all control outcomes zero give Q near zero") {
        const auto base = sample_dgp(spec, {4, 4});
        const auto d = Dataset(base.covariates(), std::vector<int>(base.treatment().begin(), base.treatment().end()),
                               std::vector<double>(base.size(), 0.0));
        const auto plan = make_fold_plan(d.size(), 2, {1, 1});
        const auto nf = fit_nuisances(d, plan, cheap_learners(), {2, 2});
        for (double q : nf.q_own) CHECK(q < 1e-6);
        for (double g : nf.g_own) {
            CHECK(g >= 0.05);
            CHECK(g <= 0.5);
        }
    }
    SUBCASE("pi is the in-fold treated fraction") {
        const auto d = sample_dgp(spec, {5, 5});
        const auto plan = make_fold_plan(d.size(), 2, {1, 1});
        const auto nf = fit_nuisances(d, plan, cheap_learners(), {2, 2});
        for (std::size_t v = 0; v < 2; ++v) CHECK(nf.folds[v].pi == treated_fraction(d, plan.in_fold(v)));
    }
    SUBCASE("fold without treated units is degenerate") {
        const auto d = flat_dataset({1, 0, 0, 0, 1, 0}, {0, 0, 1, 0, 0, 0});
        const FoldPlan plan(2, {0, 0, 0, 1, 0, 1});
        LearnerConfig c;
        c.candidates = {LearnerSpec::constant()};
        c.v_cv = 2;
        try {
            fit_nuisances(d, plan, c, {1, 1});
            FAIL("expected degenerate fold");
        } catch (const EstimationDegenerate& e) {
            CHECK(e.fold() == 1);
        }
    }
}

TEST_CASE("bounded TMLE") {
    DgpSpec spec;
    spec.n = 300;
    const auto d = sample_dgp(spec, {21, 0});
    const auto plan = make_fold_plan(d.size(), 2, {21, 1});
    const auto config = cheap_learners();
    const RngStream stream{21, 2};
    const auto nf = fit_nuisances(d, plan, config, stream);

    SUBCASE("bounds [0,1] reproduce the standard TMLE") {
        for (auto v : {TmleVariant::c, TmleVariant::w, TmleVariant::cp, TmleVariant::wp}) {
            const auto std_r = estimate_tmle(d, nf, v);
            const auto tr = estimate_bounded_tmle(d, nf, config, v, {0.0, 1.0}, stream);
            CHECK(tr.psi_hat == doctest::Approx(std_r.psi_hat).epsilon(1e-12));
            CHECK(tr.fluctuations[0].epsilon == doctest::Approx(std_r.fluctuations[0].epsilon).epsilon(1e-9));
        }
    }
    SUBCASE("estimates stay within the bounds") {
        for (QBounds b : {QBounds{0.0, 0.05}, QBounds{0.0, 0.2}, QBounds{0.01, 0.02}}) {
            for (auto v : {TmleVariant::c, TmleVariant::w, TmleVariant::cp, TmleVariant::wp}) {
                const auto r = estimate_bounded_tmle(d, nf, config, v, b, stream);
                CHECK(r.psi_hat >= b.lower);
                CHECK(r.psi_hat <= b.upper);
                CHECK(r.kind.is_trans());
                for (const auto& o : r.observation_fits) {
                    CHECK(o.q_targeted >= b.lower);
                    CHECK(o.q_targeted <= b.upper);
                }
            }
        }
    }
    SUBCASE("invalid bounds") {
        CHECK_THROWS_AS(estimate_bounded_tmle(d, nf, config, TmleVariant::c, {0.2, 0.1}, stream), InvalidArgument);
    }
    SUBCASE("knn is dropped from the scaled library") {
        LearnerConfig knn_only;
        knn_only.candidates = {LearnerSpec::knn(5)};
        CHECK_THROWS_AS(estimate_bounded_tmle(d, nf, knn_only, TmleVariant::c, {0.0, 0.1}, stream), InvalidArgument);
    }
}

TEST_CASE("run_estimator dispatches every family") {
    DgpSpec spec;
    spec.n = 150;
    const auto d = sample_dgp(spec, {8, 0});
    const auto plan = make_fold_plan(d.size(), 2, {8, 1});
    const auto config = cheap_learners();
    const auto nf = fit_nuisances(d, plan, config, {8, 2});
    for (const char* name : {"naive", "tmle_c", "tmle_w", "tmle_cp", "tmle_wp", "dml", "dml_cl",
                             "tmle_c_trans[0:0.05]", "tmle_w_trans[0:0.05]", "tmle_cp_trans[0:0.2]",
                             "tmle_wp_trans[0:0.2]"}) {
        const auto kind = EstimatorKind::parse(name);
        const auto r = run_estimator(kind, d, nf, config, {8, 2});
        CHECK(r.kind == kind);
        CHECK(std::isfinite(r.psi_hat));
        CHECK(r.fluctuations.empty() == !kind.is_tmle());
        CHECK(r.mrad.has_value() == kind.is_tmle());
        CHECK(r.psi_ci.has_value() == (kind.family != EstimatorFamily::naive));
    }
}
