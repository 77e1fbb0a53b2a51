#include "xfit/dgp.hpp"

#include <cmath>
#include <functional>
#include <numeric>

#include <boost/math/quadrature/gauss.hpp>
#include <omp.h>

#include "xfit/errors.hpp"
#include "xfit/logistic.hpp"

namespace xfit {

double DgpSpec::propensity(std::span<const double> x) const {
    double eta = treatment_intercept;
    for (std::size_t j = 0; j < treatment_slopes.size(); ++j) eta += treatment_slopes[j] * x[j];
    return expit(eta);
}

double DgpSpec::control_outcome(std::span<const double> x) const {
    const double s = std::accumulate(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(dim()), 0.0);
    return expit(outcome_intercept + outcome_slope_scale * s);
}

void DgpSpec::validate() const {
    if (n < 1) throw InvalidArgument("DGP sample size must be at least 1");
    if (treatment_slopes.empty()) throw InvalidArgument("DGP needs at least one covariate");
    if (!(covariate_lower < covariate_upper)) throw InvalidArgument("DGP covariate range must be increasing");
}

Dataset sample_dgp(const DgpSpec& spec, const RngStream& rng) {
    spec.validate();
    const std::size_t d = spec.dim();
    Pcg32 gen(rng);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(spec.n), static_cast<Eigen::Index>(d));
    std::vector<int> a(spec.n);
    std::vector<double> y(spec.n);
    std::vector<double> row(d);
    for (std::size_t i = 0; i < spec.n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            row[j] = gen.uniform(spec.covariate_lower, spec.covariate_upper);
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
        }
        const double ua = gen.uniform();
        const double uy = gen.uniform();
        a[i] = ua < spec.propensity(row) ? 1 : 0;
        y[i] = (a[i] == 0 && uy < spec.control_outcome(row)) ? 1.0 : 0.0;
    }
    return Dataset(std::move(x), std::move(a), std::move(y));
}

std::string to_string(TruthMethod m) {
    return m == TruthMethod::quadrature ? "quadrature" : "oracle_monte_carlo";
}

namespace {

// Mean of f over the covariate box, by an N-point Gauss-Legendre tensor rule.
template <unsigned N>
double box_mean(const DgpSpec& spec, const std::function<double(std::span<const double>)>& f) {
    using rule = boost::math::quadrature::gauss<double, N>;
    const std::size_t d = spec.dim();
    std::vector<double> x(d);
    const double half = 0.5 * (spec.covariate_upper - spec.covariate_lower);
    const double mid = 0.5 * (spec.covariate_upper + spec.covariate_lower);
    std::function<double(std::size_t)> nest = [&](std::size_t axis) -> double {
        if (axis == d) return f(x);
        return rule::integrate(
                   [&](double t) {
                       x[axis] = mid + half * t;
                       return nest(axis + 1);
                   },
                   -1.0, 1.0) /
               2.0;
    };
    return nest(0);
}

template <unsigned N>
double psi_by_rule(const DgpSpec& spec) {
    const double num = box_mean<N>(spec, [&](std::span<const double> x) {
        return spec.propensity(x) * spec.control_outcome(x);
    });
    const double den = box_mean<N>(spec, [&](std::span<const double> x) { return spec.propensity(x); });
    return num / den;
}

struct OracleSums {
    double gq = 0.0;
    double g = 0.0;
    double gq2 = 0.0;
    double g2 = 0.0;
    double gq_g = 0.0;

    void add(double gv, double qv) {
        const double p = gv * qv;
        gq += p;
        g += gv;
        gq2 += p * p;
        g2 += gv * gv;
        gq_g += p * gv;
    }
    void merge(const OracleSums& o) {
        gq += o.gq;
        g += o.g;
        gq2 += o.gq2;
        g2 += o.g2;
        gq_g += o.gq_g;
    }
};

TruthRecord oracle_record(const OracleSums& s, std::uint64_t draws) {
    const double n = static_cast<double>(draws);
    const double psi = s.gq / s.g;
    // Var(gQ - psi g) at the ratio estimate; its mean is zero there.
    const double resid_var = s.gq2 / n - 2.0 * psi * s.gq_g / n + psi * psi * s.g2 / n;
    const double mean_g = s.g / n;
    const double se = std::sqrt(std::max(resid_var, 0.0) / n) / mean_g;
    return TruthRecord{psi, -psi, TruthMethod::oracle_monte_carlo, se};
}

void draw_chunk(const DgpSpec& spec, const RngStream& rng, std::uint64_t chunk, std::uint64_t count,
                const std::function<void(double, double)>& sink) {
    Pcg32 gen(rng.substream(chunk));
    std::vector<double> x(spec.dim());
    for (std::uint64_t k = 0; k < count; ++k) {
        for (auto& v : x) v = gen.uniform(spec.covariate_lower, spec.covariate_upper);
        sink(spec.propensity(x), spec.control_outcome(x));
    }
}

}  // namespace

TruthRecord compute_truth(const DgpSpec& spec) {
    spec.validate();
    const double fine = psi_by_rule<48>(spec);
    const double coarse = psi_by_rule<32>(spec);
    return TruthRecord{fine, -fine, TruthMethod::quadrature, std::abs(fine - coarse)};
}

DgpMarginals dgp_marginals(const DgpSpec& spec) {
    spec.validate();
    const double pr_a = box_mean<48>(spec, [&](std::span<const double> x) { return spec.propensity(x); });
    const double joint = box_mean<48>(spec, [&](std::span<const double> x) {
        return (1.0 - spec.propensity(x)) * spec.control_outcome(x);
    });
    return DgpMarginals{pr_a, joint / (1.0 - pr_a)};
}

TruthRecord oracle_truth(const DgpSpec& spec, std::uint64_t draws, const RngStream& rng, int workers) {
    spec.validate();
    if (draws == 0) throw InvalidArgument("oracle Monte Carlo needs at least one draw");
    const std::uint64_t chunks = (draws + kOracleChunk - 1) / kOracleChunk;
    std::vector<OracleSums> partial(chunks);
    const int threads = workers > 0 ? workers : omp_get_max_threads();

#pragma omp parallel for schedule(static) num_threads(threads)
    for (std::int64_t c = 0; c < static_cast<std::int64_t>(chunks); ++c) {
        const auto chunk = static_cast<std::uint64_t>(c);
        const std::uint64_t count = std::min(kOracleChunk, draws - chunk * kOracleChunk);
        OracleSums& s = partial[chunk];
        draw_chunk(spec, rng, chunk, count, [&s](double g, double q) { s.add(g, q); });
    }

    OracleSums total;
    for (const auto& s : partial) total.merge(s);
    return oracle_record(total, draws);
}

TruthRecord oracle_truth_serial(const DgpSpec& spec, std::uint64_t draws, const RngStream& rng) {
    spec.validate();
    if (draws == 0) throw InvalidArgument("oracle Monte Carlo needs at least one draw");
    OracleSums total;
    for (std::uint64_t start = 0, chunk = 0; start < draws; start += kOracleChunk, ++chunk) {
        draw_chunk(spec, rng, chunk, std::min(kOracleChunk, draws - start),
                   [&total](double g, double q) { total.add(g, q); });
    }
    return oracle_record(total, draws);
}

}  // namespace xfit
