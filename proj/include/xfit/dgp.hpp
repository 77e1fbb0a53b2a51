#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xfit/data.hpp"
#include "xfit/rng.hpp"

namespace xfit {

/// Rare-outcome design: X ~ Unif(range)^d, A ~ Bern(expit(b0 + b'X)),
/// Y ~ Bern((1 - A) expit(c0 + s * sum(X))). Treatment prevents the outcome.
struct DgpSpec {
    std::size_t n = 300;
    double treatment_intercept = -1.4;
    std::vector<double> treatment_slopes{0.1, 0.1, -0.1};
    double outcome_intercept = -4.64;
    double outcome_slope_scale = 1.0 / 3.0;
    double covariate_lower = -1.0;
    double covariate_upper = 1.0;

    std::size_t dim() const noexcept { return treatment_slopes.size(); }
    double propensity(std::span<const double> x) const;
    /// E[Y | X=x, A=0].
    double control_outcome(std::span<const double> x) const;
    void validate() const;
};

Dataset sample_dgp(const DgpSpec& spec, const RngStream& rng);

enum class TruthMethod { quadrature, oracle_monte_carlo };
std::string to_string(TruthMethod m);

struct TruthRecord {
    double psi_true = 0.0;
    double theta_true = 0.0;
    TruthMethod method = TruthMethod::quadrature;
    /// Quadrature: change against a coarser rule. Monte Carlo: standard error.
    double precision_estimate = 0.0;
};

/// psi = E[g(X) Q(X)] / E[g(X)] by tensor-product Gauss-Legendre (48 nodes
/// per axis); theta = -psi since treated outcomes are identically zero.
TruthRecord compute_truth(const DgpSpec& spec);

struct DgpMarginals {
    double pr_treated = 0.0;
    double pr_outcome_given_control = 0.0;
};
DgpMarginals dgp_marginals(const DgpSpec& spec);

/// Ratio estimator sum g Q / sum g over `draws` covariate draws, with a
/// delta-method standard error. Draws are taken in fixed chunks with their
/// own substreams; `workers` (0 = OpenMP default) only changes the schedule.
TruthRecord oracle_truth(const DgpSpec& spec, std::uint64_t draws, const RngStream& rng, int workers = 0);

/// Single-threaded reference for oracle_truth: same draws, one running sum.
TruthRecord oracle_truth_serial(const DgpSpec& spec, std::uint64_t draws, const RngStream& rng);

inline constexpr std::uint64_t kOracleChunk = 1u << 16;

}  // namespace xfit
