#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "xfit/rng.hpp"

namespace xfit {

struct Observation {
    std::vector<double> x;
    int a = 0;
    double y = 0.0;
};

/// Immutable set of observations sharing a covariate dimension.
/// Covariates are stored densely, one row per observation.
class Dataset {
public:
    Dataset(Eigen::MatrixXd covariates, std::vector<int> treatment, std::vector<double> outcome);
    explicit Dataset(std::span<const Observation> observations);

    std::size_t size() const noexcept { return a_.size(); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(x_.cols()); }

    const Eigen::MatrixXd& covariates() const noexcept { return x_; }
    std::span<const int> treatment() const noexcept { return a_; }
    std::span<const double> outcome() const noexcept { return y_; }

    int a(std::size_t i) const { return a_[i]; }
    double y(std::size_t i) const { return y_[i]; }
    Observation observation(std::size_t i) const;

    /// Rows `indices` of the covariate matrix.
    Eigen::MatrixXd covariate_rows(std::span<const std::size_t> indices) const;

    std::size_t treated_count() const noexcept;

private:
    Eigen::MatrixXd x_;
    std::vector<int> a_;
    std::vector<double> y_;
};

/// Partition of observation indices into V folds of near-equal size.
/// Fold indices are 0-based in code; files print them 1-based.
class FoldPlan {
public:
    FoldPlan(std::size_t v_count, std::vector<std::size_t> assignment);

    std::size_t v_count() const noexcept { return v_count_; }
    std::size_t size() const noexcept { return assignment_.size(); }
    std::size_t fold_of(std::size_t i) const { return assignment_[i]; }
    std::span<const std::size_t> assignment() const noexcept { return assignment_; }

    /// I_v, ascending.
    std::span<const std::size_t> in_fold(std::size_t v) const { return members_.at(v); }
    /// I_v^C, ascending.
    std::vector<std::size_t> out_of_fold(std::size_t v) const;

private:
    std::size_t v_count_;
    std::vector<std::size_t> assignment_;
    std::vector<std::vector<std::size_t>> members_;
};

/// Random permutation, then contiguous chunks. The first n mod V folds get
/// one extra observation.
FoldPlan make_fold_plan(std::size_t n, std::size_t v_count, const RngStream& rng);

double treated_fraction(const Dataset& data, std::span<const std::size_t> indices);

/// Headered CSV with columns x1..xd, a, y (any order of header names is
/// rejected; the x columns must come first).
Dataset read_dataset_csv(std::istream& in);
Dataset read_dataset_csv(const std::filesystem::path& path);
void write_dataset_csv(std::ostream& out, const Dataset& data);

}  // namespace xfit
