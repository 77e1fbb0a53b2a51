#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace xfit {

// Bad arguments: dimension mismatches, invalid intervals, out-of-range values.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class InvalidSplit : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

class DivisionByZero : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class RankDeficiency : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// The GLM fitter hit separation while the spec forbade it.
class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A learner cannot be trained on the given data (e.g. k > n for k-NN).
class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A fold has no treated observations, so the fold estimand is undefined.
class EstimationDegenerate : public std::runtime_error {
public:
    EstimationDegenerate(std::size_t fold, const std::string& what)
        : std::runtime_error(what), fold_(fold) {}
    std::size_t fold() const noexcept { return fold_; }

private:
    std::size_t fold_;
};

// Targeting regression has no usable observations.
class TargetingDegenerate : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SummaryError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Config/CSV parsing failure; `key` is the offending key path or line.
class ParseError : public std::runtime_error {
public:
    ParseError(std::string key, const std::string& what)
        : std::runtime_error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

}  // namespace xfit
