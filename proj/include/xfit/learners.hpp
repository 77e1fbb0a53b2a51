#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "xfit/rng.hpp"

namespace xfit {

enum class LearnerKind { logistic_main_terms, boosted_stumps, knn_smoother, constant_rate };

/// Which loss a learner minimizes. `scaled` allows responses outside [0,1]
/// (bounded-outcome TMLE); only loss-based learners support it.
enum class LossMode { standard, scaled };

struct LearnerSpec {
    LearnerKind kind = LearnerKind::constant_rate;
    // boosted_stumps
    int trees = 100;
    int depth = 1;
    double learning_rate = 0.1;
    // knn_smoother
    int neighbors = 25;

    static LearnerSpec logistic() { return {LearnerKind::logistic_main_terms}; }
    static LearnerSpec constant() { return {LearnerKind::constant_rate}; }
    static LearnerSpec boosted(int trees, int depth, double learning_rate) {
        LearnerSpec s{LearnerKind::boosted_stumps};
        s.trees = trees;
        s.depth = depth;
        s.learning_rate = learning_rate;
        return s;
    }
    static LearnerSpec knn(int k) {
        LearnerSpec s{LearnerKind::knn_smoother};
        s.neighbors = k;
        return s;
    }

    void validate() const;
    bool supports(LossMode mode) const noexcept;
    /// e.g. "boosted_stumps(trees=100,depth=1,lr=0.1)".
    std::string label() const;

    friend bool operator==(const LearnerSpec&, const LearnerSpec&) = default;
};

std::string to_string(LearnerKind kind);
LearnerKind learner_kind_from_string(const std::string& name);

class RegressorModel {
public:
    virtual ~RegressorModel() = default;
    virtual double predict(std::span<const double> x) const = 0;
};

/// Immutable, shareable fitted regression function with values in [0,1].
class FittedRegressor {
public:
    FittedRegressor(std::shared_ptr<const RegressorModel> model, std::string description)
        : model_(std::move(model)), description_(std::move(description)) {}

    double predict(std::span<const double> x) const { return model_->predict(x); }
    std::vector<double> predict_rows(const Eigen::MatrixXd& x) const;
    const std::string& description() const noexcept { return description_; }

private:
    std::shared_ptr<const RegressorModel> model_;
    std::string description_;
};

/// Throws TrainingError when the data cannot support the learner.
FittedRegressor fit_learner(const LearnerSpec& spec, const Eigen::MatrixXd& covariates,
                            std::span<const double> responses, const RngStream& rng,
                            LossMode mode = LossMode::standard);

struct SuperLearnerFit {
    FittedRegressor regressor;
    std::size_t selected = 0;
    /// Cross-validated mean negative log-likelihood; NaN for failed candidates.
    std::vector<double> cv_loss;
    std::vector<std::string> warnings;
};

/// Discrete super learner: picks the candidate with the smallest v_cv-fold
/// CV log-loss (lowest index on ties) and refits it on all data.
SuperLearnerFit discrete_super_learner(std::span<const LearnerSpec> specs,
                                       const Eigen::MatrixXd& covariates,
                                       std::span<const double> responses, std::size_t v_cv,
                                       const RngStream& rng, LossMode mode = LossMode::standard);

/// Mean log-loss with predictions clipped to [1e-12, 1 - 1e-12].
double mean_log_loss(std::span<const double> responses, std::span<const double> predictions);

double clip_propensity(double raw, double lower, double upper);

/// Wraps `inner` so every prediction is clipped to [lower, upper].
FittedRegressor clip_regressor(FittedRegressor inner, double lower, double upper);

}  // namespace xfit
