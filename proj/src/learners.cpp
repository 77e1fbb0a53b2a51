#include "xfit/learners.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "xfit/data.hpp"
#include "xfit/errors.hpp"
#include "xfit/format.hpp"
#include "xfit/glm.hpp"
#include "xfit/logistic.hpp"

namespace xfit {

std::string to_string(LearnerKind kind) {
    switch (kind) {
        case LearnerKind::logistic_main_terms: return "logistic_main_terms";
        case LearnerKind::boosted_stumps: return "boosted_stumps";
        case LearnerKind::knn_smoother: return "knn_smoother";
        case LearnerKind::constant_rate: return "constant_rate";
    }
    return "unknown";
}

LearnerKind learner_kind_from_string(const std::string& name) {
    for (auto k : {LearnerKind::logistic_main_terms, LearnerKind::boosted_stumps,
                   LearnerKind::knn_smoother, LearnerKind::constant_rate}) {
        if (to_string(k) == name) return k;
    }
    throw InvalidArgument("unknown learner kind '" + name + "'");
}

void LearnerSpec::validate() const {
    if (kind == LearnerKind::boosted_stumps) {
        if (trees < 1 || depth < 1 || !(learning_rate > 0.0)) {
            throw InvalidArgument("boosted_stumps needs positive trees, depth and learning rate");
        }
    }
    if (kind == LearnerKind::knn_smoother && neighbors < 1) {
        throw InvalidArgument("knn_smoother needs a positive neighbor count");
    }
}

bool LearnerSpec::supports(LossMode mode) const noexcept {
    return mode == LossMode::standard || kind != LearnerKind::knn_smoother;
}

std::string LearnerSpec::label() const {
    switch (kind) {
        case LearnerKind::boosted_stumps:
            return "boosted_stumps(trees=" + std::to_string(trees) + ",depth=" + std::to_string(depth) +
                   ",lr=" + format_double(learning_rate) + ")";
        case LearnerKind::knn_smoother:
            return "knn_smoother(k=" + std::to_string(neighbors) + ")";
        default:
            return to_string(kind);
    }
}

std::vector<double> FittedRegressor::predict_rows(const Eigen::MatrixXd& x) const {
    std::vector<double> out(static_cast<std::size_t>(x.rows()));
    std::vector<double> row(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) row[static_cast<std::size_t>(j)] = x(i, j);
        out[static_cast<std::size_t>(i)] = model_->predict(row);
    }
    return out;
}

namespace {

class ConstantModel final : public RegressorModel {
public:
    explicit ConstantModel(double value) : value_(value) {}
    double predict(std::span<const double>) const override { return value_; }

private:
    double value_;
};

class LogisticModel final : public RegressorModel {
public:
    explicit LogisticModel(Eigen::VectorXd beta) : beta_(std::move(beta)) {}
    double predict(std::span<const double> x) const override {
        double eta = beta_[0];
        for (std::size_t j = 0; j < x.size(); ++j) eta += beta_[static_cast<Eigen::Index>(j + 1)] * x[j];
        return expit(eta);
    }

private:
    Eigen::VectorXd beta_;
};

class KnnModel final : public RegressorModel {
public:
    KnnModel(Eigen::MatrixXd x, std::vector<double> y, std::size_t k)
        : x_(std::move(x)), y_(std::move(y)), k_(k) {}

    double predict(std::span<const double> x) const override {
        std::vector<std::pair<double, std::size_t>> dist(y_.size());
        for (std::size_t i = 0; i < y_.size(); ++i) {
            double d2 = 0.0;
            for (std::size_t j = 0; j < x.size(); ++j) {
                const double diff = x_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) - x[j];
                d2 += diff * diff;
            }
            dist[i] = {d2, i};
        }
        // pair ordering breaks distance ties by training index
        std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k_ - 1), dist.end());
        double sum = 0.0;
        for (std::size_t r = 0; r < k_; ++r) sum += y_[dist[r].second];
        return sum / static_cast<double>(k_);
    }

private:
    Eigen::MatrixXd x_;
    std::vector<double> y_;
    std::size_t k_;
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
};

class BoostedModel final : public RegressorModel {
public:
    BoostedModel(double base, std::vector<std::vector<TreeNode>> trees)
        : base_(base), trees_(std::move(trees)) {}

    double predict(std::span<const double> x) const override {
        double f = base_;
        for (const auto& tree : trees_) {
            int node = 0;
            while (tree[static_cast<std::size_t>(node)].feature >= 0) {
                const auto& t = tree[static_cast<std::size_t>(node)];
                node = x[static_cast<std::size_t>(t.feature)] <= t.threshold ? t.left : t.right;
            }
            f += tree[static_cast<std::size_t>(node)].value;
        }
        return expit(f);
    }

private:
    double base_;
    std::vector<std::vector<TreeNode>> trees_;
};

constexpr std::size_t kMaxBins = 32;
constexpr std::size_t kMinLeaf = 5;
constexpr double kLeafRidge = 1.0;

// Gradient boosting of depth-limited trees on the logit scale, Newton leaf values.
class TreeBooster {
public:
    TreeBooster(const Eigen::MatrixXd& x, std::span<const double> y, const LearnerSpec& spec)
        : x_(x), y_(y), spec_(spec), n_(y.size()), d_(static_cast<std::size_t>(x.cols())) {
        cuts_.resize(d_);
        bins_.assign(n_ * d_, 0);
        std::vector<double> col(n_);
        for (std::size_t j = 0; j < d_; ++j) {
            for (std::size_t i = 0; i < n_; ++i) col[i] = x_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            std::vector<double> sorted = col;
            std::sort(sorted.begin(), sorted.end());
            auto& cuts = cuts_[j];
            for (std::size_t b = 1; b < kMaxBins; ++b) {
                const double c = sorted[std::min(n_ - 1, b * n_ / kMaxBins)];
                if (c < sorted.back() && (cuts.empty() || c > cuts.back())) cuts.push_back(c);
            }
            for (std::size_t i = 0; i < n_; ++i) {
                bins_[i * d_ + j] = static_cast<std::uint8_t>(
                    std::lower_bound(cuts.begin(), cuts.end(), col[i]) - cuts.begin());
            }
        }
    }

    std::shared_ptr<const RegressorModel> fit(double base) {
        std::vector<double> f(n_, base);
        std::vector<double> grad(n_);
        std::vector<double> hess(n_);
        std::vector<std::vector<TreeNode>> trees;
        trees.reserve(static_cast<std::size_t>(spec_.trees));
        std::vector<std::size_t> all(n_);
        std::iota(all.begin(), all.end(), std::size_t{0});
        for (int t = 0; t < spec_.trees; ++t) {
            for (std::size_t i = 0; i < n_; ++i) {
                const double p = expit(f[i]);
                grad[i] = y_[i] - p;
                hess[i] = p * (1.0 - p);
            }
            std::vector<TreeNode> tree;
            grow(tree, all, grad, hess, 0);
            for (std::size_t i = 0; i < n_; ++i) f[i] += leaf_value(tree, i);
            trees.push_back(std::move(tree));
        }
        return std::make_shared<BoostedModel>(base, std::move(trees));
    }

private:
    double leaf_value(const std::vector<TreeNode>& tree, std::size_t i) const {
        int node = 0;
        while (tree[static_cast<std::size_t>(node)].feature >= 0) {
            const auto& t = tree[static_cast<std::size_t>(node)];
            node = x_(static_cast<Eigen::Index>(i), t.feature) <= t.threshold ? t.left : t.right;
        }
        return tree[static_cast<std::size_t>(node)].value;
    }

    int grow(std::vector<TreeNode>& tree, const std::vector<std::size_t>& rows,
             const std::vector<double>& grad, const std::vector<double>& hess, int depth) {
        double g_total = 0.0;
        double h_total = 0.0;
        for (std::size_t i : rows) {
            g_total += grad[i];
            h_total += hess[i];
        }
        const int id = static_cast<int>(tree.size());
        tree.push_back(TreeNode{});
        tree.back().value = spec_.learning_rate * g_total / (h_total + kLeafRidge);
        if (depth >= spec_.depth || rows.size() < 2 * kMinLeaf) return id;

        const double parent = g_total * g_total / (h_total + kLeafRidge);
        double best_gain = 1e-12;
        int best_feature = -1;
        std::size_t best_bin = 0;
        std::vector<double> g_hist(kMaxBins);
        std::vector<double> h_hist(kMaxBins);
        std::vector<std::size_t> c_hist(kMaxBins);
        for (std::size_t j = 0; j < d_; ++j) {
            const std::size_t nbins = cuts_[j].size() + 1;
            if (nbins < 2) continue;
            std::fill(g_hist.begin(), g_hist.end(), 0.0);
            std::fill(h_hist.begin(), h_hist.end(), 0.0);
            std::fill(c_hist.begin(), c_hist.end(), 0);
            for (std::size_t i : rows) {
                const auto b = bins_[i * d_ + j];
                g_hist[b] += grad[i];
                h_hist[b] += hess[i];
                ++c_hist[b];
            }
            double gl = 0.0;
            double hl = 0.0;
            std::size_t cl = 0;
            for (std::size_t b = 0; b + 1 < nbins; ++b) {
                gl += g_hist[b];
                hl += h_hist[b];
                cl += c_hist[b];
                const std::size_t cr = rows.size() - cl;
                if (cl < kMinLeaf || cr < kMinLeaf) continue;
                const double gr = g_total - gl;
                const double hr = h_total - hl;
                const double gain = gl * gl / (hl + kLeafRidge) + gr * gr / (hr + kLeafRidge) - parent;
                if (gain > best_gain) {
                    best_gain = gain;
                    best_feature = static_cast<int>(j);
                    best_bin = b;
                }
            }
        }
        if (best_feature < 0) return id;

        const double threshold = cuts_[static_cast<std::size_t>(best_feature)][best_bin];
        std::vector<std::size_t> left_rows;
        std::vector<std::size_t> right_rows;
        for (std::size_t i : rows) {
            (bins_[i * d_ + static_cast<std::size_t>(best_feature)] <= best_bin ? left_rows : right_rows).push_back(i);
        }
        const int left = grow(tree, left_rows, grad, hess, depth + 1);
        const int right = grow(tree, right_rows, grad, hess, depth + 1);
        auto& node = tree[static_cast<std::size_t>(id)];
        node.feature = best_feature;
        node.threshold = threshold;
        node.left = left;
        node.right = right;
        return id;
    }

    const Eigen::MatrixXd& x_;
    std::span<const double> y_;
    const LearnerSpec& spec_;
    std::size_t n_;
    std::size_t d_;
    std::vector<std::vector<double>> cuts_;
    std::vector<std::uint8_t> bins_;
};

void validate_training(const Eigen::MatrixXd& x, std::span<const double> y, LossMode mode) {
    if (static_cast<std::size_t>(x.rows()) != y.size()) {
        throw InvalidArgument("learner covariates and responses differ in length");
    }
    for (double v : y) {
        if (!std::isfinite(v)) throw InvalidArgument("learner responses must be finite");
        if (mode == LossMode::standard && (v < 0.0 || v > 1.0)) {
            throw InvalidArgument("learner responses must lie in [0,1]");
        }
    }
    if (y.size() < 2) throw TrainingError("learner needs at least 2 observations");
}

double mean_of(std::span<const double> y) {
    return std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
}

}  // namespace

FittedRegressor fit_learner(const LearnerSpec& spec, const Eigen::MatrixXd& covariates,
                            std::span<const double> responses, const RngStream& rng, LossMode mode) {
    (void)rng;  // every learner in the family is deterministic given the data
    spec.validate();
    validate_training(covariates, responses, mode);
    if (!spec.supports(mode)) {
        throw InvalidArgument(spec.label() + " cannot be trained under the scaled logistic loss");
    }
    const double mean = mean_of(responses);

    switch (spec.kind) {
        case LearnerKind::constant_rate:
            return FittedRegressor(std::make_shared<ConstantModel>(std::clamp(mean, 0.0, 1.0)), spec.label());

        case LearnerKind::logistic_main_terms: {
            const std::size_t n = responses.size();
            GlmSpec glm;
            glm.include_intercept = true;
            glm.design_columns = static_cast<std::size_t>(covariates.cols());
            const std::vector<double> zeros(n, 0.0);
            const std::vector<double> ones(n, 1.0);
            GlmFit fit;
            try {
                fit = mode == LossMode::standard ? fit_glm_logistic(responses, covariates, zeros, ones, glm)
                                                 : scaled_logistic_fit(responses, covariates, zeros, ones, glm);
            } catch (const RankDeficiency& e) {
                throw TrainingError(std::string("logistic_main_terms: ") + e.what());
            }
            return FittedRegressor(std::make_shared<LogisticModel>(fit.coefficients), spec.label());
        }

        case LearnerKind::boosted_stumps: {
            if (mean <= 0.0 || mean >= 1.0) {
                return FittedRegressor(std::make_shared<ConstantModel>(std::clamp(mean, 0.0, 1.0)), spec.label());
            }
            TreeBooster booster(covariates, responses, spec);
            return FittedRegressor(booster.fit(logit(mean)), spec.label());
        }

        case LearnerKind::knn_smoother: {
            const auto k = static_cast<std::size_t>(spec.neighbors);
            if (k > responses.size()) {
                throw TrainingError("knn_smoother: k=" + std::to_string(k) + " exceeds " +
                                    std::to_string(responses.size()) + " observations");
            }
            return FittedRegressor(
                std::make_shared<KnnModel>(covariates, std::vector<double>(responses.begin(), responses.end()), k),
                spec.label());
        }
    }
    throw InvalidArgument("unknown learner kind");
}

double mean_log_loss(std::span<const double> responses, std::span<const double> predictions) {
    if (responses.size() != predictions.size() || responses.empty()) {
        throw InvalidArgument("log-loss inputs must be nonempty and of equal length");
    }
    constexpr double eps = 1e-12;
    double total = 0.0;
    for (std::size_t i = 0; i < responses.size(); ++i) {
        const double p = std::clamp(predictions[i], eps, 1.0 - eps);
        total -= responses[i] * std::log(p) + (1.0 - responses[i]) * std::log1p(-p);
    }
    return total / static_cast<double>(responses.size());
}

SuperLearnerFit discrete_super_learner(std::span<const LearnerSpec> specs,
                                       const Eigen::MatrixXd& covariates,
                                       std::span<const double> responses, std::size_t v_cv,
                                       const RngStream& rng, LossMode mode) {
    if (specs.empty()) throw InvalidArgument("super learner needs at least one candidate");
    validate_training(covariates, responses, mode);
    const std::size_t n = responses.size();
    if (v_cv < 2 || n < 2 * v_cv) {
        throw TrainingError("super learner needs n >= 2*v_cv (n=" + std::to_string(n) +
                            ", v_cv=" + std::to_string(v_cv) + ")");
    }

    const FoldPlan plan = make_fold_plan(n, v_cv, rng.substream(0));
    std::vector<double> cv_loss(specs.size(), std::numeric_limits<double>::quiet_NaN());
    std::vector<std::string> warnings;

    std::vector<std::vector<std::size_t>> train_idx(v_cv);
    std::vector<Eigen::MatrixXd> train_x(v_cv);
    std::vector<std::vector<double>> train_y(v_cv);
    std::vector<Eigen::MatrixXd> test_x(v_cv);
    for (std::size_t v = 0; v < v_cv; ++v) {
        train_idx[v] = plan.out_of_fold(v);
        train_x[v].resize(static_cast<Eigen::Index>(train_idx[v].size()), covariates.cols());
        for (std::size_t r = 0; r < train_idx[v].size(); ++r) {
            train_x[v].row(static_cast<Eigen::Index>(r)) = covariates.row(static_cast<Eigen::Index>(train_idx[v][r]));
            train_y[v].push_back(responses[train_idx[v][r]]);
        }
        const auto in = plan.in_fold(v);
        test_x[v].resize(static_cast<Eigen::Index>(in.size()), covariates.cols());
        for (std::size_t r = 0; r < in.size(); ++r) {
            test_x[v].row(static_cast<Eigen::Index>(r)) = covariates.row(static_cast<Eigen::Index>(in[r]));
        }
    }

    for (std::size_t c = 0; c < specs.size(); ++c) {
        std::vector<double> held_out_pred(n);
        try {
            for (std::size_t v = 0; v < v_cv; ++v) {
                const auto fitted = fit_learner(specs[c], train_x[v], train_y[v],
                                                rng.substream(1 + c).substream(v), mode);
                const auto pred = fitted.predict_rows(test_x[v]);
                const auto in = plan.in_fold(v);
                for (std::size_t r = 0; r < in.size(); ++r) held_out_pred[in[r]] = pred[r];
            }
            cv_loss[c] = mean_log_loss(responses, held_out_pred);
        } catch (const TrainingError& e) {
            warnings.push_back("candidate " + std::to_string(c) + " (" + specs[c].label() +
                               ") skipped: " + e.what());
        }
    }

    std::size_t best = specs.size();
    for (std::size_t c = 0; c < specs.size(); ++c) {
        if (std::isnan(cv_loss[c])) continue;
        if (best == specs.size() || cv_loss[c] < cv_loss[best]) best = c;
    }
    if (best == specs.size()) throw TrainingError("every super learner candidate failed to train");

    auto refit = fit_learner(specs[best], covariates, responses, rng.substream(1 + best).substream(v_cv), mode);
    return SuperLearnerFit{std::move(refit), best, std::move(cv_loss), std::move(warnings)};
}

double clip_propensity(double raw, double lower, double upper) {
    if (!(lower >= 0.0 && lower < upper && upper <= 1.0)) {
        throw InvalidArgument("propensity clip bounds must satisfy 0 <= lower < upper <= 1");
    }
    return std::min(std::max(raw, lower), upper);
}

namespace {

class ClippedModel final : public RegressorModel {
public:
    ClippedModel(FittedRegressor inner, double lower, double upper)
        : inner_(std::move(inner)), lower_(lower), upper_(upper) {}
    double predict(std::span<const double> x) const override {
        return clip_propensity(inner_.predict(x), lower_, upper_);
    }

private:
    FittedRegressor inner_;
    double lower_;
    double upper_;
};

}  // namespace

FittedRegressor clip_regressor(FittedRegressor inner, double lower, double upper) {
    clip_propensity(lower, lower, upper);  // validates the bounds
    std::string desc = inner.description() + " clipped to [" + format_double(lower) + "," +
                       format_double(upper) + "]";
    return FittedRegressor(std::make_shared<ClippedModel>(std::move(inner), lower, upper), std::move(desc));
}

}  // namespace xfit
