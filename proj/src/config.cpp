#include "xfit/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "xfit/errors.hpp"

namespace xfit {

void RunConfig::validate() const {
    simulation.validate();
    for (const auto& b : q_bounds) b.validate();
    if (mode == RunMode::estimate && input.empty()) throw InvalidArgument("estimate mode needs an input CSV");
}

namespace {

void reject_unknown(const Json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw ParseError(path.empty() ? "<root>" : path, "expected an object");
    const std::set<std::string> keys(allowed.begin(), allowed.end());
    for (const auto& [key, value] : obj.items()) {
        if (!keys.contains(key)) throw ParseError(path.empty() ? key : path + "." + key, "unknown key");
    }
}

template <typename T>
T get_as(const Json& j, const std::string& path) {
    try {
        return j.get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ParseError(path, "wrong type");
    }
}

double get_real(const Json& j, const std::string& path) {
    if (!j.is_number()) throw ParseError(path, "expected a number");
    return j.get<double>();
}

std::size_t get_count(const Json& j, const std::string& path) {
    if (!j.is_number_integer() || j.get<std::int64_t>() < 0) throw ParseError(path, "expected a nonnegative integer");
    return j.get<std::size_t>();
}

int get_int(const Json& j, const std::string& path) {
    if (!j.is_number_integer()) throw ParseError(path, "expected an integer");
    return j.get<int>();
}

std::pair<double, double> get_interval(const Json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 2) throw ParseError(path, "expected [lower, upper]");
    return {get_real(j[0], path + "[0]"), get_real(j[1], path + "[1]")};
}

LearnerSpec parse_learner(const Json& j, const std::string& path) {
    LearnerSpec spec;
    if (j.is_string()) {
        try {
            spec.kind = learner_kind_from_string(j.get<std::string>());
        } catch (const InvalidArgument& e) {
            throw ParseError(path, e.what());
        }
        return spec;
    }
    reject_unknown(j, path, {"kind", "trees", "depth", "learning_rate", "neighbors"});
    if (!j.contains("kind")) throw ParseError(path + ".kind", "missing learner kind");
    try {
        spec.kind = learner_kind_from_string(get_as<std::string>(j.at("kind"), path + ".kind"));
    } catch (const InvalidArgument& e) {
        throw ParseError(path + ".kind", e.what());
    }
    if (j.contains("trees")) spec.trees = get_int(j.at("trees"), path + ".trees");
    if (j.contains("depth")) spec.depth = get_int(j.at("depth"), path + ".depth");
    if (j.contains("learning_rate")) spec.learning_rate = get_real(j.at("learning_rate"), path + ".learning_rate");
    if (j.contains("neighbors")) spec.neighbors = get_int(j.at("neighbors"), path + ".neighbors");
    try {
        spec.validate();
    } catch (const InvalidArgument& e) {
        throw ParseError(path, e.what());
    }
    return spec;
}

void parse_dgp(const Json& j, DgpSpec& dgp) {
    reject_unknown(j, "dgp",
                   {"treatment_intercept", "treatment_slopes", "outcome_intercept", "outcome_slope_scale",
                    "covariate_range"});
    if (j.contains("treatment_intercept")) {
        dgp.treatment_intercept = get_real(j.at("treatment_intercept"), "dgp.treatment_intercept");
    }
    if (j.contains("treatment_slopes")) {
        const auto& s = j.at("treatment_slopes");
        if (!s.is_array() || s.empty()) throw ParseError("dgp.treatment_slopes", "expected a nonempty array");
        dgp.treatment_slopes.clear();
        for (std::size_t i = 0; i < s.size(); ++i) {
            dgp.treatment_slopes.push_back(get_real(s[i], "dgp.treatment_slopes[" + std::to_string(i) + "]"));
        }
    }
    if (j.contains("outcome_intercept")) {
        dgp.outcome_intercept = get_real(j.at("outcome_intercept"), "dgp.outcome_intercept");
    }
    if (j.contains("outcome_slope_scale")) {
        dgp.outcome_slope_scale = get_real(j.at("outcome_slope_scale"), "dgp.outcome_slope_scale");
    }
    if (j.contains("covariate_range")) {
        const auto [lo, hi] = get_interval(j.at("covariate_range"), "dgp.covariate_range");
        dgp.covariate_lower = lo;
        dgp.covariate_upper = hi;
    }
}

template <typename F>
void checked(const std::string& key, F&& f) {
    try {
        f();
    } catch (const InvalidArgument& e) {
        throw ParseError(key, e.what());
    }
}

}  // namespace

std::vector<EstimatorKind> expand_estimators(const std::vector<std::string>& names,
                                             const std::vector<QBounds>& q_bounds) {
    std::vector<EstimatorKind> out;
    for (const auto& name : names) {
        EstimatorKind kind = EstimatorKind::parse(name);
        if (kind.is_trans() && !kind.q_bounds) {
            if (q_bounds.empty()) throw InvalidArgument(name + " needs q_bounds");
            for (const auto& b : q_bounds) out.push_back({kind.family, b});
        } else {
            out.push_back(kind);
        }
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            if (out[i] == out[j]) throw InvalidArgument("estimator " + out[i].name() + " listed twice");
        }
    }
    return out;
}

RunConfig parse_config_json(const Json& doc) {
    reject_unknown(doc, "",
                   {"mode", "n", "reps", "seed", "folds", "estimators", "out", "filter", "filter_scope", "input",
                    "threads", "learners", "v_cv", "propensity_clip", "logit_clip", "q_bounds", "thresholds",
                    "level", "concordance_rep", "dgp"});
    RunConfig c;
    auto& sim = c.simulation;
    if (doc.contains("mode")) {
        const auto mode = get_as<std::string>(doc.at("mode"), "mode");
        if (mode == "simulate") {
            c.mode = RunMode::simulate;
        } else if (mode == "estimate") {
            c.mode = RunMode::estimate;
        } else {
            throw ParseError("mode", "expected simulate or estimate");
        }
    }
    if (doc.contains("n")) {
        sim.dgp.n = get_count(doc.at("n"), "n");
        if (sim.dgp.n < 1) throw ParseError("n", "sample size must be positive");
    } else if (c.mode == RunMode::simulate) {
        throw ParseError("n", "simulate mode requires the sample size n");
    }
    if (doc.contains("reps")) {
        sim.reps = get_count(doc.at("reps"), "reps");
        if (sim.reps < 1) throw ParseError("reps", "at least one repetition is required");
    }
    if (doc.contains("seed")) {
        const auto& s = doc.at("seed");
        if (!s.is_number_unsigned()) throw ParseError("seed", "expected a nonnegative integer");
        sim.master_seed = s.get<std::uint64_t>();
    }
    if (doc.contains("folds")) {
        sim.v_folds = get_count(doc.at("folds"), "folds");
        if (sim.v_folds < 2) throw ParseError("folds", "at least 2 folds are required");
    }
    if (doc.contains("threads")) {
        sim.workers = get_int(doc.at("threads"), "threads");
        if (sim.workers < 0) throw ParseError("threads", "expected a nonnegative integer");
    }
    if (doc.contains("out")) c.output_dir = get_as<std::string>(doc.at("out"), "out");
    if (doc.contains("input")) c.input = get_as<std::string>(doc.at("input"), "input");
    if (doc.contains("filter")) {
        checked("filter", [&] { c.filter = FilterSpec::parse(get_as<std::string>(doc.at("filter"), "filter")); });
    }
    if (doc.contains("filter_scope")) {
        checked("filter_scope", [&] {
            c.filter_scope = filter_scope_from_string(get_as<std::string>(doc.at("filter_scope"), "filter_scope"));
        });
    }
    if (doc.contains("learners")) {
        const auto& l = doc.at("learners");
        if (!l.is_array() || l.empty()) throw ParseError("learners", "expected a nonempty array");
        sim.learners.candidates.clear();
        for (std::size_t i = 0; i < l.size(); ++i) {
            sim.learners.candidates.push_back(parse_learner(l[i], "learners[" + std::to_string(i) + "]"));
        }
    }
    if (doc.contains("v_cv")) {
        sim.learners.v_cv = get_count(doc.at("v_cv"), "v_cv");
        if (sim.learners.v_cv < 2) throw ParseError("v_cv", "at least 2 folds are required");
    }
    if (doc.contains("propensity_clip")) {
        const auto [lo, hi] = get_interval(doc.at("propensity_clip"), "propensity_clip");
        if (!(0.0 <= lo && lo < hi && hi <= 1.0)) {
            throw ParseError("propensity_clip", "expected 0 <= lower < upper <= 1");
        }
        sim.learners.propensity_lower = lo;
        sim.learners.propensity_upper = hi;
    }
    if (doc.contains("logit_clip")) {
        sim.estimation.logit_clip = get_real(doc.at("logit_clip"), "logit_clip");
        if (!(sim.estimation.logit_clip > 0.0)) throw ParseError("logit_clip", "must be positive");
    }
    if (doc.contains("level")) {
        sim.estimation.level = get_real(doc.at("level"), "level");
        if (!(sim.estimation.level > 0.0 && sim.estimation.level < 1.0)) {
            throw ParseError("level", "must lie in (0,1)");
        }
    }
    if (doc.contains("q_bounds")) {
        const auto& qb = doc.at("q_bounds");
        if (!qb.is_array()) throw ParseError("q_bounds", "expected an array of [lower, upper]");
        c.q_bounds.clear();
        for (std::size_t i = 0; i < qb.size(); ++i) {
            const std::string key = "q_bounds[" + std::to_string(i) + "]";
            const auto [lo, hi] = get_interval(qb[i], key);
            QBounds b{lo, hi};
            checked(key, [&] { b.validate(); });
            c.q_bounds.push_back(b);
        }
    }
    if (doc.contains("thresholds")) {
        const auto& t = doc.at("thresholds");
        reject_unknown(t, "thresholds", {"epsilon", "mrad"});
        if (t.contains("epsilon")) sim.thresholds.epsilon = get_real(t.at("epsilon"), "thresholds.epsilon");
        if (t.contains("mrad")) sim.thresholds.mrad = get_real(t.at("mrad"), "thresholds.mrad");
        if (sim.thresholds.epsilon < 0.0) throw ParseError("thresholds.epsilon", "must be nonnegative");
        if (sim.thresholds.mrad < 0.0) throw ParseError("thresholds.mrad", "must be nonnegative");
    }
    if (doc.contains("concordance_rep")) {
        const auto& r = doc.at("concordance_rep");
        if (r.is_null()) {
            sim.concordance_rep.reset();
        } else {
            sim.concordance_rep = get_count(r, "concordance_rep");
        }
    }
    if (doc.contains("dgp")) {
        parse_dgp(doc.at("dgp"), sim.dgp);
        checked("dgp", [&] { sim.dgp.validate(); });
    }
    if (c.mode == RunMode::estimate && c.input.empty()) {
        throw ParseError("input", "estimate mode needs an input CSV");
    }
    if (doc.contains("estimators")) {
        const auto& e = doc.at("estimators");
        if (!e.is_array() || e.empty()) throw ParseError("estimators", "expected a nonempty array of names");
        std::vector<std::string> names;
        for (std::size_t i = 0; i < e.size(); ++i) {
            names.push_back(get_as<std::string>(e[i], "estimators[" + std::to_string(i) + "]"));
        }
        checked("estimators", [&] { sim.estimators = expand_estimators(names, c.q_bounds); });
    }
    checked("", [&] { c.validate(); });
    return c;
}

bool parse_command_line(int argc, const char* const* argv, RunConfig& config, std::string& help_out) {
    CLI::App app{"Cross-fitted TMLE and DML for the mean control outcome among the treated", "xfit"};
    std::string config_path;
    std::optional<std::string> mode;
    std::optional<std::size_t> n;
    std::optional<std::size_t> reps;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> folds;
    std::optional<std::string> estimators;
    std::optional<std::string> out;
    std::optional<std::string> filter;
    std::optional<std::string> filter_scope;
    std::optional<std::string> input;
    std::optional<int> threads;
    app.add_option("--config", config_path, "JSON config file; flags override its keys");
    app.add_option("--mode", mode, "simulate or estimate");
    app.add_option("--n", n, "sample size per repetition");
    app.add_option("--reps", reps, "Monte Carlo repetitions");
    app.add_option("--seed", seed, "master seed");
    app.add_option("--folds", folds, "cross-fitting folds V");
    app.add_option("--estimators", estimators, "comma-separated estimator kinds");
    app.add_option("--out", out, "output directory");
    app.add_option("--filter", filter, "none | epsilon:T | mrad:T");
    app.add_option("--filter-scope", filter_scope, "per-estimator | run");
    app.add_option("--input", input, "input CSV (estimate mode)");
    app.add_option("--threads", threads, "worker threads (0 = all)");
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        help_out = app.help();
        return false;
    } catch (const CLI::ParseError& e) {
        throw ParseError("argv", e.what());
    }

    Json doc = Json::object();
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw ParseError("config", "cannot open " + config_path);
        try {
            doc = Json::parse(in);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError("config", std::string("malformed JSON: ") + e.what());
        }
        if (!doc.is_object()) throw ParseError("config", "top level must be an object");
    }
    if (mode) doc["mode"] = *mode;
    if (n) doc["n"] = *n;
    if (reps) doc["reps"] = *reps;
    if (seed) doc["seed"] = *seed;
    if (folds) doc["folds"] = *folds;
    if (out) doc["out"] = *out;
    if (filter) doc["filter"] = *filter;
    if (filter_scope) doc["filter_scope"] = *filter_scope;
    if (input) doc["input"] = *input;
    if (threads) doc["threads"] = *threads;
    if (estimators) {
        Json list = Json::array();
        std::stringstream ss(*estimators);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (!item.empty()) list.push_back(item);
        }
        doc["estimators"] = list;
    }
    config = parse_config_json(doc);
    return true;
}

}  // namespace xfit
