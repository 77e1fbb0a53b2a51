#include "xfit/output.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>

#include "xfit/diagnostics.hpp"
#include "xfit/errors.hpp"
#include "xfit/format.hpp"

namespace xfit {

void write_file_atomic(const std::filesystem::path& path, const std::function<void(std::ostream&)>& writer) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        try {
            writer(out);
        } catch (...) {
            out.close();
            std::filesystem::remove(tmp);
            throw;
        }
        out.flush();
        if (!out) {
            out.close();
            std::filesystem::remove(tmp);
            throw std::runtime_error("write failed for " + path.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

namespace {

std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }
std::string opt(const std::optional<bool>& v) { return v ? (*v ? "1" : "0") : std::string(); }
const char* flag(bool b) { return b ? "1" : "0"; }

Json number(double v) {
    if (!std::isfinite(v)) return nullptr;
    return v;
}

Json number(const std::optional<double>& v) {
    if (!v) return nullptr;
    return number(*v);
}

double get_number(const Json& j) {
    if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
    return j.get<double>();
}

std::optional<double> get_optional(const Json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}

Json interval_json(const std::optional<WaldInterval>& ci) {
    if (!ci) return nullptr;
    return Json{{"estimate", number(ci->estimate)},
                {"standard_error", number(ci->standard_error)},
                {"lower", number(ci->lower)},
                {"upper", number(ci->upper)},
                {"level", ci->level}};
}

}  // namespace

void write_repetitions_csv(std::ostream& out, const std::vector<RepetitionResult>& results,
                           const std::vector<EstimatorKind>& estimators) {
    out << "rep,estimator_kind,degenerate,psi_hat,theta_hat,psi_se,psi_lower,psi_upper,theta_se,theta_lower,"
           "theta_upper,covered,psi_covered,negative,max_abs_epsilon,mrad,epsilon_flag,mrad_flag,any_diverged\n";
    std::vector<const RepetitionResult*> ordered;
    for (const auto& r : results) ordered.push_back(&r);
    std::sort(ordered.begin(), ordered.end(), [](auto* a, auto* b) { return a->rep < b->rep; });
    for (const auto* r : ordered) {
        if (r->degenerate) {
            for (const auto& k : estimators) out << r->rep << ',' << k.name() << ",1,,,,,,,,,,,,,,,,\n";
            continue;
        }
        for (const auto& o : r->outcomes) {
            out << r->rep << ',' << o.kind.name() << ",0," << format_double(o.psi_hat) << ','
                << format_double(o.theta_hat) << ',';
            if (o.psi_ci) {
                out << format_double(o.psi_ci->standard_error) << ',' << format_double(o.psi_ci->lower) << ','
                    << format_double(o.psi_ci->upper) << ',';
            } else {
                out << ",,,";
            }
            if (o.theta_ci) {
                out << format_double(o.theta_ci->standard_error) << ',' << format_double(o.theta_ci->lower) << ','
                    << format_double(o.theta_ci->upper) << ',';
            } else {
                out << ",,,";
            }
            out << opt(o.covered) << ',' << opt(o.psi_covered) << ',' << flag(o.negative) << ',';
            if (o.kind.is_tmle()) {
                out << format_double(o.max_abs_epsilon);
            }
            out << ',' << opt(o.mrad) << ',' << flag(o.epsilon_flag) << ',' << flag(o.mrad_flag) << ','
                << flag(o.any_diverged) << '\n';
        }
    }
}

std::vector<HistogramBin> epsilon_histogram(const std::vector<RepetitionResult>& results, std::size_t bins,
                                            double range) {
    if (bins < 1 || !(range > 0.0)) throw InvalidArgument("histogram needs bins >= 1 and a positive range");
    std::vector<std::string> names;
    std::vector<std::vector<std::size_t>> counts;
    std::vector<const RepetitionResult*> ordered;
    for (const auto& r : results) ordered.push_back(&r);
    std::sort(ordered.begin(), ordered.end(), [](auto* a, auto* b) { return a->rep < b->rep; });
    const double width = 2.0 * range / static_cast<double>(bins);
    for (const auto* r : ordered) {
        for (const auto& o : r->outcomes) {
            if (!o.kind.is_tmle()) continue;
            const std::string name = o.kind.name();
            auto it = std::find(names.begin(), names.end(), name);
            std::size_t k = static_cast<std::size_t>(it - names.begin());
            if (it == names.end()) {
                names.push_back(name);
                counts.emplace_back(bins, 0);
            }
            for (const auto& f : o.fluctuations) {
                double e = f.epsilon;
                if (std::isnan(e)) continue;
                e = std::clamp(e, -range, range);
                auto b = static_cast<std::size_t>(std::floor((e + range) / width));
                counts[k][std::min(b, bins - 1)] += 1;
            }
        }
    }
    std::vector<HistogramBin> out;
    for (std::size_t k = 0; k < names.size(); ++k) {
        for (std::size_t b = 0; b < bins; ++b) {
            out.push_back({names[k], -range + width * static_cast<double>(b),
                           -range + width * static_cast<double>(b + 1), counts[k][b]});
        }
    }
    return out;
}

void write_epsilon_histogram_csv(std::ostream& out, const std::vector<HistogramBin>& bins) {
    out << "estimator_kind,bin_lower,bin_upper,count\n";
    for (const auto& b : bins) {
        out << b.estimator << ',' << format_double(b.lower) << ',' << format_double(b.upper) << ',' << b.count
            << '\n';
    }
}

void write_mrad_csv(std::ostream& out, const std::vector<RepetitionResult>& results) {
    out << "rep,estimator_kind,mrad\n";
    std::vector<const RepetitionResult*> ordered;
    for (const auto& r : results) ordered.push_back(&r);
    std::sort(ordered.begin(), ordered.end(), [](auto* a, auto* b) { return a->rep < b->rep; });
    for (const auto* r : ordered) {
        for (const auto& o : r->outcomes) {
            if (o.mrad) out << r->rep << ',' << o.kind.name() << ',' << format_double(*o.mrad) << '\n';
        }
    }
}

void write_concordance_csv(std::ostream& out, const std::vector<RepetitionResult>& results) {
    write_concordance_header(out);
    std::vector<const RepetitionResult*> ordered;
    for (const auto& r : results) ordered.push_back(&r);
    std::sort(ordered.begin(), ordered.end(), [](auto* a, auto* b) { return a->rep < b->rep; });
    for (const auto* r : ordered) {
        for (const auto& report : r->concordance_reports) write_concordance_rows(out, report);
    }
}

// ---------------------------------------------------------------------------
// JSON

Json truth_to_json(const TruthRecord& truth) {
    return Json{{"psi_true", number(truth.psi_true)},
                {"theta_true", number(truth.theta_true)},
                {"method", to_string(truth.method)},
                {"precision_estimate", number(truth.precision_estimate)}};
}

TruthRecord truth_from_json(const Json& j) {
    TruthRecord t;
    t.psi_true = get_number(j.at("psi_true"));
    t.theta_true = get_number(j.at("theta_true"));
    const auto method = j.at("method").get<std::string>();
    if (method == to_string(TruthMethod::quadrature)) {
        t.method = TruthMethod::quadrature;
    } else if (method == to_string(TruthMethod::oracle_monte_carlo)) {
        t.method = TruthMethod::oracle_monte_carlo;
    } else {
        throw ParseError("truth.method", "unknown truth method '" + method + "'");
    }
    t.precision_estimate = get_number(j.at("precision_estimate"));
    return t;
}

Json summary_to_json(const MonteCarloSummary& summary) {
    Json estimators = Json::object();
    for (const auto& s : summary.estimators) {
        estimators[s.estimator] = Json{{"reps_used", s.reps_used},
                                       {"bias", number(s.bias)},
                                       {"bias_se", number(s.bias_se)},
                                       {"mse", number(s.mse)},
                                       {"variance", number(s.variance)},
                                       {"ci_coverage", number(s.ci_coverage)},
                                       {"coverage_se", number(s.coverage_se)},
                                       {"negative_proportion", number(s.negative_proportion)},
                                       {"psi_mean", number(s.psi_mean)},
                                       {"psi_median", number(s.psi_median)},
                                       {"psi_bias", number(s.psi_bias)},
                                       {"psi_ci_coverage", number(s.psi_ci_coverage)}};
    }
    return Json{{"scope", to_string(summary.scope)},
                {"reps_total", summary.reps_total},
                {"degenerate_reps", summary.degenerate_reps},
                {"estimators", std::move(estimators)}};
}

MonteCarloSummary summary_from_json(const std::string& filter_label, const Json& j) {
    MonteCarloSummary m;
    m.filter = FilterSpec::parse(filter_label);
    m.scope = filter_scope_from_string(j.at("scope").get<std::string>());
    m.reps_total = j.at("reps_total").get<std::size_t>();
    m.degenerate_reps = j.at("degenerate_reps").get<std::size_t>();
    for (const auto& [name, e] : j.at("estimators").items()) {
        EstimatorSummary s;
        s.estimator = name;
        s.reps_used = e.at("reps_used").get<std::size_t>();
        s.bias = get_number(e.at("bias"));
        s.bias_se = get_number(e.at("bias_se"));
        s.mse = get_number(e.at("mse"));
        s.variance = get_number(e.at("variance"));
        s.ci_coverage = get_optional(e.at("ci_coverage"));
        s.coverage_se = get_optional(e.at("coverage_se"));
        s.negative_proportion = get_number(e.at("negative_proportion"));
        s.psi_mean = get_number(e.at("psi_mean"));
        s.psi_median = get_number(e.at("psi_median"));
        s.psi_bias = get_number(e.at("psi_bias"));
        s.psi_ci_coverage = get_optional(e.at("psi_ci_coverage"));
        m.estimators.push_back(std::move(s));
    }
    return m;
}

Json summary_document(const TruthRecord& truth, const std::vector<MonteCarloSummary>& summaries) {
    Json by_filter = Json::object();
    for (const auto& s : summaries) by_filter[s.filter.label()] = summary_to_json(s);
    return Json{{"truth", truth_to_json(truth)}, {"summaries", std::move(by_filter)}};
}

std::vector<MonteCarloSummary> summaries_from_document(const Json& doc) {
    std::vector<MonteCarloSummary> out;
    for (const auto& [label, s] : doc.at("summaries").items()) out.push_back(summary_from_json(label, s));
    return out;
}

Json report_to_json(const EstimateReport& report, const DiagnosisThresholds& thresholds) {
    Json fluct = Json::array();
    for (const auto& f : report.fluctuations) {
        fluct.push_back(Json{{"fold", f.fold ? Json(*f.fold + 1) : Json(nullptr)},
                             {"epsilon", number(f.epsilon)},
                             {"diverged", f.diverged},
                             {"targeting_mode", to_string(f.targeting_mode)}});
    }
    Json residuals = Json::array();
    for (double r : report.estimating_equation_residuals) residuals.push_back(number(r));
    Json j{{"estimator_kind", report.kind.name()},
           {"psi_hat", number(report.psi_hat)},
           {"theta_hat", number(report.theta_hat)},
           {"psi_ci", interval_json(report.psi_ci)},
           {"theta_ci", interval_json(report.theta_ci)},
           {"fluctuations", std::move(fluct)},
           {"estimating_equation_residuals", std::move(residuals)},
           {"mrad", number(report.mrad)}};
    if (report.kind.is_tmle()) {
        const DiagnosisReport d = diagnose(report, thresholds);
        j["diagnosis"] = Json{{"max_abs_epsilon", number(d.max_abs_epsilon)},
                              {"epsilon_flag", d.epsilon_flag},
                              {"mrad", number(d.mrad)},
                              {"mrad_flag", d.mrad_flag},
                              {"epsilon_threshold", number(thresholds.epsilon)},
                              {"mrad_threshold", number(thresholds.mrad)}};
    } else {
        j["diagnosis"] = nullptr;
    }
    return j;
}

}  // namespace xfit
