#include "xfit/cli.hpp"

#include <exception>
#include <fstream>
#include <ostream>

#include "xfit/diagnostics.hpp"
#include "xfit/errors.hpp"

namespace xfit {

namespace {

Json run_section(const RunConfig& config) {
    const auto& sim = config.simulation;
    Json names = Json::array();
    for (const auto& e : sim.estimators) names.push_back(e.name());
    Json learners = Json::array();
    for (const auto& l : sim.learners.candidates) learners.push_back(l.label());
    Json j{{"mode", config.mode == RunMode::simulate ? "simulate" : "estimate"},
           {"seed", sim.master_seed},
           {"folds", sim.v_folds},
           {"estimators", std::move(names)},
           {"learners", std::move(learners)},
           {"v_cv", sim.learners.v_cv},
           {"propensity_clip", Json::array({sim.learners.propensity_lower, sim.learners.propensity_upper})},
           {"logit_clip", sim.estimation.logit_clip},
           {"level", sim.estimation.level}};
    if (config.mode == RunMode::simulate) {
        j["n"] = sim.dgp.n;
        j["reps"] = sim.reps;
        j["filter"] = config.filter.label();
        j["filter_scope"] = to_string(config.filter_scope);
    }
    return j;
}

void simulate(const RunConfig& config, std::ostream& log) {
    const auto& sim = config.simulation;
    const TruthRecord truth = compute_truth(sim.dgp);
    log << "truth psi=" << truth.psi_true << " theta=" << truth.theta_true << '\n';
    const auto results = run_monte_carlo(sim, truth);

    std::vector<MonteCarloSummary> summaries{summarize(results, truth, FilterSpec{}, config.filter_scope)};
    if (config.filter.rule != FilterRule::none) {
        summaries.push_back(summarize(results, truth, config.filter, config.filter_scope));
    }
    Json doc = summary_document(truth, summaries);
    doc["run"] = run_section(config);

    const auto& dir = config.output_dir;
    std::filesystem::create_directories(dir);
    write_file_atomic(dir / "repetitions.csv",
                      [&](std::ostream& out) { write_repetitions_csv(out, results, sim.estimators); });
    write_file_atomic(dir / "summary.json", [&](std::ostream& out) { out << doc.dump(2) << '\n'; });
    write_file_atomic(dir / "concordance.csv", [&](std::ostream& out) { write_concordance_csv(out, results); });
    write_file_atomic(dir / "epsilon_histogram.csv",
                      [&](std::ostream& out) { write_epsilon_histogram_csv(out, epsilon_histogram(results)); });
    write_file_atomic(dir / "mrad.csv", [&](std::ostream& out) { write_mrad_csv(out, results); });

    for (const auto& s : summaries) {
        log << "filter " << s.filter.label() << " (" << s.degenerate_reps << " degenerate of " << s.reps_total
            << ")\n";
        for (const auto& e : s.estimators) {
            log << "  " << e.estimator << " bias=" << e.bias << " mse=" << e.mse
                << " coverage=" << e.ci_coverage.value_or(std::nan("")) << " reps=" << e.reps_used << '\n';
        }
    }
}

void estimate(const RunConfig& config, std::ostream& log) {
    const auto& sim = config.simulation;
    const Dataset data = read_dataset_csv(config.input);
    const RngStream base = RngStream{sim.master_seed, 0}.substream(0);
    const FoldPlan plan = make_fold_plan(data.size(), sim.v_folds, base.substream(2));
    const RngStream nuisance_stream = base.substream(3);
    const NuisanceFit nuisance = fit_nuisances(data, plan, sim.learners, nuisance_stream);

    std::vector<EstimateReport> reports;
    Json estimates = Json::array();
    for (const auto& kind : sim.estimators) {
        reports.push_back(run_estimator(kind, data, nuisance, sim.learners, nuisance_stream, sim.estimation));
        estimates.push_back(report_to_json(reports.back(), sim.thresholds));
        log << kind.name() << " psi=" << reports.back().psi_hat << " theta=" << reports.back().theta_hat << '\n';
    }
    const NuisanceMeta& meta = reports.front().nuisance_meta;
    Json warnings = Json::array();
    for (const auto& fold : nuisance.folds) {
        for (const auto& w : fold.warnings) warnings.push_back(w);
    }
    Json doc{{"input", config.input.string()},
             {"n", data.size()},
             {"run", run_section(config)},
             {"nuisance",
              {{"propensity_clip", Json::array({meta.clip_lower, meta.clip_upper})},
               {"q_learners", meta.q_learners},
               {"g_learners", meta.g_learners},
               {"warnings", std::move(warnings)}}},
             {"estimates", std::move(estimates)}};

    const auto& dir = config.output_dir;
    std::filesystem::create_directories(dir);
    write_file_atomic(dir / "report.json", [&](std::ostream& out) { out << doc.dump(2) << '\n'; });
    write_file_atomic(dir / "concordance.csv", [&](std::ostream& out) {
        write_concordance_header(out);
        for (const auto& r : reports) {
            if (r.kind.is_tmle()) write_concordance_rows(out, r);
        }
    });
}

Json error_record(const char* type, const std::string& message, const std::string& key = {}) {
    Json e{{"type", type}, {"message", message}};
    if (!key.empty()) e["key"] = key;
    return Json{{"error", std::move(e)}};
}

}  // namespace

void run(const RunConfig& config, std::ostream& log) {
    config.validate();
    if (config.mode == RunMode::simulate) {
        simulate(config, log);
    } else {
        estimate(config, log);
    }
}

int run_main(int argc, const char* const* argv, std::ostream& log, std::ostream& err) {
    RunConfig config;
    bool have_config = false;
    Json record;
    int status = 0;
    try {
        std::string help;
        if (!parse_command_line(argc, argv, config, help)) {
            log << help;
            return 0;
        }
        have_config = true;
        run(config, log);
        return 0;
    } catch (const ParseError& e) {
        record = error_record("parse_error", e.what(), e.key());
        status = 2;
    } catch (const InvalidArgument& e) {
        record = error_record("invalid_argument", e.what());
        status = 2;
    } catch (const EstimationDegenerate& e) {
        record = error_record("estimation_degenerate", e.what());
        status = 1;
    } catch (const SummaryError& e) {
        record = error_record("summary_error", e.what());
        status = 1;
    } catch (const std::filesystem::filesystem_error& e) {
        record = error_record("io_error", e.what());
        status = 1;
    } catch (const std::exception& e) {
        record = error_record("error", e.what());
        status = 1;
    }
    err << record.dump() << '\n';
    if (have_config) {
        try {
            std::filesystem::create_directories(config.output_dir);
            write_file_atomic(config.output_dir / "error.json",
                              [&](std::ostream& out) { out << record.dump(2) << '\n'; });
        } catch (const std::exception&) {
            // stderr already carries the record
        }
    }
    return status;
}

}  // namespace xfit
