#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "xfit/simulation.hpp"

namespace xfit {

using Json = nlohmann::ordered_json;

/// Writes through a temporary sibling file and renames it into place, so the
/// target is either complete or absent.
void write_file_atomic(const std::filesystem::path& path, const std::function<void(std::ostream&)>& writer);

/// One row per repetition x estimator. Degenerate repetitions get one row per
/// configured estimator with degenerate=1 and empty estimate fields.
void write_repetitions_csv(std::ostream& out, const std::vector<RepetitionResult>& results,
                           const std::vector<EstimatorKind>& estimators);

struct HistogramBin {
    std::string estimator;
    double lower = 0.0;
    double upper = 0.0;
    std::size_t count = 0;
};

/// Counts of every fluctuation coefficient per TMLE estimator over
/// [-range, range]; values outside are clipped into the edge bins.
std::vector<HistogramBin> epsilon_histogram(const std::vector<RepetitionResult>& results,
                                            std::size_t bins = 40, double range = 10.0);
void write_epsilon_histogram_csv(std::ostream& out, const std::vector<HistogramBin>& bins);

/// rep,estimator_kind,mrad for every TMLE outcome with an MRAD value.
void write_mrad_csv(std::ostream& out, const std::vector<RepetitionResult>& results);

/// Concordance pairs of the repetitions that kept their TMLE reports.
void write_concordance_csv(std::ostream& out, const std::vector<RepetitionResult>& results);

Json truth_to_json(const TruthRecord& truth);
TruthRecord truth_from_json(const Json& j);

Json summary_to_json(const MonteCarloSummary& summary);
MonteCarloSummary summary_from_json(const std::string& filter_label, const Json& j);

/// {"truth": ..., "summaries": {filter label: summary, ...}}.
Json summary_document(const TruthRecord& truth, const std::vector<MonteCarloSummary>& summaries);
std::vector<MonteCarloSummary> summaries_from_document(const Json& doc);

Json report_to_json(const EstimateReport& report, const DiagnosisThresholds& thresholds);

}  // namespace xfit
