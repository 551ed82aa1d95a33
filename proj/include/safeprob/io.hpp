#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "safeprob/distributions.hpp"
#include "safeprob/mc_oracle.hpp"
#include "safeprob/summary.hpp"

namespace safeprob::io {

// All writers use a fixed number format and no timestamps, so identical
// inputs give byte-identical files.

/// Long format: state, phi, x1..xn, t, level, value[, band].
void write_distribution_csv(const std::filesystem::path& path,
                            const std::vector<DistributionResult>& results,
                            const BarrierProblem& bar);

nlohmann::json diagnostics_json(const Diagnostics& d);
nlohmann::json summary_json(const SummaryStats& s);
nlohmann::json distribution_json(const std::vector<DistributionResult>& results);
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

/// Grid metadata plus row-major node values.
nlohmann::json field_json(const GridSpec& grid, const std::vector<double>& values, double time);
/// x1..xn, value; one row per node.
void write_field_csv(const std::filesystem::path& path, const GridSpec& grid,
                     const std::vector<double>& values);

/// path, min_phi, max_phi, exit_time, entry_time, exit_censored, entry_censored, status
void write_path_log_csv(const std::filesystem::path& path, const PathEnsemble& ens);

struct FieldRecord {
    GridSpec grid;
    std::vector<double> values;
    double time = 0.0;
};
FieldRecord read_field_json(const std::filesystem::path& path);

/// One curve of a distribution CSV: (state, level) -> value over t.
struct Curve {
    std::size_t state = 0;
    double level = 0.0;
    std::vector<double> times;
    std::vector<double> values;
};
/// Reads a distribution CSV back into curves, in file order.
std::vector<Curve> read_distribution_csv(const std::filesystem::path& path);

std::string format_number(double v);

}  // namespace safeprob::io
