#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "safeprob/config.hpp"

namespace safeprob::cli {

enum ExitCode : int {
    kOk = 0,
    kValidationFailed = 1,
    kConfigError = 2,
    kSolverError = 3,
    kExcludedPaths = 4,
};

/// A required input file (config or earlier artifact) is missing or unreadable.
class InputError : public Error {
public:
    using Error::Error;
};

struct Invocation {
    std::string command;  // solve | mc | validate | report
    std::filesystem::path config;
    std::optional<std::filesystem::path> out;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> overrides;
};

/// Config file with overrides, --seed and --out applied.
nlohmann::json resolve_document(const Invocation& inv);

/// Runs a command and maps errors onto the exit-code contract.
int run(const Invocation& inv, std::ostream& out, std::ostream& err);

/// Parses argv (subcommand plus --config/--out/--seed/--override) and runs it.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

int cmd_solve(const Experiment& exp, std::ostream& out, std::ostream& err);
int cmd_mc(const Experiment& exp, std::ostream& out, std::ostream& err);
int cmd_validate(const Experiment& exp, std::ostream& out, std::ostream& err);
int cmd_report(const Experiment& exp, std::ostream& out, std::ostream& err);

/// Artifact file names, all keyed by the config hash.
std::string distribution_file(DistributionKind kind, const std::string& hash, const char* ext);
std::string mc_file(DistributionKind kind, const std::string& hash, const char* ext);
std::string field_file(DistributionKind kind, const std::string& hash);

}  // namespace safeprob::cli
