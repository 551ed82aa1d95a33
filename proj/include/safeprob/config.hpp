#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "safeprob/builtins.hpp"
#include "safeprob/distributions.hpp"
#include "safeprob/errors.hpp"
#include "safeprob/mc_oracle.hpp"

namespace safeprob {

/// Invalid or inconsistent configuration; `pointer` is the JSON pointer of
/// the offending key.
class ConfigError : public Error {
public:
    ConfigError(std::string pointer, const std::string& what)
        : Error(what + " (at " + (pointer.empty() ? std::string("/") : pointer) + ")"),
          pointer_(std::move(pointer)) {}
    const std::string& pointer() const noexcept { return pointer_; }

private:
    std::string pointer_;
};

/// Schema shipped with the tool (config/schema.json).
const nlohmann::json& experiment_schema();

/// Validates `doc` against a JSON-schema subset: type, properties, required,
/// additionalProperties, enum, minimum, maximum, exclusiveMinimum, items,
/// minItems, maxItems. Throws ConfigError at the first violation.
void validate_schema(const nlohmann::json& doc, const nlohmann::json& schema);

/// Sets a dotted key ("numerics.dt", "query.states.0") to a value parsed as
/// JSON, or taken as a string when it is not valid JSON.
void apply_override(nlohmann::json& doc, std::string_view assignment);

/// FNV-1a over the canonical dump, with the output section removed.
std::string config_hash(const nlohmann::json& doc);

struct ValidateSettings {
    bool monte_carlo = true;
    bool boundary_check = true;
    double ks_mc = 0.02;
    double ks_analytic = 5e-3;
    double complementarity = 1e-6;
    double monotone = 1e-7;
    double range = 1e-8;
    double boundary = 1e-3;
    std::vector<std::filesystem::path> artifacts;
};

struct OutputSettings {
    std::filesystem::path dir = "out";
    bool csv = true;
    bool json = true;
};

/// A fully resolved experiment: model, query and run settings.
struct Experiment {
    explicit Experiment(Example m) : model(std::move(m)) {}

    nlohmann::json document;
    std::string hash;
    Example model;
    std::vector<DistributionKind> kinds;
    std::vector<double> levels;  // one solve per entry
    double mc_delta = 0.05;
    double max_excluded_fraction = 0.01;
    bool path_log = false;
    ValidateSettings validate;
    std::optional<DistributionKind> report_kind;
    OutputSettings output;

    const ControlSystem& system() const { return model.system; }
    const BarrierProblem& barrier() const { return model.barrier; }
    const Policy& policy() const { return model.policy; }
    QuerySpec query_at(double level) const;
};

nlohmann::json load_json(const std::filesystem::path& path);

/// Schema validation followed by model construction. Builtin sections
/// supply defaults for query, numerics and mc.
Experiment build_experiment(const nlohmann::json& doc);

/// If phi(X_t) is a Brownian motion with constant drift and volatility on
/// the grid (1D, constant closed-loop coefficients, affine phi), returns them.
std::optional<Example::Analytic> detect_analytic(const ControlSystem& sys,
                                                 const BarrierProblem& bar, const Policy& policy,
                                                 const GridSpec& grid);

}  // namespace safeprob
