#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "safeprob/distributions.hpp"
#include "safeprob/mc_oracle.hpp"
#include "safeprob/system_model.hpp"

namespace safeprob {

/// A named, ready-to-run setting: dynamics, barrier, policy and numerics
/// that are known to resolve the distributions to the shipped tolerances.
struct Example {
    std::string name;
    ControlSystem system;
    BarrierProblem barrier;
    Policy policy;
    QuerySpec query;
    PathConfig mc;
    /// Present when phi(X_t) is a Brownian motion with constant drift/vol.
    struct Analytic {
        double drift = 0.0;
        double vol = 1.0;
    };
    std::optional<Analytic> analytic;
};

std::vector<std::string> example_names();
/// Throws PreconditionError for unknown names.
Example make_example(std::string_view name);

/// drift_bm_1d with a custom drift and volatility.
Example drifted_bm_1d(double drift = 1.0, double vol = 1.0);

}  // namespace safeprob
