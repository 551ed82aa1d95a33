#include "safeprob/mc_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <random>

#include <boost/random/normal_distribution.hpp>

#include "safeprob/errors.hpp"

namespace safeprob {

void PathConfig::validate() const {
    if (!(dt > 0.0)) throw PreconditionError("dt_sim must be positive");
    if (!(horizon >= dt)) throw PreconditionError("dt_sim must not exceed the horizon");
    if (n_paths < 1) throw PreconditionError("n_paths must be at least 1");
}

std::uint64_t path_stream_seed(std::uint64_t seed, std::uint64_t path) noexcept {
    // splitmix64 finaliser over a (seed, path) counter
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (path + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

namespace {

PathRecord simulate_one(const ControlSystem& sys, const BarrierProblem& bar, const Policy& policy,
                        const Vec& x0, double level, int steps, double dt, std::uint64_t stream) {
    std::mt19937_64 gen(stream);
    boost::random::normal_distribution<double> normal(0.0, 1.0);
    const double sqrt_dt = std::sqrt(dt);
    const int k = sys.dim_noise();

    PathRecord rec;
    Vec x = x0;
    double phi = bar.value(x);
    rec.min_phi = rec.max_phi = phi;
    if (phi <= level) rec.exit_time = 0.0;
    if (phi >= level) rec.entry_time = 0.0;

    Vec dw(k);
    Vec u = Vec::Zero(sys.dim_input());
    const bool open_loop = policy.kind == FilterKind::none;
    for (int s = 0; s < steps; ++s) {
        try {
            if (!open_loop || s == 0) u = closed_loop_control(policy, sys, bar, x);
            else if (policy.nominal) u = policy.nominal(x);
        } catch (const InfeasibleError&) {
            rec.status = PathStatus::infeasible;
            return rec;
        }
        for (int j = 0; j < k; ++j) dw[j] = sqrt_dt * normal(gen);
        x += (sys.drift(x) + sys.actuation(x) * u) * dt + sys.noise(x) * dw;
        if (!x.allFinite() || x.cwiseAbs().maxCoeff() > 1e8) {
            rec.status = PathStatus::diverged;
            return rec;
        }
        const double next = bar.value(x);
        const double t0 = s * dt;
        if (rec.exit_time == kNoEvent && next <= level) {
            rec.exit_time = t0 + dt * (phi - level) / (phi - next);
        }
        if (rec.entry_time == kNoEvent && next >= level) {
            rec.entry_time = t0 + dt * (level - phi) / (next - phi);
        }
        rec.min_phi = std::min(rec.min_phi, next);
        rec.max_phi = std::max(rec.max_phi, next);
        phi = next;
    }
    return rec;
}

}  // namespace

PathEnsemble simulate_paths(const ControlSystem& sys, const BarrierProblem& bar,
                            const Policy& policy, const Vec& x0, const PathConfig& cfg) {
    cfg.validate();
    sys.require_state(x0);
    const int steps = std::max(1, static_cast<int>(std::ceil(cfg.horizon / cfg.dt - 1e-9)));
    const double dt = cfg.horizon / steps;

    PathEnsemble ens;
    ens.level = bar.level();
    ens.phi0 = bar.value(x0);
    ens.config = cfg;
    ens.paths.resize(cfg.n_paths);

    const auto n = static_cast<std::int64_t>(cfg.n_paths);
    if (cfg.backend == Backend::serial) {
        for (std::int64_t p = 0; p < n; ++p) {
            ens.paths[p] = simulate_one(sys, bar, policy, x0, ens.level, steps, dt,
                                        path_stream_seed(cfg.seed, p));
        }
    } else {
        std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 64)
        for (std::int64_t p = 0; p < n; ++p) {
            try {
                ens.paths[p] = simulate_one(sys, bar, policy, x0, ens.level, steps, dt,
                                            path_stream_seed(cfg.seed, p));
            } catch (...) {
#pragma omp critical(safeprob_mc_failure)
                if (!failure) failure = std::current_exception();
            }
        }
        if (failure) std::rethrow_exception(failure);
    }
    for (const PathRecord& r : ens.paths) {
        if (r.status == PathStatus::infeasible) ++ens.infeasible;
        if (r.status == PathStatus::diverged) ++ens.diverged;
    }
    return ens;
}

double dkw_half_width(std::size_t n, double delta) {
    if (n == 0) throw DataError("DKW band needs at least one sample");
    if (!(delta > 0.0 && delta < 1.0)) throw DomainError("DKW confidence delta must lie in (0,1)");
    return std::sqrt(std::log(2.0 / delta) / (2.0 * static_cast<double>(n)));
}

double EmpiricalDistribution::cdf(double x) const {
    if (total == 0) return 0.0;
    const auto k = std::upper_bound(samples.begin(), samples.end(), x) - samples.begin();
    return static_cast<double>(k) / static_cast<double>(total);
}

double EmpiricalDistribution::cdf_strict(double x) const {
    if (total == 0) return 0.0;
    const auto k = std::lower_bound(samples.begin(), samples.end(), x) - samples.begin();
    return static_cast<double>(k) / static_cast<double>(total);
}

double EmpiricalDistribution::ccdf(double x) const {
    if (total == 0) return 0.0;
    const auto k = samples.end() - std::lower_bound(samples.begin(), samples.end(), x);
    return static_cast<double>(k) / static_cast<double>(total);
}

namespace {

template <class Pick>
EmpiricalDistribution collect(const PathEnsemble& ens, double delta, Pick pick) {
    EmpiricalDistribution out;
    out.delta = delta;
    for (const PathRecord& r : ens.paths) {
        if (r.status != PathStatus::ok) continue;
        ++out.total;
        const double v = pick(r);
        if (v == kNoEvent) ++out.censored;
        else out.samples.push_back(v);
    }
    if (out.total == 0) throw DataError("every path was excluded from the ensemble");
    std::sort(out.samples.begin(), out.samples.end());
    out.dkw_half_width = dkw_half_width(out.total, delta);
    return out;
}

}  // namespace

EmpiricalDistribution empirical_ccdf_min(const PathEnsemble& ens, double delta) {
    return collect(ens, delta, [](const PathRecord& r) { return r.min_phi; });
}

EmpiricalDistribution empirical_cdf_exit(const PathEnsemble& ens, double delta) {
    return collect(ens, delta, [](const PathRecord& r) { return r.exit_time; });
}

EmpiricalDistribution empirical_cdf_max(const PathEnsemble& ens, double delta) {
    return collect(ens, delta, [](const PathRecord& r) { return r.max_phi; });
}

EmpiricalDistribution empirical_cdf_entry(const PathEnsemble& ens, double delta) {
    return collect(ens, delta, [](const PathRecord& r) { return r.entry_time; });
}

DistributionResult empirical_from_ensembles(DistributionKind kind, const BarrierProblem& bar,
                                            std::span<const Vec> states,
                                            std::span<const PathEnsemble> ensembles,
                                            std::span<const double> times, double delta) {
    if (states.size() != ensembles.size()) throw DataError("one ensemble per state is required");
    DistributionResult r;
    r.kind = kind;
    r.level = bar.level();
    r.times.assign(times.begin(), times.end());
    r.provenance.source = "mc";
    const bool exit_side =
        kind == DistributionKind::invariance_ccdf || kind == DistributionKind::exit_cdf;
    for (std::size_t i = 0; i < states.size(); ++i) {
        const PathEnsemble& ens = ensembles[i];
        if (ens.level != bar.level()) throw DataError("ensemble was simulated at a different level");
        const EmpiricalDistribution e =
            exit_side ? empirical_cdf_exit(ens, delta) : empirical_cdf_entry(ens, delta);
        std::vector<double> row;
        row.reserve(times.size());
        for (double t : times) {
            const double passed = e.cdf(t);
            row.push_back(is_increasing_in_time(kind) ? passed : 1.0 - passed);
        }
        r.states.push_back(states[i]);
        r.augmented.push_back(augment_state(bar, states[i]));
        r.values.push_back(std::move(row));
        r.band.push_back(e.dkw_half_width);
        if (ens.infeasible + ens.diverged > 0) {
            r.warnings.push_back(std::to_string(ens.infeasible) + " infeasible and " +
                                 std::to_string(ens.diverged) + " diverged paths excluded from " +
                                 format_state(states[i]));
        }
    }
    return r;
}

DistributionResult empirical_result(DistributionKind kind, const ControlSystem& sys,
                                    const BarrierProblem& bar, const Policy& policy,
                                    std::span<const Vec> states, std::span<const double> times,
                                    const PathConfig& cfg, double delta) {
    std::vector<PathEnsemble> ensembles;
    for (const Vec& x0 : states) ensembles.push_back(simulate_paths(sys, bar, policy, x0, cfg));
    return empirical_from_ensembles(kind, bar, states, ensembles, times, delta);
}

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

double analytic_first_passage(double x0, double drift, double vol, double level, double t) {
    if (!(vol > 0.0)) throw DomainError("analytic_first_passage requires vol > 0");
    if (!(t >= 0.0)) throw DomainError("analytic_first_passage requires t >= 0");
    double a = level - x0;
    if (a == 0.0) return 1.0;
    if (t == 0.0) return 0.0;
    if (a < 0.0) {
        a = -a;
        drift = -drift;
    }
    const double s = vol * std::sqrt(t);
    const double direct = normal_cdf((drift * t - a) / s);
    const double tail = normal_cdf((-a - drift * t) / s);
    const double reflected = tail > 0.0 ? std::exp(2.0 * drift * a / (vol * vol) + std::log(tail)) : 0.0;
    return std::clamp(direct + reflected, 0.0, 1.0);
}

double analytic_running_min_ccdf(double x0, double drift, double vol, double level, double t) {
    if (x0 < level) return 0.0;
    if (x0 == level) return t == 0.0 ? 1.0 : 0.0;
    return 1.0 - analytic_first_passage(x0, drift, vol, level, t);
}

double analytic_running_max_cdf(double x0, double drift, double vol, double level, double t) {
    if (x0 >= level) return 0.0;
    return 1.0 - analytic_first_passage(x0, drift, vol, level, t);
}

double analytic_distribution(DistributionKind kind, double phi0, double drift, double vol,
                             double level, double t) {
    switch (kind) {
    case DistributionKind::invariance_ccdf:
        return analytic_running_min_ccdf(phi0, drift, vol, level, t);
    case DistributionKind::exit_cdf:
        return phi0 < level ? 1.0 : analytic_first_passage(phi0, drift, vol, level, t);
    case DistributionKind::convergence_cdf:
        return analytic_running_max_cdf(phi0, drift, vol, level, t);
    case DistributionKind::entry_cdf:
        return phi0 >= level ? 1.0 : analytic_first_passage(phi0, drift, vol, level, t);
    }
    return 0.0;
}

double ks_distance(const TabulatedCdf& a, const TabulatedCdf& b) {
    if (a.grid.size() != b.grid.size() || a.values.size() != a.grid.size() ||
        b.values.size() != b.grid.size()) {
        throw DataError("ks_distance: tables have different lengths");
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < a.grid.size(); ++i) {
        if (std::abs(a.grid[i] - b.grid[i]) > 1e-9 * std::max(1.0, std::abs(a.grid[i]))) {
            throw DataError("ks_distance: evaluation grids differ");
        }
        worst = std::max(worst, std::abs(a.values[i] - b.values[i]));
    }
    return worst;
}

}  // namespace safeprob
