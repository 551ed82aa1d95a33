#include "safeprob/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "safeprob/expr.hpp"
#include "safeprob/io.hpp"

namespace safeprob::cli {

using nlohmann::json;
namespace fs = std::filesystem;

std::string distribution_file(DistributionKind kind, const std::string& hash, const char* ext) {
    return std::string(to_string(kind)) + "_" + hash + "." + ext;
}

std::string mc_file(DistributionKind kind, const std::string& hash, const char* ext) {
    return "mc_" + distribution_file(kind, hash, ext);
}

std::string field_file(DistributionKind kind, const std::string& hash) {
    return "field_" + distribution_file(kind, hash, "json");
}

json resolve_document(const Invocation& inv) {
    json doc;
    try {
        doc = load_json(inv.config);
    } catch (const ConfigError& e) {
        throw InputError(e.what());
    }
    if (!doc.is_object()) throw ConfigError("", "config must be a JSON object");
    for (const std::string& o : inv.overrides) apply_override(doc, o);
    if (inv.seed) doc["mc"]["seed"] = *inv.seed;
    if (inv.out) doc["output"]["dir"] = inv.out->string();
    return doc;
}

namespace {

struct Check {
    std::string name;
    double value = 0.0;
    double tolerance = 0.0;
    bool pass = true;
    std::string detail;
};

Check make_check(std::string name, double value, double tolerance, std::string detail = {}) {
    return {std::move(name), value, tolerance, value <= tolerance, std::move(detail)};
}

using Results = std::map<DistributionKind, std::vector<DistributionResult>>;

Results solve_all(const Experiment& exp, bool boundary_probe) {
    Results out;
    for (DistributionKind kind : exp.kinds) {
        QuerySpec q = exp.model.query;
        q.numerics.boundary_probe = q.numerics.boundary_probe || boundary_probe;
        auto results = level_sweep(kind, exp.system(), exp.barrier(), exp.policy(), q, exp.levels);
        for (auto& r : results) r.provenance.config_hash = exp.hash;
        out.emplace(kind, std::move(results));
    }
    return out;
}

void print_warnings(const std::vector<DistributionResult>& results, std::ostream& err) {
    for (const auto& r : results)
        for (const auto& w : r.warnings) err << "warning: " << w << '\n';
}

void print_endpoints(const std::vector<DistributionResult>& results, std::ostream& out) {
    for (const auto& r : results) {
        for (std::size_t s = 0; s < r.states.size(); ++s) {
            out << to_string(r.kind) << " [" << r.provenance.source << "] level=" << io::format_number(r.level)
                << " x=" << format_state(r.states[s]) << " t=" << io::format_number(r.times.back())
                << " value=" << io::format_number(r.values[s].back());
            if (!r.band.empty()) out << " band=" << io::format_number(r.band[s]);
            out << '\n';
        }
    }
}

void write_manifest(const Experiment& exp, const std::string& command,
                    const std::vector<std::string>& files, std::ostream& out, json extra = {}) {
    json m;
    m["command"] = command;
    m["config_hash"] = exp.hash;
    m["solver_version"] = std::string(kSolverVersion);
    m["config"] = exp.document;
    m["files"] = files;
    if (!extra.is_null()) m.update(extra);
    const std::string name = "manifest_" + command + "_" + exp.hash + ".json";
    io::write_json(exp.output.dir / name, m);
    out << "wrote " << (exp.output.dir / name).string() << '\n';
}

struct Ensembles {
    std::vector<std::vector<PathEnsemble>> by_level;  // [level][state]
    std::size_t excluded = 0;
    std::size_t total = 0;
};

Ensembles simulate_all(const Experiment& exp) {
    Ensembles e;
    for (double level : exp.levels) {
        const BarrierProblem bar = exp.barrier().with_level(level);
        std::vector<PathEnsemble> row;
        for (const Vec& x0 : exp.model.query.states) {
            row.push_back(simulate_paths(exp.system(), bar, exp.policy(), x0, exp.model.mc));
            e.excluded += row.back().infeasible + row.back().diverged;
            e.total += row.back().paths.size();
        }
        e.by_level.push_back(std::move(row));
    }
    return e;
}

std::vector<DistributionResult> empirical_for(const Experiment& exp, DistributionKind kind,
                                              const Ensembles& ens, std::span<const double> times) {
    std::vector<DistributionResult> out;
    for (std::size_t l = 0; l < exp.levels.size(); ++l) {
        const BarrierProblem bar = exp.barrier().with_level(exp.levels[l]);
        out.push_back(empirical_from_ensembles(kind, bar, exp.model.query.states, ens.by_level[l], times,
                                               exp.mc_delta));
        out.back().provenance.config_hash = exp.hash;
    }
    return out;
}

bool excluded_too_many(const Experiment& exp, const Ensembles& ens, std::ostream& err) {
    const double fraction = ens.total ? double(ens.excluded) / double(ens.total) : 0.0;
    if (fraction > exp.max_excluded_fraction) {
        err << "error: " << ens.excluded << " of " << ens.total
            << " paths were excluded (infeasible or diverged), above the allowed fraction "
            << exp.max_excluded_fraction << '\n';
        return true;
    }
    return false;
}

double sup_distance(const std::vector<DistributionResult>& a, const std::vector<DistributionResult>& b) {
    double worst = 0.0;
    for (std::size_t l = 0; l < a.size(); ++l) {
        for (std::size_t s = 0; s < a[l].values.size(); ++s) {
            worst = std::max(worst, ks_distance({a[l].times, a[l].values[s]}, {b[l].times, b[l].values[s]}));
        }
    }
    return worst;
}

double range_excess(const std::vector<DistributionResult>& results) {
    double worst = 0.0;
    auto scan = [&](const std::vector<double>& v) {
        for (double x : v) worst = std::max({worst, -x, x - 1.0});
    };
    for (const auto& r : results) {
        for (const auto& row : r.values) scan(row);
        scan(r.final_field);
    }
    return worst;
}

double time_monotone_violation(const std::vector<DistributionResult>& results) {
    double worst = 0.0;
    for (const auto& r : results) {
        const double sign = is_increasing_in_time(r.kind) ? 1.0 : -1.0;
        for (const auto& row : r.values)
            for (std::size_t k = 1; k < row.size(); ++k) worst = std::max(worst, sign * (row[k - 1] - row[k]));
    }
    return worst;
}

// F is nonincreasing and Q nondecreasing in the level.
double level_monotone_violation(const Experiment& exp, const std::vector<DistributionResult>& results) {
    const DistributionKind kind = results.front().kind;
    if (kind != DistributionKind::invariance_ccdf && kind != DistributionKind::convergence_cdf) return 0.0;
    const double sign = kind == DistributionKind::invariance_ccdf ? 1.0 : -1.0;
    std::vector<std::size_t> order(exp.levels.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return exp.levels[a] < exp.levels[b]; });
    double worst = 0.0;
    for (std::size_t i = 1; i < order.size(); ++i) {
        const auto& lo = results[order[i - 1]];
        const auto& hi = results[order[i]];
        for (std::size_t s = 0; s < lo.values.size(); ++s)
            for (std::size_t k = 0; k < lo.values[s].size(); ++k)
                worst = std::max(worst, sign * (hi.values[s][k] - lo.values[s][k]));
    }
    return worst;
}

double complement_residual(const std::vector<DistributionResult>& a, const std::vector<DistributionResult>& b) {
    double worst = 0.0;
    for (std::size_t l = 0; l < a.size(); ++l) {
        for (std::size_t s = 0; s < a[l].values.size(); ++s)
            for (std::size_t k = 0; k < a[l].values[s].size(); ++k)
                worst = std::max(worst, std::abs(a[l].values[s][k] + b[l].values[s][k] - 1.0));
        for (std::size_t i = 0; i < a[l].final_field.size(); ++i)
            worst = std::max(worst, std::abs(a[l].final_field[i] + b[l].final_field[i] - 1.0));
    }
    return worst;
}

double analytic_distance(const Experiment& exp, const std::vector<DistributionResult>& results) {
    const auto& a = *exp.model.analytic;
    double worst = 0.0;
    for (const auto& r : results) {
        for (std::size_t s = 0; s < r.states.size(); ++s) {
            const double phi0 = exp.barrier().value(r.states[s]);
            for (std::size_t k = 0; k < r.times.size(); ++k) {
                const double ref = analytic_distribution(r.kind, phi0, a.drift, a.vol, r.level, r.times[k]);
                worst = std::max(worst, std::abs(r.values[s][k] - ref));
            }
        }
    }
    return worst;
}

int finish_validation(const Experiment& exp, const std::vector<Check>& checks, bool excluded,
                      std::ostream& out, json extra = {}) {
    json report;
    report["config_hash"] = exp.hash;
    report["solver_version"] = std::string(kSolverVersion);
    json arr = json::array();
    bool all = true;
    for (const Check& c : checks) {
        all = all && c.pass;
        json j = {{"name", c.name}, {"value", c.value}, {"tolerance", c.tolerance}, {"pass", c.pass}};
        if (!c.detail.empty()) j["detail"] = c.detail;
        arr.push_back(std::move(j));
        out << (c.pass ? "PASS " : "FAIL ") << c.name << " " << io::format_number(c.value)
            << (c.pass ? " <= " : " > ") << io::format_number(c.tolerance);
        if (!c.detail.empty()) out << " (" << c.detail << ")";
        out << '\n';
    }
    report["checks"] = std::move(arr);
    report["passed"] = all;
    report["excluded_paths_over_threshold"] = excluded;
    if (!extra.is_null()) report.update(extra);
    const std::string name = "validation_" + exp.hash + ".json";
    io::write_json(exp.output.dir / name, report);
    write_manifest(exp, "validate", {name}, out);
    out << (all ? "validation passed" : "validation failed") << '\n';
    if (excluded) return kExcludedPaths;
    return all ? kOk : kValidationFailed;
}

int validate_artifacts(const Experiment& exp, std::ostream& out) {
    const auto& paths = exp.validate.artifacts;
    std::vector<std::vector<io::Curve>> sets;
    for (const fs::path& p : paths) {
        if (!fs::exists(p)) throw InputError("artifact '" + p.string() + "' does not exist");
        try {
            sets.push_back(io::read_distribution_csv(p));
        } catch (const DataError& e) {
            throw InputError(e.what());
        }
    }
    const auto& a = sets[0];
    const auto& b = sets[1];
    if (a.size() != b.size()) throw InputError("artifacts hold different numbers of curves");
    std::vector<Check> checks;
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].state != b[i].state || a[i].level != b[i].level) {
            throw InputError("artifacts hold different (state, level) curves");
        }
        try {
            worst = std::max(worst, ks_distance({a[i].times, a[i].values}, {b[i].times, b[i].values}));
        } catch (const DataError& e) {
            throw InputError(e.what());
        }
    }
    checks.push_back(make_check("artifact_ks", worst, exp.validate.ks_mc,
                                paths[0].string() + " vs " + paths[1].string()));
    return finish_validation(exp, checks, false, out);
}

}  // namespace

int cmd_solve(const Experiment& exp, std::ostream& out, std::ostream& err) {
    const Results results = solve_all(exp, false);
    std::vector<std::string> files;
    for (const auto& [kind, res] : results) {
        print_warnings(res, err);
        print_endpoints(res, out);
        if (exp.output.csv) {
            files.push_back(distribution_file(kind, exp.hash, "csv"));
            io::write_distribution_csv(exp.output.dir / files.back(), res, exp.barrier());
        }
        if (exp.output.json) {
            json doc = io::distribution_json(res);
            doc["config_hash"] = exp.hash;
            files.push_back(distribution_file(kind, exp.hash, "json"));
            io::write_json(exp.output.dir / files.back(), doc);
            const DistributionResult& first = res.front();
            files.push_back(field_file(kind, exp.hash));
            json field = io::field_json(*first.grid, first.final_field, first.times.back());
            field["kind"] = std::string(to_string(kind));
            field["level"] = first.level;
            field["config_hash"] = exp.hash;
            io::write_json(exp.output.dir / files.back(), field);
        }
    }
    write_manifest(exp, "solve", files, out);
    return kOk;
}

int cmd_mc(const Experiment& exp, std::ostream& out, std::ostream& err) {
    const auto& num = exp.model.query.numerics;
    const std::vector<double> times = snapshot_times(exp.model.query.horizon, num.dt, num.snapshot_every);
    const Ensembles ens = simulate_all(exp);
    const bool excluded = excluded_too_many(exp, ens, err);
    std::vector<std::string> files;
    if (ens.excluded < ens.total) {
        for (DistributionKind kind : exp.kinds) {
            const auto res = empirical_for(exp, kind, ens, times);
            print_warnings(res, err);
            print_endpoints(res, out);
            if (exp.output.csv) {
                files.push_back(mc_file(kind, exp.hash, "csv"));
                io::write_distribution_csv(exp.output.dir / files.back(), res, exp.barrier());
            }
            if (exp.output.json) {
                json doc = io::distribution_json(res);
                doc["config_hash"] = exp.hash;
                doc["mc"] = {{"n_paths", exp.model.mc.n_paths},
                             {"dt", exp.model.mc.dt},
                             {"seed", exp.model.mc.seed},
                             {"delta", exp.mc_delta}};
                files.push_back(mc_file(kind, exp.hash, "json"));
                io::write_json(exp.output.dir / files.back(), doc);
            }
        }
    }
    if (exp.path_log) {
        for (std::size_t l = 0; l < ens.by_level.size(); ++l) {
            for (std::size_t s = 0; s < ens.by_level[l].size(); ++s) {
                files.push_back("paths_" + exp.hash + "_l" + std::to_string(l) + "_s" + std::to_string(s) + ".csv");
                io::write_path_log_csv(exp.output.dir / files.back(), ens.by_level[l][s]);
            }
        }
    }
    write_manifest(exp, "mc", files, out,
                   {{"excluded_paths", ens.excluded}, {"simulated_paths", ens.total}});
    return excluded ? kExcludedPaths : kOk;
}

int cmd_validate(const Experiment& exp, std::ostream& out, std::ostream& err) {
    if (!exp.validate.artifacts.empty()) return validate_artifacts(exp, out);

    const ValidateSettings& v = exp.validate;
    const Results results = solve_all(exp, v.boundary_check);
    std::vector<Check> checks;
    for (const auto& [kind, res] : results) {
        print_warnings(res, err);
        const std::string k(to_string(kind));
        checks.push_back(make_check("range_" + k, range_excess(res), v.range));
        checks.push_back(make_check("monotone_time_" + k, time_monotone_violation(res), v.monotone));
        if (exp.levels.size() > 1) {
            checks.push_back(make_check("monotone_level_" + k, level_monotone_violation(exp, res), v.monotone));
        }
        if (exp.model.analytic) {
            checks.push_back(make_check("analytic_" + k, analytic_distance(exp, res), v.ks_analytic,
                                        "drift " + io::format_number(exp.model.analytic->drift) + ", vol " +
                                            io::format_number(exp.model.analytic->vol)));
        }
        if (v.boundary_check) {
            double worst = 0.0;
            for (const auto& r : res) worst = std::max(worst, r.diagnostics.boundary_sensitivity.value_or(0.0));
            checks.push_back(make_check("boundary_" + k, worst, v.boundary, "box-doubling probe"));
        }
    }
    auto pair = [&](DistributionKind a, DistributionKind b, const char* name) {
        if (results.count(a) && results.count(b)) {
            checks.push_back(make_check(name, complement_residual(results.at(a), results.at(b)), v.complementarity));
        }
    };
    pair(DistributionKind::invariance_ccdf, DistributionKind::exit_cdf, "complementarity_invariance_exit");
    pair(DistributionKind::convergence_cdf, DistributionKind::entry_cdf, "complementarity_convergence_entry");

    bool excluded = false;
    json extra;
    if (v.monte_carlo) {
        const Ensembles ens = simulate_all(exp);
        excluded = excluded_too_many(exp, ens, err);
        extra["mc"] = {{"n_paths", exp.model.mc.n_paths}, {"excluded_paths", ens.excluded}};
        if (ens.excluded < ens.total) {
            for (const auto& [kind, res] : results) {
                const auto emp = empirical_for(exp, kind, ens, res.front().times);
                double band = 0.0;
                for (const auto& r : emp)
                    for (double b : r.band) band = std::max(band, b);
                checks.push_back(make_check("mc_ks_" + std::string(to_string(kind)), sup_distance(res, emp), v.ks_mc,
                                            "DKW half-width " + io::format_number(band)));
            }
        }
    }
    return finish_validation(exp, checks, excluded, out, extra);
}

int cmd_report(const Experiment& exp, std::ostream& out, std::ostream& err) {
    const DistributionKind heat_kind = exp.report_kind.value_or(exp.kinds.front());
    const fs::path field_path = exp.output.dir / field_file(heat_kind, exp.hash);
    const fs::path curve_path = exp.output.dir / distribution_file(heat_kind, exp.hash, "csv");
    for (const fs::path& p : {field_path, curve_path}) {
        if (!fs::exists(p)) {
            throw InputError("missing input '" + p.string() + "'; run `solve` with the same config first");
        }
    }

    std::vector<std::string> files;
    const std::string curves_name = "curves_" + exp.hash + ".csv";
    {
        std::ostringstream csv;
        csv << "kind,state,level,t,value\n";
        for (DistributionKind kind : exp.kinds) {
            const fs::path p = exp.output.dir / distribution_file(kind, exp.hash, "csv");
            if (!fs::exists(p)) {
                err << "warning: no results for " << to_string(kind) << " in " << exp.output.dir.string() << '\n';
                continue;
            }
            for (const io::Curve& c : io::read_distribution_csv(p)) {
                for (std::size_t k = 0; k < c.times.size(); ++k) {
                    csv << to_string(kind) << ',' << c.state << ',' << io::format_number(c.level) << ','
                        << io::format_number(c.times[k]) << ',' << io::format_number(c.values[k]) << '\n';
                }
            }
        }
        fs::create_directories(exp.output.dir);
        std::ofstream f(exp.output.dir / curves_name, std::ios::binary);
        f << csv.str();
    }
    files.push_back(curves_name);

    const io::FieldRecord field = io::read_field_json(field_path);
    const std::string heat_name = "heatmap_" + std::string(to_string(heat_kind)) + "_" + exp.hash + ".csv";
    io::write_field_csv(exp.output.dir / heat_name, field.grid, field.values);
    files.push_back(heat_name);
    out << "heatmap of " << to_string(heat_kind) << " at t=" << io::format_number(field.time) << " over "
        << field.grid.node_count() << " nodes\n";
    write_manifest(exp, "report", files, out,
                   {{"heatmap", {{"kind", std::string(to_string(heat_kind))}, {"time", field.time}}}});
    return kOk;
}

int run(const Invocation& inv, std::ostream& out, std::ostream& err) {
    try {
        const json doc = resolve_document(inv);
        const Experiment exp = build_experiment(doc);
        if (inv.command == "solve") return cmd_solve(exp, out, err);
        if (inv.command == "mc") return cmd_mc(exp, out, err);
        if (inv.command == "validate") return cmd_validate(exp, out, err);
        if (inv.command == "report") return cmd_report(exp, out, err);
        err << "error: unknown command '" << inv.command << "'\n";
        return kConfigError;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const InputError& e) {
        err << "input error: " << e.what() << '\n';
        return kConfigError;
    } catch (const ParseError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const SolverError& e) {
        err << "solver error: " << e.what() << " (residual " << e.residual() << " after " << e.iterations()
            << " iterations)\n";
        return kSolverError;
    } catch (const InfeasibleError& e) {
        err << "solver error: " << e.what() << '\n';
        return kSolverError;
    } catch (const PreconditionError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const ShapeError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const DomainError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const fs::filesystem_error& e) {
        err << "output error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kSolverError;
    }
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Safety and recovery probability distributions for stochastic control systems"};
    app.require_subcommand(1);
    Invocation inv;
    std::uint64_t seed = 0;
    std::string out_dir;
    struct Sub {
        const char* name;
        const char* help;
    };
    const Sub subs[] = {
        {"solve", "Solve the distribution PDEs and write tabulated results"},
        {"mc", "Simulate closed-loop paths and write empirical distributions"},
        {"validate", "Cross-check PDE results against Monte Carlo, closed forms and identities"},
        {"report", "Write plot-ready curves and heatmaps from earlier solve results"},
    };
    std::vector<CLI::App*> commands;
    for (const Sub& s : subs) {
        CLI::App* sub = app.add_subcommand(s.name, s.help);
        sub->add_option("--config", inv.config, "Experiment config (JSON)")->required();
        sub->add_option("--out", out_dir, "Output directory (overrides output.dir)");
        sub->add_option("--seed", seed, "Monte Carlo seed (overrides mc.seed)");
        sub->add_option("--override", inv.overrides, "key=value with a dotted key, repeatable")
            ->allow_extra_args(false);
        commands.push_back(sub);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kConfigError;
    }
    for (CLI::App* sub : commands) {
        if (sub->parsed()) {
            inv.command = sub->get_name();
            if (sub->count("--seed")) inv.seed = seed;
            if (sub->count("--out")) inv.out = out_dir;
        }
    }
    return run(inv, out, err);
}

}  // namespace safeprob::cli
