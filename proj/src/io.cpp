#include "safeprob/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "safeprob/errors.hpp"

namespace safeprob::io {

using nlohmann::json;

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    return out;
}

json vec_json(const Vec& x) {
    json a = json::array();
    for (Eigen::Index i = 0; i < x.size(); ++i) a.push_back(x[i]);
    return a;
}

}  // namespace

void write_distribution_csv(const std::filesystem::path& path,
                            const std::vector<DistributionResult>& results,
                            const BarrierProblem& bar) {
    std::ofstream out = open_out(path);
    const int n = bar.dim_state();
    bool with_band = false;
    for (const auto& r : results) with_band = with_band || !r.band.empty();

    out << "state,phi";
    for (int i = 1; i <= n; ++i) out << ",x" << i;
    out << ",t,level,value";
    if (with_band) out << ",band";
    out << '\n';
    for (const auto& r : results) {
        for (std::size_t s = 0; s < r.states.size(); ++s) {
            const Vec& x = r.states[s];
            std::string prefix = std::to_string(s) + "," + format_number(bar.value(x));
            for (int i = 0; i < n; ++i) prefix += "," + format_number(x[i]);
            for (std::size_t k = 0; k < r.times.size(); ++k) {
                out << prefix << ',' << format_number(r.times[k]) << ',' << format_number(r.level) << ','
                    << format_number(r.values[s][k]);
                if (with_band) out << ',' << (r.band.empty() ? "" : format_number(r.band[s]));
                out << '\n';
            }
        }
    }
}

json diagnostics_json(const Diagnostics& d) {
    json j = {
        {"min_value", d.min_value},
        {"max_value", d.max_value},
        {"max_residual", d.max_residual},
        {"total_iterations", d.total_iterations},
        {"max_iterations_per_step", d.max_iterations_per_step},
        {"steps", d.steps},
        {"dt", d.dt},
        {"monotone_stencil", d.monotone_stencil},
        {"boundary_flag", d.boundary_flag},
        {"boundary_tolerance", d.boundary_tolerance},
    };
    j["boundary_sensitivity"] = d.boundary_sensitivity ? json(*d.boundary_sensitivity) : json(nullptr);
    return j;
}

json summary_json(const SummaryStats& s) {
    json q = json::array();
    for (const auto& qi : s.quantiles) {
        q.push_back({{"probability", qi.probability},
                     {"value", qi.value ? json(*qi.value) : json(nullptr)}});
    }
    json tail = json::array();
    for (const auto& [x, p] : s.tail_probabilities) tail.push_back({x, p});
    return {{"quantiles", q},
            {"mean", s.mean},
            {"mean_is_lower_bound", s.mean_is_lower_bound},
            {"residual_mass", s.residual_mass},
            {"tail_probabilities", tail}};
}

json distribution_json(const std::vector<DistributionResult>& results) {
    json doc = json::object();
    if (results.empty()) return doc;
    const DistributionResult& head = results.front();
    doc["kind"] = std::string(to_string(head.kind));
    doc["source"] = head.provenance.source;
    doc["solver_version"] = head.provenance.solver_version;
    json levels = json::array();
    for (const auto& r : results) {
        json entry;
        entry["level"] = r.level;
        entry["times"] = r.times;
        if (!r.provenance.config_hash.empty()) entry["numerics_hash"] = r.provenance.config_hash;
        json states = json::array();
        for (std::size_t s = 0; s < r.states.size(); ++s) {
            json st;
            st["x"] = vec_json(r.states[s]);
            if (s < r.augmented.size()) st["z"] = vec_json(r.augmented[s]);
            st["values"] = r.values[s];
            if (!r.band.empty()) st["band"] = r.band[s];
            try {
                st["summary"] = summary_json(summary_stats(r, s));
            } catch (const DataError& e) {
                st["summary_error"] = e.what();
            }
            states.push_back(std::move(st));
        }
        entry["states"] = std::move(states);
        if (r.provenance.source == "pde") entry["diagnostics"] = diagnostics_json(r.diagnostics);
        entry["warnings"] = r.warnings;
        levels.push_back(std::move(entry));
    }
    doc["levels"] = std::move(levels);
    return doc;
}

void write_json(const std::filesystem::path& path, const json& doc) {
    std::ofstream out = open_out(path);
    out << doc.dump(2) << '\n';
}

json field_json(const GridSpec& grid, const std::vector<double>& values, double time) {
    json lower = json::array(), upper = json::array(), cells = json::array();
    for (const Axis& a : grid.axes()) {
        lower.push_back(a.lower);
        upper.push_back(a.upper);
        cells.push_back(a.cells);
    }
    return {{"grid", {{"lower", lower}, {"upper", upper}, {"cells", cells}, {"order", "row-major, last axis fastest"}}},
            {"time", time},
            {"values", values}};
}

void write_field_csv(const std::filesystem::path& path, const GridSpec& grid,
                     const std::vector<double>& values) {
    std::ofstream out = open_out(path);
    for (int i = 1; i <= grid.dim(); ++i) out << 'x' << i << ',';
    out << "value\n";
    for (std::size_t k = 0; k < grid.node_count(); ++k) {
        const Vec x = grid.coord(k);
        for (int i = 0; i < grid.dim(); ++i) out << format_number(x[i]) << ',';
        out << format_number(values[k]) << '\n';
    }
}

void write_path_log_csv(const std::filesystem::path& path, const PathEnsemble& ens) {
    static constexpr const char* kStatus[] = {"ok", "infeasible", "diverged"};
    std::ofstream out = open_out(path);
    out << "path,min_phi,max_phi,exit_time,entry_time,exit_censored,entry_censored,status\n";
    auto time = [](double t) { return t == kNoEvent ? std::string() : format_number(t); };
    for (std::size_t p = 0; p < ens.paths.size(); ++p) {
        const PathRecord& r = ens.paths[p];
        out << p << ',' << format_number(r.min_phi) << ',' << format_number(r.max_phi) << ','
            << time(r.exit_time) << ',' << time(r.entry_time) << ',' << (r.exit_time == kNoEvent) << ','
            << (r.entry_time == kNoEvent) << ',' << kStatus[static_cast<int>(r.status)] << '\n';
    }
}

FieldRecord read_field_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open field file '" + path.string() + "'");
    try {
        const json j = json::parse(in);
        const json& g = j.at("grid");
        std::vector<Axis> axes;
        for (std::size_t a = 0; a < g.at("cells").size(); ++a) {
            axes.push_back({g["lower"][a].get<double>(), g["upper"][a].get<double>(), g["cells"][a].get<int>()});
        }
        FieldRecord rec{GridSpec(std::move(axes)), j.at("values").get<std::vector<double>>(),
                        j.at("time").get<double>()};
        if (rec.values.size() != rec.grid.node_count()) throw DataError("field size does not match its grid");
        return rec;
    } catch (const json::exception& e) {
        throw DataError("malformed field file '" + path.string() + "': " + e.what());
    }
}

std::vector<Curve> read_distribution_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open distribution file '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line)) throw DataError("'" + path.string() + "' is empty");
    std::vector<std::string> header;
    {
        std::istringstream hs(line);
        std::string cell;
        while (std::getline(hs, cell, ',')) header.push_back(cell);
    }
    auto column = [&](const std::string& name) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw DataError("'" + path.string() + "' has no column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t c_state = column("state"), c_t = column("t"), c_level = column("level"),
                      c_value = column("value");

    std::vector<Curve> curves;
    std::map<std::pair<std::size_t, double>, std::size_t> index;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (cells.size() < header.size() - 1) {
            throw DataError("'" + path.string() + "' row " + std::to_string(row) + " is short");
        }
        try {
            const std::size_t state = std::stoul(cells[c_state]);
            const double level = std::stod(cells[c_level]);
            auto [it, fresh] = index.try_emplace({state, level}, curves.size());
            if (fresh) curves.push_back({state, level, {}, {}});
            Curve& c = curves[it->second];
            c.times.push_back(std::stod(cells[c_t]));
            c.values.push_back(std::stod(cells[c_value]));
        } catch (const std::logic_error&) {
            throw DataError("'" + path.string() + "' row " + std::to_string(row) + " is malformed");
        }
    }
    return curves;
}

}  // namespace safeprob::io
