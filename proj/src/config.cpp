#include "safeprob/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "safeprob/expr.hpp"
#include "safeprob/hash.hpp"
#include "safeprob/schema_text.hpp"

namespace safeprob {

using nlohmann::json;

const json& experiment_schema() {
    static const json schema = json::parse(detail::kSchemaText);
    return schema;
}

namespace {

std::string escape_token(const std::string& key) {
    std::string out;
    for (char c : key) {
        if (c == '~') out += "~0";
        else if (c == '/') out += "~1";
        else out += c;
    }
    return out;
}

bool has_type(const json& value, const std::string& type) {
    if (type == "object") return value.is_object();
    if (type == "array") return value.is_array();
    if (type == "string") return value.is_string();
    if (type == "boolean") return value.is_boolean();
    if (type == "number") return value.is_number();
    if (type == "integer") {
        if (value.is_number_integer()) return true;
        if (!value.is_number_float()) return false;
        const double d = value.get<double>();
        return std::isfinite(d) && d == std::floor(d);
    }
    if (type == "null") return value.is_null();
    return false;
}

std::string describe(const json& value) {
    if (value.is_object()) return "object";
    if (value.is_array()) return "array";
    if (value.is_string()) return "string";
    if (value.is_boolean()) return "boolean";
    if (value.is_number()) return "number";
    return "null";
}

void check(const json& value, const json& schema, const std::string& ptr) {
    if (auto it = schema.find("type"); it != schema.end()) {
        bool ok = false;
        std::string expected;
        if (it->is_array()) {
            for (const auto& t : *it) {
                ok = ok || has_type(value, t.get<std::string>());
                expected += (expected.empty() ? "" : " or ") + t.get<std::string>();
            }
        } else {
            expected = it->get<std::string>();
            ok = has_type(value, expected);
        }
        if (!ok) throw ConfigError(ptr, "expected " + expected + ", got " + describe(value));
    }
    if (auto it = schema.find("enum"); it != schema.end()) {
        if (std::find(it->begin(), it->end(), value) == it->end()) {
            throw ConfigError(ptr, "value " + value.dump() + " is not one of " + it->dump());
        }
    }
    if (value.is_number()) {
        const double v = value.get<double>();
        if (auto it = schema.find("minimum"); it != schema.end() && v < it->get<double>()) {
            throw ConfigError(ptr, "value " + value.dump() + " is below the minimum " + it->dump());
        }
        if (auto it = schema.find("maximum"); it != schema.end() && v > it->get<double>()) {
            throw ConfigError(ptr, "value " + value.dump() + " is above the maximum " + it->dump());
        }
        if (auto it = schema.find("exclusiveMinimum"); it != schema.end() && v <= it->get<double>()) {
            throw ConfigError(ptr, "value " + value.dump() + " must exceed " + it->dump());
        }
    }
    if (value.is_object()) {
        if (auto it = schema.find("required"); it != schema.end()) {
            for (const auto& key : *it) {
                const auto name = key.get<std::string>();
                if (!value.contains(name)) {
                    throw ConfigError(ptr + "/" + escape_token(name), "missing required key '" + name + "'");
                }
            }
        }
        const json* props = schema.contains("properties") ? &schema["properties"] : nullptr;
        const json* extra = schema.contains("additionalProperties") ? &schema["additionalProperties"] : nullptr;
        for (const auto& [key, child] : value.items()) {
            const std::string child_ptr = ptr + "/" + escape_token(key);
            if (props && props->contains(key)) {
                check(child, (*props)[key], child_ptr);
            } else if (extra && extra->is_boolean() && !extra->get<bool>()) {
                throw ConfigError(child_ptr, "unknown key '" + key + "'");
            } else if (extra && extra->is_object()) {
                check(child, *extra, child_ptr);
            }
        }
    }
    if (value.is_array()) {
        if (auto it = schema.find("minItems"); it != schema.end() && value.size() < it->get<std::size_t>()) {
            throw ConfigError(ptr, "expected at least " + it->dump() + " items");
        }
        if (auto it = schema.find("maxItems"); it != schema.end() && value.size() > it->get<std::size_t>()) {
            throw ConfigError(ptr, "expected at most " + it->dump() + " items");
        }
        if (auto it = schema.find("items"); it != schema.end()) {
            for (std::size_t i = 0; i < value.size(); ++i) {
                check(value[i], *it, ptr + "/" + std::to_string(i));
            }
        }
    }
}

}  // namespace

void validate_schema(const json& doc, const json& schema) { check(doc, schema, ""); }

void apply_override(json& doc, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos || eq == 0) {
        throw ConfigError("", "override '" + std::string(assignment) + "' is not of the form key=value");
    }
    const std::string key(assignment.substr(0, eq));
    const std::string text(assignment.substr(eq + 1));
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;

    json* node = &doc;
    std::string ptr;
    std::istringstream parts(key);
    std::string part;
    std::vector<std::string> segments;
    while (std::getline(parts, part, '.')) segments.push_back(part);
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const std::string& seg = segments[i];
        if (seg.empty()) throw ConfigError(ptr, "override key '" + key + "' has an empty segment");
        ptr += "/" + escape_token(seg);
        json* next = nullptr;
        if (node->is_array()) {
            std::size_t idx = 0;
            try {
                std::size_t used = 0;
                idx = std::stoul(seg, &used);
                if (used != seg.size()) throw std::invalid_argument(seg);
            } catch (const std::exception&) {
                throw ConfigError(ptr, "array index expected in override");
            }
            if (idx >= node->size()) throw ConfigError(ptr, "array index out of range in override");
            next = &(*node)[idx];
        } else {
            if (node->is_null()) *node = json::object();
            if (!node->is_object()) throw ConfigError(ptr, "override descends into a scalar");
            next = &(*node)[seg];
        }
        node = next;
    }
    *node = std::move(value);
}

std::string config_hash(const json& doc) {
    json copy = doc;
    if (copy.is_object()) copy.erase("output");
    return hash_hex(copy.dump());
}

json load_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot open config file '" + path.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("", "'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

QuerySpec Experiment::query_at(double level) const {
    QuerySpec q = model.query;
    q.level = level;
    return q;
}

namespace {

std::string expr_text(const json& item) {
    return item.is_string() ? item.get<std::string>() : item.dump();
}

Expression compile(const json& item, const SymbolTable& symbols, const std::string& ptr) {
    try {
        return Expression::parse(expr_text(item), symbols);
    } catch (const ParseError& e) {
        throw ConfigError(ptr, e.what());
    }
}

std::vector<Expression> compile_vector(const json& arr, std::size_t size, const SymbolTable& symbols,
                                       const std::string& ptr) {
    if (arr.size() != size) {
        throw ConfigError(ptr, "expected " + std::to_string(size) + " entries, got " +
                                   std::to_string(arr.size()));
    }
    std::vector<Expression> out;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        out.push_back(compile(arr[i], symbols, ptr + "/" + std::to_string(i)));
    }
    return out;
}

// Row-major, all rows of equal length; cols == 0 accepts the first row's length.
std::vector<Expression> compile_matrix(const json& arr, std::size_t rows, std::size_t& cols,
                                       const SymbolTable& symbols, const std::string& ptr) {
    if (arr.size() != rows) {
        throw ConfigError(ptr, "expected " + std::to_string(rows) + " rows, got " +
                                   std::to_string(arr.size()));
    }
    if (cols == 0) cols = arr[0].size();
    std::vector<Expression> out;
    for (std::size_t r = 0; r < rows; ++r) {
        auto row = compile_vector(arr[r], cols, symbols, ptr + "/" + std::to_string(r));
        out.insert(out.end(), row.begin(), row.end());
    }
    return out;
}

std::span<const double> as_span(const Vec& x) {
    return {x.data(), static_cast<std::size_t>(x.size())};
}

VectorField vector_field(std::vector<Expression> exprs) {
    return [exprs = std::move(exprs)](const Vec& x) {
        Vec out(static_cast<Eigen::Index>(exprs.size()));
        for (std::size_t i = 0; i < exprs.size(); ++i) out[i] = exprs[i].eval(as_span(x));
        return out;
    };
}

MatrixField matrix_field(std::vector<Expression> exprs, int rows, int cols) {
    return [exprs = std::move(exprs), rows, cols](const Vec& x) {
        Mat out(rows, cols);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) out(r, c) = exprs[r * cols + c].eval(as_span(x));
        return out;
    };
}

ScalarField scalar_field(Expression e) {
    return [e = std::move(e)](const Vec& x) { return e.eval(as_span(x)); };
}

std::map<std::string, double, std::less<>> read_params(const json& doc) {
    std::map<std::string, double, std::less<>> params;
    if (auto it = doc.find("params"); it != doc.end()) {
        for (const auto& [k, v] : it->items()) params[k] = v.get<double>();
    }
    return params;
}

std::optional<std::string> builtin_of(const json& section) {
    if (auto it = section.find("builtin"); it != section.end()) return it->get<std::string>();
    return std::nullopt;
}

void require_only_builtin(const json& section, const std::string& ptr) {
    if (section.size() != 1) throw ConfigError(ptr, "a builtin section takes no other keys");
}

void require_key(const json& section, const char* key, const std::string& ptr) {
    if (!section.contains(key)) {
        throw ConfigError(ptr + "/" + key, std::string("missing required key '") + key + "'");
    }
}

ControlSystem inline_system(const json& s, const SymbolTable& symbols) {
    require_key(s, "f", "/system");
    require_key(s, "g", "/system");
    require_key(s, "sigma", "/system");
    const int n = static_cast<int>(s["f"].size());
    auto f = compile_vector(s["f"], n, symbols, "/system/f");
    std::size_t m = 0;
    std::size_t k = 0;
    auto g = compile_matrix(s["g"], n, m, symbols, "/system/g");
    auto sigma = compile_matrix(s["sigma"], n, k, symbols, "/system/sigma");
    if (m > static_cast<std::size_t>(kMaxDim) || k > static_cast<std::size_t>(kMaxDim)) {
        throw ConfigError("/system", "input and noise dimensions are limited to " + std::to_string(kMaxDim));
    }
    return ControlSystem(n, static_cast<int>(m), static_cast<int>(k), vector_field(std::move(f)),
                         matrix_field(std::move(g), n, static_cast<int>(m)),
                         matrix_field(std::move(sigma), n, static_cast<int>(k)));
}

BarrierProblem inline_barrier(const json& b, int n, const SymbolTable& symbols) {
    require_key(b, "phi", "/barrier");
    ScalarField phi = scalar_field(compile(b["phi"], symbols, "/barrier/phi"));
    if (!b.contains("grad")) {
        if (b.contains("hess")) throw ConfigError("/barrier/hess", "a Hessian requires a gradient");
        return BarrierProblem::from_value(n, phi);
    }
    VectorField grad = vector_field(compile_vector(b["grad"], n, symbols, "/barrier/grad"));
    if (!b.contains("hess")) return BarrierProblem::from_gradient(n, phi, grad);
    std::size_t cols = n;
    MatrixField hess = matrix_field(compile_matrix(b["hess"], n, cols, symbols, "/barrier/hess"), n, n);
    return BarrierProblem(n, phi, grad, hess);
}

Policy inline_policy(const json& p, const ControlSystem& sys, const SymbolTable& symbols,
                     const std::map<std::string, double, std::less<>>& params) {
    const FilterKind kind = filter_kind_from_string(p.value("kind", std::string("none")));
    VectorField nominal = zero_input(sys.dim_input());
    if (p.contains("nominal")) {
        nominal = vector_field(compile_vector(p["nominal"], sys.dim_input(), symbols, "/policy/nominal"));
    }
    switch (kind) {
    case FilterKind::none:
        return Policy::open_loop(nominal);
    case FilterKind::zero_cbf: {
        if (p.contains("alpha")) {
            if (p.contains("gamma")) throw ConfigError("/policy", "give either alpha or gamma, not both");
            SymbolTable rate_symbols;
            rate_symbols.variables = {"s"};
            rate_symbols.constants = params;
            Expression e = compile(p["alpha"], rate_symbols, "/policy/alpha");
            return Policy::zero_cbf(nominal, [e = std::move(e)](double s) {
                return e.eval(std::span<const double>(&s, 1));
            });
        }
        return Policy::zero_cbf(nominal, linear_rate(p.value("gamma", 1.0)));
    }
    case FilterKind::gradient: {
        ScalarField gain = [](const Vec&) { return 1.0; };
        if (p.contains("gain")) gain = scalar_field(compile(p["gain"], symbols, "/policy/gain"));
        return Policy::gradient_push(nominal, gain);
    }
    }
    return Policy::open_loop(nominal);
}

std::vector<double> number_array(const json& arr) {
    std::vector<double> out;
    for (const auto& v : arr) out.push_back(v.get<double>());
    return out;
}

Vec state_from(const json& arr, int n, const std::string& ptr) {
    if (static_cast<int>(arr.size()) != n) {
        throw ConfigError(ptr, "state has " + std::to_string(arr.size()) + " coordinates, expected " +
                                   std::to_string(n));
    }
    Vec x(n);
    for (int i = 0; i < n; ++i) x[i] = arr[i].get<double>();
    return x;
}

Backend backend_from(const std::string& name) {
    return name == "serial" ? Backend::serial : Backend::openmp;
}

void read_numerics(const json& nj, int n, NumericsConfig& num) {
    if (auto it = nj.find("grid"); it != nj.end()) {
        const auto lower = number_array((*it)["lower"]);
        const auto upper = number_array((*it)["upper"]);
        const auto& cells = (*it)["cells"];
        for (const char* key : {"lower", "upper", "cells"}) {
            if (static_cast<int>((*it)[key].size()) != n) {
                throw ConfigError(std::string("/numerics/grid/") + key,
                                  "expected " + std::to_string(n) + " entries to match the state dimension");
            }
        }
        std::vector<Axis> axes;
        for (int a = 0; a < n; ++a) {
            if (!(lower[a] < upper[a])) {
                throw ConfigError("/numerics/grid/upper/" + std::to_string(a), "upper bound must exceed lower bound");
            }
            axes.push_back({lower[a], upper[a], cells[a].get<int>()});
        }
        try {
            num.grid = GridSpec(std::move(axes));
        } catch (const Error& e) {
            throw ConfigError("/numerics/grid", e.what());
        }
    }
    num.dt = nj.value("dt", num.dt);
    num.theta = nj.value("theta", num.theta);
    num.snapshot_every = nj.value("snapshot_every", num.snapshot_every);
    num.tolerance.residual = nj.value("residual_tolerance", num.tolerance.residual);
    num.tolerance.max_iterations = nj.value("max_iterations", num.tolerance.max_iterations);
    num.mollify = nj.value("mollify", num.mollify);
    if (nj.contains("backend")) num.backend = backend_from(nj["backend"].get<std::string>());
    num.boundary_probe = nj.value("boundary_probe", num.boundary_probe);
    num.boundary_tolerance = nj.value("boundary_tolerance", num.boundary_tolerance);
}

Example base_example(const json& doc) {
    for (const char* section : {"system", "barrier", "policy"}) {
        if (auto name = builtin_of(doc[section])) return make_example(*name);
    }
    // Inline-only experiments have no defaults for states or the grid.
    Example ex = drifted_bm_1d();
    ex.name = "custom";
    ex.query.states.clear();
    ex.query.numerics.grid = GridSpec();
    ex.analytic.reset();
    return ex;
}

}  // namespace

Experiment build_experiment(const json& doc) {
    validate_schema(doc, experiment_schema());

    const auto params = read_params(doc);
    Example base = base_example(doc);
    const json& sj = doc["system"];
    const json& bj = doc["barrier"];
    const json& pj = doc["policy"];

    ControlSystem sys = base.system;
    if (auto name = builtin_of(sj)) {
        require_only_builtin(sj, "/system");
        sys = make_example(*name).system;
    } else {
        sys = inline_system(sj, state_symbols(static_cast<int>(sj.value("f", json::array()).size()), params));
    }
    const int n = sys.dim_state();
    const SymbolTable symbols = state_symbols(n, params);

    BarrierProblem bar = base.barrier;
    if (auto name = builtin_of(bj)) {
        require_only_builtin(bj, "/barrier");
        bar = make_example(*name).barrier;
        if (bar.dim_state() != n) {
            throw ConfigError("/barrier/builtin", "barrier '" + *name + "' has state dimension " +
                                                      std::to_string(bar.dim_state()) + ", system has " +
                                                      std::to_string(n));
        }
    } else {
        bar = inline_barrier(bj, n, symbols);
    }

    Policy policy = base.policy;
    if (auto name = builtin_of(pj)) {
        require_only_builtin(pj, "/policy");
        const Example other = make_example(*name);
        if (other.system.dim_state() != n || other.system.dim_input() != sys.dim_input()) {
            throw ConfigError("/policy/builtin", "policy '" + *name + "' does not match the system dimensions");
        }
        policy = other.policy;
    } else {
        policy = inline_policy(pj, sys, symbols, params);
    }

    Example model{base.name, sys, bar, policy, base.query, base.mc, std::nullopt};
    if (doc.contains("name")) model.name = doc["name"].get<std::string>();

    Experiment exp(std::move(model));
    exp.document = doc;
    exp.hash = config_hash(doc);
    QuerySpec& q = exp.model.query;

    const json qj = doc.value("query", json::object());
    const std::string kind = qj.value("kind", std::string("all"));
    if (kind == "all") {
        exp.kinds = {DistributionKind::invariance_ccdf, DistributionKind::exit_cdf,
                     DistributionKind::convergence_cdf, DistributionKind::entry_cdf};
    } else {
        exp.kinds = {distribution_kind_from_string(kind)};
    }
    if (qj.contains("states")) {
        q.states.clear();
        for (std::size_t i = 0; i < qj["states"].size(); ++i) {
            q.states.push_back(state_from(qj["states"][i], n, "/query/states/" + std::to_string(i)));
        }
    }
    if (q.states.empty()) throw ConfigError("/query/states", "missing required key 'states'");
    for (std::size_t i = 0; i < q.states.size(); ++i) {
        if (q.states[i].size() != n) {
            throw ConfigError("/query/states/" + std::to_string(i), "state dimension does not match the system");
        }
    }
    q.horizon = qj.value("horizon", q.horizon);
    q.level = qj.value("level", q.level);
    exp.levels = qj.contains("levels") ? number_array(qj["levels"]) : std::vector<double>{q.level};

    read_numerics(doc.value("numerics", json::object()), n, q.numerics);
    if (q.numerics.grid.dim() == 0) throw ConfigError("/numerics/grid", "missing required key 'grid'");
    if (q.numerics.grid.dim() != n) {
        throw ConfigError("/numerics/grid", "grid dimension does not match the state dimension");
    }
    for (std::size_t i = 0; i < q.states.size(); ++i) {
        if (!q.numerics.grid.contains(q.states[i])) {
            throw ConfigError("/query/states/" + std::to_string(i), "state lies outside the grid box");
        }
    }
    if (q.numerics.dt > q.horizon && q.horizon > 0.0) {
        throw ConfigError("/numerics/dt", "time step exceeds the horizon");
    }

    const json mj = doc.value("mc", json::object());
    PathConfig& mc = exp.model.mc;
    mc.n_paths = mj.value("n_paths", mc.n_paths);
    mc.dt = mj.value("dt", mc.dt);
    mc.seed = mj.value("seed", mc.seed);
    if (mj.contains("backend")) mc.backend = backend_from(mj["backend"].get<std::string>());
    mc.horizon = q.horizon;
    if (q.horizon > 0.0 && mc.dt > q.horizon) throw ConfigError("/mc/dt", "time step exceeds the horizon");
    exp.mc_delta = mj.value("delta", exp.mc_delta);
    exp.max_excluded_fraction = mj.value("max_excluded_fraction", exp.max_excluded_fraction);
    exp.path_log = mj.value("path_log", exp.path_log);

    const json vj = doc.value("validate", json::object());
    ValidateSettings& v = exp.validate;
    v.monte_carlo = vj.value("monte_carlo", v.monte_carlo);
    v.boundary_check = vj.value("boundary_check", v.boundary_check);
    v.ks_mc = vj.value("ks_mc", v.ks_mc);
    v.ks_analytic = vj.value("ks_analytic", v.ks_analytic);
    v.complementarity = vj.value("complementarity", v.complementarity);
    v.monotone = vj.value("monotone", v.monotone);
    v.range = vj.value("range", v.range);
    v.boundary = vj.value("boundary", v.boundary);
    if (vj.contains("artifacts")) {
        for (const auto& a : vj["artifacts"]) v.artifacts.emplace_back(a.get<std::string>());
    }

    const json rj = doc.value("report", json::object());
    if (rj.contains("kind")) exp.report_kind = distribution_kind_from_string(rj["kind"].get<std::string>());

    const json oj = doc.value("output", json::object());
    if (oj.contains("dir")) exp.output.dir = oj["dir"].get<std::string>();
    if (oj.contains("formats")) {
        exp.output.csv = exp.output.json = false;
        for (const auto& f : oj["formats"]) {
            if (f == "csv") exp.output.csv = true;
            if (f == "json") exp.output.json = true;
        }
    }

    exp.model.analytic = detect_analytic(exp.system(), exp.barrier(), exp.policy(), q.numerics.grid);
    return exp;
}

std::optional<Example::Analytic> detect_analytic(const ControlSystem& sys, const BarrierProblem& bar,
                                                 const Policy& policy, const GridSpec& grid) {
    if (sys.dim_state() != 1 || grid.dim() != 1) return std::nullopt;
    const Axis& axis = grid.axis(0);
    constexpr int kSamples = 17;
    std::optional<double> mu0, var0, slope0;
    try {
        for (int i = 0; i < kSamples; ++i) {
            Vec x(1);
            x[0] = axis.lower + (axis.upper - axis.lower) * i / (kSamples - 1);
            const Vec u = closed_loop_control(policy, sys, bar, x);
            const double mu = (sys.drift(x) + sys.actuation(x) * u)[0];
            const Mat s = sys.noise(x);
            const double var = (s * s.transpose())(0, 0);
            const double slope = bar.gradient(x)[0];
            if (std::abs(bar.hessian(x)(0, 0)) > 1e-6) return std::nullopt;
            if (!mu0) {
                mu0 = mu;
                var0 = var;
                slope0 = slope;
                continue;
            }
            auto same = [](double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); };
            if (!same(mu, *mu0) || !same(var, *var0) || !same(slope, *slope0)) return std::nullopt;
        }
    } catch (const Error&) {
        return std::nullopt;
    }
    if (!(*var0 > 0.0) || *slope0 == 0.0) return std::nullopt;
    return Example::Analytic{*slope0 * *mu0, std::abs(*slope0) * std::sqrt(*var0)};
}

}  // namespace safeprob
