#include <doctest.h>

#include <cmath>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "safeprob/builtins.hpp"
#include "safeprob/mc_oracle.hpp"
#include "support.hpp"

using namespace safeprob;
using testing::vec;

namespace {

const Policy kOpen = Policy::open_loop(zero_input(1));

PathConfig paths(std::size_t n, double dt, double horizon = 1.0, std::uint64_t seed = 42) {
    PathConfig c;
    c.n_paths = n;
    c.dt = dt;
    c.horizon = horizon;
    c.seed = seed;
    return c;
}

bool same_records(const PathEnsemble& a, const PathEnsemble& b) {
    if (a.paths.size() != b.paths.size()) return false;
    for (std::size_t i = 0; i < a.paths.size(); ++i) {
        const PathRecord& x = a.paths[i];
        const PathRecord& y = b.paths[i];
        if (std::memcmp(&x.min_phi, &y.min_phi, sizeof(double)) != 0 ||
            std::memcmp(&x.max_phi, &y.max_phi, sizeof(double)) != 0 ||
            std::memcmp(&x.exit_time, &y.exit_time, sizeof(double)) != 0 ||
            std::memcmp(&x.entry_time, &y.entry_time, sizeof(double)) != 0 || x.status != y.status) {
            return false;
        }
    }
    return true;
}

}  // namespace

TEST_SUITE("mc_oracle") {

TEST_CASE("frozen system keeps every path at its start") {
    const auto ens = simulate_paths(testing::line_system(0.0, 0.0), testing::identity_barrier(), kOpen,
                                    vec({0.7}), paths(100, 1e-2));
    for (const PathRecord& r : ens.paths) {
        CHECK(r.min_phi == 0.7);
        CHECK(r.max_phi == 0.7);
        CHECK(r.exit_time == kNoEvent);
        CHECK(r.entry_time == 0.0);
    }
}

TEST_CASE("deterministic ramp crosses the level at t = 1") {
    const auto ens = simulate_paths(testing::line_system(1.0, 0.0), testing::identity_barrier(), kOpen,
                                    vec({-1.0}), paths(50, 3e-3, 2.0));
    for (const PathRecord& r : ens.paths) {
        CHECK(r.entry_time == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(r.exit_time == 0.0);
        CHECK(r.max_phi == doctest::Approx(1.0));
    }
}

TEST_CASE("one-sample empirical distribution") {
    PathEnsemble ens;
    ens.config = paths(1, 1e-2);
    PathRecord r;
    r.exit_time = 0.5;
    r.min_phi = -0.1;
    ens.paths.push_back(r);
    const auto e = empirical_cdf_exit(ens);
    CHECK(e.cdf(1.0) == 1.0);
    CHECK(e.cdf(0.4) == 0.0);
    CHECK(e.censored == 0);
}

TEST_CASE("DKW half-width") {
    CHECK(dkw_half_width(100000, 0.05) == doctest::Approx(std::sqrt(std::log(40.0) / 200000.0)));
    CHECK(dkw_half_width(100000, 0.05) == doctest::Approx(0.0043).epsilon(0.01));
    CHECK_THROWS_AS(dkw_half_width(0, 0.05), DataError);
    CHECK_THROWS_AS(dkw_half_width(10, 1.5), DomainError);
}

TEST_CASE("closed-form first passage") {
    const double reflect = analytic_first_passage(1.0, 0.0, 1.0, 0.0, 1.0);
    CHECK(reflect == doctest::Approx(testing::hit_probability(1.0, 0.0, 1.0, 0.0, 1.0)).epsilon(1e-6));
    CHECK(reflect == doctest::Approx(0.3173).epsilon(1e-3));
    const double drifted = analytic_first_passage(1.0, 1.0, 1.0, 0.0, 1.0);
    CHECK(drifted == doctest::Approx(testing::hit_probability(1.0, 1.0, 1.0, 0.0, 1.0)).epsilon(1e-6));
    CHECK(drifted == doctest::Approx(0.0904).epsilon(1e-3));
    CHECK(analytic_first_passage(-1.0, 1.0, 1.0, 0.0, 1.0) ==
          doctest::Approx(testing::hit_probability(-1.0, 1.0, 1.0, 0.0, 1.0)).epsilon(1e-6));
    CHECK(analytic_first_passage(1.0, 1.0, 1.0, 0.0, 0.0) == 0.0);
    CHECK(analytic_running_min_ccdf(1.0, 1.0, 1.0, 0.0, 1.0) == doctest::Approx(1.0 - drifted));
    CHECK_THROWS_AS(analytic_first_passage(1.0, 1.0, 0.0, 0.0, 1.0), DomainError);
    CHECK_THROWS_AS(analytic_first_passage(1.0, 1.0, -1.0, 0.0, 1.0), DomainError);
}

TEST_CASE("sup-norm distance between tables") {
    const std::vector<double> t{0.0, 0.5, 1.0};
    const TabulatedCdf a{t, {0.0, 0.3, 0.6}};
    CHECK(ks_distance(a, a) == 0.0);
    const TabulatedCdf b{t, {0.01, 0.31, 0.61}};
    CHECK(ks_distance(a, b) == doctest::Approx(0.01));
    const TabulatedCdf c{{0.0, 0.4, 1.0}, {0.0, 0.3, 0.6}};
    CHECK_THROWS_AS(ks_distance(a, c), DataError);
    const TabulatedCdf d{{0.0, 1.0}, {0.0, 0.6}};
    CHECK_THROWS_AS(ks_distance(a, d), DataError);
}

TEST_CASE("fixed seeds reproduce ensembles exactly") {
    const Example ex = make_example("double_integrator");
    PathConfig c = paths(2000, 1e-2, 1.0, 99);
    const Vec x0 = vec({0.2, -0.1});
    const auto a = simulate_paths(ex.system, ex.barrier, ex.policy, x0, c);
    const auto b = simulate_paths(ex.system, ex.barrier, ex.policy, x0, c);
    CHECK(same_records(a, b));
    c.backend = Backend::serial;
    CHECK(same_records(a, simulate_paths(ex.system, ex.barrier, ex.policy, x0, c)));
#ifdef _OPENMP
    c.backend = Backend::openmp;
    const int saved = omp_get_max_threads();
    omp_set_num_threads(3);
    const auto three = simulate_paths(ex.system, ex.barrier, ex.policy, x0, c);
    omp_set_num_threads(saved);
    CHECK(same_records(a, three));
#endif
    c.seed = 100;
    CHECK_FALSE(same_records(a, simulate_paths(ex.system, ex.barrier, ex.policy, x0, c)));
    CHECK(path_stream_seed(1, 0) != path_stream_seed(1, 1));
    CHECK(path_stream_seed(1, 0) != path_stream_seed(2, 0));
}

TEST_CASE("running minimum and exit time are dual on every path") {
    const Example ex = make_example("double_integrator");
    const auto ens = simulate_paths(ex.system, ex.barrier, ex.policy, vec({0.5, 0.3}), paths(5000, 1e-2, 2.0));
    for (const PathRecord& r : ens.paths) {
        CHECK((r.min_phi > ens.level) == (r.exit_time == kNoEvent));
        CHECK((r.max_phi < ens.level) == (r.entry_time == kNoEvent));
    }
}

TEST_CASE("censored fraction and empirical mass add up to one") {
    const auto ens = simulate_paths(testing::line_system(1.0, 1.0), testing::identity_barrier(), kOpen,
                                    vec({1.0}), paths(5000, 1e-2));
    for (const auto& e : {empirical_cdf_exit(ens), empirical_cdf_entry(ens)}) {
        CHECK(e.total == 5000);
        CHECK(e.cdf(1.0) + e.censored_fraction() == doctest::Approx(1.0));
        CHECK(std::is_sorted(e.samples.begin(), e.samples.end()));
    }
    const auto m = empirical_ccdf_min(ens);
    CHECK(m.ccdf(0.0) == doctest::Approx(1.0 - empirical_cdf_exit(ens).cdf(1.0)));
}

TEST_CASE("infeasible and divergent paths are excluded and counted") {
    const auto stuck = testing::line_system(-5.0, 1.0, 0.0);
    const Policy filter = Policy::zero_cbf(zero_input(1), linear_rate(1.0));
    const auto ens = simulate_paths(stuck, testing::identity_barrier(), filter, vec({1.0}), paths(100, 1e-2));
    CHECK(ens.infeasible == 100);
    CHECK(ens.included() == 0);
    CHECK_THROWS_AS(empirical_cdf_exit(ens), DataError);

    ControlSystem cubic(1, 1, 1, [](const Vec& x) { return vec({x[0] * x[0] * x[0]}); },
                        [](const Vec&) { return testing::scalar_mat(0.0); },
                        [](const Vec&) { return testing::scalar_mat(0.1); });
    const auto blown = simulate_paths(cubic, testing::identity_barrier(), kOpen, vec({3.0}), paths(20, 5e-2));
    CHECK(blown.diverged == 20);
    for (const PathRecord& r : blown.paths) CHECK(r.status == PathStatus::diverged);
}

TEST_CASE("path configuration checks") {
    const auto sys = testing::line_system(1.0, 1.0);
    const auto bar = testing::identity_barrier();
    CHECK_THROWS_AS(simulate_paths(sys, bar, kOpen, vec({1.0}), paths(0, 1e-2)), PreconditionError);
    CHECK_THROWS_AS(simulate_paths(sys, bar, kOpen, vec({1.0}), paths(10, 0.0)), PreconditionError);
    CHECK_THROWS_AS(simulate_paths(sys, bar, kOpen, vec({1.0}), paths(10, 2.0)), PreconditionError);
    CHECK_THROWS_AS(simulate_paths(sys, bar, kOpen, vec({1.0, 2.0}), paths(10, 1e-2)), ShapeError);
}

TEST_CASE("empirical results share the PDE layout") {
    const Example ex = make_example("drifted_bm_1d");
    const std::vector<double> times{0.0, 0.5, 1.0};
    const auto r = empirical_result(DistributionKind::invariance_ccdf, ex.system, ex.barrier, ex.policy,
                                    ex.query.states, times, paths(2000, 1e-2));
    CHECK(r.provenance.source == "mc");
    REQUIRE(r.values.size() == 2);
    CHECK(r.values[0].size() == 3);
    CHECK(r.band.size() == 2);
    CHECK(r.values[0][0] == 1.0);
    CHECK(r.values[1][0] == 0.0);
}

}

TEST_SUITE("mc_oracle_statistics") {

TEST_CASE("exit probability at 1e5 paths lies within the DKW band") {
    const Example ex = make_example("drifted_bm_1d");
    const PathConfig c = paths(100000, ex.mc.dt, 1.0, 2024);
    const auto ens = simulate_paths(ex.system, ex.barrier, ex.policy, vec({1.0}), c);
    const auto e = empirical_cdf_exit(ens);
    const double oracle = testing::hit_probability(1.0, 1.0, 1.0, 0.0, 1.0);
    CHECK(e.dkw_half_width == doctest::Approx(0.0043).epsilon(0.01));
    CHECK(std::abs(e.cdf(1.0) - oracle) <= e.dkw_half_width);
}

TEST_CASE("recovery probability lies within the DKW band") {
    const Example ex = make_example("drifted_bm_1d");
    const PathConfig c = paths(20000, ex.mc.dt, 1.0, 77);
    const auto ens = simulate_paths(ex.system, ex.barrier, ex.policy, vec({-1.0}), c);
    const auto e = empirical_cdf_entry(ens);
    const double oracle = testing::hit_probability(-1.0, 1.0, 1.0, 0.0, 1.0);
    CHECK(std::abs(e.cdf(1.0) - oracle) <= e.dkw_half_width);
}

TEST_CASE("halving the simulation step stays within the statistical band") {
    const Example ex = make_example("drifted_bm_1d");
    for (double x0 : {1.0, -1.0}) {
        const auto coarse = simulate_paths(ex.system, ex.barrier, ex.policy, vec({x0}), paths(100000, 1e-3, 1.0, 5));
        const auto fine = simulate_paths(ex.system, ex.barrier, ex.policy, vec({x0}), paths(100000, 5e-4, 1.0, 5));
        const auto a = x0 > 0 ? empirical_cdf_exit(coarse) : empirical_cdf_entry(coarse);
        const auto b = x0 > 0 ? empirical_cdf_exit(fine) : empirical_cdf_entry(fine);
        CHECK(std::abs(a.cdf(1.0) - b.cdf(1.0)) <= a.dkw_half_width);
    }
}

}
