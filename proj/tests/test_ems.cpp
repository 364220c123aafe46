#include <catch2/catch_amalgamated.hpp>

#include "gridfdi/ems.hpp"
#include "gridfdi/grid.hpp"
#include "gridfdi/measurement.hpp"
#include "gridfdi/sensitivity.hpp"
#include "oracles.hpp"
#include "test_helpers.hpp"

using namespace gridfdi;

namespace {

GridCase triangle_flat_ratings(double rating_pu) {
    GridCase g = testutil::load_case("case3.grid");
    for (auto& br : g.branches) {
        br.rating_longterm = rating_pu;
        br.q_from = br.q_to = 0.0;
    }
    return g;
}

// Two loads, a cheap generator at bus 1 and an expensive one at bus 3, and a
// tight short-term rating on ln-1-3 so the pair (outage ln-1-2, ln-1-3) binds
// in SCED. p0 is the SCED fixed point: the binding constraint pins
// flow = d2 + d3 - pg3 at the 1.035 contingency limit, so pg3 = 0.165.
GridCase binding_scenario() {
    GridCase g = testutil::load_case("case3.grid");
    g.buses[1].load_p = 0.8;
    g.buses[2].load_p = 0.4;
    for (auto& br : g.branches) br.q_from = br.q_to = 0.0;
    g.branches[g.branch_index("ln-1-3")].rating_longterm = 0.9;
    g.generators[0].p0 = 1.059;
    g.generators[1].p0 = 0.165;
    g.validate();
    return g;
}

double total_cost(const GridCase& g, const DispatchSolution& d) {
    double c = 0.0;
    for (std::size_t i = 0; i < g.n_generators(); ++i)
        c += g.generators[i].cost * d.pg(i) + g.generators[i].reserve_cost * d.rg(i);
    return c;
}

}  // namespace

TEST_CASE("RTCA on the spec triangle: warning threshold and short-term limit") {
    GridCase g = triangle_flat_ratings(1.0);
    const SensitivitySet sens(g);
    Vector loads(3), pg(2);
    loads << 0.0, 1.0, 0.0;
    pg << 1.0, 0.0;

    EmsParams params;
    params.kv_floor = 0.0;

    SECTION("115% short-term rating: outage 1-2 loads 1-3 to 87%, not critical") {
        const auto scs = run_rtca(g, loads, pg, sens, params);
        CHECK(scs.base_critical.empty());
        CHECK(scs.ctg_critical.empty());
        // post-contingency flow itself is 1.0 on ln-1-3
        const int k = 0;
        CHECK(scs.ctg_flows(k, 1) == Catch::Approx(1.0));
        CHECK(1.0 / scs.limits.pk_max(1) == Catch::Approx(0.8696).epsilon(1e-3));
    }

    SECTION("100% short-term rating turns the same pair critical") {
        params.shortterm_factor = 1.0;
        const auto scs = run_rtca(g, loads, pg, sens, params);
        REQUIRE(scs.ctg_critical.size() >= 1);
        CHECK(scs.is_ctg_critical(0, 1));
        CHECK(scs.ctg_violations.empty());  // at 100%, a warning, not a violation
    }

    SECTION("higher load makes it a violation") {
        loads(1) = 1.05;
        pg(0) = 1.05;
        params.shortterm_factor = 1.0;
        const auto scs = run_rtca(g, loads, pg, sens, params);
        REQUIRE_FALSE(scs.ctg_violations.empty());
        const auto& v = scs.ctg_critical[scs.ctg_violations[0]];
        CHECK(v.contingency == 0);
        CHECK(v.branch == 1);
        CHECK(v.ratio > 1.0);
    }
}

TEST_CASE("RTCA with tau = 0 lists every monitored pair; zero load lists none") {
    GridCase g = triangle_flat_ratings(1.2);
    const SensitivitySet sens(g);
    EmsParams params;
    params.kv_floor = 0.0;

    Vector loads(3), pg(2);
    loads << 0.0, 1.0, 0.0;
    pg << 1.0, 0.0;
    params.tau = 0.0;
    params.tau_base = 0.0;
    auto scs = run_rtca(g, loads, pg, sens, params);
    CHECK(scs.base_critical.size() == 3);
    CHECK(scs.ctg_critical.size() == 6);  // 3 outages x 2 monitored

    params.tau = 0.9;
    params.tau_base = -1.0;
    scs = run_rtca(g, Vector::Zero(3), Vector::Zero(2), sens, params);
    CHECK(scs.base_critical.empty());
    CHECK(scs.ctg_critical.empty());
}

TEST_CASE("DCOPF: merit order when no line binds") {
    const GridCase g = testutil::load_case("case3.grid");
    const SensitivitySet sens(g);
    Vector loads(3);
    loads << 0.0, 1.0, 0.0;
    const auto d = solve_dcopf(g, loads, sens, Vector::Zero(3));
    REQUIRE(d.status == SolveStatus::Optimal);
    CHECK(d.pg(0) == Catch::Approx(1.0));
    CHECK(d.pg(1) == Catch::Approx(0.0).margin(1e-9));
    CHECK(d.objective == Catch::Approx(10.0));
    CHECK(d.rg.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("DCOPF: a binding line forces split dispatch, against the vertex oracle") {
    GridCase g = triangle_flat_ratings(1.2);
    g.branches[0].rating_longterm = 0.35;  // ln-1-2
    const SensitivitySet sens(g);
    Vector loads(3);
    loads << 0.0, 1.0, 0.0;
    const auto d = solve_dcopf(g, loads, sens, Vector::Zero(3));
    REQUIRE(d.status == SolveStatus::Optimal);
    // flow(1-2) = (2 - pg3)/3 <= 0.35 forces pg3 >= 0.95
    CHECK(d.pg(0) == Catch::Approx(0.05));
    CHECK(d.pg(1) == Catch::Approx(0.95));
    CHECK(d.objective == Catch::Approx(19.5));

    const auto lim = active_limits(g, 1.15);
    const auto lp = instantiate(build_dcopf_model(g, sens, loads, lim), Vector::Zero(3));
    const auto want = oracle::enumerate_vertices(lp);
    REQUIRE(want.feasible);
    CHECK(d.objective == Catch::Approx(want.objective).margin(1e-7));
}

TEST_CASE("DCOPF: zero load dispatches nothing") {
    const GridCase g = testutil::load_case("case3.grid");
    const SensitivitySet sens(g);
    const auto d = solve_dcopf(g, Vector::Zero(3), sens, Vector::Zero(3));
    REQUIRE(d.status == SolveStatus::Optimal);
    CHECK(d.pg.cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(d.objective == Catch::Approx(0.0).margin(1e-9));
}

TEST_CASE("SCED at a constraint-free steady state is a no-op re-dispatch") {
    const GridCase g = testutil::load_case("case3.grid");
    const SensitivitySet sens(g);
    const Vector loads = load_vector(g);
    const Vector p0 = p0_vector(g);
    EmsParams params;
    params.kv_floor = 0.0;
    const auto scs = run_rtca(g, loads, p0, sens, params);
    REQUIRE(scs.base_critical.empty());
    REQUIRE(scs.ctg_critical.empty());
    const auto d = solve_sced(g, loads, sens, scs, p0, Vector::Zero(3), params);
    REQUIRE(d.status == SolveStatus::Optimal);
    CHECK((d.pg - p0).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(std::abs(d.pg.sum() - 1.02 * loads.sum()) <= 1e-7);
    // reserve coverage puts the whole committed output on the idle unit
    CHECK(d.rg(1) == Catch::Approx(1.02));
}

TEST_CASE("SCED fixed point with a binding contingency constraint") {
    const GridCase g = binding_scenario();
    const SensitivitySet sens(g);
    const Vector loads = load_vector(g);
    const Vector p0 = p0_vector(g);
    EmsParams params;
    params.kv_floor = 0.0;

    const auto scs = run_rtca(g, loads, p0, sens, params);
    REQUIRE(scs.ctg_critical.size() == 1);
    CHECK(scs.is_ctg_critical(0, 1));  // outage ln-1-2 monitored ln-1-3
    CHECK(scs.ctg_critical[0].ratio == Catch::Approx(1.0));
    CHECK(scs.ctg_violations.empty());

    const auto d = solve_sced(g, loads, sens, scs, p0, Vector::Zero(3), params);
    REQUIRE(d.status == SolveStatus::Optimal);
    CHECK((d.pg - p0).cwiseAbs().maxCoeff() < 1e-8);

    // vertex-enumeration oracle on the same LP
    const auto lp = instantiate(build_sced_model(g, sens, scs, p0, loads.sum(), params),
                                Vector::Zero(3));
    const auto want = oracle::enumerate_vertices(lp);
    REQUIRE(want.feasible);
    CHECK(d.objective == Catch::Approx(want.objective).margin(1e-7));

    // re-substitution: the solution satisfies every modeled row
    Vector y(4);
    y << d.pg(0), d.pg(1), d.rg(0), d.rg(1);
    const auto model = build_sced_model(g, sens, scs, p0, loads.sum(), params);
    CHECK(((model.eq * y) - model.eq_rhs).cwiseAbs().maxCoeff() <= 1e-7);
    CHECK(((model.ineq * y) - model.ineq_rhs).maxCoeff() <= 1e-7);
    // the binding pair really is binding
    bool found = false;
    for (const auto& name : d.binding)
        if (name.find("ctg_hi:ln-1-3@ln-1-2") != std::string::npos) found = true;
    CHECK(found);
}

TEST_CASE("reserve coverage can make SCED infeasible, and the report names it") {
    GridCase g = testutil::load_case("case3.grid");
    g.loss_fraction = 0.0;
    g.buses[1].load_p = 1.2;
    g.generators[0].p0 = 1.0;
    g.generators[1].p0 = 0.2;
    for (auto& gen : g.generators) gen.ramp_rate = 0.0;  // pins P at p0, R at 0
    const SensitivitySet sens(g);
    const Vector loads = load_vector(g);
    const Vector p0 = p0_vector(g);
    EmsParams params;
    params.kv_floor = 0.0;
    const auto scs = run_rtca(g, loads, p0, sens, params);
    const auto d = solve_sced(g, loads, sens, scs, p0, Vector::Zero(3), params);
    REQUIRE(d.status == SolveStatus::Infeasible);
    REQUIRE_FALSE(d.infeasibility.empty());
    bool names_cover = false;
    for (const auto& [row, viol] : d.infeasibility)
        if (row.rfind("cover:", 0) == 0) names_cover = true;
    CHECK(names_cover);
}

TEST_CASE("ems_step at steady state is a fixed point over 5 rounds") {
    const GridCase g = binding_scenario();
    const SensitivitySet sens(g);
    EmsParams params;
    params.kv_floor = 0.0;

    Vector pg_set = p0_vector(g);
    double prev_obj = -1.0;
    for (int round = 0; round < 5; ++round) {
        const Vector pg = physical_outputs(g, pg_set);  // slack absorbs the loss margin
        const auto flow = solve_dc_flow(g, injection_vector(g, pg, load_vector(g)));
        const auto ms = measure(g, flow, 0);
        const auto step = ems_step(g, ms, pg, sens, params);
        REQUIRE(step.dispatch.status == SolveStatus::Optimal);
        CHECK_FALSE(step.estimate.bdd_alarm);
        CHECK((step.loads_estimated - load_vector(g)).cwiseAbs().maxCoeff() < 1e-9);
        CHECK((step.dispatch.pg - p0_vector(g)).cwiseAbs().maxCoeff() < 1e-7);
        if (round > 0) CHECK(std::abs(step.dispatch.objective - prev_obj) <= 1e-7);
        prev_obj = step.dispatch.objective;
        pg_set = step.dispatch.pg;
    }
}

TEST_CASE("attacked measurements that touch no binding constraint leave dispatch unchanged") {
    const GridCase g = binding_scenario();
    const SensitivitySet sens(g);
    EmsParams params;
    params.kv_floor = 0.0;
    const Vector p0 = physical_outputs(g, p0_vector(g));

    const auto flow = solve_dc_flow(g, injection_vector(g, p0, load_vector(g)));
    const auto ms = measure(g, flow, 0);
    const auto base_step = ems_step(g, ms, p0, sens, params);

    // c in the admissible family (no load sits at bus 1): shifts load between
    // buses 2 and 3 but cannot move the binding pair's post-outage flow.
    Vector c(3);
    c << 0.0, 0.002, -0.002;
    const auto attacked = ems_step(g, apply_attack(g, ms, c), p0, sens, params);
    REQUIRE(attacked.dispatch.status == SolveStatus::Optimal);
    CHECK_FALSE(attacked.estimate.bdd_alarm);
    CHECK(std::abs(attacked.estimate.j_stat - base_step.estimate.j_stat) <= 1e-8);
    // loads moved...
    CHECK((attacked.loads_estimated - load_vector(g)).cwiseAbs().maxCoeff() > 0.01);
    // ...but the re-dispatch did not
    CHECK((attacked.dispatch.pg - base_step.dispatch.pg).cwiseAbs().maxCoeff() < 1e-7);
    CHECK(std::abs(attacked.dispatch.objective - base_step.dispatch.objective) <= 1e-7);
}

TEST_CASE("DCOPF cost never exceeds the SCED total on bundled cases") {
    for (const char* name : {"case3.grid"}) {
        const GridCase g = testutil::load_case(name);
        const SensitivitySet sens(g);
        const Vector loads = load_vector(g);
        const Vector p0 = p0_vector(g);
        EmsParams params;
        params.kv_floor = 0.0;
        const auto dc = solve_dcopf(g, loads, sens, Vector::Zero(g.n_buses()), params);
        const auto scs = run_rtca(g, loads, p0, sens, params);
        const auto sc = solve_sced(g, loads, sens, scs, p0, Vector::Zero(g.n_buses()), params);
        REQUIRE(dc.status == SolveStatus::Optimal);
        REQUIRE(sc.status == SolveStatus::Optimal);
        CHECK(dc.objective <= sc.objective + 1e-9);
        CHECK(total_cost(g, sc) == Catch::Approx(sc.objective));
    }
}
