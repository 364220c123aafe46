#include <catch2/catch_amalgamated.hpp>

#include "gridfdi/grid.hpp"
#include "gridfdi/sensitivity.hpp"
#include "oracles.hpp"
#include "test_helpers.hpp"

using namespace gridfdi;

namespace {
const GridCase& triangle() {
    static const GridCase g = testutil::load_case("case3.grid");
    return g;
}
}  // namespace

TEST_CASE("triangle susceptance matrix: b = 1/x = 10 per line") {
    const auto model = build_bus_susceptance(triangle());
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(model.bus_b(i, j) == Catch::Approx(i == j ? 20.0 : -10.0));
}

TEST_CASE("single line network: B = [[2,-2],[-2,2]]") {
    GridCase g;
    g.buses = {{1, 138.0, 0.0, 0.0, true}, {2, 138.0, 0.0, 0.0, false}};
    g.branches = {{"ln", 1, 2, 0.5, 1.0, 0.0, 0.0, true}};
    g.generators = {{"g", 1, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0}};
    const auto model = build_bus_susceptance(g);
    CHECK(model.bus_b(0, 0) == Catch::Approx(2.0));
    CHECK(model.bus_b(0, 1) == Catch::Approx(-2.0));
    CHECK(model.bus_b(1, 0) == Catch::Approx(-2.0));
    CHECK(model.bus_b(1, 1) == Catch::Approx(2.0));
}

TEST_CASE("susceptance row sums vanish on random cases") {
    std::mt19937_64 rng(101);
    for (int i = 0; i < 10; ++i) {
        const auto g = oracle::random_case(rng, 4 + static_cast<int>(rng() % 7));
        const auto model = build_bus_susceptance(g);
        for (int r = 0; r < model.bus_b.rows(); ++r)
            CHECK(std::abs(model.bus_b.row(r).sum()) < 1e-12);
    }
}

TEST_CASE("triangle DC flow: unit transfer 1 -> 3 splits 1/3 - 2/3") {
    Vector inj(3);
    inj << 1.0, 0.0, -1.0;
    const auto flow = solve_dc_flow(triangle(), inj);
    CHECK(flow.flows(0) == Catch::Approx(1.0 / 3.0));  // ln-1-2
    CHECK(flow.flows(1) == Catch::Approx(2.0 / 3.0));  // ln-1-3
    CHECK(flow.flows(2) == Catch::Approx(1.0 / 3.0));  // ln-2-3
    CHECK(flow.angles(triangle().slack_index()) == 0.0);
    // flow_m = (theta_from - theta_to)/x_m
    for (std::size_t m = 0; m < 3; ++m) {
        const auto& br = triangle().branches[m];
        const double f = (flow.angles(triangle().bus_index(br.from_bus)) -
                          flow.angles(triangle().bus_index(br.to_bus))) /
                         br.reactance;
        CHECK(flow.flows(m) == Catch::Approx(f));
    }
}

TEST_CASE("zero injection gives zero flow; superposition holds") {
    const auto zero = solve_dc_flow(triangle(), Vector::Zero(3));
    CHECK(zero.flows.cwiseAbs().maxCoeff() == 0.0);

    std::mt19937_64 rng(55);
    for (int i = 0; i < 10; ++i) {
        const auto g = oracle::random_case(rng, 4 + static_cast<int>(rng() % 6));
        const int nb = static_cast<int>(g.n_buses());
        Vector a = Vector::Random(nb), b = Vector::Random(nb);
        const Vector fa = solve_dc_flow(g, a).flows;
        const Vector fb = solve_dc_flow(g, b).flows;
        const Vector fab = solve_dc_flow(g, a + b).flows;
        CHECK((fab - fa - fb).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("nodal balance: signed incident flows equal the injection") {
    std::mt19937_64 rng(56);
    for (int i = 0; i < 8; ++i) {
        const auto g = oracle::random_case(rng, 4 + static_cast<int>(rng() % 6));
        const int nb = static_cast<int>(g.n_buses());
        Vector inj = Vector::Random(nb);
        const int slack = g.slack_index();
        inj(slack) -= inj.sum();  // balance so the identity holds at the slack too
        const auto flow = solve_dc_flow(g, inj);
        Vector nodal = Vector::Zero(nb);
        for (std::size_t m = 0; m < g.n_branches(); ++m) {
            if (!g.branches[m].in_service) continue;
            nodal(g.bus_index(g.branches[m].from_bus)) += flow.flows(m);
            nodal(g.bus_index(g.branches[m].to_bus)) -= flow.flows(m);
        }
        CHECK((nodal - inj).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("triangle PTDF values and zero slack column") {
    const auto ptdf = compute_ptdf(triangle(), 2);  // slack at bus 3
    CHECK(ptdf(0, 0) == Catch::Approx(1.0 / 3.0));
    CHECK(ptdf(1, 0) == Catch::Approx(2.0 / 3.0));
    CHECK(ptdf.col(2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("PTDF matches the unit-injection re-solve oracle") {
    std::mt19937_64 rng(77);
    for (int i = 0; i < 8; ++i) {
        const auto g = oracle::random_case(rng, 4 + static_cast<int>(rng() % 8));
        const auto ptdf = compute_ptdf(g, g.slack_index());
        const auto brute = oracle::brute_force_ptdf(g);
        CHECK((ptdf - brute).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("triangle LODF for outage of ln-1-2") {
    const SensitivitySet sens(triangle());
    CHECK(sens.lodf()(1, 0) == Catch::Approx(1.0));   // ln-1-3 picks up +1
    CHECK(sens.lodf()(2, 0) == Catch::Approx(-1.0));  // ln-2-3 oriented 2->3
    CHECK(sens.lodf()(0, 0) == -1.0);                 // self convention
    CHECK_FALSE(sens.radial()[0]);
}

TEST_CASE("LODF post-outage flows match topology removal") {
    std::mt19937_64 rng(78);
    for (int i = 0; i < 8; ++i) {
        const auto g = oracle::random_case(rng, 5 + static_cast<int>(rng() % 6));
        const SensitivitySet sens(g);
        const int nb = static_cast<int>(g.n_buses());
        Vector inj = Vector::Random(nb);
        const Vector base = sens.ptdf() * inj;
        for (std::size_t k = 0; k < g.n_branches(); ++k) {
            if (sens.radial()[k]) continue;
            Vector predicted = base + sens.lodf().col(k) * base(k);
            predicted(k) = 0.0;
            Vector actual = oracle::flows_without_branch(g, static_cast<int>(k), inj);
            CHECK((predicted - actual).cwiseAbs().maxCoeff() < 1e-8);
        }
    }
}

TEST_CASE("radial branches are flagged, matching a graph bridge search") {
    std::mt19937_64 rng(79);
    for (int i = 0; i < 10; ++i) {
        const auto g = oracle::random_case(rng, 5 + static_cast<int>(rng() % 7));
        const SensitivitySet sens(g);
        const auto bridges = oracle::find_bridges(g);
        for (std::size_t m = 0; m < g.n_branches(); ++m)
            CHECK(sens.radial()[m] == bridges[m]);
    }
}

TEST_CASE("triangle OTDF: post-outage path carries the full transfer") {
    GridCase g = testutil::load_case("case3.grid");
    g.buses[0].is_slack = false;
    g.buses[2].is_slack = true;  // slack at bus 3 so bus 1 injections are visible
    const SensitivitySet sens(g);
    const Matrix& otdf = sens.otdf(0);                 // outage ln-1-2
    CHECK(otdf(1, 0) == Catch::Approx(1.0));           // 2/3 + 1 * 1/3
    CHECK(otdf.col(2).cwiseAbs().maxCoeff() < 1e-12);  // slack column
}

TEST_CASE("OTDF equals PTDF + LODF outer product and the topology oracle") {
    std::mt19937_64 rng(80);
    for (int i = 0; i < 6; ++i) {
        const auto g = oracle::random_case(rng, 5 + static_cast<int>(rng() % 5));
        const SensitivitySet sens(g);
        const int nb = static_cast<int>(g.n_buses());
        Vector inj = Vector::Random(nb);
        for (std::size_t k = 0; k < g.n_branches(); ++k) {
            if (sens.radial()[k]) continue;
            const Matrix& otdf = sens.otdf(static_cast<int>(k));
            // construction identity
            const Matrix expect =
                sens.ptdf() + sens.lodf().col(k) * sens.ptdf().row(static_cast<int>(k));
            CHECK((otdf - expect).cwiseAbs().maxCoeff() < 1e-12);
            // flows on the outaged topology
            Vector predicted = otdf * inj;
            predicted(k) = 0.0;
            Vector actual = oracle::flows_without_branch(g, static_cast<int>(k), inj);
            CHECK((predicted - actual).cwiseAbs().maxCoeff() < 1e-8);
        }
    }
}

TEST_CASE("OTDF for a radial outage is an error") {
    GridCase g = testutil::load_case("case3.grid");
    g.buses.push_back({4, 138.0, 0.0, 0.0, false});
    g.branches.push_back({"spur", 3, 4, 0.2, 1.0, 0.0, 0.0, true});
    const SensitivitySet sens(g);
    REQUIRE(sens.radial()[3]);
    CHECK_THROWS_AS(sens.otdf(3), ValidationError);
}

TEST_CASE("active limits from ratings and reactive flows") {
    GridCase g = testutil::load_case("case3.grid");
    g.branches[0].rating_longterm = 1.0;
    g.branches[0].q_from = 0.6;
    g.branches[0].q_to = 0.0;
    g.branches[1].rating_longterm = 1.0;
    g.branches[1].q_from = 0.0;
    g.branches[1].q_to = 0.0;
    g.branches[2].rating_longterm = 1.0;
    g.branches[2].q_from = 1.2;  // exceeds the rating: clamp
    g.branches[2].q_to = 0.0;

    const auto lim = active_limits(g, 1.15);
    CHECK(lim.p_max(0) == Catch::Approx(0.8));  // 3-4-5 triangle
    CHECK(lim.p_max(1) == Catch::Approx(1.0));
    CHECK(lim.p_max(2) == Catch::Approx(0.05));
    CHECK(lim.pk_max(0) == Catch::Approx(std::sqrt(1.3225 - 0.36)));
    CHECK(lim.pk_max(0) == Catch::Approx(0.98107).epsilon(1e-4));
    CHECK(lim.pk_max(1) == Catch::Approx(1.15));
}
