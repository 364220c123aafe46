#include <catch2/catch_amalgamated.hpp>

#include "gridfdi/case_io.hpp"
#include "gridfdi/grid.hpp"
#include "gridfdi/sensitivity.hpp"
#include "oracles.hpp"
#include "test_helpers.hpp"

using namespace gridfdi;

TEST_CASE("triangle case parses with converted per-unit fields") {
    const GridCase g = testutil::load_case("case3.grid");
    REQUIRE(g.n_buses() == 3);
    REQUIRE(g.n_generators() == 2);
    REQUIRE(g.n_branches() == 3);
    CHECK(g.buses[1].load_p == Catch::Approx(1.0));
    CHECK(g.branches[0].rating_longterm == Catch::Approx(1.2));
    CHECK(g.generators[0].p0 == Catch::Approx(1.02));
    CHECK(g.buses[0].is_slack);
    CHECK(g.slack_index() == 0);
}

TEST_CASE("duplicate bus id is rejected") {
    const std::string text =
        "BUS\n1 138 0 0 1\n2 138 10 0 0\n2 138 0 0 0\n"
        "BRANCH\nln 1 2 0.1 100 0 0 1\nGEN\ng1 1 0 100 20 10 1 5\nEND\n";
    REQUIRE_THROWS_WITH(parse_case(text), Catch::Matchers::ContainsSubstring("duplicate bus id"));
}

TEST_CASE("unknown branch endpoint is rejected") {
    const std::string text =
        "BUS\n1 138 0 0 1\n2 138 10 0 0\n"
        "BRANCH\nln 1 4 0.1 100 0 0 1\nGEN\ng1 1 0 100 20 10 1 5\nEND\n";
    REQUIRE_THROWS_WITH(parse_case(text), Catch::Matchers::ContainsSubstring("unknown endpoint"));
}

TEST_CASE("syntax errors carry the line number") {
    const std::string text = "BUS\n1 138 0 0 1\nBRANCH\nln x y\n";
    try {
        parse_case(text);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 4);
    }
}

TEST_CASE("two slack buses are rejected") {
    const std::string text =
        "BUS\n1 138 0 0 1\n2 138 10 0 1\n"
        "BRANCH\nln 1 2 0.1 100 0 0 1\nGEN\ng1 1 0 100 20 10 1 5\nEND\n";
    REQUIRE_THROWS_WITH(parse_case(text), Catch::Matchers::ContainsSubstring("two slack buses"));
}

TEST_CASE("disconnected bus is named") {
    const std::string text =
        "BUS\n1 138 0 0 1\n2 138 10 0 0\n7 138 0 0 0\n"
        "BRANCH\nln 1 2 0.1 100 0 0 1\nGEN\ng1 1 0 100 20 10 1 5\nEND\n";
    REQUIRE_THROWS_WITH(parse_case(text), Catch::Matchers::ContainsSubstring("disconnected bus 7"));
}

TEST_CASE("triangle round-trips exactly") {
    const GridCase g = testutil::load_case("case3.grid");
    const GridCase g2 = parse_case(serialize_case(g));
    CHECK(g2 == g);
}

TEST_CASE("case without generators serializes but fails re-parse validation") {
    GridCase g = testutil::load_case("case3.grid");
    g.generators.clear();
    const std::string text = serialize_case(g);  // serialization itself is fine
    REQUIRE_THROWS_AS(parse_case(text), ValidationError);
}

TEST_CASE("random cases round-trip (parse o serialize = identity)") {
    std::mt19937_64 rng(20240811);
    for (int i = 0; i < 40; ++i) {
        const GridCase g = oracle::random_case(rng, 4 + static_cast<int>(rng() % 7));
        g.validate();
        const GridCase g2 = parse_case(serialize_case(g));
        REQUIRE(g2 == g);
    }
}

TEST_CASE("contingency set: fully meshed triangle lists every branch") {
    const GridCase g = testutil::load_case("case3.grid");
    const SensitivitySet sens(g);
    const auto ids = contingency_set(g, 0.0, sens.radial());
    REQUIRE(ids == std::vector<std::string>{"ln-1-2", "ln-1-3", "ln-2-3"});
}

TEST_CASE("contingency set: radial spur is excluded") {
    GridCase g = testutil::load_case("case3.grid");
    g.buses.push_back({4, 138.0, 0.0, 0.0, false});
    g.branches.push_back({"ln-3-4", 3, 4, 0.2, 1.0, 0.0, 0.0, true});
    g.validate();
    const SensitivitySet sens(g);
    const auto ids = contingency_set(g, 0.0, sens.radial());
    CHECK(ids == std::vector<std::string>{"ln-1-2", "ln-1-3", "ln-2-3"});

    // cross-check the LODF-based radial flags against a graph bridge search
    const auto bridges = oracle::find_bridges(g);
    for (std::size_t m = 0; m < g.n_branches(); ++m) CHECK(sens.radial()[m] == bridges[m]);
}

TEST_CASE("contingency set: voltage screen") {
    GridCase g = testutil::load_case("case3.grid");
    g.buses[2].base_kv = 69.0;
    const SensitivitySet sens(g);
    const auto ids = contingency_set(g, 100.0, sens.radial());
    CHECK(ids == std::vector<std::string>{"ln-1-2"});
}

TEST_CASE("non-radial contingencies never island the network") {
    std::mt19937_64 rng(77);
    for (int i = 0; i < 15; ++i) {
        GridCase g = oracle::random_case(rng, 5 + static_cast<int>(rng() % 6));
        const SensitivitySet sens(g);
        for (const auto& id : contingency_set(g, 0.0, sens.radial())) {
            GridCase out = g;
            out.branches[out.branch_index(id)].in_service = false;
            REQUIRE_NOTHROW(out.validate());  // validate() checks connectivity
        }
    }
}

TEST_CASE("matrix-case converter maps the documented columns") {
    const std::string text = R"(function mpc = case3conv
mpc.version = '2';
mpc.baseMVA = 100;
mpc.bus = [
  1 3 0   0 0 0 1 1 0 138 1 1.1 0.9;
  2 1 90  30 0 0 1 1 0 138 1 1.1 0.9;
  3 1 0   0 0 0 1 1 0 138 1 1.1 0.9;
];
mpc.gen = [
  1 60 0 30 -30 1 100 1 200 0 0 0 0 0 0 0 5 0 0 0 0;
  3 40 0 30 -30 1 100 1 150 0 0 0 0 0 0 0 0 80 0 0 0;
];
mpc.branch = [
  1 2 0 0.1 0 120 0 0 0 0 1 -360 360;
  1 3 0 0.1 0 0   0 0 0 0 1 -360 360;
  2 3 0 0.1 0 120 0 0 0 0 1 -360 360;
];
mpc.gencost = [
  2 0 0 2 14 0;
  2 0 0 3 0.01 25 0;
];
)";
    const GridCase g = convert_matrix_case(text);
    REQUIRE(g.n_buses() == 3);
    REQUIRE(g.n_branches() == 3);
    REQUIRE(g.n_generators() == 2);
    CHECK(g.buses[1].load_p == Catch::Approx(0.9));
    CHECK(g.buses[0].is_slack);
    CHECK(g.generators[0].cost == Catch::Approx(14.0));
    CHECK(g.generators[1].cost == Catch::Approx(25.0));  // quadratic: linear term
    CHECK(g.generators[0].ramp_rate == Catch::Approx(0.05));  // ramp_agc MW/min
    CHECK(g.generators[1].ramp_rate == Catch::Approx(0.08));  // ramp_10 / 10
    CHECK(g.branches[1].rating_longterm == Catch::Approx(10.0));  // unrated default
    CHECK(g.generators[0].p0 == Catch::Approx(0.6));
}
