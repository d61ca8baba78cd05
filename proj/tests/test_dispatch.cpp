#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "gridloop/dispatch.hpp"
#include "gridloop/error.hpp"
#include "gridloop/rng.hpp"
#include "oracles.hpp"

using namespace gridloop;
using namespace gridloop::dispatch;
using grid::BusKind;
using grid::Network;
using grid::Topology;

namespace {

Network single_bus() { return Network({{1, BusKind::slack}}, {}, Topology::meshed_transmission); }

Network congested_triangle(double limit_13_pu) {
    grid::Line l12{1, 2, 10.0}, l23{2, 3, 10.0}, l13{1, 3, 5.0};
    l13.flow_limit = limit_13_pu;
    return Network({{1, BusKind::slack}, {2, BusKind::pq}, {3, BusKind::pq}}, {l12, l23, l13},
                   Topology::meshed_transmission);
}

}  // namespace

TEST_CASE("merit order with two units") {
    const std::vector<Generator> gens{Generator::linear(1, 1, 10, 0, 50), Generator::linear(2, 1, 20, 0, 50)};
    const auto r = economic_dispatch(gens, 60.0, single_bus());
    CHECK(r.output[0] == doctest::Approx(50.0));
    CHECK(r.output[1] == doctest::Approx(10.0));
    CHECK(r.total_cost == doctest::Approx(700.0));
    CHECK(r.lmp[0] == doctest::Approx(20.0));
}

TEST_CASE("zero demand dispatches nothing") {
    const std::vector<Generator> gens{Generator::linear(1, 1, 10, 0, 50), Generator::linear(2, 1, 20, 0, 50)};
    const auto r = economic_dispatch(gens, 0.0, single_bus());
    CHECK(r.output[0] == 0.0);
    CHECK(r.output[1] == 0.0);
    CHECK(r.total_cost == 0.0);
}

TEST_CASE("piecewise-linear costs fill cheap segments first") {
    Generator a;
    a.id = 1;
    a.bus = 1;
    a.p_max = 100;
    a.segments = {{40, 10}, {30, 15}, {0, 40}};
    const std::vector<Generator> gens{a, Generator::linear(2, 1, 20, 0, 100)};
    const auto r = economic_dispatch(gens, 90.0, single_bus());
    CHECK(r.output[0] == doctest::Approx(70.0));
    CHECK(r.output[1] == doctest::Approx(20.0));
    CHECK(r.total_cost == doctest::Approx(40 * 10 + 30 * 15 + 20 * 20));
    CHECK(a.energy_cost(70.0) == doctest::Approx(850.0));
}

TEST_CASE("congested triangle matches grid search and splits prices") {
    const auto net = congested_triangle(0.3);
    const std::vector<Generator> gens{Generator::linear(1, 1, 10, 0, 100), Generator::linear(2, 2, 30, 0, 100),
                                      Generator::linear(3, 3, 25, 0, 40)};
    const std::vector<double> demand{0.0, 20.0, 80.0};
    const auto r = economic_dispatch(gens, demand, net);

    const oracle::Triangle tri{10.0, 10.0, 5.0};
    const double cost[3] = {10, 30, 25}, pmin[3] = {0, 0, 0}, pmax[3] = {100, 100, 40};
    const double lim[3] = {1e9, 1e9, 30.0};
    const auto o = oracle::ed_grid_search(tri, cost, pmin, pmax, demand.data(), lim);
    CHECK(std::abs(r.output[0] - o.p1) < 0.05);
    CHECK(std::abs(r.output[1] - o.p2) < 0.05);
    CHECK(std::abs(r.output[2] - o.p3) < 0.05);
    CHECK(std::abs(r.total_cost - o.cost) < 0.5);

    // Out of merit: the cheap unit alone would overload line 1-3.
    CHECK(r.output[0] < 100.0 - 1e-6);
    REQUIRE(r.binding_lines.size() == 1);
    CHECK(r.binding_lines[0] == 2);
    CHECK(r.lmp[2] > r.lmp[0] + 1.0);

    // Prices equal the marginal cost of one more MW at each bus.
    for (std::size_t b = 0; b < 3; ++b) {
        auto bumped = demand;
        bumped[b] += 0.01;
        const auto r2 = economic_dispatch(gens, bumped, net);
        CHECK((r2.total_cost - r.total_cost) / 0.01 == doctest::Approx(r.lmp[b]).epsilon(1e-6));
    }
}

TEST_CASE("uncongested network has a single price") {
    const auto net = congested_triangle(10.0);
    const std::vector<Generator> gens{Generator::linear(1, 1, 10, 0, 50), Generator::linear(2, 2, 30, 0, 100),
                                      Generator::linear(3, 3, 25, 0, 40)};
    const auto r = economic_dispatch(gens, std::vector<double>{10, 30, 40}, net);
    CHECK(r.binding_lines.empty());
    CHECK(std::abs(r.lmp[0] - r.lmp[1]) < 1e-9);
    CHECK(std::abs(r.lmp[0] - r.lmp[2]) < 1e-9);
}

TEST_CASE("merit-order property on random instances") {
    CounterRng rng(CounterRng::stream_key(21, "merit"));
    for (int trial = 0; trial < 40; ++trial) {
        std::vector<Generator> gens;
        double cap = 0;
        for (int g = 0; g < 4; ++g) {
            const double pmax = 20 + 80 * rng.uniform();
            gens.push_back(Generator::linear(g, 1, 5 + 50 * rng.uniform(), 0, pmax));
            cap += pmax;
        }
        const auto r = economic_dispatch(gens, cap * rng.uniform(), single_bus());
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b)
                if (gens[a].segments[0].cost < gens[b].segments[0].cost && r.output[b] > 1e-9)
                    CHECK(r.output[a] == doctest::Approx(gens[a].p_max));
    }
}

TEST_CASE("infeasible dispatch names the violated constraint") {
    const std::vector<Generator> gens{Generator::linear(1, 1, 10, 0, 50)};
    try {
        economic_dispatch(gens, 60.0, single_bus());
        FAIL("expected infeasibility");
    } catch (const InfeasibleError& e) {
        CHECK(e.constraint() == "capacity");
    }
    const std::vector<Generator> must_run{Generator::linear(1, 1, 10, 30, 50)};
    try {
        economic_dispatch(must_run, 10.0, single_bus());
        FAIL("expected infeasibility");
    } catch (const InfeasibleError& e) {
        CHECK(e.constraint() == "minimum generation");
    }
    // Only the cheap unit on bus 1 can serve load at bus 3 through a tight line.
    const auto net = congested_triangle(0.05);
    grid::Network tight({{1, BusKind::slack}, {2, BusKind::pq}}, {{1, 2, 10.0, 0, 0, 0.1}},
                        Topology::meshed_transmission);
    const std::vector<Generator> remote{Generator::linear(1, 1, 10, 0, 100)};
    try {
        economic_dispatch(remote, std::vector<double>{0.0, 50.0}, tight);
        FAIL("expected infeasibility");
    } catch (const InfeasibleError& e) {
        CHECK(e.constraint() == "line 1-2");
    }
}

TEST_CASE("unit commitment single unit") {
    const std::vector<Generator> gens{Generator::linear(1, 1, 10, 10, 50, 100)};
    const std::vector<double> demand{20, 30};
    const auto s = unit_commitment(gens, demand, single_bus());
    CHECK(s.on[0][0]);
    CHECK(s.on[1][0]);
    CHECK(s.total_cost == doctest::Approx(600.0));
    CHECK(s.startup_cost == doctest::Approx(100.0));
}

TEST_CASE("unit commitment with zero demand keeps units off") {
    const std::vector<Generator> gens{Generator::linear(1, 1, 10, 10, 50, 100), Generator::linear(2, 1, 5, 5, 50, 10)};
    const std::vector<double> demand{0, 0, 0};
    const auto s = unit_commitment(gens, demand, single_bus());
    for (const auto& hour : s.on)
        for (bool u : hour) CHECK_FALSE(u);
    CHECK(s.total_cost == 0.0);
}

namespace {

struct UcFixture {
    std::vector<double> cost{12, 20, 35}, pmin{20, 10, 5}, pmax{60, 50, 40}, startup{300, 80, 10};
    std::vector<double> demand{30, 75, 110, 45};

    std::vector<Generator> gens() const {
        std::vector<Generator> g;
        for (int u = 0; u < 3; ++u) g.push_back(Generator::linear(u + 1, 1, cost[u], pmin[u], pmax[u], startup[u]));
        return g;
    }

    // Enumerates all 2^(3*4) schedules with merit-order hourly costs.
    std::pair<double, std::vector<std::vector<bool>>> exhaustive() const {
        double best = std::numeric_limits<double>::infinity();
        std::vector<std::vector<bool>> best_on;
        for (unsigned code = 0; code < (1u << 12); ++code) {
            std::vector<std::vector<bool>> on(4, std::vector<bool>(3));
            for (int t = 0; t < 4; ++t)
                for (int u = 0; u < 3; ++u) on[t][u] = (code >> (t * 3 + u)) & 1u;
            double total = 0;
            std::vector<bool> prev(3, false);
            for (int t = 0; t < 4 && std::isfinite(total); ++t) {
                total += oracle::merit_order_cost(cost, pmin, pmax, on[t], demand[t]);
                for (int u = 0; u < 3; ++u)
                    if (on[t][u] && !prev[u]) total += startup[u];
                prev = on[t];
            }
            if (!std::isfinite(total)) continue;
            const bool tie = std::isfinite(best) && std::abs(total - best) <= 1e-9 * std::max(1.0, std::abs(best));
            if (total < best && !tie) {
                best = total;
                best_on = on;
            } else if (tie && on < best_on) {
                best_on = on;
            }
        }
        return {best, best_on};
    }
};

}  // namespace

TEST_CASE("unit commitment equals exhaustive enumeration") {
    UcFixture f;
    const auto [best, best_on] = f.exhaustive();
    const auto s = unit_commitment(f.gens(), f.demand, single_bus());
    CHECK(s.total_cost == doctest::Approx(best).epsilon(1e-12));
    CHECK(s.on == best_on);

    // Never worse than keeping everything on.
    const std::vector<std::vector<bool>> all_on(4, std::vector<bool>(3, true));
    const double always = schedule_cost(f.gens(), all_on, f.demand, single_bus());
    if (std::isfinite(always)) CHECK(s.total_cost <= always + 1e-9);
}

TEST_CASE("unit commitment reports the infeasible hour") {
    const std::vector<Generator> gens{Generator::linear(1, 1, 10, 0, 50)};
    const std::vector<double> demand{20, 80};
    try {
        unit_commitment(gens, demand, single_bus());
        FAIL("expected infeasibility");
    } catch (const InfeasibleError& e) {
        CHECK(e.constraint() == "hour 1");
    }
    CHECK_THROWS_AS(unit_commitment(gens, std::vector<double>(25, 1.0), single_bus()), InvalidArgument);
}

TEST_CASE("scenario dispatch with identical scenarios equals economic dispatch") {
    const auto net = congested_triangle(0.3);
    const std::vector<Generator> gens{Generator::linear(1, 1, 10, 0, 100), Generator::linear(2, 2, 30, 0, 100),
                                      Generator::linear(3, 3, 25, 0, 40)};
    const std::vector<double> d{0, 20, 80};
    const auto ed = economic_dispatch(gens, d, net);
    const auto sd = scenario_dispatch(gens, {d, d, d}, net, 0.0);
    CHECK(sd.dispatch.total_cost == doctest::Approx(ed.total_cost));
    for (std::size_t g = 0; g < 3; ++g) CHECK(sd.dispatch.output[g] == doctest::Approx(ed.output[g]));
}

TEST_CASE("scenario dispatch with epsilon zero covers the worst case") {
    const std::vector<Generator> gens{Generator::linear(1, 1, 10, 0, 50), Generator::linear(2, 1, 20, 0, 50)};
    const auto sd = scenario_dispatch(gens, {{40.0}, {70.0}}, single_bus(), 0.0);
    CHECK(sd.dispatch.output[0] + sd.dispatch.output[1] == doctest::Approx(70.0));
    CHECK(sd.dispatch.total_cost == doctest::Approx(900.0));
    CHECK(sd.dropped.empty());
}

TEST_CASE("scenario dispatch drops the costliest scenario; matches subset enumeration") {
    const std::vector<double> cost{10, 20, 40}, pmin{0, 0, 0}, pmax{50, 50, 50};
    std::vector<Generator> gens;
    for (int g = 0; g < 3; ++g) gens.push_back(Generator::linear(g + 1, 1, cost[g], pmin[g], pmax[g]));
    const std::vector<double> totals{60, 95, 130, 80, 110};
    std::vector<std::vector<double>> scen;
    for (double t : totals) scen.push_back({t});

    // Oracle: every subset of 4 retained scenarios, cost of covering its maximum.
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_drop = 0;
    for (std::size_t drop = 0; drop < 5; ++drop) {
        double worst = 0;
        for (std::size_t s = 0; s < 5; ++s)
            if (s != drop) worst = std::max(worst, totals[s]);
        const double c = oracle::merit_order_cost(cost, pmin, pmax, {true, true, true}, worst);
        if (c < best - 1e-9) {
            best = c;
            best_drop = drop;
        }
    }
    const auto sd = scenario_dispatch(gens, scen, single_bus(), 0.2);
    REQUIRE(sd.dropped.size() == 1);
    CHECK(sd.dropped[0] == best_drop);
    CHECK(sd.dropped[0] == 2);
    CHECK(sd.dispatch.total_cost == doctest::Approx(best));
}

TEST_CASE("scenario dispatch cost is non-increasing in epsilon") {
    CounterRng rng(CounterRng::stream_key(4, "scen-eps"));
    const std::vector<Generator> gens{Generator::linear(1, 1, 10, 0, 60), Generator::linear(2, 1, 25, 0, 60),
                                      Generator::linear(3, 1, 50, 0, 60)};
    std::vector<std::vector<double>> scen;
    for (int s = 0; s < 8; ++s) scen.push_back({40 + 120 * rng.uniform()});
    double prev = std::numeric_limits<double>::infinity();
    for (double eps : {0.0, 0.1, 0.25, 0.4, 0.6, 0.8}) {
        const auto sd = scenario_dispatch(gens, scen, single_bus(), eps);
        CHECK(sd.dispatch.total_cost <= prev + 1e-9);
        prev = sd.dispatch.total_cost;
    }
}
