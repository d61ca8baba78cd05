#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gridloop/sim.hpp"

using namespace gridloop;
using namespace gridloop::sim;
namespace fs = std::filesystem;

namespace {

std::string fixture(const std::string& name) { return std::string(GRIDLOOP_FIXTURE_DIR) + "/" + name; }

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("gridloop_test_sim_" + name);
    fs::remove_all(p);
    return p;
}

LoopRegistration reg(const std::string& id, double period, double phase = 0.0, bool stub = false) {
    LoopRegistration r;
    r.loop_id = id;
    r.period = period;
    r.phase = phase;
    r.stub = stub;
    return r;
}

struct Row {
    double time;
    std::string loop, entity, signal;
    double value;
};

std::vector<Row> rows(const fs::path& trace) {
    std::vector<Row> out;
    std::istringstream in(slurp(trace));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        Row r;
        std::string cell;
        std::getline(ls, cell, ',');
        r.time = std::stod(cell);
        std::getline(ls, r.loop, ',');
        std::getline(ls, r.entity, ',');
        std::getline(ls, r.signal, ',');
        std::getline(ls, cell, ',');
        r.value = std::stod(cell);
        out.push_back(r);
    }
    return out;
}

std::vector<std::string> lines_of(const fs::path& trace, const std::string& loop) {
    std::vector<std::string> out;
    std::istringstream in(slurp(trace));
    std::string line;
    while (std::getline(in, line))
        if (line.find("," + loop + ",") != std::string::npos) out.push_back(line);
    return out;
}

}  // namespace

TEST_CASE("schedule examples") {
    SUBCASE("one loop") {
        const std::vector<LoopRegistration> regs{reg("a", 1.0)};
        const auto s = schedule(regs, 3.0);
        REQUIRE(s.size() == 4);
        for (std::size_t k = 0; k < 4; ++k) CHECK(s[k].time == static_cast<double>(k));
    }
    SUBCASE("faster loop first at coincident times") {
        const std::vector<LoopRegistration> regs{reg("slow", 5.0), reg("fast", 1.0)};
        const auto s = schedule(regs, 5.0);
        REQUIRE(s.size() == 8);
        CHECK(regs[s[6].loop].loop_id == "fast");
        CHECK(s[6].time == 5.0);
        CHECK(regs[s[7].loop].loop_id == "slow");
        CHECK(regs[s[0].loop].loop_id == "fast");
    }
    SUBCASE("AGC plus ED over ten minutes") {
        const std::vector<LoopRegistration> regs{reg("loop2.ed", 300.0), reg("loop2.agc", 0.02)};
        const auto s = schedule(regs, 600.0);
        CHECK(s.size() == 30001 + 3);
    }
    SUBCASE("equal periods fall back to loop id, stubs never run") {
        std::vector<LoopRegistration> regs{reg("b", 2.0), reg("a", 2.0), reg("z", 1.0, 0.0, true)};
        const auto s = schedule(regs, 2.0);
        REQUIRE(s.size() == 4);
        CHECK(regs[s[0].loop].loop_id == "a");
        CHECK(regs[s[1].loop].loop_id == "b");
    }
    SUBCASE("ordering invariant") {
        const std::vector<LoopRegistration> regs{reg("x", 0.7, 0.1), reg("y", 0.3), reg("w", 1.1, 0.05)};
        const auto s = schedule(regs, 20.0);
        for (std::size_t i = 1; i < s.size(); ++i) {
            CHECK(s[i - 1].time_ns <= s[i].time_ns);
            if (s[i - 1].time_ns == s[i].time_ns) CHECK(regs[s[i - 1].loop].period <= regs[s[i].loop].period);
        }
    }
}

TEST_CASE("number formatting") {
    CHECK(format_number(0.1) == "0.1");
    CHECK(format_number(-0.0) == "0");
    CHECK(format_number(700.0) == "700");
    CHECK(format_number(1.0 / 3.0) == "0.333333333333");
    CHECK(format_number(1e-7) == "1e-07");
}

TEST_CASE("config problems are reported together") {
    const std::string text = R"(
[scenario]
horizon_s = ten

[loops.agc]
kp = 0.1
frobnicate = 1

[loops.warp]
speed = 9

[attacks]
a1 = kind=laser start=1 end=2
)";
    try {
        parse_scenario(text);
        FAIL("expected a config error");
    } catch (const ConfigError& e) {
        const auto& p = e.problems();
        auto mentions = [&](const std::string& s) {
            for (const auto& x : p)
                if (x.find(s) != std::string::npos) return true;
            return false;
        };
        CHECK(p.size() >= 4);
        CHECK(mentions("horizon_s"));
        CHECK(mentions("frobnicate"));
        CHECK(mentions("loops.warp"));
        CHECK(mentions("laser"));
    }
}

TEST_CASE("cross-section references are validated") {
    const std::string text = R"(
[scenario]
horizon_s = 10

[loops.ed]
demand_mw = 50

[disturbances]
d1 = time=1 kind=load_step area=1 delta=0.1
)";
    try {
        parse_scenario(text);
        FAIL("expected a config error");
    } catch (const ConfigError& e) {
        CHECK(e.problems().size() >= 3);
    }
}

TEST_CASE("empty loop set gives an empty trace") {
    const auto cfg = parse_scenario("[scenario]\nhorizon_s = 100\n");
    const auto out = scratch("empty");
    const auto sum = run_scenario(cfg, out);
    CHECK(sum.trace_records == 0);
    CHECK(sum.activations.empty());
    CHECK(slurp(out / "trace.csv") == "time_s,loop_id,entity_id,signal,value\n");
    CHECK(slurp(out / "summary.txt").find("loop.loop1.fuel.stub") != std::string::npos);
}

TEST_CASE("dispatch fixture costs 700") {
    const auto out = scratch("dispatch");
    const auto sum = run_scenario(load_scenario(fixture("dispatch_2gen.cfg")), out);
    bool found = false;
    for (const auto& [k, v] : sum.results) found = found || (k == "dispatch.last_cost" && v == "700");
    CHECK(found);
    CHECK(slurp(out / "dispatch.csv").find("0,1,1,50,") != std::string::npos);
}

TEST_CASE("same config and seed twice gives identical bytes") {
    const auto cfg = load_scenario(fixture("full.cfg"));
    const auto a = scratch("det_a"), b = scratch("det_b");
    const auto sa = run_scenario(cfg, a);
    const auto sb = run_scenario(cfg, b);
    CHECK(sa.file_digests == sb.file_digests);
    for (const auto& [name, d] : sa.file_digests) CHECK(slurp(a / name) == slurp(b / name));
    CHECK(slurp(a / "summary.txt") == slurp(b / "summary.txt"));
}

TEST_CASE("trace times never decrease and every enabled loop reports") {
    const auto out = scratch("order");
    const auto sum = run_scenario(load_scenario(fixture("full.cfg")), out);
    const auto r = rows(out / "trace.csv");
    REQUIRE(!r.empty());
    for (std::size_t i = 1; i < r.size(); ++i) CHECK(r[i - 1].time <= r[i].time);
    for (const auto& [loop, n] : sum.activations) {
        CAPTURE(loop);
        CHECK(n > 0);
        CHECK(sum.loop_digests.count(loop) == 1);
    }
    for (const char* f : {"dispatch.csv", "bes.csv", "ev.csv", "demand.csv", "microgrid.csv"})
        CHECK(fs::exists(out / f));
}

TEST_CASE("disabling EV leaves the AGC trace unchanged") {
    auto with = load_scenario(fixture("full.cfg"));
    auto without = with;
    without.ev.reset();
    const auto a = scratch("iso_a"), b = scratch("iso_b");
    run_scenario(with, a);
    run_scenario(without, b);
    CHECK(lines_of(a / "trace.csv", "loop2.agc") == lines_of(b / "trace.csv", "loop2.agc"));
    CHECK(!lines_of(a / "trace.csv", "ev.charging").empty());
    CHECK(lines_of(b / "trace.csv", "ev.charging").empty());
}

TEST_CASE("seed override changes the random draws") {
    auto cfg = load_scenario(fixture("agc_bias.cfg"));
    const auto a = scratch("seed_a"), b = scratch("seed_b");
    const auto sa = run_scenario(cfg, a);
    cfg.override_seeds(99);
    const auto sb = run_scenario(cfg, b);
    CHECK(sa.file_digests.at("trace.csv") != sb.file_digests.at("trace.csv"));
}

TEST_CASE("bias attack alarms only after it starts") {
    const auto out = scratch("bias");
    run_scenario(load_scenario(fixture("agc_bias.cfg")), out);
    std::size_t alarms = 0;
    for (const auto& r : rows(out / "trace.csv")) {
        if (r.signal != "alarm" || r.value == 0.0) continue;
        ++alarms;
        CHECK(r.time >= 60.0);
    }
    CHECK(alarms > 0);
}

TEST_CASE("AGC step fixture settles") {
    const auto out = scratch("step");
    const auto sum = run_scenario(load_scenario(fixture("agc_step.cfg")), out);
    for (const auto& [k, v] : sum.results) {
        if (k == "agc.final_abs_freq_dev_pu") CHECK(std::stod(v) < 1e-3);
        if (k == "agc.final_tie_flow_pu") CHECK(std::abs(std::stod(v)) < 1e-3);
    }
}

TEST_CASE("runtime infeasibility names the loop, time and constraint") {
    try {
        run_scenario(load_scenario(fixture("evcs_budget.cfg")), scratch("budget"));
        FAIL("expected a loop failure");
    } catch (const LoopFailure& e) {
        CHECK(e.loop_id() == "ev.placement");
        CHECK(e.time() == 0.0);
        CHECK(e.constraint() == "budget");
    }
}

TEST_CASE("microgrid fixture islands and restores frequency") {
    const auto out = scratch("mg");
    run_scenario(load_scenario(fixture("microgrid.cfg")), out);
    for (const auto& r : rows(out / "trace.csv")) {
        if (r.signal == "islanded") CHECK(r.value == (r.time >= 300.0 ? 1.0 : 0.0));
        if (r.signal == "omega") CHECK(std::abs(r.value - 60.0) < 1e-6);
        if (r.signal == "pcc_flow" && r.time < 300.0) CHECK(std::abs(r.value - 0.35) < 1e-6);
    }
}

TEST_CASE("batch runs in parallel match sequential runs") {
    std::vector<BatchItem> items;
    for (const char* f : {"full.cfg", "agc_bias.cfg", "microgrid.cfg", "evcs_budget.cfg"})
        items.push_back({load_scenario(fixture(f)), scratch(std::string("batch_par_") + f)});
    auto seq = items;
    for (auto& it : seq) it.out_dir = scratch("batch_seq_" + it.config.name);
    const auto par = run_batch(items, 4);
    const auto one = run_batch(seq, 1);
    REQUIRE(par.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(par[i].error.empty() == one[i].error.empty());
        if (par[i].summary) CHECK(par[i].summary->file_digests == one[i].summary->file_digests);
    }
    CHECK(par[3].constraint == "budget");
}

TEST_CASE("keep_only restricts to one module") {
    auto cfg = load_scenario(fixture("full.cfg"));
    CHECK(cfg.keep_only("microgrid"));
    CHECK(cfg.microgrid);
    CHECK(!cfg.agc);
    CHECK(!cfg.ed);
    CHECK(cfg.disturbances.empty());
    auto only_evcs = load_scenario(fixture("full.cfg"));
    CHECK(!only_evcs.keep_only("evcs"));
}
