#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gridloop/agc.hpp"
#include "gridloop/error.hpp"

using namespace gridloop;
using namespace gridloop::agc;

namespace {

AgcLoop::Config quiet_config() {
    AgcLoop::Config c;
    c.noise = NoiseParams{0.0, 0.0, 0.0};
    c.watermark_enabled = false;
    return c;
}

AgcSystem at_rest(AgcParams p = {}) {
    AgcSystem s;
    s.params = p;
    return s;
}

}  // namespace

TEST_CASE("dynamics stay at equilibrium without load change") {
    const AgcSystem s = at_rest();
    const AgcSystem n = step_dynamics(s, {0.0, 0.0}, 0.02);
    for (int i = 0; i < 2; ++i) {
        CHECK(n.areas[i].freq_dev == 0.0);
        CHECK(n.areas[i].mech_power == 0.0);
        CHECK(n.areas[i].valve == 0.0);
    }
    CHECK(n.tie_flow == 0.0);
}

TEST_CASE("primary response settles at the droop steady state") {
    AgcSystem s = at_rest();
    const double dp = 0.05;
    for (int k = 0; k < 3000; ++k) s = step_dynamics(s, {dp, dp}, 0.02);
    const AreaParams& a = s.params.areas[0];
    const double expected = -dp / (1.0 / a.droop + a.damping);
    CHECK(std::abs(s.areas[0].freq_dev - expected) < 1e-4);
    CHECK(std::abs(s.areas[1].freq_dev - expected) < 1e-4);
}

TEST_CASE("closed loop matches a ten times finer integration") {
    auto run = [](double dt) {
        AgcLoop::Config c = quiet_config();
        c.params.dt = dt;
        c.load_steps.push_back({1.0, 0, 0.1});
        AgcLoop loop(c);
        std::vector<double> f;
        const int per_second = static_cast<int>(std::lround(1.0 / dt));
        for (int k = 0; k < 60 * per_second; ++k) {
            const auto r = loop.step();
            if (k % (per_second / 10) == 0) f.push_back(r.freq[0]);
        }
        return f;
    };
    const auto coarse = run(0.02);
    const auto fine = run(0.002);
    REQUIRE(coarse.size() == fine.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < coarse.size(); ++i) worst = std::max(worst, std::abs(coarse[i] - fine[i]));
    CHECK(worst < 1e-3);
}

TEST_CASE("secondary control restores frequency and tie flow after single load steps") {
    for (double dp : {0.05, 0.1, 0.2, -0.2}) {
        for (int area : {0, 1}) {
            AgcLoop::Config c = quiet_config();
            c.load_steps.push_back({0.0, area, dp});
            AgcLoop loop(c);
            while (loop.time() < 120.0) loop.step();
            const AgcSystem& s = loop.system();
            CAPTURE(dp);
            CAPTURE(area);
            CHECK(std::abs(s.areas[0].freq_dev) < 1e-3);
            CHECK(std::abs(s.areas[1].freq_dev) < 1e-3);
            CHECK(std::abs(s.tie_flow) < 1e-3);
        }
    }
}

TEST_CASE("control step leaves setpoints alone without deviation or watermark") {
    AgcSystem s = at_rest();
    s.setpoint = {0.0, 0.0};
    WatermarkStream wm(WatermarkKey{7, 0.0});
    const ControlStep c = agc_control_step(s, Measurements{}, wm);
    CHECK(c.next.setpoint[0] == 0.0);
    CHECK(c.next.setpoint[1] == 0.0);
}

TEST_CASE("watermark sequence is reproducible from its key") {
    WatermarkStream a(WatermarkKey{42, 1e-4}), b(WatermarkKey{42, 1e-4}), c(WatermarkKey{43, 1e-4});
    bool differs = false;
    for (int k = 0; k < 1000; ++k) {
        const auto x = a.next(), y = b.next(), z = c.next();
        CHECK(x == y);
        differs = differs || x != z;
    }
    CHECK(differs);
}

TEST_CASE("watermark samples have the key's variance") {
    WatermarkStream wm(WatermarkKey{3, 4e-4});
    double sum = 0.0, sq = 0.0;
    const int n = 20000;
    for (int k = 0; k < n; ++k) {
        const auto e = wm.next();
        sum += e[0] + e[1];
        sq += e[0] * e[0] + e[1] * e[1];
    }
    CHECK(std::abs(sum / (2 * n)) < 5e-4);
    CHECK(std::abs(sq / (2 * n) / 4e-4 - 1.0) < 0.03);
}

TEST_CASE("integral action ramps the setpoint at ki times SACE") {
    AgcParams p;
    p.kp = 0.0;
    AgcSystem s = at_rest(p);
    // Measured ACE equals the preloaded SACE, so the filter holds it constant.
    const Measurements m{{0.01, 0.01}, 0.0};
    s.sace = {p.bias[0] * 0.01, p.bias[1] * 0.01};
    WatermarkStream wm(WatermarkKey{1, 0.0});
    double prev = 0.0;
    for (int k = 0; k < 50; ++k) {
        const ControlStep c = agc_control_step(s, m, wm);
        const double rate = (c.next.setpoint[0] - prev) / p.dt;
        CHECK(rate == doctest::Approx(-p.ki * s.sace[0]).epsilon(1e-12));
        prev = c.next.setpoint[0];
        s = c.next;
    }
}

TEST_CASE("sensor attacks") {
    MeasurementHistory h(0.02, 100.0);
    CounterRng rng(5);
    for (int k = 0; k < 1000; ++k) h.push(k * 0.02, Measurements{{k * 1e-6, -k * 1e-6}, k * 1e-5});
    const Measurements m{{0.001, -0.002}, 0.03};

    SUBCASE("none is the identity") {
        const auto out = apply_sensor_attack(m, SensorAttack{}, 5.0, h, rng);
        CHECK(out.freq == m.freq);
        CHECK(out.tie_flow == m.tie_flow);
    }
    SUBCASE("bias shifts frequency only inside its window") {
        const SensorAttack a{AttackKind::bias, 0.01, AttackTarget::freq, 5.0, 10.0};
        auto in = apply_sensor_attack(m, a, 5.0, h, rng);
        CHECK(in.freq[0] == m.freq[0] + 0.01);
        CHECK(in.freq[1] == m.freq[1] + 0.01);
        CHECK(in.tie_flow == m.tie_flow);
        CHECK(apply_sensor_attack(m, a, 4.98, h, rng).freq == m.freq);
        CHECK(apply_sensor_attack(m, a, 10.0, h, rng).freq == m.freq);
    }
    SUBCASE("scale multiplies the tie flow") {
        const SensorAttack a{AttackKind::scale, 1.5, AttackTarget::tie_flow, 0.0, 20.0};
        auto out = apply_sensor_attack(m, a, 1.0, h, rng);
        CHECK(out.tie_flow == m.tie_flow * 1.5);
        CHECK(out.freq == m.freq);
    }
    SUBCASE("replay substitutes the sample from lag seconds earlier") {
        const SensorAttack a{AttackKind::replay, 6.0, AttackTarget::both, 0.0, 30.0};
        auto out = apply_sensor_attack(m, a, 19.98, h, rng);
        const auto& rec = h.at(13.98);
        CHECK(out.freq == rec.freq);
        CHECK(out.tie_flow == rec.tie_flow);
        CHECK(rec.tie_flow == doctest::Approx(699 * 1e-5));
    }
    SUBCASE("replay without enough history fails") {
        MeasurementHistory short_h(0.02);
        short_h.push(0.0, m);
        const SensorAttack a{AttackKind::replay, 6.0, AttackTarget::both, 0.0, 30.0};
        CHECK_THROWS_AS(apply_sensor_attack(m, a, 1.0, short_h, rng), InvalidArgument);
    }
    SUBCASE("noise adds zero-mean perturbation of the given variance") {
        const SensorAttack a{AttackKind::noise, 1e-4, AttackTarget::tie_flow, 0.0, 30.0};
        double sum = 0.0, sq = 0.0;
        const int n = 20000;
        for (int k = 0; k < n; ++k) {
            const double d = apply_sensor_attack(m, a, 1.0, h, rng).tie_flow - m.tie_flow;
            sum += d;
            sq += d * d;
        }
        CHECK(std::abs(sum / n) < 3e-4);
        CHECK(std::abs(sq / n / 1e-4 - 1.0) < 0.05);
    }
    SUBCASE("invalid windows are reported") {
        const SensorAttack a{AttackKind::bias, 0.01, AttackTarget::freq, 10.0, 5.0};
        CHECK(a.problems().size() == 1);
    }
}

namespace {

struct Recorded {
    std::vector<Measurements> y;
    std::vector<AreaPair> command, watermark;
};

// Noise-free closed loop; records what the detector would be fed.
Recorded record(bool watermarked, std::size_t steps) {
    AgcParams p;
    AgcSystem s = at_rest(p);
    WatermarkStream wm(WatermarkKey{11, watermarked ? 1e-4 : 0.0});
    Recorded r;
    for (std::size_t k = 0; k < steps; ++k) {
        const Measurements y{{s.areas[0].freq_dev, s.areas[1].freq_dev}, s.tie_flow};
        const ControlStep c = agc_control_step(s, y, wm);
        r.y.push_back(y);
        r.command.push_back(c.command);
        r.watermark.push_back(c.watermark);
        s = step_dynamics(c.next, {k > 100 ? 0.02 : 0.0, 0.0}, p.dt);
    }
    return r;
}

}  // namespace

TEST_CASE("detector innovations of a noise-free watermarked run are the propagated watermark") {
    const Recorded r = record(true, 1500);
    const auto st = watermark_detect(AgcParams{}, 1e-4, r.watermark, r.y, r.command, 500);
    // Only the observer's tracking of the load step separates nu from zeta.
    CHECK(st.correlation_stat == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("watermark-free measurements give zero correlation and alarm") {
    const Recorded clean = record(false, 1500);
    WatermarkStream wm(WatermarkKey{11, 1e-4});
    std::vector<AreaPair> claimed;
    for (std::size_t k = 0; k < clean.y.size(); ++k) claimed.push_back(wm.next());
    const auto st = watermark_detect(AgcParams{}, 1e-4, claimed, clean.y, clean.command, 500);
    CHECK(std::abs(st.correlation_stat) < 0.05);
    CHECK(st.alarm);
}

TEST_CASE("detector preconditions") {
    const Recorded r = record(true, 100);
    CHECK_THROWS_AS(watermark_detect(AgcParams{}, 1e-4, r.watermark, r.y, r.command, 49), InvalidArgument);
    CHECK_THROWS_AS(watermark_detect(AgcParams{}, 0.0, r.watermark, r.y, r.command, 50), InvalidArgument);
    CHECK_NOTHROW(watermark_detect(AgcParams{}, 1e-4, r.watermark, r.y, r.command, 50));
}

TEST_CASE("nominal statistics sit near one without attack or disturbance") {
    AgcLoop::Config c;
    c.key.seed = 99;
    c.noise_seed = 99;
    AgcLoop loop(c);
    int evaluations = 0;
    while (loop.time() < 120.0) {
        const auto r = loop.step();
        if (!r.detection) continue;
        ++evaluations;
        CHECK(r.detection->correlation_stat == doctest::Approx(1.0).epsilon(0.5));
        CHECK(r.detection->variance_stat == doctest::Approx(1.0).epsilon(0.15));
    }
    CHECK(evaluations > 10);
}

TEST_CASE("frozen thresholds match the calibration fixture") {
    std::ifstream in(GRIDLOOP_FIXTURE_DIR "/watermark_thresholds.txt");
    REQUIRE(in.good());
    std::string key;
    double corr = 0.0, var = 0.0, v = 0.0;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        ls >> key >> v;
        if (key == "corr") corr = v;
        if (key == "var") var = v;
    }
    const DetectorThresholds d;
    CHECK(d.corr == corr);
    CHECK(d.var == var);
}

TEST_CASE("alarm rate does not decrease with bias magnitude") {
    const TrialSpec spec;
    const DetectorThresholds th;
    std::vector<int> alarms;
    for (double b : {2e-5, 5e-5, 2e-4}) {
        int n = 0;
        for (std::uint64_t seed = 0; seed < 100; ++seed) {
            const SensorAttack a{AttackKind::bias, b, AttackTarget::freq, 30.0, 60.0};
            n += run_detection_trial(spec, seed, a).alarmed(th);
        }
        alarms.push_back(n);
    }
    CAPTURE(alarms[0]);
    CAPTURE(alarms[1]);
    CAPTURE(alarms[2]);
    CHECK(alarms[0] <= alarms[1]);
    CHECK(alarms[1] <= alarms[2]);
}

TEST_CASE("parameter validation reports every problem") {
    AgcParams p;
    p.areas[0].inertia = 0.0;
    p.areas[1].droop = -1.0;
    p.dt = 0.5;
    p.bias = {0.0, 21.0};
    CHECK(p.problems().size() == 4);
    AgcLoop::Config c;
    c.params = p;
    CHECK_THROWS_AS(AgcLoop{c}, ConfigError);
}
