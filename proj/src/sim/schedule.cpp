#include <charconv>
#include <cmath>
#include <tuple>

#include "gridloop/sim.hpp"

namespace gridloop::sim {

namespace {

std::int64_t to_ns(double s) { return static_cast<std::int64_t>(std::llround(s * 1e9)); }

}  // namespace

Scheduler::Scheduler(const std::vector<LoopRegistration>& regs, double horizon) : regs_(regs) {
    const std::int64_t h = to_ns(horizon);
    for (std::size_t i = 0; i < regs_.size(); ++i) {
        const auto& r = regs_[i];
        if (r.stub) continue;
        if (!(r.period > 0.0)) throw InvalidArgument("schedule: loop " + r.loop_id + " has a non-positive period");
        Cursor c{to_ns(r.period), to_ns(r.phase), 0, -1, i};
        if (c.period_ns <= 0) throw InvalidArgument("schedule: loop " + r.loop_id + " period below 1 ns");
        if (h >= c.phase_ns) c.k_max = (h - c.phase_ns) / c.period_ns;
        cursors_.push_back(c);
    }
}

std::optional<Activation> Scheduler::next() {
    Cursor* best = nullptr;
    for (auto& c : cursors_) {
        if (c.k > c.k_max) continue;
        if (!best) {
            best = &c;
            continue;
        }
        const std::int64_t t = c.phase_ns + c.k * c.period_ns;
        const std::int64_t tb = best->phase_ns + best->k * best->period_ns;
        if (std::tie(t, c.period_ns, regs_[c.loop].loop_id) <
            std::tie(tb, best->period_ns, regs_[best->loop].loop_id))
            best = &c;
    }
    if (!best) return std::nullopt;
    Activation a;
    a.time_ns = best->phase_ns + best->k * best->period_ns;
    a.time = static_cast<double>(a.time_ns) * 1e-9;
    a.loop = best->loop;
    ++best->k;
    return a;
}

std::vector<Activation> schedule(const std::vector<LoopRegistration>& regs, double horizon) {
    Scheduler s(regs, horizon);
    std::vector<Activation> out;
    while (auto a = s.next()) out.push_back(*a);
    return out;
}

std::vector<LoopRegistration> stub_loops() {
    return {
        {"loop1.fuel", 86400.0, 0.0, true, "GENCO fuel supply and gas purchases"},
        {"loop10.contracts", 86400.0, 0.0, true, "DISCO-aggregator delivery service contracts"},
        {"loop11.delivery", 86400.0, 0.0, true, "aggregator charging service delivery"},
        {"loop12.flexible_contracts", 86400.0, 0.0, true, "aggregator-customer flexible contracts"},
        {"loop13.billing", 86400.0, 0.0, true, "retail billing"},
    };
}

std::string format_number(double v) {
    if (v == 0.0) return "0";
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 12);
    return std::string(buf, r.ptr);
}

}  // namespace gridloop::sim
