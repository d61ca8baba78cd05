#include "gridloop/microgrid.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "gridloop/error.hpp"

namespace gridloop::microgrid {

std::vector<std::string> DroopInverter::problems() const {
    std::vector<std::string> out;
    const std::string who = "inverter " + std::to_string(id);
    if (!(mp > 0.0)) out.push_back(who + ": mp must be positive");
    if (!(mq > 0.0)) out.push_back(who + ": mq must be positive");
    if (!(p_max >= 0.0)) out.push_back(who + ": p_max must be non-negative");
    if (!(dv_max >= 0.0)) out.push_back(who + ": dv_max must be non-negative");
    return out;
}

std::vector<std::string> MicrogridState::problems() const {
    std::vector<std::string> out;
    if (inverters.empty()) out.push_back("microgrid: no inverters");
    std::set<int> ids;
    for (const auto& inv : inverters) {
        auto p = inv.problems();
        out.insert(out.end(), p.begin(), p.end());
        if (!ids.insert(inv.id).second) out.push_back("microgrid: duplicate inverter id " + std::to_string(inv.id));
        if (inv.omega_nom != inverters.front().omega_nom)
            out.push_back("microgrid: inverters disagree on nominal frequency");
    }
    return out;
}

namespace {

void require_valid(const MicrogridState& s) {
    auto p = s.problems();
    if (!p.empty()) throw ConfigError(std::move(p));
}

void solve_reactive(MicrogridState& s) {
    double inv_sum = 0.0, q_set_sum = 0.0;
    for (const auto& inv : s.inverters) {
        inv_sum += 1.0 / inv.mq;
        q_set_sum += inv.q_set;
    }
    const double mismatch = s.load_q - q_set_sum;
    for (auto& inv : s.inverters) {
        inv.q = inv.q_set + mismatch / (inv.mq * inv_sum);
        inv.v = inv.v_nom + inv.d_v - inv.mq * (inv.q - inv.q_set);
    }
}

}  // namespace

MicrogridState droop_steady_state(const MicrogridState& state) {
    require_valid(state);
    MicrogridState s = state;
    if (s.mode == Mode::islanded) {
        // Work in deviations from the nominal frequency to avoid cancellation.
        const double ref = s.inverters.front().omega_nom;
        double cap = 0.0, weighted = 0.0, inv_sum = 0.0, p_set_sum = 0.0;
        for (const auto& inv : s.inverters) {
            cap += inv.p_max;
            weighted += (inv.omega_nom - ref + inv.d_omega) / inv.mp;
            inv_sum += 1.0 / inv.mp;
            p_set_sum += inv.p_set;
        }
        if (s.load_p > cap)
            throw InfeasibleError("capacity", "microgrid: load " + std::to_string(s.load_p) +
                                                  " pu exceeds inverter capacity " + std::to_string(cap) + " pu");
        const double shift = (weighted + p_set_sum - s.load_p) / inv_sum;
        s.omega = ref + shift;
        for (auto& inv : s.inverters) inv.p = inv.p_set + (inv.omega_nom - ref + inv.d_omega - shift) / inv.mp;
        s.pcc_flow = 0.0;
    } else {
        s.omega = s.grid_omega;
        double total = 0.0;
        for (auto& inv : s.inverters) {
            inv.p = inv.p_set + (inv.omega_nom + inv.d_omega - s.omega) / inv.mp;
            total += inv.p;
        }
        s.pcc_flow = s.load_p - total;
    }
    solve_reactive(s);
    return s;
}

MicrogridState secondary_restore(const MicrogridState& state, std::span<const VoltageTarget> targets,
                                 const SecondaryConfig& cfg) {
    if (!(cfg.gain > 0.0 && cfg.gain <= 1.0)) throw InvalidArgument("secondary_restore: gain must be in (0, 1]");
    MicrogridState s = droop_steady_state(state);
    std::vector<std::pair<std::size_t, double>> idx;
    for (const auto& t : targets) {
        auto it = std::find_if(s.inverters.begin(), s.inverters.end(),
                               [&](const DroopInverter& inv) { return inv.id == t.inverter_id; });
        if (it == s.inverters.end())
            throw InvalidArgument("secondary_restore: no inverter " + std::to_string(t.inverter_id));
        const double needed = it->d_v + (t.v - it->v);
        if (std::abs(needed) > it->dv_max)
            throw InfeasibleError("voltage limit", "inverter " + std::to_string(it->id) + " needs a voltage offset of " +
                                                       std::to_string(needed) + " pu beyond its limit " +
                                                       std::to_string(it->dv_max));
        idx.emplace_back(static_cast<std::size_t>(it - s.inverters.begin()), t.v);
    }
    const double omega_ref = s.inverters.front().omega_nom;
    const bool restore_freq = s.mode == Mode::islanded;
    for (int k = 0; k < cfg.max_iters; ++k) {
        double worst = 0.0;
        if (restore_freq) {
            const double err = omega_ref - s.omega;
            worst = std::abs(err);
            for (auto& inv : s.inverters) inv.d_omega += cfg.gain * err;
        }
        for (const auto& [i, target] : idx) {
            const double err = target - s.inverters[i].v;
            worst = std::max(worst, std::abs(err));
            s.inverters[i].d_v += cfg.gain * err;
        }
        if (worst <= cfg.tol) return s;
        s = droop_steady_state(s);
    }
    throw NumericError("secondary_restore: offsets did not converge");
}

MicrogridState tertiary_setpoint(const MicrogridState& state, double pcc_target) {
    if (state.mode != Mode::grid_connected) throw InvalidArgument("tertiary_setpoint: microgrid is islanded");
    MicrogridState s = droop_steady_state(state);
    const double shift = s.pcc_flow - pcc_target;  // extra generation needed
    if (shift == 0.0) return s;
    double cap = 0.0, gen = 0.0;
    for (const auto& inv : s.inverters) {
        cap += inv.p_max;
        gen += inv.p;
    }
    const double wanted = gen + shift;
    if (wanted < 0.0 || wanted > cap || cap == 0.0)
        throw InfeasibleError("capability", "microgrid: PCC target " + std::to_string(pcc_target) + " pu needs " +
                                                std::to_string(wanted) + " pu of generation, capability is [0, " +
                                                std::to_string(cap) + "]");
    for (auto& inv : s.inverters) {
        const double delta = shift * inv.p_max / cap;
        if (inv.p + delta < 0.0 || inv.p + delta > inv.p_max)
            throw InfeasibleError("capability", "inverter " + std::to_string(inv.id) +
                                                    " cannot take its share of the PCC target");
        inv.p_set += delta;
    }
    return droop_steady_state(s);
}

MicrogridState island(const MicrogridState& state) {
    MicrogridState s = state;
    s.mode = Mode::islanded;
    return droop_steady_state(s);
}

const char* to_string(Mode m) noexcept { return m == Mode::islanded ? "islanded" : "grid_connected"; }

Mode mode_from(const std::string& s) {
    if (s == "islanded") return Mode::islanded;
    if (s == "grid_connected") return Mode::grid_connected;
    throw InvalidArgument("unknown microgrid mode '" + s + "'");
}

}  // namespace gridloop::microgrid
