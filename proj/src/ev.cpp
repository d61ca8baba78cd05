#include "gridloop/ev.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gridloop/error.hpp"
#include "gridloop/simd.hpp"

namespace gridloop::ev {

std::vector<std::string> EvSession::problems(std::size_t slots, double slot_h) const {
    std::vector<std::string> out;
    const std::string tag = "ev " + std::to_string(id) + ": ";
    if (k_start > k_end) out.push_back(tag + "k_start after k_end");
    if (k_end >= slots) out.push_back(tag + "window beyond horizon");
    if (!(efficiency > 0.0 && efficiency <= 1.0)) out.push_back(tag + "efficiency must be in (0, 1]");
    if (!(soc_start >= 0.0 && soc_end <= 1.0 && soc_end >= soc_start)) out.push_back(tag + "need 0 <= soc_start <= soc_end <= 1");
    if (!(rate_max >= 0.0) || !(battery_capacity >= 0.0)) out.push_back(tag + "negative rate or capacity");
    if (out.empty()) {
        const double window = static_cast<double>(k_end - k_start + 1);
        if (required_rate_sum(slot_h) > rate_max * window * (1.0 + 1e-12))
            out.push_back(tag + "required energy exceeds what the window can deliver");
    }
    return out;
}

double charging_bound(const EvSession& s, std::size_t k) noexcept {
    return k >= s.k_start && k <= s.k_end ? s.rate_max : 0.0;
}

std::vector<double> ChargingProfile::aggregate(std::span<const double> base_load) const {
    std::vector<double> agg(base_load.begin(), base_load.end());
    for (const auto& w : rates) simd::axpy(1.0, w, agg);
    return agg;
}

double valley_objective(const ChargingProfile& p, std::span<const double> base_load) {
    const auto agg = p.aggregate(base_load);
    return simd::dot(agg, agg);
}

double load_variance(std::span<const double> load) {
    if (load.empty()) return 0.0;
    const double n = static_cast<double>(load.size());
    const double mean = simd::sum(load) / n;
    double v = 0.0;
    for (double x : load) v += (x - mean) * (x - mean);
    return v / n;
}

namespace {

std::vector<double> bounds_of(const EvSession& s, std::size_t slots) {
    std::vector<double> ub(slots);
    for (std::size_t k = 0; k < slots; ++k) ub[k] = charging_bound(s, k);
    return ub;
}

void check_sessions(std::span<const EvSession> sessions, std::size_t slots, double slot_h) {
    if (!(slot_h > 0.0)) throw InvalidArgument("ev: slot length must be positive");
    for (const auto& s : sessions) {
        const auto p = s.problems(slots, slot_h);
        if (!p.empty()) throw InfeasibleError("ev " + std::to_string(s.id), p.front());
    }
}

}  // namespace

std::vector<double> ev_local_project(std::span<const double> target, const EvSession& s, double slot_h) {
    const std::size_t n = target.size();
    const auto ub = bounds_of(s, n);
    const double total = s.required_rate_sum(slot_h);
    const double cap = std::accumulate(ub.begin(), ub.end(), 0.0);
    if (!(total >= 0.0) || total > cap * (1.0 + 1e-12) + 1e-12)
        throw InfeasibleError("ev " + std::to_string(s.id), "ev_local_project: energy outside what the bounds allow");
    std::vector<double> w(n, 0.0);
    if (total == 0.0) return w;
    if (total >= cap) return ub;

    const double tmax = *std::max_element(target.begin(), target.end());
    const double tmin = *std::min_element(target.begin(), target.end());
    const double umax = *std::max_element(ub.begin(), ub.end());
    double lo = -tmax, hi = umax - tmin;  // clip_sum(lo) = 0 <= total <= cap = clip_sum(hi)
    for (int it = 0; it < 200 && hi - lo > 1e-10 * (1.0 + std::abs(lo) + std::abs(hi)); ++it) {
        const double mid = 0.5 * (lo + hi);
        (simd::clip_sum(target, ub, mid) < total ? lo : hi) = mid;
    }
    double lambda = 0.5 * (lo + hi);

    // Closed form on the free set identified by the bracket.
    double fixed = 0.0, free_target = 0.0;
    std::size_t nfree = 0;
    for (std::size_t k = 0; k < n; ++k) {
        if (ub[k] <= 0.0) continue;
        const double v = target[k] + lambda;
        if (v >= ub[k]) fixed += ub[k];
        else if (v > 0.0) {
            free_target += target[k];
            ++nfree;
        }
    }
    if (nfree > 0) {
        const double exact = (total - fixed - free_target) / static_cast<double>(nfree);
        bool consistent = true;
        for (std::size_t k = 0; k < n && consistent; ++k) {
            if (ub[k] <= 0.0) continue;
            const double before = target[k] + lambda, after = target[k] + exact;
            const int cb = before >= ub[k] ? 2 : (before > 0.0 ? 1 : 0);
            const int ca = after >= ub[k] + 1e-12 ? 2 : (after > -1e-12 ? 1 : 0);
            consistent = cb == ca || (cb == 1 && (std::abs(after) <= 1e-12 || std::abs(after - ub[k]) <= 1e-12));
        }
        if (consistent) lambda = exact;
    }
    simd::clip_shift(target, ub, lambda, w);
    return w;
}

ChargingProfile centralized_schedule(std::span<const EvSession> sessions, std::span<const double> base_load,
                                     double slot_h, std::size_t max_iters) {
    const std::size_t slots = base_load.size();
    check_sessions(sessions, slots, slot_h);
    ChargingProfile p;
    const std::size_t n = sessions.size();
    if (n == 0) return p;

    // Feasible start: uniform over each window.
    for (const auto& s : sessions) {
        std::vector<double> flat(slots, 0.0);
        p.rates.push_back(ev_local_project(flat, s, slot_h));
    }
    const double step = 1.0 / (2.0 * static_cast<double>(n));  // 1 / Lipschitz constant
    ChargingProfile y = p, prev = p;
    double t = 1.0;
    double obj = valley_objective(p, base_load);
    std::vector<double> target(slots);
    for (std::size_t it = 1; it <= max_iters; ++it) {
        const auto agg = y.aggregate(base_load);
        ChargingProfile next;
        next.rates.resize(n);
        for (std::size_t e = 0; e < n; ++e) {
            for (std::size_t k = 0; k < slots; ++k) target[k] = y.rates[e][k] - step * 2.0 * agg[k];
            next.rates[e] = ev_local_project(target, sessions[e], slot_h);
        }
        const double next_obj = valley_objective(next, base_load);
        double change = 0.0;
        for (std::size_t e = 0; e < n; ++e)
            for (std::size_t k = 0; k < slots; ++k) change = std::max(change, std::abs(next.rates[e][k] - p.rates[e][k]));

        if (next_obj > obj + 1e-12 * (1.0 + obj) && t > 1.0) {
            // Momentum overshot: restart from the last iterate.
            t = 1.0;
            y = p;
            continue;
        }
        const double decrease = std::max(0.0, obj - next_obj);
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        const double beta = (t - 1.0) / t_next;
        prev = std::move(p);
        p = std::move(next);
        y = p;
        for (std::size_t e = 0; e < n; ++e)
            for (std::size_t k = 0; k < slots; ++k) y.rates[e][k] += beta * (p.rates[e][k] - prev.rates[e][k]);
        t = t_next;
        obj = next_obj;
        p.iterations = it;
        if (decrease < 1e-8 && change < 1e-7) return p;
    }
    throw NumericError("centralized_schedule: no convergence within " + std::to_string(max_iters) + " iterations");
}

ChargingProfile decentralized_schedule(std::span<const EvSession> sessions, std::span<const double> base_load,
                                       double slot_h, double step, std::size_t max_iters) {
    const std::size_t slots = base_load.size();
    check_sessions(sessions, slots, slot_h);
    ChargingProfile p;
    const std::size_t n = sessions.size();
    if (n == 0) return p;
    if (step <= 0.0) step = 1.0 / (2.0 * static_cast<double>(n));
    p.rates.assign(n, std::vector<double>(slots, 0.0));

    std::vector<double> target(slots);
    double residual = 0.0;
    for (std::size_t it = 1; it <= max_iters; ++it) {
        const auto agg = p.aggregate(base_load);
        std::vector<double> price(slots);
        for (std::size_t k = 0; k < slots; ++k) price[k] = 2.0 * agg[k];
        residual = 0.0;
        for (std::size_t e = 0; e < n; ++e) {
            auto& w = p.rates[e];
            for (std::size_t k = 0; k < slots; ++k) target[k] = w[k] - step * price[k];
            auto next = ev_local_project(target, sessions[e], slot_h);
            for (std::size_t k = 0; k < slots; ++k) residual = std::max(residual, std::abs(next[k] - w[k]));
            w = std::move(next);
        }
        p.iterations = it;
        if (residual < 1e-6) return p;
    }
    throw NumericError("decentralized_schedule: no convergence within " + std::to_string(max_iters) +
                       " rounds, residual " + std::to_string(residual) + " kW");
}

ChargingProfile uncoordinated_schedule(std::span<const EvSession> sessions, std::size_t slots, double slot_h) {
    check_sessions(sessions, slots, slot_h);
    ChargingProfile p;
    for (const auto& s : sessions) {
        std::vector<double> w(slots, 0.0);
        double left = s.required_rate_sum(slot_h);
        for (std::size_t k = s.k_start; k <= s.k_end && left > 0.0; ++k) {
            w[k] = std::min(s.rate_max, left);
            left -= w[k];
        }
        p.rates.push_back(std::move(w));
    }
    return p;
}

std::vector<std::string> PlacementProblem::problems() const {
    std::vector<std::string> out = net.problems();
    if (net.topology() != grid::Topology::radial_distribution) out.push_back("evcs: network must be radial");
    if (candidates.size() != fixed_cost.size()) out.push_back("evcs: one fixed cost per candidate required");
    if (candidates.size() > 12) out.push_back("evcs: at most 12 candidate nodes");
    for (int c : candidates) {
        bool found = false;
        for (const auto& b : net.buses()) found = found || b.id == c;
        if (!found) out.push_back("evcs: candidate bus " + std::to_string(c) + " not in network");
    }
    if (!(demand_floor_kw >= 0.0)) out.push_back("evcs: demand floor must be non-negative");
    if (!(budget >= 0.0)) out.push_back("evcs: budget must be non-negative");
    if (demand_floor_kw > 0.0 && !(spot_power_kw > 0.0)) out.push_back("evcs: spot power must be positive");
    if (!(v_min > 0.0 && v_min < v_max)) out.push_back("evcs: need 0 < v_min < v_max");
    if (spots_max < 0) out.push_back("evcs: spots_max must be non-negative");
    return out;
}

bool placement_network_ok(const PlacementProblem& prob, std::span<const int> spots, grid::DistFlow* flow,
                          bool* voltage_violated) {
    const auto& net = prob.net;
    std::vector<double> p(net.size()), q(net.size());
    for (std::size_t i = 0; i < net.size(); ++i) {
        p[i] = -net.buses()[i].p_inject;
        q[i] = -net.buses()[i].q_inject;
    }
    const double kw_to_pu = 1.0 / (1000.0 * net.base_mva());
    for (std::size_t c = 0; c < prob.candidates.size(); ++c)
        p[net.index_of(prob.candidates[c])] += prob.spot_power_kw * spots[c] * kw_to_pu;
    grid::DistFlow f = grid::lindistflow_solve(net, p, q);
    bool ok = true;
    bool vbad = false;
    const double lo = prob.v_min * prob.v_min, hi = prob.v_max * prob.v_max;
    for (double v : f.voltage_sq)
        if (v < lo || v > hi) vbad = true;
    ok = !vbad;
    for (std::size_t l = 0; l < net.lines().size(); ++l)
        if (!grid::within_current_proxy(net.lines()[l], f.p_flow[l], f.q_flow[l])) ok = false;
    if (voltage_violated) *voltage_violated = vbad;
    if (flow) *flow = std::move(f);
    return ok;
}

namespace {

struct InnerSearch {
    const PlacementProblem& prob;
    std::vector<std::size_t> open;  // candidate positions built
    std::vector<int> spots;
    bool saw_voltage = false, saw_current = false;
    std::size_t budget_left = 0;

    // Lexicographically greatest first: first open station takes as many
    // spots as it can.
    bool assign(std::size_t i, int remaining) {
        if (budget_left == 0) return false;
        if (i + 1 == open.size()) {
            if (remaining > prob.spots_max) return false;
            spots[open[i]] = remaining;
            --budget_left;
            bool vbad = false;
            const bool ok = placement_network_ok(prob, spots, nullptr, &vbad);
            if (!ok) (vbad ? saw_voltage : saw_current) = true;
            if (!ok) spots[open[i]] = 0;
            return ok;
        }
        const int rest_cap = prob.spots_max * static_cast<int>(open.size() - i - 1);
        for (int y = std::min(prob.spots_max, remaining); y >= std::max(0, remaining - rest_cap); --y) {
            spots[open[i]] = y;
            if (assign(i + 1, remaining - y)) return true;
        }
        spots[open[i]] = 0;
        return false;
    }
};

}  // namespace

Placement evcs_place(const PlacementProblem& prob) {
    const auto problems = prob.problems();
    if (!problems.empty()) throw ConfigError(problems);
    const std::size_t m = prob.candidates.size();
    const int needed = prob.demand_floor_kw > 0.0
                           ? static_cast<int>(std::ceil(prob.demand_floor_kw / prob.spot_power_kw - 1e-9))
                           : 0;
    if (needed > prob.spots_max * static_cast<int>(m))
        throw InfeasibleError("demand_floor", "evcs: demand floor exceeds the capacity of all candidates");

    struct Subset {
        std::vector<std::size_t> members;
        double cost;
    };
    std::vector<Subset> subsets;
    for (std::uint32_t mask = 0; mask < (1u << m); ++mask) {
        Subset s;
        double cost = 0.0;
        for (std::size_t c = 0; c < m; ++c)
            if (mask & (1u << c)) {
                s.members.push_back(c);
                cost += prob.fixed_cost[c];
            }
        if (needed > prob.spots_max * static_cast<int>(s.members.size())) continue;
        if (needed > 0 && s.members.empty()) continue;
        s.cost = cost + prob.per_spot_cost * needed;
        subsets.push_back(std::move(s));
    }
    std::sort(subsets.begin(), subsets.end(), [](const Subset& a, const Subset& b) {
        if (a.cost != b.cost) return a.cost < b.cost;
        return a.members < b.members;
    });

    bool saw_voltage = false, saw_current = false;
    for (const auto& s : subsets) {
        InnerSearch inner{prob, s.members, std::vector<int>(m, 0), false, false, 2'000'000};
        bool ok;
        if (s.members.empty()) {
            bool vbad = false;
            ok = placement_network_ok(prob, inner.spots, nullptr, &vbad);
            if (!ok) (vbad ? inner.saw_voltage : inner.saw_current) = true;
        } else {
            ok = inner.assign(0, needed);
        }
        saw_voltage = saw_voltage || inner.saw_voltage;
        saw_current = saw_current || inner.saw_current;
        if (!ok) continue;
        if (s.cost > prob.budget)
            throw InfeasibleError("budget", "evcs: cheapest feasible placement costs " + std::to_string(s.cost) +
                                                " above budget " + std::to_string(prob.budget));
        Placement out;
        out.built.assign(m, 0);
        for (auto c : s.members) out.built[c] = 1;
        out.spots = inner.spots;
        out.cost = s.cost;
        placement_network_ok(prob, out.spots, &out.flow);
        return out;
    }
    if (saw_voltage) throw InfeasibleError("voltage", "evcs: every placement violates voltage bounds");
    throw InfeasibleError("current", "evcs: every placement violates line current limits");
}

}  // namespace gridloop::ev
