#pragma once

// EV charging coordination (valley filling) solved centrally and by the
// aggregator/charger price protocol, and charging-station placement on a
// radial feeder.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "gridloop/grid.hpp"

namespace gridloop::ev {

struct EvSession {
    int id = 0;
    std::size_t k_start = 0;
    std::size_t k_end = 0;          // inclusive
    double rate_max = 0.0;          // kW
    double efficiency = 1.0;
    double battery_capacity = 0.0;  // kWh
    double soc_start = 0.0;
    double soc_end = 0.0;

    /// Energy the battery must gain, kWh.
    double required_energy() const noexcept { return battery_capacity * (soc_end - soc_start); }
    /// Sum of w[k] over slots needed to deliver the energy, kW.
    double required_rate_sum(double slot_h) const noexcept { return required_energy() / (efficiency * slot_h); }
    std::vector<std::string> problems(std::size_t slots, double slot_h) const;
};

/// rate_max inside [k_start, k_end], zero outside.
double charging_bound(const EvSession& s, std::size_t k) noexcept;

struct ChargingProfile {
    std::vector<std::vector<double>> rates;  // [ev][slot], kW
    std::size_t iterations = 0;

    std::vector<double> aggregate(std::span<const double> base_load) const;
};

/// sum_k (D[k] + sum_n w_n[k])^2
double valley_objective(const ChargingProfile& p, std::span<const double> base_load);
double load_variance(std::span<const double> load);

/// Exact minimizer of ||w - target||^2 over 0 <= w <= bound, with the
/// session's energy equality. Bisection on the equality multiplier, then
/// the closed form on the free set it identifies.
std::vector<double> ev_local_project(std::span<const double> target, const EvSession& s, double slot_h);

/// Valley filling by accelerated projected gradient.
ChargingProfile centralized_schedule(std::span<const EvSession> sessions, std::span<const double> base_load,
                                     double slot_h, std::size_t max_iters = 2'000'000);

/// Synchronous rounds: price p = 2 * aggregate is broadcast and each EV
/// moves to ev_local_project(w_prev - step * p). Stops when no rate moves
/// more than 1e-6 kW. step <= 0 picks 1 / (2 N).
ChargingProfile decentralized_schedule(std::span<const EvSession> sessions, std::span<const double> base_load,
                                       double slot_h, double step = 0.0, std::size_t max_iters = 1'000'000);

/// Each EV charges at full rate from the start of its window.
ChargingProfile uncoordinated_schedule(std::span<const EvSession> sessions, std::size_t slots, double slot_h);

struct PlacementProblem {
    grid::Network net;                 // radial; bus p/q_inject give base injections (pu)
    std::vector<int> candidates;       // bus ids
    std::vector<double> fixed_cost;    // $ per candidate
    double per_spot_cost = 0.0;        // $
    double spot_power_kw = 0.0;
    double demand_floor_kw = 0.0;
    double budget = 0.0;               // $
    double v_min = 0.95, v_max = 1.05;  // pu magnitude
    int spots_max = 20;                // per station

    std::vector<std::string> problems() const;
};

struct Placement {
    std::vector<int> built;       // x per candidate
    std::vector<int> spots;       // y per candidate
    double cost = 0.0;
    grid::DistFlow flow;
};

/// Candidate subsets are visited in order of cost (ties: lexicographic on
/// the sorted candidate positions), and each gets the minimal number of
/// spots; the first subset with a network-feasible spot assignment is
/// optimal. Within a subset the assignment tried first is the
/// lexicographically greatest. Throws InfeasibleError naming
/// "demand_floor", "budget", "voltage" or "current".
Placement evcs_place(const PlacementProblem& prob);

/// Re-checks a placement's loading against voltage and current limits.
bool placement_network_ok(const PlacementProblem& prob, std::span<const int> spots, grid::DistFlow* flow = nullptr,
                          bool* voltage_violated = nullptr);

}  // namespace gridloop::ev
