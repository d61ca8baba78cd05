#pragma once

// Market-timescale loops: economic dispatch with DC network limits and
// locational prices, unit commitment, and scenario-based dispatch.

#include <cstddef>
#include <span>
#include <vector>

#include "gridloop/grid.hpp"

namespace gridloop::dispatch {

/// Real-time economic dispatch cadence, seconds.
inline constexpr double kEconomicDispatchPeriod = 300.0;

struct CostSegment {
    double width_mw = 0.0;  // ignored for the last segment, which runs to p_max
    double cost = 0.0;      // $/MWh
};

struct Generator {
    int id = 0;
    int bus = 0;
    std::vector<CostSegment> segments;  // 1..3, non-decreasing cost
    double p_min = 0.0;
    double p_max = 0.0;
    double startup_cost = 0.0;
    bool committed = true;

    static Generator linear(int id, int bus, double cost, double p_min, double p_max,
                            double startup_cost = 0.0);

    /// Energy cost of producing `mw` for one hour.
    double energy_cost(double mw) const;
    std::vector<std::string> problems() const;
};

struct DispatchResult {
    std::vector<double> output;        // MW per generator
    double total_cost = 0.0;           // $/h
    std::vector<double> lmp;           // $/MWh per bus
    std::vector<std::size_t> binding_lines;
    std::vector<double> line_flow_mw;
};

/// Cost-minimal dispatch of the committed units against per-bus demand (MW).
/// Throws InfeasibleError naming "capacity", "minimum generation", or the
/// overloaded lines.
DispatchResult economic_dispatch(std::span<const Generator> gens, std::span<const double> bus_demand,
                                 const grid::Network& net);

/// Total demand spread over buses by Network::demand_weights().
DispatchResult economic_dispatch(std::span<const Generator> gens, double demand_mw,
                                 const grid::Network& net);

std::vector<double> spread_demand(const grid::Network& net, double demand_mw);

struct CommitmentSchedule {
    std::vector<std::vector<bool>> on;          // [hour][unit]
    std::vector<std::vector<double>> dispatch;  // [hour][unit] MW
    std::vector<std::vector<double>> lmp;       // [hour][bus]
    std::vector<double> hourly_energy_cost;
    double startup_cost = 0.0;
    double total_cost = 0.0;
};

/// Globally optimal commitment over all on/off combinations, units start
/// offline. Among equal-cost optima the lexicographically smallest schedule
/// (hour-major, unit order within an hour) wins.
CommitmentSchedule unit_commitment(std::span<const Generator> gens,
                                   std::span<const double> hourly_demand_mw,
                                   const grid::Network& net);

/// Total cost of a given schedule (energy + startups), or +inf if some hour
/// is infeasible.
double schedule_cost(std::span<const Generator> gens, const std::vector<std::vector<bool>>& on,
                     std::span<const double> hourly_demand_mw, const grid::Network& net);

struct ScenarioDispatchResult {
    DispatchResult dispatch;
    std::vector<std::size_t> retained;
    std::vector<std::size_t> dropped;
    /// Surplus absorbed at the slack bus in each retained scenario, MW.
    std::vector<double> reserve_mw;
};

/// One dispatch that covers demand and respects line limits in at least
/// ceil((1 - epsilon) N) of the scenarios, at least cost. Scenarios to drop
/// are chosen by exhaustive enumeration (lexicographic tie-break); above
/// `max_subsets` combinations a greedy removal is used instead.
ScenarioDispatchResult scenario_dispatch(std::span<const Generator> gens,
                                         const std::vector<std::vector<double>>& bus_demand_scenarios,
                                         const grid::Network& net, double epsilon,
                                         std::size_t max_subsets = 20000);

std::size_t required_scenarios(std::size_t n, double epsilon);

}  // namespace gridloop::dispatch
