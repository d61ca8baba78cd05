#pragma once

// Static network model plus the two linearized power-flow solvers:
// DC power flow for meshed transmission and LinDistFlow for radial feeders.
// All quantities are per-unit on the network's base.

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gridloop::grid {

enum class BusKind { slack, pq, pv };
enum class Topology { meshed_transmission, radial_distribution };

struct Bus {
    int id = 0;
    BusKind kind = BusKind::pq;
    double voltage_sq = 1.0;
    double angle = 0.0;
    double p_inject = 0.0;
    double q_inject = 0.0;
    /// Share of system demand located at this bus when a total-MW demand
    /// is spread over the network. All zero means uniform.
    double load_share = 0.0;
};

struct Line {
    int from = 0;
    int to = 0;
    double susceptance = 0.0;  // transmission
    double r = 0.0;            // distribution
    double x = 0.0;
    double flow_limit = std::numeric_limits<double>::infinity();
    double current_limit = std::numeric_limits<double>::infinity();
};

class Network {
public:
    Network() = default;
    Network(std::vector<Bus> buses, std::vector<Line> lines, Topology topology,
            double base_mva = 100.0);

    const std::vector<Bus>& buses() const noexcept { return buses_; }
    const std::vector<Line>& lines() const noexcept { return lines_; }
    std::vector<Bus>& buses() noexcept { return buses_; }
    Topology topology() const noexcept { return topology_; }
    double base_mva() const noexcept { return base_mva_; }
    std::size_t size() const noexcept { return buses_.size(); }

    /// Position of bus `id` in buses(); throws InvalidArgument if absent.
    std::size_t index_of(int id) const;
    std::size_t slack_index() const;
    std::size_t from_index(std::size_t line) const { return index_of(lines_[line].from); }
    std::size_t to_index(std::size_t line) const { return index_of(lines_[line].to); }

    /// Every problem with the network, empty when valid.
    std::vector<std::string> problems() const;
    /// Throws ConfigError listing problems() when non-empty.
    void validate() const;

    bool connected() const;
    /// Per-bus weights summing to one used to spread a system demand.
    std::vector<double> demand_weights() const;

private:
    std::vector<Bus> buses_;
    std::vector<Line> lines_;
    Topology topology_ = Topology::meshed_transmission;
    double base_mva_ = 100.0;
};

struct DcFlow {
    std::vector<double> angles;  // rad, slack at 0
    std::vector<double> flows;   // per line, positive from -> to
    double slack_injection = 0.0;
};

/// DC power flow. Any imbalance in `injections` is absorbed at the slack
/// bus and reported in slack_injection.
DcFlow dc_power_flow(const Network& net, std::span<const double> injections);

/// Line flow per unit injection at each bus withdrawn at the slack
/// (rows: lines, columns: buses).
Eigen::MatrixXd ptdf(const Network& net);

struct DistFlow {
    std::vector<double> voltage_sq;  // per bus
    std::vector<double> p_flow;      // per line, parent -> child
    std::vector<double> q_flow;
};

/// LinDistFlow on a radial feeder with the slack held at 1.0 pu. Loads are
/// consumption (positive draws power).
DistFlow lindistflow_solve(const Network& net, std::span<const double> p_load,
                           std::span<const double> q_load);

/// Linear current-limit proxy |P| + |Q| <= sqrt(2) * current_limit.
bool within_current_proxy(const Line& line, double p, double q) noexcept;

}  // namespace gridloop::grid
