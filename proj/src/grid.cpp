#include "gridloop/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>
#include <set>

#include "gridloop/error.hpp"

namespace gridloop::grid {

Network::Network(std::vector<Bus> buses, std::vector<Line> lines, Topology topology,
                 double base_mva)
    : buses_(std::move(buses)), lines_(std::move(lines)), topology_(topology),
      base_mva_(base_mva) {}

std::size_t Network::index_of(int id) const {
    for (std::size_t i = 0; i < buses_.size(); ++i)
        if (buses_[i].id == id) return i;
    throw InvalidArgument("unknown bus id " + std::to_string(id));
}

std::size_t Network::slack_index() const {
    for (std::size_t i = 0; i < buses_.size(); ++i)
        if (buses_[i].kind == BusKind::slack) return i;
    throw InvalidArgument("network has no slack bus");
}

bool Network::connected() const {
    if (buses_.empty()) return true;
    std::vector<std::vector<std::size_t>> adj(buses_.size());
    for (const auto& l : lines_) {
        const auto a = index_of(l.from), b = index_of(l.to);
        adj[a].push_back(b);
        adj[b].push_back(a);
    }
    std::vector<char> seen(buses_.size(), 0);
    std::queue<std::size_t> q;
    q.push(0);
    seen[0] = 1;
    std::size_t count = 1;
    while (!q.empty()) {
        const auto u = q.front();
        q.pop();
        for (auto v : adj[u])
            if (!seen[v]) {
                seen[v] = 1;
                ++count;
                q.push(v);
            }
    }
    return count == buses_.size();
}

std::vector<std::string> Network::problems() const {
    std::vector<std::string> out;
    if (buses_.empty()) out.emplace_back("network: no buses");
    std::set<int> ids;
    std::size_t slacks = 0;
    for (const auto& b : buses_) {
        if (!ids.insert(b.id).second) out.push_back("network: duplicate bus id " + std::to_string(b.id));
        if (b.kind == BusKind::slack) ++slacks;
        if (!(b.voltage_sq > 0.0)) out.push_back("network: bus " + std::to_string(b.id) + " voltage_sq must be > 0");
        if (b.load_share < 0.0) out.push_back("network: bus " + std::to_string(b.id) + " load_share must be >= 0");
    }
    if (!buses_.empty() && slacks != 1)
        out.push_back("network: expected exactly one slack bus, found " + std::to_string(slacks));
    bool ends_ok = true;
    for (std::size_t k = 0; k < lines_.size(); ++k) {
        const auto& l = lines_[k];
        const std::string tag = "network: line " + std::to_string(l.from) + "-" + std::to_string(l.to);
        if (!ids.count(l.from) || !ids.count(l.to)) {
            out.push_back(tag + " references an unknown bus");
            ends_ok = false;
            continue;
        }
        if (l.from == l.to) out.push_back(tag + " is a self loop");
        if (topology_ == Topology::meshed_transmission && !(l.susceptance > 0.0))
            out.push_back(tag + " susceptance must be > 0");
        if (topology_ == Topology::radial_distribution && (l.r < 0.0 || l.x < 0.0))
            out.push_back(tag + " r and x must be >= 0");
        if (!(l.flow_limit > 0.0) || !(l.current_limit > 0.0)) out.push_back(tag + " limits must be > 0");
    }
    if (ends_ok && !buses_.empty()) {
        if (!connected()) out.emplace_back("network: graph is not connected");
        else if (topology_ == Topology::radial_distribution && lines_.size() != buses_.size() - 1)
            out.emplace_back("network: radial_distribution network is not a tree");
    }
    return out;
}

void Network::validate() const {
    auto p = problems();
    if (!p.empty()) throw ConfigError(std::move(p));
}

std::vector<double> Network::demand_weights() const {
    std::vector<double> w(buses_.size(), 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < buses_.size(); ++i) total += buses_[i].load_share;
    for (std::size_t i = 0; i < buses_.size(); ++i)
        w[i] = total > 0.0 ? buses_[i].load_share / total : 1.0 / static_cast<double>(buses_.size());
    return w;
}

namespace {

void require_transmission(const Network& net) {
    if (net.topology() != Topology::meshed_transmission)
        throw InvalidArgument("dc power flow requires a meshed_transmission network");
}

// Reduced susceptance matrix with the slack row and column removed, and the
// map from bus index to reduced index (-1 for the slack).
Eigen::MatrixXd reduced_susceptance(const Network& net, std::vector<std::ptrdiff_t>& reduced) {
    const std::size_t n = net.size();
    const std::size_t slack = net.slack_index();
    reduced.assign(n, -1);
    std::ptrdiff_t k = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (i != slack) reduced[i] = k++;
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(k, k);
    for (std::size_t l = 0; l < net.lines().size(); ++l) {
        const double s = net.lines()[l].susceptance;
        const auto ri = reduced[net.from_index(l)], rj = reduced[net.to_index(l)];
        if (ri >= 0) b(ri, ri) += s;
        if (rj >= 0) b(rj, rj) += s;
        if (ri >= 0 && rj >= 0) {
            b(ri, rj) -= s;
            b(rj, ri) -= s;
        }
    }
    return b;
}

Eigen::LDLT<Eigen::MatrixXd> factor(const Network& net, const Eigen::MatrixXd& b) {
    if (!net.connected())
        throw NumericError("dc power flow: susceptance matrix is singular (network is disconnected)");
    Eigen::LDLT<Eigen::MatrixXd> ldlt(b);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        (b.size() > 0 && ldlt.vectorD().minCoeff() <= 1e-14 * ldlt.vectorD().maxCoeff()))
        throw NumericError("dc power flow: susceptance matrix is singular");
    return ldlt;
}

}  // namespace

DcFlow dc_power_flow(const Network& net, std::span<const double> injections) {
    require_transmission(net);
    if (injections.size() != net.size())
        throw InvalidArgument("dc power flow: injection vector size does not match bus count");
    std::vector<std::ptrdiff_t> reduced;
    const Eigen::MatrixXd b = reduced_susceptance(net, reduced);
    const auto ldlt = factor(net, b);

    Eigen::VectorXd p(b.rows());
    double total = 0.0;
    for (std::size_t i = 0; i < net.size(); ++i) {
        total += injections[i];
        if (reduced[i] >= 0) p(reduced[i]) = injections[i];
    }
    const Eigen::VectorXd theta = b.rows() > 0 ? Eigen::VectorXd(ldlt.solve(p)) : Eigen::VectorXd();

    DcFlow out;
    out.angles.assign(net.size(), 0.0);
    for (std::size_t i = 0; i < net.size(); ++i)
        if (reduced[i] >= 0) out.angles[i] = theta(reduced[i]);
    out.flows.resize(net.lines().size());
    for (std::size_t l = 0; l < net.lines().size(); ++l)
        out.flows[l] = net.lines()[l].susceptance *
                       (out.angles[net.from_index(l)] - out.angles[net.to_index(l)]);
    const std::size_t slack = net.slack_index();
    out.slack_injection = injections[slack] - total;
    return out;
}

Eigen::MatrixXd ptdf(const Network& net) {
    require_transmission(net);
    std::vector<std::ptrdiff_t> reduced;
    const Eigen::MatrixXd b = reduced_susceptance(net, reduced);
    const auto ldlt = factor(net, b);
    const Eigen::MatrixXd x = b.rows() > 0 ? Eigen::MatrixXd(ldlt.solve(Eigen::MatrixXd::Identity(b.rows(), b.rows())))
                                           : Eigen::MatrixXd();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(net.lines().size()),
                                                static_cast<Eigen::Index>(net.size()));
    for (std::size_t l = 0; l < net.lines().size(); ++l) {
        const double s = net.lines()[l].susceptance;
        const auto ri = reduced[net.from_index(l)], rj = reduced[net.to_index(l)];
        for (std::size_t k = 0; k < net.size(); ++k) {
            const auto rk = reduced[k];
            if (rk < 0) continue;
            const double ti = ri >= 0 ? x(ri, rk) : 0.0;
            const double tj = rj >= 0 ? x(rj, rk) : 0.0;
            out(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k)) = s * (ti - tj);
        }
    }
    return out;
}

DistFlow lindistflow_solve(const Network& net, std::span<const double> p_load,
                           std::span<const double> q_load) {
    if (net.topology() != Topology::radial_distribution)
        throw InvalidArgument("lindistflow requires a radial_distribution network");
    const std::size_t n = net.size();
    if (p_load.size() != n || q_load.size() != n)
        throw InvalidArgument("lindistflow: load vector size does not match bus count");
    if (net.lines().size() + 1 != n || !net.connected())
        throw InvalidArgument("lindistflow: network is not radial (expected a connected tree)");

    // Orient the tree away from the slack.
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj(n);  // (neighbor, line)
    for (std::size_t l = 0; l < net.lines().size(); ++l) {
        const auto a = net.from_index(l), b = net.to_index(l);
        adj[a].emplace_back(b, l);
        adj[b].emplace_back(a, l);
    }
    const std::size_t root = net.slack_index();
    std::vector<std::ptrdiff_t> parent_line(n, -1);
    std::vector<std::size_t> order;
    order.reserve(n);
    std::vector<char> seen(n, 0);
    order.push_back(root);
    seen[root] = 1;
    for (std::size_t head = 0; head < order.size(); ++head) {
        const auto u = order[head];
        for (const auto& [v, l] : adj[u])
            if (!seen[v]) {
                seen[v] = 1;
                parent_line[v] = static_cast<std::ptrdiff_t>(l);
                order.push_back(v);
            }
    }

    std::vector<double> sub_p(p_load.begin(), p_load.end()), sub_q(q_load.begin(), q_load.end());
    DistFlow out;
    out.p_flow.assign(net.lines().size(), 0.0);
    out.q_flow.assign(net.lines().size(), 0.0);
    std::vector<std::size_t> parent(n, root);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const auto v = *it;
        if (parent_line[v] < 0) continue;
        const auto l = static_cast<std::size_t>(parent_line[v]);
        const auto u = net.from_index(l) == v ? net.to_index(l) : net.from_index(l);
        parent[v] = u;
        out.p_flow[l] = sub_p[v];
        out.q_flow[l] = sub_q[v];
        sub_p[u] += sub_p[v];
        sub_q[u] += sub_q[v];
    }
    out.voltage_sq.assign(n, 1.0);
    for (const auto v : order) {
        if (parent_line[v] < 0) continue;
        const auto l = static_cast<std::size_t>(parent_line[v]);
        const auto& line = net.lines()[l];
        out.voltage_sq[v] =
            out.voltage_sq[parent[v]] - 2.0 * (line.r * out.p_flow[l] + line.x * out.q_flow[l]);
    }
    return out;
}

bool within_current_proxy(const Line& line, double p, double q) noexcept {
    return std::abs(p) + std::abs(q) <= std::numbers::sqrt2 * line.current_limit + 1e-12;
}

}  // namespace gridloop::grid
