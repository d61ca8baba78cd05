#pragma once

// Reference computations over the library's model types: replicas and
// brute-force searches that do not call the optimizers they check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gridloop/ev.hpp"
#include "gridloop/grid.hpp"
#include "gridloop/storage.hpp"

namespace oracle {

using gridloop::ev::EvSession;
using gridloop::ev::PlacementProblem;
using gridloop::storage::BesConfig;
using gridloop::storage::RegulationMarket;

inline EvSession session(int id, std::size_t a, std::size_t b, double wmax, double energy_kwh, double eta = 1.0) {
    EvSession s;
    s.id = id;
    s.k_start = a;
    s.k_end = b;
    s.rate_max = wmax;
    s.efficiency = eta;
    s.battery_capacity = 100.0;
    s.soc_start = 0.2;
    s.soc_end = 0.2 + energy_kwh / 100.0;
    return s;
}

// Independent replica of the clipped-tracking policy and revenue; returns
// {revenue, meets floor}.
inline std::pair<double, bool> oracle_revenue(double c, const RegulationMarket& m, const BesConfig& cfg) {
    double e = cfg.soc_initial, err = 0.0, sig = 0.0, through = 0.0;
    bool idle = true;
    for (double r : m.signal) {
        double b = std::max(-cfg.power_rating, std::min(cfg.power_rating, c * r));
        const double room_up = (cfg.soc_max - e) / (cfg.interval_h * cfg.efficiency);
        const double room_down = (e - cfg.soc_min) * cfg.efficiency / cfg.interval_h;
        if (b > room_up) b = room_up;
        if (b < -room_down) b = -room_down;
        e += b > 0 ? cfg.interval_h * cfg.efficiency * b : cfg.interval_h * b / cfg.efficiency;
        err += std::abs(b - c * r);
        sig += std::abs(r);
        through += std::abs(b);
        idle = idle && b == 0.0;
    }
    double rho = (c == 0.0 || sig == 0.0) ? (idle ? 1.0 : 0.0) : std::max(0.0, 1.0 - err / (c * sig));
    return {m.price * c * rho - cfg.aging_coeff * cfg.interval_h * through, rho >= m.performance_floor - 1e-9};
}

inline double oracle_best_capacity(const BesConfig& cfg, const std::vector<RegulationMarket>& ms, std::size_t required) {
    double best_c = 0.0, best = -1e300;
    for (int i = 0; i * 0.01 <= cfg.capacity_max + 1e-12; ++i) {
        const double c = i * 0.01;
        double rev = 0.0;
        std::size_t ok = 0;
        for (const auto& m : ms) {
            const auto [r, f] = oracle_revenue(c, m, cfg);
            rev += r;
            ok += f;
        }
        rev /= static_cast<double>(ms.size());
        if (ok >= required && rev > best + 1e-9) {
            best = rev;
            best_c = c;
        }
    }
    return best_c;
}

// Dense primal active-set QP on the valley-filling program, with a 1e-9
// ridge so the reduced Hessian is definite.
inline std::vector<std::vector<double>> qp_oracle(const std::vector<EvSession>& evs, const std::vector<double>& d, double h) {
    const int n = static_cast<int>(evs.size()), K = static_cast<int>(d.size()), nv = n * K;
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(nv, nv);
    Eigen::VectorXd g(nv), ub(nv), x(nv);
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, nv);
    Eigen::VectorXd T(n);
    for (int e = 0; e < n; ++e) {
        T(e) = evs[e].required_rate_sum(h);
        const double len = static_cast<double>(evs[e].k_end - evs[e].k_start + 1);
        for (int k = 0; k < K; ++k) {
            const int i = e * K + k;
            ub(i) = gridloop::ev::charging_bound(evs[e], k);
            g(i) = 2.0 * d[k];
            A(e, i) = 1.0;
            x(i) = ub(i) > 0 ? T(e) / len : 0.0;
            for (int f = 0; f < n; ++f) H(i, f * K + k) = 2.0;
            H(i, i) += 2e-9;
        }
    }
    // Working set: 0 free, -1 at lower bound, +1 at upper bound.
    std::vector<int> ws(nv, 0);
    for (int i = 0; i < nv; ++i) {
        if (ub(i) == 0 || x(i) <= 0) ws[i] = -1;
        else if (x(i) >= ub(i)) ws[i] = 1;
    }
    for (int iter = 0; iter < 10000; ++iter) {
        std::vector<int> fr;
        for (int i = 0; i < nv; ++i)
            if (ws[i] == 0) fr.push_back(i);
        const int nf = static_cast<int>(fr.size());
        const Eigen::VectorXd grad = H * x + g;
        Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(nf + n, nf + n);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nf + n);
        for (int a = 0; a < nf; ++a) {
            for (int b = 0; b < nf; ++b) kkt(a, b) = H(fr[a], fr[b]);
            for (int e = 0; e < n; ++e) kkt(a, nf + e) = kkt(nf + e, a) = A(e, fr[a]);
            rhs(a) = -grad(fr[a]);
        }
        for (int e = 0; e < n; ++e) {
            bool any = false;
            for (int a = 0; a < nf; ++a) any = any || A(e, fr[a]) != 0;
            if (!any) kkt(nf + e, nf + e) = 1.0;  // equality row fully fixed
        }
        const Eigen::VectorXd sol = kkt.fullPivLu().solve(rhs);
        Eigen::VectorXd p = Eigen::VectorXd::Zero(nv);
        for (int a = 0; a < nf; ++a) p(fr[a]) = sol(a);
        if (p.cwiseAbs().maxCoeff() < 1e-12) {
            const Eigen::VectorXd mu = sol.tail(n);
            const Eigen::VectorXd r = grad + A.transpose() * mu;
            int worst = -1;
            double worst_val = -1e-10;
            for (int i = 0; i < nv; ++i) {
                if (ws[i] == 0 || ub(i) == 0) continue;
                const double lam = ws[i] < 0 ? r(i) : -r(i);
                if (lam < worst_val) {
                    worst_val = lam;
                    worst = i;
                }
            }
            if (worst < 0) break;
            ws[worst] = 0;
            continue;
        }
        double alpha = 1.0;
        int block = -1, side = 0;
        for (int i = 0; i < nv; ++i) {
            if (ws[i] != 0) continue;
            if (p(i) < -1e-15 && -x(i) / p(i) < alpha) {
                alpha = -x(i) / p(i);
                block = i;
                side = -1;
            }
            if (p(i) > 1e-15 && (ub(i) - x(i)) / p(i) < alpha) {
                alpha = (ub(i) - x(i)) / p(i);
                block = i;
                side = 1;
            }
        }
        x += alpha * p;
        if (block >= 0) {
            ws[block] = side;
            x(block) = side < 0 ? 0.0 : ub(block);
        }
    }
    std::vector<std::vector<double>> w(n, std::vector<double>(K));
    for (int e = 0; e < n; ++e)
        for (int k = 0; k < K; ++k) w[e][k] = x(e * K + k);
    return w;
}

inline double objective_of(const std::vector<std::vector<double>>& w, const std::vector<double>& d) {
    double s = 0;
    for (std::size_t k = 0; k < d.size(); ++k) {
        double a = d[k];
        for (const auto& r : w) a += r[k];
        s += a * a;
    }
    return s;
}

inline const std::vector<double> kValley{10.0, 8.0, 5.0, 4.0, 6.0, 9.0};

inline std::vector<EvSession> three_evs() {
    return {session(1, 0, 5, 3.0, 9.0, 0.9), session(2, 1, 4, 2.5, 6.0, 0.95), session(3, 2, 5, 4.0, 8.0)};
}

inline PlacementProblem feeder() {
    using namespace gridloop::grid;
    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<Bus> buses;
    for (int i = 0; i < 6; ++i) {
        Bus b;
        b.id = i;
        b.kind = i == 0 ? BusKind::slack : BusKind::pq;
        b.p_inject = i == 0 ? 0.0 : -0.1;
        b.q_inject = i == 0 ? 0.0 : -0.03;
        buses.push_back(b);
    }
    std::vector<Line> lines{{0, 1, 0, 0.01, 0.02, kInf, 5.0}, {1, 2, 0, 0.02, 0.02, kInf, 2.0},
                            {2, 3, 0, 0.03, 0.03, kInf, 1.0}, {1, 4, 0, 0.02, 0.03, kInf, 2.0},
                            {4, 5, 0, 0.04, 0.04, kInf, 0.8}};
    PlacementProblem p;
    p.net = Network(buses, lines, Topology::radial_distribution, 1.0);
    p.candidates = {2, 3, 5};
    p.fixed_cost = {500.0, 300.0, 350.0};
    p.per_spot_cost = 20.0;
    p.spot_power_kw = 50.0;
    p.demand_floor_kw = 900.0;
    p.budget = 5000.0;
    p.v_min = 0.95;
    p.v_max = 1.05;
    return p;
}

struct Enumerated {
    std::vector<int> x, y;
    double cost = 1e300;
    bool found = false;
};

// Every (x, y) with y_n <= y_max x_n; keeps the cheapest network-feasible
// one, ties by sorted built positions, then by lexicographically greatest y.
inline Enumerated enumerate_all(const PlacementProblem& p) {
    Enumerated best;
    const int m = static_cast<int>(p.candidates.size());
    std::vector<int> y(m, 0);
    auto members = [](const std::vector<int>& x) {
        std::vector<int> v;
        for (int i = 0; i < static_cast<int>(x.size()); ++i)
            if (x[i]) v.push_back(i);
        return v;
    };
    for (int mask = 0; mask < (1 << m); ++mask) {
        std::vector<int> x(m);
        for (int i = 0; i < m; ++i) x[i] = (mask >> i) & 1;
        std::function<void(int)> rec = [&](int i) {
            if (i == m) {
                int total = 0;
                double cost = 0;
                for (int c = 0; c < m; ++c) {
                    total += y[c];
                    cost += p.fixed_cost[c] * x[c] + p.per_spot_cost * y[c];
                }
                if (p.spot_power_kw * total < p.demand_floor_kw - 1e-9 || cost > p.budget) return;
                std::vector<double> pl(p.net.size()), ql(p.net.size());
                for (std::size_t b = 0; b < p.net.size(); ++b) {
                    pl[b] = -p.net.buses()[b].p_inject;
                    ql[b] = -p.net.buses()[b].q_inject;
                }
                for (int c = 0; c < m; ++c) pl[p.net.index_of(p.candidates[c])] += p.spot_power_kw * y[c] / 1000.0;
                const auto f = gridloop::grid::lindistflow_solve(p.net, pl, ql);
                for (double v : f.voltage_sq)
                    if (v < p.v_min * p.v_min || v > p.v_max * p.v_max) return;
                for (std::size_t l = 0; l < p.net.lines().size(); ++l)
                    if (std::abs(f.p_flow[l]) + std::abs(f.q_flow[l]) > std::sqrt(2.0) * p.net.lines()[l].current_limit)
                        return;
                bool better = !best.found || cost < best.cost;
                if (!better && cost == best.cost) {
                    const auto a = members(x), b = members(best.x);
                    better = a < b || (a == b && y > best.y);
                }
                if (better) best = Enumerated{x, y, cost, true};
                return;
            }
            for (int v = 0; v <= (x[i] ? p.spots_max : 0); ++v) {
                y[i] = v;
                rec(i + 1);
            }
            y[i] = 0;
        };
        rec(0);
    }
    return best;
}

}  // namespace oracle
