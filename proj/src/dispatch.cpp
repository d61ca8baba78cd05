#include "gridloop/dispatch.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "gridloop/error.hpp"
#include "gridloop/lp.hpp"

namespace gridloop::dispatch {

Generator Generator::linear(int id, int bus, double cost, double p_min, double p_max,
                            double startup_cost) {
    Generator g;
    g.id = id;
    g.bus = bus;
    g.segments = {{p_max, cost}};
    g.p_min = p_min;
    g.p_max = p_max;
    g.startup_cost = startup_cost;
    return g;
}

double Generator::energy_cost(double mw) const {
    double cost = 0.0, cum = 0.0;
    for (std::size_t k = 0; k < segments.size() && mw > cum; ++k) {
        const bool last = k + 1 == segments.size();
        const double width = last ? mw - cum : std::min(segments[k].width_mw, mw - cum);
        cost += width * segments[k].cost;
        cum += width;
    }
    return cost;
}

std::vector<std::string> Generator::problems() const {
    std::vector<std::string> out;
    const std::string tag = "generator " + std::to_string(id);
    if (!(p_min >= 0.0) || !(p_max >= p_min)) out.push_back(tag + ": requires 0 <= p_min <= p_max");
    if (segments.empty() || segments.size() > 3) out.push_back(tag + ": needs 1 to 3 cost segments");
    for (std::size_t k = 1; k < segments.size(); ++k)
        if (segments[k].cost < segments[k - 1].cost)
            out.push_back(tag + ": segment costs must be non-decreasing");
    for (std::size_t k = 0; k + 1 < segments.size(); ++k)
        if (!(segments[k].width_mw > 0.0)) out.push_back(tag + ": segment widths must be > 0");
    if (startup_cost < 0.0) out.push_back(tag + ": startup cost must be >= 0");
    return out;
}

std::vector<double> spread_demand(const grid::Network& net, double demand_mw) {
    auto w = net.demand_weights();
    for (auto& x : w) x *= demand_mw;
    return w;
}

std::size_t required_scenarios(std::size_t n, double epsilon) {
    return static_cast<std::size_t>(std::ceil((1.0 - epsilon) * static_cast<double>(n) - 1e-9));
}

namespace {

constexpr double kFlowTol = 1e-6;

void check_inputs(std::span<const Generator> gens, const grid::Network& net) {
    std::vector<std::string> problems;
    for (const auto& g : gens) {
        auto p = g.problems();
        problems.insert(problems.end(), p.begin(), p.end());
        bool found = false;
        for (const auto& b : net.buses()) found = found || b.id == g.bus;
        if (!found) problems.push_back("generator " + std::to_string(g.id) + ": unknown bus " + std::to_string(g.bus));
    }
    if (!problems.empty()) throw ConfigError(std::move(problems));
}

// LP shared by economic and scenario dispatch. One block of generator
// segment variables; per scenario a balance row (plus a surplus variable
// when `allow_reserve`) and two rows per flow-limited line.
struct DispatchLp {
    lp::Problem prob;
    std::vector<std::vector<std::size_t>> seg_vars;  // per generator
    std::vector<std::size_t> reserve_vars;           // per scenario
    std::vector<std::size_t> balance_rows;           // per scenario
    struct LineRows {
        std::size_t line, scenario, upper, lower;
    };
    std::vector<LineRows> line_rows;
};

DispatchLp build_lp(std::span<const Generator> gens, const std::vector<bool>& on,
                    const std::vector<std::vector<double>>& scenarios, const grid::Network& net,
                    const Eigen::MatrixXd& h, bool enforce_lines, bool allow_reserve) {
    DispatchLp d;
    d.seg_vars.resize(gens.size());
    for (std::size_t g = 0; g < gens.size(); ++g) {
        if (!on[g]) continue;
        const auto& gen = gens[g];
        double cum = 0.0;
        for (std::size_t k = 0; k < gen.segments.size(); ++k) {
            const bool last = k + 1 == gen.segments.size();
            const double width = last ? gen.p_max - cum : std::min(gen.segments[k].width_mw, gen.p_max - cum);
            if (width <= 0.0 && !last) continue;
            d.seg_vars[g].push_back(d.prob.add_var(gen.segments[k].cost, 0.0, std::max(width, 0.0)));
            cum += std::max(width, 0.0);
        }
        if (gen.p_min > 0.0) {
            std::vector<std::pair<std::size_t, double>> row;
            for (auto v : d.seg_vars[g]) row.emplace_back(v, 1.0);
            d.prob.add_row(std::move(row), lp::Sense::ge, gen.p_min, "pmin " + std::to_string(gen.id));
        }
    }
    std::vector<std::size_t> gen_bus(gens.size());
    for (std::size_t g = 0; g < gens.size(); ++g) gen_bus[g] = net.index_of(gens[g].bus);

    for (std::size_t s = 0; s < scenarios.size(); ++s) {
        const auto& dem = scenarios[s];
        const double total = std::accumulate(dem.begin(), dem.end(), 0.0);
        std::vector<std::pair<std::size_t, double>> row;
        for (std::size_t g = 0; g < gens.size(); ++g)
            for (auto v : d.seg_vars[g]) row.emplace_back(v, 1.0);
        if (allow_reserve) {
            const auto r = d.prob.add_var(0.0);
            d.reserve_vars.push_back(r);
            row.emplace_back(r, -1.0);
        }
        d.balance_rows.push_back(d.prob.add_row(std::move(row), lp::Sense::eq, total, "balance"));
        if (!enforce_lines) continue;
        for (std::size_t l = 0; l < net.lines().size(); ++l) {
            const double limit = net.lines()[l].flow_limit;
            if (!std::isfinite(limit)) continue;
            const double limit_mw = limit * net.base_mva();
            const auto li = static_cast<Eigen::Index>(l);
            std::vector<std::pair<std::size_t, double>> coeffs;
            for (std::size_t g = 0; g < gens.size(); ++g) {
                const double hg = h(li, static_cast<Eigen::Index>(gen_bus[g]));
                if (hg == 0.0) continue;
                for (auto v : d.seg_vars[g]) coeffs.emplace_back(v, hg);
            }
            double load_flow = 0.0;
            for (std::size_t b = 0; b < dem.size(); ++b) load_flow += h(li, static_cast<Eigen::Index>(b)) * dem[b];
            const std::string name = "line " + std::to_string(l);
            const auto up = d.prob.add_row(coeffs, lp::Sense::le, limit_mw + load_flow, name);
            const auto lo = d.prob.add_row(std::move(coeffs), lp::Sense::ge, -limit_mw + load_flow, name);
            d.line_rows.push_back({l, s, up, lo});
        }
    }
    return d;
}

std::vector<double> outputs_of(const DispatchLp& d, const lp::Solution& sol, std::size_t n) {
    std::vector<double> out(n, 0.0);
    for (std::size_t g = 0; g < n; ++g)
        for (auto v : d.seg_vars[g]) out[g] += sol.x[v];
    return out;
}

std::vector<double> line_flows_mw(const Eigen::MatrixXd& h, std::span<const Generator> gens,
                                  const std::vector<double>& output, std::span<const double> demand,
                                  const grid::Network& net) {
    std::vector<double> inj(demand.size());
    for (std::size_t b = 0; b < demand.size(); ++b) inj[b] = -demand[b];
    for (std::size_t g = 0; g < gens.size(); ++g) inj[net.index_of(gens[g].bus)] += output[g];
    std::vector<double> flows(static_cast<std::size_t>(h.rows()), 0.0);
    for (Eigen::Index l = 0; l < h.rows(); ++l)
        for (Eigen::Index b = 0; b < h.cols(); ++b) flows[static_cast<std::size_t>(l)] += h(l, b) * inj[static_cast<std::size_t>(b)];
    return flows;
}

std::vector<double> prices_of(const DispatchLp& d, const lp::Solution& sol, const Eigen::MatrixXd& h,
                              std::size_t nbus) {
    std::vector<double> lmp(nbus, 0.0);
    for (auto row : d.balance_rows)
        for (auto& p : lmp) p += sol.duals[row];
    for (const auto& lr : d.line_rows) {
        const double mu = sol.duals[lr.upper] + sol.duals[lr.lower];
        if (mu == 0.0) continue;
        for (std::size_t b = 0; b < nbus; ++b)
            lmp[b] += mu * h(static_cast<Eigen::Index>(lr.line), static_cast<Eigen::Index>(b));
    }
    return lmp;
}

Eigen::MatrixXd ptdf_or_empty(const grid::Network& net) {
    if (net.lines().empty()) return Eigen::MatrixXd::Zero(0, static_cast<Eigen::Index>(net.size()));
    return grid::ptdf(net);
}

// Quick bound check before building an LP; empty string when plausible.
std::string capacity_problem(std::span<const Generator> gens, const std::vector<bool>& on, double total) {
    double cap = 0.0, floor = 0.0;
    for (std::size_t g = 0; g < gens.size(); ++g)
        if (on[g]) {
            cap += gens[g].p_max;
            floor += gens[g].p_min;
        }
    if (cap < total - 1e-9) return "capacity";
    if (floor > total + 1e-9) return "minimum generation";
    return {};
}

// Solves ED for a commitment; returns nullopt-like empty output on infeasibility.
struct EdOutcome {
    bool feasible = false;
    std::string violated;
    DispatchResult result;
};

EdOutcome solve_ed(std::span<const Generator> gens, const std::vector<bool>& on,
                   std::span<const double> bus_demand, const grid::Network& net,
                   const Eigen::MatrixXd& h) {
    EdOutcome out;
    const double total = std::accumulate(bus_demand.begin(), bus_demand.end(), 0.0);
    out.violated = capacity_problem(gens, on, total);
    if (!out.violated.empty()) return out;

    const std::vector<std::vector<double>> scen{std::vector<double>(bus_demand.begin(), bus_demand.end())};
    const auto d = build_lp(gens, on, scen, net, h, true, false);
    const auto sol = lp::solve(d.prob);
    if (sol.status != lp::Status::optimal) {
        // Name the lines the unconstrained merit-order dispatch overloads.
        const auto relaxed = build_lp(gens, on, scen, net, h, false, false);
        const auto rs = lp::solve(relaxed.prob);
        out.violated = "network";
        if (rs.status == lp::Status::optimal) {
            const auto flows = line_flows_mw(h, gens, outputs_of(relaxed, rs, gens.size()), bus_demand, net);
            std::string names;
            for (std::size_t l = 0; l < flows.size(); ++l) {
                const auto& line = net.lines()[l];
                if (std::abs(flows[l]) > line.flow_limit * net.base_mva() + kFlowTol)
                    names += (names.empty() ? "line " : ", line ") + std::to_string(line.from) + "-" +
                             std::to_string(line.to);
            }
            if (!names.empty()) out.violated = names;
        }
        return out;
    }
    out.feasible = true;
    auto& r = out.result;
    r.output = outputs_of(d, sol, gens.size());
    r.total_cost = sol.objective;
    r.lmp = prices_of(d, sol, h, net.size());
    r.line_flow_mw = line_flows_mw(h, gens, r.output, bus_demand, net);
    for (std::size_t l = 0; l < r.line_flow_mw.size(); ++l) {
        const double lim = net.lines()[l].flow_limit * net.base_mva();
        if (std::isfinite(lim) && std::abs(r.line_flow_mw[l]) >= lim - kFlowTol) r.binding_lines.push_back(l);
    }
    return out;
}

std::vector<bool> committed_mask(std::span<const Generator> gens) {
    std::vector<bool> on(gens.size());
    for (std::size_t g = 0; g < gens.size(); ++g) on[g] = gens[g].committed;
    return on;
}

}  // namespace

DispatchResult economic_dispatch(std::span<const Generator> gens, std::span<const double> bus_demand,
                                 const grid::Network& net) {
    check_inputs(gens, net);
    if (bus_demand.size() != net.size())
        throw InvalidArgument("economic dispatch: demand vector size does not match bus count");
    const auto h = ptdf_or_empty(net);
    auto out = solve_ed(gens, committed_mask(gens), bus_demand, net, h);
    if (!out.feasible)
        throw InfeasibleError(out.violated, "economic dispatch infeasible: " + out.violated);
    return std::move(out.result);
}

DispatchResult economic_dispatch(std::span<const Generator> gens, double demand_mw,
                                 const grid::Network& net) {
    const auto d = spread_demand(net, demand_mw);
    return economic_dispatch(gens, d, net);
}

namespace {

bool lex_less(std::size_t a, std::size_t b, std::size_t units) {
    for (std::size_t u = 0; u < units; ++u) {
        const bool x = (a >> u) & 1U, y = (b >> u) & 1U;
        if (x != y) return !x;
    }
    return false;
}

std::vector<bool> mask_to_vec(std::size_t mask, std::size_t units) {
    std::vector<bool> v(units);
    for (std::size_t u = 0; u < units; ++u) v[u] = (mask >> u) & 1U;
    return v;
}

bool near(double a, double b) {
    return std::isfinite(a) && std::isfinite(b) && std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(a));
}

}  // namespace

CommitmentSchedule unit_commitment(std::span<const Generator> gens,
                                   std::span<const double> hourly_demand_mw,
                                   const grid::Network& net) {
    check_inputs(gens, net);
    const std::size_t units = gens.size(), hours = hourly_demand_mw.size();
    if (hours > 24) throw InvalidArgument("unit commitment: horizon limited to 24 hours");
    if (units > 10) throw InvalidArgument("unit commitment: limited to 10 units");
    const std::size_t states = std::size_t{1} << units;
    const auto h = ptdf_or_empty(net);
    constexpr double inf = std::numeric_limits<double>::infinity();

    // Masks in lexicographic order of their commitment vectors.
    std::vector<std::size_t> order(states);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return lex_less(a, b, units); });

    std::vector<std::vector<double>> energy(hours, std::vector<double>(states, inf));
    std::vector<std::vector<DispatchResult>> ed(hours, std::vector<DispatchResult>(states));
    for (std::size_t t = 0; t < hours; ++t) {
        const auto demand = spread_demand(net, hourly_demand_mw[t]);
        bool any = false;
        for (std::size_t s = 0; s < states; ++s) {
            auto r = solve_ed(gens, mask_to_vec(s, units), demand, net, h);
            if (!r.feasible) continue;
            energy[t][s] = r.result.total_cost;
            ed[t][s] = std::move(r.result);
            any = true;
        }
        if (!any)
            throw InfeasibleError("hour " + std::to_string(t),
                                  "unit commitment: no feasible commitment for hour " + std::to_string(t));
    }

    auto startup = [&](std::size_t from, std::size_t to) {
        double c = 0.0;
        for (std::size_t u = 0; u < units; ++u)
            if (((to >> u) & 1U) && !((from >> u) & 1U)) c += gens[u].startup_cost;
        return c;
    };

    // value[t][s]: optimal cost of hours t.. given state s at hour t.
    std::vector<std::vector<double>> value(hours + 1, std::vector<double>(states, 0.0));
    for (std::size_t t = hours; t-- > 0;) {
        for (std::size_t s = 0; s < states; ++s) {
            if (!std::isfinite(energy[t][s])) {
                value[t][s] = inf;
                continue;
            }
            double best = inf;
            if (t + 1 == hours) best = 0.0;
            else
                for (std::size_t n = 0; n < states; ++n) best = std::min(best, startup(s, n) + value[t + 1][n]);
            value[t][s] = energy[t][s] + best;
        }
    }

    CommitmentSchedule out;
    std::size_t prev = 0;
    for (std::size_t t = 0; t < hours; ++t) {
        double best = inf;
        for (std::size_t s = 0; s < states; ++s) best = std::min(best, startup(prev, s) + value[t][s]);
        if (!std::isfinite(best))
            throw InfeasibleError("hour " + std::to_string(t), "unit commitment: infeasible at hour " + std::to_string(t));
        std::size_t pick = order.front();
        for (auto s : order)
            if (near(startup(prev, s) + value[t][s], best)) {
                pick = s;
                break;
            }
        out.startup_cost += startup(prev, pick);
        out.on.push_back(mask_to_vec(pick, units));
        out.dispatch.push_back(ed[t][pick].output);
        out.lmp.push_back(ed[t][pick].lmp);
        out.hourly_energy_cost.push_back(energy[t][pick]);
        prev = pick;
    }
    out.total_cost = out.startup_cost;
    for (double c : out.hourly_energy_cost) out.total_cost += c;
    return out;
}

double schedule_cost(std::span<const Generator> gens, const std::vector<std::vector<bool>>& on,
                     std::span<const double> hourly_demand_mw, const grid::Network& net) {
    const auto h = ptdf_or_empty(net);
    double total = 0.0;
    std::vector<bool> prev(gens.size(), false);
    for (std::size_t t = 0; t < hourly_demand_mw.size(); ++t) {
        const auto r = solve_ed(gens, on[t], spread_demand(net, hourly_demand_mw[t]), net, h);
        if (!r.feasible) return std::numeric_limits<double>::infinity();
        total += r.result.total_cost;
        for (std::size_t u = 0; u < gens.size(); ++u)
            if (on[t][u] && !prev[u]) total += gens[u].startup_cost;
        prev = on[t];
    }
    return total;
}

namespace {

struct SubsetOutcome {
    bool feasible = false;
    ScenarioDispatchResult result;
};

SubsetOutcome solve_subset(std::span<const Generator> gens,
                           const std::vector<std::vector<double>>& scenarios,
                           const std::vector<std::size_t>& retained, const grid::Network& net,
                           const Eigen::MatrixXd& h) {
    SubsetOutcome out;
    std::vector<std::vector<double>> kept;
    for (auto s : retained) kept.push_back(scenarios[s]);
    const auto on = committed_mask(gens);
    double worst = 0.0;
    for (const auto& d : kept) worst = std::max(worst, std::accumulate(d.begin(), d.end(), 0.0));
    if (capacity_problem(gens, on, worst) == "capacity") return out;

    const auto d = build_lp(gens, on, kept, net, h, true, true);
    const auto sol = lp::solve(d.prob);
    if (sol.status != lp::Status::optimal) return out;
    out.feasible = true;
    auto& r = out.result;
    r.retained = retained;
    r.dispatch.output = outputs_of(d, sol, gens.size());
    r.dispatch.total_cost = sol.objective;
    r.dispatch.lmp = prices_of(d, sol, h, net.size());
    for (auto v : d.reserve_vars) r.reserve_mw.push_back(sol.x[v]);
    // Report flows for the heaviest retained scenario.
    std::size_t heavy = 0;
    for (std::size_t k = 1; k < kept.size(); ++k)
        if (std::accumulate(kept[k].begin(), kept[k].end(), 0.0) >
            std::accumulate(kept[heavy].begin(), kept[heavy].end(), 0.0))
            heavy = k;
    auto demand = kept[heavy];
    demand[net.slack_index()] += r.reserve_mw[heavy];
    r.dispatch.line_flow_mw = line_flows_mw(h, gens, r.dispatch.output, demand, net);
    for (std::size_t l = 0; l < r.dispatch.line_flow_mw.size(); ++l) {
        const double lim = net.lines()[l].flow_limit * net.base_mva();
        if (std::isfinite(lim) && std::abs(r.dispatch.line_flow_mw[l]) >= lim - kFlowTol)
            r.dispatch.binding_lines.push_back(l);
    }
    return out;
}

bool next_combination(std::vector<std::size_t>& c, std::size_t n) {
    const std::size_t k = c.size();
    for (std::size_t i = k; i-- > 0;) {
        if (c[i] < n - k + i) {
            ++c[i];
            for (std::size_t j = i + 1; j < k; ++j) c[j] = c[j - 1] + 1;
            return true;
        }
    }
    return false;
}

double binomial(std::size_t n, std::size_t k) {
    double r = 1.0;
    for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
    return r;
}

std::vector<std::size_t> complement(const std::vector<std::size_t>& dropped, std::size_t n) {
    std::vector<std::size_t> kept;
    for (std::size_t s = 0; s < n; ++s)
        if (!std::binary_search(dropped.begin(), dropped.end(), s)) kept.push_back(s);
    return kept;
}

}  // namespace

ScenarioDispatchResult scenario_dispatch(std::span<const Generator> gens,
                                         const std::vector<std::vector<double>>& scenarios,
                                         const grid::Network& net, double epsilon,
                                         std::size_t max_subsets) {
    check_inputs(gens, net);
    if (scenarios.empty()) throw InvalidArgument("scenario dispatch: at least one scenario required");
    if (!(epsilon >= 0.0 && epsilon < 1.0)) throw InvalidArgument("scenario dispatch: epsilon must be in [0, 1)");
    for (const auto& s : scenarios)
        if (s.size() != net.size()) throw InvalidArgument("scenario dispatch: scenario size does not match bus count");
    const std::size_t n = scenarios.size();
    const std::size_t keep = required_scenarios(n, epsilon);
    const std::size_t drop = n - keep;
    const auto h = ptdf_or_empty(net);

    SubsetOutcome best;
    if (binomial(n, drop) <= static_cast<double>(max_subsets)) {
        std::vector<std::size_t> dropped(drop);
        std::iota(dropped.begin(), dropped.end(), 0);
        do {
            auto cand = solve_subset(gens, scenarios, complement(dropped, n), net, h);
            if (cand.feasible && (!best.feasible ||
                                  cand.result.dispatch.total_cost < best.result.dispatch.total_cost - 1e-9)) {
                cand.result.dropped = dropped;
                best = std::move(cand);
            }
        } while (drop > 0 && next_combination(dropped, n));
    } else {
        // Greedy: repeatedly drop the scenario whose removal saves the most.
        std::vector<std::size_t> dropped;
        for (std::size_t step = 0; step < drop; ++step) {
            SubsetOutcome step_best;
            std::size_t pick = n;
            for (std::size_t s = 0; s < n; ++s) {
                if (std::find(dropped.begin(), dropped.end(), s) != dropped.end()) continue;
                auto trial = dropped;
                trial.push_back(s);
                std::sort(trial.begin(), trial.end());
                auto cand = solve_subset(gens, scenarios, complement(trial, n), net, h);
                if (cand.feasible && (!step_best.feasible || cand.result.dispatch.total_cost <
                                                                 step_best.result.dispatch.total_cost - 1e-9)) {
                    step_best = std::move(cand);
                    pick = s;
                }
            }
            if (pick == n) break;
            dropped.push_back(pick);
            std::sort(dropped.begin(), dropped.end());
            step_best.result.dropped = dropped;
            best = std::move(step_best);
        }
        if (drop == 0) best = solve_subset(gens, scenarios, complement({}, n), net, h);
    }
    if (!best.feasible)
        throw InfeasibleError("scenario coverage",
                              "scenario dispatch: no dispatch covers " + std::to_string(keep) + " of " +
                                  std::to_string(n) + " scenarios");
    return std::move(best.result);
}

}  // namespace gridloop::dispatch
