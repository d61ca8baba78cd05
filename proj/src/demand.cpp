#include "gridloop/demand.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gridloop/error.hpp"
#include "gridloop/lp.hpp"
#include "gridloop/rng.hpp"
#include "gridloop/simd.hpp"

namespace gridloop::demand {

std::vector<std::string> ThermalHouse::problems() const {
    std::vector<std::string> out;
    const std::string tag = "house " + std::to_string(id) + ": ";
    if (!(comfort_low < comfort_high)) out.push_back(tag + "comfort_low must be below comfort_high");
    if (!(alpha > 0.0) || !(beta > 0.0)) out.push_back(tag + "alpha and beta must be positive");
    if (!(temp >= -20.0 && temp <= 60.0)) out.push_back(tag + "temperature outside [-20, 60] degC");
    if (!(ac_power > 0.0)) out.push_back(tag + "ac_power must be positive");
    if (!(efficiency > 0.0)) out.push_back(tag + "efficiency must be positive");
    if (!(deadband >= 0.0)) out.push_back(tag + "deadband must be non-negative");
    return out;
}

double thermal_step(const ThermalHouse& h, double ambient, bool on, double dt) {
    if (!(dt > 0.0) || dt > 0.1 / h.alpha + 1e-15) throw InvalidArgument("thermal_step: dt must be in (0, 0.1/alpha]");
    return h.temp + dt * (h.alpha * (ambient - h.temp) - h.cooling() * (on ? 1.0 : 0.0));
}

SlotMap slot_map(const ThermalHouse& h, double slot_h, double dt) {
    if (!(dt > 0.0) || dt > 0.1 / h.alpha + 1e-15) throw InvalidArgument("slot_map: dt must be in (0, 0.1/alpha]");
    const auto m = static_cast<long>(std::llround(slot_h / dt));
    if (m < 1 || std::abs(static_cast<double>(m) * dt - slot_h) > 1e-9)
        throw InvalidArgument("slot_map: slot length must be a multiple of dt");
    const double r = 1.0 - dt * h.alpha;
    double decay = 1.0, series = 0.0;  // r^m and sum_{j<m} r^j
    for (long j = 0; j < m; ++j) {
        series += decay;
        decay *= r;
    }
    return SlotMap{decay, series * dt * h.alpha, series * dt * h.cooling()};
}

namespace {

struct FleetLp {
    lp::Problem problem;
    std::vector<std::vector<std::size_t>> u, theta;
    std::size_t budget_row = 0;
};

FleetLp build_lp(std::span<const ThermalHouse> houses, std::span<const double> price,
                 std::span<const double> ambient, double slot_h, double dt, bool with_budget, double energy) {
    FleetLp f;
    const std::size_t slots = ambient.size();
    double pmax = 0.0;
    for (double p : price) pmax = std::max(pmax, std::abs(p));
    const double tilt = 1e-9 * (1.0 + pmax);
    for (const auto& h : houses) {
        const SlotMap sm = slot_map(h, slot_h, dt);
        std::vector<std::size_t> u, th;
        for (std::size_t t = 0; t < slots; ++t) {
            const double c = price.empty() ? 0.0 : (price[t] + tilt * static_cast<double>(t)) * h.ac_power * slot_h;
            u.push_back(f.problem.add_var(c, 0.0, 1.0));
            th.push_back(f.problem.add_var(0.0, h.comfort_low, h.comfort_high));
        }
        // theta[t] is the temperature at the end of slot t.
        for (std::size_t t = 0; t < slots; ++t) {
            std::vector<std::pair<std::size_t, double>> row{{th[t], 1.0}, {u[t], sm.input}};
            double rhs = sm.drive * ambient[t];
            if (t == 0) rhs += sm.decay * h.temp;
            else row.emplace_back(th[t - 1], -sm.decay);
            f.problem.add_row(std::move(row), lp::Sense::eq, rhs,
                              "house " + std::to_string(h.id) + " slot " + std::to_string(t));
        }
        f.u.push_back(std::move(u));
        f.theta.push_back(std::move(th));
    }
    if (with_budget) {
        std::vector<std::pair<std::size_t, double>> row;
        for (std::size_t n = 0; n < houses.size(); ++n)
            for (std::size_t t = 0; t < slots; ++t) row.emplace_back(f.u[n][t], houses[n].ac_power * slot_h);
        f.budget_row = f.problem.add_row(std::move(row), lp::Sense::eq, energy, "energy budget");
    }
    return f;
}

void validate(std::span<const ThermalHouse> houses, std::span<const double> ambient, double slot_h) {
    std::vector<std::string> problems;
    if (houses.empty()) problems.push_back("demand: no houses");
    if (ambient.empty()) problems.push_back("demand: empty horizon");
    if (!(slot_h > 0.0)) problems.push_back("demand: slot length must be positive");
    for (const auto& h : houses) {
        for (auto& p : h.problems()) problems.push_back(std::move(p));
        if (h.temp < h.comfort_low || h.temp > h.comfort_high)
            problems.push_back("house " + std::to_string(h.id) + ": initial temperature outside comfort band");
    }
    if (!problems.empty()) throw ConfigError(problems);
}

// Names the first comfort violation no control can avoid: too warm with
// the AC always on, or too cold with it always off.
[[noreturn]] void throw_comfort(std::span<const ThermalHouse> houses, std::span<const double> ambient,
                                double slot_h, double dt) {
    for (const auto& h : houses) {
        const SlotMap sm = slot_map(h, slot_h, dt);
        double coolest = h.temp, warmest = h.temp;
        for (std::size_t t = 0; t < ambient.size(); ++t) {
            coolest = sm.decay * coolest + sm.drive * ambient[t] - sm.input;
            warmest = sm.decay * warmest + sm.drive * ambient[t];
            if (coolest > h.comfort_high || warmest < h.comfort_low)
                throw InfeasibleError("comfort", "house " + std::to_string(h.id) + " cannot stay in its comfort band at slot " +
                                                     std::to_string(t));
        }
    }
    for (const auto& h : houses) {
        auto single = build_lp(std::span<const ThermalHouse>(&h, 1), {}, ambient, slot_h, dt, false, 0.0);
        if (lp::solve(single.problem).status != lp::Status::optimal)
            throw InfeasibleError("comfort", "house " + std::to_string(h.id) + " has no comfort-feasible schedule");
    }
    throw InfeasibleError("energy budget", "demand: energy budget not achievable with comfort-feasible operation");
}

}  // namespace

FleetPlan lp_relaxed_schedule(std::span<const ThermalHouse> houses, std::span<const double> price,
                              std::span<const double> ambient, double energy_kwh, double slot_h, double dt) {
    validate(houses, ambient, slot_h);
    if (price.size() != ambient.size()) throw ConfigError("demand: price and ambient forecasts differ in length");
    if (!(energy_kwh >= 0.0)) throw ConfigError("demand: energy budget must be non-negative");
    FleetLp f = build_lp(houses, price, ambient, slot_h, dt, true, energy_kwh);
    const lp::Solution sol = lp::solve(f.problem);
    if (sol.status == lp::Status::infeasible) throw_comfort(houses, ambient, slot_h, dt);
    if (sol.status != lp::Status::optimal)
        throw NumericError(std::string("lp_relaxed_schedule: solver returned ") + lp::to_string(sol.status));

    FleetPlan plan;
    plan.energy_budget = energy_kwh;
    plan.slot_h = slot_h;
    const std::size_t slots = ambient.size();
    plan.p_ref.assign(slots, 0.0);
    for (std::size_t n = 0; n < houses.size(); ++n) {
        std::vector<double> u(slots), th{houses[n].temp};
        for (std::size_t t = 0; t < slots; ++t) {
            u[t] = std::clamp(sol.x[f.u[n][t]], 0.0, 1.0);
            th.push_back(sol.x[f.theta[n][t]]);
            plan.p_ref[t] += houses[n].ac_power * u[t];
            plan.cost += houses[n].ac_power * price[t] * u[t] * slot_h;
        }
        plan.u.push_back(std::move(u));
        plan.temp.push_back(std::move(th));
    }
    return plan;
}

EnergyRange energy_range(std::span<const ThermalHouse> houses, std::span<const double> ambient, double slot_h,
                         double dt) {
    validate(houses, ambient, slot_h);
    EnergyRange r;
    for (double sign : {1.0, -1.0}) {
        FleetLp f = build_lp(houses, {}, ambient, slot_h, dt, false, 0.0);
        for (std::size_t n = 0; n < houses.size(); ++n)
            for (auto v : f.u[n]) f.problem.set_cost(v, sign * houses[n].ac_power * slot_h);
        const lp::Solution sol = lp::solve(f.problem);
        if (sol.status == lp::Status::infeasible) throw_comfort(houses, ambient, slot_h, dt);
        if (sol.status != lp::Status::optimal) throw NumericError("energy_range: solver failed");
        (sign > 0 ? r.min_kwh : r.max_kwh) = sign * sol.objective;
    }
    return r;
}

Fleet::Fleet(std::span<const ThermalHouse> houses) {
    for (const auto& h : houses) {
        id_.push_back(h.id);
        alpha_.push_back(h.alpha);
        gain_.push_back(h.cooling());
        theta_.push_back(h.temp);
        on_.push_back(h.on ? 1.0 : 0.0);
        setpoint_.push_back(h.setpoint);
        base_.push_back(h.setpoint);
        low_.push_back(h.comfort_low);
        high_.push_back(h.comfort_high);
        deadband_.push_back(h.deadband);
        power_.push_back(h.ac_power);
    }
}

double Fleet::power() const noexcept { return simd::dot(power_, on_); }

double Fleet::max_power() const noexcept { return simd::sum(power_); }

std::vector<ThermalHouse> Fleet::houses() const {
    std::vector<ThermalHouse> out(size());
    for (std::size_t i = 0; i < size(); ++i) {
        ThermalHouse& h = out[i];
        h.id = id_[i];
        h.alpha = alpha_[i];
        h.beta = gain_[i] / power_[i];
        h.efficiency = 1.0;
        h.comfort_low = low_[i];
        h.comfort_high = high_[i];
        h.temp = theta_[i];
        h.setpoint = setpoint_[i];
        h.deadband = deadband_[i];
        h.ac_power = power_[i];
        h.on = on_[i] != 0.0;
    }
    return out;
}

void Fleet::apply_shift(double v) {
    for (std::size_t i = 0; i < size(); ++i) setpoint_[i] = std::clamp(base_[i] - v, low_[i], high_[i]);
}

void Fleet::set_base(std::span<const double> base) {
    if (base.size() != size()) throw InvalidArgument("Fleet::set_base: one base setpoint per house required");
    std::copy(base.begin(), base.end(), base_.begin());
}

void Fleet::thermostat(double ambient, double dt) {
    for (std::size_t i = 0; i < size(); ++i) {
        const double free_run = theta_[i] + dt * alpha_[i] * (ambient - theta_[i]);
        const double cooled = free_run - dt * gain_[i];
        if (on_[i] == 0.0 && free_run > setpoint_[i] + deadband_[i]) on_[i] = 1.0;
        else if (on_[i] != 0.0 && cooled < setpoint_[i] - deadband_[i]) on_[i] = 0.0;
    }
}

void Fleet::advance(double ambient, double dt) { simd::thermal_step(theta_, alpha_, gain_, on_, ambient, dt); }

double tracking_step(Fleet& fleet, double p_ref, double p_measured, TrackingController& ctrl, double ambient,
                     double dt) {
    const double scale = fleet.max_power();
    const double e = scale > 0.0 ? (p_ref - p_measured) / scale : 0.0;
    ctrl.integral += e * dt;
    ctrl.v = ctrl.kp * e + ctrl.ki * ctrl.integral;
    fleet.apply_shift(ctrl.v);
    fleet.thermostat(ambient, dt);
    return ctrl.v;
}

TrackingRun::TrackingRun(std::span<const ThermalHouse> houses, const FleetPlan& plan,
                         std::span<const double> ambient, TrackingController ctrl, double dt)
    : houses_(houses.begin(), houses.end()),
      plan_(plan),
      ambient_(ambient.begin(), ambient.end()),
      base_(houses.size()),
      ctrl_(ctrl),
      dt_(dt),
      fleet_(houses) {
    if (plan.p_ref.size() != ambient.size()) throw InvalidArgument("simulate_tracking: plan and ambient differ in length");
    for (const auto& h : houses)
        if (dt > 0.1 / h.alpha + 1e-15) throw InvalidArgument("simulate_tracking: dt exceeds 0.1/alpha");
    per_slot_ = static_cast<std::size_t>(std::llround(plan.slot_h / dt));
    total_ = per_slot_ * plan.p_ref.size();
}

TrackingRun::Tick TrackingRun::step() {
    if (done()) throw InvalidArgument("TrackingRun: horizon exhausted");
    const std::size_t t = tick_ / per_slot_, j = tick_ % per_slot_;
    if (plan_.temp.size() == houses_.size()) {
        // Base setpoint: the planned temperature at the end of this tick.
        const double w = static_cast<double>(j + 1) / static_cast<double>(per_slot_);
        for (std::size_t i = 0; i < houses_.size(); ++i)
            base_[i] = (1.0 - w) * plan_.temp[i][t] + w * plan_.temp[i][t + 1];
        fleet_.set_base(base_);
    }
    Tick k;
    k.time_h = static_cast<double>(tick_) * dt_;
    k.p_ref = plan_.p_ref[t];
    k.v = tracking_step(fleet_, k.p_ref, fleet_.power(), ctrl_, ambient_[t], dt_);
    k.p_total = fleet_.power();
    delivered_ += k.p_total * dt_;
    abs_err_ += std::abs(k.p_total - k.p_ref);
    fleet_.advance(ambient_[t], dt_);
    const auto th = fleet_.temps();
    for (std::size_t i = 0; i < houses_.size(); ++i) {
        const double lo = houses_[i].comfort_low - houses_[i].deadband;
        const double hi = houses_[i].comfort_high + houses_[i].deadband;
        excess_ = std::max({excess_, lo - th[i], th[i] - hi});
    }
    ++tick_;
    return k;
}

TrackingTrace TrackingRun::metrics() const {
    TrackingTrace tr;
    tr.fleet_max_kw = fleet_.max_power();
    tr.delivered_kwh = delivered_;
    tr.max_comfort_excess = excess_;
    tr.mean_abs_error_kw = tick_ ? abs_err_ / static_cast<double>(tick_) : 0.0;
    return tr;
}

TrackingTrace simulate_tracking(std::span<const ThermalHouse> houses, const FleetPlan& plan,
                                std::span<const double> ambient, TrackingController ctrl, double dt) {
    TrackingRun run(houses, plan, ambient, ctrl, dt);
    std::vector<TrackingRun::Tick> ticks;
    std::vector<std::vector<double>> temps;
    while (!run.done()) {
        ticks.push_back(run.step());
        const auto th = run.fleet().temps();
        temps.emplace_back(th.begin(), th.end());
    }
    TrackingTrace tr = run.metrics();
    for (const auto& k : ticks) {
        tr.time_h.push_back(k.time_h);
        tr.p_ref.push_back(k.p_ref);
        tr.p_total.push_back(k.p_total);
        tr.v.push_back(k.v);
    }
    tr.temps = std::move(temps);
    return tr;
}

std::vector<ThermalHouse> make_fleet(std::size_t n, std::uint64_t seed) {
    CounterRng rng(CounterRng::stream_key(seed, "demand.fleet"));
    std::vector<ThermalHouse> out;
    for (std::size_t i = 0; i < n; ++i) {
        ThermalHouse h;
        h.id = static_cast<int>(i + 1);
        h.alpha = 0.2 + 0.2 * rng.uniform();
        h.beta = 2.0 + 1.0 * rng.uniform();
        h.ac_power = 2.5 + 1.0 * rng.uniform();
        h.comfort_low = 21.0;
        h.comfort_high = 25.0;
        h.setpoint = 23.0;
        h.temp = 22.0 + 2.0 * rng.uniform();
        h.on = rng.uniform() < 0.5;
        out.push_back(h);
    }
    return out;
}

std::vector<double> default_ambient(std::size_t hours) {
    std::vector<double> a(hours);
    for (std::size_t t = 0; t < hours; ++t)
        a[t] = 29.0 + 5.0 * std::sin(2.0 * std::numbers::pi * (static_cast<double>(t) - 9.0) / 24.0);
    return a;
}

std::vector<double> default_price(std::size_t hours) {
    std::vector<double> p(hours);
    for (std::size_t t = 0; t < hours; ++t) {
        const std::size_t h = t % 24;
        p[t] = (h >= 14 && h < 20) ? 0.35 : (h >= 7 && h < 22 ? 0.2 : 0.1);
    }
    return p;
}

}  // namespace gridloop::demand
