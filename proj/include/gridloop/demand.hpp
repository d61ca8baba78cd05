#pragma once

// Thermal inertial load control. Layer 1 solves the LP relaxation of the
// fleet on/off scheduling problem for a power reference; layer 2 tracks
// that reference by broadcasting a setpoint shift to thermostat-controlled
// air conditioners.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace gridloop::demand {

struct ThermalHouse {
    int id = 0;
    double alpha = 0.3;          // 1/h, ambient coupling
    double beta = 2.0;           // degC/kWh
    double comfort_low = 21.0;   // degC
    double comfort_high = 25.0;  // degC
    double temp = 23.0;          // degC
    double setpoint = 23.0;      // degC
    double deadband = 0.5;       // degC
    double ac_power = 3.0;       // kW
    double efficiency = 1.0;
    bool on = false;

    /// Cooling rate with the AC on, degC/h.
    double cooling() const noexcept { return beta * efficiency * ac_power; }
    std::vector<std::string> problems() const;
};

inline constexpr double kDynamicsStepH = 0.05;

/// theta + dt * (alpha * (ambient - theta) - beta * eta * P * on).
/// Requires dt <= 0.1 / alpha.
double thermal_step(const ThermalHouse& h, double ambient, bool on, double dt);

struct FleetPlan {
    std::vector<std::vector<double>> u;  // [house][slot] in [0, 1]
    std::vector<double> p_ref;           // kW per slot
    std::vector<std::vector<double>> temp;  // [house][slot boundary], slots + 1 entries
    double energy_budget = 0.0;          // kWh
    double cost = 0.0;                   // $
    double slot_h = 1.0;
};

/// Minimizes sum_t sum_n P_n * price[t] * u_n[t] * slot_h with the thermal
/// dynamics integrated by explicit Euler substeps of `dt` inside each slot
/// (u constant per slot), comfort bands at every slot boundary and
/// sum P u slot_h = E. Costs carry a 1e-9 relative tilt toward earlier
/// slots so equal prices resolve to the earliest slots.
FleetPlan lp_relaxed_schedule(std::span<const ThermalHouse> houses, std::span<const double> price,
                              std::span<const double> ambient, double energy_kwh, double slot_h = 1.0,
                              double dt = kDynamicsStepH);

struct EnergyRange {
    double min_kwh = 0.0;
    double max_kwh = 0.0;
};

/// Smallest and largest fleet energy compatible with comfort.
EnergyRange energy_range(std::span<const ThermalHouse> houses, std::span<const double> ambient,
                         double slot_h = 1.0, double dt = kDynamicsStepH);

/// Coefficients of one slot: theta_next = decay * theta + drive * ambient - input * u.
struct SlotMap {
    double decay = 1.0, drive = 0.0, input = 0.0;
};
SlotMap slot_map(const ThermalHouse& h, double slot_h, double dt);

/// Structure-of-arrays fleet state stepped with the SIMD thermal kernel.
class Fleet {
public:
    explicit Fleet(std::span<const ThermalHouse> houses);

    std::size_t size() const noexcept { return theta_.size(); }
    double power() const noexcept;      // kW drawn now
    double max_power() const noexcept;  // kW with every AC on
    std::vector<ThermalHouse> houses() const;
    std::span<const double> temps() const noexcept { return theta_; }
    std::span<const double> setpoints() const noexcept { return setpoint_; }

    /// s_n = clamp(base_n - v, low_n, high_n).
    void apply_shift(double v);
    /// Replaces the per-house base setpoints the shift applies to.
    void set_base(std::span<const double> base);
    /// Hysteresis with one-step look-ahead: switch on when the free-running
    /// next temperature would pass s + deadband, off when the cooled next
    /// temperature would pass s - deadband.
    void thermostat(double ambient, double dt);
    void advance(double ambient, double dt);

private:
    std::vector<int> id_;
    std::vector<double> alpha_, gain_, theta_, on_, setpoint_, base_, low_, high_, deadband_, power_;
};

struct TrackingController {
    double kp = 0.5;  // degC per unit of normalized error
    double ki = 2.0;  // degC per unit of normalized error-hour
    double integral = 0.0;
    double v = 0.0;
};

/// v = kp * e + ki * integral(e), e = (p_ref - p_measured) / fleet max
/// power; setpoints shift by -v and thermostats decide on/off.
double tracking_step(Fleet& fleet, double p_ref, double p_measured, TrackingController& ctrl, double ambient,
                     double dt);

struct TrackingTrace {
    std::vector<double> time_h, p_ref, p_total, v;
    std::vector<std::vector<double>> temps;  // [tick][house]
    double delivered_kwh = 0.0;
    double mean_abs_error_kw = 0.0;
    double max_comfort_excess = 0.0;  // degC beyond [low - deadband, high + deadband]
    double fleet_max_kw = 0.0;
};

/// Layer 2 advanced one tick at a time; simulate_tracking drives it over
/// the whole plan.
class TrackingRun {
public:
    struct Tick {
        double time_h = 0.0;  // start of the tick
        double p_ref = 0.0, p_total = 0.0, v = 0.0;
    };

    TrackingRun(std::span<const ThermalHouse> houses, const FleetPlan& plan, std::span<const double> ambient,
                TrackingController ctrl = {}, double dt = kDynamicsStepH);

    bool done() const noexcept { return tick_ >= total_; }
    std::size_t ticks() const noexcept { return total_; }
    Tick step();
    const Fleet& fleet() const noexcept { return fleet_; }
    /// Metrics over the ticks run so far (temps left empty).
    TrackingTrace metrics() const;

private:
    std::vector<ThermalHouse> houses_;
    FleetPlan plan_;
    std::vector<double> ambient_, base_;
    TrackingController ctrl_;
    double dt_;
    Fleet fleet_;
    std::size_t per_slot_, total_, tick_ = 0;
    double delivered_ = 0.0, abs_err_ = 0.0, excess_ = 0.0;
};

/// Runs layer 2 over the plan's horizon at step dt with the ambient held
/// per slot. Each house's base setpoint follows its planned temperature
/// (linear within a slot); the broadcast shift corrects the residual.
TrackingTrace simulate_tracking(std::span<const ThermalHouse> houses, const FleetPlan& plan,
                                std::span<const double> ambient, TrackingController ctrl = {},
                                double dt = kDynamicsStepH);

/// Heterogeneous demo fleet drawn from `seed`.
std::vector<ThermalHouse> make_fleet(std::size_t n, std::uint64_t seed);
/// Hourly ambient (sinusoid peaking mid-afternoon) and time-of-use price.
std::vector<double> default_ambient(std::size_t hours = 24);
std::vector<double> default_price(std::size_t hours = 24);

}  // namespace gridloop::demand
