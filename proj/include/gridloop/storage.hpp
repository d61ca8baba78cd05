#pragma once

// Battery participation in a pay-for-performance regulation market:
// state-of-charge dynamics, tracking score, aging cost and the
// capacity/dispatch search over signal scenarios.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "gridloop/error.hpp"

namespace gridloop::storage {

struct BesConfig {
    double capacity_max = 1.0;  // MW offered at most
    double power_rating = 1.0;  // MW
    double soc_min = 0.0;       // MWh
    double soc_max = 1.0;       // MWh
    double soc_initial = 0.5;   // MWh
    double efficiency = 1.0;    // round-trip split: gamma on charge, 1/gamma on discharge
    double interval_h = 1.0;    // h per signal sample
    double aging_coeff = 0.0;   // $/MWh throughput

    std::vector<std::string> problems() const;
};

struct RegulationMarket {
    double price = 0.0;              // $/MW for the horizon
    double performance_floor = 0.0;  // in [0, 1]
    std::vector<double> signal;      // r[k] in [-1, 1]

    std::vector<std::string> problems() const;
};

enum class SocBound { below_min, above_max };

/// State update left the [soc_min, soc_max] band.
class SocBoundError : public NumericError {
public:
    SocBoundError(SocBound which, const std::string& what) : NumericError(what), which_(which) {}
    SocBound which() const noexcept { return which_; }

private:
    SocBound which_;
};

/// e = e_prev + dK*gamma*max(b,0) - dK*max(-b,0)/gamma. Charging is b > 0.
double soc_step(double e_prev, double b, const BesConfig& cfg);

/// 1 - sum|b - C r| / (C sum|r|), clamped to [0, 1]. C = 0 or r = 0
/// scores 1 when b is all zero and 0 otherwise.
double performance_score(double capacity, std::span<const double> b, std::span<const double> r);

/// aging_coeff * dK * sum|b|.
double aging_cost(std::span<const double> b, const BesConfig& cfg);

struct ScenarioOutcome {
    std::vector<double> dispatch;  // MW
    std::vector<double> soc;       // MWh after each interval
    double score = 0.0;
    double revenue = 0.0;          // price * C * score - aging
    bool meets_floor = false;
};

/// Clipped tracking: b[k] = C r[k] limited by the power rating and by the
/// energy that keeps the next SOC inside its band.
ScenarioOutcome simulate_policy(double capacity, const RegulationMarket& market, const BesConfig& cfg);

struct BesPlan {
    double capacity = 0.0;
    std::vector<ScenarioOutcome> scenarios;
    double revenue = 0.0;  // mean over scenarios
    std::size_t scenarios_meeting_floor = 0;
    std::size_t required_scenarios = 0;
    bool floor_unmet = false;  // no C > 0 satisfies the floor; plan is C = 0
};

/// Chooses C in [0, capacity_max] maximizing mean revenue subject to the
/// floor holding on at least ceil((1 - epsilon) N) scenarios. The feasible
/// range is bracketed by a scan and bisection, the optimum by a scan and
/// golden-section search; ties go to the smaller capacity.
BesPlan optimize_bes_plan(const BesConfig& cfg, std::span<const RegulationMarket> markets, double epsilon);

}  // namespace gridloop::storage
