#include "gridloop/storage.hpp"

#include <algorithm>
#include <cmath>

namespace gridloop::storage {

std::vector<std::string> BesConfig::problems() const {
    std::vector<std::string> out;
    if (!(efficiency > 0.0 && efficiency <= 1.0)) out.push_back("bes: efficiency must be in (0, 1]");
    if (!(soc_min < soc_max)) out.push_back("bes: soc_min must be below soc_max");
    if (!(power_rating > 0.0)) out.push_back("bes: power_rating must be positive");
    if (!(capacity_max >= 0.0)) out.push_back("bes: capacity_max must be non-negative");
    if (!(interval_h > 0.0)) out.push_back("bes: interval must be positive");
    if (!(aging_coeff >= 0.0)) out.push_back("bes: aging_coeff must be non-negative");
    if (!(soc_initial >= soc_min && soc_initial <= soc_max)) out.push_back("bes: soc_initial outside [soc_min, soc_max]");
    return out;
}

std::vector<std::string> RegulationMarket::problems() const {
    std::vector<std::string> out;
    if (!(performance_floor >= 0.0 && performance_floor <= 1.0))
        out.push_back("market: performance_floor must be in [0, 1]");
    if (signal.empty()) out.push_back("market: empty regulation signal");
    for (std::size_t k = 0; k < signal.size(); ++k)
        if (!(signal[k] >= -1.0 && signal[k] <= 1.0)) {
            out.push_back("market: r[" + std::to_string(k) + "] outside [-1, 1]");
            break;
        }
    return out;
}

namespace {

double soc_formula(double e_prev, double b, const BesConfig& cfg) {
    const double charge = std::max(b, 0.0);
    const double discharge = std::max(-b, 0.0);
    return e_prev + cfg.interval_h * cfg.efficiency * charge - cfg.interval_h * discharge / cfg.efficiency;
}

}  // namespace

double soc_step(double e_prev, double b, const BesConfig& cfg) {
    if (std::abs(b) > cfg.power_rating) throw InvalidArgument("soc_step: |b| exceeds the power rating");
    const double e = soc_formula(e_prev, b, cfg);
    if (e < cfg.soc_min) throw SocBoundError(SocBound::below_min, "soc_step: state of charge below minimum");
    if (e > cfg.soc_max) throw SocBoundError(SocBound::above_max, "soc_step: state of charge above maximum");
    return e;
}

double performance_score(double capacity, std::span<const double> b, std::span<const double> r) {
    if (b.size() != r.size()) throw InvalidArgument("performance_score: sequence lengths differ");
    if (capacity < 0.0) throw InvalidArgument("performance_score: negative capacity");
    const bool idle = std::all_of(b.begin(), b.end(), [](double x) { return x == 0.0; });
    double signal = 0.0;
    for (double x : r) signal += std::abs(x);
    if (capacity == 0.0 || signal == 0.0) return idle ? 1.0 : 0.0;
    double err = 0.0;
    for (std::size_t k = 0; k < b.size(); ++k) err += std::abs(b[k] - capacity * r[k]);
    return std::clamp(1.0 - err / (capacity * signal), 0.0, 1.0);
}

double aging_cost(std::span<const double> b, const BesConfig& cfg) {
    double throughput = 0.0;
    for (double x : b) throughput += std::abs(x);
    return cfg.aging_coeff * cfg.interval_h * throughput;
}

ScenarioOutcome simulate_policy(double capacity, const RegulationMarket& market, const BesConfig& cfg) {
    ScenarioOutcome out;
    out.dispatch.reserve(market.signal.size());
    out.soc.reserve(market.signal.size());
    double e = cfg.soc_initial;
    for (double r : market.signal) {
        double b = std::clamp(capacity * r, -cfg.power_rating, cfg.power_rating);
        if (b > 0.0) b = std::min(b, (cfg.soc_max - e) / (cfg.interval_h * cfg.efficiency));
        if (b < 0.0) b = std::max(b, -(e - cfg.soc_min) * cfg.efficiency / cfg.interval_h);
        // Rounding in the headroom division can overshoot the band by an ulp.
        while (soc_formula(e, b, cfg) > cfg.soc_max) b = std::nextafter(b, 0.0);
        while (soc_formula(e, b, cfg) < cfg.soc_min) b = std::nextafter(b, 0.0);
        e = soc_step(e, b, cfg);
        out.dispatch.push_back(b);
        out.soc.push_back(e);
    }
    out.score = performance_score(capacity, out.dispatch, market.signal);
    out.revenue = market.price * capacity * out.score - aging_cost(out.dispatch, cfg);
    out.meets_floor = out.score >= market.performance_floor;
    return out;
}

namespace {

struct Evaluation {
    double capacity = 0.0;
    std::vector<ScenarioOutcome> outcomes;
    double revenue = 0.0;
    std::size_t meeting = 0;
};

class Search {
public:
    Search(const BesConfig& cfg, std::span<const RegulationMarket> markets, std::size_t required)
        : cfg_(cfg), markets_(markets), required_(required) {
        double price = 0.0;
        for (const auto& m : markets) price = std::max(price, std::abs(m.price));
        tie_ = 1e-9 * (1.0 + price);
    }

    Evaluation evaluate(double c) const {
        Evaluation ev;
        ev.capacity = c;
        for (const auto& m : markets_) {
            ev.outcomes.push_back(simulate_policy(c, m, cfg_));
            ev.revenue += ev.outcomes.back().revenue;
            ev.meeting += ev.outcomes.back().meets_floor;
        }
        ev.revenue /= static_cast<double>(markets_.size());
        return ev;
    }

    bool feasible(double c) const { return evaluate(c).meeting >= required_; }
    // Revenue with a slight preference for smaller capacity.
    double objective(double c) const { return evaluate(c).revenue - tie_ * c; }

private:
    const BesConfig& cfg_;
    std::span<const RegulationMarket> markets_;
    std::size_t required_;
    double tie_;
};

}  // namespace

BesPlan optimize_bes_plan(const BesConfig& cfg, std::span<const RegulationMarket> markets, double epsilon) {
    std::vector<std::string> problems = cfg.problems();
    if (markets.empty()) problems.push_back("bes: at least one market scenario required");
    for (const auto& m : markets)
        for (auto& p : m.problems()) problems.push_back(std::move(p));
    if (!(epsilon >= 0.0 && epsilon < 1.0)) problems.push_back("bes: epsilon must be in [0, 1)");
    if (!problems.empty()) throw ConfigError(problems);

    const std::size_t n = markets.size();
    const auto required = static_cast<std::size_t>(std::ceil((1.0 - epsilon) * static_cast<double>(n) - 1e-9));
    Search search(cfg, markets, required);

    constexpr int kScan = 200;
    const double cmax = cfg.capacity_max;
    const double h = cmax / kScan;

    // Feasible range [0, hi]: first infeasible scan point, then bisection.
    double hi = cmax;
    bool any_positive = false;
    for (int i = 1; i <= kScan; ++i) {
        const double c = i == kScan ? cmax : h * i;
        if (search.feasible(c)) {
            any_positive = true;
            continue;
        }
        double lo = h * (i - 1), up = c;
        for (int it = 0; it < 60 && up - lo > 1e-12 * (1.0 + cmax); ++it) {
            const double mid = 0.5 * (lo + up);
            (search.feasible(mid) ? lo : up) = mid;
        }
        hi = lo;
        any_positive = any_positive || lo > 0.0;
        break;
    }

    double best_c = 0.0;
    if (any_positive && hi > 0.0) {
        // Coarse scan to bracket, golden-section to refine.
        const double step = hi / kScan;
        int best_i = 0;
        double best_f = search.objective(0.0);
        for (int i = 1; i <= kScan; ++i) {
            const double f = search.objective(i == kScan ? hi : step * i);
            if (f > best_f) {
                best_f = f;
                best_i = i;
            }
        }
        double a = std::max(0.0, step * (best_i - 1)), b = std::min(hi, step * (best_i + 1));
        const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
        double x1 = b - invphi * (b - a), x2 = a + invphi * (b - a);
        double f1 = search.objective(x1), f2 = search.objective(x2);
        while (b - a > 1e-9 * (1.0 + hi)) {
            if (f1 >= f2) {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - invphi * (b - a);
                f1 = search.objective(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + invphi * (b - a);
                f2 = search.objective(x2);
            }
        }
        best_c = best_i == kScan ? hi : step * best_i;
        for (double c : {0.5 * (a + b), hi, 0.0}) {
            const double f = search.objective(c);
            const double incumbent = search.objective(best_c);
            if (f > incumbent || (f == incumbent && c < best_c)) best_c = c;
        }
        if (!search.feasible(best_c)) best_c = 0.0;
    }

    Evaluation ev = search.evaluate(best_c);
    BesPlan plan;
    plan.capacity = best_c;
    plan.scenarios = std::move(ev.outcomes);
    plan.revenue = ev.revenue;
    plan.scenarios_meeting_floor = ev.meeting;
    plan.required_scenarios = required;
    plan.floor_unmet = !any_positive;
    return plan;
}

}  // namespace gridloop::storage
