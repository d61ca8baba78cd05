#include <algorithm>
#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <thread>

#include "gridloop/rng.hpp"
#include "gridloop/sim.hpp"

namespace gridloop::sim {

namespace {

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
    return buf;
}

std::string id_of(const char* prefix, int id) { return prefix + std::to_string(id); }

class Trace {
public:
    explicit Trace(const std::filesystem::path& path) : out_(path, std::ios::binary | std::ios::trunc) {
        if (!out_) throw Error("cannot write " + path.string());
        write("time_s,loop_id,entity_id,signal,value\n");
    }

    void record(double t, const std::string& loop, const std::string& entity, const char* signal, double value) {
        line_.clear();
        line_ += format_number(t);
        line_ += ',';
        line_ += loop;
        line_ += ',';
        line_ += entity;
        line_ += ',';
        line_ += signal;
        line_ += ',';
        line_ += format_number(value);
        line_ += '\n';
        write(line_);
        auto& d = loop_digest_.try_emplace(loop, 0xCBF29CE484222325ULL).first->second;
        d = fnv1a64(line_, d);
        ++records_;
    }

    void close() { out_.close(); }
    std::uint64_t digest() const noexcept { return digest_; }
    std::size_t records() const noexcept { return records_; }
    const std::map<std::string, std::uint64_t>& loop_digests() const noexcept { return loop_digest_; }

private:
    void write(const std::string& s) {
        out_ << s;
        digest_ = fnv1a64(s, digest_);
    }

    std::ofstream out_;
    std::string line_;
    std::uint64_t digest_ = 0xCBF29CE484222325ULL;
    std::size_t records_ = 0;
    std::map<std::string, std::uint64_t> loop_digest_;
};

/// A CSV held in memory until the run ends.
struct Csv {
    std::string name;
    std::string text;

    void row(std::initializer_list<std::string> cells) {
        bool first = true;
        for (const auto& c : cells) {
            if (!first) text += ',';
            text += c;
            first = false;
        }
        text += '\n';
    }
    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) text += ',';
            text += cells[i];
        }
        text += '\n';
    }
};

using Results = std::vector<std::pair<std::string, std::string>>;

class Runner {
public:
    explicit Runner(std::string id) : id_(std::move(id)) {}
    virtual ~Runner() = default;
    const std::string& id() const noexcept { return id_; }
    virtual void activate(double t, std::size_t k, Trace& trace) = 0;
    virtual void finish(std::vector<Csv>& /*files*/, Results& /*results*/) {}

private:
    std::string id_;
};

// Frequency loop --------------------------------------------------------------

class AgcRunner : public Runner {
public:
    explicit AgcRunner(const ScenarioConfig& cfg) : Runner("loop2.agc"), spec_(*cfg.agc), loop_(make(cfg)) {}

    void activate(double t, std::size_t k, Trace& trace) override {
        const auto r = loop_.step();
        if (k % spec_.trace_every == 0) {
            trace.record(t, id(), "agc", "freq_a1", r.freq[0]);
            trace.record(t, id(), "agc", "freq_a2", r.freq[1]);
            trace.record(t, id(), "agc", "ptie", r.tie_flow);
            trace.record(t, id(), "agc", "ace_a1", r.ace[0]);
            trace.record(t, id(), "agc", "sace_a1", r.sace[0]);
            trace.record(t, id(), "agc", "pset_a1", r.setpoint[0]);
        }
        max_freq_ = std::max({max_freq_, std::abs(r.freq[0]), std::abs(r.freq[1])});
        last_freq_ = std::max(std::abs(r.freq[0]), std::abs(r.freq[1]));
        last_tie_ = r.tie_flow;
        if (r.detection) {
            const auto& d = *r.detection;
            trace.record(t, id(), "agc", "wm_corr", d.correlation_stat);
            trace.record(t, id(), "agc", "wm_var", d.variance_stat);
            trace.record(t, id(), "agc", "alarm", d.alarm ? 1.0 : 0.0);
            if (d.alarm) {
                if (alarms_ == 0) first_alarm_ = t;
                ++alarms_;
            }
        }
    }

    void finish(std::vector<Csv>&, Results& res) override {
        res.emplace_back("agc.alarms", std::to_string(alarms_));
        res.emplace_back("agc.first_alarm_s", alarms_ ? format_number(first_alarm_) : "none");
        res.emplace_back("agc.max_abs_freq_dev_pu", format_number(max_freq_));
        res.emplace_back("agc.final_abs_freq_dev_pu", format_number(last_freq_));
        res.emplace_back("agc.final_tie_flow_pu", format_number(last_tie_));
    }

private:
    static agc::AgcLoop::Config make(const ScenarioConfig& cfg) {
        const auto& s = *cfg.agc;
        agc::AgcLoop::Config c;
        c.params = s.params;
        c.key = {cfg.seed_for("agc"), s.watermark_variance};
        c.noise = s.noise;
        c.detector = s.detector;
        c.noise_seed = cfg.seed_for("agc");
        c.watermark_enabled = s.watermark;
        for (const auto& d : cfg.disturbances)
            if (d.kind == DisturbanceKind::load_step) c.load_steps.push_back({d.time, d.area, d.delta});
        c.attacks = cfg.attacks;
        return c;
    }

    AgcSpec spec_;
    agc::AgcLoop loop_;
    std::size_t alarms_ = 0;
    double first_alarm_ = 0.0, max_freq_ = 0.0, last_freq_ = 0.0, last_tie_ = 0.0;
};

// Market loops ----------------------------------------------------------------

struct CommitmentPlan {
    std::optional<dispatch::CommitmentSchedule> schedule;
};

class UcRunner : public Runner {
public:
    UcRunner(const ScenarioConfig& cfg, std::shared_ptr<CommitmentPlan> plan)
        : Runner("loop2.uc"), net_(*cfg.network), gens_(cfg.generators), plan_(std::move(plan)) {
        demand_ = cfg.uc->demand_mw.empty() ? cfg.ed->demand_mw : cfg.uc->demand_mw;
        if (demand_.size() > 24) demand_.resize(24);
        // Day-ahead: the first day's commitment exists before the run starts.
        solve();
    }

    void activate(double t, std::size_t, Trace& trace) override {
        solve();
        const auto& s = *plan_->schedule;
        trace.record(t, id(), "system", "cost", s.total_cost);
        for (std::size_t h = 0; h < s.on.size(); ++h)
            for (std::size_t u = 0; u < gens_.size(); ++u)
                trace.record(t, id(), id_of("g", gens_[u].id), ("on_h" + std::to_string(h)).c_str(),
                             s.on[h][u] ? 1.0 : 0.0);
    }

    void finish(std::vector<Csv>&, Results& res) override {
        res.emplace_back("uc.total_cost", format_number(plan_->schedule->total_cost));
        res.emplace_back("uc.startup_cost", format_number(plan_->schedule->startup_cost));
    }

private:
    void solve() { plan_->schedule = dispatch::unit_commitment(gens_, demand_, net_); }

    grid::Network net_;
    std::vector<dispatch::Generator> gens_;
    std::vector<double> demand_;
    std::shared_ptr<CommitmentPlan> plan_;
};

class EdRunner : public Runner {
public:
    EdRunner(const ScenarioConfig& cfg, std::shared_ptr<CommitmentPlan> plan)
        : Runner("loop2.ed"), net_(*cfg.network), gens_(cfg.generators), demand_(cfg.ed->demand_mw),
          plan_(std::move(plan)) {
        csv_.name = "dispatch.csv";
        csv_.row({"hour", "unit_id", "on", "mw", "lmp_bus", "cost"});
    }

    void activate(double t, std::size_t, Trace& trace) override {
        const auto hour = static_cast<std::size_t>(std::floor(t / 3600.0));
        auto gens = gens_;
        if (plan_ && plan_->schedule && !plan_->schedule->on.empty()) {
            const auto& on = plan_->schedule->on[hour % plan_->schedule->on.size()];
            for (std::size_t u = 0; u < gens.size(); ++u) gens[u].committed = on[u];
        }
        const double d = demand_[hour % demand_.size()];
        const auto r = dispatch::economic_dispatch(gens, d, net_);
        trace.record(t, id(), "system", "demand_mw", d);
        trace.record(t, id(), "system", "cost", r.total_cost);
        for (std::size_t u = 0; u < gens.size(); ++u) {
            trace.record(t, id(), id_of("g", gens[u].id), "mw", r.output[u]);
            const double lmp = r.lmp[net_.index_of(gens[u].bus)];
            csv_.row({format_number(t / 3600.0), std::to_string(gens[u].id), gens[u].committed ? "1" : "0",
                      format_number(r.output[u]), format_number(lmp),
                      format_number(gens[u].committed ? gens[u].energy_cost(r.output[u]) : 0.0)});
        }
        for (std::size_t b = 0; b < net_.size(); ++b)
            trace.record(t, id(), id_of("b", net_.buses()[b].id), "lmp", r.lmp[b]);
        last_cost_ = r.total_cost;
        ++runs_;
    }

    void finish(std::vector<Csv>& files, Results& res) override {
        files.push_back(csv_);
        res.emplace_back("dispatch.runs", std::to_string(runs_));
        res.emplace_back("dispatch.last_cost", format_number(last_cost_));
    }

private:
    grid::Network net_;
    std::vector<dispatch::Generator> gens_;
    std::vector<double> demand_;
    std::shared_ptr<CommitmentPlan> plan_;
    Csv csv_;
    double last_cost_ = 0.0;
    std::size_t runs_ = 0;
};

// Storage ---------------------------------------------------------------------

class BesRunner : public Runner {
public:
    explicit BesRunner(const ScenarioConfig& cfg)
        : Runner("loop9.regulation"), spec_(*cfg.bes), rng_(CounterRng::stream_key(cfg.seed_for("bes"), "storage.signal")) {
        csv_.name = "bes.csv";
        csv_.row({"k", "r", "b", "e"});
    }

    void activate(double t, std::size_t k, Trace& trace) override {
        const std::size_t n = spec_.signal.empty() ? spec_.samples : spec_.signal.size();
        if (k % n == 0) plan();
        const std::size_t i = k % n;
        const auto& sc = plan_.scenarios.front();
        const double r = markets_.front().signal[i];
        trace.record(t, id(), "bes", "r", r);
        trace.record(t, id(), "bes", "b", sc.dispatch[i]);
        trace.record(t, id(), "bes", "e", sc.soc[i]);
        csv_.row({std::to_string(k), format_number(r), format_number(sc.dispatch[i]), format_number(sc.soc[i])});
    }

    void finish(std::vector<Csv>& files, Results& res) override {
        if (plans_ > 0) {
            csv_.row({"summary", format_number(plan_.capacity), format_number(plan_.scenarios.front().score),
                      format_number(plan_.revenue)});
            res.emplace_back("bes.capacity_mw", format_number(plan_.capacity));
            res.emplace_back("bes.revenue", format_number(plan_.revenue));
            res.emplace_back("bes.scenarios_meeting_floor", std::to_string(plan_.scenarios_meeting_floor));
        }
        files.push_back(csv_);
    }

private:
    void plan() {
        markets_.clear();
        if (!spec_.signal.empty()) {
            markets_.push_back({spec_.price, spec_.performance_floor, spec_.signal});
        } else {
            for (std::size_t s = 0; s < spec_.scenarios; ++s) {
                storage::RegulationMarket m{spec_.price, spec_.performance_floor, {}};
                double r = 0.0;
                for (std::size_t i = 0; i < spec_.samples; ++i) {
                    r = std::clamp(0.7 * r + 0.4 * rng_.normal(), -1.0, 1.0);
                    m.signal.push_back(r);
                }
                markets_.push_back(std::move(m));
            }
        }
        plan_ = storage::optimize_bes_plan(spec_.cfg, markets_, spec_.epsilon);
        ++plans_;
    }

    BesSpec spec_;
    CounterRng rng_;
    std::vector<storage::RegulationMarket> markets_;
    storage::BesPlan plan_;
    std::size_t plans_ = 0;
    Csv csv_;
};

// EV loops --------------------------------------------------------------------

class EvRunner : public Runner {
public:
    explicit EvRunner(const ScenarioConfig& cfg) : Runner("ev.charging"), spec_(*cfg.ev) {
        csv_.name = "ev.csv";
        std::vector<std::string> head{"slot", "base_load", "aggregate_load"};
        for (const auto& s : spec_.sessions) head.push_back("rate_ev" + std::to_string(s.id));
        csv_.row(head);
    }

    void activate(double t, std::size_t k, Trace& trace) override {
        if (!profile_) {
            const auto& base = spec_.base_load_kw;
            if (spec_.method == "centralized") profile_ = ev::centralized_schedule(spec_.sessions, base, spec_.slot_h);
            else if (spec_.method == "uncoordinated")
                profile_ = ev::uncoordinated_schedule(spec_.sessions, base.size(), spec_.slot_h);
            else profile_ = ev::decentralized_schedule(spec_.sessions, base, spec_.slot_h);
            aggregate_ = profile_->aggregate(base);
        }
        const std::size_t slot = k % spec_.base_load_kw.size();
        trace.record(t, id(), "feeder", "base_kw", spec_.base_load_kw[slot]);
        trace.record(t, id(), "feeder", "load_kw", aggregate_[slot]);
        std::vector<std::string> row{std::to_string(k), format_number(spec_.base_load_kw[slot]),
                                     format_number(aggregate_[slot])};
        for (std::size_t n = 0; n < spec_.sessions.size(); ++n) {
            trace.record(t, id(), id_of("ev", spec_.sessions[n].id), "rate_kw", profile_->rates[n][slot]);
            row.push_back(format_number(profile_->rates[n][slot]));
        }
        csv_.row(row);
    }

    void finish(std::vector<Csv>& files, Results& res) override {
        files.push_back(csv_);
        if (profile_) {
            res.emplace_back("ev.objective", format_number(ev::valley_objective(*profile_, spec_.base_load_kw)));
            res.emplace_back("ev.load_variance", format_number(ev::load_variance(aggregate_)));
            res.emplace_back("ev.iterations", std::to_string(profile_->iterations));
        }
    }

private:
    EvSpec spec_;
    std::optional<ev::ChargingProfile> profile_;
    std::vector<double> aggregate_;
    Csv csv_;
};

class EvcsRunner : public Runner {
public:
    explicit EvcsRunner(const ScenarioConfig& cfg) : Runner("ev.placement"), prob_(cfg.evcs->problem) {
        prob_.net = *cfg.feeder;
    }

    void activate(double t, std::size_t, Trace& trace) override {
        const auto p = ev::evcs_place(prob_);
        csv_.name = "evcs.csv";
        csv_.text.clear();
        csv_.row({"node", "x", "y", "voltage_sq"});
        for (std::size_t c = 0; c < prob_.candidates.size(); ++c) {
            const int node = prob_.candidates[c];
            const double vsq = p.flow.voltage_sq[prob_.net.index_of(node)];
            const std::string ent = id_of("n", node);
            trace.record(t, id(), ent, "x", p.built[c]);
            trace.record(t, id(), ent, "y", p.spots[c]);
            trace.record(t, id(), ent, "voltage_sq", vsq);
            csv_.row({std::to_string(node), std::to_string(p.built[c]), std::to_string(p.spots[c]),
                      format_number(vsq)});
        }
        trace.record(t, id(), "system", "cost", p.cost);
        csv_.row({"cost", format_number(p.cost), "", ""});
        cost_ = p.cost;
        done_ = true;
    }

    void finish(std::vector<Csv>& files, Results& res) override {
        if (!done_) return;
        files.push_back(csv_);
        res.emplace_back("evcs.cost", format_number(cost_));
    }

private:
    ev::PlacementProblem prob_;
    Csv csv_;
    double cost_ = 0.0;
    bool done_ = false;
};

// Thermal loads ---------------------------------------------------------------

class DemandRunner : public Runner {
public:
    explicit DemandRunner(const ScenarioConfig& cfg) : Runner("loop9.demand"), spec_(*cfg.demand) {
        houses_ = demand::make_fleet(spec_.houses, cfg.seed_for("demand"));
        ambient_ = spec_.ambient.empty() ? demand::default_ambient(spec_.hours) : spec_.ambient;
        price_ = spec_.price.empty() ? demand::default_price(spec_.hours) : spec_.price;
        traced_ = std::min<std::size_t>(houses_.size(), 20);
        csv_.name = "demand.csv";
        std::vector<std::string> head{"t", "p_ref", "p_total", "v"};
        for (std::size_t i = 0; i < traced_; ++i) head.push_back("theta_h" + std::to_string(houses_[i].id));
        csv_.row(head);
    }

    void activate(double t, std::size_t, Trace& trace) override {
        if (!run_ || run_->done()) replan();
        const auto tick = run_->step();
        trace.record(t, id(), "fleet", "p_ref", tick.p_ref);
        trace.record(t, id(), "fleet", "p_total", tick.p_total);
        trace.record(t, id(), "fleet", "v", tick.v);
        const auto th = run_->fleet().temps();
        std::vector<std::string> row{format_number(t / 3600.0), format_number(tick.p_ref), format_number(tick.p_total),
                                     format_number(tick.v)};
        for (std::size_t i = 0; i < traced_; ++i) {
            trace.record(t, id(), id_of("h", houses_[i].id), "theta", th[i]);
            row.push_back(format_number(th[i]));
        }
        csv_.row(row);
    }

    void finish(std::vector<Csv>& files, Results& res) override {
        files.push_back(csv_);
        if (!run_) return;
        const auto m = run_->metrics();
        res.emplace_back("demand.energy_budget_kwh", format_number(plan_.energy_budget));
        res.emplace_back("demand.delivered_kwh", format_number(m.delivered_kwh));
        res.emplace_back("demand.mean_abs_error_kw", format_number(m.mean_abs_error_kw));
        res.emplace_back("demand.fleet_max_kw", format_number(m.fleet_max_kw));
        res.emplace_back("demand.max_comfort_excess_c", format_number(m.max_comfort_excess));
    }

private:
    void replan() {
        const auto houses = run_ ? run_->fleet().houses() : houses_;
        double e = 0.0;
        if (spec_.energy_kwh) e = *spec_.energy_kwh;
        else {
            const auto range = demand::energy_range(houses, ambient_, 1.0, spec_.dt_h);
            e = range.min_kwh + spec_.energy_fraction * (range.max_kwh - range.min_kwh);
        }
        plan_ = demand::lp_relaxed_schedule(houses, price_, ambient_, e, 1.0, spec_.dt_h);
        demand::TrackingController ctrl;
        ctrl.kp = spec_.kp;
        ctrl.ki = spec_.ki;
        run_.emplace(houses, plan_, ambient_, ctrl, spec_.dt_h);
    }

    DemandSpec spec_;
    std::vector<demand::ThermalHouse> houses_;
    std::vector<double> ambient_, price_;
    demand::FleetPlan plan_;
    std::optional<demand::TrackingRun> run_;
    std::size_t traced_ = 0;
    Csv csv_;
};

// Microgrid -------------------------------------------------------------------

class MicrogridRunner : public Runner {
public:
    explicit MicrogridRunner(const ScenarioConfig& cfg)
        : Runner("microgrid.hierarchy"), spec_(*cfg.microgrid), state_(spec_.initial) {
        for (const auto& d : cfg.disturbances)
            if (d.kind != DisturbanceKind::load_step) events_.push_back(d);
        std::stable_sort(events_.begin(), events_.end(),
                         [](const Disturbance& a, const Disturbance& b) { return a.time < b.time; });
        csv_.name = "microgrid.csv";
        std::vector<std::string> head{"step", "mode", "omega", "pcc_flow"};
        for (const auto& inv : state_.inverters) {
            head.push_back("p_inv" + std::to_string(inv.id));
            head.push_back("q_inv" + std::to_string(inv.id));
        }
        csv_.row(head);
    }

    void activate(double t, std::size_t k, Trace& trace) override {
        while (next_ < events_.size() && events_[next_].time <= t) {
            const auto& e = events_[next_++];
            if (e.kind == DisturbanceKind::island) state_.mode = microgrid::Mode::islanded;
            else if (e.kind == DisturbanceKind::reconnect) state_.mode = microgrid::Mode::grid_connected;
            else {
                state_.load_p = e.p;
                state_.load_q = e.q;
            }
        }
        auto s = microgrid::droop_steady_state(state_);
        if (spec_.secondary) s = microgrid::secondary_restore(s, spec_.targets);
        if (s.mode == microgrid::Mode::grid_connected && spec_.pcc_target)
            s = microgrid::tertiary_setpoint(s, *spec_.pcc_target);
        state_ = s;
        trace.record(t, id(), "mg", "islanded", s.mode == microgrid::Mode::islanded ? 1.0 : 0.0);
        trace.record(t, id(), "mg", "omega", s.omega);
        trace.record(t, id(), "mg", "pcc_flow", s.pcc_flow);
        std::vector<std::string> row{std::to_string(k), microgrid::to_string(s.mode), format_number(s.omega),
                                     format_number(s.pcc_flow)};
        for (const auto& inv : s.inverters) {
            const auto ent = id_of("inv", inv.id);
            trace.record(t, id(), ent, "p", inv.p);
            trace.record(t, id(), ent, "q", inv.q);
            trace.record(t, id(), ent, "v", inv.v);
            row.push_back(format_number(inv.p));
            row.push_back(format_number(inv.q));
        }
        csv_.row(row);
        ++steps_;
    }

    void finish(std::vector<Csv>& files, Results& res) override {
        files.push_back(csv_);
        if (!steps_) return;
        res.emplace_back("microgrid.mode", microgrid::to_string(state_.mode));
        res.emplace_back("microgrid.omega_hz", format_number(state_.omega));
        res.emplace_back("microgrid.pcc_flow_pu", format_number(state_.pcc_flow));
    }

private:
    MicrogridSpec spec_;
    microgrid::MicrogridState state_;
    std::vector<Disturbance> events_;
    std::size_t next_ = 0, steps_ = 0;
    Csv csv_;
};

struct Assembly {
    std::vector<LoopRegistration> regs;
    std::vector<std::unique_ptr<Runner>> runners;  // parallel to the non-stub regs
};

Assembly assemble(const ScenarioConfig& cfg, bool build_runners) {
    Assembly a;
    auto add = [&](const std::string& id, double period, const char* what, auto&& make) {
        a.regs.push_back({id, period, 0.0, false, what});
        if (!build_runners) return;
        try {
            a.runners.push_back(make());
        } catch (const InfeasibleError& e) {
            throw LoopFailure(id, 0.0, e.constraint(), id + " setup: " + e.what());
        } catch (const Error& e) {
            throw LoopFailure(id, 0.0, "", id + " setup: " + e.what());
        }
    };
    if (cfg.agc) add("loop2.agc", cfg.agc->params.dt, "AGC with dynamic watermarking", [&] {
        return std::make_unique<AgcRunner>(cfg);
    });
    std::shared_ptr<CommitmentPlan> plan;
    if (cfg.uc) plan = std::make_shared<CommitmentPlan>();
    if (cfg.ed) add("loop2.ed", cfg.ed->period, "real-time economic dispatch", [&] {
        return std::make_unique<EdRunner>(cfg, plan);
    });
    if (cfg.uc) add("loop2.uc", cfg.uc->period, "day-ahead unit commitment", [&] {
        return std::make_unique<UcRunner>(cfg, plan);
    });
    if (cfg.bes) add("loop9.regulation", cfg.bes->cfg.interval_h * 3600.0, "storage in the regulation market", [&] {
        return std::make_unique<BesRunner>(cfg);
    });
    if (cfg.demand) add("loop9.demand", cfg.demand->dt_h * 3600.0, "two-layer thermal load control", [&] {
        return std::make_unique<DemandRunner>(cfg);
    });
    if (cfg.ev) add("ev.charging", cfg.ev->slot_h * 3600.0, "valley-filling EV charging", [&] {
        return std::make_unique<EvRunner>(cfg);
    });
    if (cfg.evcs) add("ev.placement", cfg.evcs->period, "charging-station placement", [&] {
        return std::make_unique<EvcsRunner>(cfg);
    });
    if (cfg.microgrid) add("microgrid.hierarchy", cfg.microgrid->period, "microgrid droop, secondary, tertiary", [&] {
        return std::make_unique<MicrogridRunner>(cfg);
    });
    for (auto& s : stub_loops()) a.regs.push_back(std::move(s));
    return a;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

}  // namespace

std::vector<LoopRegistration> registrations(const ScenarioConfig& cfg) { return assemble(cfg, false).regs; }

RunSummary run_scenario(const ScenarioConfig& cfg, const std::filesystem::path& out_dir) {
    {
        auto p = cfg.problems();
        if (!p.empty()) throw ConfigError(std::move(p));
    }
    Assembly a = assemble(cfg, true);
    std::filesystem::create_directories(out_dir);

    RunSummary sum;
    sum.scenario = cfg.name;
    sum.registry = a.regs;
    for (const auto& r : a.regs)
        if (!r.stub) sum.activations[r.loop_id] = 0;

    Trace trace(out_dir / "trace.csv");
    Scheduler sched(a.regs, cfg.horizon);
    while (auto act = sched.next()) {
        auto& runner = *a.runners[act->loop];
        const std::size_t k = sum.activations[runner.id()]++;
        try {
            runner.activate(act->time, k, trace);
        } catch (const InfeasibleError& e) {
            trace.close();
            throw LoopFailure(runner.id(), act->time, e.constraint(),
                              runner.id() + " at t=" + format_number(act->time) + " s: " + e.what());
        } catch (const Error& e) {
            trace.close();
            throw LoopFailure(runner.id(), act->time, "",
                              runner.id() + " at t=" + format_number(act->time) + " s: " + e.what());
        }
    }
    trace.close();

    std::vector<Csv> files;
    for (auto& r : a.runners) r->finish(files, sum.results);
    sum.file_digests["trace.csv"] = trace.digest();
    for (const auto& f : files) {
        write_file(out_dir / f.name, f.text);
        sum.file_digests[f.name] = fnv1a64(f.text);
    }
    sum.loop_digests = trace.loop_digests();
    sum.trace_records = trace.records();
    write_file(out_dir / "summary.txt", sum.to_text());
    return sum;
}

std::string RunSummary::to_text() const {
    std::ostringstream o;
    o << "scenario = " << scenario << '\n';
    o << "trace_records = " << trace_records << '\n';
    for (const auto& r : registry) {
        const std::string key = "loop." + r.loop_id;
        if (r.stub) {
            o << key << ".stub = " << r.description << '\n';
            continue;
        }
        o << key << ".period_s = " << format_number(r.period) << '\n';
        auto it = activations.find(r.loop_id);
        o << key << ".activations = " << (it == activations.end() ? 0 : it->second) << '\n';
        auto d = loop_digests.find(r.loop_id);
        o << key << ".digest = " << (d == loop_digests.end() ? std::string("none") : hex64(d->second)) << '\n';
    }
    for (const auto& [name, d] : file_digests) o << "file." << name << ".digest = " << hex64(d) << '\n';
    for (const auto& [k, v] : results) o << "result." << k << " = " << v << '\n';
    return o.str();
}

std::vector<BatchResult> run_batch(const std::vector<BatchItem>& items, std::size_t jobs) {
    std::vector<BatchResult> results(items.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < items.size(); i = next++) {
            try {
                results[i].summary = run_scenario(items[i].config, items[i].out_dir);
            } catch (const LoopFailure& e) {
                results[i].error = e.what();
                results[i].constraint = e.constraint();
            } catch (const std::exception& e) {
                results[i].error = e.what();
            }
        }
    };
    const std::size_t n = std::max<std::size_t>(1, std::min(jobs, items.size()));
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
    return results;
}

}  // namespace gridloop::sim
