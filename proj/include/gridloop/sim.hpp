#pragma once

// Scenario harness: loop registry, multi-rate scheduler, scenario config
// parsing and validation, and the run loop that advances every enabled
// control loop and writes the CSV trace, module CSVs and summary.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gridloop/agc.hpp"
#include "gridloop/demand.hpp"
#include "gridloop/dispatch.hpp"
#include "gridloop/error.hpp"
#include "gridloop/ev.hpp"
#include "gridloop/grid.hpp"
#include "gridloop/microgrid.hpp"
#include "gridloop/storage.hpp"

namespace gridloop::sim {

struct LoopRegistration {
    std::string loop_id;
    double period = 1.0;  // s
    double phase = 0.0;   // s
    bool stub = false;    // registry entry only, never activated
    std::string description;
};

struct Activation {
    std::int64_t time_ns = 0;
    double time = 0.0;  // s
    std::size_t loop = 0;  // index into the registrations
};

/// Every activation of the non-stub registrations in [0, horizon], ordered
/// by time, then period ascending, then loop_id. Times are kept on a
/// nanosecond grid so coincident activations of different loops compare
/// equal.
std::vector<Activation> schedule(const std::vector<LoopRegistration>& regs, double horizon);

/// Incremental form of schedule() for long horizons.
class Scheduler {
public:
    Scheduler(const std::vector<LoopRegistration>& regs, double horizon);
    std::optional<Activation> next();

private:
    struct Cursor {
        std::int64_t period_ns, phase_ns, k, k_max;
        std::size_t loop;
    };
    std::vector<LoopRegistration> regs_;
    std::vector<Cursor> cursors_;
};

/// Registry entries for loops that are named but have no executable behavior.
std::vector<LoopRegistration> stub_loops();

/// Numbers as written to every CSV: 12 significant digits, shortest form,
/// "0" for negative zero.
std::string format_number(double v);

// Scenario configuration ----------------------------------------------------

struct AgcSpec {
    agc::AgcParams params{};
    double watermark_variance = 1e-4;
    bool watermark = true;
    agc::NoiseParams noise{};
    agc::DetectorConfig detector{};
    std::size_t trace_every = 1;  // decimation of the continuous signals
};

struct DispatchSpec {
    double period = dispatch::kEconomicDispatchPeriod;
    std::vector<double> demand_mw;  // hourly, repeats
};

struct CommitmentSpec {
    double period = 86400.0;
    std::vector<double> demand_mw;
};

struct BesSpec {
    storage::BesConfig cfg{};
    double price = 0.0;
    double performance_floor = 0.0;
    double epsilon = 0.0;
    std::size_t scenarios = 5;
    std::size_t samples = 24;
    std::vector<double> signal;  // explicit single scenario when non-empty
};

struct EvSpec {
    double slot_h = 1.0;
    std::vector<double> base_load_kw;
    std::vector<ev::EvSession> sessions;
    std::string method = "decentralized";
};

struct EvcsSpec {
    ev::PlacementProblem problem;
    double period = 365.0 * 86400.0;
};

struct DemandSpec {
    std::size_t houses = 20;
    std::size_t hours = 24;
    std::optional<double> energy_kwh;
    double energy_fraction = 0.5;  // position of E inside the feasible range
    double dt_h = demand::kDynamicsStepH;
    double kp = 0.5, ki = 2.0;
    std::vector<double> ambient, price;  // hourly; defaults when empty
};

struct MicrogridSpec {
    double period = 60.0;
    microgrid::MicrogridState initial;
    bool secondary = true;
    std::vector<microgrid::VoltageTarget> targets;
    std::optional<double> pcc_target;
};

enum class DisturbanceKind { load_step, island, reconnect, microgrid_load };

struct Disturbance {
    double time = 0.0;
    DisturbanceKind kind = DisturbanceKind::load_step;
    int area = 0;  // load_step: 0 or 1
    double delta = 0.0;
    double p = 0.0, q = 0.0;  // microgrid_load: new totals
};

struct ScenarioConfig {
    std::string name = "scenario";
    double horizon = 0.0;  // s
    std::optional<grid::Network> network;
    std::optional<grid::Network> feeder;
    std::vector<dispatch::Generator> generators;

    std::optional<AgcSpec> agc;
    std::optional<DispatchSpec> ed;
    std::optional<CommitmentSpec> uc;
    std::optional<BesSpec> bes;
    std::optional<EvSpec> ev;
    std::optional<EvcsSpec> evcs;
    std::optional<DemandSpec> demand;
    std::optional<MicrogridSpec> microgrid;

    std::vector<Disturbance> disturbances;
    std::vector<agc::SensorAttack> attacks;

    std::uint64_t base_seed = 0;
    std::map<std::string, std::uint64_t> seeds;  // per module, falls back to base_seed

    std::uint64_t seed_for(const std::string& module) const;
    /// Replaces the base seed and every per-module seed.
    void override_seeds(std::uint64_t seed);
    /// Disables every loop except those of `module` (agc, dispatch, bes,
    /// ev, evcs, demand, microgrid). Returns false if none was configured.
    bool keep_only(const std::string& module);
    /// Problems across all sections, empty when the scenario can run.
    std::vector<std::string> problems() const;
};

/// Parses the INI-style scenario text. Every problem found (syntax, unknown
/// sections or keys, bad values, failed validation) is reported together in
/// one ConfigError.
ScenarioConfig parse_scenario(const std::string& text);
ScenarioConfig load_scenario(const std::filesystem::path& path);

// Running -------------------------------------------------------------------

/// A loop raised during a run; carries where and, for infeasibility, the
/// violated constraint.
class LoopFailure : public Error {
public:
    LoopFailure(std::string loop_id, double time, std::string constraint, const std::string& what)
        : Error(what), loop_id_(std::move(loop_id)), time_(time), constraint_(std::move(constraint)) {}
    const std::string& loop_id() const noexcept { return loop_id_; }
    double time() const noexcept { return time_; }
    /// Empty unless the loop reported an infeasible problem.
    const std::string& constraint() const noexcept { return constraint_; }

private:
    std::string loop_id_;
    double time_;
    std::string constraint_;
};

struct RunSummary {
    std::string scenario;
    std::vector<LoopRegistration> registry;
    std::map<std::string, std::size_t> activations;
    std::map<std::string, std::uint64_t> loop_digests;
    std::map<std::string, std::uint64_t> file_digests;
    std::vector<std::pair<std::string, std::string>> results;  // module headline numbers
    std::size_t trace_records = 0;

    std::string to_text() const;
};

/// Registrations for the loops enabled in `cfg` plus the stubs.
std::vector<LoopRegistration> registrations(const ScenarioConfig& cfg);

/// Runs the scenario and writes trace.csv, summary.txt and one CSV per
/// enabled module into `out_dir` (created if needed). Throws LoopFailure.
RunSummary run_scenario(const ScenarioConfig& cfg, const std::filesystem::path& out_dir);

struct BatchItem {
    ScenarioConfig config;
    std::filesystem::path out_dir;
};

struct BatchResult {
    std::optional<RunSummary> summary;
    std::string error;       // non-empty on failure
    std::string constraint;  // binding constraint when the failure was infeasibility
};

/// Runs independent scenarios on up to `jobs` worker threads. Results keep
/// the input order.
std::vector<BatchResult> run_batch(const std::vector<BatchItem>& items, std::size_t jobs);

}  // namespace gridloop::sim
