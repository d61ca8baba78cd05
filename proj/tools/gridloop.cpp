// Command-line entry point: full scenarios and single-module problems.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "gridloop/sim.hpp"

namespace {

namespace sim = gridloop::sim;

constexpr int kOk = 0, kInfeasible = 1, kConfig = 2;

struct Options {
    std::vector<std::string> scenarios;
    std::string out = "out";
    std::optional<std::uint64_t> seed;
    bool quiet = false;
    std::size_t jobs = 1;
};

void add_common(CLI::App* cmd, Options& o, bool many) {
    if (many) cmd->add_option("--scenario", o.scenarios, "scenario config file(s)")->required();
    else cmd->add_option("--scenario", o.scenarios, "scenario config file")->required()->expected(1);
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--seed", o.seed, "override every module seed");
    cmd->add_flag("--quiet", o.quiet, "print nothing on success");
}

void headline(const std::string& module, const sim::RunSummary& s) {
    auto get = [&](const std::string& k) -> std::string {
        for (const auto& [key, v] : s.results)
            if (key == k) return v;
        return "n/a";
    };
    if (module == "dispatch") std::printf("cost %s $\n", get("dispatch.last_cost").c_str());
    else if (module == "agc")
        std::printf("alarms %s (first at %s s), final |freq dev| %s pu\n", get("agc.alarms").c_str(),
                    get("agc.first_alarm_s").c_str(), get("agc.final_abs_freq_dev_pu").c_str());
    else if (module == "bes")
        std::printf("capacity %s MW, revenue %s $\n", get("bes.capacity_mw").c_str(), get("bes.revenue").c_str());
    else if (module == "ev")
        std::printf("valley objective %s, load variance %s\n", get("ev.objective").c_str(),
                    get("ev.load_variance").c_str());
    else if (module == "evcs") std::printf("cost %s $\n", get("evcs.cost").c_str());
    else if (module == "demand")
        std::printf("delivered %s of %s kWh, mean tracking error %s kW\n", get("demand.delivered_kwh").c_str(),
                    get("demand.energy_budget_kwh").c_str(), get("demand.mean_abs_error_kw").c_str());
    else if (module == "microgrid")
        std::printf("%s, omega %s Hz, PCC %s pu\n", get("microgrid.mode").c_str(), get("microgrid.omega_hz").c_str(),
                    get("microgrid.pcc_flow_pu").c_str());
}

int run(const std::string& module, const Options& o) {
    std::vector<sim::BatchItem> items;
    bool bad = false;
    for (const auto& path : o.scenarios) {
        try {
            auto cfg = sim::load_scenario(path);
            if (o.seed) cfg.override_seeds(*o.seed);
            if (module != "run" && !cfg.keep_only(module)) {
                std::fprintf(stderr, "%s: scenario has no [loops.*] section for %s\n", path.c_str(), module.c_str());
                bad = true;
                continue;
            }
            items.push_back({std::move(cfg), {}});
        } catch (const gridloop::ConfigError& e) {
            for (const auto& p : e.problems()) std::fprintf(stderr, "%s: %s\n", path.c_str(), p.c_str());
            bad = true;
        }
    }
    if (bad) return kConfig;
    for (auto& it : items)
        it.out_dir = items.size() == 1 ? std::filesystem::path(o.out) : std::filesystem::path(o.out) / it.config.name;

    const auto results = sim::run_batch(items, o.jobs);
    int code = kOk;
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        if (!r.error.empty()) {
            std::fprintf(stderr, "%s: %s\n", items[i].config.name.c_str(), r.error.c_str());
            if (!r.constraint.empty()) std::fprintf(stderr, "infeasible: binding constraint %s\n", r.constraint.c_str());
            code = kInfeasible;
            continue;
        }
        if (o.quiet) continue;
        if (module == "run") std::fputs(r.summary->to_text().c_str(), stdout);
        else headline(module, *r.summary);
    }
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gridloop: multi-timescale grid control-loop simulator"};
    app.require_subcommand(1);
    Options o;
    std::vector<std::pair<std::string, CLI::App*>> cmds;
    auto* run_cmd = app.add_subcommand("run", "run a full scenario (several with --jobs)");
    add_common(run_cmd, o, true);
    run_cmd->add_option("--jobs", o.jobs, "parallel scenarios")->check(CLI::PositiveNumber);
    cmds.emplace_back("run", run_cmd);
    for (const char* m : {"dispatch", "agc", "bes", "ev", "evcs", "demand", "microgrid"}) {
        auto* c = app.add_subcommand(m, std::string("run only the ") + m + " loops of a scenario");
        add_common(c, o, false);
        cmds.emplace_back(m, c);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfig;
    }
    for (const auto& [name, cmd] : cmds)
        if (cmd->parsed()) return run(name, o);
    return kConfig;
}
