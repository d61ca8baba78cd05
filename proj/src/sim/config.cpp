#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "gridloop/sim.hpp"

namespace gridloop::sim {

namespace pt = boost::property_tree;

namespace {

using Problems = std::vector<std::string>;

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::optional<double> to_double(const std::string& s) {
    double v = 0.0;
    const auto* end = s.data() + s.size();
    const auto r = std::from_chars(s.data(), end, v);
    if (r.ec != std::errc() || r.ptr != end || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::optional<std::int64_t> to_int(const std::string& s) {
    std::int64_t v = 0;
    const auto* end = s.data() + s.size();
    const auto r = std::from_chars(s.data(), end, v);
    if (r.ec != std::errc() || r.ptr != end) return std::nullopt;
    return v;
}

std::optional<bool> to_bool(const std::string& s) {
    if (s == "true" || s == "yes" || s == "1") return true;
    if (s == "false" || s == "no" || s == "0") return false;
    return std::nullopt;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',' || c == ' ' || c == '\t') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

/// key = value access with typed parsing; records every failure and, on
/// finish(), every key that was never asked for.
class Fields {
public:
    Fields(std::string where, std::map<std::string, std::string> kv, Problems& out)
        : where_(std::move(where)), kv_(std::move(kv)), out_(out) {}

    bool has(const std::string& k) const { return kv_.count(k) > 0; }

    std::optional<std::string> str(const std::string& k) {
        used_.insert(k);
        auto it = kv_.find(k);
        if (it == kv_.end()) return std::nullopt;
        return it->second;
    }

    std::string str(const std::string& k, const std::string& def) { return str(k).value_or(def); }

    std::optional<double> num(const std::string& k) {
        auto s = str(k);
        if (!s) return std::nullopt;
        auto v = to_double(*s);
        if (!v) out_.push_back(where_ + ": " + k + " = '" + *s + "' is not a number");
        return v;
    }

    double num(const std::string& k, double def) { return num(k).value_or(def); }

    double required(const std::string& k) {
        if (!has(k)) {
            out_.push_back(where_ + ": missing " + k);
            used_.insert(k);
            return 0.0;
        }
        return num(k, 0.0);
    }

    std::int64_t integer(const std::string& k, std::int64_t def) {
        auto s = str(k);
        if (!s) return def;
        auto v = to_int(*s);
        if (!v) {
            out_.push_back(where_ + ": " + k + " = '" + *s + "' is not an integer");
            return def;
        }
        return *v;
    }

    std::size_t count(const std::string& k, std::size_t def) {
        const auto v = integer(k, static_cast<std::int64_t>(def));
        if (v < 0) {
            out_.push_back(where_ + ": " + k + " must be non-negative");
            return def;
        }
        return static_cast<std::size_t>(v);
    }

    bool boolean(const std::string& k, bool def) {
        auto s = str(k);
        if (!s) return def;
        auto v = to_bool(*s);
        if (!v) out_.push_back(where_ + ": " + k + " = '" + *s + "' is not a boolean");
        return v.value_or(def);
    }

    std::vector<double> list(const std::string& k) {
        std::vector<double> out;
        auto s = str(k);
        if (!s) return out;
        for (const auto& item : split_list(*s)) {
            auto v = to_double(item);
            if (!v) out_.push_back(where_ + ": " + k + " has non-numeric entry '" + item + "'");
            else out.push_back(*v);
        }
        return out;
    }

    /// Keys starting with `prefix` followed by an identifier, in order.
    std::vector<std::pair<std::string, std::string>> prefixed(const std::string& prefix) {
        std::vector<std::pair<std::string, std::string>> out;
        for (const auto& [k, v] : kv_) {
            if (k.size() > prefix.size() && k.compare(0, prefix.size(), prefix) == 0) {
                used_.insert(k);
                out.emplace_back(k, v);
            }
        }
        return out;
    }

    void finish() {
        for (const auto& [k, v] : kv_)
            if (!used_.count(k)) out_.push_back(where_ + ": unknown key '" + k + "'");
    }

    const std::string& where() const { return where_; }

private:
    std::string where_;
    std::map<std::string, std::string> kv_;
    std::set<std::string> used_;
    Problems& out_;
};

/// "a=1 b=2" into a map; malformed tokens are reported.
std::map<std::string, std::string> parse_row(const std::string& where, const std::string& text, Problems& out) {
    std::map<std::string, std::string> kv;
    for (const auto& tok : split_list(text)) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos || eq == 0) {
            out.push_back(where + ": expected key=value, got '" + tok + "'");
            continue;
        }
        if (!kv.emplace(tok.substr(0, eq), tok.substr(eq + 1)).second)
            out.push_back(where + ": repeated field '" + tok.substr(0, eq) + "'");
    }
    return kv;
}

std::map<std::string, std::string> section_map(const pt::ptree& sec) {
    std::map<std::string, std::string> kv;
    for (const auto& [k, v] : sec) kv[k] = trim(v.data());
    return kv;
}

std::optional<int> entity_id(const std::string& key, const std::string& prefix, const std::string& where,
                             Problems& out) {
    auto v = to_int(key.substr(prefix.size()));
    if (!v) {
        out.push_back(where + ": '" + key + "' must be " + prefix + "<integer id>");
        return std::nullopt;
    }
    return static_cast<int>(*v);
}

grid::Network parse_network(const std::string& where, Fields& f, grid::Topology default_topology, Problems& out) {
    grid::Topology topo = default_topology;
    const auto t = f.str("topology", default_topology == grid::Topology::radial_distribution ? "radial_distribution"
                                                                                              : "meshed_transmission");
    if (t == "radial_distribution") topo = grid::Topology::radial_distribution;
    else if (t == "meshed_transmission") topo = grid::Topology::meshed_transmission;
    else out.push_back(where + ": unknown topology '" + t + "'");
    const double base = f.num("base_mva", 100.0);

    std::vector<grid::Bus> buses;
    for (const auto& [key, val] : f.prefixed("bus")) {
        const auto id = entity_id(key, "bus", where, out);
        if (!id) continue;
        Fields row(where + " " + key, parse_row(where + " " + key, val, out), out);
        grid::Bus b;
        b.id = *id;
        const auto kind = row.str("kind", "pq");
        if (kind == "slack") b.kind = grid::BusKind::slack;
        else if (kind == "pv") b.kind = grid::BusKind::pv;
        else if (kind != "pq") out.push_back(row.where() + ": unknown bus kind '" + kind + "'");
        b.load_share = row.num("share", 0.0);
        b.p_inject = row.num("p_inject", 0.0);
        b.q_inject = row.num("q_inject", 0.0);
        row.finish();
        buses.push_back(b);
    }
    std::vector<grid::Line> lines;
    for (const auto& [key, val] : f.prefixed("line")) {
        Fields row(where + " " + key, parse_row(where + " " + key, val, out), out);
        grid::Line l;
        l.from = static_cast<int>(row.integer("from", 0));
        l.to = static_cast<int>(row.integer("to", 0));
        l.susceptance = row.num("susceptance", 0.0);
        l.r = row.num("r", 0.0);
        l.x = row.num("x", 0.0);
        if (auto v = row.num("flow_limit")) l.flow_limit = *v;
        if (auto v = row.num("current_limit")) l.current_limit = *v;
        row.finish();
        lines.push_back(l);
    }
    grid::Network net(std::move(buses), std::move(lines), topo, base);
    for (const auto& p : net.problems()) out.push_back(where + ": " + p);
    return net;
}

dispatch::Generator parse_generator(const std::string& where, int id, const std::string& val, Problems& out) {
    Fields row(where, parse_row(where, val, out), out);
    dispatch::Generator g;
    g.id = id;
    g.bus = static_cast<int>(row.integer("bus", 0));
    g.p_min = row.num("p_min", 0.0);
    g.p_max = row.required("p_max");
    g.startup_cost = row.num("startup", 0.0);
    if (auto segs = row.str("segments")) {
        // width:cost;width:cost, the last width ignored
        std::stringstream ss(*segs);
        std::string item;
        while (std::getline(ss, item, ';')) {
            const auto colon = item.find(':');
            auto w = colon == std::string::npos ? std::nullopt : to_double(item.substr(0, colon));
            auto c = colon == std::string::npos ? std::nullopt : to_double(item.substr(colon + 1));
            if (!w || !c) out.push_back(where + ": bad segment '" + item + "'");
            else g.segments.push_back({*w, *c});
        }
    } else {
        g.segments.push_back({0.0, row.required("cost")});
    }
    row.finish();
    for (const auto& p : g.problems()) out.push_back(where + ": " + p);
    return g;
}

agc::AttackTarget target_from(const std::string& s, const std::string& where, Problems& out) {
    try {
        return agc::attack_target_from(s);
    } catch (const Error& e) {
        out.push_back(where + ": " + e.what());
        return agc::AttackTarget::both;
    }
}

void parse_agc(Fields& f, ScenarioConfig& cfg) {
    AgcSpec s;
    auto& p = s.params;
    p.dt = f.num("period_s", p.dt);
    for (int a = 0; a < 2; ++a) {
        const std::string sfx = a == 0 ? "_a1" : "_a2";
        auto& ar = p.areas[a];
        ar.inertia = f.num("inertia" + sfx, ar.inertia);
        ar.damping = f.num("damping" + sfx, ar.damping);
        ar.droop = f.num("droop" + sfx, ar.droop);
        ar.governor_tc = f.num("governor_tc" + sfx, ar.governor_tc);
        ar.turbine_tc = f.num("turbine_tc" + sfx, ar.turbine_tc);
        p.bias[a] = f.num("bias" + sfx, p.bias[a]);
    }
    p.tie_stiffness = f.num("tie_stiffness", p.tie_stiffness);
    p.smoothing_tc = f.num("smoothing_tc", p.smoothing_tc);
    p.kp = f.num("kp", p.kp);
    p.ki = f.num("ki", p.ki);
    p.agc_enabled = f.boolean("agc_enabled", true);
    s.watermark = f.boolean("watermark", true);
    s.watermark_variance = f.num("watermark_variance", s.watermark_variance);
    s.noise.load_stddev = f.num("load_noise", s.noise.load_stddev);
    s.noise.freq_meas_stddev = f.num("freq_meas_noise", s.noise.freq_meas_stddev);
    s.noise.tie_meas_stddev = f.num("tie_meas_noise", s.noise.tie_meas_stddev);
    s.detector.window = f.count("detector_window", s.detector.window);
    s.detector.eval_every = f.count("detector_every", s.detector.eval_every);
    s.detector.thresholds.corr = f.num("threshold_corr", s.detector.thresholds.corr);
    s.detector.thresholds.var = f.num("threshold_var", s.detector.thresholds.var);
    s.trace_every = f.count("trace_every", s.trace_every);
    cfg.agc = s;
}

void parse_bes(Fields& f, ScenarioConfig& cfg) {
    BesSpec s;
    auto& c = s.cfg;
    c.capacity_max = f.num("capacity_max", c.capacity_max);
    c.power_rating = f.num("power_rating", c.power_rating);
    c.soc_min = f.num("soc_min", c.soc_min);
    c.soc_max = f.num("soc_max", c.soc_max);
    c.soc_initial = f.num("soc_initial", c.soc_initial);
    c.efficiency = f.num("efficiency", c.efficiency);
    c.interval_h = f.num("interval_h", c.interval_h);
    c.aging_coeff = f.num("aging_coeff", c.aging_coeff);
    s.price = f.num("price", 0.0);
    s.performance_floor = f.num("performance_floor", 0.0);
    s.epsilon = f.num("epsilon", 0.0);
    s.scenarios = f.count("scenarios", s.scenarios);
    s.samples = f.count("samples", s.samples);
    s.signal = f.list("signal");
    cfg.bes = s;
}

void parse_ev(Fields& f, ScenarioConfig& cfg, Problems& out) {
    EvSpec s;
    s.slot_h = f.num("slot_h", 1.0);
    s.base_load_kw = f.list("base_load_kw");
    s.method = f.str("method", s.method);
    for (const auto& [key, val] : f.prefixed("ev")) {
        const std::string where = "[loops.ev] " + key;
        const auto id = entity_id(key, "ev", where, out);
        if (!id) continue;
        Fields row(where, parse_row(where, val, out), out);
        ev::EvSession e;
        e.id = *id;
        e.k_start = row.count("start", 0);
        e.k_end = row.count("end", 0);
        e.rate_max = row.required("rate_max");
        e.battery_capacity = row.required("capacity");
        e.soc_start = row.num("soc_start", 0.0);
        e.soc_end = row.num("soc_end", 1.0);
        e.efficiency = row.num("efficiency", 1.0);
        row.finish();
        s.sessions.push_back(e);
    }
    cfg.ev = s;
}

void parse_evcs(Fields& f, ScenarioConfig& cfg) {
    EvcsSpec s;
    auto& p = s.problem;
    for (double c : f.list("candidates")) p.candidates.push_back(static_cast<int>(c));
    p.fixed_cost = f.list("fixed_cost");
    p.per_spot_cost = f.num("per_spot_cost", 0.0);
    p.spot_power_kw = f.num("spot_power_kw", 0.0);
    p.demand_floor_kw = f.num("demand_floor_kw", 0.0);
    p.budget = f.num("budget", 0.0);
    p.v_min = f.num("v_min", p.v_min);
    p.v_max = f.num("v_max", p.v_max);
    p.spots_max = static_cast<int>(f.integer("spots_max", p.spots_max));
    s.period = f.num("period_s", s.period);
    cfg.evcs = s;
}

void parse_demand(Fields& f, ScenarioConfig& cfg) {
    DemandSpec s;
    s.houses = f.count("houses", s.houses);
    s.hours = f.count("hours", s.hours);
    s.energy_kwh = f.num("energy_kwh");
    s.energy_fraction = f.num("energy_fraction", s.energy_fraction);
    s.dt_h = f.num("dt_h", s.dt_h);
    s.kp = f.num("kp", s.kp);
    s.ki = f.num("ki", s.ki);
    s.ambient = f.list("ambient");
    s.price = f.list("price");
    cfg.demand = s;
}

void parse_microgrid(Fields& f, ScenarioConfig& cfg, Problems& out) {
    MicrogridSpec s;
    s.period = f.num("period_s", s.period);
    auto& st = s.initial;
    const auto mode = f.str("mode", "islanded");
    try {
        st.mode = microgrid::mode_from(mode);
    } catch (const Error& e) {
        out.push_back(std::string("[loops.microgrid]: ") + e.what());
    }
    st.load_p = f.num("load_p", 0.0);
    st.load_q = f.num("load_q", 0.0);
    st.grid_omega = f.num("grid_omega", st.grid_omega);
    st.omega = st.grid_omega;
    s.secondary = f.boolean("secondary", true);
    s.pcc_target = f.num("pcc_target");
    for (const auto& [key, val] : f.prefixed("inv")) {
        const std::string where = "[loops.microgrid] " + key;
        const auto id = entity_id(key, "inv", where, out);
        if (!id) continue;
        Fields row(where, parse_row(where, val, out), out);
        microgrid::DroopInverter d;
        d.id = *id;
        d.mp = row.num("mp", d.mp);
        d.mq = row.num("mq", d.mq);
        d.omega_nom = row.num("omega_nom", d.omega_nom);
        d.v_nom = row.num("v_nom", d.v_nom);
        d.p_set = row.num("p_set", d.p_set);
        d.q_set = row.num("q_set", d.q_set);
        d.p_max = row.num("p_max", d.p_max);
        d.dv_max = row.num("dv_max", d.dv_max);
        row.finish();
        st.inverters.push_back(d);
    }
    if (auto t = f.str("targets")) {
        for (const auto& item : split_list(*t)) {
            const auto colon = item.find(':');
            auto id = colon == std::string::npos ? std::nullopt : to_int(item.substr(0, colon));
            auto v = colon == std::string::npos ? std::nullopt : to_double(item.substr(colon + 1));
            if (!id || !v) out.push_back("[loops.microgrid]: bad voltage target '" + item + "' (want id:pu)");
            else s.targets.push_back({static_cast<int>(*id), *v});
        }
    }
    cfg.microgrid = s;
}

void parse_disturbance(const std::string& where, const std::string& val, ScenarioConfig& cfg, Problems& out) {
    Fields row(where, parse_row(where, val, out), out);
    Disturbance d;
    d.time = row.required("time");
    const auto kind = row.str("kind", "");
    if (kind == "load_step") {
        d.kind = DisturbanceKind::load_step;
        const auto area = row.integer("area", 1);
        if (area != 1 && area != 2) out.push_back(where + ": area must be 1 or 2");
        d.area = static_cast<int>(area) - 1;
        d.delta = row.required("delta");
    } else if (kind == "island") {
        d.kind = DisturbanceKind::island;
    } else if (kind == "reconnect") {
        d.kind = DisturbanceKind::reconnect;
    } else if (kind == "microgrid_load") {
        d.kind = DisturbanceKind::microgrid_load;
        d.p = row.required("p");
        d.q = row.num("q", 0.0);
    } else {
        out.push_back(where + ": unknown disturbance kind '" + kind + "'");
    }
    row.finish();
    cfg.disturbances.push_back(d);
}

void parse_attack(const std::string& where, const std::string& val, ScenarioConfig& cfg, Problems& out) {
    Fields row(where, parse_row(where, val, out), out);
    agc::SensorAttack a;
    try {
        a.kind = agc::attack_kind_from(row.str("kind", ""));
    } catch (const Error& e) {
        out.push_back(where + ": " + e.what());
    }
    a.magnitude = row.num("magnitude", 0.0);
    a.target = target_from(row.str("target", "both"), where, out);
    a.start_time = row.required("start");
    a.end_time = row.required("end");
    row.finish();
    for (const auto& p : a.problems()) out.push_back(where + ": " + p);
    cfg.attacks.push_back(a);
}

}  // namespace

ScenarioConfig parse_scenario(const std::string& text) {
    Problems out;
    pt::ptree tree;
    try {
        std::istringstream in(text);
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError("scenario: line " + std::to_string(e.line()) + ": " + e.message());
    }

    ScenarioConfig cfg;
    std::map<std::string, std::map<std::string, std::string>> sections;
    for (const auto& [name, sec] : tree) {
        if (sec.empty() && !sec.data().empty()) {
            out.push_back("scenario: key '" + name + "' outside any section");
            continue;
        }
        sections[name] = section_map(sec);
    }

    static const std::set<std::string> known{"scenario",   "network",     "feeder",       "generators",
                                             "loops.agc",  "loops.ed",    "loops.uc",     "loops.bes",
                                             "loops.ev",   "loops.evcs",  "loops.demand", "loops.microgrid",
                                             "disturbances", "attacks",   "seeds"};
    for (const auto& [name, kv] : sections)
        if (!known.count(name)) out.push_back("scenario: unknown section [" + name + "]");

    auto fields = [&](const std::string& name) {
        auto it = sections.find(name);
        return Fields("[" + name + "]", it == sections.end() ? std::map<std::string, std::string>{} : it->second,
                      out);
    };

    {
        auto f = fields("scenario");
        cfg.name = f.str("name", cfg.name);
        cfg.horizon = f.required("horizon_s");
        f.finish();
    }
    if (sections.count("network")) {
        auto f = fields("network");
        cfg.network = parse_network("[network]", f, grid::Topology::meshed_transmission, out);
        f.finish();
    }
    if (sections.count("feeder")) {
        auto f = fields("feeder");
        cfg.feeder = parse_network("[feeder]", f, grid::Topology::radial_distribution, out);
        f.finish();
    }
    if (sections.count("generators")) {
        auto f = fields("generators");
        for (const auto& [key, val] : f.prefixed("g")) {
            const std::string where = "[generators] " + key;
            if (auto id = entity_id(key, "g", where, out)) cfg.generators.push_back(parse_generator(where, *id, val, out));
        }
        f.finish();
    }

    auto loop = [&](const std::string& name, auto&& parse) {
        if (!sections.count(name)) return;
        auto f = fields(name);
        if (f.boolean("enabled", true)) parse(f);
        else {
            // Disabled sections still must not carry unknown keys, but their
            // values are not interpreted.
            for (const auto& kv : f.prefixed("")) (void)kv;
        }
        f.finish();
    };
    loop("loops.agc", [&](Fields& f) { parse_agc(f, cfg); });
    loop("loops.ed", [&](Fields& f) {
        DispatchSpec s;
        s.period = f.num("period_s", s.period);
        s.demand_mw = f.list("demand_mw");
        cfg.ed = s;
    });
    loop("loops.uc", [&](Fields& f) {
        CommitmentSpec s;
        s.period = f.num("period_s", s.period);
        s.demand_mw = f.list("demand_mw");
        cfg.uc = s;
    });
    loop("loops.bes", [&](Fields& f) { parse_bes(f, cfg); });
    loop("loops.ev", [&](Fields& f) { parse_ev(f, cfg, out); });
    loop("loops.evcs", [&](Fields& f) { parse_evcs(f, cfg); });
    loop("loops.demand", [&](Fields& f) { parse_demand(f, cfg); });
    loop("loops.microgrid", [&](Fields& f) { parse_microgrid(f, cfg, out); });

    if (sections.count("disturbances")) {
        auto f = fields("disturbances");
        for (const auto& [key, val] : f.prefixed("")) parse_disturbance("[disturbances] " + key, val, cfg, out);
        f.finish();
    }
    if (sections.count("attacks")) {
        auto f = fields("attacks");
        for (const auto& [key, val] : f.prefixed("")) parse_attack("[attacks] " + key, val, cfg, out);
        f.finish();
    }
    if (sections.count("seeds")) {
        auto f = fields("seeds");
        cfg.base_seed = static_cast<std::uint64_t>(f.integer("base", 0));
        for (const char* m : {"agc", "dispatch", "bes", "ev", "evcs", "demand", "microgrid"})
            if (f.has(m)) cfg.seeds[m] = static_cast<std::uint64_t>(f.integer(m, 0));
        f.finish();
    }

    if (out.empty()) {
        auto more = cfg.problems();
        out.insert(out.end(), more.begin(), more.end());
    }
    if (!out.empty()) throw ConfigError(std::move(out));
    return cfg;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read scenario file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str());
}

std::uint64_t ScenarioConfig::seed_for(const std::string& module) const {
    auto it = seeds.find(module);
    return it == seeds.end() ? base_seed : it->second;
}

void ScenarioConfig::override_seeds(std::uint64_t seed) {
    base_seed = seed;
    for (auto& [m, s] : seeds) s = seed;
}

bool ScenarioConfig::keep_only(const std::string& module) {
    const bool is_dispatch = module == "dispatch";
    if (!is_dispatch) ed.reset(), uc.reset();
    if (module != "agc") agc.reset();
    if (module != "bes") bes.reset();
    if (module != "ev") ev.reset();
    if (module != "evcs") evcs.reset();
    if (module != "demand") demand.reset();
    if (module != "microgrid") microgrid.reset();
    if (module != "agc") {
        attacks.clear();
        std::erase_if(disturbances, [](const Disturbance& d) { return d.kind == DisturbanceKind::load_step; });
    }
    if (module != "microgrid")
        std::erase_if(disturbances, [](const Disturbance& d) { return d.kind != DisturbanceKind::load_step; });
    return agc || ed || uc || bes || ev || evcs || demand || microgrid;
}

std::vector<std::string> ScenarioConfig::problems() const {
    Problems out;
    if (!(horizon >= 0.0)) out.push_back("[scenario]: horizon_s must be non-negative");
    if (agc) {
        for (const auto& p : agc->params.problems()) out.push_back("[loops.agc]: " + p);
        if (!(agc->watermark_variance > 0.0)) out.push_back("[loops.agc]: watermark_variance must be positive");
        if (agc->detector.window < agc::kMinDetectionWindow)
            out.push_back("[loops.agc]: detector_window must be at least " + std::to_string(agc::kMinDetectionWindow));
        if (agc->detector.eval_every == 0) out.push_back("[loops.agc]: detector_every must be positive");
        if (agc->trace_every == 0) out.push_back("[loops.agc]: trace_every must be positive");
    }
    for (const auto& d : disturbances) {
        if (d.time < 0.0) out.push_back("[disturbances]: negative time");
        if (d.kind == DisturbanceKind::load_step && !agc)
            out.push_back("[disturbances]: load_step needs [loops.agc]");
        if (d.kind != DisturbanceKind::load_step && !microgrid)
            out.push_back("[disturbances]: microgrid events need [loops.microgrid]");
    }
    if (!attacks.empty() && !agc) out.push_back("[attacks]: attacks need [loops.agc]");
    if (ed || uc) {
        if (!network) out.push_back("[loops.ed]/[loops.uc]: need a [network] section");
        if (generators.empty()) out.push_back("[loops.ed]/[loops.uc]: need [generators]");
        if (network)
            for (const auto& g : generators) {
                bool found = false;
                for (const auto& b : network->buses()) found = found || b.id == g.bus;
                if (!found)
                    out.push_back("[generators] g" + std::to_string(g.id) + ": bus " + std::to_string(g.bus) +
                                  " not in [network]");
            }
    }
    if (ed) {
        if (ed->demand_mw.empty()) out.push_back("[loops.ed]: demand_mw is empty");
        if (!(ed->period > 0.0)) out.push_back("[loops.ed]: period_s must be positive");
    }
    if (uc) {
        if (uc->demand_mw.empty() && !(ed && !ed->demand_mw.empty()))
            out.push_back("[loops.uc]: demand_mw is empty");
        if (uc->demand_mw.size() > 24) out.push_back("[loops.uc]: at most 24 hours");
        if (generators.size() > 10) out.push_back("[loops.uc]: at most 10 units");
        if (!(uc->period > 0.0)) out.push_back("[loops.uc]: period_s must be positive");
    }
    if (bes) {
        for (const auto& p : bes->cfg.problems()) out.push_back("[loops.bes]: " + p);
        if (!(bes->epsilon >= 0.0 && bes->epsilon < 1.0)) out.push_back("[loops.bes]: epsilon must be in [0, 1)");
        if (!(bes->performance_floor >= 0.0 && bes->performance_floor <= 1.0))
            out.push_back("[loops.bes]: performance_floor must be in [0, 1]");
        if (bes->signal.empty() && (bes->scenarios == 0 || bes->samples == 0))
            out.push_back("[loops.bes]: scenarios and samples must be positive");
        for (double r : bes->signal)
            if (r < -1.0 || r > 1.0) {
                out.push_back("[loops.bes]: signal entries must lie in [-1, 1]");
                break;
            }
    }
    if (ev) {
        if (!(ev->slot_h > 0.0)) out.push_back("[loops.ev]: slot_h must be positive");
        if (ev->base_load_kw.empty()) out.push_back("[loops.ev]: base_load_kw is empty");
        if (ev->sessions.empty()) out.push_back("[loops.ev]: no ev<id> sessions");
        if (ev->method != "decentralized" && ev->method != "centralized" && ev->method != "uncoordinated")
            out.push_back("[loops.ev]: method must be decentralized, centralized or uncoordinated");
        for (const auto& s : ev->sessions)
            for (const auto& p : s.problems(ev->base_load_kw.size(), ev->slot_h))
                out.push_back("[loops.ev] ev" + std::to_string(s.id) + ": " + p);
    }
    if (evcs) {
        if (!feeder) out.push_back("[loops.evcs]: needs a [feeder] section");
        else {
            ev::PlacementProblem p = evcs->problem;
            p.net = *feeder;
            for (const auto& q : p.problems()) out.push_back("[loops.evcs]: " + q);
        }
        if (!(evcs->period > 0.0)) out.push_back("[loops.evcs]: period_s must be positive");
    }
    if (demand) {
        if (demand->houses == 0) out.push_back("[loops.demand]: houses must be positive");
        if (demand->hours == 0) out.push_back("[loops.demand]: hours must be positive");
        if (!(demand->dt_h > 0.0 && demand->dt_h <= 0.25)) out.push_back("[loops.demand]: dt_h must be in (0, 0.25]");
        if (!(demand->energy_fraction >= 0.0 && demand->energy_fraction <= 1.0))
            out.push_back("[loops.demand]: energy_fraction must be in [0, 1]");
        if (!demand->ambient.empty() && demand->ambient.size() != demand->hours)
            out.push_back("[loops.demand]: ambient needs one value per hour");
        if (!demand->price.empty() && demand->price.size() != demand->hours)
            out.push_back("[loops.demand]: price needs one value per hour");
    }
    if (microgrid) {
        for (const auto& p : microgrid->initial.problems()) out.push_back("[loops.microgrid]: " + p);
        if (!(microgrid->period > 0.0)) out.push_back("[loops.microgrid]: period_s must be positive");
        for (const auto& t : microgrid->targets) {
            bool found = false;
            for (const auto& inv : microgrid->initial.inverters) found = found || inv.id == t.inverter_id;
            if (!found) out.push_back("[loops.microgrid]: target names unknown inverter " + std::to_string(t.inverter_id));
        }
    }
    return out;
}

}  // namespace gridloop::sim
