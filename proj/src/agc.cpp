#include "gridloop/agc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gridloop/error.hpp"

namespace gridloop::agc {

std::vector<std::string> AgcParams::problems() const {
    std::vector<std::string> out;
    for (int i = 0; i < 2; ++i) {
        const AreaParams& a = areas[i];
        const std::string tag = "area " + std::to_string(i + 1) + ": ";
        if (!(a.inertia > 0.0)) out.push_back(tag + "inertia must be positive");
        if (!(a.droop > 0.0)) out.push_back(tag + "droop must be positive");
        if (!(a.damping >= 0.0)) out.push_back(tag + "damping must be non-negative");
        if (!(a.governor_tc > 0.0) || !(a.turbine_tc > 0.0))
            out.push_back(tag + "time constants must be positive");
        if (!(bias[i] > 0.0)) out.push_back(tag + "frequency bias must be positive");
    }
    if (!(dt > 0.0) || dt > 0.1) out.push_back("agc: dt must be in (0, 0.1] s");
    if (!(smoothing_tc > 0.0)) out.push_back("agc: smoothing_tc must be positive");
    if (!(kp >= 0.0) || !(ki >= 0.0)) out.push_back("agc: PI gains must be non-negative");
    if (!(tie_stiffness >= 0.0)) out.push_back("agc: tie_stiffness must be non-negative");
    return out;
}

AgcSystem step_dynamics(const AgcSystem& sys, const AreaPair& load, double dt) {
    if (!(dt > 0.0)) throw InvalidArgument("step_dynamics: dt must be positive");
    AgcSystem next = sys;
    const double tie_sign[2] = {1.0, -1.0};
    for (int i = 0; i < 2; ++i) {
        const AreaParams& p = sys.params.areas[i];
        const AreaState& s = sys.areas[i];
        const double dw = (s.mech_power - load[i] - p.damping * s.freq_dev - tie_sign[i] * sys.tie_flow) / p.inertia;
        const double dv = (sys.setpoint[i] - s.freq_dev / p.droop - s.valve) / p.governor_tc;
        const double dm = (s.valve - s.mech_power) / p.turbine_tc;
        next.areas[i].freq_dev = s.freq_dev + dt * dw;
        next.areas[i].valve = s.valve + dt * dv;
        next.areas[i].mech_power = s.mech_power + dt * dm;
    }
    next.tie_flow = sys.tie_flow + dt * sys.params.tie_stiffness * (sys.areas[0].freq_dev - sys.areas[1].freq_dev);
    return next;
}

WatermarkStream::WatermarkStream(const WatermarkKey& key)
    : key_(key), rng_(CounterRng::stream_key(key.seed, "agc.watermark")),
      stddev_(key.variance > 0.0 ? std::sqrt(key.variance) : 0.0) {}

AreaPair WatermarkStream::next() {
    const double a = rng_.normal();
    const double b = rng_.normal();
    return {stddev_ * a, stddev_ * b};
}

ControlStep agc_control_step(const AgcSystem& sys, const Measurements& measured, WatermarkStream& wm) {
    ControlStep out;
    out.next = sys;
    const AgcParams& p = sys.params;
    const double tie[2] = {measured.tie_flow, -measured.tie_flow};
    const double alpha = p.dt / p.smoothing_tc;
    for (int i = 0; i < 2; ++i) {
        out.ace[i] = tie[i] + p.bias[i] * measured.freq[i];
        out.next.sace[i] = sys.sace[i] + alpha * (out.ace[i] - sys.sace[i]);
        out.next.ace_integral[i] = sys.ace_integral[i] + out.next.sace[i] * p.dt;
        out.sace[i] = out.next.sace[i];
        out.command[i] = p.agc_enabled ? -(p.kp * out.next.sace[i] + p.ki * out.next.ace_integral[i]) : 0.0;
    }
    out.watermark = wm.next();
    for (int i = 0; i < 2; ++i) out.next.setpoint[i] = out.command[i] + out.watermark[i];
    return out;
}

std::vector<std::string> SensorAttack::problems() const {
    std::vector<std::string> out;
    if (kind == AttackKind::none) return out;
    if (!(start_time < end_time)) out.push_back("attack: start_time must precede end_time");
    if (kind == AttackKind::replay && !(magnitude > 0.0)) out.push_back("attack: replay lag must be positive");
    if (kind == AttackKind::noise && !(magnitude >= 0.0)) out.push_back("attack: noise variance must be non-negative");
    return out;
}

MeasurementHistory::MeasurementHistory(double dt, double max_span_s)
    : dt_(dt), capacity_(static_cast<std::size_t>(std::ceil(max_span_s / dt)) + 1) {
    if (!(dt > 0.0)) throw InvalidArgument("MeasurementHistory: dt must be positive");
}

void MeasurementHistory::push(double t, const Measurements& m) {
    if (samples_.empty()) first_time_ = t;
    samples_.push_back(m);
    if (samples_.size() > capacity_) {
        samples_.pop_front();
        first_time_ += dt_;
    }
}

bool MeasurementHistory::covers(double t) const noexcept {
    if (samples_.empty()) return false;
    const double idx = std::round((t - first_time_) / dt_);
    return idx >= 0.0 && idx < static_cast<double>(samples_.size());
}

const Measurements& MeasurementHistory::at(double t) const {
    if (!covers(t)) throw InvalidArgument("measurement history does not cover t=" + std::to_string(t));
    return samples_[static_cast<std::size_t>(std::round((t - first_time_) / dt_))];
}

Measurements apply_sensor_attack(const Measurements& m, const SensorAttack& attack, double t,
                                 const MeasurementHistory& history, CounterRng& noise_rng) {
    if (!attack.active(t)) return m;
    const bool on_freq = attack.target != AttackTarget::tie_flow;
    const bool on_tie = attack.target != AttackTarget::freq;
    Measurements out = m;
    auto corrupt = [&](double& v, double recorded) {
        switch (attack.kind) {
            case AttackKind::none: break;
            case AttackKind::bias: v += attack.magnitude; break;
            case AttackKind::scale: v *= attack.magnitude; break;
            case AttackKind::replay: v = recorded; break;
            case AttackKind::noise: v += std::sqrt(attack.magnitude) * noise_rng.normal(); break;
        }
    };
    Measurements recorded{};
    if (attack.kind == AttackKind::replay) {
        if (!history.covers(t - attack.magnitude))
            throw InvalidArgument("replay attack at t=" + std::to_string(t) + " needs " +
                                  std::to_string(attack.magnitude) + " s of history");
        recorded = history.at(t - attack.magnitude);
    }
    if (on_freq)
        for (int i = 0; i < 2; ++i) corrupt(out.freq[i], recorded.freq[i]);
    if (on_tie) corrupt(out.tie_flow, recorded.tie_flow);
    return out;
}

namespace {

constexpr int kStates = 9;  // w1 w2 v1 v2 m1 m2 ptie d1 d2
constexpr int kW = 0, kV = 2, kM = 4, kPt = 6, kD = 7;

}  // namespace

WatermarkDetector::WatermarkDetector(const AgcParams& params, double watermark_variance,
                                     const NoiseParams& noise, const DetectorConfig& config)
    : config_(config) {
    if (!(watermark_variance > 0.0)) throw InvalidArgument("watermark detector: watermark variance must be positive");
    if (config.window < kMinDetectionWindow)
        throw InvalidArgument("watermark detector: window must be at least " + std::to_string(kMinDetectionWindow) + " samples");
    if (config_.eval_every == 0) config_.eval_every = 1;

    using Eigen::MatrixXd;
    const double dt = params.dt;
    MatrixXd f = MatrixXd::Zero(kStates, kStates);
    bu_ = MatrixXd::Zero(kStates, 2);
    MatrixXd bw = MatrixXd::Zero(kStates, 2);
    const double tie_sign[2] = {1.0, -1.0};
    for (int i = 0; i < 2; ++i) {
        const AreaParams& p = params.areas[i];
        f(kW + i, kW + i) = -p.damping / p.inertia;
        f(kW + i, kM + i) = 1.0 / p.inertia;
        f(kW + i, kPt) = -tie_sign[i] / p.inertia;
        f(kW + i, kD + i) = -1.0 / p.inertia;
        f(kV + i, kV + i) = -1.0 / p.governor_tc;
        f(kV + i, kW + i) = -1.0 / (p.droop * p.governor_tc);
        f(kM + i, kM + i) = -1.0 / p.turbine_tc;
        f(kM + i, kV + i) = 1.0 / p.turbine_tc;
        bu_(kV + i, i) = dt / p.governor_tc;
        bw(kW + i, i) = -dt / p.inertia;
    }
    f(kPt, kW) = params.tie_stiffness;
    f(kPt, kW + 1) = -params.tie_stiffness;
    a_ = MatrixXd::Identity(kStates, kStates) + dt * f;

    c_ = MatrixXd::Zero(3, kStates);
    c_(0, kW) = 1.0;
    c_(1, kW + 1) = 1.0;
    c_(2, kPt) = 1.0;

    MatrixXd q = noise.load_stddev * noise.load_stddev * bw * bw.transpose();
    const double sd2 = config.disturbance_stddev * config.disturbance_stddev;
    q(kD, kD) += sd2;
    q(kD + 1, kD + 1) += sd2;
    MatrixXd r = MatrixXd::Zero(3, 3);
    r(0, 0) = r(1, 1) = noise.freq_meas_stddev * noise.freq_meas_stddev;
    r(2, 2) = noise.tie_meas_stddev * noise.tie_meas_stddev;

    // Steady-state prediction covariance by fixed-point Riccati iteration.
    MatrixXd p = q;
    MatrixXd s;
    for (int it = 0; it < 200000; ++it) {
        s = c_ * p * c_.transpose() + r;
        const MatrixXd k = a_ * p * c_.transpose() * s.inverse();
        MatrixXd next = a_ * p * a_.transpose() + q - k * c_ * p * a_.transpose();
        next = 0.5 * (next + next.transpose());
        const double change = (next - p).cwiseAbs().maxCoeff();
        p = std::move(next);
        if (change <= 1e-13 * p.cwiseAbs().maxCoeff()) break;
    }
    s = c_ * p * c_.transpose() + r;
    gain_ = a_ * p * c_.transpose() * s.inverse();
    s_inv_ = s.inverse();
    xhat_ = Eigen::VectorXd::Zero(kStates);
    z_ = Eigen::VectorXd::Zero(kStates);
}

std::optional<DetectionStatistic> WatermarkDetector::update(const Measurements& y, const AreaPair& command,
                                                            const AreaPair& watermark) {
    const Eigen::Vector3d meas(y.freq[0], y.freq[1], y.tie_flow);
    const Eigen::Vector3d nu = meas - c_ * xhat_;
    const Eigen::Vector3d zeta = c_ * z_;
    const Eigen::Vector3d res = nu - zeta;
    buffer_.push_back(Sample{nu.dot(s_inv_ * zeta), zeta.dot(s_inv_ * zeta), res.dot(s_inv_ * res) / 3.0});
    if (buffer_.size() > config_.window) buffer_.pop_front();
    ++count_;

    const Eigen::Vector2d u(command[0], command[1]);
    const Eigen::Vector2d e(watermark[0], watermark[1]);
    xhat_ = a_ * xhat_ + bu_ * u + gain_ * nu;
    z_ = (a_ - gain_ * c_) * z_ + bu_ * e;

    if (count_ >= config_.window && count_ % config_.eval_every == 0) return evaluate(config_.window);
    return std::nullopt;
}

DetectionStatistic WatermarkDetector::evaluate(std::size_t window) const {
    DetectionStatistic st;
    const std::size_t n = std::min(window, buffer_.size());
    st.window = n;
    st.threshold_corr = config_.thresholds.corr;
    st.threshold_var = config_.thresholds.var;
    double cross = 0.0, energy = 0.0, residual = 0.0;
    for (std::size_t i = buffer_.size() - n; i < buffer_.size(); ++i) {
        cross += buffer_[i].cross;
        energy += buffer_[i].energy;
        residual += buffer_[i].residual;
    }
    st.correlation_stat = energy > 0.0 ? cross / energy : 0.0;
    st.variance_stat = n ? residual / static_cast<double>(n) : 0.0;
    st.alarm = st.correlation_stat < st.threshold_corr || st.variance_stat > st.threshold_var;
    return st;
}

DetectionStatistic watermark_detect(const AgcParams& params, double watermark_variance,
                                    std::span<const AreaPair> watermark,
                                    std::span<const Measurements> measurements,
                                    std::span<const AreaPair> commands, std::size_t window,
                                    const NoiseParams& noise, const DetectorConfig& config) {
    if (window < kMinDetectionWindow)
        throw InvalidArgument("watermark_detect: window must be at least " + std::to_string(kMinDetectionWindow) + " samples");
    if (!(watermark_variance > 0.0)) throw InvalidArgument("watermark_detect: watermark disabled (variance 0)");
    if (watermark.size() != measurements.size() || commands.size() != measurements.size())
        throw InvalidArgument("watermark_detect: history lengths differ");
    if (measurements.size() < window) throw InvalidArgument("watermark_detect: history shorter than window");
    DetectorConfig cfg = config;
    cfg.window = window;
    cfg.eval_every = measurements.size() + 1;
    WatermarkDetector det(params, watermark_variance, noise, cfg);
    for (std::size_t k = 0; k < measurements.size(); ++k) det.update(measurements[k], commands[k], watermark[k]);
    return det.evaluate(window);
}

AgcLoop::AgcLoop(Config config)
    : config_(std::move(config)), watermark_(config_.watermark_enabled ? config_.key : WatermarkKey{config_.key.seed, 0.0}),
      noise_rng_(CounterRng::stream_key(config_.noise_seed, "agc.noise")),
      attack_rng_(CounterRng::stream_key(config_.noise_seed, "agc.attack")),
      history_(config_.params.dt, config_.history_span_s) {
    auto problems = config_.params.problems();
    for (const auto& a : config_.attacks)
        for (auto& p : a.problems()) problems.push_back(std::move(p));
    if (!problems.empty()) throw ConfigError(problems);
    sys_.params = config_.params;
    if (config_.watermark_enabled)
        detector_.emplace(config_.params, config_.key.variance, config_.noise, config_.detector);
}

AgcLoop::Record AgcLoop::step() {
    const double t = time();
    const double dt = config_.params.dt;
    load_ = {0.0, 0.0};
    for (const auto& s : config_.load_steps)
        if (s.time <= t + 1e-9 && (s.area == 0 || s.area == 1)) load_[s.area] += s.delta;

    Measurements y{};
    for (int i = 0; i < 2; ++i)
        y.freq[i] = sys_.areas[i].freq_dev + config_.noise.freq_meas_stddev * noise_rng_.normal();
    y.tie_flow = sys_.tie_flow + config_.noise.tie_meas_stddev * noise_rng_.normal();
    history_.push(t, y);
    for (const auto& a : config_.attacks) y = apply_sensor_attack(y, a, t, history_, attack_rng_);

    const ControlStep ctrl = agc_control_step(sys_, y, watermark_);
    Record rec;
    rec.time = t;
    rec.freq = {sys_.areas[0].freq_dev, sys_.areas[1].freq_dev};
    rec.tie_flow = sys_.tie_flow;
    rec.ace = ctrl.ace;
    rec.sace = ctrl.sace;
    rec.setpoint = ctrl.next.setpoint;
    rec.measured = y;
    if (detector_) rec.detection = detector_->update(y, ctrl.command, ctrl.watermark);

    AreaPair load = load_;
    for (int i = 0; i < 2; ++i) load[i] += config_.noise.load_stddev * noise_rng_.normal();
    sys_ = step_dynamics(ctrl.next, load, dt);
    ++step_count_;
    return rec;
}

TrialExtremes run_detection_trial(const TrialSpec& spec, std::uint64_t seed, const SensorAttack& attack) {
    AgcLoop::Config cfg = spec.base;
    cfg.key.seed = seed;
    cfg.noise_seed = seed;
    cfg.watermark_enabled = true;
    cfg.load_steps.push_back(LoadStep{spec.step_time, spec.step_area, spec.step_pu});
    if (attack.kind != AttackKind::none) cfg.attacks.push_back(attack);
    AgcLoop loop(std::move(cfg));
    TrialExtremes ex{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    const auto steps = static_cast<std::uint64_t>(std::llround(spec.horizon_s / spec.base.params.dt));
    for (std::uint64_t k = 0; k < steps; ++k) {
        const auto rec = loop.step();
        if (!rec.detection) continue;
        ex.min_corr = std::min(ex.min_corr, rec.detection->correlation_stat);
        ex.max_var = std::max(ex.max_var, rec.detection->variance_stat);
    }
    return ex;
}

DetectorThresholds calibrate_thresholds(const TrialSpec& spec, std::uint64_t seed_begin, std::size_t count,
                                        double tail) {
    if (count == 0) throw InvalidArgument("calibrate_thresholds: no trials");
    if (!(tail > 0.0 && tail < 0.5)) throw InvalidArgument("calibrate_thresholds: tail must be in (0, 0.5)");
    std::vector<double> corr, var;
    for (std::size_t i = 0; i < count; ++i) {
        const auto ex = run_detection_trial(spec, seed_begin + i);
        corr.push_back(ex.min_corr);
        var.push_back(ex.max_var);
    }
    std::sort(corr.begin(), corr.end());
    std::sort(var.begin(), var.end());
    // Order statistics: at most floor(tail * count) trials fall beyond each threshold.
    const auto k = static_cast<std::size_t>(std::floor(tail * static_cast<double>(count)));
    return DetectorThresholds{corr[k], var[count - 1 - k]};
}

const char* to_string(AttackKind k) noexcept {
    switch (k) {
        case AttackKind::none: return "none";
        case AttackKind::bias: return "bias";
        case AttackKind::scale: return "scale";
        case AttackKind::replay: return "replay";
        case AttackKind::noise: return "noise";
    }
    return "none";
}

AttackKind attack_kind_from(const std::string& s) {
    for (auto k : {AttackKind::none, AttackKind::bias, AttackKind::scale, AttackKind::replay, AttackKind::noise})
        if (s == to_string(k)) return k;
    throw InvalidArgument("unknown attack kind '" + s + "'");
}

AttackTarget attack_target_from(const std::string& s) {
    if (s == "freq") return AttackTarget::freq;
    if (s == "tie_flow") return AttackTarget::tie_flow;
    if (s == "both") return AttackTarget::both;
    throw InvalidArgument("unknown attack target '" + s + "'");
}

}  // namespace gridloop::agc
