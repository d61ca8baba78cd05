#pragma once

// Seconds-timescale frequency loop: two-area swing/governor/turbine
// dynamics with a tie line, PI control on the smoothed area control error,
// dynamic watermarking of the control command, sensor attacks, and the
// watermark detector.

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gridloop/rng.hpp"

namespace gridloop::agc {

using AreaPair = std::array<double, 2>;

struct AreaParams {
    double inertia = 10.0;       // M, pu.s
    double damping = 1.0;        // D, pu
    double droop = 0.05;         // R, pu
    double governor_tc = 0.2;    // s
    double turbine_tc = 0.5;     // s
};

struct AreaState {
    double freq_dev = 0.0;    // pu
    double mech_power = 0.0;  // pu
    double valve = 0.0;       // pu
};

struct AgcParams {
    std::array<AreaParams, 2> areas{};
    double tie_stiffness = 2.0;   // T, pu/rad
    AreaPair bias{21.0, 21.0};    // B, pu (frequency bias)
    double smoothing_tc = 2.0;    // s, first-order SACE filter
    double kp = 0.1;
    double ki = 0.05;
    double dt = 0.02;             // s
    bool agc_enabled = true;

    std::vector<std::string> problems() const;
};

/// Plant and controller state of the two-area system. Owned by a single
/// caller and advanced step by step.
struct AgcSystem {
    AgcParams params;
    std::array<AreaState, 2> areas{};
    double tie_flow = 0.0;    // pu, area 1 -> area 2
    AreaPair setpoint{};      // P_set applied to the governors
    AreaPair sace{};          // smoothed ACE
    AreaPair ace_integral{};  // integral of SACE
};

/// One explicit-Euler step of swing, governor, turbine and tie-line
/// equations. `load` is each area's current load deviation (pu).
AgcSystem step_dynamics(const AgcSystem& sys, const AreaPair& load, double dt);

struct Measurements {
    AreaPair freq{};
    double tie_flow = 0.0;
};

struct WatermarkKey {
    std::uint64_t seed = 0;
    double variance = 1e-4;  // pu^2
};

/// Watermark samples e[k] for both areas, reproducible from the key.
class WatermarkStream {
public:
    explicit WatermarkStream(const WatermarkKey& key);
    AreaPair next();
    const WatermarkKey& key() const noexcept { return key_; }

private:
    WatermarkKey key_;
    CounterRng rng_;
    double stddev_;
};

struct ControlStep {
    AgcSystem next;      // controller state advanced, setpoint replaced
    AreaPair command{};  // PI output without watermark
    AreaPair watermark{};
    AreaPair ace{};
    AreaPair sace{};
};

/// ACE_i = dP_tie,i + B_i * dw_i, SACE low-passes ACE, and the setpoint is
/// P_set = -(kp * SACE + ki * integral(SACE)) + e[k]. With AGC disabled the
/// command stays zero and only the watermark is applied.
ControlStep agc_control_step(const AgcSystem& sys, const Measurements& measured, WatermarkStream& wm);

enum class AttackKind { none, bias, scale, replay, noise };
enum class AttackTarget { freq, tie_flow, both };

struct SensorAttack {
    AttackKind kind = AttackKind::none;
    double magnitude = 0.0;  // bias: pu; scale: factor; replay: lag in s; noise: variance
    AttackTarget target = AttackTarget::both;
    double start_time = 0.0;
    double end_time = 0.0;

    bool active(double t) const noexcept { return kind != AttackKind::none && t >= start_time && t < end_time; }
    std::vector<std::string> problems() const;
};

/// Genuine sensor samples at a fixed period, used as replay material.
class MeasurementHistory {
public:
    explicit MeasurementHistory(double dt, double max_span_s = 600.0);
    void push(double t, const Measurements& m);
    bool covers(double t) const noexcept;
    const Measurements& at(double t) const;

private:
    double dt_;
    std::size_t capacity_;
    double first_time_ = 0.0;
    std::deque<Measurements> samples_;
};

Measurements apply_sensor_attack(const Measurements& m, const SensorAttack& attack, double t,
                                 const MeasurementHistory& history, CounterRng& noise_rng);

struct DetectionStatistic {
    std::size_t window = 0;
    double correlation_stat = 0.0;
    double variance_stat = 0.0;
    double threshold_corr = 0.0;
    double threshold_var = 0.0;
    bool alarm = false;
};

/// Thresholds produced by the Monte-Carlo calibration (see
/// tools/calibrate_watermark and tests/fixtures/watermark_thresholds.txt).
struct DetectorThresholds {
    double corr = 0.2513;  // alarm when the correlation statistic falls below
    double var = 1.0284;   // alarm when the variance ratio rises above
};

struct NoiseParams {
    double load_stddev = 3e-4;      // per-step load fluctuation, pu
    double freq_meas_stddev = 1e-5;  // pu
    double tie_meas_stddev = 1e-4;   // pu
};

struct DetectorConfig {
    std::size_t window = 500;      // samples
    std::size_t eval_every = 250;  // samples between evaluations
    DetectorThresholds thresholds{};
    double disturbance_stddev = 1e-3;  // random-walk load model inside the observer
};

/// Streaming detector. A steady-state Kalman predictor on the nominal
/// model (augmented with random-walk load disturbances) produces
/// innovations nu_k; the watermark propagated through the same error
/// dynamics gives zeta_k. Over the trailing window:
///   correlation_stat = sum nu' S^-1 zeta / sum zeta' S^-1 zeta   (about 1)
///   variance_stat    = mean (nu - zeta)' S^-1 (nu - zeta) / 3      (about 1)
/// where S is the nominal innovation covariance without the watermark.
class WatermarkDetector {
public:
    WatermarkDetector(const AgcParams& params, double watermark_variance, const NoiseParams& noise,
                      const DetectorConfig& config);

    /// Feeds one sample. Returns a statistic when an evaluation is due.
    std::optional<DetectionStatistic> update(const Measurements& y, const AreaPair& command,
                                             const AreaPair& watermark);

    /// Statistic over the most recent `window` samples (all if fewer).
    DetectionStatistic evaluate(std::size_t window) const;
    std::size_t samples() const noexcept { return count_; }
    const DetectorConfig& config() const noexcept { return config_; }
    const Eigen::MatrixXd& kalman_gain() const noexcept { return gain_; }

private:
    DetectorConfig config_;
    Eigen::MatrixXd a_, bu_, c_, gain_, s_inv_;
    Eigen::VectorXd xhat_, z_;
    struct Sample {
        double cross, energy, residual;
    };
    std::deque<Sample> buffer_;
    std::size_t count_ = 0;
};

/// Batch form: replays recorded measurements, commands and watermark
/// samples through a fresh detector and evaluates the last `window`
/// samples. Requires window >= 50 and a positive watermark variance.
DetectionStatistic watermark_detect(const AgcParams& params, double watermark_variance,
                                    std::span<const AreaPair> watermark,
                                    std::span<const Measurements> measurements,
                                    std::span<const AreaPair> commands, std::size_t window,
                                    const NoiseParams& noise = {}, const DetectorConfig& config = {});

inline constexpr std::size_t kMinDetectionWindow = 50;

struct LoadStep {
    double time = 0.0;
    int area = 0;        // 0 or 1
    double delta = 0.0;  // pu, added to the area's load
};

/// Closed loop of plant, sensors, attacks, controller and detector, advanced
/// one control period at a time.
class AgcLoop {
public:
    struct Config {
        AgcParams params{};
        WatermarkKey key{};
        NoiseParams noise{};
        DetectorConfig detector{};
        std::vector<LoadStep> load_steps;
        std::vector<SensorAttack> attacks;
        std::uint64_t noise_seed = 0;
        bool watermark_enabled = true;
        double history_span_s = 600.0;
    };

    struct Record {
        double time = 0.0;
        AreaPair freq{};
        double tie_flow = 0.0;
        AreaPair ace{}, sace{}, setpoint{};
        Measurements measured{};
        std::optional<DetectionStatistic> detection;
    };

    explicit AgcLoop(Config config);

    /// Runs the control period starting at `time()`, then advances the
    /// plant by dt.
    Record step();
    double time() const noexcept { return static_cast<double>(step_count_) * config_.params.dt; }
    const AgcSystem& system() const noexcept { return sys_; }
    const WatermarkDetector* detector() const noexcept { return detector_ ? &*detector_ : nullptr; }
    void add_load_step(const LoadStep& s) { config_.load_steps.push_back(s); }

private:
    Config config_;
    AgcSystem sys_;
    WatermarkStream watermark_;
    CounterRng noise_rng_, attack_rng_;
    MeasurementHistory history_;
    std::optional<WatermarkDetector> detector_;
    AreaPair load_{};
    std::uint64_t step_count_ = 0;
};

/// Monte-Carlo trial used to calibrate and score the detector: a quiet
/// system, a load step at `step_time`, and an optional attack. Each trial
/// reports the most alarming statistics over every evaluation in the run.
struct TrialSpec {
    AgcLoop::Config base{};
    double horizon_s = 60.0;
    double step_time = 30.0;
    int step_area = 0;
    double step_pu = 0.02;
};

struct TrialExtremes {
    double min_corr = 0.0;
    double max_var = 0.0;
    bool alarmed(const DetectorThresholds& t) const noexcept { return min_corr < t.corr || max_var > t.var; }
};

TrialExtremes run_detection_trial(const TrialSpec& spec, std::uint64_t seed,
                                  const SensorAttack& attack = SensorAttack{});

/// Thresholds at the `tail` empirical quantiles of no-attack trials over
/// seeds [seed_begin, seed_begin + count): corr at the lower `tail`
/// quantile of min_corr, var at the upper one of max_var.
DetectorThresholds calibrate_thresholds(const TrialSpec& spec, std::uint64_t seed_begin, std::size_t count,
                                        double tail = 0.005);

const char* to_string(AttackKind k) noexcept;
AttackKind attack_kind_from(const std::string& s);
AttackTarget attack_target_from(const std::string& s);

}  // namespace gridloop::agc
