#pragma once

// Quasi-steady-state hierarchical control of a droop-based AC microgrid:
// primary droop sharing, centralized secondary restoration of frequency and
// critical-node voltages, and tertiary control of the PCC exchange.

#include <span>
#include <string>
#include <vector>

namespace gridloop::microgrid {

struct DroopInverter {
    int id = 0;
    double mp = 0.5;          // Hz per pu of real power
    double mq = 0.05;         // pu voltage per pu of reactive power
    double omega_nom = 60.0;  // Hz
    double v_nom = 1.0;       // pu
    double p_set = 0.0;       // pu
    double q_set = 0.0;       // pu
    double d_omega = 0.0;     // secondary frequency offset, Hz
    double d_v = 0.0;         // secondary voltage offset, pu
    double p_max = 1.0;       // pu, capacity
    double dv_max = 0.1;      // pu, secondary voltage offset limit

    // Steady-state outputs.
    double p = 0.0;
    double q = 0.0;
    double v = 1.0;

    std::vector<std::string> problems() const;
};

enum class Mode { islanded, grid_connected };

struct MicrogridState {
    std::vector<DroopInverter> inverters;
    double load_p = 0.0;  // pu
    double load_q = 0.0;  // pu
    Mode mode = Mode::islanded;
    double grid_omega = 60.0;  // Hz, imposed by the host grid when connected
    double pcc_flow = 0.0;     // pu imported from the host grid
    double omega = 60.0;       // Hz, common steady-state frequency

    /// Validation: droop gains positive, one nominal frequency shared by
    /// every inverter, unique ids.
    std::vector<std::string> problems() const;
};

/// Solves omega = omega* + d_omega_i - mp_i (P_i - P*_i) for every inverter.
/// Islanded: jointly with sum P_i = P_L, so deviations are shared inversely
/// to mp. Grid-connected: omega is the grid frequency and the PCC supplies
/// P_L - sum P_i. Reactive load is shared inversely to mq and each terminal
/// voltage follows V_i = V*_i + d_v_i - mq_i (Q_i - Q*_i).
/// Throws InfeasibleError("capacity") when an islanded load exceeds the sum
/// of inverter capacities.
MicrogridState droop_steady_state(const MicrogridState& state);

struct VoltageTarget {
    int inverter_id = 0;
    double v = 1.0;  // pu
};

struct SecondaryConfig {
    double gain = 0.5;  // integral gain per iteration
    double tol = 1e-9;
    int max_iters = 500;
};

/// Integral update of the secondary offsets until omega returns to nominal
/// (islanded only; one uniform frequency offset for all inverters) and each
/// targeted terminal voltage reaches its target. Throws
/// InfeasibleError("voltage limit") if a target needs |d_v| > dv_max.
MicrogridState secondary_restore(const MicrogridState& state, std::span<const VoltageTarget> targets,
                                 const SecondaryConfig& cfg = {});

/// Grid-connected only. Shifts P* in proportion to inverter capacity so the
/// recomputed PCC import equals `pcc_target`. Throws
/// InfeasibleError("capability") when the required generation lies outside
/// [0, sum p_max] or an inverter would leave [0, p_max].
MicrogridState tertiary_setpoint(const MicrogridState& state, double pcc_target);

/// Opens the PCC and returns the islanded steady state.
MicrogridState island(const MicrogridState& state);

const char* to_string(Mode m) noexcept;
Mode mode_from(const std::string& s);

}  // namespace gridloop::microgrid
