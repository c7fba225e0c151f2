#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <utility>

#include "gridcascade/partition.hpp"

namespace gridcascade {

/// Voltage phasor state of one subsystem, indexed by subsystem bus position.
struct NetworkState {
  Eigen::VectorXd v;      // pu magnitudes, all > 0
  Eigen::VectorXd delta;  // radians; slack angle fixed to 0
};

struct PowerFlowResiduals {
  Eigen::VectorXd dp;  // pu, scheduled minus injected
  Eigen::VectorXd dq;

  double max_abs() const;
};

/// Scheduled net injections per bus position, pu.
struct ScheduledInjections {
  Eigen::VectorXd p;
  Eigen::VectorXd q;
};

class PowerFlowError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Net complex power injected at every bus, S_i = V_i * conj(sum_j Y_ij V_j).
Eigen::VectorXcd complex_injections(const NetworkState& state,
                                    const AdmittanceMatrix& y);

/// (p, q) injected at one bus position via the polar power-flow sums.
std::pair<double, double> injected_power(const NetworkState& state,
                                         const AdmittanceMatrix& y,
                                         int bus_pos);

/// Partials of all bus injections w.r.t. voltage magnitudes and angles.
struct InjectionJacobian {
  Eigen::MatrixXd dp_dv, dp_dd, dq_dv, dq_dd;
};
InjectionJacobian injection_jacobian(const NetworkState& state,
                                     const AdmittanceMatrix& y);

/// Sending-end flow of one subcase line from the pi model.
struct LineFlow {
  double p = 0.0, q = 0.0, s = 0.0;  // pu
};
LineFlow line_flow(const NetworkState& state, const Subcase& sub, int line_index);

/// Flow plus its partials w.r.t. the endpoint voltages and angles; the "f"
/// suffix refers to the sending end.
struct LineFlowDerivs {
  LineFlow flow;
  int sending_pos = -1, other_pos = -1;  // subcase bus positions
  double dp_dvf = 0, dp_dvt = 0, dp_ddf = 0, dp_ddt = 0;
  double dq_dvf = 0, dq_dvt = 0, dq_ddf = 0, dq_ddt = 0;
};
LineFlowDerivs line_flow_derivs(const NetworkState& state, const Subcase& sub,
                                int line_index);

/// Same with a chosen sending end: from_bus when `from_end`, else to_bus.
LineFlowDerivs line_flow_derivs_oriented(const NetworkState& state,
                                         const Subcase& sub, int line_index,
                                         bool from_end);

/// Base-case scheduled injections: DG units at the midpoint of their limits,
/// buildings drawing their full firm-plus-controllable load net of the PV
/// forecast with the storage idle, exchange buses at zero, plain buses at
/// minus demand.
ScheduledInjections base_case_injections(const Subcase& sub);

/// Newton-Raphson solve of the base case from a flat start. The slack bus
/// holds 1.0 pu / 0 rad and absorbs the imbalance. Converges to a max
/// mismatch of 1e-8 pu or throws PowerFlowError with the final mismatch.
NetworkState solve_base_powerflow(const Subcase& sub);

PowerFlowResiduals residuals(const NetworkState& state, const Subcase& sub,
                             const ScheduledInjections& scheduled);

}  // namespace gridcascade
