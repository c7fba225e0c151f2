#pragma once

// Shared machinery for assembling the network-layer optimization problems:
// voltage-state variables, per-bus injection balances with variable
// contributions, line-flow limits, and a linear + quadratic objective.
// Internal to the library.

#include <memory>
#include <utility>
#include <vector>

#include "gridcascade/nlp.hpp"
#include "gridcascade/power_flow.hpp"
#include "gridcascade/subproblems.hpp"

namespace gridcascade::detail {

struct NetworkProblemData {
  Subcase sub;
  int n_vars = 0;
  int v_start = 0, d_start = 0;

  // Per-bus scheduled injection: constant part (pu) plus variable
  // contributions (index, pu-per-unit coefficient).
  Eigen::VectorXd sched_p_const, sched_q_const;
  std::vector<std::vector<std::pair<int, double>>> p_contrib, q_contrib;

  int fixed_delta_pos = -1;  // adds an equality row delta(pos) = 0

  /// Additional affine equality rows, sum(coeff * x) + constant = 0.
  struct LinearRow {
    std::vector<std::pair<int, double>> terms;
    double constant = 0.0;
  };
  std::vector<LinearRow> extra_eq;

  std::vector<double> smax_pu2;  // per subcase line

  std::vector<std::pair<int, double>> linear;  // coeff * x
  struct Quad {
    int idx;
    double coeff;
    double center;
  };
  std::vector<Quad> quads;  // coeff * (x - center)^2

  /// coeff * (p^2 + q^2) of a line flow, measured at the chosen end.
  struct FlowQuad {
    int line_index;
    double coeff;
    bool from_end = true;
  };
  std::vector<FlowQuad> flow_quads;

  int n_eq() const {
    return 2 * static_cast<int>(sub.buses.size()) +
           (fixed_delta_pos >= 0 ? 1 : 0) + static_cast<int>(extra_eq.size());
  }
  int n_ineq() const { return static_cast<int>(sub.lines.size()); }

  NetworkState state_of(const Eigen::VectorXd& x) const {
    NetworkState st;
    const int n = static_cast<int>(sub.buses.size());
    st.v = x.segment(v_start, n);
    st.delta = x.segment(d_start, n);
    return st;
  }
};

/// Fills spec.objective / equality / inequality from the assembled data.
void wire_network_problem(ProblemSpec& spec,
                          std::shared_ptr<const NetworkProblemData> data);

/// Variable blocks shared by the network-layer problems: voltages, angles,
/// optional grid exchange, DG dispatch, building exchanges, MG exchange.
struct LayoutBundle {
  VariableLayout lay;
  std::vector<std::string> names;
  Eigen::VectorXd lower, upper, x0;
};

/// with_grid: add (p_grid, q_grid) at the slack (distribution problems).
/// Exchange variables come from sub.exchange_buses for the distribution
/// subcase or the subcase's own mg_id for a microgrid subcase.
LayoutBundle make_network_layout(const Subcase& sub, bool with_grid);

}  // namespace gridcascade::detail
