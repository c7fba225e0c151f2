#include "gridcascade/power_flow.hpp"

#include <fmt/core.h>

#include <Eigen/Dense>
#include <cmath>
#include <complex>

#include "gridcascade/log.hpp"

namespace gridcascade {

using Cplx = std::complex<double>;

double PowerFlowResiduals::max_abs() const {
  double m = 0.0;
  if (dp.size()) m = std::max(m, dp.cwiseAbs().maxCoeff());
  if (dq.size()) m = std::max(m, dq.cwiseAbs().maxCoeff());
  return m;
}

Eigen::VectorXcd complex_injections(const NetworkState& state,
                                    const AdmittanceMatrix& y) {
  const int n = y.size();
  Eigen::VectorXcd vc(n);
  for (int i = 0; i < n; ++i) vc(i) = std::polar(state.v(i), state.delta(i));
  const Eigen::VectorXcd current = y.y * vc;
  return vc.cwiseProduct(current.conjugate());
}

std::pair<double, double> injected_power(const NetworkState& state,
                                         const AdmittanceMatrix& y, int bus_pos) {
  // Literal polar sums: sum_j V_i V_j |Y_ij| cos/sin(d_i - d_j - theta_ij).
  const int n = y.size();
  double p = 0.0, q = 0.0;
  const double vi = state.v(bus_pos);
  const double di = state.delta(bus_pos);
  for (int j = 0; j < n; ++j) {
    const Cplx yij = y.y(bus_pos, j);
    if (yij == Cplx(0.0, 0.0)) continue;
    const double mag = std::abs(yij);
    const double theta = std::arg(yij);
    const double ang = di - state.delta(j) - theta;
    p += vi * state.v(j) * mag * std::cos(ang);
    q += vi * state.v(j) * mag * std::sin(ang);
  }
  return {p, q};
}

InjectionJacobian injection_jacobian(const NetworkState& state,
                                     const AdmittanceMatrix& y) {
  const int n = y.size();
  Eigen::VectorXcd vc(n), unit(n);
  for (int i = 0; i < n; ++i) {
    vc(i) = std::polar(state.v(i), state.delta(i));
    unit(i) = std::polar(1.0, state.delta(i));
  }
  const Eigen::VectorXcd ibus = y.y * vc;

  // dS/d(angle) = j diag(V) conj(diag(I) - Y diag(V))
  // dS/d(mag)   = diag(V) conj(Y diag(unit)) + conj(diag(I)) diag(unit)
  Eigen::MatrixXcd ds_dd = Eigen::MatrixXcd::Zero(n, n);
  Eigen::MatrixXcd ds_dv = Eigen::MatrixXcd::Zero(n, n);
  for (int c = 0; c < n; ++c) {
    for (int r = 0; r < n; ++r) {
      Cplx t = -y.y(r, c) * vc(c);
      if (r == c) t += ibus(r);
      ds_dd(r, c) = Cplx(0, 1) * vc(r) * std::conj(t);
      Cplx m = y.y(r, c) * unit(c);
      if (r == c) m = std::conj(ibus(r)) * unit(c) + vc(r) * std::conj(m);
      else m = vc(r) * std::conj(m);
      ds_dv(r, c) = m;
    }
  }
  InjectionJacobian jac;
  jac.dp_dd = ds_dd.real();
  jac.dq_dd = ds_dd.imag();
  jac.dp_dv = ds_dv.real();
  jac.dq_dv = ds_dv.imag();
  return jac;
}

namespace {

struct FlowParts {
  Cplx s;  // sending-end complex power
  Cplx ds_dvf, ds_dvt, ds_ddf, ds_ddt;
};

FlowParts flow_parts(const NetworkState& state, const Line& l, int f, int t) {
  const Cplx ys = series_admittance(l);
  const Cplx ysc = std::conj(ys);
  const double vf = state.v(f);
  const Cplx ef = std::polar(1.0, state.delta(f));
  const Cplx et = std::polar(1.0, state.delta(t));
  const Cplx vff = vf * ef, vtt = state.v(t) * et;
  const double b = l.shunt_susceptance;

  FlowParts out;
  // S = conj(ys) (|Vf|^2 - Vf conj(Vt)) - j b/2 |Vf|^2
  out.s = ysc * (vf * vf - vff * std::conj(vtt)) - Cplx(0, b / 2.0) * vf * vf;
  out.ds_dvf = ysc * (2.0 * vf - ef * std::conj(vtt)) - Cplx(0, b) * vf;
  out.ds_dvt = -ysc * vff * std::conj(et);
  out.ds_ddf = -ysc * Cplx(0, 1) * vff * std::conj(vtt);
  out.ds_ddt = ysc * Cplx(0, 1) * vff * std::conj(vtt);
  return out;
}

LineFlowDerivs derivs_from_parts(const FlowParts& fp, int f, int t) {
  LineFlowDerivs d;
  d.flow = LineFlow{fp.s.real(), fp.s.imag(), std::abs(fp.s)};
  d.sending_pos = f;
  d.other_pos = t;
  d.dp_dvf = fp.ds_dvf.real();
  d.dp_dvt = fp.ds_dvt.real();
  d.dp_ddf = fp.ds_ddf.real();
  d.dp_ddt = fp.ds_ddt.real();
  d.dq_dvf = fp.ds_dvf.imag();
  d.dq_dvt = fp.ds_dvt.imag();
  d.dq_ddf = fp.ds_ddf.imag();
  d.dq_ddt = fp.ds_ddt.imag();
  return d;
}

}  // namespace

LineFlow line_flow(const NetworkState& state, const Subcase& sub, int line_index) {
  const Line& l = sub.lines.at(line_index);
  const Cplx s =
      flow_parts(state, l, sub.pos_of(l.from_bus), sub.pos_of(l.to_bus)).s;
  return LineFlow{s.real(), s.imag(), std::abs(s)};
}

LineFlowDerivs line_flow_derivs(const NetworkState& state, const Subcase& sub,
                                int line_index) {
  return line_flow_derivs_oriented(state, sub, line_index, true);
}

LineFlowDerivs line_flow_derivs_oriented(const NetworkState& state,
                                         const Subcase& sub, int line_index,
                                         bool from_end) {
  const Line& l = sub.lines.at(line_index);
  int f = sub.pos_of(l.from_bus);
  int t = sub.pos_of(l.to_bus);
  if (!from_end) std::swap(f, t);
  return derivs_from_parts(flow_parts(state, l, f, t), f, t);
}

ScheduledInjections base_case_injections(const Subcase& sub) {
  const int n = static_cast<int>(sub.buses.size());
  ScheduledInjections inj;
  inj.p = Eigen::VectorXd::Zero(n);
  inj.q = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    inj.p(i) = -sub.buses[i].p_demand / sub.base_mva;
    inj.q(i) = -sub.buses[i].q_demand / sub.base_mva;
  }
  // Building buses exchange their firm-plus-controllable load net of PV,
  // storage idle; the bus demand is the building.
  for (const SmartBuildingSpec& sb : sub.sbs) {
    const int pos = sub.pos_of(sb.bus);
    inj.p(pos) = -(sb.total_load - sb.pv_forecast) / 1000.0 / sub.base_mva;
    inj.q(pos) = 0.0;
  }
  for (const DgUnit& dg : sub.dgs) {
    const int pos = sub.pos_of(dg.bus);
    inj.p(pos) += 0.5 * (dg.p_min + dg.p_max) / sub.base_mva;
    inj.q(pos) += 0.5 * (dg.q_min + dg.q_max) / sub.base_mva;
  }
  // Exchange buses stay at zero net injection in the base case.
  for (const auto& ex : sub.exchange_buses) {
    inj.p(ex.pos) = 0.0;
    inj.q(ex.pos) = 0.0;
  }
  return inj;
}

NetworkState solve_base_powerflow(const Subcase& sub) {
  const int n = static_cast<int>(sub.buses.size());
  if (sub.slack_pos < 0)
    throw PowerFlowError(fmt::format("subcase '{}' has no slack bus", sub.name));
  const ScheduledInjections sched = base_case_injections(sub);

  NetworkState st;
  st.v = Eigen::VectorXd::Ones(n);
  st.delta = Eigen::VectorXd::Zero(n);

  std::vector<int> pq;
  pq.reserve(n - 1);
  for (int i = 0; i < n; ++i)
    if (i != sub.slack_pos) pq.push_back(i);
  const int m = static_cast<int>(pq.size());
  if (m == 0) return st;

  constexpr double kTol = 1e-8;
  constexpr int kMaxIter = 50;
  double mismatch = 0.0;
  for (int iter = 0; iter < kMaxIter; ++iter) {
    const Eigen::VectorXcd s = complex_injections(st, sub.y);
    Eigen::VectorXd rhs(2 * m);
    for (int k = 0; k < m; ++k) {
      rhs(k) = sched.p(pq[k]) - s(pq[k]).real();
      rhs(m + k) = sched.q(pq[k]) - s(pq[k]).imag();
    }
    mismatch = rhs.cwiseAbs().maxCoeff();
    if (!std::isfinite(mismatch))
      throw PowerFlowError(fmt::format(
          "base power flow diverged on '{}' (non-finite mismatch)", sub.name));
    if (mismatch <= kTol) {
      log_trace("base power flow '{}' converged in {} iterations", sub.name, iter);
      return st;
    }
    const InjectionJacobian jac = injection_jacobian(st, sub.y);
    Eigen::MatrixXd jmat(2 * m, 2 * m);
    for (int r = 0; r < m; ++r)
      for (int c = 0; c < m; ++c) {
        jmat(r, c) = jac.dp_dd(pq[r], pq[c]);
        jmat(r, m + c) = jac.dp_dv(pq[r], pq[c]);
        jmat(m + r, c) = jac.dq_dd(pq[r], pq[c]);
        jmat(m + r, m + c) = jac.dq_dv(pq[r], pq[c]);
      }
    const Eigen::VectorXd dx = jmat.partialPivLu().solve(rhs);
    for (int k = 0; k < m; ++k) {
      st.delta(pq[k]) += dx(k);
      st.v(pq[k]) += dx(m + k);
    }
    if (st.v.minCoeff() <= 0.0)
      throw PowerFlowError(fmt::format(
          "base power flow diverged on '{}' (non-positive voltage)", sub.name));
  }
  throw PowerFlowError(
      fmt::format("base power flow on '{}' did not converge in {} iterations; "
                  "final mismatch {:.3e} pu",
                  sub.name, kMaxIter, mismatch));
}

PowerFlowResiduals residuals(const NetworkState& state, const Subcase& sub,
                             const ScheduledInjections& scheduled) {
  const Eigen::VectorXcd s = complex_injections(state, sub.y);
  PowerFlowResiduals r;
  r.dp = scheduled.p - s.real();
  r.dq = scheduled.q - s.imag();
  return r;
}

}  // namespace gridcascade
