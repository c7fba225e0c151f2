#include "network_builder.hpp"

#include <fmt/core.h>

#include <limits>

namespace gridcascade::detail {

LayoutBundle make_network_layout(const Subcase& sub, bool with_grid) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const int nb = static_cast<int>(sub.buses.size());
  LayoutBundle b;
  std::vector<double> lo, hi, x0;
  auto add_var = [&](const std::string& name, double l, double h, double x) {
    b.names.push_back(name);
    lo.push_back(l);
    hi.push_back(h);
    x0.push_back(x);
    return static_cast<int>(b.names.size()) - 1;
  };

  b.lay.v_start = 0;
  for (int i = 0; i < nb; ++i)
    add_var(fmt::format("v[{}]", sub.buses[i].id), sub.buses[i].v_min,
            sub.buses[i].v_max, 1.0);
  b.lay.delta_start = nb;
  for (int i = 0; i < nb; ++i)
    add_var(fmt::format("delta[{}]", sub.buses[i].id), -kInf, kInf, 0.0);
  if (with_grid) {
    b.lay.p_grid = add_var("p_grid", -kInf, kInf, 0.0);
    b.lay.q_grid = add_var("q_grid", -kInf, kInf, 0.0);
  }
  for (const DgUnit& d : sub.dgs) {
    b.lay.p_dg.push_back(add_var(fmt::format("p_dg[{}]", d.bus), d.p_min,
                                 d.p_max, 0.5 * (d.p_min + d.p_max)));
    b.lay.q_dg.push_back(add_var(fmt::format("q_dg[{}]", d.bus), d.q_min,
                                 d.q_max, 0.5 * (d.q_min + d.q_max)));
  }
  for (const SmartBuildingSpec& sb : sub.sbs)
    b.lay.p_b[sb.bus] = add_var(fmt::format("p_b[{}]", sb.bus), sb.pb_min,
                                sb.pb_max, sb.total_load - sb.pv_forecast);
  if (sub.is_dist()) {
    for (const auto& ex : sub.exchange_buses) {
      const int pi =
          add_var(fmt::format("p_mg[{}]", ex.mg_id), -kInf, kInf, 0.0);
      const int qi =
          add_var(fmt::format("q_mg[{}]", ex.mg_id), -kInf, kInf, 0.0);
      b.lay.mg_exchange[ex.mg_id] = {pi, qi};
    }
  } else {
    const int pi = add_var(fmt::format("p_mg[{}]", sub.mg_id), -kInf, kInf, 0.0);
    const int qi = add_var(fmt::format("q_mg[{}]", sub.mg_id), -kInf, kInf, 0.0);
    b.lay.mg_exchange[sub.mg_id] = {pi, qi};
  }

  const int n = static_cast<int>(b.names.size());
  b.lay.n = n;
  b.lower = Eigen::Map<Eigen::VectorXd>(lo.data(), n);
  b.upper = Eigen::Map<Eigen::VectorXd>(hi.data(), n);
  b.x0 = Eigen::Map<Eigen::VectorXd>(x0.data(), n);
  return b;
}

void wire_network_problem(ProblemSpec& spec,
                          std::shared_ptr<const NetworkProblemData> data) {
  spec.n_eq = data->n_eq();
  spec.n_ineq = data->n_ineq();

  spec.objective = [data](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    double f = 0.0;
    if (grad) grad->setZero();
    for (const auto& [idx, c] : data->linear) {
      f += c * x(idx);
      if (grad) (*grad)(idx) += c;
    }
    for (const auto& q : data->quads) {
      const double d = x(q.idx) - q.center;
      f += q.coeff * d * d;
      if (grad) (*grad)(q.idx) += 2.0 * q.coeff * d;
    }
    if (!data->flow_quads.empty()) {
      const NetworkState st = data->state_of(x);
      for (const auto& fq : data->flow_quads) {
        const LineFlowDerivs d = line_flow_derivs_oriented(
            st, data->sub, fq.line_index, fq.from_end);
        f += fq.coeff * (d.flow.p * d.flow.p + d.flow.q * d.flow.q);
        if (grad) {
          const double tp = 2.0 * fq.coeff * d.flow.p;
          const double tq = 2.0 * fq.coeff * d.flow.q;
          (*grad)(data->v_start + d.sending_pos) += tp * d.dp_dvf + tq * d.dq_dvf;
          (*grad)(data->v_start + d.other_pos) += tp * d.dp_dvt + tq * d.dq_dvt;
          (*grad)(data->d_start + d.sending_pos) += tp * d.dp_ddf + tq * d.dq_ddf;
          (*grad)(data->d_start + d.other_pos) += tp * d.dp_ddt + tq * d.dq_ddt;
        }
      }
    }
    return f;
  };

  spec.equality = [data](const Eigen::VectorXd& x, Eigen::VectorXd& val,
                         Eigen::MatrixXd* jac) {
    const NetworkState st = data->state_of(x);
    const int n = static_cast<int>(data->sub.buses.size());
    const Eigen::VectorXcd inj = complex_injections(st, data->sub.y);
    for (int i = 0; i < n; ++i) {
      double sp = data->sched_p_const(i);
      double sq = data->sched_q_const(i);
      for (const auto& [idx, c] : data->p_contrib[i]) sp += c * x(idx);
      for (const auto& [idx, c] : data->q_contrib[i]) sq += c * x(idx);
      val(2 * i) = sp - inj(i).real();
      val(2 * i + 1) = sq - inj(i).imag();
    }
    int row = 2 * n;
    if (data->fixed_delta_pos >= 0)
      val(row++) = x(data->d_start + data->fixed_delta_pos);
    for (const auto& lr : data->extra_eq) {
      double v = lr.constant;
      for (const auto& [idx, c] : lr.terms) v += c * x(idx);
      val(row++) = v;
    }
    if (jac) {
      jac->setZero();
      const InjectionJacobian ij = injection_jacobian(st, data->sub.y);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          (*jac)(2 * i, data->v_start + j) = -ij.dp_dv(i, j);
          (*jac)(2 * i, data->d_start + j) = -ij.dp_dd(i, j);
          (*jac)(2 * i + 1, data->v_start + j) = -ij.dq_dv(i, j);
          (*jac)(2 * i + 1, data->d_start + j) = -ij.dq_dd(i, j);
        }
        for (const auto& [idx, c] : data->p_contrib[i]) (*jac)(2 * i, idx) += c;
        for (const auto& [idx, c] : data->q_contrib[i])
          (*jac)(2 * i + 1, idx) += c;
      }
      row = 2 * n;
      if (data->fixed_delta_pos >= 0)
        (*jac)(row++, data->d_start + data->fixed_delta_pos) = 1.0;
      for (const auto& lr : data->extra_eq) {
        for (const auto& [idx, c] : lr.terms) (*jac)(row, idx) += c;
        ++row;
      }
    }
  };

  spec.inequality = [data](const Eigen::VectorXd& x, Eigen::VectorXd& val,
                           Eigen::MatrixXd* jac) {
    const NetworkState st = data->state_of(x);
    if (jac) jac->setZero();
    for (size_t li = 0; li < data->sub.lines.size(); ++li) {
      const Line& l = data->sub.lines[li];
      const int f = data->sub.pos_of(l.from_bus);
      const int t = data->sub.pos_of(l.to_bus);
      if (jac) {
        const LineFlowDerivs d =
            line_flow_derivs(st, data->sub, static_cast<int>(li));
        val(li) = d.flow.p * d.flow.p + d.flow.q * d.flow.q - data->smax_pu2[li];
        const double tp = 2.0 * d.flow.p, tq = 2.0 * d.flow.q;
        (*jac)(li, data->v_start + f) = tp * d.dp_dvf + tq * d.dq_dvf;
        (*jac)(li, data->v_start + t) = tp * d.dp_dvt + tq * d.dq_dvt;
        (*jac)(li, data->d_start + f) = tp * d.dp_ddf + tq * d.dq_ddf;
        (*jac)(li, data->d_start + t) = tp * d.dp_ddt + tq * d.dq_ddt;
      } else {
        const LineFlow fl = line_flow(st, data->sub, static_cast<int>(li));
        val(li) = fl.p * fl.p + fl.q * fl.q - data->smax_pu2[li];
      }
    }
  };
}

}  // namespace gridcascade::detail
