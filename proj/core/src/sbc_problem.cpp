#include <algorithm>

#include "gridcascade/subproblems.hpp"

namespace gridcascade {

BuiltSbProblem build_sbc_problem(const SmartBuildingSpec& sb, double pb_target,
                                 double alpha, double beta, double price) {
  BuiltSbProblem out;
  const SbLayout& l = out.layout;
  ProblemSpec& p = out.spec;
  p.n_vars = SbLayout::n;
  p.lower.resize(p.n_vars);
  p.upper.resize(p.n_vars);
  p.var_names = {"p_b", "p_l", "p_pv", "p_dis", "p_ch", "e"};

  p.lower(l.p_b) = sb.pb_min;
  p.upper(l.p_b) = sb.pb_max;
  p.lower(l.p_l) = sb.firm_load();
  p.upper(l.p_l) = sb.total_load;
  p.lower(l.p_pv) = 0.0;
  p.upper(l.p_pv) = sb.pv_forecast;
  p.lower(l.p_dis) = 0.0;
  p.upper(l.p_dis) = sb.bess.rate_max;
  p.lower(l.p_ch) = 0.0;
  p.upper(l.p_ch) = sb.bess.rate_max;
  p.lower(l.e) = sb.bess.e_min;
  p.upper(l.e) = sb.bess.e_capacity;

  const double e0 = sb.bess.e_initial;
  const double eta = sb.bess.efficiency;
  p.n_eq = 2;
  p.equality = [l, e0, eta](const Eigen::VectorXd& x, Eigen::VectorXd& val,
                            Eigen::MatrixXd* jac) {
    // Bus balance, and the one-hour storage energy coupling: discharging
    // draws p_dis/eta from the store, charging banks eta * p_ch.
    val(0) = x(l.p_b) + x(l.p_pv) + x(l.p_dis) - x(l.p_ch) - x(l.p_l);
    val(1) = x(l.e) - e0 + x(l.p_dis) / eta - eta * x(l.p_ch);
    if (jac) {
      jac->setZero();
      (*jac)(0, l.p_b) = 1.0;
      (*jac)(0, l.p_pv) = 1.0;
      (*jac)(0, l.p_dis) = 1.0;
      (*jac)(0, l.p_ch) = -1.0;
      (*jac)(0, l.p_l) = -1.0;
      (*jac)(1, l.e) = 1.0;
      (*jac)(1, l.p_dis) = 1.0 / eta;
      (*jac)(1, l.p_ch) = -eta;
    }
  };
  p.n_ineq = 0;

  const double beta2 = beta * beta;
  p.objective = [l, price, beta2, pb_target](const Eigen::VectorXd& x,
                                             Eigen::VectorXd* grad) {
    const double d = x(l.p_b) - pb_target;
    const double f = price * x(l.p_b) + beta2 * d * d;
    if (grad) {
      grad->setZero();
      (*grad)(l.p_b) = price + 2.0 * beta2 * d;
    }
    return f;
  };
  if (alpha != 0.0) p.abs_terms.push_back({alpha, l.p_b, pb_target});
  p.affine = alpha == 0.0 && beta == 0.0;

  out.x0.resize(p.n_vars);
  out.x0(l.p_l) = sb.total_load;
  out.x0(l.p_pv) = sb.pv_forecast;
  out.x0(l.p_dis) = 0.0;
  out.x0(l.p_ch) = 0.0;
  out.x0(l.e) = e0;
  out.x0(l.p_b) =
      std::clamp(sb.total_load - sb.pv_forecast, sb.pb_min, sb.pb_max);
  return out;
}

}  // namespace gridcascade
