#include <algorithm>
#include <cmath>

#include "gridcascade/nlp.hpp"

namespace gridcascade {

double GradientCheckReport::max_rel_error() const {
  return std::max({max_rel_error_objective, max_rel_error_equality,
                   max_rel_error_inequality});
}

namespace {

double rel_error(double analytic, double numeric) {
  const double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
  return std::abs(analytic - numeric) / denom;
}

}  // namespace

GradientCheckReport check_gradients(const ProblemSpec& p,
                                    const Eigen::VectorXd& x) {
  GradientCheckReport report;
  const int n = p.n_vars;

  Eigen::VectorXd grad(n);
  grad.setZero();
  p.objective(x, &grad);

  Eigen::MatrixXd jh, jg;
  Eigen::VectorXd hv, gv;
  if (p.n_eq > 0) {
    hv.resize(p.n_eq);
    jh.resize(p.n_eq, n);
    p.equality(x, hv, &jh);
  }
  if (p.n_ineq > 0) {
    gv.resize(p.n_ineq);
    jg.resize(p.n_ineq, n);
    p.inequality(x, gv, &jg);
  }

  Eigen::VectorXd xp = x;
  Eigen::VectorXd hp(p.n_eq), hm(p.n_eq), gp(p.n_ineq), gm(p.n_ineq);
  for (int j = 0; j < n; ++j) {
    const double step = 1e-6 * std::max(1.0, std::abs(x(j)));
    xp(j) = x(j) + step;
    const double fp = p.objective(xp, nullptr);
    if (p.n_eq > 0) p.equality(xp, hp, nullptr);
    if (p.n_ineq > 0) p.inequality(xp, gp, nullptr);
    xp(j) = x(j) - step;
    const double fm = p.objective(xp, nullptr);
    if (p.n_eq > 0) p.equality(xp, hm, nullptr);
    if (p.n_ineq > 0) p.inequality(xp, gm, nullptr);
    xp(j) = x(j);

    const double num_f = (fp - fm) / (2.0 * step);
    const double ef = rel_error(grad(j), num_f);
    report.max_rel_error_objective = std::max(report.max_rel_error_objective, ef);
    if (ef > report.flag_threshold)
      report.flagged.push_back({"objective", 0, j, grad(j), num_f, ef});

    for (int r = 0; r < p.n_eq; ++r) {
      const double num = (hp(r) - hm(r)) / (2.0 * step);
      const double e = rel_error(jh(r, j), num);
      report.max_rel_error_equality = std::max(report.max_rel_error_equality, e);
      if (e > report.flag_threshold)
        report.flagged.push_back({"equality", r, j, jh(r, j), num, e});
    }
    for (int r = 0; r < p.n_ineq; ++r) {
      const double num = (gp(r) - gm(r)) / (2.0 * step);
      const double e = rel_error(jg(r, j), num);
      report.max_rel_error_inequality =
          std::max(report.max_rel_error_inequality, e);
      if (e > report.flag_threshold)
        report.flagged.push_back({"inequality", r, j, jg(r, j), num, e});
    }
  }
  return report;
}

}  // namespace gridcascade
