#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <vector>

#include "gridcascade/nlp.hpp"

namespace gridcascade {

namespace {

constexpr double kPivTol = 1e-9;

/// Dense tableau simplex on min c^T u, A u = b, u >= 0, b >= 0, with Bland's
/// rule. Returns false when unbounded. `basis` holds the basic column per row.
bool simplex_iterate(Eigen::MatrixXd& a, Eigen::VectorXd& b, Eigen::VectorXd& c,
                     double& obj, std::vector<int>& basis,
                     const std::vector<bool>& allowed) {
  const int m = static_cast<int>(a.rows());
  const int n = static_cast<int>(a.cols());
  while (true) {
    // Reduced costs via basis multipliers would need a factorization; at this
    // scale the tableau is kept fully reduced instead, so c is the reduced row.
    int enter = -1;
    for (int j = 0; j < n; ++j) {
      if (!allowed[j]) continue;
      if (c(j) < -kPivTol) {
        enter = j;
        break;  // Bland: lowest index
      }
    }
    if (enter < 0) return true;  // optimal
    int leave = -1;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (int i = 0; i < m; ++i) {
      if (a(i, enter) > kPivTol) {
        const double ratio = b(i) / a(i, enter);
        if (ratio < best_ratio - 1e-12 ||
            (std::abs(ratio - best_ratio) <= 1e-12 &&
             (leave < 0 || basis[i] < basis[leave]))) {
          best_ratio = ratio;
          leave = i;
        }
      }
    }
    if (leave < 0) return false;  // unbounded
    const double piv = a(leave, enter);
    a.row(leave) /= piv;
    b(leave) /= piv;
    for (int i = 0; i < m; ++i) {
      if (i == leave) continue;
      const double f = a(i, enter);
      if (f != 0.0) {
        a.row(i) -= f * a.row(leave);
        b(i) -= f * b(leave);
      }
    }
    const double fc = c(enter);
    if (fc != 0.0) {
      c -= fc * a.row(leave).transpose();
      obj -= fc * b(leave);
    }
    basis[leave] = enter;
  }
}

}  // namespace

Solution solve_linear(const ProblemSpec& p) {
  if (!p.affine || !p.abs_terms.empty())
    throw std::invalid_argument("solve_linear: problem not declared affine");
  const int n = p.n_vars;

  // Extract the affine data from the callbacks at the origin.
  const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd cost(n);
  cost.setZero();
  const double c0 = p.objective(x0, &cost);

  Eigen::MatrixXd ae(p.n_eq, n);
  Eigen::VectorXd be(p.n_eq);
  if (p.n_eq > 0) {
    Eigen::VectorXd h0(p.n_eq);
    p.equality(x0, h0, &ae);
    be = -h0;
  }
  Eigen::MatrixXd ai(p.n_ineq, n);
  Eigen::VectorXd bi(p.n_ineq);
  if (p.n_ineq > 0) {
    Eigen::VectorXd g0(p.n_ineq);
    p.inequality(x0, g0, &ai);
    bi = -g0;
  }

  // Shift every variable to u >= 0. Columns per original variable: one
  // (shifted or mirrored) or two (free split). Finite two-sided ranges add an
  // upper-bound row with a slack.
  struct VarMap {
    int col = -1, col_neg = -1;  // u index(es)
    double shift = 0.0;          // x = shift + sign * u  (or u+ - u-)
    double sign = 1.0;
  };
  std::vector<VarMap> vmap(n);
  int ncols = 0;
  int n_range_rows = 0;
  for (int j = 0; j < n; ++j) {
    const double lo = p.lower(j), hi = p.upper(j);
    if (std::isfinite(lo)) {
      vmap[j] = {ncols++, -1, lo, 1.0};
      if (std::isfinite(hi)) ++n_range_rows;
    } else if (std::isfinite(hi)) {
      vmap[j] = {ncols++, -1, hi, -1.0};
    } else {
      vmap[j].col = ncols++;
      vmap[j].col_neg = ncols++;
    }
  }
  const int n_slack = p.n_ineq + n_range_rows;
  const int m = p.n_eq + p.n_ineq + n_range_rows;
  const int total = ncols + n_slack + m;  // + artificials

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, total);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd cfull = Eigen::VectorXd::Zero(total);
  double cshift = c0;

  auto emit_row = [&](int row, const Eigen::VectorXd& coeffs, double rhs) {
    for (int j = 0; j < n; ++j) {
      const double cj = coeffs(j);
      if (cj == 0.0) continue;
      const VarMap& vm = vmap[j];
      a(row, vm.col) += cj * vm.sign;
      if (vm.col_neg >= 0) a(row, vm.col_neg) -= cj;
      rhs -= cj * vm.shift;
    }
    b(row) = rhs;
  };

  int row = 0;
  for (int i = 0; i < p.n_eq; ++i) emit_row(row++, ae.row(i), be(i));
  for (int i = 0; i < p.n_ineq; ++i) {
    emit_row(row, ai.row(i), bi(i));
    a(row, ncols + i) = 1.0;
    ++row;
  }
  {
    int sl = p.n_ineq;
    for (int j = 0; j < n; ++j) {
      if (std::isfinite(p.lower(j)) && std::isfinite(p.upper(j))) {
        a(row, vmap[j].col) = 1.0;
        a(row, ncols + sl) = 1.0;
        b(row) = p.upper(j) - p.lower(j);
        ++sl;
        ++row;
      }
    }
  }
  for (int j = 0; j < n; ++j) {
    const VarMap& vm = vmap[j];
    cfull(vm.col) += cost(j) * vm.sign;
    if (vm.col_neg >= 0) cfull(vm.col_neg) -= cost(j);
    cshift += cost(j) * vm.shift;
  }

  // Make rhs non-negative, then add artificials as the starting basis.
  for (int i = 0; i < m; ++i) {
    if (b(i) < 0) {
      a.row(i) *= -1.0;
      b(i) *= -1.0;
    }
    a(i, ncols + n_slack + i) = 1.0;
  }

  Solution sol;
  sol.x.resize(n);

  // Phase 1: minimize the artificial sum.
  std::vector<int> basis(m);
  for (int i = 0; i < m; ++i) basis[i] = ncols + n_slack + i;
  Eigen::VectorXd c1 = Eigen::VectorXd::Zero(total);
  for (int i = 0; i < m; ++i) c1(ncols + n_slack + i) = 1.0;
  double obj1 = 0.0;
  // Reduce c1 over the starting basis.
  for (int i = 0; i < m; ++i) {
    c1 -= a.row(i).transpose();
    obj1 -= b(i);
  }
  std::vector<bool> allow_all(total, true);
  if (!simplex_iterate(a, b, c1, obj1, basis, allow_all)) {
    sol.status = SolveStatus::infeasible;  // phase 1 cannot be unbounded
    sol.message = "phase-1 simplex unbounded";
    return sol;
  }
  if (-obj1 > 1e-7) {  // artificial sum left positive
    sol.status = SolveStatus::infeasible;
    sol.message = "constraints are inconsistent";
    return sol;
  }

  // Drive any artificial still basic (at zero) out of the basis so phase-2
  // pivots cannot re-grow it; rows with no real column left are redundant.
  const int art_start = ncols + n_slack;
  for (int i = 0; i < m; ++i) {
    if (basis[i] < art_start) continue;
    int enter = -1;
    for (int j = 0; j < art_start; ++j) {
      if (std::abs(a(i, j)) > kPivTol) {
        enter = j;
        break;
      }
    }
    if (enter < 0) {
      a.row(i).setZero();  // redundant constraint; row stays inert
      b(i) = 0.0;
      continue;
    }
    const double piv = a(i, enter);
    a.row(i) /= piv;
    b(i) /= piv;
    for (int r2 = 0; r2 < m; ++r2) {
      if (r2 == i) continue;
      const double f = a(r2, enter);
      if (f != 0.0) {
        a.row(r2) -= f * a.row(i);
        b(r2) -= f * b(i);
      }
    }
    basis[i] = enter;
  }

  // Phase 2: original costs, artificials barred from entering. The tracked
  // quantity is minus the tableau objective; the affine constant is re-added
  // at extraction.
  std::vector<bool> allowed(total, true);
  for (int i = 0; i < m; ++i) allowed[art_start + i] = false;
  Eigen::VectorXd c2 = cfull;
  double obj2 = 0.0;
  for (int i = 0; i < m; ++i) {
    const double cb = c2(basis[i]);
    if (cb != 0.0) {
      c2 -= cb * a.row(i).transpose();
      obj2 -= cb * b(i);
    }
  }
  if (!simplex_iterate(a, b, c2, obj2, basis, allowed)) {
    sol.status = SolveStatus::unbounded;
    sol.message = "objective unbounded below";
    return sol;
  }

  Eigen::VectorXd u = Eigen::VectorXd::Zero(total);
  for (int i = 0; i < m; ++i) u(basis[i]) = b(i);
  for (int j = 0; j < n; ++j) {
    const VarMap& vm = vmap[j];
    double xj = vm.shift + vm.sign * u(vm.col);
    if (vm.col_neg >= 0) xj -= u(vm.col_neg);
    sol.x(j) = xj;
  }
  sol.objective = p.objective(sol.x, nullptr);
  sol.status = SolveStatus::optimal;
  sol.iterations = 0;
  (void)cshift;

  // Audit the vertex against the original data.
  double viol = 0.0;
  if (p.n_eq > 0) viol = std::max(viol, (ae * sol.x - be).cwiseAbs().maxCoeff());
  if (p.n_ineq > 0)
    viol = std::max(viol, std::max(0.0, (ai * sol.x - bi).maxCoeff()));
  for (int j = 0; j < n; ++j) {
    if (std::isfinite(p.lower(j))) viol = std::max(viol, p.lower(j) - sol.x(j));
    if (std::isfinite(p.upper(j))) viol = std::max(viol, sol.x(j) - p.upper(j));
  }
  sol.max_constraint_violation = viol;
  return sol;
}

}  // namespace gridcascade
