#pragma once

#include <Eigen/Core>
#include <functional>
#include <string>
#include <vector>

namespace gridcascade {

/// Objective callback: returns f(x); fills *grad when non-null.
using ObjectiveFn =
    std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;

/// Constraint callback: fills `val` (length n_eq or n_ineq) and, when
/// non-null, the Jacobian `jac` (rows = constraints, cols = variables).
using ConstraintFn = std::function<void(const Eigen::VectorXd& x,
                                        Eigen::VectorXd& val,
                                        Eigen::MatrixXd* jac)>;

/// One weight * |x[index] - center| objective term. Kept out of the smooth
/// objective callback so the solver can apply its own smoothing and exact
/// curvature to the kink.
struct SmoothedAbsTerm {
  double weight = 0.0;
  int index = -1;
  double center = 0.0;
};

/// A solver-ready constrained problem:
///   min f(x) + sum_k w_k |x_i(k) - c_k|
///   s.t. h(x) = 0, g(x) <= 0, lower <= x <= upper.
struct ProblemSpec {
  int n_vars = 0;
  Eigen::VectorXd lower, upper;        // +-inf where unbounded
  std::vector<std::string> var_names;  // diagnostics; may be empty

  ObjectiveFn objective;
  int n_eq = 0;
  ConstraintFn equality;
  int n_ineq = 0;
  ConstraintFn inequality;
  std::vector<SmoothedAbsTerm> abs_terms;

  /// Declared by the builder: objective and all constraints affine and no
  /// abs_terms, enabling the vertex-solver path.
  bool affine = false;

  const std::string& var_name(int i) const;
};

enum class SolveStatus { optimal, max_iter, infeasible, unbounded };

std::string to_string(SolveStatus status);

struct Solution {
  Eigen::VectorXd x;
  double objective = 0.0;
  SolveStatus status = SolveStatus::max_iter;
  double kkt_stationarity = 0.0;
  double max_constraint_violation = 0.0;
  int iterations = 0;
  Eigen::VectorXd eq_multipliers;    // empty on the LP path
  Eigen::VectorXd ineq_multipliers;  // >= 0 when present
  std::string message;
  std::vector<Eigen::VectorXd> iterates;  // filled when opts.record_iterates
};

struct SolverOptions {
  double tol_stationarity = 1e-6;
  double tol_feasibility = 1e-7;
  double mu_init = 0.1;       // initial barrier parameter
  double mu_reduce = 0.2;     // multiplicative barrier reduction
  int max_iterations = 200;
  double abs_smoothing = 1e-8;  // epsilon in sqrt(u^2 + eps^2)
  bool record_iterates = false;
};

/// Primal-dual interior-point solve. Inequalities and finite bounds get slack
/// variables; equalities enter the KKT system directly. Deterministic for
/// identical (problem, x0, opts).
Solution solve(const ProblemSpec& problem, const Eigen::VectorXd& x0,
               const SolverOptions& opts = {});

/// Two-phase simplex for affine problems; returns a vertex optimum or an
/// unbounded/infeasible status.
Solution solve_linear(const ProblemSpec& problem);

struct GradientCheckReport {
  struct Entry {
    std::string evaluator;  // "objective" | "equality" | "inequality"
    int row = 0, col = 0;
    double analytic = 0.0, numeric = 0.0, rel_error = 0.0;
  };
  double max_rel_error_objective = 0.0;
  double max_rel_error_equality = 0.0;
  double max_rel_error_inequality = 0.0;
  std::vector<Entry> flagged;  // entries with rel_error > flag_threshold
  double flag_threshold = 1e-4;

  double max_rel_error() const;
  bool ok() const { return flagged.empty(); }
};

/// Central finite-difference check of every analytic derivative at x.
GradientCheckReport check_gradients(const ProblemSpec& problem,
                                    const Eigen::VectorXd& x);

}  // namespace gridcascade
