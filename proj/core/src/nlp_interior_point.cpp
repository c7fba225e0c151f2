#include <fmt/core.h>
#include <lapacke.h>

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "gridcascade/log.hpp"
#include "gridcascade/nlp.hpp"

namespace gridcascade {

namespace {
const std::string kUnnamed = "x";
}

const std::string& ProblemSpec::var_name(int i) const {
  if (i >= 0 && i < static_cast<int>(var_names.size())) return var_names[i];
  return kUnnamed;
}

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::max_iter: return "max-iter";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
  }
  return "max-iter";
}

namespace {

/// Inequality rows of the slack formulation: declared g(x) first, then
/// lb - x and x - ub for every finite bound.
struct IneqSet {
  const ProblemSpec& p;
  std::vector<int> lb_vars, ub_vars;
  int n_g = 0, total = 0;

  explicit IneqSet(const ProblemSpec& prob) : p(prob), n_g(prob.n_ineq) {
    for (int j = 0; j < p.n_vars; ++j) {
      if (std::isfinite(p.lower(j))) lb_vars.push_back(j);
      if (std::isfinite(p.upper(j))) ub_vars.push_back(j);
    }
    total = n_g + static_cast<int>(lb_vars.size() + ub_vars.size());
  }

  void value(const Eigen::VectorXd& x, Eigen::VectorXd& out,
             Eigen::VectorXd& g_buf, Eigen::MatrixXd* jac_g) const {
    out.resize(total);
    if (n_g > 0) {
      g_buf.resize(n_g);
      p.inequality(x, g_buf, jac_g);
      out.head(n_g) = g_buf;
    }
    int r = n_g;
    for (int j : lb_vars) out(r++) = p.lower(j) - x(j);
    for (int j : ub_vars) out(r++) = x(j) - p.upper(j);
  }

  void add_jt_times(const Eigen::MatrixXd& jac_g, const Eigen::VectorXd& w,
                    Eigen::VectorXd& y) const {
    if (n_g > 0) y.noalias() += jac_g.transpose() * w.head(n_g);
    int r = n_g;
    for (int j : lb_vars) y(j) -= w(r++);
    for (int j : ub_vars) y(j) += w(r++);
  }

  Eigen::VectorXd j_times(const Eigen::MatrixXd& jac_g,
                          const Eigen::VectorXd& dx) const {
    Eigen::VectorXd out(total);
    if (n_g > 0) out.head(n_g) = jac_g * dx;
    int r = n_g;
    for (int j : lb_vars) out(r++) = -dx(j);
    for (int j : ub_vars) out(r++) = dx(j);
    return out;
  }

  void add_weighted_gram(const Eigen::MatrixXd& jac_g, const Eigen::VectorXd& d,
                         Eigen::MatrixXd& m) const {
    if (n_g > 0)
      m.noalias() += jac_g.transpose() * d.head(n_g).asDiagonal() * jac_g;
    int r = n_g;
    for (int j : lb_vars) m(j, j) += d(r++);
    for (int j : ub_vars) m(j, j) += d(r++);
  }
};

struct Evaluation {
  double f = 0.0;        // objective incl. smoothed abs terms
  Eigen::VectorXd grad;
  Eigen::VectorXd h;
  Eigen::MatrixXd jh;
  Eigen::VectorXd gfull;  // all inequality rows
  Eigen::VectorXd g;      // declared rows only
  Eigen::MatrixXd jg;
};

/// Symmetric indefinite factorization (Bunch-Kaufman) with inertia, the
/// appropriate tool for saddle-point KKT systems.
class SymIndefSolver {
 public:
  bool factorize(const Eigen::MatrixXd& m) {
    n_ = static_cast<int>(m.rows());
    a_ = m;
    ipiv_.resize(n_);
    const int info = LAPACKE_dsytrf(LAPACK_COL_MAJOR, 'L', n_, a_.data(), n_,
                                    ipiv_.data());
    ok_ = info == 0;
    singular_ = info > 0;
    return ok_;
  }

  bool singular() const { return singular_; }

  /// (positive, negative, zero) eigenvalue counts from the block diagonal.
  /// Signs are taken exactly: pivot magnitudes legitimately span many orders
  /// once barrier terms tighten, so a relative zero threshold misclassifies.
  std::array<int, 3> inertia() const {
    std::array<int, 3> count{0, 0, 0};
    for (int k = 0; k < n_;) {
      if (ipiv_[k] > 0) {
        const double d = a_(k, k);
        if (d > 0.0) ++count[0];
        else if (d < 0.0) ++count[1];
        else ++count[2];
        ++k;
      } else {
        // 2x2 block: classify by determinant and trace.
        const double d11 = a_(k, k), d22 = a_(k + 1, k + 1), d21 = a_(k + 1, k);
        const double det = d11 * d22 - d21 * d21;
        const double tr = d11 + d22;
        if (det < 0.0) {
          ++count[0];
          ++count[1];
        } else if (det > 0.0) {
          if (tr > 0) count[0] += 2;
          else count[1] += 2;
        } else {
          ++count[2];
          if (tr > 0.0) ++count[0];
          else if (tr < 0.0) ++count[1];
          else ++count[2];
        }
        k += 2;
      }
    }
    return count;
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
    Eigen::VectorXd x = rhs;
    LAPACKE_dsytrs(LAPACK_COL_MAJOR, 'L', n_, 1, a_.data(), n_, ipiv_.data(),
                   x.data(), n_);
    return x;
  }

 private:
  int n_ = 0;
  Eigen::MatrixXd a_;
  std::vector<lapack_int> ipiv_;
  bool ok_ = false;
  bool singular_ = false;
};

class InteriorPoint {
 public:
  InteriorPoint(const ProblemSpec& p, const SolverOptions& opts)
      : p_(p), opts_(opts), ineq_(p), n_(p.n_vars), me_(p.n_eq),
        mi_(ineq_.total) {}

  Solution run(Eigen::VectorXd x);

 private:
  double smooth_abs(double u) const {
    const double e = opts_.abs_smoothing;
    return std::sqrt(u * u + e * e);
  }

  void evaluate(const Eigen::VectorXd& x, Evaluation& ev, bool with_derivs) {
    ev.grad.setZero(n_);
    ev.f = p_.objective(x, with_derivs ? &ev.grad : nullptr);
    for (const SmoothedAbsTerm& t : p_.abs_terms) {
      const double u = x(t.index) - t.center;
      const double r = smooth_abs(u);
      ev.f += t.weight * r;
      if (with_derivs) ev.grad(t.index) += t.weight * u / r;
    }
    if (me_ > 0) {
      ev.h.resize(me_);
      if (with_derivs) ev.jh.resize(me_, n_);
      p_.equality(x, ev.h, with_derivs ? &ev.jh : nullptr);
    } else {
      ev.h.resize(0);
      ev.jh.resize(0, n_);
    }
    if (with_derivs && ineq_.n_g > 0) ev.jg.resize(ineq_.n_g, n_);
    ineq_.value(x, ev.gfull, ev.g,
                (with_derivs && ineq_.n_g > 0) ? &ev.jg : nullptr);
  }

  /// grad of f + y^T h + z_g^T g; the FD-differenced part of the Lagrangian.
  /// Bound rows are linear and abs terms get analytic curvature, so both are
  /// left out here.
  Eigen::VectorXd smooth_lagrangian_gradient(const Eigen::VectorXd& x,
                                             const Eigen::VectorXd& y,
                                             const Eigen::VectorXd& zg) {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(n_);
    p_.objective(x, &grad);
    if (me_ > 0) {
      Eigen::VectorXd h(me_);
      Eigen::MatrixXd jh(me_, n_);
      p_.equality(x, h, &jh);
      grad.noalias() += jh.transpose() * y;
    }
    if (ineq_.n_g > 0) {
      Eigen::VectorXd g(ineq_.n_g);
      Eigen::MatrixXd jg(ineq_.n_g, n_);
      p_.inequality(x, g, &jg);
      grad.noalias() += jg.transpose() * zg;
    }
    return grad;
  }

  Eigen::MatrixXd lagrangian_hessian(const Eigen::VectorXd& x,
                                     const Eigen::VectorXd& y,
                                     const Eigen::VectorXd& zg) {
    Eigen::MatrixXd w(n_, n_);
    Eigen::VectorXd xp = x;
    for (int j = 0; j < n_; ++j) {
      const double hstep = 1e-5 * std::max(1.0, std::abs(x(j)));
      xp(j) = x(j) + hstep;
      const Eigen::VectorXd gp = smooth_lagrangian_gradient(xp, y, zg);
      xp(j) = x(j) - hstep;
      const Eigen::VectorXd gm = smooth_lagrangian_gradient(xp, y, zg);
      xp(j) = x(j);
      w.col(j) = (gp - gm) / (2.0 * hstep);
    }
    w = 0.5 * (w + w.transpose()).eval();
    for (const SmoothedAbsTerm& t : p_.abs_terms) {
      const double u = x(t.index) - t.center;
      const double r = smooth_abs(u);
      const double e = opts_.abs_smoothing;
      w(t.index, t.index) += t.weight * e * e / (r * r * r);
    }
    return w;
  }

  const ProblemSpec& p_;
  const SolverOptions& opts_;
  IneqSet ineq_;
  int n_, me_, mi_;
};

Solution InteriorPoint::run(Eigen::VectorXd x) {
  Solution sol;
  for (int j = 0; j < n_; ++j) {
    const double lo = p_.lower(j), hi = p_.upper(j);
    if (std::isfinite(lo) && std::isfinite(hi)) {
      const double margin =
          std::min(1e-4 * std::max(1.0, hi - lo), 0.49 * (hi - lo));
      x(j) = std::clamp(x(j), lo + margin, hi - margin);
    } else if (std::isfinite(lo)) {
      x(j) = std::max(x(j), lo + 1e-4 * std::max(1.0, std::abs(lo)));
    } else if (std::isfinite(hi)) {
      x(j) = std::min(x(j), hi - 1e-4 * std::max(1.0, std::abs(hi)));
    }
  }

  Evaluation ev;
  evaluate(x, ev, true);

  double mu = mi_ > 0 ? opts_.mu_init : 0.0;
  Eigen::VectorXd s(mi_), z(mi_);
  for (int k = 0; k < mi_; ++k) {
    s(k) = std::max(-ev.gfull(k), 1e-4);
    z(k) = mu / s(k);
  }
  Eigen::VectorXd y = Eigen::VectorXd::Zero(me_);

  auto true_violation = [&](const Evaluation& e) {
    double v = me_ > 0 ? e.h.cwiseAbs().maxCoeff() : 0.0;
    if (mi_ > 0) v = std::max(v, std::max(0.0, e.gfull.maxCoeff()));
    return v;
  };

  // max(dual, primal, complementarity) residuals, scaled IPOPT-style.
  auto error_norms_at = [&](const Evaluation& e, const Eigen::VectorXd& sv,
                            const Eigen::VectorXd& yv, const Eigen::VectorXd& zv,
                            double barrier_mu) {
    Eigen::VectorXd rd = e.grad;
    if (me_ > 0) rd.noalias() += e.jh.transpose() * yv;
    if (mi_ > 0) ineq_.add_jt_times(e.jg, zv, rd);
    const double dual_scale =
        std::max(100.0, (yv.lpNorm<1>() + zv.lpNorm<1>()) /
                            std::max(1, me_ + mi_)) /
        100.0;
    double comp = 0.0, comp_scale = 1.0;
    if (mi_ > 0) {
      comp = (sv.cwiseProduct(zv).array() - barrier_mu).abs().maxCoeff();
      comp_scale = std::max(100.0, zv.lpNorm<1>() / mi_) / 100.0;
    }
    double prim = me_ > 0 ? e.h.cwiseAbs().maxCoeff() : 0.0;
    if (mi_ > 0) prim = std::max(prim, (e.gfull + sv).cwiseAbs().maxCoeff());
    return std::array<double, 3>{rd.cwiseAbs().maxCoeff() / dual_scale, prim,
                                 comp / comp_scale};
  };
  auto error_norms = [&](const Evaluation& e, double barrier_mu) {
    return error_norms_at(e, s, y, z, barrier_mu);
  };

  double nu = 1.0;
  double delta_w_last = 0.0;
  int ls_failures = 0;
  int iter = 0;
  std::string stop_message;

  for (; iter < opts_.max_iterations; ++iter) {
    if (opts_.record_iterates) sol.iterates.push_back(x);

    const auto e0 = error_norms(ev, 0.0);
    if (e0[0] <= opts_.tol_stationarity &&
        true_violation(ev) <= opts_.tol_feasibility &&
        (mi_ == 0 || e0[2] <= opts_.tol_stationarity)) {
      sol.status = SolveStatus::optimal;
      break;
    }
    if (mi_ > 0) {
      const auto emu = error_norms(ev, mu);
      const double floor_mu = opts_.tol_stationarity / 20.0;
      if (std::max({emu[0], emu[1], emu[2]}) <= 10.0 * mu && mu > floor_mu) {
        mu = std::max(opts_.mu_reduce * mu, floor_mu);
        continue;
      }
    }

    Eigen::VectorXd rd = ev.grad;
    if (me_ > 0) rd.noalias() += ev.jh.transpose() * y;
    if (mi_ > 0) ineq_.add_jt_times(ev.jg, z, rd);
    Eigen::VectorXd ri, rc;
    if (mi_ > 0) {
      ri = ev.gfull + s;
      rc = (s.cwiseProduct(z).array() - mu).matrix();
    }

    const Eigen::MatrixXd w = lagrangian_hessian(
        x, y, mi_ > 0 ? z.head(ineq_.n_g).eval() : Eigen::VectorXd());

    const int dim = n_ + me_;
    Eigen::VectorXd rhs(dim);
    {
      Eigen::VectorXd top = -rd;
      if (mi_ > 0) {
        const Eigen::VectorXd sinv_zr =
            (z.cwiseProduct(ri) - rc).cwiseQuotient(s);
        Eigen::VectorXd jt = Eigen::VectorXd::Zero(n_);
        ineq_.add_jt_times(ev.jg, sinv_zr, jt);
        top -= jt;
      }
      rhs.head(n_) = top;
      if (me_ > 0) rhs.tail(me_) = -ev.h;
    }

    Eigen::MatrixXd hblock = w;
    if (mi_ > 0) ineq_.add_weighted_gram(ev.jg, z.cwiseQuotient(s), hblock);

    Eigen::VectorXd step;
    double delta_w = 0.0, delta_c = 0.0;
    SymIndefSolver kkt_solver;
    for (int attempt = 0; attempt < 40; ++attempt) {
      Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(dim, dim);
      kkt.topLeftCorner(n_, n_) = hblock;
      for (int j = 0; j < n_; ++j) kkt(j, j) += delta_w;
      if (me_ > 0) {
        kkt.bottomLeftCorner(me_, n_) = ev.jh;
        kkt.topRightCorner(n_, me_) = ev.jh.transpose();
        for (int j = 0; j < me_; ++j) kkt(n_ + j, n_ + j) = -delta_c;
      }
      bool ok = kkt_solver.factorize(kkt);
      int zero = 0;
      if (ok) {
        const auto [pos, neg, zer] = kkt_solver.inertia();
        zero = zer;
        ok = pos == n_ && neg == me_ && zer == 0;
        if (!ok)
          log_trace("ipm kkt attempt {}: inertia=({},{},{}) need=({},{},0) "
                    "dw={:.1e} dc={:.1e}",
                    attempt, pos, neg, zer, n_, me_, delta_w, delta_c);
      } else {
        zero = kkt_solver.singular() ? 1 : 0;
        log_trace("ipm kkt attempt {}: factorization failed (singular={}) "
                  "dw={:.1e} dc={:.1e}",
                  attempt, kkt_solver.singular(), delta_w, delta_c);
      }
      if (ok) {
        step = kkt_solver.solve(rhs);
        ok = step.allFinite();
      }
      if (ok) {
        delta_w_last = delta_w;
        break;
      }
      if (zero > 0) delta_c = delta_c == 0.0 ? 1e-8 : delta_c * 10.0;
      delta_w = delta_w == 0.0 ? std::max(1e-4, delta_w_last / 3.0)
                               : delta_w * 10.0;
      if (delta_w > 1e12) break;
      step.resize(0);
    }
    if (step.size() == 0) {
      sol.status = SolveStatus::max_iter;
      stop_message = "KKT factorization failed";
      break;
    }

    const Eigen::VectorXd dx = step.head(n_);
    Eigen::VectorXd dy;
    if (me_ > 0) dy = step.tail(me_);
    Eigen::VectorXd ds, dz;
    if (mi_ > 0) {
      ds = -ri - ineq_.j_times(ev.jg, dx);
      dz = (-rc - z.cwiseProduct(ds)).cwiseQuotient(s);
    }

    const double tau = std::max(0.99, 1.0 - mu);
    double alpha_max = 1.0, alpha_z = 1.0;
    for (int k = 0; k < mi_; ++k) {
      if (ds(k) < 0) alpha_max = std::min(alpha_max, -tau * s(k) / ds(k));
      if (dz(k) < 0) alpha_z = std::min(alpha_z, -tau * z(k) / dz(k));
    }

    // Fresh merit weight from the current multiplier scale (allowed to
    // shrink again once a dual spike passes).
    nu = std::max({1.0, 2.0 * (me_ ? y.cwiseAbs().maxCoeff() : 0.0),
                   2.0 * (mi_ ? z.cwiseAbs().maxCoeff() : 0.0)});
    auto merit = [&](const Evaluation& e, const Eigen::VectorXd& sv) {
      double m = e.f;
      for (int k = 0; k < mi_; ++k) m -= mu * std::log(sv(k));
      if (me_ > 0) m += nu * e.h.lpNorm<1>();
      if (mi_ > 0) m += nu * (e.gfull + sv).lpNorm<1>();
      return m;
    };
    const double viol0 = (me_ ? ev.h.lpNorm<1>() : 0.0) +
                         (mi_ ? (ev.gfull + s).lpNorm<1>() : 0.0);
    auto directional = [&]() {
      double d = ev.grad.dot(dx);
      for (int k = 0; k < mi_; ++k) d -= mu * ds(k) / s(k);
      d -= nu * viol0;
      return d;
    };
    double d_merit = directional();
    if (d_merit > 0 && viol0 > 1e-14) {
      // Raise the infeasibility weight until the step is a descent direction.
      nu += (d_merit + 1.0) / viol0;
      d_merit = directional();
    }

    const double err0 =
        std::max({emu_now[0], emu_now[1], emu_now[2]});
    const double merit0 = merit(ev, s);
    double alpha = alpha_max;
    Evaluation ev_try;
    bool accepted = false;
    for (int ls = 0; ls < 12; ++ls) {
      const Eigen::VectorXd x_try = x + alpha * dx;
      Eigen::VectorXd s_try;
      if (mi_ > 0) s_try = s + alpha * ds;
      evaluate(x_try, ev_try, true);
      const double m_try = merit(ev_try, s_try);
      bool ok = std::isfinite(m_try) &&
                m_try <= merit0 + 1e-4 * alpha * std::min(d_merit, 0.0);
      if (!ok && std::isfinite(m_try)) {
        // Fall back on primal-dual residual decrease: near the central path
        // the merit comparison drowns in noise while the Newton step still
        // contracts the KKT error.
        const Eigen::VectorXd y_try = me_ ? (y + alpha * dy).eval() : y;
        const Eigen::VectorXd z_try =
            mi_ ? (z + std::min(alpha, alpha_z) * dz).eval() : z;
        const auto e_try = error_norms_at(ev_try, s_try, y_try, z_try, mu);
        ok = std::max({e_try[0], e_try[1], e_try[2]}) <=
             (1.0 - 1e-3 * alpha) * err0;
      }
      if (ok) {
        x = x_try;
        if (mi_ > 0) s = s_try;
        ev = ev_try;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (accepted) {
      ls_failures = 0;
    } else {
      if (++ls_failures >= 5) {
        sol.status = true_violation(ev) > 1e3 * opts_.tol_feasibility
                         ? SolveStatus::infeasible
                         : SolveStatus::max_iter;
        stop_message = "line search stalled";
        break;
      }
      alpha = 1e-4 * alpha_max;
      x += alpha * dx;
      if (mi_ > 0) s += alpha * ds;
      evaluate(x, ev, true);
    }
    if (me_ > 0) y += alpha * dy;
    if (mi_ > 0) z += std::min(alpha_z, std::max(alpha, 1e-4 * alpha_z)) * dz;

    log_trace("ipm iter {:3d} mu={:.2e} f={:+.10e} viol={:.2e} alpha={:.2e}",
              iter, mu, ev.f, true_violation(ev), alpha);
  }

  if (iter >= opts_.max_iterations && sol.status != SolveStatus::optimal) {
    sol.status = SolveStatus::max_iter;
    if (stop_message.empty()) stop_message = "iteration limit reached";
  }

  const auto efin = error_norms(ev, 0.0);
  sol.x = x;
  sol.objective = ev.f;
  sol.kkt_stationarity = efin[0];
  sol.max_constraint_violation = true_violation(ev);
  sol.iterations = iter;
  sol.eq_multipliers = y;
  sol.ineq_multipliers = mi_ > 0 ? z.head(ineq_.n_g).eval() : Eigen::VectorXd();
  sol.message = stop_message;
  return sol;
}

}  // namespace

Solution solve(const ProblemSpec& problem, const Eigen::VectorXd& x0,
               const SolverOptions& opts) {
  if (problem.n_vars <= 0 || !problem.objective)
    throw std::invalid_argument("solve: problem has no variables or objective");
  if (x0.size() != problem.n_vars)
    throw std::invalid_argument("solve: x0 dimension mismatch");
  if (problem.lower.size() != problem.n_vars ||
      problem.upper.size() != problem.n_vars)
    throw std::invalid_argument("solve: bound dimension mismatch");
  InteriorPoint ipm(problem, opts);
  return ipm.run(x0);
}

}  // namespace gridcascade
