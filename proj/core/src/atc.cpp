#include "gridcascade/atc.hpp"

#include <fmt/core.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <set>

#include "gridcascade/log.hpp"

namespace gridcascade {

double SharedVariableLink::max_mismatch() const {
  return (t - r).cwiseAbs().maxCoeff();
}

void AtcConfig::validate() const {
  if (!(eps1 > 0) || !(eps2 > 0))
    throw std::invalid_argument("atc: tolerances must be positive");
  if (sigma < 1.0) throw std::invalid_argument("atc: sigma must be >= 1");
  if (!(beta0 > 0)) throw std::invalid_argument("atc: beta0 must be positive");
  if (alpha0 < 0) throw std::invalid_argument("atc: alpha0 must be non-negative");
  if (max_iterations < 1)
    throw std::invalid_argument("atc: max_iterations must be >= 1");
}

double AtcResult::total_core_objective() const {
  if (trace.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& [_, v] : trace.back().f_star_core) sum += v;
  return sum;
}

ConvergenceCheck check_convergence(const std::map<std::string, double>& prev_f,
                                   const std::map<std::string, double>& curr_f,
                                   const std::vector<SharedVariableLink>& links,
                                   double eps1, double eps2) {
  constexpr double kDivGuard = 1e-12;
  ConvergenceCheck out;
  for (const auto& [name, f] : curr_f) {
    const auto it = prev_f.find(name);
    if (it == prev_f.end()) {
      out.max_rel_obj_change = std::numeric_limits<double>::infinity();
      break;
    }
    const double rel =
        std::abs(f - it->second) / std::max(std::abs(f), kDivGuard);
    out.max_rel_obj_change = std::max(out.max_rel_obj_change, rel);
  }
  out.objectives_ok = out.max_rel_obj_change <= eps1;
  out.links_ok = true;
  for (const SharedVariableLink& l : links) {
    const double m = l.max_mismatch();
    out.max_link_mismatch = std::max(out.max_link_mismatch, m);
    if (m > eps2) out.links_ok = false;
  }
  out.converged = out.objectives_ok && out.links_ok;
  return out;
}

void update_coefficients(SharedVariableLink& link, double sigma) {
  const Eigen::VectorXd mismatch = link.t - link.r;
  link.alpha += 2.0 * link.beta.cwiseProduct(link.beta).cwiseProduct(mismatch);
  link.beta *= sigma;
}

namespace {

struct SbSlot {
  SmartBuildingSpec spec;
  std::string owner;  // "dist" or "mg:<id>"
  int link_index = -1;
};

double smoothed_abs(double u, double eps) { return std::sqrt(u * u + eps * eps); }

/// The penalty value exactly as the solver saw it (smoothed L1 + quadratic),
/// for splitting a solved objective into core and penalty parts.
double solver_penalty(const Eigen::VectorXd& alpha, const Eigen::VectorXd& beta,
                      const Eigen::VectorXd& own, const Eigen::VectorXd& other,
                      double eps) {
  double out = 0.0;
  for (Eigen::Index k = 0; k < own.size(); ++k) {
    const double d = own(k) - other(k);
    out += alpha(k) * smoothed_abs(d, eps);
    const double q = beta(k) * d;
    out += q * q;
  }
  return out;
}

Eigen::VectorXd boundary_values(const Eigen::VectorXd& x, const VariableLayout& lay,
                                int dist_pos, int mg_pos) {
  Eigen::VectorXd v(4);
  v << x(lay.v_start + dist_pos), x(lay.v_start + mg_pos),
      x(lay.delta_start + dist_pos), x(lay.delta_start + mg_pos);
  return v;
}

}  // namespace

AtcResult run_atc(const CaseData& data, Scenario scenario,
                  const AtcConfig& config) {
  config.validate();
  if (config.sigma > 3.0)
    log_info("atc: sigma {} above 3 is known to harden the subproblems", config.sigma);

  const Partition part = partition_case(data);
  const Subcase full = full_network_subcase(data);
  const NetworkState base = solve_base_powerflow(full);
  const WeightSet weights =
      compute_weights(data, part, full, base, scenario, data.price);
  const double price = data.price;
  const double lambda = data.lambda;

  // Shared-variable links, initialized so both copies carry the start point.
  std::vector<SharedVariableLink> links;
  std::map<int, int> mg_link;  // mg id -> link index
  for (const Subcase& mg : part.mgs) {
    const MicrogridSpec* spec = nullptr;
    for (const MicrogridSpec& m : data.microgrids)
      if (m.id == mg.mg_id) spec = &m;
    SharedVariableLink l;
    l.id = fmt::format("mg:{}:boundary-voltage", mg.mg_id);
    l.kind = LinkKind::boundary_voltage_quad;
    l.upper_subsystem = "dist";
    l.lower_subsystem = mg.name;
    l.mg_id = mg.mg_id;
    const int pd = full.pos_of(spec->boundary_bus_dist);
    const int pm = full.pos_of(spec->boundary_bus_mg);
    l.t.resize(4);
    l.t << base.v(pd), base.v(pm), base.delta(pd), base.delta(pm);
    l.r = l.t;
    l.alpha = Eigen::VectorXd::Constant(4, config.alpha0);
    l.beta = Eigen::VectorXd::Constant(4, config.beta0);
    mg_link[mg.mg_id] = static_cast<int>(links.size());
    links.push_back(std::move(l));
  }

  std::vector<SbSlot> sbs;
  for (const SmartBuildingSpec& sb : data.smart_buildings) {
    SbSlot slot;
    slot.spec = sb;
    slot.owner = "dist";
    for (const Subcase& mg : part.mgs)
      for (const SmartBuildingSpec& s : mg.sbs)
        if (s.bus == sb.bus) slot.owner = mg.name;
    sbs.push_back(slot);
  }
  std::sort(sbs.begin(), sbs.end(),
            [](const SbSlot& a, const SbSlot& b) { return a.spec.bus < b.spec.bus; });
  for (SbSlot& slot : sbs) {
    SharedVariableLink l;
    l.id = fmt::format("sb:{}:pb", slot.spec.bus);
    l.kind = LinkKind::sb_exchange;
    l.upper_subsystem = slot.owner;
    l.lower_subsystem = fmt::format("sb:{}", slot.spec.bus);
    l.sb_bus = slot.spec.bus;
    l.t = Eigen::VectorXd::Constant(
        1, slot.spec.total_load - slot.spec.pv_forecast);
    l.r = l.t;
    l.alpha = Eigen::VectorXd::Constant(1, config.alpha0);
    l.beta = Eigen::VectorXd::Constant(1, config.beta0);
    slot.link_index = static_cast<int>(links.size());
    links.push_back(std::move(l));
  }

  // Warm starts from the base power flow.
  std::map<std::string, Eigen::VectorXd> warm;
  auto state_restriction = [&](const Subcase& sub, const VariableLayout& lay,
                               Eigen::VectorXd& x) {
    for (size_t i = 0; i < sub.buses.size(); ++i) {
      const int fp = full.pos_of(sub.buses[i].id);
      x(lay.v_start + static_cast<int>(i)) = base.v(fp);
      x(lay.delta_start + static_cast<int>(i)) = base.delta(fp);
    }
  };
  std::map<int, LineFlow> tie_flow;  // mg id -> base tie flow (dist side, pu)
  for (const MicrogridSpec& m : data.microgrids)
    tie_flow[m.id] = line_flow(base, full, m.tie_line - 1);

  const SolverOptions solver_opts;  // library defaults per module contract

  AtcResult result;
  std::map<std::string, double> prev_f;
  const auto t_start = std::chrono::steady_clock::now();

  int k = 1;
  for (; k <= config.max_iterations; ++k) {
    const auto t_iter = std::chrono::steady_clock::now();
    AtcIterationRecord rec;
    rec.k = k;

    // Building solves (lower layer responds to the current targets).
    for (SbSlot& slot : sbs) {
      SharedVariableLink& link = links[slot.link_index];
      BuiltSbProblem built =
          build_sbc_problem(slot.spec, link.t(0), link.alpha(0), link.beta(0),
                            price);
      const std::string name = link.lower_subsystem;
      Solution sol;
      if (built.spec.affine) {
        sol = solve_linear(built.spec);
      } else {
        const Eigen::VectorXd x0 = warm.count(name) ? warm[name] : built.x0;
        sol = solve(built.spec, x0, solver_opts);
      }
      if (sol.status != SolveStatus::optimal)
        throw AtcError(fmt::format(
            "subproblem '{}' failed at iteration {}: {} ({})", name, k,
            to_string(sol.status), sol.message));
      warm[name] = sol.x;
      link.r(0) = sol.x(built.layout.p_b);
      rec.f_star[name] = sol.objective;
      rec.f_star_core[name] = price * sol.x(built.layout.p_b);
      rec.solutions[name] = sol.x;
      result.sb[slot.spec.bus] = decode_sb_solution(sol.x, built.layout);
    }

    // Microgrid solves: respond to the boundary targets, set building targets.
    for (const Subcase& mg : part.mgs) {
      PenaltyTerms pen;
      {
        const SharedVariableLink& vl = links[mg_link[mg.mg_id]];
        pen.entries.push_back(
            PenaltyEntry{vl.id, vl.t, vl.alpha, vl.beta, mg.mg_id, -1});
      }
      for (const SbSlot& slot : sbs) {
        if (slot.owner != mg.name) continue;
        const SharedVariableLink& sl = links[slot.link_index];
        pen.entries.push_back(
            PenaltyEntry{sl.id, sl.r, sl.alpha, sl.beta, -1, slot.spec.bus});
      }
      BuiltProblem built = build_mgc_problem(mg, weights, pen, lambda, price);
      Eigen::VectorXd x0 = built.x0;
      if (warm.count(mg.name)) {
        x0 = warm[mg.name];
      } else {
        state_restriction(mg, built.layout, x0);
        const auto [pi, qi] = built.layout.mg_exchange.at(mg.mg_id);
        x0(pi) = tie_flow[mg.mg_id].p * full.base_mva;
        x0(qi) = tie_flow[mg.mg_id].q * full.base_mva;
      }
      Solution sol = solve(built.spec, x0, solver_opts);
      if (sol.status != SolveStatus::optimal)
        throw AtcError(fmt::format(
            "subproblem '{}' failed at iteration {}: {} ({})", mg.name, k,
            to_string(sol.status), sol.message));
      warm[mg.name] = sol.x;

      SharedVariableLink& vl = links[mg_link[mg.mg_id]];
      vl.r = boundary_values(sol.x, built.layout, mg.boundary_dist_pos,
                             mg.boundary_mg_pos);
      double penalty = solver_penalty(vl.alpha, vl.beta, vl.r, vl.t,
                                      solver_opts.abs_smoothing);
      for (SbSlot& slot : sbs) {
        if (slot.owner != mg.name) continue;
        SharedVariableLink& sl = links[slot.link_index];
        sl.t(0) = sol.x(built.layout.p_b.at(slot.spec.bus));
        penalty += solver_penalty(sl.alpha, sl.beta, sl.t, sl.r,
                                  solver_opts.abs_smoothing);
      }
      rec.f_star[mg.name] = sol.objective;
      rec.f_star_core[mg.name] = sol.objective - penalty;
      rec.solutions[mg.name] = sol.x;

      const auto [pi, qi] = built.layout.mg_exchange.at(mg.mg_id);
      for (size_t d = 0; d < mg.dgs.size(); ++d)
        result.dg[mg.dgs[d].bus] = {sol.x(built.layout.p_dg[d]),
                                    sol.x(built.layout.q_dg[d])};
      for (size_t i = 0; i < mg.buses.size(); ++i)
        if (static_cast<int>(i) != mg.boundary_dist_pos)
          result.bus_voltage[mg.buses[i].id] = {
              sol.x(built.layout.v_start + static_cast<int>(i)),
              sol.x(built.layout.delta_start + static_cast<int>(i))};
      (void)pi;
      (void)qi;
    }

    // Distribution solve: owns the boundary-voltage and dist-building targets.
    {
      PenaltyTerms pen;
      for (const Subcase& mg : part.mgs) {
        const SharedVariableLink& vl = links[mg_link[mg.mg_id]];
        pen.entries.push_back(
            PenaltyEntry{vl.id, vl.r, vl.alpha, vl.beta, mg.mg_id, -1});
      }
      for (const SbSlot& slot : sbs) {
        if (slot.owner != "dist") continue;
        const SharedVariableLink& sl = links[slot.link_index];
        pen.entries.push_back(
            PenaltyEntry{sl.id, sl.r, sl.alpha, sl.beta, -1, slot.spec.bus});
      }
      BuiltProblem built = build_dsc_problem(part.dist, weights, pen, lambda, price);
      Eigen::VectorXd x0 = built.x0;
      if (warm.count("dist")) {
        x0 = warm["dist"];
      } else {
        state_restriction(part.dist, built.layout, x0);
        const ScheduledInjections sched = base_case_injections(full);
        const Eigen::VectorXcd inj = complex_injections(base, full.y);
        x0(built.layout.p_grid) =
            (inj(full.slack_pos).real() - sched.p(full.slack_pos)) * full.base_mva;
        x0(built.layout.q_grid) =
            (inj(full.slack_pos).imag() - sched.q(full.slack_pos)) * full.base_mva;
        for (const auto& [mg_id, pq] : built.layout.mg_exchange) {
          x0(pq.first) = tie_flow[mg_id].p * full.base_mva;
          x0(pq.second) = tie_flow[mg_id].q * full.base_mva;
        }
      }
      Solution sol = solve(built.spec, x0, solver_opts);
      if (sol.status != SolveStatus::optimal)
        throw AtcError(
            fmt::format("subproblem 'dist' failed at iteration {}: {} ({})", k,
                        to_string(sol.status), sol.message));
      warm["dist"] = sol.x;

      double penalty = 0.0;
      for (const Subcase& mg : part.mgs) {
        SharedVariableLink& vl = links[mg_link[mg.mg_id]];
        const auto ex = std::find_if(
            part.dist.exchange_buses.begin(), part.dist.exchange_buses.end(),
            [&](const auto& e) { return e.mg_id == mg.mg_id; });
        vl.t = boundary_values(sol.x, built.layout, ex->dist_pos, ex->pos);
        penalty += solver_penalty(vl.alpha, vl.beta, vl.t, vl.r,
                                  solver_opts.abs_smoothing);
      }
      for (SbSlot& slot : sbs) {
        if (slot.owner != "dist") continue;
        SharedVariableLink& sl = links[slot.link_index];
        sl.t(0) = sol.x(built.layout.p_b.at(slot.spec.bus));
        penalty += solver_penalty(sl.alpha, sl.beta, sl.t, sl.r,
                                  solver_opts.abs_smoothing);
      }
      rec.f_star["dist"] = sol.objective;
      rec.f_star_core["dist"] = sol.objective - penalty;
      rec.solutions["dist"] = sol.x;

      result.p_grid = sol.x(built.layout.p_grid);
      result.q_grid = sol.x(built.layout.q_grid);
      for (size_t d = 0; d < part.dist.dgs.size(); ++d)
        result.dg[part.dist.dgs[d].bus] = {sol.x(built.layout.p_dg[d]),
                                           sol.x(built.layout.q_dg[d])};
      for (const auto& [mg_id, pq] : built.layout.mg_exchange) {
        const double p = sol.x(pq.first), q = sol.x(pq.second);
        result.mg_exchange[mg_id] = {p, q, std::hypot(p, q)};
      }
      std::set<int> exchange_pos;
      for (const auto& ex : part.dist.exchange_buses) exchange_pos.insert(ex.pos);
      for (size_t i = 0; i < part.dist.buses.size(); ++i)
        if (!exchange_pos.count(static_cast<int>(i)))
          result.bus_voltage[part.dist.buses[i].id] = {
              sol.x(built.layout.v_start + static_cast<int>(i)),
              sol.x(built.layout.delta_start + static_cast<int>(i))};
    }

    // Convergence test, then the coefficient update when not yet there.
    for (const SharedVariableLink& l : links) {
      rec.link_mismatch[l.id] = l.max_mismatch();
      rec.alpha[l.id] = l.alpha;
      rec.beta[l.id] = l.beta;
    }
    const ConvergenceCheck conv =
        k >= 2 ? check_convergence(prev_f, rec.f_star, links, config.eps1,
                                   config.eps2)
               : ConvergenceCheck{};
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_iter)
            .count();
    result.trace.push_back(rec);
    log_info("atc k={:3d} max|t-r|={:.3e} d(f)={:.3e} {}", k,
             conv.max_link_mismatch, conv.max_rel_obj_change,
             conv.converged ? "converged" : "");

    if (conv.converged) {
      result.converged = true;
      break;
    }
    for (SharedVariableLink& l : links) update_coefficients(l, config.sigma);
    prev_f = rec.f_star;
  }

  result.iterations = std::min(k, config.max_iterations);
  result.links = links;
  log_info("atc finished: {} in {} iterations ({:.2f} s)",
           result.converged ? "converged" : "not converged", result.iterations,
           std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         t_start)
               .count());
  return result;
}

}  // namespace gridcascade
