#include "gridcascade/harness.hpp"

#include <fmt/core.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "gridcascade/log.hpp"

namespace gridcascade {

ReportFormat report_format_from_string(const std::string& s) {
  if (s == "json") return ReportFormat::json;
  if (s == "csv") return ReportFormat::csv;
  throw std::invalid_argument(fmt::format("unknown report format '{}'", s));
}

namespace {

constexpr double kPuTol = 1e-6;   // network-side audit slack
constexpr double kKwTol = 1e-3;   // building-side audit slack

void audit_fail(const std::string& what) {
  throw AtcError(fmt::format("result audit failed: {}", what));
}

/// Scheduled injections implied by a stored subproblem solution, re-derived
/// from the layout rather than the problem callbacks.
ScheduledInjections injections_from_solution(const Subcase& sub,
                                             const VariableLayout& lay,
                                             const Eigen::VectorXd& x) {
  const int nb = static_cast<int>(sub.buses.size());
  ScheduledInjections inj;
  inj.p.resize(nb);
  inj.q.resize(nb);
  for (int i = 0; i < nb; ++i) {
    inj.p(i) = -sub.buses[i].p_demand / sub.base_mva;
    inj.q(i) = -sub.buses[i].q_demand / sub.base_mva;
  }
  if (lay.p_grid >= 0) {
    inj.p(sub.slack_pos) += x(lay.p_grid) / sub.base_mva;
    inj.q(sub.slack_pos) += x(lay.q_grid) / sub.base_mva;
  }
  for (size_t k = 0; k < sub.dgs.size(); ++k) {
    const int pos = sub.pos_of(sub.dgs[k].bus);
    inj.p(pos) += x(lay.p_dg[k]) / sub.base_mva;
    inj.q(pos) += x(lay.q_dg[k]) / sub.base_mva;
  }
  for (const SmartBuildingSpec& sb : sub.sbs) {
    const int pos = sub.pos_of(sb.bus);
    inj.p(pos) = -x(lay.p_b.at(sb.bus)) * 1e-3 / sub.base_mva;
    inj.q(pos) = 0.0;
  }
  if (sub.is_dist()) {
    for (const auto& ex : sub.exchange_buses) {
      const auto [pi, qi] = lay.mg_exchange.at(ex.mg_id);
      inj.p(ex.pos) = -x(pi) / sub.base_mva;
      inj.q(ex.pos) = -x(qi) / sub.base_mva;
    }
  } else {
    const auto [pi, qi] = lay.mg_exchange.at(sub.mg_id);
    inj.p(sub.boundary_dist_pos) = x(pi) / sub.base_mva;
    inj.q(sub.boundary_dist_pos) = x(qi) / sub.base_mva;
  }
  return inj;
}

void audit_network_solution(const Subcase& sub, const VariableLayout& lay,
                            const Eigen::VectorXd& x, int k) {
  NetworkState st;
  const int nb = static_cast<int>(sub.buses.size());
  st.v = x.segment(lay.v_start, nb);
  st.delta = x.segment(lay.delta_start, nb);

  const ScheduledInjections sched = injections_from_solution(sub, lay, x);
  const PowerFlowResiduals res = residuals(st, sub, sched);
  if (res.max_abs() > kPuTol)
    audit_fail(fmt::format("'{}' iteration {}: power-flow residual {:.3e} pu",
                           sub.name, k, res.max_abs()));

  for (int i = 0; i < nb; ++i) {
    if (st.v(i) < sub.buses[i].v_min - kPuTol ||
        st.v(i) > sub.buses[i].v_max + kPuTol)
      audit_fail(fmt::format("'{}' iteration {}: bus {} voltage {:.5f} outside limits",
                             sub.name, k, sub.buses[i].id, st.v(i)));
  }
  for (size_t li = 0; li < sub.lines.size(); ++li) {
    const LineFlow f = line_flow(st, sub, static_cast<int>(li));
    const double smax = sub.lines[li].s_max / sub.base_mva;
    if (f.p * f.p + f.q * f.q > smax * smax + kPuTol)
      audit_fail(fmt::format("'{}' iteration {}: line {} flow {:.4f} exceeds {:.4f} pu",
                             sub.name, k, li + 1, f.s, smax));
  }
  for (size_t d = 0; d < sub.dgs.size(); ++d) {
    const DgUnit& dg = sub.dgs[d];
    const double p = x(lay.p_dg[d]), q = x(lay.q_dg[d]);
    if (p < dg.p_min - kKwTol * 1e-3 || p > dg.p_max + kKwTol * 1e-3 ||
        q < dg.q_min - kKwTol * 1e-3 || q > dg.q_max + kKwTol * 1e-3)
      audit_fail(fmt::format("'{}' iteration {}: DG at bus {} outside limits",
                             sub.name, k, dg.bus));
  }
}

void audit_sb(const SmartBuildingSpec& sb, const SbDecision& d) {
  const double balance = d.p_b + d.p_pv + d.p_ess - d.p_l;
  if (std::abs(balance) > kKwTol)
    audit_fail(fmt::format("building {}: balance off by {:.4g} kW", sb.bus, balance));
  const double eta = sb.bess.efficiency;
  const double e_expect = d.p_ess >= 0 ? sb.bess.e_initial - d.p_ess / eta
                                       : sb.bess.e_initial - eta * d.p_ess;
  if (std::abs(d.e - e_expect) > kKwTol)
    audit_fail(fmt::format("building {}: stored energy {:.4g} vs coupling {:.4g}",
                           sb.bus, d.e, e_expect));
  if (d.p_l < sb.firm_load() - kKwTol || d.p_l > sb.total_load + kKwTol)
    audit_fail(fmt::format("building {}: load {:.4g} outside limits", sb.bus, d.p_l));
  if (d.p_pv < -kKwTol || d.p_pv > sb.pv_forecast + kKwTol)
    audit_fail(fmt::format("building {}: pv {:.4g} outside forecast", sb.bus, d.p_pv));
  if (std::abs(d.p_ess) > sb.bess.rate_max + kKwTol)
    audit_fail(fmt::format("building {}: storage rate {:.4g} exceeded", sb.bus, d.p_ess));
  if (d.e < sb.bess.e_min - kKwTol || d.e > sb.bess.e_capacity + kKwTol)
    audit_fail(fmt::format("building {}: energy {:.4g} outside limits", sb.bus, d.e));
  if (d.p_b < sb.pb_min - kKwTol || d.p_b > sb.pb_max + kKwTol)
    audit_fail(fmt::format("building {}: exchange {:.4g} outside limits", sb.bus, d.p_b));
}

}  // namespace

void audit_result(const AtcResult& result, const CaseData& data) {
  const Partition part = partition_case(data);
  const VariableLayout dist_lay = dsc_variable_layout(part.dist);
  std::map<int, VariableLayout> mg_lay;
  for (const Subcase& mg : part.mgs) mg_lay[mg.mg_id] = mgc_variable_layout(mg);

  // Every accepted network solution along the trace satisfies the power-flow
  // equations; the final iterate additionally passes the box and flow audit.
  for (const AtcIterationRecord& rec : result.trace) {
    for (const auto& [name, x] : rec.solutions) {
      if (name == "dist") {
        audit_network_solution(part.dist, dist_lay, x, rec.k);
      } else if (name.rfind("mg:", 0) == 0) {
        const int id = std::stoi(name.substr(3));
        audit_network_solution(part.mg_by_id(id), mg_lay.at(id), x, rec.k);
      }
    }
  }
  for (const SmartBuildingSpec& sb : data.smart_buildings)
    audit_sb(sb, result.sb.at(sb.bus));
}

Report report_from_atc(const AtcResult& result, Scenario scenario) {
  Report rep;
  rep.scenario = to_string(scenario);
  rep.converged = result.converged;
  rep.iterations = result.iterations;
  for (const auto& [bus, d] : result.sb)
    rep.sb_dispatch.push_back({bus, d.p_l, d.p_ess, d.p_pv, d.p_b});
  for (const auto& [bus, pq] : result.dg)
    rep.dg_dispatch.push_back({bus, pq.first, pq.second});
  rep.grid_p = result.p_grid;
  rep.grid_q = result.q_grid;
  for (const auto& [bus, vd] : result.bus_voltage)
    rep.bus_table.push_back({bus, vd.first, vd.second});
  for (const auto& [id, pqs] : result.mg_exchange)
    rep.mg_exchange.push_back({id, pqs[0], pqs[1], pqs[2]});
  for (const AtcIterationRecord& r : result.trace) {
    Report::TraceRow row;
    row.k = r.k;
    row.f_star = r.f_star;
    row.mismatch = r.link_mismatch;
    for (const auto& [id, a] : r.alpha)
      row.alpha_max[id] = a.size() ? a.cwiseAbs().maxCoeff() : 0.0;
    for (const auto& [id, b] : r.beta)
      row.beta_max[id] = b.size() ? b.maxCoeff() : 0.0;
    rep.trace.push_back(std::move(row));
  }
  return rep;
}

Report run_scenario(const std::filesystem::path& case_path,
                    const ScenarioConfig& config) {
  CaseData data = load_case(case_path);
  if (config.price_override) data.price = *config.price_override;
  if (config.lambda_override) data.lambda = *config.lambda_override;
  validate_case(data);

  const AtcResult result = run_atc(data, config.scenario, config.atc);
  audit_result(result, data);
  Report rep = report_from_atc(result, config.scenario);
  if (!config.out_dir.empty()) emit_report(rep, config.format, config.out_dir);
  return rep;
}

}  // namespace gridcascade
