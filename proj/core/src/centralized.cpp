#include <fmt/core.h>

#include <limits>

#include "gridcascade/harness.hpp"
#include "gridcascade/log.hpp"
#include "network_builder.hpp"

namespace gridcascade {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kMaxCentralizedBuses = 40;
}  // namespace

CentralizedResult solve_centralized(const CaseData& data, Scenario scenario,
                                    double price, double lambda) {
  if (static_cast<int>(data.buses.size()) > kMaxCentralizedBuses)
    throw std::invalid_argument(
        fmt::format("centralized solve guarded to {} buses, case has {}",
                    kMaxCentralizedBuses, data.buses.size()));

  const Partition part = partition_case(data);
  auto dataptr = std::make_shared<detail::NetworkProblemData>();
  dataptr->sub = full_network_subcase(data);
  const Subcase& sub = dataptr->sub;
  const int nb = static_cast<int>(sub.buses.size());
  const NetworkState base = solve_base_powerflow(sub);
  const WeightSet weights =
      compute_weights(data, part, sub, base, scenario, price);

  VariableLayout lay;
  ProblemSpec spec;
  std::vector<std::string> names;
  std::vector<double> lo, hi, x0v;
  auto add_var = [&](const std::string& name, double l, double h, double x) {
    names.push_back(name);
    lo.push_back(l);
    hi.push_back(h);
    x0v.push_back(x);
    return static_cast<int>(names.size()) - 1;
  };

  lay.v_start = 0;
  for (int i = 0; i < nb; ++i)
    add_var(fmt::format("v[{}]", sub.buses[i].id), sub.buses[i].v_min,
            sub.buses[i].v_max, base.v(i));
  lay.delta_start = nb;
  for (int i = 0; i < nb; ++i)
    add_var(fmt::format("delta[{}]", sub.buses[i].id), -kInf, kInf,
            base.delta(i));
  lay.p_grid = add_var("p_grid", -kInf, kInf, 0.0);
  lay.q_grid = add_var("q_grid", -kInf, kInf, 0.0);
  for (const DgUnit& d : sub.dgs) {
    lay.p_dg.push_back(add_var(fmt::format("p_dg[{}]", d.bus), d.p_min, d.p_max,
                               0.5 * (d.p_min + d.p_max)));
    lay.q_dg.push_back(add_var(fmt::format("q_dg[{}]", d.bus), d.q_min, d.q_max,
                               0.5 * (d.q_min + d.q_max)));
  }
  for (const SmartBuildingSpec& sb : sub.sbs) {
    lay.p_b[sb.bus] = add_var(fmt::format("p_b[{}]", sb.bus), sb.pb_min,
                              sb.pb_max, sb.total_load - sb.pv_forecast);
    const int p_l = add_var(fmt::format("sb{}:p_l", sb.bus), sb.firm_load(),
                            sb.total_load, sb.total_load);
    const int p_pv =
        add_var(fmt::format("sb{}:p_pv", sb.bus), 0.0, sb.pv_forecast,
                sb.pv_forecast);
    const int p_dis =
        add_var(fmt::format("sb{}:p_dis", sb.bus), 0.0, sb.bess.rate_max, 0.0);
    const int p_ch =
        add_var(fmt::format("sb{}:p_ch", sb.bus), 0.0, sb.bess.rate_max, 0.0);
    const int e = add_var(fmt::format("sb{}:e", sb.bus), sb.bess.e_min,
                          sb.bess.e_capacity, sb.bess.e_initial);
    lay.sb_internal[sb.bus] = {p_l, p_pv, p_dis, p_ch, e};
  }

  const int n = static_cast<int>(names.size());
  lay.n = n;
  spec.n_vars = n;
  spec.var_names = std::move(names);
  spec.lower = Eigen::Map<Eigen::VectorXd>(lo.data(), n);
  spec.upper = Eigen::Map<Eigen::VectorXd>(hi.data(), n);
  Eigen::VectorXd x0 = Eigen::Map<Eigen::VectorXd>(x0v.data(), n);

  dataptr->n_vars = n;
  dataptr->v_start = lay.v_start;
  dataptr->d_start = lay.delta_start;
  dataptr->fixed_delta_pos = sub.slack_pos;

  const double basem = sub.base_mva;
  dataptr->sched_p_const.setZero(nb);
  dataptr->sched_q_const.setZero(nb);
  dataptr->p_contrib.assign(nb, {});
  dataptr->q_contrib.assign(nb, {});
  for (int i = 0; i < nb; ++i) {
    dataptr->sched_p_const(i) = -sub.buses[i].p_demand / basem;
    dataptr->sched_q_const(i) = -sub.buses[i].q_demand / basem;
  }
  dataptr->p_contrib[sub.slack_pos].push_back({lay.p_grid, 1.0 / basem});
  dataptr->q_contrib[sub.slack_pos].push_back({lay.q_grid, 1.0 / basem});
  for (size_t k = 0; k < sub.dgs.size(); ++k) {
    const int pos = sub.pos_of(sub.dgs[k].bus);
    dataptr->p_contrib[pos].push_back({lay.p_dg[k], 1.0 / basem});
    dataptr->q_contrib[pos].push_back({lay.q_dg[k], 1.0 / basem});
  }
  for (const SmartBuildingSpec& sb : sub.sbs) {
    const int pos = sub.pos_of(sb.bus);
    dataptr->sched_p_const(pos) = 0.0;
    dataptr->sched_q_const(pos) = 0.0;
    dataptr->p_contrib[pos].push_back({lay.p_b.at(sb.bus), -1e-3 / basem});
  }

  // Building balance and storage coupling as extra equality rows.
  for (const SmartBuildingSpec& sb : sub.sbs) {
    const auto& in = lay.sb_internal.at(sb.bus);
    const double eta = sb.bess.efficiency;
    detail::NetworkProblemData::LinearRow balance;
    balance.terms = {{lay.p_b.at(sb.bus), 1.0}, {in[1], 1.0}, {in[2], 1.0},
                     {in[3], -1.0},            {in[0], -1.0}};
    dataptr->extra_eq.push_back(balance);
    detail::NetworkProblemData::LinearRow soc;
    soc.terms = {{in[4], 1.0}, {in[2], 1.0 / eta}, {in[3], -eta}};
    soc.constant = -sb.bess.e_initial;
    dataptr->extra_eq.push_back(soc);
  }

  dataptr->smax_pu2.reserve(sub.lines.size());
  for (const Line& l : sub.lines) {
    const double s = l.s_max / basem;
    dataptr->smax_pu2.push_back(s * s);
  }

  // Sum of every layer's objective at shared variables: the distribution
  // terms, each microgrid's terms, and the raw building costs.
  dataptr->linear.push_back({lay.p_grid, weights.w1 * price});
  auto dg_index = [&sub](int bus) {
    for (size_t k = 0; k < sub.dgs.size(); ++k)
      if (sub.dgs[k].bus == bus) return static_cast<int>(k);
    throw std::logic_error("dg lookup");
  };
  for (const DgUnit& d : part.dist.dgs)
    dataptr->linear.push_back(
        {lay.p_dg[dg_index(d.bus)], weights.w2 * d.cost});
  for (const SmartBuildingSpec& sb : part.dist.sbs)
    dataptr->linear.push_back({lay.p_b.at(sb.bus), weights.w3 * price});
  for (const Subcase& mg : part.mgs) {
    const WeightSet::MgWeights& w = weights.mg.at(mg.mg_id);
    for (const DgUnit& d : mg.dgs)
      dataptr->linear.push_back({lay.p_dg[dg_index(d.bus)], w.w5 * d.cost});
    for (const SmartBuildingSpec& sb : mg.sbs)
      dataptr->linear.push_back({lay.p_b.at(sb.bus), w.w6 * price});
  }
  for (const SmartBuildingSpec& sb : sub.sbs)
    dataptr->linear.push_back({lay.p_b.at(sb.bus), price});

  // Exchange damping on the tie flows, measured at the MG end as in the
  // layered problems; (p, q) there are the MW-scale flows over base_mva.
  if (scenario == Scenario::case2) {
    for (const MicrogridSpec& m : data.microgrids) {
      const WeightSet::MgWeights& w = weights.mg.at(m.id);
      const Line& tie = data.lines[m.tie_line - 1];
      const bool mg_is_to = tie.to_bus == m.boundary_bus_mg;
      const double coeff =
          (weights.w4 + w.w7) * lambda * basem * basem;  // pu^2 -> MW^2
      if (coeff != 0.0)
        dataptr->flow_quads.push_back(
            {m.tie_line - 1, coeff, /*from_end=*/!mg_is_to});
    }
  }

  detail::wire_network_problem(spec, dataptr);

  {
    const ScheduledInjections sched = base_case_injections(sub);
    const Eigen::VectorXcd inj = complex_injections(base, sub.y);
    x0(lay.p_grid) =
        (inj(sub.slack_pos).real() - sched.p(sub.slack_pos)) * basem;
    x0(lay.q_grid) =
        (inj(sub.slack_pos).imag() - sched.q(sub.slack_pos)) * basem;
  }

  SolverOptions opts;
  opts.max_iterations = 300;
  CentralizedResult out;
  out.solution = solve(spec, x0, opts);
  out.objective = out.solution.objective;
  log_info("centralized {}: {} f={:.6e} iters={}", to_string(scenario),
           to_string(out.solution.status), out.objective,
           out.solution.iterations);

  Report& rep = out.report;
  rep.scenario = to_string(scenario);
  rep.converged = out.solution.status == SolveStatus::optimal;
  rep.iterations = out.solution.iterations;
  const Eigen::VectorXd& x = out.solution.x;
  for (const SmartBuildingSpec& sb : sub.sbs) {
    const auto& in = lay.sb_internal.at(sb.bus);
    rep.sb_dispatch.push_back({sb.bus, x(in[0]), x(in[2]) - x(in[3]), x(in[1]),
                               x(lay.p_b.at(sb.bus))});
  }
  std::sort(rep.sb_dispatch.begin(), rep.sb_dispatch.end(),
            [](const auto& a, const auto& b) { return a.bus < b.bus; });
  for (size_t k = 0; k < sub.dgs.size(); ++k)
    rep.dg_dispatch.push_back(
        {sub.dgs[k].bus, x(lay.p_dg[k]), x(lay.q_dg[k])});
  std::sort(rep.dg_dispatch.begin(), rep.dg_dispatch.end(),
            [](const auto& a, const auto& b) { return a.bus < b.bus; });
  rep.grid_p = x(lay.p_grid);
  rep.grid_q = x(lay.q_grid);
  NetworkState st;
  st.v = x.segment(lay.v_start, nb);
  st.delta = x.segment(lay.delta_start, nb);
  for (int i = 0; i < nb; ++i)
    rep.bus_table.push_back({sub.buses[i].id, st.v(i), st.delta(i)});
  std::sort(rep.bus_table.begin(), rep.bus_table.end(),
            [](const auto& a, const auto& b) { return a.bus < b.bus; });
  for (const MicrogridSpec& m : data.microgrids) {
    const Line& tie = data.lines[m.tie_line - 1];
    const bool mg_is_to = tie.to_bus == m.boundary_bus_mg;
    // Exchange seen at the MG boundary bus: minus the MG-end sending flow.
    const LineFlowDerivs mg_end =
        line_flow_derivs_oriented(st, sub, m.tie_line - 1, !mg_is_to);
    const double pmg = -mg_end.flow.p;
    const double qmg = -mg_end.flow.q;
    rep.mg_exchange.push_back(
        {m.id, pmg * basem, qmg * basem, std::hypot(pmg, qmg) * basem});
  }
  std::sort(rep.mg_exchange.begin(), rep.mg_exchange.end(),
            [](const auto& a, const auto& b) { return a.mg_id < b.mg_id; });
  return out;
}

}  // namespace gridcascade
