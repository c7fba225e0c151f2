#include "gridcascade/subproblems.hpp"

#include <fmt/core.h>

#include <cmath>

#include "network_builder.hpp"

namespace gridcascade {

std::string to_string(Scenario s) {
  return s == Scenario::case1 ? "case1" : "case2";
}

Scenario scenario_from_string(const std::string& s) {
  if (s == "case1") return Scenario::case1;
  if (s == "case2") return Scenario::case2;
  throw std::invalid_argument(fmt::format("unknown scenario '{}'", s));
}

double evaluate_penalty(const Eigen::VectorXd& alpha, const Eigen::VectorXd& beta,
                        const Eigen::VectorXd& t, const Eigen::VectorXd& r) {
  if (alpha.size() != beta.size() || alpha.size() != t.size() ||
      t.size() != r.size())
    throw std::invalid_argument("evaluate_penalty: length mismatch");
  double out = 0.0;
  for (Eigen::Index k = 0; k < t.size(); ++k) {
    const double d = t(k) - r(k);
    out += alpha(k) * std::abs(d);
    const double q = beta(k) * d;
    out += q * q;
  }
  return out;
}

SbDecision decode_sb_solution(const Eigen::VectorXd& x, const SbLayout& l) {
  SbDecision d;
  d.p_b = x(l.p_b);
  d.p_l = x(l.p_l);
  d.p_pv = x(l.p_pv);
  d.p_ess = x(l.p_dis) - x(l.p_ch);
  d.e = x(l.e);
  return d;
}

namespace {

constexpr double kWeightFloor = 1e-6;

double weight_of(double term) {
  return 1.0 / std::max(std::abs(term), kWeightFloor);
}

/// Building exchange in the coordination start point, kW.
double base_pb(const SmartBuildingSpec& sb) {
  return sb.total_load - sb.pv_forecast;
}

}  // namespace

WeightSet compute_weights(const CaseData& data, const Partition& partition,
                          const Subcase& full, const NetworkState& base_state,
                          Scenario scenario, double price) {
  WeightSet w;

  // Grid purchase at the slack: net injection minus the local schedule.
  const ScheduledInjections sched = base_case_injections(full);
  const Eigen::VectorXcd inj = complex_injections(base_state, full.y);
  const double p_grid_mw =
      (inj(full.slack_pos).real() - sched.p(full.slack_pos)) * full.base_mva;
  w.w1 = weight_of(price * p_grid_mw);

  double dg_cost = 0.0;
  for (const DgUnit& d : partition.dist.dgs)
    dg_cost += d.cost * 0.5 * (d.p_min + d.p_max);
  w.w2 = weight_of(dg_cost);

  double sb_cost = 0.0;  // price * kW, matching the problem objectives
  for (const SmartBuildingSpec& sb : partition.dist.sbs)
    sb_cost += price * base_pb(sb);
  w.w3 = weight_of(sb_cost);

  double exch_total = 0.0;
  for (const MicrogridSpec& m : data.microgrids) {
    const LineFlow f = line_flow(base_state, full, m.tie_line - 1);
    const double p = f.p * full.base_mva;
    const double q = f.q * full.base_mva;
    const double term = data.lambda * (p * p + q * q);
    exch_total += term;

    const Subcase& mg = partition.mg_by_id(m.id);
    WeightSet::MgWeights mw;
    double mg_dg = 0.0;
    for (const DgUnit& d : mg.dgs) mg_dg += d.cost * 0.5 * (d.p_min + d.p_max);
    mw.w5 = weight_of(mg_dg);
    double mg_sb = 0.0;
    for (const SmartBuildingSpec& sb : mg.sbs) mg_sb += price * base_pb(sb);
    mw.w6 = weight_of(mg_sb);
    mw.w7 = scenario == Scenario::case1 ? 0.0 : weight_of(term);
    w.mg[m.id] = mw;
  }
  w.w4 = scenario == Scenario::case1 ? 0.0 : weight_of(exch_total);
  return w;
}

}  // namespace gridcascade
