#include <fmt/core.h>

#include <algorithm>
#include <set>

#include "network_builder.hpp"

namespace gridcascade {

VariableLayout dsc_variable_layout(const Subcase& dist) {
  return detail::make_network_layout(dist, /*with_grid=*/true).lay;
}

BuiltProblem build_dsc_problem(const Subcase& dist, const WeightSet& weights,
                               const PenaltyTerms& penalties, double lambda,
                               double price) {
  if (!dist.is_dist())
    throw std::invalid_argument("build_dsc_problem: not a distribution subcase");
  if (dist.slack_pos < 0)
    throw std::invalid_argument("build_dsc_problem: subcase has no slack bus");

  auto data = std::make_shared<detail::NetworkProblemData>();
  data->sub = dist;
  const Subcase& sub = data->sub;
  const int nb = static_cast<int>(sub.buses.size());

  BuiltProblem out;
  detail::LayoutBundle bundle = detail::make_network_layout(sub, true);
  VariableLayout& lay = out.layout;
  lay = bundle.lay;
  ProblemSpec& spec = out.spec;
  spec.n_vars = lay.n;
  spec.var_names = std::move(bundle.names);
  spec.lower = std::move(bundle.lower);
  spec.upper = std::move(bundle.upper);
  out.x0 = std::move(bundle.x0);

  data->n_vars = lay.n;
  data->v_start = lay.v_start;
  data->d_start = lay.delta_start;
  data->fixed_delta_pos = dist.slack_pos;

  const double base = sub.base_mva;
  data->sched_p_const.setZero(nb);
  data->sched_q_const.setZero(nb);
  data->p_contrib.assign(nb, {});
  data->q_contrib.assign(nb, {});
  for (int i = 0; i < nb; ++i) {
    data->sched_p_const(i) = -sub.buses[i].p_demand / base;
    data->sched_q_const(i) = -sub.buses[i].q_demand / base;
  }
  data->p_contrib[dist.slack_pos].push_back({lay.p_grid, 1.0 / base});
  data->q_contrib[dist.slack_pos].push_back({lay.q_grid, 1.0 / base});
  for (size_t k = 0; k < sub.dgs.size(); ++k) {
    const int pos = sub.pos_of(sub.dgs[k].bus);
    data->p_contrib[pos].push_back({lay.p_dg[k], 1.0 / base});
    data->q_contrib[pos].push_back({lay.q_dg[k], 1.0 / base});
  }
  for (const SmartBuildingSpec& sb : sub.sbs) {
    // The building is the bus: its net exchange replaces the bus demand, at
    // unity power factor.
    const int pos = sub.pos_of(sb.bus);
    data->sched_p_const(pos) = 0.0;
    data->sched_q_const(pos) = 0.0;
    data->p_contrib[pos].push_back({lay.p_b[sb.bus], -1e-3 / base});
  }
  for (const auto& ex : sub.exchange_buses) {
    // The microgrid draws its exchange from the boundary bus.
    data->sched_p_const(ex.pos) = 0.0;
    data->sched_q_const(ex.pos) = 0.0;
    const auto [pi, qi] = lay.mg_exchange[ex.mg_id];
    data->p_contrib[ex.pos].push_back({pi, -1.0 / base});
    data->q_contrib[ex.pos].push_back({qi, -1.0 / base});
  }

  data->smax_pu2.reserve(sub.lines.size());
  for (const Line& l : sub.lines) {
    const double s = l.s_max / base;
    data->smax_pu2.push_back(s * s);
  }

  // Normalized purchase, generation and building-exchange costs, plus the
  // exchange damping and the consistency penalties.
  data->linear.push_back({lay.p_grid, weights.w1 * price});
  for (size_t k = 0; k < sub.dgs.size(); ++k)
    data->linear.push_back({lay.p_dg[k], weights.w2 * sub.dgs[k].cost});
  for (const SmartBuildingSpec& sb : sub.sbs)
    data->linear.push_back({lay.p_b.at(sb.bus), weights.w3 * price});
  if (weights.w4 != 0.0) {
    for (const auto& ex : sub.exchange_buses) {
      const auto [pi, qi] = lay.mg_exchange[ex.mg_id];
      data->quads.push_back({pi, weights.w4 * lambda, 0.0});
      data->quads.push_back({qi, weights.w4 * lambda, 0.0});
    }
  }

  // Consistency penalties; this layer owns the targets.
  std::set<int> seen_mgs, seen_sbs;
  for (const PenaltyEntry& pe : penalties.entries) {
    if (pe.mg_id >= 0) {
      const auto ex_it =
          std::find_if(sub.exchange_buses.begin(), sub.exchange_buses.end(),
                       [&](const auto& e) { return e.mg_id == pe.mg_id; });
      if (ex_it == sub.exchange_buses.end() || !seen_mgs.insert(pe.mg_id).second)
        throw std::invalid_argument(fmt::format(
            "inconsistent penalty wiring: unknown or repeated microgrid {}",
            pe.mg_id));
      if (pe.other_copy.size() != 4 || pe.alpha.size() != 4 || pe.beta.size() != 4)
        throw std::invalid_argument("boundary-voltage penalty needs 4 components");
      const std::array<int, 4> idx = {lay.v_start + ex_it->dist_pos,
                                      lay.v_start + ex_it->pos,
                                      lay.delta_start + ex_it->dist_pos,
                                      lay.delta_start + ex_it->pos};
      for (int c = 0; c < 4; ++c) {
        data->quads.push_back(
            {idx[c], pe.beta(c) * pe.beta(c), pe.other_copy(c)});
        if (pe.alpha(c) != 0.0)
          spec.abs_terms.push_back({pe.alpha(c), idx[c], pe.other_copy(c)});
      }
    } else if (pe.sb_bus >= 0) {
      if (!lay.p_b.count(pe.sb_bus) || !seen_sbs.insert(pe.sb_bus).second)
        throw std::invalid_argument(fmt::format(
            "inconsistent penalty wiring: unknown or repeated building bus {}",
            pe.sb_bus));
      const int idx = lay.p_b.at(pe.sb_bus);
      data->quads.push_back({idx, pe.beta(0) * pe.beta(0), pe.other_copy(0)});
      if (pe.alpha(0) != 0.0)
        spec.abs_terms.push_back({pe.alpha(0), idx, pe.other_copy(0)});
    } else {
      throw std::invalid_argument(
          "penalty entry names neither a microgrid nor a building");
    }
  }
  if (seen_mgs.size() != sub.exchange_buses.size())
    throw std::invalid_argument(
        "inconsistent penalty wiring: missing link for a declared microgrid");
  if (seen_sbs.size() != sub.sbs.size())
    throw std::invalid_argument(
        "inconsistent penalty wiring: missing link for a declared building");

  detail::wire_network_problem(spec, data);
  return out;
}

}  // namespace gridcascade
