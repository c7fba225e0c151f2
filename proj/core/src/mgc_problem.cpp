#include <fmt/core.h>

#include <set>

#include "network_builder.hpp"

namespace gridcascade {

VariableLayout mgc_variable_layout(const Subcase& mg) {
  return detail::make_network_layout(mg, /*with_grid=*/false).lay;
}

BuiltProblem build_mgc_problem(const Subcase& mg, const WeightSet& weights,
                               const PenaltyTerms& penalties, double lambda,
                               double price) {
  if (mg.is_dist())
    throw std::invalid_argument("build_mgc_problem: not a microgrid subcase");
  const auto wit = weights.mg.find(mg.mg_id);
  if (wit == weights.mg.end())
    throw std::invalid_argument(
        fmt::format("no weights for microgrid {}", mg.mg_id));
  const WeightSet::MgWeights& w = wit->second;

  auto data = std::make_shared<detail::NetworkProblemData>();
  data->sub = mg;
  const Subcase& sub = data->sub;
  const int nb = static_cast<int>(sub.buses.size());

  BuiltProblem out;
  detail::LayoutBundle bundle = detail::make_network_layout(sub, false);
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
  // No fixed reference angle: the boundary-voltage penalty anchors the frame.
  data->fixed_delta_pos = -1;

  const double base = sub.base_mva;
  data->sched_p_const.setZero(nb);
  data->sched_q_const.setZero(nb);
  data->p_contrib.assign(nb, {});
  data->q_contrib.assign(nb, {});
  for (int i = 0; i < nb; ++i) {
    data->sched_p_const(i) = -sub.buses[i].p_demand / base;
    data->sched_q_const(i) = -sub.buses[i].q_demand / base;
  }
  for (size_t k = 0; k < sub.dgs.size(); ++k) {
    const int pos = sub.pos_of(sub.dgs[k].bus);
    data->p_contrib[pos].push_back({lay.p_dg[k], 1.0 / base});
    data->q_contrib[pos].push_back({lay.q_dg[k], 1.0 / base});
  }
  for (const SmartBuildingSpec& sb : sub.sbs) {
    const int pos = sub.pos_of(sb.bus);
    data->sched_p_const(pos) = 0.0;
    data->sched_q_const(pos) = 0.0;
    data->p_contrib[pos].push_back({lay.p_b[sb.bus], -1e-3 / base});
  }
  {
    // The grid feeds the tie line through the dist-side boundary bus.
    const auto [pi, qi] = lay.mg_exchange[mg.mg_id];
    data->sched_p_const(mg.boundary_dist_pos) = 0.0;
    data->sched_q_const(mg.boundary_dist_pos) = 0.0;
    data->p_contrib[mg.boundary_dist_pos].push_back({pi, 1.0 / base});
    data->q_contrib[mg.boundary_dist_pos].push_back({qi, 1.0 / base});
  }

  data->smax_pu2.reserve(sub.lines.size());
  for (const Line& l : sub.lines) {
    const double s = l.s_max / base;
    data->smax_pu2.push_back(s * s);
  }

  for (size_t k = 0; k < sub.dgs.size(); ++k)
    data->linear.push_back({lay.p_dg[k], w.w5 * sub.dgs[k].cost});
  for (const SmartBuildingSpec& sb : sub.sbs)
    data->linear.push_back({lay.p_b.at(sb.bus), w.w6 * price});
  if (w.w7 != 0.0) {
    const auto [pi, qi] = lay.mg_exchange[mg.mg_id];
    data->quads.push_back({pi, w.w7 * lambda, 0.0});
    data->quads.push_back({qi, w.w7 * lambda, 0.0});
  }

  // Penalties: the boundary-voltage entry is mandatory (this layer responds
  // to the upper targets); building entries make this layer the target owner.
  bool have_voltage = false;
  std::set<int> seen_sbs;
  for (const PenaltyEntry& pe : penalties.entries) {
    if (pe.mg_id >= 0) {
      if (pe.mg_id != mg.mg_id || have_voltage)
        throw std::invalid_argument(fmt::format(
            "inconsistent penalty wiring: unexpected microgrid {}", pe.mg_id));
      have_voltage = true;
      if (pe.other_copy.size() != 4 || pe.alpha.size() != 4 || pe.beta.size() != 4)
        throw std::invalid_argument("boundary-voltage penalty needs 4 components");
      const std::array<int, 4> idx = {lay.v_start + mg.boundary_dist_pos,
                                      lay.v_start + mg.boundary_mg_pos,
                                      lay.delta_start + mg.boundary_dist_pos,
                                      lay.delta_start + mg.boundary_mg_pos};
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
  if (!have_voltage)
    throw std::invalid_argument(
        "inconsistent penalty wiring: missing boundary-voltage link");
  if (seen_sbs.size() != sub.sbs.size())
    throw std::invalid_argument(
        "inconsistent penalty wiring: missing link for a declared building");

  detail::wire_network_problem(spec, data);
  return out;
}

}  // namespace gridcascade
