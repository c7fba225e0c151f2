#include "gridcascade/partition.hpp"

#include <fmt/core.h>

#include <algorithm>
#include <set>

namespace gridcascade {

namespace {

SubcaseBus make_sub_bus(const Bus& b, BusKind kind, bool keep_demand) {
  return SubcaseBus{b.id, kind, keep_demand ? b.p_demand : 0.0,
                    keep_demand ? b.q_demand : 0.0, b.v_min, b.v_max};
}

void finish(Subcase& sc) {
  std::vector<int> ids;
  ids.reserve(sc.buses.size());
  for (const auto& b : sc.buses) ids.push_back(b.id);
  sc.y = build_admittance(std::span<const Line>(sc.lines), ids);
}

}  // namespace

const Subcase& Partition::mg_by_id(int id) const {
  for (const Subcase& s : mgs)
    if (s.mg_id == id) return s;
  throw std::out_of_range(fmt::format("no microgrid subcase with id {}", id));
}

Subcase full_network_subcase(const CaseData& data) {
  Subcase sc;
  sc.name = "full";
  sc.base_mva = data.base_mva;
  sc.price = data.price;
  sc.lambda_coeff = data.lambda;
  for (const Bus& b : data.buses) {
    sc.buses.push_back(make_sub_bus(b, b.kind, true));
    if (b.kind == BusKind::slack) sc.slack_pos = static_cast<int>(sc.buses.size()) - 1;
  }
  sc.lines = data.lines;
  sc.dgs = data.dg_units;
  sc.sbs = data.smart_buildings;
  finish(sc);
  return sc;
}

Partition partition_case(const CaseData& data) {
  Partition part;

  std::set<int> mg_member;  // buses interior to any MG
  for (const MicrogridSpec& m : data.microgrids)
    mg_member.insert(m.member_buses.begin(), m.member_buses.end());

  // Microgrids sorted by id for deterministic ordering.
  std::vector<MicrogridSpec> mgs = data.microgrids;
  std::sort(mgs.begin(), mgs.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });

  // Distribution subcase: non-MG buses plus each MG-side boundary bus as an
  // exchange-injection bus; lines with both ends outside MGs plus tie lines.
  Subcase& dist = part.dist;
  dist.name = "dist";
  dist.base_mva = data.base_mva;
  dist.price = data.price;
  dist.lambda_coeff = data.lambda;
  for (const Bus& b : data.buses) {
    if (mg_member.count(b.id)) continue;
    dist.buses.push_back(make_sub_bus(b, b.kind, true));
    if (b.kind == BusKind::slack) dist.slack_pos = static_cast<int>(dist.buses.size()) - 1;
  }
  auto dist_pos_of = [&dist](int bus_id) {
    for (size_t i = 0; i < dist.buses.size(); ++i)
      if (dist.buses[i].id == bus_id) return static_cast<int>(i);
    throw ValidationError(fmt::format("dangling bus id {}", bus_id));
  };
  for (const MicrogridSpec& m : mgs) {
    const Bus& bb = *data.find_bus(m.boundary_bus_mg);
    dist.buses.push_back(make_sub_bus(bb, BusKind::mg_boundary_mg_side, false));
    dist.exchange_buses.push_back(
        Subcase::ExchangeBus{m.id, static_cast<int>(dist.buses.size()) - 1,
                             dist_pos_of(m.boundary_bus_dist)});
  }
  std::set<int> dist_ids;
  for (const auto& b : dist.buses) dist_ids.insert(b.id);
  for (const Line& l : data.lines)
    if (dist_ids.count(l.from_bus) && dist_ids.count(l.to_bus))
      dist.lines.push_back(l);
  for (const DgUnit& d : data.dg_units)
    if (!mg_member.count(d.bus)) dist.dgs.push_back(d);
  for (const SmartBuildingSpec& s : data.smart_buildings)
    if (!mg_member.count(s.bus)) dist.sbs.push_back(s);
  finish(dist);

  // One subcase per microgrid: members plus the dist-side boundary bus, which
  // doubles as the subsystem's base-power-flow slack.
  for (const MicrogridSpec& m : mgs) {
    Subcase sc;
    sc.name = fmt::format("mg:{}", m.id);
    sc.mg_id = m.id;
    sc.base_mva = data.base_mva;
    sc.price = data.price;
    sc.lambda_coeff = data.lambda;

    const Bus& bd = *data.find_bus(m.boundary_bus_dist);
    sc.buses.push_back(make_sub_bus(bd, BusKind::mg_boundary_dist_side, false));
    sc.boundary_dist_pos = 0;
    sc.slack_pos = 0;
    std::vector<int> members = m.member_buses;
    std::sort(members.begin(), members.end());
    for (int id : members) {
      const Bus& b = *data.find_bus(id);
      sc.buses.push_back(
          make_sub_bus(b, id == m.boundary_bus_mg ? BusKind::mg_boundary_mg_side
                                                  : b.kind,
                       true));
      if (id == m.boundary_bus_mg)
        sc.boundary_mg_pos = static_cast<int>(sc.buses.size()) - 1;
    }
    std::set<int> ids;
    for (const auto& b : sc.buses) ids.insert(b.id);
    const Line& tie = data.lines[m.tie_line - 1];
    for (const Line& l : data.lines) {
      if (!ids.count(l.from_bus) || !ids.count(l.to_bus)) continue;
      // Only the tie line may touch the dist-side boundary bus.
      const bool touches_boundary =
          l.from_bus == m.boundary_bus_dist || l.to_bus == m.boundary_bus_dist;
      if (touches_boundary && !(l == tie)) continue;
      sc.lines.push_back(l);
      if (l == tie) sc.tie_line_local = static_cast<int>(sc.lines.size()) - 1;
    }
    for (const DgUnit& d : data.dg_units)
      if (std::find(members.begin(), members.end(), d.bus) != members.end())
        sc.dgs.push_back(d);
    for (const SmartBuildingSpec& s : data.smart_buildings)
      if (std::find(members.begin(), members.end(), s.bus) != members.end())
        sc.sbs.push_back(s);
    finish(sc);
    part.mgs.push_back(std::move(sc));
  }
  return part;
}

}  // namespace gridcascade
