#include "gridcascade/case_data.hpp"

#include <fmt/core.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace gridcascade {

using nlohmann::json;

std::string to_string(BusKind kind) {
  switch (kind) {
    case BusKind::slack: return "slack";
    case BusKind::load: return "load";
    case BusKind::mg_boundary_dist_side: return "mg-boundary-dist-side";
    case BusKind::mg_boundary_mg_side: return "mg-boundary-mg-side";
  }
  return "load";
}

BusKind bus_kind_from_string(const std::string& s) {
  if (s == "slack") return BusKind::slack;
  if (s == "load") return BusKind::load;
  if (s == "mg-boundary-dist-side") return BusKind::mg_boundary_dist_side;
  if (s == "mg-boundary-mg-side") return BusKind::mg_boundary_mg_side;
  throw ParseError(fmt::format("unknown bus kind '{}'", s));
}

const Bus* CaseData::find_bus(int id) const {
  auto it = std::find_if(buses.begin(), buses.end(),
                         [id](const Bus& b) { return b.id == id; });
  return it == buses.end() ? nullptr : &*it;
}

int CaseData::bus_pos(int id) const {
  for (size_t i = 0; i < buses.size(); ++i)
    if (buses[i].id == id) return static_cast<int>(i);
  throw ValidationError(fmt::format("dangling bus id {}", id));
}

namespace {

double require_number(const json& j, const char* key, const std::string& ctx) {
  if (!j.contains(key))
    throw ParseError(fmt::format("{}: missing field '{}'", ctx, key));
  if (!j.at(key).is_number())
    throw ParseError(fmt::format("{}: field '{}' is not a number", ctx, key));
  return j.at(key).get<double>();
}

int require_int(const json& j, const char* key, const std::string& ctx) {
  if (!j.contains(key))
    throw ParseError(fmt::format("{}: missing field '{}'", ctx, key));
  if (!j.at(key).is_number_integer())
    throw ParseError(fmt::format("{}: field '{}' is not an integer", ctx, key));
  return j.at(key).get<int>();
}

Bus parse_bus(const json& j) {
  const std::string ctx = "bus";
  Bus b;
  b.id = require_int(j, "id", ctx);
  b.kind = j.contains("kind") ? bus_kind_from_string(j.at("kind").get<std::string>())
                              : BusKind::load;
  b.p_demand = require_number(j, "p_demand", ctx);
  b.q_demand = require_number(j, "q_demand", ctx);
  b.v_min = require_number(j, "v_min", ctx);
  b.v_max = require_number(j, "v_max", ctx);
  return b;
}

Line parse_line(const json& j) {
  const std::string ctx = "line";
  Line l;
  l.from_bus = require_int(j, "from_bus", ctx);
  l.to_bus = require_int(j, "to_bus", ctx);
  l.resistance = require_number(j, "resistance", ctx);
  l.reactance = require_number(j, "reactance", ctx);
  l.shunt_susceptance =
      j.contains("shunt_susceptance") ? j.at("shunt_susceptance").get<double>() : 0.0;
  l.s_max = require_number(j, "s_max", ctx);
  return l;
}

DgUnit parse_dg(const json& j) {
  const std::string ctx = "dg_unit";
  DgUnit d;
  d.bus = require_int(j, "bus", ctx);
  d.p_min = require_number(j, "p_min", ctx);
  d.p_max = require_number(j, "p_max", ctx);
  d.q_min = require_number(j, "q_min", ctx);
  d.q_max = require_number(j, "q_max", ctx);
  d.cost = require_number(j, "cost", ctx);
  return d;
}

SmartBuildingSpec parse_sb(const json& j) {
  const std::string ctx = "smart_building";
  SmartBuildingSpec sb;
  sb.bus = require_int(j, "bus", ctx);
  sb.total_load = require_number(j, "total_load", ctx);
  sb.controllable_fraction = require_number(j, "controllable_fraction", ctx);
  sb.pv_forecast = require_number(j, "pv_forecast", ctx);
  if (!j.contains("bess")) throw ParseError("smart_building: missing field 'bess'");
  const json& jb = j.at("bess");
  sb.bess.e_capacity = require_number(jb, "e_capacity", "bess");
  sb.bess.e_min = require_number(jb, "e_min", "bess");
  sb.bess.e_initial = require_number(jb, "e_initial", "bess");
  sb.bess.rate_max = require_number(jb, "rate_max", "bess");
  sb.bess.efficiency = require_number(jb, "efficiency", "bess");
  // Exchange limits default wide enough to never bind beyond the physics.
  const double span = sb.total_load + sb.bess.rate_max + sb.pv_forecast;
  sb.pb_min = j.contains("pb_min") ? j.at("pb_min").get<double>() : -span;
  sb.pb_max = j.contains("pb_max") ? j.at("pb_max").get<double>() : span;
  return sb;
}

MicrogridSpec parse_mg(const json& j) {
  const std::string ctx = "microgrid";
  MicrogridSpec m;
  m.id = require_int(j, "id", ctx);
  if (!j.contains("member_buses") || !j.at("member_buses").is_array())
    throw ParseError("microgrid: missing array 'member_buses'");
  for (const auto& v : j.at("member_buses")) m.member_buses.push_back(v.get<int>());
  m.tie_line = require_int(j, "tie_line", ctx);
  m.boundary_bus_dist = require_int(j, "boundary_bus_dist", ctx);
  m.boundary_bus_mg = require_int(j, "boundary_bus_mg", ctx);
  return m;
}

/// Connectivity of a bus set under a line set, by union-find.
bool connected(const std::vector<int>& bus_ids, const std::vector<Line>& lines,
               const std::set<int>& line_subset_of /*bus ids*/) {
  if (bus_ids.empty()) return true;
  std::map<int, int> parent;
  for (int b : bus_ids) parent[b] = b;
  std::function<int(int)> find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const Line& l : lines) {
    if (line_subset_of.count(l.from_bus) && line_subset_of.count(l.to_bus))
      parent[find(l.from_bus)] = find(l.to_bus);
  }
  const int root = find(bus_ids.front());
  return std::all_of(bus_ids.begin(), bus_ids.end(),
                     [&](int b) { return find(b) == root; });
}

}  // namespace

void validate_case(const CaseData& c) {
  auto fail = [](const std::string& msg) { throw ValidationError(msg); };

  if (c.buses.empty()) fail("case has no buses");
  if (!(c.base_mva > 0)) fail("base_mva must be positive");
  if (c.price < 0) fail("price must be non-negative");
  if (c.lambda < 0) fail("lambda must be non-negative");

  std::set<int> bus_ids;
  int slack_count = 0;
  for (const Bus& b : c.buses) {
    if (!bus_ids.insert(b.id).second) fail(fmt::format("duplicate bus id {}", b.id));
    if (!(b.v_min > 0 && b.v_min < b.v_max))
      fail(fmt::format("bus {}: voltage limits must satisfy 0 < v_min < v_max", b.id));
    if (!std::isfinite(b.p_demand) || !std::isfinite(b.q_demand) ||
        b.p_demand < 0 || b.q_demand < 0)
      fail(fmt::format("bus {}: demands must be finite and non-negative", b.id));
    if (b.kind == BusKind::slack) ++slack_count;
  }
  if (slack_count != 1)
    fail(fmt::format("expected exactly one slack bus, found {}", slack_count));

  for (size_t i = 0; i < c.lines.size(); ++i) {
    const Line& l = c.lines[i];
    const auto ctx = fmt::format("line {} ({}-{})", i + 1, l.from_bus, l.to_bus);
    if (l.from_bus == l.to_bus) fail(ctx + ": endpoints must differ");
    if (!bus_ids.count(l.from_bus) || !bus_ids.count(l.to_bus))
      fail(ctx + ": dangling bus id");
    if (l.resistance == 0 && l.reactance == 0) fail(ctx + ": zero-impedance branch");
    if (!(l.s_max > 0)) fail(ctx + ": s_max must be positive");
  }

  for (const DgUnit& d : c.dg_units) {
    if (!bus_ids.count(d.bus)) fail(fmt::format("dg unit: dangling bus id {}", d.bus));
    if (d.p_min > d.p_max || d.q_min > d.q_max)
      fail(fmt::format("dg unit at bus {}: inverted limits", d.bus));
    if (d.cost < 0) fail(fmt::format("dg unit at bus {}: negative cost", d.bus));
  }

  std::set<int> sb_buses;
  for (const SmartBuildingSpec& sb : c.smart_buildings) {
    if (!bus_ids.count(sb.bus))
      fail(fmt::format("smart building: dangling bus id {}", sb.bus));
    if (!sb_buses.insert(sb.bus).second)
      fail(fmt::format("duplicate smart building bus {}", sb.bus));
    if (sb.total_load < 0) fail(fmt::format("building at bus {}: negative load", sb.bus));
    if (sb.controllable_fraction < 0 || sb.controllable_fraction > 1)
      fail(fmt::format("building at bus {}: controllable_fraction outside [0,1]", sb.bus));
    if (sb.pv_forecast < 0)
      fail(fmt::format("building at bus {}: negative pv_forecast", sb.bus));
    if (sb.pb_min > sb.pb_max)
      fail(fmt::format("building at bus {}: pb_min > pb_max", sb.bus));
    const BessSpec& e = sb.bess;
    if (!(0 <= e.e_min && e.e_min <= e.e_initial && e.e_initial <= e.e_capacity))
      fail(fmt::format("building at bus {}: storage energy limits must satisfy "
                       "0 <= e_min <= e_initial <= e_capacity", sb.bus));
    if (!(e.rate_max > 0))
      fail(fmt::format("building at bus {}: rate_max must be positive", sb.bus));
    if (!(e.efficiency > 0 && e.efficiency <= 1))
      fail(fmt::format("building at bus {}: efficiency outside (0,1]", sb.bus));
  }

  // Microgrid structure.
  std::set<int> mg_ids;
  std::set<int> claimed;  // buses interior to some MG
  const Bus* slack = nullptr;
  for (const Bus& b : c.buses)
    if (b.kind == BusKind::slack) slack = &b;
  for (const MicrogridSpec& m : c.microgrids) {
    const auto ctx = fmt::format("microgrid {}", m.id);
    if (!mg_ids.insert(m.id).second) fail(ctx + ": duplicate microgrid id");
    if (m.member_buses.empty()) fail(ctx + ": empty member set");
    for (int b : m.member_buses) {
      if (!bus_ids.count(b)) fail(ctx + fmt::format(": dangling bus id {}", b));
      if (!claimed.insert(b).second)
        fail(fmt::format("overlapping microgrid membership at bus {}", b));
      if (slack && b == slack->id) fail(ctx + ": slack bus cannot be a member");
    }
    if (m.tie_line < 1 || m.tie_line > static_cast<int>(c.lines.size()))
      fail(ctx + fmt::format(": tie_line {} out of range", m.tie_line));
    const Line& tie = c.lines[m.tie_line - 1];
    const bool matches =
        (tie.from_bus == m.boundary_bus_dist && tie.to_bus == m.boundary_bus_mg) ||
        (tie.from_bus == m.boundary_bus_mg && tie.to_bus == m.boundary_bus_dist);
    if (!matches) fail(ctx + ": tie_line does not connect the boundary buses");
    const auto& mb = m.member_buses;
    if (std::find(mb.begin(), mb.end(), m.boundary_bus_mg) == mb.end())
      fail(ctx + ": boundary_bus_mg must be a member");
    if (std::find(mb.begin(), mb.end(), m.boundary_bus_dist) != mb.end())
      fail(ctx + ": boundary_bus_dist must not be a member");
  }

  // Partition connectivity: each MG interior, and the remainder, must be
  // connected through lines wholly inside the respective side.
  for (const MicrogridSpec& m : c.microgrids) {
    std::set<int> inside(m.member_buses.begin(), m.member_buses.end());
    if (!connected(m.member_buses, c.lines, inside))
      fail(fmt::format("disconnected partition: microgrid {} interior", m.id));
  }
  std::vector<int> dist_buses;
  std::set<int> dist_set;
  for (const Bus& b : c.buses)
    if (!claimed.count(b.id)) {
      dist_buses.push_back(b.id);
      dist_set.insert(b.id);
    }
  if (dist_buses.empty()) fail("no distribution buses outside microgrids");
  if (!connected(dist_buses, c.lines, dist_set))
    fail("disconnected partition: distribution network");
}

CaseData parse_case(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(fmt::format("malformed case file: {}", e.what()));
  }
  CaseData c;
  try {
    c.base_mva = require_number(j, "base_mva", "case");
    c.base_kv = require_number(j, "base_kv", "case");
    c.price = require_number(j, "price", "case");
    c.lambda = require_number(j, "lambda", "case");
    for (const auto& jb : j.value("buses", json::array())) c.buses.push_back(parse_bus(jb));
    for (const auto& jl : j.value("lines", json::array())) c.lines.push_back(parse_line(jl));
    for (const auto& jd : j.value("dg_units", json::array()))
      c.dg_units.push_back(parse_dg(jd));
    for (const auto& js : j.value("smart_buildings", json::array()))
      c.smart_buildings.push_back(parse_sb(js));
    for (const auto& jm : j.value("microgrids", json::array()))
      c.microgrids.push_back(parse_mg(jm));
    if (j.contains("load_scale")) {
      const double s = j.at("load_scale").get<double>();
      if (!(s > 0)) throw ParseError("load_scale must be positive");
      for (Bus& b : c.buses) {
        b.p_demand *= s;
        b.q_demand *= s;
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(fmt::format("malformed case file: {}", e.what()));
  }
  validate_case(c);
  return c;
}

CaseData load_case(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(fmt::format("cannot open case file '{}'", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_case(ss.str());
}

std::string serialize_case(const CaseData& c) {
  json j;
  j["base_mva"] = c.base_mva;
  j["base_kv"] = c.base_kv;
  j["price"] = c.price;
  j["lambda"] = c.lambda;
  j["buses"] = json::array();
  for (const Bus& b : c.buses)
    j["buses"].push_back({{"id", b.id},
                          {"kind", to_string(b.kind)},
                          {"p_demand", b.p_demand},
                          {"q_demand", b.q_demand},
                          {"v_min", b.v_min},
                          {"v_max", b.v_max}});
  j["lines"] = json::array();
  for (const Line& l : c.lines)
    j["lines"].push_back({{"from_bus", l.from_bus},
                          {"to_bus", l.to_bus},
                          {"resistance", l.resistance},
                          {"reactance", l.reactance},
                          {"shunt_susceptance", l.shunt_susceptance},
                          {"s_max", l.s_max}});
  j["dg_units"] = json::array();
  for (const DgUnit& d : c.dg_units)
    j["dg_units"].push_back({{"bus", d.bus},
                             {"p_min", d.p_min},
                             {"p_max", d.p_max},
                             {"q_min", d.q_min},
                             {"q_max", d.q_max},
                             {"cost", d.cost}});
  j["smart_buildings"] = json::array();
  for (const SmartBuildingSpec& s : c.smart_buildings)
    j["smart_buildings"].push_back(
        {{"bus", s.bus},
         {"total_load", s.total_load},
         {"controllable_fraction", s.controllable_fraction},
         {"pv_forecast", s.pv_forecast},
         {"pb_min", s.pb_min},
         {"pb_max", s.pb_max},
         {"bess",
          {{"e_capacity", s.bess.e_capacity},
           {"e_min", s.bess.e_min},
           {"e_initial", s.bess.e_initial},
           {"rate_max", s.bess.rate_max},
           {"efficiency", s.bess.efficiency}}}});
  j["microgrids"] = json::array();
  for (const MicrogridSpec& m : c.microgrids)
    j["microgrids"].push_back({{"id", m.id},
                               {"member_buses", m.member_buses},
                               {"tie_line", m.tie_line},
                               {"boundary_bus_dist", m.boundary_bus_dist},
                               {"boundary_bus_mg", m.boundary_bus_mg}});
  return j.dump(2);
}

}  // namespace gridcascade
