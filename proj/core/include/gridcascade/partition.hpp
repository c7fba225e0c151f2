#pragma once

#include <map>
#include <string>
#include <vector>

#include "gridcascade/admittance.hpp"
#include "gridcascade/case_data.hpp"

namespace gridcascade {

struct SubcaseBus {
  int id = 0;
  BusKind kind = BusKind::load;
  double p_demand = 0.0;  // MW; zero on boundary copies
  double q_demand = 0.0;
  double v_min = 0.0;
  double v_max = 0.0;
};

/// One electrical subsystem: the distribution network or a single microgrid.
/// Immutable after construction.
struct Subcase {
  std::string name;  // "dist" or "mg:<id>"
  int mg_id = -1;    // -1 for the distribution / full-network subcase

  std::vector<SubcaseBus> buses;          // position-indexed
  std::vector<Line> lines;                // every line fully inside the subcase
  std::vector<DgUnit> dgs;                // units at interior buses
  std::vector<SmartBuildingSpec> sbs;     // buildings routed to this subsystem
  AdmittanceMatrix y;

  int slack_pos = -1;  // dist: the case slack; mg: the dist-side boundary bus

  /// Distribution subcase only: the MG-side boundary buses carrying the free
  /// exchange injection (P_MG, Q_MG) of each microgrid, plus the dist-side
  /// partner position (both enter the boundary-voltage coupling).
  struct ExchangeBus {
    int mg_id;
    int pos;       // MG-side boundary bus
    int dist_pos;  // dist-side boundary bus
  };
  std::vector<ExchangeBus> exchange_buses;

  // Microgrid subcase only.
  int boundary_dist_pos = -1;
  int boundary_mg_pos = -1;
  int tie_line_local = -1;

  double base_mva = 100.0;
  double price = 0.0;
  double lambda_coeff = 0.0;

  bool is_dist() const { return mg_id < 0; }
  int pos_of(int bus_id) const { return y.pos_of(bus_id); }
};

struct Partition {
  Subcase dist;
  std::vector<Subcase> mgs;  // ordered by microgrid id

  const Subcase& mg_by_id(int id) const;
};

/// Splits a case along its microgrid boundaries. The distribution subcase
/// keeps all non-MG buses plus, per MG, the tie line and the MG-side boundary
/// bus as an exchange-injection bus; each MG subcase keeps its member buses
/// plus the tie line and the dist-side boundary bus as a boundary-voltage
/// bus (which doubles as the MG's base-power-flow slack). Buildings are
/// routed to the subsystem owning their bus.
Partition partition_case(const CaseData& data);

/// The whole network as a single subcase (tie lines are ordinary lines,
/// microgrid structure ignored). Basis for the coordination start point and
/// the centralized solve.
Subcase full_network_subcase(const CaseData& data);

}  // namespace gridcascade
