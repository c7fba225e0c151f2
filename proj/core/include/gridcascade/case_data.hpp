#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace gridcascade {

/// Role of a bus within one electrical subsystem. Case files only use
/// `slack` and `load`; the boundary kinds are assigned when a case with
/// microgrids is partitioned into subsystems.
enum class BusKind { slack, load, mg_boundary_dist_side, mg_boundary_mg_side };

std::string to_string(BusKind kind);
BusKind bus_kind_from_string(const std::string& s);

struct Bus {
  int id = 0;  // 1-based, matching the usual test-system numbering
  BusKind kind = BusKind::load;
  double p_demand = 0.0;  // MW
  double q_demand = 0.0;  // MVar
  double v_min = 0.0;     // pu
  double v_max = 0.0;     // pu

  bool operator==(const Bus&) const = default;
};

struct Line {
  int from_bus = 0;
  int to_bus = 0;
  double resistance = 0.0;         // pu
  double reactance = 0.0;          // pu
  double shunt_susceptance = 0.0;  // pu, total line charging
  double s_max = 0.0;              // MVA

  bool operator==(const Line&) const = default;
};

struct DgUnit {
  int bus = 0;
  double p_min = 0.0;  // MW
  double p_max = 0.0;
  double q_min = 0.0;  // MVar
  double q_max = 0.0;
  double cost = 0.0;  // $/MWh linear coefficient

  bool operator==(const DgUnit&) const = default;
};

struct BessSpec {
  double e_capacity = 0.0;  // kWh
  double e_min = 0.0;       // kWh
  double e_initial = 0.0;   // kWh
  double rate_max = 0.0;    // kW, symmetric charge/discharge limit
  double efficiency = 1.0;  // (0, 1]

  bool operator==(const BessSpec&) const = default;
};

struct SmartBuildingSpec {
  int bus = 0;
  double total_load = 0.0;            // kW
  double controllable_fraction = 0.0; // in [0, 1]
  double pv_forecast = 0.0;           // kW
  BessSpec bess;
  double pb_min = 0.0;  // kW; defaulted at load time when absent from the file
  double pb_max = 0.0;  // kW

  /// Non-curtailable part of the building demand, kW.
  double firm_load() const { return (1.0 - controllable_fraction) * total_load; }

  bool operator==(const SmartBuildingSpec&) const = default;
};

struct MicrogridSpec {
  int id = 0;
  std::vector<int> member_buses;
  int tie_line = 0;  // 1-based index into CaseData::lines
  int boundary_bus_dist = 0;
  int boundary_bus_mg = 0;

  bool operator==(const MicrogridSpec&) const = default;
};

/// Full validated network description. Immutable after load; safe to share
/// read-only across concurrent solves.
struct CaseData {
  std::vector<Bus> buses;
  std::vector<Line> lines;
  std::vector<DgUnit> dg_units;
  std::vector<SmartBuildingSpec> smart_buildings;
  std::vector<MicrogridSpec> microgrids;
  double price = 0.0;     // $/MWh
  double lambda = 0.0;    // exchange-penalty coefficient
  double base_mva = 100.0;
  double base_kv = 0.0;

  const Bus* find_bus(int id) const;
  /// Position of a bus id in `buses`; throws if absent.
  int bus_pos(int id) const;

  bool operator==(const CaseData&) const = default;
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parse and validate a case file. An optional `load_scale` field scales all
/// bus demands at load time (it is consumed here, not stored).
CaseData load_case(const std::filesystem::path& path);
CaseData parse_case(const std::string& json_text);
std::string serialize_case(const CaseData& data);

/// Throws ValidationError naming the first violated invariant.
void validate_case(const CaseData& data);

}  // namespace gridcascade
