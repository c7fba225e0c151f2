#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gridcascade/atc.hpp"

namespace gridcascade {

enum class ReportFormat { json, csv };

ReportFormat report_format_from_string(const std::string& s);

struct ScenarioConfig {
  Scenario scenario = Scenario::case1;
  std::optional<double> price_override;
  std::optional<double> lambda_override;
  AtcConfig atc;
  std::filesystem::path out_dir;  // empty: do not write files
  ReportFormat format = ReportFormat::json;
};

/// Machine-readable result tables plus the convergence trace.
struct Report {
  struct SbRow {
    int bus;
    double p_l, p_ess, p_pv, p_b;  // kW
  };
  struct DgRow {
    int bus;
    double p_dg, q_dg;  // MW / MVar
  };
  struct BusRow {
    int bus;
    double v_pu, delta_rad;
  };
  struct MgRow {
    int mg_id;
    double p_mg, q_mg, s_mg;  // MW / MVar / MVA
  };
  struct TraceRow {
    int k;
    std::map<std::string, double> f_star;
    std::map<std::string, double> mismatch;   // per link
    std::map<std::string, double> alpha_max;  // max |alpha| per link
    std::map<std::string, double> beta_max;   // max beta per link
  };

  std::string scenario;
  bool converged = false;
  int iterations = 0;
  std::vector<SbRow> sb_dispatch;
  std::vector<DgRow> dg_dispatch;
  double grid_p = 0.0, grid_q = 0.0;  // exchanged with the upstream network
  std::vector<BusRow> bus_table;
  std::vector<MgRow> mg_exchange;
  std::vector<TraceRow> trace;

  bool operator==(const Report&) const = default;
};

/// Loads the case, applies overrides and scenario weights, runs the
/// coordination, audits the result against all constraints, and writes the
/// report files when out_dir is set. Throws on audit failure.
Report run_scenario(const std::filesystem::path& case_path,
                    const ScenarioConfig& config);

struct CentralizedResult {
  Solution solution;
  Report report;
  double objective = 0.0;  // same weighted sum the coordination minimizes
};

/// Single joint solve of all subsystem variables and constraints with shared
/// boundary buses and no penalties; the coordination oracle. Guarded to
/// at most 40 buses.
CentralizedResult solve_centralized(const CaseData& data, Scenario scenario,
                                    double price, double lambda);

/// File-writing entry point: sb_dispatch, dg_dispatch, grid_exchange,
/// bus_table, mg_exchange and trace files in the chosen format. JSON at full
/// precision; CSV with 6 significant digits.
void emit_report(const Report& report, ReportFormat format,
                 const std::filesystem::path& out_dir);

/// Parses the JSON files written by emit_report (round-trip support).
Report parse_report_json(const std::filesystem::path& out_dir);

/// Builds a Report from a finished coordination run.
Report report_from_atc(const AtcResult& result, Scenario scenario);

/// Re-checks every reported value against its subsystem constraints:
/// power-flow residuals within 1e-6 pu, building balance within 1e-3 kW,
/// bounds and line limits within the same slack. Throws AtcError on failure.
void audit_result(const AtcResult& result, const CaseData& data);

}  // namespace gridcascade
