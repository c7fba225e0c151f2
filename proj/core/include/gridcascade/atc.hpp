#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "gridcascade/subproblems.hpp"

namespace gridcascade {

enum class LinkKind { boundary_voltage_quad, sb_exchange };

/// One coordination coupling between two layers: the upper layer's copy t,
/// the lower layer's copy r, and the penalty coefficients. Voltage links
/// carry (V_dist, V_mg, delta_dist, delta_mg) in pu/rad; building links carry
/// the exchanged power in kW.
struct SharedVariableLink {
  std::string id;
  LinkKind kind = LinkKind::sb_exchange;
  std::string upper_subsystem, lower_subsystem;
  Eigen::VectorXd t, r;
  Eigen::VectorXd alpha, beta;
  int mg_id = -1;
  int sb_bus = -1;

  double max_mismatch() const;
};

struct AtcConfig {
  double eps1 = 1e-3;  // relative objective-change tolerance
  double eps2 = 1e-3;  // link mismatch tolerance
  double sigma = 2.0;  // quadratic-coefficient growth, >= 1
  double alpha0 = 0.0;
  double beta0 = 1.0;
  int max_iterations = 100;

  void validate() const;  // throws std::invalid_argument
};

struct AtcIterationRecord {
  int k = 0;
  std::map<std::string, double> f_star;       // solved objective incl. penalty
  std::map<std::string, double> f_star_core;  // penalty excluded
  std::map<std::string, double> link_mismatch;  // max |t - r| per link
  std::map<std::string, Eigen::VectorXd> alpha, beta;  // snapshots before update
  std::map<std::string, Eigen::VectorXd> solutions;    // per-subsystem iterates
  double wall_seconds = 0.0;
};

struct AtcResult {
  bool converged = false;
  int iterations = 0;
  std::map<int, SbDecision> sb;          // by bus
  std::map<int, std::pair<double, double>> dg;  // by bus: (P MW, Q MVar)
  std::map<int, std::array<double, 3>> mg_exchange;  // by mg id: P, Q, S (MW/MVar/MVA)
  double p_grid = 0.0, q_grid = 0.0;     // MW / MVar
  std::map<int, std::pair<double, double>> bus_voltage;  // by bus: (V pu, delta rad)
  std::vector<SharedVariableLink> links;  // final state
  std::vector<AtcIterationRecord> trace;

  double total_core_objective() const;  // penalty-free sum over subsystems
};

class AtcError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ConvergenceCheck {
  bool converged = false;
  bool objectives_ok = false;
  bool links_ok = false;
  double max_rel_obj_change = 0.0;
  double max_link_mismatch = 0.0;
};

/// Both criteria must hold: every subsystem's relative objective change
/// within eps1 and every link component's |t - r| within eps2.
ConvergenceCheck check_convergence(const std::map<std::string, double>& prev_f,
                                   const std::map<std::string, double>& curr_f,
                                   const std::vector<SharedVariableLink>& links,
                                   double eps1, double eps2);

/// alpha += 2 beta^2 (t - r) elementwise, then beta *= sigma.
void update_coefficients(SharedVariableLink& link, double sigma);

/// Runs the full coordination loop: base power flow initialization, then
/// building solves, microgrid solves, distribution solve, convergence test,
/// and coefficient update per iteration. Returns the full trace whether or
/// not it converged; throws AtcError on a subproblem solver failure.
AtcResult run_atc(const CaseData& data, Scenario scenario, const AtcConfig& config);

}  // namespace gridcascade
