#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "gridcascade/nlp.hpp"
#include "gridcascade/partition.hpp"
#include "gridcascade/power_flow.hpp"

namespace gridcascade {

enum class Scenario { case1, case2 };

std::string to_string(Scenario s);
Scenario scenario_from_string(const std::string& s);

/// Objective normalization weights: each w is the reciprocal of the
/// corresponding term's magnitude in the coordination start point, so every
/// weighted term starts near 1. w4 and w7 are zeroed under case1.
struct WeightSet {
  double w1 = 1.0;  // grid purchase cost
  double w2 = 1.0;  // distribution DG cost
  double w3 = 1.0;  // distribution building exchange cost
  double w4 = 0.0;  // MG exchange damping

  struct MgWeights {
    double w5 = 1.0;  // MG DG cost
    double w6 = 1.0;  // MG building exchange cost
    double w7 = 0.0;  // exchange damping, MG side
  };
  std::map<int, MgWeights> mg;  // keyed by microgrid id
};

/// One consistency-penalty contribution wired into a subproblem: the other
/// layer's copy enters as a constant, this subproblem's copy as variables.
struct PenaltyEntry {
  std::string link_id;
  Eigen::VectorXd other_copy;
  Eigen::VectorXd alpha;  // >= 0 at construction
  Eigen::VectorXd beta;   // > 0
  int mg_id = -1;         // boundary-voltage entries
  int sb_bus = -1;        // building-exchange entries
};

struct PenaltyTerms {
  std::vector<PenaltyEntry> entries;
};

/// Building-level dispatch, kW/kWh. p_ess > 0 discharges into the building bus.
struct SbDecision {
  double p_b = 0.0;
  double p_ess = 0.0;
  double e = 0.0;
  double p_pv = 0.0;
  double p_l = 0.0;
};

/// Variable positions of a built network subproblem, for decoding solutions.
struct VariableLayout {
  int n = 0;
  int v_start = -1;      // per-bus block, subcase position order
  int delta_start = -1;
  int p_grid = -1, q_grid = -1;          // slack exchange, MW/MVar
  std::vector<int> p_dg, q_dg;           // by subcase DG order, MW/MVar
  std::map<int, int> p_b;                // sb bus -> index, kW
  std::map<int, std::pair<int, int>> mg_exchange;  // mg id -> (P, Q), MW

  // Building-internal blocks (centralized problem only), by sb bus.
  std::map<int, std::array<int, 5>> sb_internal;  // {p_l, p_pv, p_dis, p_ch, e}
};

struct BuiltProblem {
  ProblemSpec spec;
  VariableLayout layout;
  Eigen::VectorXd x0;  // base start; coordination warm-starts overwrite it
};

/// Distribution-system problem over the dist subcase: grid purchase, DG and
/// building costs, optional exchange damping, power-flow equalities with
/// building and MG-exchange injections, line-flow limits, plus the
/// consistency penalties. `penalties` must carry one boundary-voltage entry
/// per MG and one exchange entry per directly connected building.
BuiltProblem build_dsc_problem(const Subcase& dist, const WeightSet& weights,
                               const PenaltyTerms& penalties, double lambda,
                               double price);

/// Microgrid problem over one MG subcase. `penalties` must carry the
/// boundary-voltage entry (upper-layer values constant) and one exchange
/// entry per in-MG building (this problem owns the targets).
BuiltProblem build_mgc_problem(const Subcase& mg, const WeightSet& weights,
                               const PenaltyTerms& penalties, double lambda,
                               double price);

/// Variable positions the builders would assign, without building a problem.
VariableLayout dsc_variable_layout(const Subcase& dist);
VariableLayout mgc_variable_layout(const Subcase& mg);

/// Layout of the building problem variables.
struct SbLayout {
  int p_b = 0, p_l = 1, p_pv = 2, p_dis = 3, p_ch = 4, e = 5;
  static constexpr int n = 6;
};

struct BuiltSbProblem {
  ProblemSpec spec;
  SbLayout layout;
  Eigen::VectorXd x0;
};

/// Building problem: min price * p_b plus the consistency penalty against
/// `pb_target`, subject to the bus balance, the storage energy coupling, and
/// box limits. Affine when alpha and beta are both zero; a positive beta
/// makes it convex-quadratic and routes it to the interior-point solver.
BuiltSbProblem build_sbc_problem(const SmartBuildingSpec& sb, double pb_target,
                                 double alpha, double beta, double price);

SbDecision decode_sb_solution(const Eigen::VectorXd& x, const SbLayout& layout);

/// Exact consistency penalty alpha^T |t - r| + sum_k (beta_k (t_k - r_k))^2.
double evaluate_penalty(const Eigen::VectorXd& alpha, const Eigen::VectorXd& beta,
                        const Eigen::VectorXd& t, const Eigen::VectorXd& r);

/// Normalization weights from the full-network start point: w_i =
/// 1 / max(|term_i|, 1e-6) with term magnitudes evaluated at `base_state`
/// (DGs at midpoint, buildings at their base exchange, tie flows as solved).
WeightSet compute_weights(const CaseData& data, const Partition& partition,
                          const Subcase& full, const NetworkState& base_state,
                          Scenario scenario, double price);

}  // namespace gridcascade
