#include <fmt/core.h>

#include <CLI11.hpp>
#include <map>
#include <random>
#include <string>

#include "gridcascade/harness.hpp"
#include "gridcascade/log.hpp"

namespace gc = gridcascade;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitNotConverged = 2;

struct Overrides {
  std::optional<double> price, lambda, alpha0, beta0;
};

Overrides parse_set(const std::vector<std::string>& kvs) {
  Overrides ov;
  for (const std::string& kv : kvs) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw CLI::ValidationError("--set", "expected key=value, got '" + kv + "'");
    const std::string key = kv.substr(0, eq);
    const double value = std::stod(kv.substr(eq + 1));
    if (key == "price") ov.price = value;
    else if (key == "lambda") ov.lambda = value;
    else if (key == "alpha0") ov.alpha0 = value;
    else if (key == "beta0") ov.beta0 = value;
    else throw CLI::ValidationError("--set", "unknown key '" + key + "'");
  }
  return ov;
}

int cmd_run(const std::string& case_path, const std::string& scenario,
            const std::string& out_dir, const std::string& format,
            const std::vector<std::string>& sets, int max_iter, double eps1,
            double eps2, double sigma) {
  const Overrides ov = parse_set(sets);
  gc::ScenarioConfig cfg;
  cfg.scenario = gc::scenario_from_string(scenario);
  cfg.price_override = ov.price;
  cfg.lambda_override = ov.lambda;
  if (ov.alpha0) cfg.atc.alpha0 = *ov.alpha0;
  if (ov.beta0) cfg.atc.beta0 = *ov.beta0;
  cfg.atc.max_iterations = max_iter;
  cfg.atc.eps1 = eps1;
  cfg.atc.eps2 = eps2;
  cfg.atc.sigma = sigma;
  cfg.out_dir = out_dir;
  cfg.format = gc::report_format_from_string(format);

  const gc::Report rep = gc::run_scenario(case_path, cfg);
  fmt::print("{}: {} after {} iterations; grid exchange {:.4f} MW / {:.4f} MVar\n",
             rep.scenario, rep.converged ? "converged" : "NOT converged",
             rep.iterations, rep.grid_p, rep.grid_q);
  for (const auto& mg : rep.mg_exchange)
    fmt::print("  mg {}: {:.4f} MW, {:.4f} MVar, {:.4f} MVA\n", mg.mg_id,
               mg.p_mg, mg.q_mg, mg.s_mg);
  if (!out_dir.empty()) fmt::print("report written to {}\n", out_dir);
  return rep.converged ? kExitOk : kExitNotConverged;
}

int cmd_oracle(const std::string& case_path, const std::string& scenario,
               const std::string& out_dir, const std::string& format,
               const std::vector<std::string>& sets) {
  const Overrides ov = parse_set(sets);
  gc::CaseData data = gc::load_case(case_path);
  if (ov.price) data.price = *ov.price;
  if (ov.lambda) data.lambda = *ov.lambda;
  const gc::CentralizedResult res = gc::solve_centralized(
      data, gc::scenario_from_string(scenario), data.price, data.lambda);
  fmt::print("centralized {}: {} f={:.8e} iters={}\n", scenario,
             gc::to_string(res.solution.status), res.objective,
             res.solution.iterations);
  if (!out_dir.empty())
    gc::emit_report(res.report, gc::report_format_from_string(format), out_dir);
  return res.solution.status == gc::SolveStatus::optimal ? kExitOk : kExitError;
}

int cmd_validate(const std::string& case_path) {
  const gc::CaseData data = gc::load_case(case_path);
  fmt::print("{}: OK ({} buses, {} lines, {} DG units, {} buildings, {} microgrids)\n",
             case_path, data.buses.size(), data.lines.size(),
             data.dg_units.size(), data.smart_buildings.size(),
             data.microgrids.size());
  return kExitOk;
}

int cmd_gradcheck(const std::string& case_path) {
  const gc::CaseData data = gc::load_case(case_path);
  const gc::Partition part = gc::partition_case(data);
  const gc::Subcase full = gc::full_network_subcase(data);
  const gc::NetworkState base = gc::solve_base_powerflow(full);
  const gc::WeightSet weights = gc::compute_weights(
      data, part, full, base, gc::Scenario::case2, data.price);

  bool ok = true;
  auto show = [&ok](const std::string& name, const gc::GradientCheckReport& r) {
    fmt::print("{:>10}: objective {:.2e}  equality {:.2e}  inequality {:.2e}{}\n",
               name, r.max_rel_error_objective, r.max_rel_error_equality,
               r.max_rel_error_inequality, r.ok() ? "" : "  FLAGGED");
    ok = ok && r.ok();
  };

  gc::PenaltyTerms dist_pen;
  for (const auto& ex : part.dist.exchange_buses) {
    gc::PenaltyEntry pe;
    pe.mg_id = ex.mg_id;
    pe.other_copy = Eigen::VectorXd::Constant(4, 1.0);
    pe.other_copy(2) = pe.other_copy(3) = 0.0;
    pe.alpha = Eigen::VectorXd::Zero(4);
    pe.beta = Eigen::VectorXd::Ones(4);
    dist_pen.entries.push_back(pe);
  }
  for (const auto& sb : part.dist.sbs) {
    gc::PenaltyEntry pe;
    pe.sb_bus = sb.bus;
    pe.other_copy = Eigen::VectorXd::Constant(1, sb.total_load - sb.pv_forecast);
    pe.alpha = Eigen::VectorXd::Zero(1);
    pe.beta = Eigen::VectorXd::Ones(1);
    dist_pen.entries.push_back(pe);
  }
  const gc::BuiltProblem dsc =
      gc::build_dsc_problem(part.dist, weights, dist_pen, data.lambda, data.price);
  show("dist", gc::check_gradients(dsc.spec, dsc.x0));

  for (const gc::Subcase& mg : part.mgs) {
    gc::PenaltyTerms pen;
    gc::PenaltyEntry pv;
    pv.mg_id = mg.mg_id;
    pv.other_copy = Eigen::VectorXd::Constant(4, 1.0);
    pv.other_copy(2) = pv.other_copy(3) = 0.0;
    pv.alpha = Eigen::VectorXd::Zero(4);
    pv.beta = Eigen::VectorXd::Ones(4);
    pen.entries.push_back(pv);
    for (const auto& sb : mg.sbs) {
      gc::PenaltyEntry pe;
      pe.sb_bus = sb.bus;
      pe.other_copy =
          Eigen::VectorXd::Constant(1, sb.total_load - sb.pv_forecast);
      pe.alpha = Eigen::VectorXd::Zero(1);
      pe.beta = Eigen::VectorXd::Ones(1);
      pen.entries.push_back(pe);
    }
    const gc::BuiltProblem mgc =
        gc::build_mgc_problem(mg, weights, pen, data.lambda, data.price);
    show(mg.name, gc::check_gradients(mgc.spec, mgc.x0));
  }

  for (const auto& sb : data.smart_buildings) {
    const gc::BuiltSbProblem sbc = gc::build_sbc_problem(
        sb, sb.total_load - sb.pv_forecast, 0.0, 1.0, data.price);
    show(fmt::format("sb:{}", sb.bus), gc::check_gradients(sbc.spec, sbc.x0));
  }
  return ok ? kExitOk : kExitError;
}

}  // namespace

int main(int argc, char** argv) {
  gc::set_log_level(gc::log_level_from_env(gc::LogLevel::info));

  CLI::App app{"Hierarchical grid/microgrid/building dispatch coordination"};
  app.require_subcommand(1);

  std::string case_path, scenario = "case1", out_dir, format = "json";
  std::vector<std::string> sets;
  int max_iter = 100;
  double eps1 = 1e-3, eps2 = 1e-3, sigma = 2.0;

  CLI::App* run = app.add_subcommand("run", "Run the coordination on a case");
  run->add_option("--case", case_path, "case file")->required();
  run->add_option("--scenario", scenario, "case1|case2");
  run->add_option("--out", out_dir, "output directory for report files");
  run->add_option("--format", format, "json|csv");
  run->add_option("--set", sets, "override key=value (price, lambda, alpha0, beta0)");
  run->add_option("--max-iter", max_iter, "iteration cap");
  run->add_option("--eps1", eps1, "objective-change tolerance");
  run->add_option("--eps2", eps2, "link mismatch tolerance");
  run->add_option("--sigma", sigma, "penalty growth multiplier");

  CLI::App* oracle =
      app.add_subcommand("oracle", "Single centralized solve of the whole case");
  oracle->add_option("--case", case_path, "case file")->required();
  oracle->add_option("--scenario", scenario, "case1|case2");
  oracle->add_option("--out", out_dir, "output directory for report files");
  oracle->add_option("--format", format, "json|csv");
  oracle->add_option("--set", sets, "override key=value (price, lambda)");

  CLI::App* validate = app.add_subcommand("validate", "Load and validate a case");
  validate->add_option("--case", case_path, "case file")->required();

  CLI::App* gradcheck =
      app.add_subcommand("gradcheck", "Finite-difference audit of all derivatives");
  gradcheck->add_option("--case", case_path, "case file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed())
      return cmd_run(case_path, scenario, out_dir, format, sets, max_iter, eps1,
                     eps2, sigma);
    if (oracle->parsed())
      return cmd_oracle(case_path, scenario, out_dir, format, sets);
    if (validate->parsed()) return cmd_validate(case_path);
    if (gradcheck->parsed()) return cmd_gradcheck(case_path);
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitError;
  }
  return kExitError;
}
