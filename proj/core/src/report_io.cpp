#include <fmt/core.h>

#include <fstream>

#include <json.hpp>

#include "gridcascade/harness.hpp"

namespace gridcascade {

using nlohmann::json;

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
  out << content;
  if (!out) throw std::runtime_error(fmt::format("write failed for '{}'", path.string()));
}

std::string csv_num(double v) { return fmt::format("{:.6g}", v); }

json trace_to_json(const Report& rep) {
  json rows = json::array();
  for (const auto& r : rep.trace) {
    json row;
    row["k"] = r.k;
    row["f_star"] = r.f_star;
    row["mismatch"] = r.mismatch;
    row["alpha_max"] = r.alpha_max;
    row["beta_max"] = r.beta_max;
    rows.push_back(std::move(row));
  }
  return rows;
}

void emit_json(const Report& rep, const std::filesystem::path& dir) {
  json sb = json::array();
  for (const auto& r : rep.sb_dispatch)
    sb.push_back({{"bus", r.bus}, {"p_l", r.p_l}, {"p_ess", r.p_ess},
                  {"p_pv", r.p_pv}, {"p_b", r.p_b}});
  write_file(dir / "sb_dispatch.json", sb.dump(2) + "\n");

  json dg = json::array();
  for (const auto& r : rep.dg_dispatch)
    dg.push_back({{"bus", r.bus}, {"p_dg", r.p_dg}, {"q_dg", r.q_dg}});
  write_file(dir / "dg_dispatch.json", dg.dump(2) + "\n");

  const json grid = {{"p", rep.grid_p}, {"q", rep.grid_q}};
  write_file(dir / "grid_exchange.json", grid.dump(2) + "\n");

  json bus = json::array();
  for (const auto& r : rep.bus_table)
    bus.push_back({{"bus", r.bus}, {"v_pu", r.v_pu}, {"delta_rad", r.delta_rad}});
  write_file(dir / "bus_table.json", bus.dump(2) + "\n");

  json mg = json::array();
  for (const auto& r : rep.mg_exchange)
    mg.push_back({{"mg_id", r.mg_id}, {"p_mg", r.p_mg}, {"q_mg", r.q_mg},
                  {"s_mg", r.s_mg}});
  write_file(dir / "mg_exchange.json", mg.dump(2) + "\n");

  write_file(dir / "trace.json", trace_to_json(rep).dump(2) + "\n");

  const json run = {{"scenario", rep.scenario},
                    {"converged", rep.converged},
                    {"iterations", rep.iterations}};
  write_file(dir / "run.json", run.dump(2) + "\n");
}

void emit_csv(const Report& rep, const std::filesystem::path& dir) {
  std::string s = "bus,p_l,p_ess,p_pv,p_b\n";
  for (const auto& r : rep.sb_dispatch)
    s += fmt::format("{},{},{},{},{}\n", r.bus, csv_num(r.p_l), csv_num(r.p_ess),
                     csv_num(r.p_pv), csv_num(r.p_b));
  write_file(dir / "sb_dispatch.csv", s);

  s = "bus,p_dg,q_dg\n";
  for (const auto& r : rep.dg_dispatch)
    s += fmt::format("{},{},{}\n", r.bus, csv_num(r.p_dg), csv_num(r.q_dg));
  write_file(dir / "dg_dispatch.csv", s);

  s = fmt::format("p,q\n{},{}\n", csv_num(rep.grid_p), csv_num(rep.grid_q));
  write_file(dir / "grid_exchange.csv", s);

  s = "bus,v_pu,delta_rad\n";
  for (const auto& r : rep.bus_table)
    s += fmt::format("{},{},{}\n", r.bus, csv_num(r.v_pu), csv_num(r.delta_rad));
  write_file(dir / "bus_table.csv", s);

  s = "mg_id,p_mg,q_mg,s_mg\n";
  for (const auto& r : rep.mg_exchange)
    s += fmt::format("{},{},{},{}\n", r.mg_id, csv_num(r.p_mg), csv_num(r.q_mg),
                     csv_num(r.s_mg));
  write_file(dir / "mg_exchange.csv", s);

  // Column order: k, then f_star/mismatch/alpha/beta groups in name order.
  s = "k";
  if (!rep.trace.empty()) {
    for (const auto& [name, _] : rep.trace.front().f_star)
      s += fmt::format(",f_star.{}", name);
    for (const auto& [name, _] : rep.trace.front().mismatch)
      s += fmt::format(",mismatch.{}", name);
    for (const auto& [name, _] : rep.trace.front().alpha_max)
      s += fmt::format(",alpha_max.{}", name);
    for (const auto& [name, _] : rep.trace.front().beta_max)
      s += fmt::format(",beta_max.{}", name);
  }
  s += "\n";
  for (const auto& r : rep.trace) {
    s += fmt::format("{}", r.k);
    for (const auto& [_, v] : r.f_star) s += "," + csv_num(v);
    for (const auto& [_, v] : r.mismatch) s += "," + csv_num(v);
    for (const auto& [_, v] : r.alpha_max) s += "," + csv_num(v);
    for (const auto& [_, v] : r.beta_max) s += "," + csv_num(v);
    s += "\n";
  }
  write_file(dir / "trace.csv", s);

  s = fmt::format("scenario,converged,iterations\n{},{},{}\n", rep.scenario,
                  rep.converged ? 1 : 0, rep.iterations);
  write_file(dir / "run.csv", s);
}

}  // namespace

void emit_report(const Report& rep, ReportFormat format,
                 const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  if (format == ReportFormat::json)
    emit_json(rep, out_dir);
  else
    emit_csv(rep, out_dir);
}

Report parse_report_json(const std::filesystem::path& dir) {
  auto read = [&](const char* name) {
    std::ifstream in(dir / name);
    if (!in) throw std::runtime_error(fmt::format("cannot open '{}'", name));
    return json::parse(in);
  };
  Report rep;
  const json run = read("run.json");
  rep.scenario = run.at("scenario").get<std::string>();
  rep.converged = run.at("converged").get<bool>();
  rep.iterations = run.at("iterations").get<int>();
  for (const auto& r : read("sb_dispatch.json"))
    rep.sb_dispatch.push_back({r.at("bus").get<int>(), r.at("p_l").get<double>(),
                               r.at("p_ess").get<double>(),
                               r.at("p_pv").get<double>(),
                               r.at("p_b").get<double>()});
  for (const auto& r : read("dg_dispatch.json"))
    rep.dg_dispatch.push_back({r.at("bus").get<int>(), r.at("p_dg").get<double>(),
                               r.at("q_dg").get<double>()});
  const json grid = read("grid_exchange.json");
  rep.grid_p = grid.at("p").get<double>();
  rep.grid_q = grid.at("q").get<double>();
  for (const auto& r : read("bus_table.json"))
    rep.bus_table.push_back({r.at("bus").get<int>(), r.at("v_pu").get<double>(),
                             r.at("delta_rad").get<double>()});
  for (const auto& r : read("mg_exchange.json"))
    rep.mg_exchange.push_back({r.at("mg_id").get<int>(), r.at("p_mg").get<double>(),
                               r.at("q_mg").get<double>(),
                               r.at("s_mg").get<double>()});
  for (const auto& r : read("trace.json")) {
    Report::TraceRow row;
    row.k = r.at("k").get<int>();
    row.f_star = r.at("f_star").get<std::map<std::string, double>>();
    row.mismatch = r.at("mismatch").get<std::map<std::string, double>>();
    row.alpha_max = r.at("alpha_max").get<std::map<std::string, double>>();
    row.beta_max = r.at("beta_max").get<std::map<std::string, double>>();
    rep.trace.push_back(std::move(row));
  }
  return rep;
}

}  // namespace gridcascade
