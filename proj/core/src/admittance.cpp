#include "gridcascade/admittance.hpp"

#include <fmt/core.h>

#include <set>

namespace gridcascade {

int AdmittanceMatrix::pos_of(int bus_id) const {
  auto it = pos.find(bus_id);
  if (it == pos.end())
    throw std::out_of_range(fmt::format("bus {} not in admittance subset", bus_id));
  return it->second;
}

std::complex<double> series_admittance(const Line& line) {
  return 1.0 / std::complex<double>(line.resistance, line.reactance);
}

AdmittanceMatrix build_admittance(std::span<const Line> lines,
                                  const std::vector<int>& bus_subset) {
  if (bus_subset.empty())
    throw std::invalid_argument("build_admittance: empty bus subset");
  AdmittanceMatrix m;
  m.bus_ids = bus_subset;
  for (size_t i = 0; i < bus_subset.size(); ++i)
    m.pos[bus_subset[i]] = static_cast<int>(i);
  const int n = m.size();
  m.y = Eigen::MatrixXcd::Zero(n, n);
  for (const Line& l : lines) {
    auto fi = m.pos.find(l.from_bus);
    auto ti = m.pos.find(l.to_bus);
    if (fi == m.pos.end() || ti == m.pos.end()) continue;
    const auto ys = series_admittance(l);
    const std::complex<double> half_shunt(0.0, l.shunt_susceptance / 2.0);
    const int f = fi->second, t = ti->second;
    m.y(f, f) += ys + half_shunt;
    m.y(t, t) += ys + half_shunt;
    m.y(f, t) -= ys;
    m.y(t, f) -= ys;
  }
  return m;
}

AdmittanceMatrix build_admittance(const CaseData& data,
                                  const std::vector<int>& bus_subset) {
  return build_admittance(std::span<const Line>(data.lines), bus_subset);
}

}  // namespace gridcascade
