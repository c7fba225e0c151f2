#pragma once

#include <Eigen/Core>
#include <complex>
#include <map>
#include <span>
#include <vector>

#include "gridcascade/case_data.hpp"

namespace gridcascade {

/// Dense bus admittance matrix over a bus subset, indexed by subset position.
struct AdmittanceMatrix {
  Eigen::MatrixXcd y;
  std::vector<int> bus_ids;   // position -> bus id
  std::map<int, int> pos;     // bus id -> position

  int size() const { return static_cast<int>(bus_ids.size()); }
  int pos_of(int bus_id) const;
};

/// Series admittance of a line, 1/(r + jx).
std::complex<double> series_admittance(const Line& line);

/// Builds Y over `bus_subset` from every line of `lines` whose endpoints are
/// both in the subset. Diagonals accumulate incident series admittances plus
/// half the line charging at each end; off-diagonals are minus the series
/// admittance.
AdmittanceMatrix build_admittance(std::span<const Line> lines,
                                  const std::vector<int>& bus_subset);

AdmittanceMatrix build_admittance(const CaseData& data,
                                  const std::vector<int>& bus_subset);

}  // namespace gridcascade
