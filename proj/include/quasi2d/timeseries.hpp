#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "quasi2d/tensor.hpp"

namespace q2d {

struct TimeSeriesRow {
  double time = 0.0;
  MatrixC rho;  // reduced system density matrix
  std::size_t link_dim = 1;
  std::size_t max_bond = 1;
  double discarded_weight = 0.0;  // cumulative

  double rho00() const { return rho(0, 0).real(); }
  double rho11() const { return rho(1, 1).real(); }
  cplx rho01() const { return rho(0, 1); }
  double trace_defect() const { return std::abs(rho00() + rho11() - 1.0); }
  double hermiticity_defect() const { return (rho - rho.adjoint()).cwiseAbs().maxCoeff(); }
};

struct TimeSeries {
  std::vector<TimeSeriesRow> rows;

  std::size_t size() const noexcept { return rows.size(); }

  std::vector<double> column_rho11() const {
    std::vector<double> v;
    v.reserve(rows.size());
    for (const auto& r : rows) v.push_back(r.rho11());
    return v;
  }

  double max_trace_defect() const {
    double m = 0.0;
    for (const auto& r : rows) m = std::max(m, std::abs(r.rho.trace() - cplx{1.0}));
    return m;
  }
  double max_hermiticity_defect() const {
    double m = 0.0;
    for (const auto& r : rows) m = std::max(m, r.hermiticity_defect());
    return m;
  }
  std::size_t peak_link_dim() const {
    std::size_t m = 0;
    for (const auto& r : rows) m = std::max(m, r.link_dim);
    return m;
  }

  static constexpr const char* header =
      "time,rho00,rho11,re_rho01,im_rho01,trace_defect,link_dim,max_bond,discarded_weight";

  std::string to_csv() const {
    std::string out = std::string(header) + "\n";
    char buf[512];
    for (const auto& r : rows) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%zu,%zu,%.17g\n", r.time, r.rho00(),
                    r.rho11(), r.rho01().real(), r.rho01().imag(), r.trace_defect(), r.link_dim, r.max_bond,
                    r.discarded_weight);
      out += buf;
    }
    return out;
  }

  void write_csv(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f << to_csv();
  }
};

/// Max over common rows of |a.rho11 - b.rho11|.
inline double max_population_deviation(const TimeSeries& a, const TimeSeries& b) {
  const std::size_t n = std::min(a.size(), b.size());
  double m = 0.0;
  for (std::size_t k = 0; k < n; ++k) m = std::max(m, std::abs(a.rows[k].rho11() - b.rows[k].rho11()));
  return m;
}

/// Max over common rows of the elementwise density-matrix difference.
inline double max_state_deviation(const TimeSeries& a, const TimeSeries& b) {
  const std::size_t n = std::min(a.size(), b.size());
  double m = 0.0;
  for (std::size_t k = 0; k < n; ++k) m = std::max(m, (a.rows[k].rho - b.rows[k].rho).cwiseAbs().maxCoeff());
  return m;
}

}  // namespace q2d
