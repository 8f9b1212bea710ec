// Periodic grids over torus charts and derivative backends.
//
// Axis order is (x_1, y_1, ..., x_n, y_n) with z_j = x_j + i y_j and
// d_j = (d/dx_j - i d/dy_j)/2. Fields are stored component-major: each
// component is a contiguous row-major scalar grid, so one-axis FFTs can reuse
// a single FFTW guru plan per (chart, axis).
#pragma once

#include <memory>

#include "hcf/common.hpp"

namespace hcf {

struct TorusChart {
  int n = 0;                   // complex dimension
  std::vector<int> size;       // 2n entries, each even and >= 4
  std::vector<double> period;  // 2n entries, > 0

  TorusChart() = default;
  TorusChart(int n_, std::vector<int> size_, std::vector<double> period_);
  static TorusChart cubic(int n, int pts_per_axis, double period = 2.0 * kPi);

  int axes() const { return 2 * n; }
  size_t points() const;
  std::vector<size_t> strides() const;  // row-major
  double spacing(int axis) const { return period[axis] / size[axis]; }
  double min_spacing() const;
  // coordinate of the point with flat index p along the given axis
  double coordinate(size_t p, int axis) const;
  bool same_shape(const TorusChart& o) const { return n == o.n && size == o.size && period == o.period; }
};

enum class Backend { spectral, fd2 };

// multi-component complex field; comp_dims are the tensor slots (each of
// extent chart.n unless stated otherwise), flattened row-major
struct Field {
  TorusChart chart;
  std::vector<int> comp_dims;
  std::vector<cplx> data;  // comp-major: data[c * points + p]

  Field() = default;
  Field(TorusChart ch, std::vector<int> dims);
  int ncomp() const;
  size_t points() const { return chart.points(); }
  cplx* comp(int c) { return data.data() + static_cast<size_t>(c) * points(); }
  const cplx* comp(int c) const { return data.data() + static_cast<size_t>(c) * points(); }
  int comp_index(std::initializer_list<int> idx) const;
  double inf_norm() const;
  Field& operator+=(const Field& o);
  Field& operator-=(const Field& o);
  Field& operator*=(double s);
};

// derivative engine bound to one chart shape; owns the FFTW plans
class SpectralEngine {
 public:
  explicit SpectralEngine(const TorusChart& chart);
  ~SpectralEngine();
  SpectralEngine(const SpectralEngine&) = delete;
  SpectralEngine& operator=(const SpectralEngine&) = delete;

  // dst = d src / d(axis coordinate), spectral; dst may alias src
  void dreal(cplx* dst, const cplx* src, int axis) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// shared per-shape engine cache (FFTW planning is not free)
std::shared_ptr<SpectralEngine> spectral_engine(const TorusChart& chart);

// one scalar component derivative: d/dx_axis via the chosen backend
void deriv_real(cplx* dst, const cplx* src, const TorusChart& chart, int axis,
                Backend backend);

// complex derivatives of a whole field, componentwise:
// out has the same comp_dims; j in [0, n)
Field dhol(const Field& f, int j, Backend backend);   // 1/2 (d_x - i d_y)
Field dbar(const Field& f, int j, Backend backend);   // 1/2 (d_x + i d_y)

// fraction of spectral energy above half the Nyquist band, for the
// smoothness sanity check on test metrics
double high_mode_energy_fraction(const Field& f);

// 2/3-rule dealiasing: zero all modes with |k| > N/3 on every axis
void dealias_23(Field& f);

}  // namespace hcf
