// Hermitian curvature flow on torus charts: metric evolution, the clean
// curvature evolution right-hand side, and the monitors (second scalar
// curvature, Lee-form residual, pointwise cone margins).
#pragma once

#include "hcf/cones.hpp"
#include "hcf/geometry.hpp"

namespace hcf {

struct PdeConfig {
  enum class TimeIntegrator { rk4, euler };
  TimeIntegrator integrator = TimeIntegrator::rk4;
  double dt = 0.0;  // 0: stability cap from the initial metric
  double t_end = 0.0;
  int record_every = 1;
  double c_h = 0.2;       // CFL safety factor
  double pd_floor = 1e-8;
  bool dealias = true;    // 2/3-rule truncation of the nonlinear right-hand side
  Backend backend = Backend::spectral;
};

struct FlowRecord {
  std::vector<double> times;
  std::vector<MetricField> snapshots;
  double dt_used = 0.0;
  bool aborted = false;
  std::string abort_reason;
};

// -S^{(2)} - Q
Field hcf_rhs(const MetricField& g, Backend backend, bool dealias = false);

// explicit-step cap: min(c_h h^2 lambda_min(g), 0.1 lambda_min(g)/max(1, sup|rhs|))
double stability_dt(const MetricField& g, const Field& rhs, double c_h);

FlowRecord evolve(const MetricField& g0, const PdeConfig& cfg);

// raised curvature Omega_{i jbar}^{ lbar k} as a field [k][i][l][j]
Field raised_curvature(const MetricWork& w, const CurvatureField& om);

// Delta^T Omega + Omega^2 + Omega^# + D(nabla T) + ad_v Omega, all in chart
// coordinates on the raised tensor; v = 1/2 raise(S^(4))
Field curvature_rhs_clear(const MetricField& g, Backend backend);

// operator at one grid point, transported to the Cholesky unitary frame
CurvatureOperator point_operator(const Field& om4, const MetricField& g, size_t p);

// margins of every grid point for each cone (warm-started sweeps)
std::vector<std::vector<double>> pointwise_margins(const MetricField& g,
                                                   const std::vector<ConeSpec>& cones,
                                                   Backend backend,
                                                   const MarginOptions& mopts = {});
double worst_margin_over_grid(const MetricField& g, const ConeSpec& cone,
                              Backend backend, const MarginOptions& mopts = {});

struct ShatReport {
  std::vector<double> inf_series;      // inf over the grid per snapshot
  double min_step_increase = 0.0;      // min consecutive difference
  std::vector<double> eq51_residuals;  // interior snapshots, sup norm
  double max_residual = 0.0;
  bool monotone(double per_step_tol) const {
    return min_step_increase >= -per_step_tol;
  }
};
ShatReport shat_monitor(const FlowRecord& rec, Backend backend);

struct ConeSeries {
  std::vector<std::string> cone_names;
  std::vector<std::vector<double>> worst_margins;  // [cone][snapshot]
};
ConeSeries pointwise_cone_monitor(const FlowRecord& rec,
                                  const std::vector<ConeSpec>& cones,
                                  Backend backend, const MarginOptions& mopts = {});

// Lee-form residual along a run
std::vector<double> rho_residual_series(const FlowRecord& rec, Backend backend);

struct GriffithsStart {
  MetricField g;
  double achieved_margin = 0.0;
  double preflow_time = 0.0;
};
// constructed Griffiths-nonnegative initial data: a small non-Kahler
// perturbation pre-flowed until the pointwise certifier reports >= target
GriffithsStart griffiths_preflowed(const TorusChart& chart, double amp,
                                   double margin_target = -5e-7,
                                   double max_time = 60.0,
                                   Backend backend = Backend::spectral);

}  // namespace hcf
