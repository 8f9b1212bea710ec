// Pointwise curvature ODE d/dt Omega = Omega^2 + Omega^# + ad_v Omega + AA^*,
// RK4 / adaptive RK45 integration, P4 boundary checks and the cone-invariance
// experiment harness. Everything here lives in a unitary frame (g = Id).
#pragma once

#include <functional>

#include "hcf/cones.hpp"

namespace hcf {

// piecewise-constant-in-time endomorphism (constant if one entry, zero if none)
struct TimeEndo {
  std::vector<double> times;  // segment start times, ascending
  std::vector<Endo> values;

  static TimeEndo zero() { return {}; }
  static TimeEndo constant(Endo v) { return {{0.0}, {std::move(v)}}; }
  bool empty() const { return values.empty(); }
  Endo at(double t, int n) const;
};

struct TimeEndoList {
  std::vector<double> times;
  std::vector<std::vector<Endo>> values;

  static TimeEndoList zero() { return {}; }
  static TimeEndoList constant(std::vector<Endo> a) { return {{0.0}, {std::move(a)}}; }
  bool empty() const { return values.empty(); }
  std::vector<Endo> at(double t) const;
};

struct OdeConfig {
  enum class Integrator { rk4, rk45 };
  Integrator integrator = Integrator::rk4;
  double dt = 0.0;     // 0: default 1e-3 / (1 + ||Omega0||)
  double t_end = 0.0;
  int record_every = 1;
  double blowup_factor = 1e8;  // abort when ||Omega|| > factor * max(1, ||Omega0||)
  double rk45_rtol = 1e-8;
  double rk45_atol = 1e-10;
  double rk45_dt_min = 1e-12;
  TimeEndo v;
  TimeEndoList a;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<CurvatureOperator> states;
  bool blown_up = false;
  double herm_drift_max = 0.0;  // max per-step Hermiticity defect before resymmetrization
};

// phi(Omega) = Omega^2 + Omega^# + ad_v Omega + AA^*
CurvatureOperator phi_rhs(const CurvatureOperator& om, const Endo& v,
                          const std::vector<Endo>& a);

Trajectory integrate(const CurvatureOperator& om0, const OdeConfig& cfg);

// evaluate(phi(Omega), u (x) conj u) at a boundary contact; rejects pairs whose
// pairing defect |<Omega,u (x) u> - f_of_u| exceeds contact_tol * scale
double p4_check(const CurvatureOperator& om, const Endo& u, const Endo& v,
                const std::vector<Endo>& a, double f_of_u = 0.0,
                double contact_tol = 1e-6);

struct InvarianceRow {
  int sample = 0;
  double t = 0.0;
  double margin = 0.0;
  double norm = 0.0;
};

struct InvarianceReport {
  std::vector<InvarianceRow> rows;
  double worst_margin = 0.0;       // over all samples and times
  double initial_scale = 0.0;      // max initial ||Omega0||
  double first_violation_time = std::numeric_limits<double>::infinity();
  int samples = 0;
  int blown_up = 0;
};

// samples initial operators with margin >= 0 (interior PSD and boundary mix),
// integrates each with random piecewise-constant (v, A), reports margins
InvarianceReport invariance_experiment(const ConeSpec& cone, int samples, int n,
                                       const OdeConfig& cfg, uint64_t seed,
                                       double violation_tol = 1e-6,
                                       const MarginOptions& mopts = {});

}  // namespace hcf
