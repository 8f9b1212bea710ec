#include "hcf/flow_ode.hpp"

#include <algorithm>

#include "hcf/parallel.hpp"

namespace hcf {

Endo TimeEndo::at(double t, int n) const {
  if (values.empty()) return Mat::Zero(n, n);
  size_t idx = 0;
  while (idx + 1 < times.size() && times[idx + 1] <= t) ++idx;
  return values[idx];
}

std::vector<Endo> TimeEndoList::at(double t) const {
  if (values.empty()) return {};
  size_t idx = 0;
  while (idx + 1 < times.size() && times[idx + 1] <= t) ++idx;
  return values[idx];
}

CurvatureOperator phi_rhs(const CurvatureOperator& om, const Endo& v,
                          const std::vector<Endo>& a) {
  const int n = om.n();
  require(om.metric.is_identity(), "phi_rhs expects a unitary frame (g = Id)");
  require(v.rows() == n, "phi_rhs: v dimension mismatch");
  Mat rhs = om.H * om.H;               // Omega^2 at g = Id
  rhs += sharp_square(om).H;           // Omega^#
  Mat A = ad_matrix(v);
  rhs += A * om.H + om.H * A.adjoint();  // ad_v Omega
  for (const Endo& ai : a) {
    require(ai.rows() == n, "phi_rhs: a dimension mismatch");
    Vec c = vec_endo(ai);
    rhs += c * c.adjoint();            // AA^*
  }
  return CurvatureOperator(enforce_hermitian(std::move(rhs), 1e-13, 1e-7),
                           om.metric);
}

namespace {

Mat rhs_matrix(const Mat& H, double t, const OdeConfig& cfg, int n) {
  CurvatureOperator om(H, HermitianMetric::identity(n));
  return phi_rhs(om, cfg.v.at(t, n), cfg.a.at(t)).H;
}

}  // namespace

Trajectory integrate(const CurvatureOperator& om0, const OdeConfig& cfg) {
  const int n = om0.n();
  require(om0.metric.is_identity(), "integrate expects a unitary frame (g = Id)");
  require(cfg.t_end >= 0.0, "t_end must be >= 0");

  const double scale0 = std::max(1.0, om0.H.norm());
  const double blowup = cfg.blowup_factor * scale0;
  double dt = cfg.dt > 0.0 ? cfg.dt : 1e-3 / (1.0 + om0.H.norm());

  Trajectory traj;
  Mat H = enforce_hermitian(om0.H);
  double t = 0.0;
  int step = 0;
  auto record = [&](double tt, const Mat& state) {
    traj.times.push_back(tt);
    traj.states.emplace_back(state, HermitianMetric::identity(n));
  };
  record(t, H);

  auto accept = [&](Mat next, double tt) {
    traj.herm_drift_max = std::max(traj.herm_drift_max, hermiticity_defect(next));
    next = 0.5 * (next + next.adjoint().eval());
    H = std::move(next);
    t = tt;
    ++step;
    if (H.norm() > blowup) {
      traj.blown_up = true;
      record(t, H);
      return false;
    }
    if (step % std::max(1, cfg.record_every) == 0 || t >= cfg.t_end - 1e-15) record(t, H);
    return true;
  };

  if (cfg.integrator == OdeConfig::Integrator::rk4) {
    while (t < cfg.t_end - 1e-15) {
      const double h = std::min(dt, cfg.t_end - t);
      Mat k1 = rhs_matrix(H, t, cfg, n);
      Mat k2 = rhs_matrix(H + 0.5 * h * k1, t + 0.5 * h, cfg, n);
      Mat k3 = rhs_matrix(H + 0.5 * h * k2, t + 0.5 * h, cfg, n);
      Mat k4 = rhs_matrix(H + h * k3, t + h, cfg, n);
      Mat next = H + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      if (!accept(std::move(next), t + h)) break;
    }
  } else {
    // Dormand-Prince 5(4)
    static const double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    while (t < cfg.t_end - 1e-15) {
      const double h = std::min(dt, cfg.t_end - t);
      Mat k1 = rhs_matrix(H, t, cfg, n);
      Mat k2 = rhs_matrix(H + h * (1.0 / 5) * k1, t + c2 * h, cfg, n);
      Mat k3 = rhs_matrix(H + h * (3.0 / 40 * k1 + 9.0 / 40 * k2), t + c3 * h, cfg, n);
      Mat k4 = rhs_matrix(H + h * (44.0 / 45 * k1 - 56.0 / 15 * k2 + 32.0 / 9 * k3),
                          t + c4 * h, cfg, n);
      Mat k5 = rhs_matrix(H + h * (19372.0 / 6561 * k1 - 25360.0 / 2187 * k2 +
                                   64448.0 / 6561 * k3 - 212.0 / 729 * k4),
                          t + c5 * h, cfg, n);
      Mat k6 = rhs_matrix(H + h * (9017.0 / 3168 * k1 - 355.0 / 33 * k2 +
                                   46732.0 / 5247 * k3 + 49.0 / 176 * k4 -
                                   5103.0 / 18656 * k5),
                          t + h, cfg, n);
      Mat y5 = H + h * (35.0 / 384 * k1 + 500.0 / 1113 * k3 + 125.0 / 192 * k4 -
                        2187.0 / 6784 * k5 + 11.0 / 84 * k6);
      Mat k7 = rhs_matrix(y5, t + h, cfg, n);
      Mat y4 = H + h * (5179.0 / 57600 * k1 + 7571.0 / 16695 * k3 + 393.0 / 640 * k4 -
                        92097.0 / 339200 * k5 + 187.0 / 2100 * k6 + 1.0 / 40 * k7);
      const double err = (y5 - y4).norm();
      const double tol = cfg.rk45_atol + cfg.rk45_rtol * std::max(H.norm(), y5.norm());
      if (err <= tol) {
        if (!accept(std::move(y5), t + h)) break;
        dt = h * std::clamp(0.9 * std::pow(tol / std::max(err, 1e-300), 0.2), 1.0, 5.0);
      } else {
        dt = h * std::clamp(0.9 * std::pow(tol / err, 0.2), 0.2, 1.0);
        if (dt < cfg.rk45_dt_min)
          throw NumericalError("integrate: adaptive step underflow");
      }
    }
  }
  return traj;
}

double p4_check(const CurvatureOperator& om, const Endo& u, const Endo& v,
                const std::vector<Endo>& a, double f_of_u, double contact_tol) {
  const double scale = std::max(1.0, inf_norm(om.H));
  const double defect = std::abs(evaluate(om, u) - f_of_u);
  if (defect > contact_tol * scale)
    throw NumericalError("p4_check: (Omega, u) is not a boundary contact, defect " +
                         std::to_string(defect));
  return evaluate(phi_rhs(om, v, a), u);
}

InvarianceReport invariance_experiment(const ConeSpec& cone, int samples, int n,
                                       const OdeConfig& cfg, uint64_t seed,
                                       double violation_tol,
                                       const MarginOptions& mopts) {
  InvarianceReport rep;
  rep.samples = samples;
  rep.worst_margin = std::numeric_limits<double>::infinity();
  std::vector<std::vector<InvarianceRow>> rows(samples);
  std::vector<double> scales(samples, 0.0);
  std::vector<double> violations(samples, std::numeric_limits<double>::infinity());
  std::vector<int> blowups(samples, 0);

  parallel_for(samples, [&](int s) {
    Rng rng = Rng(seed).fork(static_cast<uint64_t>(s) + 1);
    // initial data: alternate interior PSD operators and boundary contacts
    CurvatureOperator om0(n);
    if (s % 2 == 0) {
      std::vector<Endo> gens;
      const int count = n * n;
      for (int i = 0; i < count; ++i) gens.push_back(rng.complex_gaussian(n, n));
      om0 = gram(gens);
      om0.H /= std::max(1.0, om0.H.norm());
      // lift so trace_square cones start inside as well
      MarginOptions mo = mopts;
      mo.seed = seed ^ (0x77 + s);
      double m0 = margin(om0, cone, mo).margin;
      if (m0 < 0.0) om0.H -= (m0 - 1e-3) * Mat::Identity(n * n, n * n);
    } else {
      Rng brng = rng.fork(0xb0);
      MarginOptions mo = mopts;
      mo.seed = seed ^ (0x99 + s);
      om0 = boundary_sample(cone, brng, 1.0, n, 1e-8, mo).om;
    }
    scales[s] = std::max(1.0, om0.H.norm());

    OdeConfig run = cfg;
    // random piecewise-constant sources (three segments over [0, t_end])
    if (run.v.empty()) {
      TimeEndo v;
      for (int seg = 0; seg < 3; ++seg) {
        v.times.push_back(run.t_end * seg / 3.0);
        v.values.push_back(0.5 * rng.complex_gaussian(n, n));
      }
      run.v = v;
    }
    if (run.a.empty()) {
      TimeEndoList al;
      for (int seg = 0; seg < 3; ++seg) {
        al.times.push_back(run.t_end * seg / 3.0);
        std::vector<Endo> lst;
        for (int i = 0; i < 2; ++i) lst.push_back(0.5 * rng.complex_gaussian(n, n));
        al.values.push_back(std::move(lst));
      }
      run.a = al;
    }

    Trajectory traj = integrate(om0, run);
    if (traj.blown_up) blowups[s] = 1;
    MarginOptions mo = mopts;
    mo.restarts = std::max(4, mopts.restarts / 4);
    std::optional<Endo> warm;
    for (size_t k = 0; k < traj.states.size(); ++k) {
      mo.seed = seed ^ (1000 + 17 * s + k);
      mo.warm_start = warm;
      MembershipReport mr = margin(traj.states[k], cone, mo);
      warm = mr.minimizer;
      rows[s].push_back({s, traj.times[k], mr.margin, traj.states[k].H.norm()});
      if (mr.margin < -violation_tol * scales[s] &&
          traj.times[k] < violations[s])
        violations[s] = traj.times[k];
    }
  });

  for (int s = 0; s < samples; ++s) {
    for (const auto& r : rows[s]) {
      rep.rows.push_back(r);
      rep.worst_margin = std::min(rep.worst_margin, r.margin);
    }
    rep.initial_scale = std::max(rep.initial_scale, scales[s]);
    rep.first_violation_time = std::min(rep.first_violation_time, violations[s]);
    rep.blown_up += blowups[s];
  }
  return rep;
}

}  // namespace hcf
