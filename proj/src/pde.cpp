#include "hcf/pde.hpp"

#include "hcf/parallel.hpp"

namespace hcf {

Field hcf_rhs(const MetricField& g, Backend backend, bool dealias) {
  MetricWork w = analyze_metric(g, backend);
  CurvatureField om = chern_curvature(w);
  RicciData ric = ricci_contractions(om, w);
  Field q = q_term(w);
  Field rhs = ric.s2;
  rhs += q;
  rhs *= -1.0;
  if (dealias && backend == Backend::spectral) dealias_23(rhs);
  // the analytic right-hand side is Hermitian; pin it against roundoff
  const int n = g.n();
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      cplx* a = rhs.comp(i * n + j);
      cplx* b = rhs.comp(j * n + i);
      for (size_t p = 0; p < rhs.points(); ++p) {
        const cplx m = 0.5 * (a[p] + std::conj(b[p]));
        a[p] = m;
        b[p] = std::conj(m);
      }
    }
  return rhs;
}

double stability_dt(const MetricField& g, const Field& rhs, double c_h) {
  const double h = g.chart.min_spacing();
  const double lam = g.min_eigenvalue();
  double sup = 0.0;
  for (const cplx& z : rhs.data) sup = std::max(sup, std::abs(z));
  const double diffusive = c_h * h * h * lam;
  const double zeroth = 0.1 * lam / std::max(1.0, sup);
  return std::min(diffusive, zeroth);
}

FlowRecord evolve(const MetricField& g0, const PdeConfig& cfg) {
  require(cfg.t_end > 0.0, "evolve: t_end must be positive");
  FlowRecord rec;
  MetricField g = g0;
  const double scale0 = g.g.inf_norm();

  Field rhs0 = hcf_rhs(g, cfg.backend, cfg.dealias);
  rec.dt_used = cfg.dt > 0.0 ? cfg.dt : stability_dt(g, rhs0, cfg.c_h);

  double t = 0.0;
  int step = 0;
  rec.times.push_back(t);
  rec.snapshots.push_back(g);
  auto add = [&](const MetricField& m, const Field& k, double w) {
    MetricField out = m;
    for (size_t i = 0; i < out.g.data.size(); ++i) out.g.data[i] += w * k.data[i];
    return out;
  };
  try {
    while (t < cfg.t_end - 1e-15) {
      const double dt = std::min(rec.dt_used, cfg.t_end - t);
      if (cfg.integrator == PdeConfig::TimeIntegrator::euler) {
        Field k1 = hcf_rhs(g, cfg.backend, cfg.dealias);
        g = add(g, k1, dt);
      } else {
        Field k1 = hcf_rhs(g, cfg.backend, cfg.dealias);
        Field k2 = hcf_rhs(add(g, k1, 0.5 * dt), cfg.backend, cfg.dealias);
        Field k3 = hcf_rhs(add(g, k2, 0.5 * dt), cfg.backend, cfg.dealias);
        Field k4 = hcf_rhs(add(g, k3, dt), cfg.backend, cfg.dealias);
        for (size_t i = 0; i < g.g.data.size(); ++i)
          g.g.data[i] += dt / 6.0 * (k1.data[i] + 2.0 * k2.data[i] + 2.0 * k3.data[i] +
                                     k4.data[i]);
      }
      t += dt;
      ++step;
      if (g.g.inf_norm() > 1e3 * std::max(1.0, scale0))
        throw NumericalError("norm explosion (CFL violation?)");
      if (g.min_eigenvalue() < cfg.pd_floor)
        throw NumericalError("metric lost positivity");
      if (step % std::max(1, cfg.record_every) == 0 || t >= cfg.t_end - 1e-15) {
        rec.times.push_back(t);
        rec.snapshots.push_back(g);
      }
    }
  } catch (const NumericalError& err) {
    rec.aborted = true;
    rec.abort_reason = err.what();
  }
  return rec;
}

Field raised_curvature(const MetricWork& w, const CurvatureField& om) {
  const int n = w.g.n();
  const size_t pts = w.g.chart.points();
  Field pr(w.g.chart, {n, n, n, n});  // [k][i][l][j]
  for (size_t p = 0; p < pts; ++p)
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int l = 0; l < n; ++l)
          for (int j = 0; j < n; ++j) {
            cplx s(0, 0);
            for (int m = 0; m < n; ++m)
              for (int nn = 0; nn < n; ++nn)
                s += om.om.comp(((i * n + j) * n + m) * n + nn)[p] *
                     w.gup.comp(m * n + l)[p] * w.gup.comp(k * n + nn)[p];
            pr.comp(((k * n + i) * n + l) * n + j)[p] = s;
          }
  return pr;
}

Field curvature_rhs_clear(const MetricField& g, Backend backend) {
  MetricWork w = analyze_metric(g, backend);
  const int n = g.n();
  const size_t pts = g.chart.points();
  CurvatureField om = chern_curvature(w);
  RicciData ric = ricci_contractions(om, w);
  Field pr = raised_curvature(w, om);

  const Signature sig_raised{Idx::hol_up, Idx::hol_down, Idx::anti_up, Idx::anti_down};
  Field out = laplacian_T(pr, sig_raised, w);
  out += dnablaT_term(w);

  auto prc = [&](int k, int i, int l, int j) { return pr.comp(((k * n + i) * n + l) * n + j); };
  std::vector<cplx> V(static_cast<size_t>(n) * n);
  for (size_t p = 0; p < pts; ++p) {
    // v^b_a = 1/2 S4_{a sbar} g^{b sbar}  (sign pinned by the consistency test)
    for (int b = 0; b < n; ++b)
      for (int a = 0; a < n; ++a) {
        cplx s(0, 0);
        for (int ss = 0; ss < n; ++ss)
          s += ric.s4.comp(a * n + ss)[p] * w.gup.comp(b * n + ss)[p];
        V[b * n + a] = 0.5 * s;
      }
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int l = 0; l < n; ++l)
          for (int j = 0; j < n; ++j) {
            cplx acc(0, 0);
            // Omega^2 = g^{m nbar} g_{p sbar} PR[k,i,s,nn] PR[p,m,l,j]
            for (int m = 0; m < n; ++m)
              for (int nn = 0; nn < n; ++nn)
                for (int pp = 0; pp < n; ++pp)
                  for (int ss = 0; ss < n; ++ss)
                    acc += w.gup.comp(m * n + nn)[p] * w.g.g.comp(pp * n + ss)[p] *
                           prc(k, i, ss, nn)[p] * prc(pp, m, l, j)[p];
            // Omega^#
            for (int pp = 0; pp < n; ++pp)
              for (int nn = 0; nn < n; ++nn)
                acc += prc(k, pp, l, nn)[p] * prc(pp, i, nn, j)[p] -
                       prc(k, pp, nn, j)[p] * prc(pp, i, l, nn)[p];
            // ad_v
            for (int pp = 0; pp < n; ++pp)
              acc += V[k * n + pp] * prc(pp, i, l, j)[p] -
                     V[pp * n + i] * prc(k, pp, l, j)[p] +
                     std::conj(V[l * n + pp]) * prc(k, i, pp, j)[p] -
                     std::conj(V[pp * n + j]) * prc(k, i, l, pp)[p];
            out.comp(((k * n + i) * n + l) * n + j)[p] += acc;
          }
  }
  return out;
}

CurvatureOperator point_operator(const Field& om4, const MetricField& g, size_t p) {
  const int n = g.n();
  IndexedCurvature t4(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l)
          t4.at(i, j, k, l) = om4.comp(((i * n + j) * n + k) * n + l)[p];
  HermitianMetric gp(g.at_point(p));
  CurvatureOperator op = from_indexed(t4, gp);
  return to_unitary_frame(op);
}

std::vector<std::vector<double>> pointwise_margins(const MetricField& g,
                                                   const std::vector<ConeSpec>& cones,
                                                   Backend backend,
                                                   const MarginOptions& mopts) {
  MetricWork w = analyze_metric(g, backend);
  CurvatureField om = chern_curvature(w);
  const size_t pts = g.chart.points();
  std::vector<std::vector<double>> out(cones.size(), std::vector<double>(pts, 0.0));

  const int workers = worker_count();
  const size_t chunk = (pts + workers - 1) / workers;
  parallel_for(workers, [&](int wi) {
    const size_t lo = wi * chunk;
    const size_t hi = std::min(pts, lo + chunk);
    std::vector<std::optional<Endo>> warm(cones.size());
    for (size_t p = lo; p < hi; ++p) {
      CurvatureOperator op = point_operator(om.om, g, p);
      for (size_t c = 0; c < cones.size(); ++c) {
        MarginOptions mo = mopts;
        mo.restarts = std::max(4, mopts.restarts / 4);
        mo.warm_start = warm[c];
        mo.seed = mopts.seed ^ (p * 2654435761ULL + c);
        MembershipReport rep = margin(op, cones[c], mo);
        out[c][p] = rep.margin;
        warm[c] = rep.minimizer;
      }
    }
  });
  return out;
}

double worst_margin_over_grid(const MetricField& g, const ConeSpec& cone,
                              Backend backend, const MarginOptions& mopts) {
  auto m = pointwise_margins(g, {cone}, backend, mopts);
  double worst = std::numeric_limits<double>::infinity();
  for (double v : m[0]) worst = std::min(worst, v);
  return worst;
}

namespace {

Field shat_field(const MetricField& g, Backend backend) {
  MetricWork w = analyze_metric(g, backend);
  CurvatureField om = chern_curvature(w);
  RicciData ric = ricci_contractions(om, w);
  return ric.shat;
}

double field_min_real(const Field& f) {
  double m = std::numeric_limits<double>::infinity();
  for (const cplx& z : f.data) m = std::min(m, z.real());
  return m;
}

}  // namespace

ShatReport shat_monitor(const FlowRecord& rec, Backend backend) {
  ShatReport rep;
  std::vector<Field> shat;
  for (const MetricField& g : rec.snapshots) shat.push_back(shat_field(g, backend));
  for (const Field& f : shat) rep.inf_series.push_back(field_min_real(f));
  rep.min_step_increase = std::numeric_limits<double>::infinity();
  for (size_t k = 0; k + 1 < rep.inf_series.size(); ++k)
    rep.min_step_increase = std::min(rep.min_step_increase,
                                     rep.inf_series[k + 1] - rep.inf_series[k]);
  if (rep.inf_series.size() < 2) rep.min_step_increase = 0.0;

  // residual of d/dt shat = Lap shat + |S3|^2 + 1/2 |div T|^2 at interior snapshots
  for (size_t k = 1; k + 1 < rec.snapshots.size(); ++k) {
    const double dt_f = rec.times[k + 1] - rec.times[k];
    const double dt_b = rec.times[k] - rec.times[k - 1];
    if (std::abs(dt_f - dt_b) > 1e-12 * std::max(dt_f, dt_b)) continue;  // need uniform spacing
    const MetricField& g = rec.snapshots[k];
    MetricWork w = analyze_metric(g, backend);
    CurvatureField om = chern_curvature(w);
    RicciData ric = ricci_contractions(om, w);
    const int n = g.n();
    const size_t pts = g.chart.points();
    // Lap shat = g^{a bbar} d_a d_bbar shat
    Field lap(g.chart, {});
    for (int a = 0; a < n; ++a) {
      Field da = dhol(ric.shat, a, backend);
      for (int b = 0; b < n; ++b) {
        Field dab = dbar(da, b, backend);
        const cplx* gab = w.gup.comp(a * n + b);
        for (size_t p = 0; p < pts; ++p) lap.comp(0)[p] += gab[p] * dab.comp(0)[p];
      }
    }
    Field divt = div_torsion(w);
    double rmax = 0.0;
    for (size_t p = 0; p < pts; ++p) {
      // |S3|^2 = S3_{i jb} conj(S3_{k lb}) g^{i kb} g^{l jb}
      double s3sq = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int kk = 0; kk < n; ++kk)
            for (int l = 0; l < n; ++l)
              s3sq += (ric.s3.comp(i * n + j)[p] * std::conj(ric.s3.comp(kk * n + l)[p]) *
                       w.gup.comp(i * n + kk)[p] * w.gup.comp(l * n + j)[p])
                          .real();
      double divsq = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int kk = 0; kk < n; ++kk)
            for (int l = 0; l < n; ++l)
              divsq += (divt.comp(i * n + j)[p] * std::conj(divt.comp(kk * n + l)[p]) *
                        w.gup.comp(i * n + kk)[p] * w.gup.comp(j * n + l)[p])
                           .real();
      const double fd = (shat[k + 1].comp(0)[p].real() - shat[k - 1].comp(0)[p].real()) /
                        (rec.times[k + 1] - rec.times[k - 1]);
      const double rhs = lap.comp(0)[p].real() + s3sq + 0.5 * divsq;
      rmax = std::max(rmax, std::abs(fd - rhs));
    }
    rep.eq51_residuals.push_back(rmax);
    rep.max_residual = std::max(rep.max_residual, rmax);
  }
  return rep;
}

ConeSeries pointwise_cone_monitor(const FlowRecord& rec,
                                  const std::vector<ConeSpec>& cones,
                                  Backend backend, const MarginOptions& mopts) {
  ConeSeries series;
  for (const ConeSpec& c : cones) series.cone_names.push_back(skind_name(c.s.kind));
  series.worst_margins.assign(cones.size(), {});
  for (const MetricField& g : rec.snapshots) {
    auto margins = pointwise_margins(g, cones, backend, mopts);
    for (size_t c = 0; c < cones.size(); ++c) {
      double worst = std::numeric_limits<double>::infinity();
      for (double v : margins[c]) worst = std::min(worst, v);
      series.worst_margins[c].push_back(worst);
    }
  }
  return series;
}

std::vector<double> rho_residual_series(const FlowRecord& rec, Backend backend) {
  std::vector<double> out;
  for (const MetricField& g : rec.snapshots)
    out.push_back(lee_rho_check(g, backend).residual);
  return out;
}

GriffithsStart griffiths_preflowed(const TorusChart& chart, double amp,
                                   double margin_target, double max_time,
                                   Backend backend) {
  GriffithsStart out;
  out.g = metric_nonkahler_mix(chart, amp, 2);  // frequency 2: fast smoothing
  ConeSpec griffiths{SFamily::rank_one(), NiceFunction::zero()};
  MarginOptions mo;
  mo.restarts = 6;
  double t = 0.0;
  out.achieved_margin = worst_margin_over_grid(out.g, griffiths, backend, mo);
  while (out.achieved_margin < margin_target && t < max_time) {
    PdeConfig cfg;
    cfg.backend = backend;
    cfg.t_end = 0.5;
    cfg.record_every = 1 << 20;  // keep only endpoints
    FlowRecord rec = evolve(out.g, cfg);
    if (rec.aborted) throw NumericalError("griffiths_preflowed: " + rec.abort_reason);
    out.g = rec.snapshots.back();
    t += rec.times.back();
    out.achieved_margin = worst_margin_over_grid(out.g, griffiths, backend, mo);
  }
  out.preflow_time = t;
  if (out.achieved_margin < margin_target)
    throw NumericalError("griffiths_preflowed: target margin not reached");
  return out;
}

}  // namespace hcf
