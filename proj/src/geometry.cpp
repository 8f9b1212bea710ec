#include "hcf/geometry.hpp"

#include <Eigen/Eigenvalues>

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>

#include "hcf/parallel.hpp"

namespace hcf {

Mat MetricField::at_point(size_t p) const {
  const int nn = n();
  Mat m(nn, nn);
  for (int i = 0; i < nn; ++i)
    for (int j = 0; j < nn; ++j) m(i, j) = g.comp(i * nn + j)[p];
  return m;
}

void MetricField::set_point(size_t p, const Mat& m) {
  const int nn = n();
  for (int i = 0; i < nn; ++i)
    for (int j = 0; j < nn; ++j) g.comp(i * nn + j)[p] = m(i, j);
}

namespace {

// smallest eigenvalue of a pointwise Hermitian block; closed form for n = 2
double point_min_eig(const MetricField& g, size_t p) {
  const int n = g.n();
  if (n == 1) return g.g.comp(0)[p].real();
  if (n == 2) {
    const double a = g.g.comp(0)[p].real();
    const double d = g.g.comp(3)[p].real();
    const double b2 = std::norm(g.g.comp(1)[p]);
    const double mid = 0.5 * (a + d);
    return mid - std::sqrt(0.25 * (a - d) * (a - d) + b2);
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(g.at_point(p), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace

double MetricField::min_eigenvalue() const {
  double m = std::numeric_limits<double>::infinity();
  for (size_t p = 0; p < chart.points(); ++p) m = std::min(m, point_min_eig(*this, p));
  return m;
}

double MetricField::hermiticity_defect() const {
  const int nn = n();
  double d = 0.0;
  for (int i = 0; i < nn; ++i)
    for (int j = 0; j < nn; ++j) {
      const cplx* a = g.comp(i * nn + j);
      const cplx* b = g.comp(j * nn + i);
      for (size_t p = 0; p < chart.points(); ++p)
        d = std::max(d, std::abs(a[p] - std::conj(b[p])));
    }
  return d;
}

MetricWork analyze_metric(const MetricField& g, Backend backend, double pd_floor) {
  const int n = g.n();
  const size_t pts = g.chart.points();
  if (g.hermiticity_defect() > 1e-10)
    throw NumericalError("metric field is not pointwise Hermitian");
  MetricWork w;
  w.g = g;
  w.backend = backend;
  w.gup = Field(g.chart, {n, n});
  // pointwise inverse (conjugated): g^{m nbar} = conj(inv(g))[m][n]
  {
    Mat gp(n, n);
    for (size_t p = 0; p < pts; ++p) {
      if (point_min_eig(g, p) < pd_floor)
        throw NumericalError("metric lost positivity (pd_floor)");
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) gp(i, j) = g.g.comp(i * n + j)[p];
      Mat inv = gp.inverse().conjugate();
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) w.gup.comp(i * n + j)[p] = inv(i, j);
    }
  }
  // dg[a][j][l] = d_a g_{j lbar}
  w.dg = Field(g.chart, {n, n, n});
  for (int a = 0; a < n; ++a) {
    Field d = dhol(g.g, a, backend);
    for (int c = 0; c < n * n; ++c)
      std::copy(d.comp(c), d.comp(c) + pts, w.dg.comp(a * n * n + c));
  }
  // chr[a][k][j] = g^{k lbar} d_a g_{j lbar}
  w.chr = Field(g.chart, {n, n, n});
  for (size_t p = 0; p < pts; ++p)
    for (int a = 0; a < n; ++a)
      for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j) {
          cplx s(0, 0);
          for (int l = 0; l < n; ++l)
            s += w.gup.comp(k * n + l)[p] * w.dg.comp((a * n + j) * n + l)[p];
          w.chr.comp((a * n + k) * n + j)[p] = s;
        }
  // torsion: T^k_{ij} = Gamma^k_{ij} - Gamma^k_{ji}; T_{ij lbar} = T^k_{ij} g_{k lbar}
  w.tup = Field(g.chart, {n, n, n});
  w.tlow = Field(g.chart, {n, n, n});
  for (size_t p = 0; p < pts; ++p)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        for (int k = 0; k < n; ++k) {
          const cplx t = w.chr.comp((i * n + k) * n + j)[p] - w.chr.comp((j * n + k) * n + i)[p];
          w.tup.comp((i * n + j) * n + k)[p] = t;
        }
        for (int l = 0; l < n; ++l) {
          cplx s(0, 0);
          for (int k = 0; k < n; ++k)
            s += w.tup.comp((i * n + j) * n + k)[p] * g.g.comp(k * n + l)[p];
          w.tlow.comp((i * n + j) * n + l)[p] = s;
        }
      }
  return w;
}

double TorsionField::antisymmetry_defect() const {
  const int n = tup.comp_dims[0];
  double d = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const cplx* a = tup.comp((i * n + j) * n + k);
        const cplx* b = tup.comp((j * n + i) * n + k);
        for (size_t p = 0; p < tup.points(); ++p) d = std::max(d, std::abs(a[p] + b[p]));
      }
  return d;
}

TorsionField torsion(const MetricField& g, Backend backend) {
  MetricWork w = analyze_metric(g, backend);
  return {std::move(w.tup), std::move(w.tlow)};
}

double CurvatureField::hermitian_symmetry_defect() const {
  const int n = om.comp_dims[0];
  double d = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          const cplx* a = om.comp(((i * n + j) * n + k) * n + l);
          const cplx* b = om.comp(((j * n + i) * n + l) * n + k);
          for (size_t p = 0; p < om.points(); ++p)
            d = std::max(d, std::abs(a[p] - std::conj(b[p])));
        }
  return d;
}

CurvatureField chern_curvature(const MetricWork& w) {
  const int n = w.g.n();
  const size_t pts = w.g.chart.points();
  CurvatureField out;
  out.om = Field(w.g.chart, {n, n, n, n});
  // ddg[i][j] = d_i d_jbar g (computed one (i,j) pair at a time to bound memory)
  for (int i = 0; i < n; ++i) {
    Field dgi(w.g.chart, {n, n});
    for (int c = 0; c < n * n; ++c)
      std::copy(w.dg.comp(i * n * n + c), w.dg.comp(i * n * n + c) + pts, dgi.comp(c));
    for (int j = 0; j < n; ++j) {
      Field dd = dbar(dgi, j, w.backend);
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          cplx* dst = out.om.comp(((i * n + j) * n + k) * n + l);
          const cplx* src = dd.comp(k * n + l);
          for (size_t p = 0; p < pts; ++p) dst[p] = -src[p];
        }
    }
  }
  // + g^{p sbar} (d_jbar g)_{p l} (d_i g)_{k s}; d_jbar g_{p lbar} = conj(d_j g_{l pbar})
  for (size_t p = 0; p < pts; ++p)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l) {
            cplx s(0, 0);
            for (int pp = 0; pp < n; ++pp)
              for (int ss = 0; ss < n; ++ss)
                s += w.gup.comp(pp * n + ss)[p] *
                     std::conj(w.dg.comp((j * n + l) * n + pp)[p]) *
                     w.dg.comp((i * n + k) * n + ss)[p];
            out.om.comp(((i * n + j) * n + k) * n + l)[p] += s;
          }
  return out;
}

CurvatureField chern_curvature(const MetricField& g, Backend backend) {
  return chern_curvature(analyze_metric(g, backend));
}

RicciData ricci_contractions(const CurvatureField& om, const MetricWork& w) {
  const int n = w.g.n();
  const size_t pts = w.g.chart.points();
  RicciData r;
  r.s1 = Field(w.g.chart, {n, n});
  r.s2 = Field(w.g.chart, {n, n});
  r.s3 = Field(w.g.chart, {n, n});
  r.s4 = Field(w.g.chart, {n, n});
  r.sc = Field(w.g.chart, {});
  r.shat = Field(w.g.chart, {});
  auto omc = [&](int i, int j, int k, int l) { return om.om.comp(((i * n + j) * n + k) * n + l); };
  for (size_t p = 0; p < pts; ++p) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        cplx s1(0, 0), s2(0, 0), s4(0, 0);
        for (int m = 0; m < n; ++m)
          for (int nn = 0; nn < n; ++nn) {
            const cplx gup = w.gup.comp(m * n + nn)[p];
            s1 += omc(i, j, m, nn)[p] * gup;
            s2 += omc(m, nn, i, j)[p] * gup;
            s4 += omc(i, nn, m, j)[p] * gup;
          }
        r.s1.comp(i * n + j)[p] = s1;
        r.s2.comp(i * n + j)[p] = s2;
        r.s4.comp(i * n + j)[p] = s4;
      }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        r.s3.comp(i * n + j)[p] = std::conj(r.s4.comp(j * n + i)[p]);
    cplx sc(0, 0), shat(0, 0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const cplx gup = w.gup.comp(i * n + j)[p];
        sc += r.s1.comp(i * n + j)[p] * gup;
        shat += r.s3.comp(i * n + j)[p] * gup;
      }
    r.sc.comp(0)[p] = sc.real();
    r.shat.comp(0)[p] = shat.real();
  }
  return r;
}

Field q_term(const MetricWork& w) {
  const int n = w.g.n();
  const size_t pts = w.g.chart.points();
  Field q(w.g.chart, {n, n});
  for (size_t p = 0; p < pts; ++p)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        cplx s(0, 0);
        for (int m = 0; m < n; ++m)
          for (int nn = 0; nn < n; ++nn)
            for (int pp = 0; pp < n; ++pp)
              for (int ss = 0; ss < n; ++ss)
                s += w.gup.comp(m * n + nn)[p] * w.gup.comp(pp * n + ss)[p] *
                     w.tlow.comp((m * n + pp) * n + j)[p] *
                     std::conj(w.tlow.comp((nn * n + ss) * n + i)[p]);
        q.comp(i * n + j)[p] = 0.5 * s;
      }
  return q;
}

Field q_term(const MetricField& g, const TorsionField& t, Backend backend) {
  MetricWork w = analyze_metric(g, backend);
  w.tup = t.tup;
  w.tlow = t.tlow;
  return q_term(w);
}

// ---------------------------------------------------------- covariant derivs

namespace {

// connection coefficient C[alpha][p] for one slot at one point; the covariant
// derivative adds sum_p C[alpha][p] f[... p ...]
void slot_coefficient(const MetricWork& w, size_t pt, Conn conn, Idx slot, int dir,
                      Mat& C) {
  const int n = w.g.n();
  C.setZero();
  const bool hol_dir = dir < n;
  const int a = hol_dir ? dir : dir - n;
  auto chr = [&](int d, int k, int j) { return w.chr.comp((d * n + k) * n + j)[pt]; };
  auto gup = [&](int i, int j) { return w.gup.comp(i * n + j)[pt]; };
  auto tlow = [&](int i, int j, int l) { return w.tlow.comp((i * n + j) * n + l)[pt]; };

  switch (conn) {
    case Conn::chern:
      if (hol_dir) {
        if (slot == Idx::hol_up)
          for (int al = 0; al < n; ++al)
            for (int p = 0; p < n; ++p) C(al, p) = chr(a, al, p);
        else if (slot == Idx::hol_down)
          for (int al = 0; al < n; ++al)
            for (int p = 0; p < n; ++p) C(al, p) = -chr(a, p, al);
      } else {
        if (slot == Idx::anti_up)
          for (int al = 0; al < n; ++al)
            for (int p = 0; p < n; ++p) C(al, p) = std::conj(chr(a, al, p));
        else if (slot == Idx::anti_down)
          for (int al = 0; al < n; ++al)
            for (int p = 0; p < n; ++p) C(al, p) = -std::conj(chr(a, p, al));
      }
      break;
    case Conn::twisted_t:
      // combined Chern - torsion twist: Gamma^k_{pa} on holomorphic vectors
      if (hol_dir) {
        if (slot == Idx::hol_up)
          for (int al = 0; al < n; ++al)
            for (int p = 0; p < n; ++p) C(al, p) = chr(p, al, a);
        else if (slot == Idx::hol_down)
          for (int al = 0; al < n; ++al)
            for (int p = 0; p < n; ++p) C(al, p) = -chr(al, p, a);
      } else {
        if (slot == Idx::anti_up)
          for (int al = 0; al < n; ++al)
            for (int p = 0; p < n; ++p) C(al, p) = std::conj(chr(p, al, a));
        else if (slot == Idx::anti_down)
          for (int al = 0; al < n; ++al)
            for (int p = 0; p < n; ++p) C(al, p) = -std::conj(chr(al, p, a));
      }
      break;
    case Conn::twisted_tsharp:
      if (hol_dir) {
        if (slot == Idx::hol_up)
          for (int al = 0; al < n; ++al)
            for (int p = 0; p < n; ++p) C(al, p) = chr(a, al, p);
        else if (slot == Idx::hol_down)
          for (int al = 0; al < n; ++al)
            for (int p = 0; p < n; ++p) C(al, p) = -chr(a, p, al);
        else if (slot == Idx::anti_up)
          for (int al = 0; al < n; ++al)
            for (int p = 0; p < n; ++p) {
              cplx s(0, 0);
              for (int ss = 0; ss < n; ++ss) s += std::conj(gup(al, ss)) * tlow(a, ss, p);
              C(al, p) = s;
            }
        else if (slot == Idx::anti_down)
          for (int al = 0; al < n; ++al)
            for (int p = 0; p < n; ++p) {
              cplx s(0, 0);
              for (int ss = 0; ss < n; ++ss) s += std::conj(gup(p, ss)) * tlow(a, ss, al);
              C(al, p) = -s;
            }
      } else {
        if (slot == Idx::hol_up)
          for (int al = 0; al < n; ++al)
            for (int p = 0; p < n; ++p) {
              cplx s(0, 0);
              for (int ss = 0; ss < n; ++ss) s += gup(al, ss) * std::conj(tlow(a, ss, p));
              C(al, p) = s;
            }
        else if (slot == Idx::hol_down)
          for (int al = 0; al < n; ++al)
            for (int p = 0; p < n; ++p) {
              cplx s(0, 0);
              for (int ss = 0; ss < n; ++ss) s += gup(p, ss) * std::conj(tlow(a, ss, al));
              C(al, p) = -s;
            }
        else if (slot == Idx::anti_up)
          for (int al = 0; al < n; ++al)
            for (int p = 0; p < n; ++p) C(al, p) = std::conj(chr(a, al, p));
        else if (slot == Idx::anti_down)
          for (int al = 0; al < n; ++al)
            for (int p = 0; p < n; ++p) C(al, p) = -std::conj(chr(a, p, al));
      }
      break;
  }
}

}  // namespace

Field dir_derivative(const Field& f, const Signature& sig,
                     const std::vector<Conn>& slot_conn, int dir,
                     const MetricWork& w) {
  const int n = w.g.n();
  require(sig.size() == f.comp_dims.size(), "dir_derivative: signature rank mismatch");
  require(slot_conn.size() == sig.size(), "dir_derivative: connection list rank mismatch");
  for (int d : f.comp_dims) require(d == n, "dir_derivative: component extent != n");
  Field out = dir < n ? dhol(f, dir, w.backend) : dbar(f, dir - n, w.backend);

  const size_t pts = f.points();
  const int rank = static_cast<int>(sig.size());
  const int ncomp = f.ncomp();
  // strides of the component index per slot
  std::vector<int> cstride(rank, 1);
  for (int s = rank - 2; s >= 0; --s) cstride[s] = cstride[s + 1] * n;

  Mat C(n, n);
  for (int s = 0; s < rank; ++s) {
    // skip slot/direction combinations with identically-zero coefficients
    const bool hol_dir = dir < n;
    const bool touches =
        (slot_conn[s] == Conn::twisted_tsharp) ||
        (hol_dir && (sig[s] == Idx::hol_up || sig[s] == Idx::hol_down)) ||
        (!hol_dir && (sig[s] == Idx::anti_up || sig[s] == Idx::anti_down));
    if (!touches) continue;
    for (size_t p = 0; p < pts; ++p) {
      slot_coefficient(w, p, slot_conn[s], sig[s], dir, C);
      if (C.isZero(0.0)) continue;
      for (int c = 0; c < ncomp; ++c) {
        const int al = (c / cstride[s]) % n;
        const int base = c - al * cstride[s];
        cplx acc(0, 0);
        for (int q = 0; q < n; ++q) {
          const cplx coef = C(al, q);
          if (coef != cplx(0, 0)) acc += coef * f.comp(base + q * cstride[s])[p];
        }
        out.comp(c)[p] += acc;
      }
    }
  }
  return out;
}

namespace {

Field stack_directions(const Field& f, const Signature& sig,
                       const std::vector<Conn>& conns, const MetricWork& w) {
  const int n = w.g.n();
  std::vector<int> dims;
  dims.push_back(2 * n);
  for (int d : f.comp_dims) dims.push_back(d);
  Field out(f.chart, dims);
  const size_t pts = f.points();
  for (int dir = 0; dir < 2 * n; ++dir) {
    Field d = dir_derivative(f, sig, conns, dir, w);
    for (int c = 0; c < f.ncomp(); ++c)
      std::copy(d.comp(c), d.comp(c) + pts, out.comp(dir * f.ncomp() + c));
  }
  return out;
}

}  // namespace

Field nabla_chern(const Field& f, const Signature& sig, const MetricWork& w) {
  return stack_directions(f, sig, std::vector<Conn>(sig.size(), Conn::chern), w);
}

Field nabla_twisted(const Field& f, const Signature& sig, Conn variant,
                    const MetricWork& w) {
  return stack_directions(f, sig, std::vector<Conn>(sig.size(), variant), w);
}

Field laplacian_conn(const Field& f, const Signature& sig,
                     const std::vector<Conn>& slot_conn, const MetricWork& w) {
  const int n = w.g.n();
  Field out(f.chart, f.comp_dims);
  const size_t pts = f.points();
  std::vector<Field> da, db;
  for (int a = 0; a < n; ++a) da.push_back(dir_derivative(f, sig, slot_conn, a, w));
  for (int b = 0; b < n; ++b) db.push_back(dir_derivative(f, sig, slot_conn, n + b, w));
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      Field dab = dir_derivative(db[b], sig, slot_conn, a, w);
      Field dba = dir_derivative(da[a], sig, slot_conn, n + b, w);
      for (int c = 0; c < f.ncomp(); ++c) {
        const cplx* gab = w.gup.comp(a * n + b);
        const cplx* x = dab.comp(c);
        const cplx* y = dba.comp(c);
        cplx* o = out.comp(c);
        for (size_t p = 0; p < pts; ++p) o[p] += 0.5 * gab[p] * (x[p] + y[p]);
      }
    }
  return out;
}

Field laplacian_T(const Field& f, const Signature& sig, const MetricWork& w) {
  return laplacian_conn(f, sig, std::vector<Conn>(sig.size(), Conn::twisted_t), w);
}

// -------------------------------------------------------------------- bianchi

std::array<double, 5> bianchi_residuals(const MetricField& g, Backend backend) {
  MetricWork w = analyze_metric(g, backend);
  const int n = g.n();
  const size_t pts = g.chart.points();
  CurvatureField cf = chern_curvature(w);
  const Field& om = cf.om;
  auto omc = [&](int i, int j, int k, int l) { return om.comp(((i * n + j) * n + k) * n + l); };

  std::array<double, 5> res{0, 0, 0, 0, 0};
  const Signature sig_tlow{Idx::hol_down, Idx::hol_down, Idx::anti_down};
  const Signature sig_tup{Idx::hol_down, Idx::hol_down, Idx::hol_up};
  const Signature sig_om{Idx::hol_down, Idx::anti_down, Idx::hol_down, Idx::anti_down};
  const std::vector<Conn> chern3(3, Conn::chern);
  const std::vector<Conn> chern4(4, Conn::chern);

  // B1: Om_{ijkl} = Om_{kjil} + nabla_jbar T_{ki lbar}
  for (int j = 0; j < n; ++j) {
    Field nt = dir_derivative(w.tlow, sig_tlow, chern3, n + j, w);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          const cplx* a = omc(i, j, k, l);
          const cplx* b = omc(k, j, i, l);
          const cplx* c = nt.comp((k * n + i) * n + l);
          for (size_t p = 0; p < pts; ++p)
            res[0] = std::max(res[0], std::abs(a[p] - b[p] - c[p]));
        }
  }
  // B2: Om_{ijkl} = Om_{ilkj} + nabla_i T_{lbar jbar k}
  {
    Field tbar(g.chart, {n, n, n});  // [l][j][k] = conj(T_{lj kbar})
    for (int c = 0; c < n * n * n; ++c)
      for (size_t p = 0; p < pts; ++p) tbar.comp(c)[p] = std::conj(w.tlow.comp(c)[p]);
    const Signature sig_tbar{Idx::anti_down, Idx::anti_down, Idx::hol_down};
    for (int i = 0; i < n; ++i) {
      Field nt = dir_derivative(tbar, sig_tbar, chern3, i, w);
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l) {
            const cplx* a = omc(i, j, k, l);
            const cplx* b = omc(i, l, k, j);
            const cplx* c = nt.comp((l * n + j) * n + k);
            for (size_t p = 0; p < pts; ++p)
              res[1] = std::max(res[1], std::abs(a[p] - b[p] - c[p]));
          }
    }
  }
  // B3: nabla_m Om_{ijkl} = nabla_i Om_{mjkl} + T^p_{im} Om_{pjkl}
  {
    std::vector<Field> nom;
    for (int m = 0; m < n; ++m) nom.push_back(dir_derivative(om, sig_om, chern4, m, w));
    for (int m = 0; m < n; ++m)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int k = 0; k < n; ++k)
            for (int l = 0; l < n; ++l) {
              const cplx* a = nom[m].comp(((i * n + j) * n + k) * n + l);
              const cplx* b = nom[i].comp(((m * n + j) * n + k) * n + l);
              for (size_t p = 0; p < pts; ++p) {
                cplx tq(0, 0);
                for (int q = 0; q < n; ++q)
                  tq += w.tup.comp((i * n + m) * n + q)[p] * omc(q, j, k, l)[p];
                res[2] = std::max(res[2], std::abs(a[p] - b[p] - tq));
              }
            }
  }
  // B4: nabla_nbar Om_{ijkl} = nabla_jbar Om_{inkl} + T^{sbar}_{jbar nbar} Om_{iskl}
  {
    std::vector<Field> nom;
    for (int b = 0; b < n; ++b) nom.push_back(dir_derivative(om, sig_om, chern4, n + b, w));
    for (int m = 0; m < n; ++m)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int k = 0; k < n; ++k)
            for (int l = 0; l < n; ++l) {
              const cplx* a = nom[m].comp(((i * n + j) * n + k) * n + l);
              const cplx* b = nom[j].comp(((i * n + m) * n + k) * n + l);
              for (size_t p = 0; p < pts; ++p) {
                cplx tq(0, 0);
                for (int s = 0; s < n; ++s)
                  tq += std::conj(w.tup.comp((j * n + m) * n + s)[p]) * omc(i, s, k, l)[p];
                res[3] = std::max(res[3], std::abs(a[p] - b[p] - tq));
              }
            }
  }
  // B5: first Bianchi for torsion with the quadratic right-hand side
  {
    std::vector<Field> nt;
    for (int i = 0; i < n; ++i) nt.push_back(dir_derivative(w.tup, sig_tup, chern3, i, w));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l) {
            const cplx* a = nt[i].comp((j * n + k) * n + l);
            const cplx* b = nt[k].comp((i * n + j) * n + l);
            const cplx* c = nt[j].comp((k * n + i) * n + l);
            for (size_t p = 0; p < pts; ++p) {
              cplx rhs(0, 0);
              for (int q = 0; q < n; ++q)
                rhs += w.tup.comp((i * n + j) * n + q)[p] * w.tup.comp((k * n + q) * n + l)[p] +
                       w.tup.comp((j * n + k) * n + q)[p] * w.tup.comp((i * n + q) * n + l)[p] +
                       w.tup.comp((k * n + i) * n + q)[p] * w.tup.comp((j * n + q) * n + l)[p];
              res[4] = std::max(res[4], std::abs(a[p] + b[p] + c[p] - rhs));
            }
          }
  }
  return res;
}

Field div_torsion(const MetricWork& w) {
  const int n = w.g.n();
  const size_t pts = w.g.chart.points();
  const Signature sig_tup{Idx::hol_down, Idx::hol_down, Idx::hol_up};
  const std::vector<Conn> chern3(3, Conn::chern);
  Field out(w.g.chart, {n, n});
  for (int i = 0; i < n; ++i) {
    Field nt = dir_derivative(w.tup, sig_tup, chern3, i, w);
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const cplx* src = nt.comp((j * n + k) * n + i);
        cplx* dst = out.comp(j * n + k);
        for (size_t p = 0; p < pts; ++p) dst[p] += src[p];
      }
  }
  return out;
}

LeeRhoReport lee_rho_check(const MetricField& g, Backend backend) {
  MetricWork w = analyze_metric(g, backend);
  const int n = g.n();
  const size_t pts = g.chart.points();
  CurvatureField cf = chern_curvature(w);
  RicciData ric = ricci_contractions(cf, w);

  LeeRhoReport rep;
  rep.alpha = Field(g.chart, {n});
  for (int k = 0; k < n; ++k) {
    cplx* a = rep.alpha.comp(k);
    for (size_t p = 0; p < pts; ++p) {
      cplx s(0, 0);
      for (int q = 0; q < n; ++q) s += w.tup.comp((k * n + q) * n + q)[p];
      a[p] = I() * s;
    }
  }
  rep.rho = Field(g.chart, {n, n});
  rep.rho_t11 = Field(g.chart, {n, n});
  for (int c = 0; c < n * n; ++c)
    for (size_t p = 0; p < pts; ++p) {
      rep.rho.comp(c)[p] = I() * ric.s1.comp(c)[p];
      rep.rho_t11.comp(c)[p] = I() * ric.s3.comp(c)[p];
    }
  Field divt = div_torsion(w);
  rep.rho_t20 = Field(g.chart, {n, n});
  for (int c = 0; c < n * n; ++c)
    for (size_t p = 0; p < pts; ++p) rep.rho_t20.comp(c)[p] = I() * divt.comp(c)[p];

  // d alpha: (2,0) coefficient d_j alpha_k - d_k alpha_j ; (1,1): -d_sbar alpha_k
  std::vector<Field> dal, dalb;
  for (int a = 0; a < n; ++a) dal.push_back(dhol(rep.alpha, a, backend));
  for (int b = 0; b < n; ++b) dalb.push_back(dbar(rep.alpha, b, backend));
  double r = 0.0;
  for (int k = 0; k < n; ++k)
    for (int s = 0; s < n; ++s) {
      const cplx* rho = rep.rho.comp(k * n + s);
      const cplx* rhot = rep.rho_t11.comp(k * n + s);
      const cplx* da = dalb[s].comp(k);
      for (size_t p = 0; p < pts; ++p)
        r = std::max(r, std::abs(rho[p] - rhot[p] + da[p]));
    }
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      const cplx* rhot = rep.rho_t20.comp(j * n + k);
      const cplx* dj = dal[j].comp(k);
      const cplx* dk = dal[k].comp(j);
      for (size_t p = 0; p < pts; ++p)
        r = std::max(r, std::abs(-rhot[p] - (dj[p] - dk[p])));
    }
  rep.residual = r;

  // closedness of rho: (2,1) and (1,2) parts of d rho
  double dr = 0.0;
  std::vector<Field> dr_h, dr_b;
  for (int a = 0; a < n; ++a) dr_h.push_back(dhol(rep.rho, a, backend));
  for (int b = 0; b < n; ++b) dr_b.push_back(dbar(rep.rho, b, backend));
  for (int m = 0; m < n; ++m)
    for (int k = 0; k < n; ++k)
      for (int s = 0; s < n; ++s) {
        const cplx* a = dr_h[m].comp(k * n + s);
        const cplx* b = dr_h[k].comp(m * n + s);
        const cplx* c = dr_b[m].comp(k * n + s);
        const cplx* d = dr_b[s].comp(k * n + m);
        for (size_t p = 0; p < pts; ++p) {
          dr = std::max(dr, std::abs(a[p] - b[p]));
          dr = std::max(dr, std::abs(c[p] - d[p]));
        }
      }
  rep.d_rho_norm = dr;
  return rep;
}

Field dnablaT_term(const MetricWork& w) {
  const int n = w.g.n();
  const size_t pts = w.g.chart.points();
  const Signature sig_tup{Idx::hol_down, Idx::hol_down, Idx::hol_up};
  const std::vector<Conn> chern3(3, Conn::chern);
  std::vector<Field> nt;  // nt[i][m][p][k] = nabla_i T^k_{mp}
  for (int i = 0; i < n; ++i) nt.push_back(dir_derivative(w.tup, sig_tup, chern3, i, w));
  Field out(w.g.chart, {n, n, n, n});  // [k][i][l][j]
  for (size_t p = 0; p < pts; ++p)
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int l = 0; l < n; ++l)
          for (int j = 0; j < n; ++j) {
            cplx s(0, 0);
            for (int m = 0; m < n; ++m)
              for (int nn = 0; nn < n; ++nn)
                for (int pp = 0; pp < n; ++pp)
                  for (int ss = 0; ss < n; ++ss)
                    s += w.gup.comp(m * n + nn)[p] * w.gup.comp(pp * n + ss)[p] *
                         nt[i].comp((m * n + pp) * n + k)[p] *
                         std::conj(nt[j].comp((nn * n + ss) * n + l)[p]);
            out.comp(((k * n + i) * n + l) * n + j)[p] = 0.5 * s;
          }
  return out;
}

// ------------------------------------------------------------------- presets

MetricField metric_flat(const TorusChart& chart, const Mat& g0) {
  MetricField g(chart);
  const int n = chart.n;
  Mat base = g0.size() == 0 ? Mat(Mat::Identity(n, n)) : g0;
  HermitianMetric check(base);  // validates
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      cplx* c = g.g.comp(i * n + j);
      for (size_t p = 0; p < chart.points(); ++p) c[p] = base(i, j);
    }
  return g;
}

MetricField metric_kahler_potential(const TorusChart& chart, double amp, int freq) {
  // phi = amp * [cos(k x_1) + cos(k y_1) + cos(k x_n) ...]; g = delta + dd-bar phi.
  // For phi depending on x_a, y_a only: dd-bar phi_{j jbar} = 1/4 (phi_xx + phi_yy).
  const int n = chart.n;
  MetricField g = metric_flat(chart);
  const size_t pts = chart.points();
  for (size_t p = 0; p < pts; ++p) {
    for (int a = 0; a < n; ++a) {
      const double kx = 2.0 * kPi * freq / chart.period[2 * a];
      const double ky = 2.0 * kPi * freq / chart.period[2 * a + 1];
      const double x = chart.coordinate(p, 2 * a);
      const double y = chart.coordinate(p, 2 * a + 1);
      // phi_a = amp (cos(kx x) + sin(ky y)); d_a d_abar phi = -amp/4 (kx^2 cos + ky^2 sin)
      const double ddp = -0.25 * amp * (kx * kx * std::cos(kx * x) + ky * ky * std::sin(ky * y));
      g.g.comp(a * n + a)[p] += ddp;
    }
  }
  return g;
}

MetricField metric_nonkahler_sin(const TorusChart& chart, double amp, int freq) {
  require(chart.n >= 2, "nonkahler_sin needs n >= 2");
  MetricField g = metric_flat(chart);
  const int n = chart.n;
  const int axis = 3;  // y_2
  const double k = 2.0 * kPi * freq / chart.period[axis];
  for (size_t p = 0; p < chart.points(); ++p)
    g.g.comp(0 * n + 0)[p] += amp * std::sin(k * chart.coordinate(p, axis));
  return g;
}

MetricField metric_nonkahler_mix(const TorusChart& chart, double amp, int freq) {
  require(chart.n >= 2, "nonkahler_mix needs n >= 2");
  MetricField g = metric_flat(chart);
  const int n = chart.n;
  const double k1 = 2.0 * kPi * freq / chart.period[1];  // y_1
  const double k2 = 2.0 * kPi * freq / chart.period[2];  // x_2
  for (size_t p = 0; p < chart.points(); ++p) {
    const double y1 = chart.coordinate(p, 1);
    const double x2 = chart.coordinate(p, 2);
    g.g.comp(0 * n + 0)[p] += amp * std::sin(k1 * y1) + 0.5 * amp * std::cos(k2 * x2);
    g.g.comp(1 * n + 1)[p] += 0.7 * amp * std::sin(k2 * x2 + 0.3);
    const cplx off = 0.3 * amp * std::cos(k1 * y1) + cplx(0, 0.2 * amp) * std::sin(k2 * x2);
    g.g.comp(0 * n + 1)[p] += off;
    g.g.comp(1 * n + 0)[p] += std::conj(off);
  }
  return g;
}

MetricField metric_preset(const TorusChart& chart, const std::string& name,
                          double amp, int freq) {
  if (name == "flat") return metric_flat(chart);
  if (name == "kahler_potential") return metric_kahler_potential(chart, amp, freq);
  if (name == "nonkahler_sin") return metric_nonkahler_sin(chart, amp, freq);
  if (name == "nonkahler_mix") return metric_nonkahler_mix(chart, amp, freq);
  throw DimensionError("unknown metric preset: " + name);
}

// ------------------------------------------------------------------------ IO

std::string metric_to_json(const MetricField& g) {
  nlohmann::json j;
  j["n"] = g.chart.n;
  j["size"] = g.chart.size;
  j["period"] = g.chart.period;
  nlohmann::json data = nlohmann::json::array();
  for (const cplx& z : g.g.data) data.push_back({z.real(), z.imag()});
  j["g"] = std::move(data);
  return j.dump();
}

MetricField metric_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  TorusChart chart(j.at("n").get<int>(), j.at("size").get<std::vector<int>>(),
                   j.at("period").get<std::vector<double>>());
  MetricField g(chart);
  const auto& data = j.at("g");
  require(data.size() == g.g.data.size(), "metric_from_json: size mismatch");
  for (size_t i = 0; i < g.g.data.size(); ++i)
    g.g.data[i] = cplx(data[i][0].get<double>(), data[i][1].get<double>());
  return g;
}

void write_metric_bin(const std::string& path, const MetricField& g) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw NumericalError("cannot open " + path);
  const int32_t n = g.chart.n;
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  for (int a = 0; a < 2 * n; ++a) {
    const int32_t s = g.chart.size[a];
    out.write(reinterpret_cast<const char*>(&s), sizeof s);
  }
  for (int a = 0; a < 2 * n; ++a)
    out.write(reinterpret_cast<const char*>(&g.chart.period[a]), sizeof(double));
  out.write(reinterpret_cast<const char*>(g.g.data.data()),
            static_cast<std::streamsize>(g.g.data.size() * sizeof(cplx)));
}

MetricField read_metric_bin(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NumericalError("cannot open " + path);
  int32_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  std::vector<int> size(2 * n);
  for (int a = 0; a < 2 * n; ++a) {
    int32_t s = 0;
    in.read(reinterpret_cast<char*>(&s), sizeof s);
    size[a] = s;
  }
  std::vector<double> period(2 * n);
  for (int a = 0; a < 2 * n; ++a) in.read(reinterpret_cast<char*>(&period[a]), sizeof(double));
  MetricField g(TorusChart(n, size, period));
  in.read(reinterpret_cast<char*>(g.g.data.data()),
          static_cast<std::streamsize>(g.g.data.size() * sizeof(cplx)));
  if (!in) throw NumericalError("truncated metric file: " + path);
  return g;
}

}  // namespace hcf
