// Discrete Hermitian geometry on periodic charts: Chern connection, torsion,
// curvature, Ricci contractions, torsion-twisted connections and Laplacians,
// Bianchi residuals and the Lee-form identity.
//
// Tensor fields carry explicit index signatures; every component index runs
// over the complex dimension n. Derivative directions are ordered
// 0..n-1 (holomorphic d_a) then n..2n-1 (antiholomorphic d_abar).
#pragma once

#include <array>

#include "hcf/algebra.hpp"
#include "hcf/grid.hpp"

namespace hcf {

enum class Idx { hol_up, hol_down, anti_up, anti_down };
enum class Conn { chern, twisted_t, twisted_tsharp };

using Signature = std::vector<Idx>;

struct MetricField {
  TorusChart chart;
  Field g;  // comp_dims {n,n}: g_{i jbar}

  MetricField() = default;
  explicit MetricField(TorusChart ch) : chart(ch), g(ch, {ch.n, ch.n}) {}
  int n() const { return chart.n; }
  // pointwise accessors (row-major component block per point)
  Mat at_point(size_t p) const;
  void set_point(size_t p, const Mat& m);
  double min_eigenvalue() const;    // over the grid
  double hermiticity_defect() const;
};

// cached metric derivatives; everything downstream consumes this
struct MetricWork {
  MetricField g;
  Backend backend = Backend::spectral;
  Field gup;   // {n,n}: g^{m nbar} = conj(inv g)
  Field dg;    // {n,n,n}: dg[a][j][l] = d_a g_{j lbar}
  Field chr;   // {n,n,n}: chr[a][k][j] = Gamma^k_{aj} = g^{k lbar} d_a g_{j lbar}
  Field tup;   // {n,n,n}: tup[i][j][k] = T^k_{ij}
  Field tlow;  // {n,n,n}: tlow[i][j][l] = T_{ij lbar}
};

// validates pointwise positivity (pd_floor) and Hermiticity, then precomputes
MetricWork analyze_metric(const MetricField& g, Backend backend,
                          double pd_floor = 1e-8);

struct TorsionField {
  Field tup;   // {n,n,n}
  Field tlow;  // {n,n,n}
  double antisymmetry_defect() const;
};

TorsionField torsion(const MetricField& g, Backend backend);

struct CurvatureField {
  Field om;  // {n,n,n,n}: om[i][j][k][l] = Omega_{i jbar k lbar}
  double hermitian_symmetry_defect() const;
};

CurvatureField chern_curvature(const MetricWork& w);
CurvatureField chern_curvature(const MetricField& g, Backend backend);

struct RicciData {
  Field s1, s2, s3, s4;  // {n,n}
  Field sc, shat;        // scalar grids (real-valued)
};

RicciData ricci_contractions(const CurvatureField& om, const MetricWork& w);

// Q_{i jbar} = 1/2 g^{m nbar} g^{p sbar} T_{mp jbar} conj(T_{ns ibar})
Field q_term(const MetricWork& w);
Field q_term(const MetricField& g, const TorsionField& t, Backend backend);

// covariant derivative along one direction (0..2n-1); output signature equals
// the input signature (directional derivative, per-slot connection choice)
Field dir_derivative(const Field& f, const Signature& sig,
                     const std::vector<Conn>& slot_conn, int dir,
                     const MetricWork& w);
// all 2n directions stacked into a leading index
Field nabla_chern(const Field& f, const Signature& sig, const MetricWork& w);
Field nabla_twisted(const Field& f, const Signature& sig, Conn variant,
                    const MetricWork& w);

// Laplacian of the T-twisted connection:
// 1/2 g^{a bbar} (D^T_a D^T_bbar + D^T_bbar D^T_a)
Field laplacian_T(const Field& f, const Signature& sig, const MetricWork& w);
// same contraction pattern for a plain-Chern or custom connection
Field laplacian_conn(const Field& f, const Signature& sig,
                     const std::vector<Conn>& slot_conn, const MetricWork& w);

// sup-norm residuals of the five Bianchi identities
std::array<double, 5> bianchi_residuals(const MetricField& g, Backend backend);

struct LeeRhoReport {
  Field alpha;    // {n}: alpha_k = i T^p_{kp}
  Field rho;      // {n,n}: (1,1) coefficient of rho in dz^k wedge dzbar^s
  Field rho_t11;  // {n,n}: (1,1) part of rho^T
  Field rho_t20;  // {n,n}: (2,0) coefficient i(div T)_{jk} (antisymmetric)
  double residual = 0.0;    // || rho - rho^T - d alpha ||_inf
  double d_rho_norm = 0.0;  // closedness of rho
};

LeeRhoReport lee_rho_check(const MetricField& g, Backend backend);

// D(nabla T)_{i jbar}^{ lbar k} as a raised-operator field {n,n,n,n} with
// component order [k][i][l][j]; pointwise Hermitian PSD (Gram form)
Field dnablaT_term(const MetricWork& w);

// div T_{jk} = nabla_i T^i_{jk}
Field div_torsion(const MetricWork& w);

// presets -------------------------------------------------------------------
MetricField metric_flat(const TorusChart& chart, const Mat& g0 = Mat());
// g = delta + dd-bar phi for phi = sum of cosine modes (Kahler)
MetricField metric_kahler_potential(const TorusChart& chart, double amp, int freq = 1);
// g_{11b} = 1 + amp sin(2 pi freq y_2 / L); non-Kahler for n >= 2
MetricField metric_nonkahler_sin(const TorusChart& chart, double amp, int freq = 1);
// richer two-direction non-Kahler perturbation with off-diagonal modes
MetricField metric_nonkahler_mix(const TorusChart& chart, double amp, int freq = 1);
// by-name constructor for configs: flat | kahler_potential | nonkahler_sin | nonkahler_mix
MetricField metric_preset(const TorusChart& chart, const std::string& name,
                          double amp, int freq);

// I/O -----------------------------------------------------------------------
std::string metric_to_json(const MetricField& g);
MetricField metric_from_json(const std::string& text);
void write_metric_bin(const std::string& path, const MetricField& g);
MetricField read_metric_bin(const std::string& path);

}  // namespace hcf
