// Pointwise algebra of Sym^{1,1}(End(V)): trace pairings, index raising and
// lowering, the spectral square, the sharp square, adjoint action and Gram
// constructors.
//
// Conventions (fixed once, used everywhere):
//   * basis of End(V): E_{(k,i)} = e_k (x) eps^i, flattened A = k*n + i,
//     i.e. vec(w)[k*n+i] = w(k,i) is the row-major flatten;
//   * an operator Omega = sum_{A,B} H_{A,B} E_A (x) conj(E_B) with H Hermitian;
//   * <Omega, u (x) conj(u)> = sum H_{A,B} x_A conj(x_B), x_A = tr(E_A u);
//   * raising: H_{(k,i),(l,j)} = Omega4_{i jb m nb} g^{m lb} g^{k nb},
//     so at g = Id the Griffiths value of a rank-one u is
//     evaluate(H, rank1(xi,eta)) = Omega4(xi, conj xi, eta, conj eta).
#pragma once

#include <optional>
#include <vector>

#include "hcf/common.hpp"

namespace hcf {

struct EndoSpace {
  int n = 0;
  int dim() const { return n * n; }
  int index(int k, int i) const { return k * n + i; }
};

using Endo = Mat;  // n x n complex matrix u^a_b, row = output index

// coefficient vector of w in the basis E_{(k,i)}
Vec vec_endo(const Endo& w);
Endo unvec_endo(const Vec& c, int n);
// x(u)_A = tr(E_A u) = u^i_k  (the transpose flatten, no conjugation)
Vec x_of(const Endo& u);

cplx trace_pairing(const Endo& u, const Endo& v);

struct HermitianMetric {
  Mat g;  // g_{i jb}

  HermitianMetric() = default;
  explicit HermitianMetric(Mat m);
  static HermitianMetric identity(int n);

  int n() const { return static_cast<int>(g.rows()); }
  bool is_identity(double tol = 1e-14) const;
  // matrix of g^{m nb}: conj(inverse(g)), so g^{m nb} g_{k nb} = delta_{mk}
  Mat inverse_up() const;
  // frame matrix F with F^T g conj(F) = Id (columns = unitary frame vectors),
  // built from the Cholesky factor; endo components transform u' = F^{-1} u F
  Mat unitary_frame() const;
  double min_eigenvalue() const;
};

struct IndexedCurvature {
  int n = 0;
  std::vector<cplx> t4;  // Omega_{i jb k lb}, index order (i,j,k,l), row-major

  IndexedCurvature() = default;
  explicit IndexedCurvature(int n_) : n(n_), t4(static_cast<size_t>(n_) * n_ * n_ * n_, cplx(0, 0)) {}
  cplx& at(int i, int j, int k, int l) {
    return t4[static_cast<size_t>(((i * n + j) * n + k)) * n + l];
  }
  cplx at(int i, int j, int k, int l) const {
    return t4[static_cast<size_t>(((i * n + j) * n + k)) * n + l];
  }
  double hermitian_symmetry_defect() const;  // |Om_{ijkl} - conj(Om_{jilk})|_inf
};

struct CurvatureOperator {
  Mat H;                   // n^2 x n^2, Hermitian
  HermitianMetric metric;  // identity by default

  CurvatureOperator() = default;
  explicit CurvatureOperator(int n)
      : H(Mat::Zero(n * n, n * n)), metric(HermitianMetric::identity(n)) {}
  CurvatureOperator(Mat h, HermitianMetric m) : H(std::move(h)), metric(std::move(m)) {}
  static CurvatureOperator rank_one(const Endo& v);          // v (x) conj(v)
  static CurvatureOperator identity_pair(int n);             // Id (x) conj(Id)
  static CurvatureOperator operator_identity(int n);         // H = I_{n^2}
  int n() const { return static_cast<int>(metric.g.rows()); }
  int dim() const { return static_cast<int>(H.rows()); }
  double norm() const { return H.norm(); }
};

// symmetrize roundoff-level Hermiticity defects; larger defects are errors
// (defect in (defect_floor, defect_err): symmetrized; >= defect_err: throw)
Mat enforce_hermitian(Mat H, double defect_floor = 1e-13, double defect_err = 1e-9);

// <Omega, u (x) conj(u)>; rejects a non-Hermitian H beyond tolerance
double evaluate(const CurvatureOperator& om, const Endo& u, double herm_tol = 1e-9);
// sesquilinear extension <Omega, a (x) conj(b)>
cplx evaluate_bilinear(const CurvatureOperator& om, const Endo& a, const Endo& b);

CurvatureOperator from_indexed(const IndexedCurvature& om4, const HermitianMetric& g);
IndexedCurvature to_indexed(const CurvatureOperator& om, const HermitianMetric& g);

// coordinate-formula square (general metric); PSD in a unitary frame
CurvatureOperator square_coord(const CurvatureOperator& om);
// spectral square of R^Omega; non-identity metrics are routed through the
// Cholesky unitary frame
CurvatureOperator square_spectral(const CurvatureOperator& om);

// bilinear symmetric sharp product; metric independent
CurvatureOperator sharp(const CurvatureOperator& p, const CurvatureOperator& q);
// Omega^# = 1/2 sharp(Omega, Omega), via the direct coordinate contraction
CurvatureOperator sharp_square(const CurvatureOperator& om);

// ad_v Omega: H -> A H + H A^dagger, A = matrix of w -> [v, w]
CurvatureOperator ad_action(const Endo& v, const CurvatureOperator& om);
Mat ad_matrix(const Endo& v);

// AA^* = sum_i a_i (x) conj(a_i); an empty list needs n and yields zero
CurvatureOperator gram(const std::vector<Endo>& a, int n_if_empty = -1);

// u^i_k = xi^i g_{k sb} conj(eta^s); realizes Griffiths evaluation
Endo rank1_endo(const Vec& xi, const Vec& eta, const HermitianMetric& g);

// eigen-system of R^Omega (identity-metric operators): Omega = sum lam_i v_i (x) conj(v_i)
struct EigenSystem {
  RVec eigenvalues;         // ascending
  std::vector<Endo> endos;  // v_i = unvec of the eigenvectors
};
EigenSystem eigen_system(const CurvatureOperator& om);

// simultaneous Ad action on both tensor slots: u (x) conj(u) -> (PuP^-1) (x) conj(PuP^-1)
CurvatureOperator ad_conjugate(const Mat& p, const CurvatureOperator& om);
// kron for the row-major vec convention: vec(A X B) = kron_rm(A, B^T) vec(X)
Mat kron_rm(const Mat& a, const Mat& b);

// transport an operator into / out of the unitary frame of its metric
// (frame form carries the identity metric)
CurvatureOperator to_unitary_frame(const CurvatureOperator& om);
CurvatureOperator from_unitary_frame(const CurvatureOperator& om_frame, const HermitianMetric& g);

// JSON fixtures: nested arrays of [re, im] pairs
std::string to_json(const CurvatureOperator& om);
std::string to_json(const IndexedCurvature& om4);
CurvatureOperator operator_from_json(const std::string& text);
IndexedCurvature indexed_from_json(const std::string& text);

}  // namespace hcf
