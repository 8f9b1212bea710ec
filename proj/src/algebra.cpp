#include "hcf/algebra.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <nlohmann/json.hpp>

namespace hcf {

using nlohmann::json;

Vec vec_endo(const Endo& w) {
  const int n = static_cast<int>(w.rows());
  Vec c(n * n);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i) c(k * n + i) = w(k, i);
  return c;
}

Endo unvec_endo(const Vec& c, int n) {
  Endo w(n, n);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i) w(k, i) = c(k * n + i);
  return w;
}

Vec x_of(const Endo& u) {
  const int n = static_cast<int>(u.rows());
  Vec x(n * n);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i) x(k * n + i) = u(i, k);
  return x;
}

cplx trace_pairing(const Endo& u, const Endo& v) {
  require(u.rows() == v.rows() && u.cols() == v.cols() && u.rows() == u.cols(),
          "trace_pairing: dimension mismatch");
  return (u * v).trace();
}

HermitianMetric::HermitianMetric(Mat m) : g(std::move(m)) {
  require(g.rows() == g.cols(), "metric must be square");
  if (hermiticity_defect(g) > 1e-10 * std::max(1.0, inf_norm(g)))
    throw NumericalError("metric is not Hermitian");
  g = 0.5 * (g + g.adjoint().eval());
  if (min_eigenvalue() <= 0.0) throw NumericalError("metric is not positive definite");
}

HermitianMetric HermitianMetric::identity(int n) {
  HermitianMetric m;
  m.g = Mat::Identity(n, n);
  return m;
}

bool HermitianMetric::is_identity(double tol) const {
  return inf_norm(g - Mat::Identity(g.rows(), g.cols())) <= tol;
}

Mat HermitianMetric::inverse_up() const { return g.inverse().conjugate(); }

Mat HermitianMetric::unitary_frame() const {
  Eigen::LLT<Mat> llt(g);
  if (llt.info() != Eigen::Success) throw NumericalError("metric Cholesky failed");
  Mat L = llt.matrixL();
  // F = conj(L^{-dagger}); then F^T g conj(F) = L^{-1} g L^{-dagger} = Id
  Mat Linv = L.inverse();
  return Linv.adjoint().conjugate();
}

double HermitianMetric::min_eigenvalue() const {
  Eigen::SelfAdjointEigenSolver<Mat> es(g, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double IndexedCurvature::hermitian_symmetry_defect() const {
  double d = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l)
          d = std::max(d, std::abs(at(i, j, k, l) - std::conj(at(j, i, l, k))));
  return d;
}

CurvatureOperator CurvatureOperator::rank_one(const Endo& v) {
  const int n = static_cast<int>(v.rows());
  Vec c = vec_endo(v);
  return CurvatureOperator((c * c.adjoint()).eval(), HermitianMetric::identity(n));
}

CurvatureOperator CurvatureOperator::identity_pair(int n) {
  return rank_one(Mat::Identity(n, n));
}

CurvatureOperator CurvatureOperator::operator_identity(int n) {
  return CurvatureOperator(Mat::Identity(n * n, n * n).eval(), HermitianMetric::identity(n));
}

Mat enforce_hermitian(Mat H, double defect_floor, double defect_err) {
  const double d = hermiticity_defect(H);
  if (d >= defect_err * std::max(1.0, inf_norm(H)))
    throw NumericalError("Hermiticity defect too large: " + std::to_string(d));
  if (d > defect_floor) H = 0.5 * (H + H.adjoint().eval());
  return H;
}

double evaluate(const CurvatureOperator& om, const Endo& u, double herm_tol) {
  require(om.n() == u.rows(), "evaluate: dimension mismatch");
  if (hermiticity_defect(om.H) > herm_tol * std::max(1.0, inf_norm(om.H)))
    throw NumericalError("evaluate: operator is not Hermitian");
  Vec x = x_of(u);
  return (x.transpose() * om.H * x.conjugate()).value().real();
}

cplx evaluate_bilinear(const CurvatureOperator& om, const Endo& a, const Endo& b) {
  return (x_of(a).transpose() * om.H * x_of(b).conjugate()).value();
}

CurvatureOperator from_indexed(const IndexedCurvature& om4, const HermitianMetric& g) {
  const int n = om4.n;
  require(g.n() == n, "from_indexed: dimension mismatch");
  Mat gup = g.inverse_up();
  Mat H = Mat::Zero(n * n, n * n);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int l = 0; l < n; ++l)
        for (int j = 0; j < n; ++j) {
          cplx s(0, 0);
          for (int m = 0; m < n; ++m)
            for (int nn = 0; nn < n; ++nn) s += om4.at(i, j, m, nn) * gup(m, l) * gup(k, nn);
          H(k * n + i, l * n + j) = s;
        }
  return CurvatureOperator(std::move(H), g);
}

IndexedCurvature to_indexed(const CurvatureOperator& om, const HermitianMetric& g) {
  const int n = om.n();
  require(g.n() == n, "to_indexed: dimension mismatch");
  IndexedCurvature om4(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int m = 0; m < n; ++m)
        for (int nn = 0; nn < n; ++nn) {
          cplx s(0, 0);
          for (int k = 0; k < n; ++k)
            for (int l = 0; l < n; ++l)
              s += om.H(k * n + i, l * n + j) * g.g(m, l) * g.g(k, nn);
          om4.at(i, j, m, nn) = s;
        }
  return om4;
}

namespace {
// H viewed as the rank-4 array PR[k][i][l][j] = H((k,i),(l,j))
inline cplx pr(const Mat& H, int n, int k, int i, int l, int j) {
  return H(k * n + i, l * n + j);
}
}  // namespace

CurvatureOperator square_coord(const CurvatureOperator& om) {
  const int n = om.n();
  const Mat& H = om.H;
  Mat out = Mat::Zero(n * n, n * n);
  if (om.metric.is_identity()) {
    out = H * H;
  } else {
    const Mat gup = om.metric.inverse_up();
    const Mat& G = om.metric.g;
    // (Om^2)[k,i,l,j] = gup(m,n) G(p,s) PR[k,i,s,n] PR[p,m,l,j]
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int l = 0; l < n; ++l)
          for (int j = 0; j < n; ++j) {
            cplx acc(0, 0);
            for (int m = 0; m < n; ++m)
              for (int nn = 0; nn < n; ++nn)
                for (int p = 0; p < n; ++p)
                  for (int s = 0; s < n; ++s)
                    acc += gup(m, nn) * G(p, s) * pr(H, n, k, i, s, nn) * pr(H, n, p, m, l, j);
            out(k * n + i, l * n + j) = acc;
          }
  }
  return CurvatureOperator(enforce_hermitian(std::move(out)), om.metric);
}

CurvatureOperator square_spectral(const CurvatureOperator& om) {
  if (om.metric.is_identity()) {
    Eigen::SelfAdjointEigenSolver<Mat> es(om.H);
    if (es.info() != Eigen::Success) throw NumericalError("square_spectral: eigensolver failed");
    Mat sq = es.eigenvectors() *
             es.eigenvalues().array().square().matrix().asDiagonal() *
             es.eigenvectors().adjoint();
    return CurvatureOperator(enforce_hermitian(std::move(sq)), om.metric);
  }
  CurvatureOperator framed = to_unitary_frame(om);
  CurvatureOperator sq = square_spectral(framed);
  return from_unitary_frame(sq, om.metric);
}

CurvatureOperator sharp(const CurvatureOperator& p, const CurvatureOperator& q) {
  const int n = p.n();
  require(q.n() == n, "sharp: dimension mismatch");
  const Mat& P = p.H;
  const Mat& Q = q.H;
  Mat out = Mat::Zero(n * n, n * n);
  // symmetrized bilinear: P#Q = t(P,Q) + t(Q,P),
  // t(A,B)[k,i,l,j] = A[k,p,l,m] B[p,i,m,j] - A[k,p,m,j] B[p,i,l,m]
  auto t = [&](const Mat& A, const Mat& B, Mat& acc) {
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int l = 0; l < n; ++l)
          for (int j = 0; j < n; ++j) {
            cplx s(0, 0);
            for (int pp = 0; pp < n; ++pp)
              for (int m = 0; m < n; ++m)
                s += pr(A, n, k, pp, l, m) * pr(B, n, pp, i, m, j) -
                     pr(A, n, k, pp, m, j) * pr(B, n, pp, i, l, m);
            acc(k * n + i, l * n + j) += s;
          }
  };
  t(P, Q, out);
  t(Q, P, out);
  return CurvatureOperator(enforce_hermitian(std::move(out)), HermitianMetric::identity(n));
}

CurvatureOperator sharp_square(const CurvatureOperator& om) {
  const int n = om.n();
  const Mat& H = om.H;
  Mat out = Mat::Zero(n * n, n * n);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int l = 0; l < n; ++l)
        for (int j = 0; j < n; ++j) {
          cplx s(0, 0);
          for (int pp = 0; pp < n; ++pp)
            for (int m = 0; m < n; ++m)
              s += pr(H, n, k, pp, l, m) * pr(H, n, pp, i, m, j) -
                   pr(H, n, k, pp, m, j) * pr(H, n, pp, i, l, m);
          out(k * n + i, l * n + j) = s;
        }
  return CurvatureOperator(enforce_hermitian(std::move(out)), om.metric);
}

Mat ad_matrix(const Endo& v) {
  const int n = static_cast<int>(v.rows());
  Mat A = Mat::Zero(n * n, n * n);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int p = 0; p < n; ++p)
        for (int q = 0; q < n; ++q) {
          cplx val(0, 0);
          if (i == q) val += v(k, p);
          if (k == p) val -= v(q, i);
          if (val != cplx(0, 0)) A(k * n + i, p * n + q) = val;
        }
  return A;
}

CurvatureOperator ad_action(const Endo& v, const CurvatureOperator& om) {
  require(v.rows() == om.n(), "ad_action: dimension mismatch");
  Mat A = ad_matrix(v);
  Mat out = A * om.H + om.H * A.adjoint();
  return CurvatureOperator(enforce_hermitian(std::move(out)), om.metric);
}

CurvatureOperator gram(const std::vector<Endo>& a, int n_if_empty) {
  if (a.empty()) {
    require(n_if_empty > 0, "gram: empty list needs an explicit dimension");
    return CurvatureOperator(n_if_empty);
  }
  const int n = static_cast<int>(a[0].rows());
  Mat H = Mat::Zero(n * n, n * n);
  for (const Endo& ai : a) {
    require(ai.rows() == n, "gram: dimension mismatch");
    Vec c = vec_endo(ai);
    H += c * c.adjoint();
  }
  return CurvatureOperator(std::move(H), HermitianMetric::identity(n));
}

Endo rank1_endo(const Vec& xi, const Vec& eta, const HermitianMetric& g) {
  const int n = static_cast<int>(xi.size());
  require(eta.size() == n && g.n() == n, "rank1_endo: dimension mismatch");
  Vec w = g.g * eta.conjugate();  // w_k = g_{k sb} conj(eta^s)
  return (xi * w.transpose()).eval();
}

EigenSystem eigen_system(const CurvatureOperator& om) {
  if (!om.metric.is_identity())
    throw NumericalError("eigen_system requires the unitary frame (identity metric)");
  Eigen::SelfAdjointEigenSolver<Mat> es(om.H);
  if (es.info() != Eigen::Success) throw NumericalError("eigen_system: eigensolver failed");
  EigenSystem sys;
  sys.eigenvalues = es.eigenvalues();
  const int n = om.n();
  for (int a = 0; a < om.dim(); ++a) sys.endos.push_back(unvec_endo(es.eigenvectors().col(a), n));
  return sys;
}

Mat kron_rm(const Mat& a, const Mat& b) {
  const int nb = static_cast<int>(b.rows());
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out.block(i * nb, j * nb, nb, nb) = a(i, j) * b;
  return out;
}

CurvatureOperator ad_conjugate(const Mat& p, const CurvatureOperator& om) {
  require(p.rows() == om.n(), "ad_conjugate: dimension mismatch");
  Mat K = kron_rm(p, p.inverse().transpose());
  Mat out = K * om.H * K.adjoint();
  return CurvatureOperator(enforce_hermitian(std::move(out), 1e-13, 1e-7), om.metric);
}

CurvatureOperator to_unitary_frame(const CurvatureOperator& om) {
  Mat F = om.metric.unitary_frame();
  Mat K = kron_rm(F.inverse(), F.transpose());  // vec of u -> F^{-1} u F
  Mat Hf = K * om.H * K.adjoint();
  return CurvatureOperator(enforce_hermitian(std::move(Hf), 1e-13, 1e-7),
                           HermitianMetric::identity(om.n()));
}

CurvatureOperator from_unitary_frame(const CurvatureOperator& om_frame, const HermitianMetric& g) {
  Mat F = g.unitary_frame();
  Mat Kinv = kron_rm(F, F.inverse().transpose());  // inverse transform
  Mat H = Kinv * om_frame.H * Kinv.adjoint();
  return CurvatureOperator(enforce_hermitian(std::move(H), 1e-13, 1e-7), g);
}

namespace {
json cplx_to_json(const cplx& z) { return json::array({z.real(), z.imag()}); }
cplx cplx_from_json(const json& j) { return cplx(j.at(0).get<double>(), j.at(1).get<double>()); }
}  // namespace

std::string to_json(const CurvatureOperator& om) {
  json j;
  j["n"] = om.n();
  json rows = json::array();
  for (int r = 0; r < om.dim(); ++r) {
    json row = json::array();
    for (int c = 0; c < om.dim(); ++c) row.push_back(cplx_to_json(om.H(r, c)));
    rows.push_back(std::move(row));
  }
  j["H"] = std::move(rows);
  json grows = json::array();
  for (int r = 0; r < om.n(); ++r) {
    json row = json::array();
    for (int c = 0; c < om.n(); ++c) row.push_back(cplx_to_json(om.metric.g(r, c)));
    grows.push_back(std::move(row));
  }
  j["g"] = std::move(grows);
  return j.dump();
}

std::string to_json(const IndexedCurvature& om4) {
  json j;
  j["n"] = om4.n;
  json entries = json::array();
  for (const cplx& z : om4.t4) entries.push_back(cplx_to_json(z));
  j["t4"] = std::move(entries);
  return j.dump();
}

CurvatureOperator operator_from_json(const std::string& text) {
  json j = json::parse(text);
  const int n = j.at("n").get<int>();
  Mat H(n * n, n * n);
  for (int r = 0; r < n * n; ++r)
    for (int c = 0; c < n * n; ++c) H(r, c) = cplx_from_json(j.at("H").at(r).at(c));
  Mat g(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) g(r, c) = cplx_from_json(j.at("g").at(r).at(c));
  return CurvatureOperator(std::move(H), HermitianMetric(std::move(g)));
}

IndexedCurvature indexed_from_json(const std::string& text) {
  json j = json::parse(text);
  IndexedCurvature om4(j.at("n").get<int>());
  const auto& entries = j.at("t4");
  for (size_t idx = 0; idx < om4.t4.size(); ++idx) om4.t4[idx] = cplx_from_json(entries.at(idx));
  return om4;
}

}  // namespace hcf
