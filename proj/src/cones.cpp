#include "hcf/cones.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <nlohmann/json.hpp>

namespace hcf {

using nlohmann::json;

double NiceFunction::operator()(const Endo& s) const {
  switch (kind) {
    case Kind::zero:
      return 0.0;
    case Kind::trace_square: {
      const cplx t = s.trace();
      return a * std::norm(t) + b;
    }
    case Kind::spectral_abs_sum: {
      Eigen::ComplexEigenSolver<Mat> es(s, false);
      return es.eigenvalues().cwiseAbs().sum();
    }
  }
  return 0.0;
}

double NiceFunction::f_infty(const Endo& s) const {
  switch (kind) {
    case Kind::zero:
      return 0.0;
    case Kind::trace_square:
      return a * std::norm(s.trace());
    case Kind::spectral_abs_sum:
      return 0.0;  // F scales linearly, so F(s_i) lambda_i^2 -> 0
  }
  return 0.0;
}

std::string skind_name(SKind k) {
  switch (k) {
    case SKind::full_algebra: return "full_algebra";
    case SKind::rank_one: return "rank_one";
    case SKind::rank_one_traceless: return "rank_one_traceless";
    case SKind::rank_m: return "rank_m";
    case SKind::identity_only: return "identity_only";
    case SKind::scalings_of_identity: return "scalings_of_identity";
    case SKind::zero_only: return "zero_only";
  }
  return "?";
}

ConeSpec cone_from_json(const std::string& text) {
  json j = json::parse(text);
  ConeSpec cone;
  const std::string s = j.at("s").get<std::string>();
  if (s == "full_algebra") cone.s = SFamily::full_algebra();
  else if (s == "rank_one") cone.s = SFamily::rank_one();
  else if (s == "rank_one_traceless") cone.s = SFamily::rank_one_traceless();
  else if (s == "rank_m") cone.s = SFamily::rank_m(j.at("m").get<int>());
  else if (s == "identity_only") cone.s = SFamily::identity_only();
  else if (s == "scalings_of_identity") cone.s = SFamily::scalings_of_identity();
  else throw DimensionError("unknown S family: " + s);
  if (j.contains("f")) {
    const auto& f = j.at("f");
    const std::string kind = f.value("kind", "zero");
    if (kind == "zero") cone.f = NiceFunction::zero();
    else if (kind == "trace_square")
      cone.f = NiceFunction::trace_square(f.value("a", 0.0), f.value("b", 0.0));
    else if (kind == "spectral_abs_sum") cone.f = NiceFunction::spectral_abs_sum();
    else throw DimensionError("unknown nice function: " + kind);
  }
  return cone;
}

std::string cone_to_json(const ConeSpec& cone) {
  json j;
  j["s"] = skind_name(cone.s.kind);
  if (cone.s.kind == SKind::rank_m) j["m"] = cone.s.m;
  json f;
  switch (cone.f.kind) {
    case NiceFunction::Kind::zero: f["kind"] = "zero"; break;
    case NiceFunction::Kind::trace_square:
      f["kind"] = "trace_square"; f["a"] = cone.f.a; f["b"] = cone.f.b; break;
    case NiceFunction::Kind::spectral_abs_sum: f["kind"] = "spectral_abs_sum"; break;
  }
  j["f"] = std::move(f);
  return j.dump();
}

namespace {

void check_supported(const ConeSpec& cone) {
  const bool exact_family = cone.s.kind == SKind::full_algebra ||
                            cone.s.kind == SKind::identity_only ||
                            cone.s.kind == SKind::zero_only;
  if (cone.f.kind == NiceFunction::Kind::spectral_abs_sum && !(cone.s.kind == SKind::identity_only))
    throw DimensionError("margin: spectral_abs_sum is supported only with IdentityOnly");
  (void)exact_family;
}

// Hermitian form in eta at fixed xi: value = eta^dag M eta
Mat eta_form(const Mat& H, int n, const Vec& xi) {
  Mat M = Mat::Zero(n, n);
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l) {
      cplx s(0, 0);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) s += H(k * n + i, l * n + j) * xi(i) * std::conj(xi(j));
      M(k, l) = s;
    }
  return 0.5 * (M + M.adjoint().eval());
}

// Hermitian form in xi at fixed eta: value = xi^dag A xi
Mat xi_form(const Mat& H, int n, const Vec& eta) {
  Mat A = Mat::Zero(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      cplx s(0, 0);
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) s += H(k * n + i, l * n + j) * std::conj(eta(k)) * eta(l);
      A(j, i) = s;
    }
  return 0.5 * (A + A.adjoint().eval());
}

// orthonormal basis of the complement of v (unit); columns of the result
Mat complement_basis(const Vec& v) {
  const int n = static_cast<int>(v.size());
  Mat M(n, n);
  M.col(0) = v;
  Eigen::HouseholderQR<Mat> qr(M);
  Mat Q = qr.householderQ();
  return Q.rightCols(n - 1);
}

struct EigMin {
  double value;
  Vec vec;
};

EigMin min_eig(const Mat& A) {
  Eigen::SelfAdjointEigenSolver<Mat> es(A);
  if (es.info() != Eigen::Success) throw NumericalError("margin: eigensolver failed");
  return {es.eigenvalues()(0), es.eigenvectors().col(0)};
}

// alternating biquadratic minimization for rank-one families (frame coords)
MembershipReport rank_one_margin(const Mat& H, int n, const ConeSpec& cone,
                                 const MarginOptions& opts) {
  const bool traceless = cone.s.kind == SKind::rank_one_traceless;
  const double a = cone.f.kind == NiceFunction::Kind::trace_square ? cone.f.a : 0.0;
  const double b = cone.f.kind == NiceFunction::Kind::trace_square ? cone.f.b : 0.0;
  Rng rng(opts.seed);
  double best = std::numeric_limits<double>::infinity();
  Vec best_xi, best_eta;
  int restarts_used = 0;
  const double scale = std::max(1.0, H.cwiseAbs().maxCoeff());

  auto eta_step = [&](const Vec& xi) {
    Mat M = eta_form(H, n, xi);
    if (a != 0.0) M -= a * (xi * xi.adjoint());
    if (traceless) {
      Mat Q = complement_basis(xi);
      EigMin red = min_eig((Q.adjoint() * M * Q).eval());
      return EigMin{red.value, (Q * red.vec).eval()};
    }
    return min_eig(M);
  };
  auto xi_step = [&](const Vec& eta) {
    Mat A = xi_form(H, n, eta);
    if (a != 0.0) A -= a * (eta * eta.adjoint());
    if (traceless) {
      Mat Q = complement_basis(eta);
      EigMin red = min_eig((Q.adjoint() * A * Q).eval());
      return EigMin{red.value, (Q * red.vec).eval()};
    }
    return min_eig(A);
  };

  // Joint Riemannian descent on the orthonormal 2-frame (xi, eta). Alternating
  // eigensteps with the coupled constraint eta + xi stall at points that are
  // critical per block but not jointly (the two Lagrange multipliers of
  // eta^dag xi = 0 are independent); the P4 checks differentiate through the
  // contact, so the traceless minimizer must be polished to joint criticality.
  auto stiefel_polish = [&](Vec& xi, Vec& eta, double& val) {
    Mat V(n, 2);
    V.col(0) = xi;
    V.col(1) = eta;
    auto retract = [&](const Mat& X) {
      Eigen::HouseholderQR<Mat> qr(X);
      Mat Q = qr.householderQ() * Mat::Identity(n, 2);
      Mat R = Q.adjoint() * X;
      for (int c = 0; c < 2; ++c)
        if (R(c, c).real() < 0) Q.col(c) = -Q.col(c);
      return Q;
    };
    auto value_of = [&](const Mat& W) {
      Mat M = eta_form(H, n, W.col(0));
      return (W.col(1).adjoint() * M * W.col(1)).value().real();
    };
    double step = 0.5;
    val = value_of(V);
    for (int it = 0; it < 4000; ++it) {
      Mat A = xi_form(H, n, V.col(1));
      Mat M = eta_form(H, n, V.col(0));
      Mat G(n, 2);
      G.col(0) = 2.0 * A * V.col(0);
      G.col(1) = 2.0 * M * V.col(1);
      Mat W = V.adjoint() * G;
      Mat T = G - V * (0.5 * (W + W.adjoint()));
      const double gnorm = T.norm();
      if (gnorm < 1e-12 * scale) break;
      bool moved = false;
      while (step > 1e-14) {
        Mat Vn = retract(V - step * T);
        const double fn = value_of(Vn);
        if (fn <= val - 0.1 * step * gnorm * gnorm) {
          V = Vn;
          val = fn;
          moved = true;
          break;
        }
        step *= 0.5;
      }
      if (!moved) break;
      step = std::min(1.0, step * 1.6);
    }
    xi = V.col(0);
    eta = V.col(1);
  };

  auto run_from = [&](Vec xi) {
    xi.normalize();
    double prev = std::numeric_limits<double>::infinity();
    for (int it = 0; it < opts.max_iters; ++it) {
      EigMin em = eta_step(xi);
      EigMin ex = xi_step(em.vec);
      xi = ex.vec;
      if (std::abs(ex.value - prev) < opts.tol * scale) break;
      prev = ex.value;
    }
    // resync the pair: eta exactly optimal for the final xi
    EigMin em = eta_step(xi);
    Vec eta = em.vec;
    double val = em.value;
    if (traceless) stiefel_polish(xi, eta, val);
    if (val < best) {
      best = val;
      best_xi = xi;
      best_eta = eta;
    }
  };

  if (opts.warm_start && opts.warm_start->rows() == n) {
    // recover xi from the dominant left singular direction of the hint
    Eigen::JacobiSVD<Mat> svd(*opts.warm_start, Eigen::ComputeThinU);
    run_from(svd.matrixU().col(0));
    ++restarts_used;
  }
  for (int r = 0; r < opts.restarts; ++r, ++restarts_used)
    run_from(rng.complex_gaussian_vec(n));

  MembershipReport rep;
  rep.margin = best - b;
  rep.minimizer = best_xi * best_eta.adjoint();  // unit Frobenius norm
  rep.certified = false;
  rep.restarts_used = restarts_used;
  return rep;
}

// alternating minimization over u = X Y^dag of rank <= m, ||u||_F = 1
MembershipReport rank_m_margin(const Mat& H, int n, const ConeSpec& cone,
                               const MarginOptions& opts) {
  const int m = cone.s.m;
  const double a = cone.f.kind == NiceFunction::Kind::trace_square ? cone.f.a : 0.0;
  const double b = cone.f.kind == NiceFunction::Kind::trace_square ? cone.f.b : 0.0;
  Rng rng(opts.seed ^ 0xabcdefULL);
  double best = std::numeric_limits<double>::infinity();
  Mat best_u;
  int restarts_used = 0;
  const double scale = std::max(1.0, H.cwiseAbs().maxCoeff());

  auto orthonormalize = [](Mat X) {
    Eigen::HouseholderQR<Mat> qr(X);
    Mat Q = qr.householderQ();
    return Q.leftCols(X.cols()).eval();
  };
  auto vec_nm = [&](const Mat& Y) {
    Vec y(n * m);
    for (int k = 0; k < n; ++k)
      for (int c = 0; c < m; ++c) y(k * m + c) = Y(k, c);
    return y;
  };
  auto unvec_nm = [&](const Vec& y) {
    Mat Y(n, m);
    for (int k = 0; k < n; ++k)
      for (int c = 0; c < m; ++c) Y(k, c) = y(k * m + c);
    return Y;
  };
  // Hermitian form in vec(Y) at fixed X with X^dag X = I:
  //   value(X Y^dag) = sum conj(Y(k,c)) M2[(k,c),(l,c')] Y(l,c')
  auto y_step = [&](const Mat& X) {
    Mat M2 = Mat::Zero(n * m, n * m);
    for (int k = 0; k < n; ++k)
      for (int c = 0; c < m; ++c)
        for (int l = 0; l < n; ++l)
          for (int cp = 0; cp < m; ++cp) {
            cplx s(0, 0);
            for (int i = 0; i < n; ++i)
              for (int j = 0; j < n; ++j)
                s += H(k * n + i, l * n + j) * X(i, c) * std::conj(X(j, cp));
            M2(k * m + c, l * m + cp) = s;
          }
    M2 = 0.5 * (M2 + M2.adjoint().eval());
    if (a != 0.0) {
      Vec x = vec_nm(X);
      M2 -= a * (x * x.adjoint());
    }
    return min_eig(M2);
  };
  // Hermitian form in vec(X) at fixed orthonormal Y:
  //   value = sum X(i,c) conj(X(j,c')) * [sum_{k,l} H[(k,i),(l,j)] conj(Y(k,c)) Y(l,c')]
  auto x_step = [&](const Mat& Yo) {
    Mat M3 = Mat::Zero(n * m, n * m);
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < m; ++c)
        for (int j = 0; j < n; ++j)
          for (int cp = 0; cp < m; ++cp) {
            cplx s(0, 0);
            for (int k = 0; k < n; ++k)
              for (int l = 0; l < n; ++l)
                s += H(k * n + i, l * n + j) * std::conj(Yo(k, c)) * Yo(l, cp);
            M3(j * m + cp, i * m + c) += s;
          }
    M3 = 0.5 * (M3 + M3.adjoint().eval());
    if (a != 0.0) {
      Vec y = vec_nm(Yo);
      M3 -= a * (y * y.adjoint());
    }
    return min_eig(M3);
  };

  auto run_from = [&](Mat X) {
    X = orthonormalize(std::move(X));
    double prev = std::numeric_limits<double>::infinity();
    EigMin ey = y_step(X);
    for (int it = 0; it < opts.max_iters; ++it) {
      Mat Yo = orthonormalize(unvec_nm(ey.vec));
      EigMin ex = x_step(Yo);
      X = orthonormalize(unvec_nm(ex.vec));
      ey = y_step(X);
      if (std::abs(ey.value - prev) < opts.tol * scale) break;
      prev = ey.value;
    }
    Mat u = X * unvec_nm(ey.vec).adjoint();
    const double nu = u.norm();
    if (nu > 1e-14) u /= nu;
    if (ey.value < best) {
      best = ey.value;
      best_u = u;
    }
  };

  if (opts.warm_start && opts.warm_start->rows() == n) {
    Eigen::JacobiSVD<Mat> svd(*opts.warm_start, Eigen::ComputeThinU);
    Mat X0 = svd.matrixU().leftCols(std::min(m, static_cast<int>(svd.matrixU().cols())));
    if (X0.cols() < m) {
      Mat pad(n, m);
      pad.setZero();
      pad.leftCols(X0.cols()) = X0;
      for (int c = static_cast<int>(X0.cols()); c < m; ++c) pad(c % n, c) = 1.0;
      X0 = pad;
    }
    run_from(X0);
    ++restarts_used;
  }
  for (int r = 0; r < opts.restarts; ++r, ++restarts_used) run_from(rng.complex_gaussian(n, m));

  MembershipReport rep;
  rep.margin = best - b;
  rep.minimizer = best_u;
  rep.certified = false;
  rep.restarts_used = restarts_used;
  return rep;
}

}  // namespace

MembershipReport margin(const CurvatureOperator& om, const ConeSpec& cone,
                        const MarginOptions& opts) {
  check_supported(cone);
  const int n = om.n();
  // frame-invariant families: work in the unitary frame of the metric
  const bool framed = !om.metric.is_identity();
  CurvatureOperator of = framed ? to_unitary_frame(om) : om;
  const Mat& H = of.H;
  Mat F, Finv;
  if (framed) {
    F = om.metric.unitary_frame();
    Finv = F.inverse();
  }
  auto unframe = [&](const Endo& u) { return framed ? (F * u * Finv).eval() : u; };

  MembershipReport rep;
  switch (cone.s.kind) {
    case SKind::zero_only: {
      rep.margin = 0.0;
      rep.minimizer = Mat::Zero(n, n);
      rep.certified = true;
      return rep;
    }
    case SKind::identity_only: {
      Endo id = Mat::Identity(n, n);
      rep.margin = evaluate(of, id) - cone.f(id);
      rep.minimizer = id;
      rep.certified = true;
      return rep;
    }
    case SKind::scalings_of_identity: {
      if (cone.f.kind == NiceFunction::Kind::spectral_abs_sum)
        throw DimensionError("margin: spectral_abs_sum unsupported for scalings_of_identity");
      Endo id = Mat::Identity(n, n);
      const double raw = evaluate(of, id);
      rep.margin = (raw - cone.f.a * n * n) / n - cone.f.b;
      rep.minimizer = unframe((id / std::sqrt(static_cast<double>(n))).eval());
      rep.certified = true;
      return rep;
    }
    case SKind::full_algebra: {
      Mat Heff = H;
      if (cone.f.kind == NiceFunction::Kind::trace_square && cone.f.a != 0.0) {
        Vec c = vec_endo(Mat::Identity(n, n));
        Heff -= cone.f.a * (c * c.adjoint());
      }
      EigMin em = min_eig(Heff);
      rep.margin = em.value - (cone.f.kind == NiceFunction::Kind::trace_square ? cone.f.b : 0.0);
      // evaluate(Omega, u) = <H w, w> at w = vec(u^*), so the minimizing endo
      // is the adjoint of the eigenvector's matrix
      rep.minimizer = unframe(unvec_endo(em.vec, n).adjoint().eval());
      rep.certified = true;
      return rep;
    }
    case SKind::rank_one:
    case SKind::rank_one_traceless: {
      rep = rank_one_margin(H, n, cone, opts);
      rep.minimizer = unframe(rep.minimizer);
      return rep;
    }
    case SKind::rank_m: {
      require(cone.s.m >= 1 && cone.s.m <= n, "rank_m: m out of range");
      if (cone.s.m == n) {
        ConeSpec full = cone;
        full.s = SFamily::full_algebra();
        return margin(om, full, opts);
      }
      if (cone.s.m == 1) {
        ConeSpec r1 = cone;
        r1.s = SFamily::rank_one();
        return margin(om, r1, opts);
      }
      rep = rank_m_margin(H, n, cone, opts);
      rep.minimizer = unframe(rep.minimizer);
      return rep;
    }
  }
  throw DimensionError("margin: unsupported family");
}

double mu_value(const CurvatureOperator& om, const SFamily& s, const MarginOptions& opts) {
  const int n = om.n();
  const double inf = std::numeric_limits<double>::infinity();
  if (s.kind == SKind::rank_one_traceless) return inf;  // tr s == 0 on all of S
  CurvatureOperator of = om.metric.is_identity() ? om : to_unitary_frame(om);
  Endo id = Mat::Identity(n, n);
  if (s.kind == SKind::identity_only || s.kind == SKind::scalings_of_identity)
    return evaluate(of, id) / (n * n);

  const double scale = std::max(1.0, of.H.cwiseAbs().maxCoeff());
  Vec c_id = vec_endo(id);
  Mat T0 = c_id * c_id.adjoint();
  ConeSpec zero_cone{s, NiceFunction::zero()};
  auto h = [&](double mu) {
    CurvatureOperator shifted(Mat(of.H - mu * T0), HermitianMetric::identity(n));
    return margin(shifted, zero_cone, opts).margin;
  };

  // solver values carry roundoff of order tol*scale; treat those as feasible
  const double feas = 1e-9 * scale;
  const double mu_floor = -(10.0 + 10.0 * scale * n);
  if (h(mu_floor) < -feas) return -inf;
  double hi = evaluate(of, id) / (n * n) + 1e-12 * scale;
  double lo = mu_floor;
  if (h(hi) >= -feas) return hi;  // Id-direction bound is tight
  for (int it = 0; it < 80 && hi - lo > 1e-10 * std::max(1.0, std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (h(mid) >= -feas ? lo : hi) = mid;
  }
  return lo;
}

BoundaryPair boundary_sample(const ConeSpec& cone, Rng& rng, double scale, int n,
                             double contact_tol, const MarginOptions& opts) {
  check_supported(cone);
  // random PSD start: Gram operator of n^2 random endomorphisms
  std::vector<Endo> a;
  for (int i = 0; i < n * n; ++i) a.push_back(rng.complex_gaussian(n, n));
  CurvatureOperator om = gram(a);
  om.H *= scale / std::max(1e-300, inf_norm(om.H));

  if (cone.s.kind == SKind::identity_only) {
    // affine in the Id (x) conj(Id) direction: <Om + t T0, Id> = <Om, Id> + t n^2
    Endo id = Mat::Identity(n, n);
    const double q = cone.f(id);
    const double t = (q - evaluate(om, id)) / (n * n);
    Vec c = vec_endo(id);
    om.H += t * (c * c.adjoint());
    MembershipReport rep = margin(om, cone, opts);
    return {om, rep.minimizer, q, rep};
  }

  // unit-slice families: the operator identity shifts every margin by exactly t
  MembershipReport rep = margin(om, cone, opts);
  Mat I = Mat::Identity(n * n, n * n);
  // the contact element must also be a first-order critical point (the P4
  // checks differentiate through it), so polish with a machine-level solve
  MarginOptions polish = opts;
  polish.max_iters = 5000;
  polish.tol = 1e-17;
  for (int refine = 0; refine < 6; ++refine) {
    om.H -= rep.margin * I;
    MarginOptions o2 = polish;
    o2.warm_start = rep.minimizer;
    o2.seed = opts.seed + refine + 1;
    rep = margin(om, cone, o2);
    if (std::abs(rep.margin) <= contact_tol * scale) break;
  }
  if (std::abs(rep.margin) > contact_tol * scale)
    throw NumericalError("boundary_sample: failed to land on the boundary");
  return {om, rep.minimizer, cone.f(rep.minimizer), rep};
}

SFamily boundary_at_infinity(const SFamily& s) {
  switch (s.kind) {
    case SKind::identity_only:
      return {SKind::zero_only, 0};
    case SKind::full_algebra:
    case SKind::rank_one:
    case SKind::rank_one_traceless:
    case SKind::rank_m:               // closure: ranks <= m, including 0
    case SKind::scalings_of_identity:  // already scale invariant and closed
    case SKind::zero_only:
      return s;
  }
  return s;
}

}  // namespace hcf
