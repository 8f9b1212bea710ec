#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include "test_util.hpp"

using namespace hcf;
using namespace hcf::testutil;

TEST_CASE("trace pairing") {
  CHECK(trace_pairing(Mat::Identity(2, 2), Mat::Identity(2, 2)) == cplx(2.0, 0.0));
  // E_{(1,2)} E_{(2,1)} has trace 1 (indices are 0-based in code)
  CHECK(trace_pairing(basis_endo(2, 0, 1), basis_endo(2, 1, 0)) == cplx(1.0, 0.0));

  Rng rng(11);
  Endo u = rng.complex_gaussian(3, 3), v = rng.complex_gaussian(3, 3);
  cplx direct(0, 0);  // entrywise double sum
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) direct += u(a, b) * v(b, a);
  CHECK(std::abs(trace_pairing(u, v) - direct) < 1e-13);
  CHECK(std::abs(trace_pairing(u, v) - trace_pairing(v, u)) < 1e-13);
  CHECK_THROWS_AS(trace_pairing(u, Mat::Identity(2, 2)), DimensionError);
}

TEST_CASE("evaluate against rank-one and eigendecomposition oracles") {
  // <v (x) conj v, u (x) conj u> = |tr(uv)|^2
  Endo v = basis_endo(2, 0, 1), u = basis_endo(2, 1, 0);
  CHECK(evaluate(CurvatureOperator::rank_one(v), u) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(evaluate(CurvatureOperator::rank_one(v), v) == doctest::Approx(0.0).epsilon(1e-14));

  Rng rng(12);
  CurvatureOperator om = rand_operator(rng, 3);
  Endo w = rng.complex_gaussian(3, 3);
  EigenSystem sys = eigen_system(om);
  double oracle = 0.0;
  for (int i = 0; i < 9; ++i)
    oracle += sys.eigenvalues(i) * std::norm(trace_pairing(sys.endos[i], w));
  CHECK(evaluate(om, w) == doctest::Approx(oracle).epsilon(1e-10));

  Mat bad = rng.complex_gaussian(9, 9);  // decidedly not Hermitian
  CurvatureOperator bad_op(bad, HermitianMetric::identity(3));
  CHECK_THROWS_AS(evaluate(bad_op, w), NumericalError);
}

TEST_CASE("indexed curvature round trips") {
  Rng rng(13);
  for (int n : {1, 2, 3}) {
    HermitianMetric g = rand_metric(rng, n);
    CurvatureOperator om = rand_operator(rng, n);
    om.metric = g;
    IndexedCurvature t4 = to_indexed(om, g);
    CHECK(t4.hermitian_symmetry_defect() < 1e-11);
    CurvatureOperator back = from_indexed(t4, g);
    CHECK(inf_norm(back.H - om.H) < 1e-12 * std::max(1.0, inf_norm(om.H)));
  }
  // zero maps to zero
  IndexedCurvature zero(2);
  CHECK(inf_norm(from_indexed(zero, HermitianMetric::identity(2)).H) == 0.0);
  // g = Id: raising is pure relabeling, H[(k,i),(l,j)] = Om4[i][j][l][k-bar slot]
  IndexedCurvature t4(2);
  Rng rng2(14);
  CurvatureOperator src = rand_operator(rng2, 2);
  t4 = to_indexed(src, HermitianMetric::identity(2));
  for (int k = 0; k < 2; ++k)
    for (int i = 0; i < 2; ++i)
      for (int l = 0; l < 2; ++l)
        for (int j = 0; j < 2; ++j)
          CHECK(std::abs(src.H(k * 2 + i, l * 2 + j) - t4.at(i, j, l, k)) < 1e-13);
}

TEST_CASE("rank1_endo realizes the Griffiths evaluation") {
  // xi = e1, eta = e2, g = Id -> E_{(1,2)} with trace 0
  HermitianMetric id2 = HermitianMetric::identity(2);
  Vec e1 = Vec::Zero(2), e2 = Vec::Zero(2);
  e1(0) = 1.0;
  e2(1) = 1.0;
  CHECK(inf_norm(rank1_endo(e1, e2, id2) - basis_endo(2, 0, 1)) == 0.0);
  CHECK(std::abs(rank1_endo(e1, e1, id2).trace() - cplx(1, 0)) == 0.0);

  Rng rng(15);
  const int n = 3;
  HermitianMetric g = rand_metric(rng, n);
  CurvatureOperator om = rand_operator(rng, n);
  om.metric = g;
  IndexedCurvature t4 = to_indexed(om, g);
  Vec xi = rng.complex_gaussian_vec(n), eta = rng.complex_gaussian_vec(n);
  Endo u = rank1_endo(xi, eta, g);
  // direct contraction oracle Om_{i jb k lb} xi^i conj(xi^j) eta^k conj(eta^l)
  cplx oracle(0, 0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l)
          oracle += t4.at(i, j, k, l) * xi(i) * std::conj(xi(j)) * eta(k) * std::conj(eta(l));
  CHECK(std::abs(evaluate(om, u) - oracle.real()) < 1e-12 * std::max(1.0, std::abs(oracle)));
  CHECK(std::abs(u.trace() - (xi.transpose() * g.g * eta.conjugate()).value()) < 1e-12);
}

TEST_CASE("square: coordinate formula vs spectral square") {
  // n = 1: abelian, (lambda) -> (lambda^2)
  CurvatureOperator om1(1);
  om1.H(0, 0) = 1.7;
  CHECK(square_coord(om1).H(0, 0).real() == doctest::Approx(1.7 * 1.7));
  // identity operator squares to itself
  CurvatureOperator id_op = CurvatureOperator::operator_identity(2);
  CHECK(inf_norm(square_coord(id_op).H - id_op.H) < 1e-13);
  // diagonal spectral square
  CurvatureOperator diag(2);
  diag.H(0, 0) = 2.0;
  diag.H(1, 1) = -1.0;
  Mat sq = square_spectral(diag).H;
  CHECK(sq(0, 0).real() == doctest::Approx(4.0));
  CHECK(sq(1, 1).real() == doctest::Approx(1.0));
  CHECK(std::abs(sq(2, 2)) < 1e-14);

  Rng rng(16);
  for (int n : {1, 2, 3, 4}) {
    CurvatureOperator om = rand_operator(rng, n);
    Mat a = square_coord(om).H, b = square_spectral(om).H;
    CHECK(inf_norm(a - b) < 1e-10 * std::max(1.0, inf_norm(a)));
  }
  // repeated eigenvalues: basis-free function of R^Omega
  CurvatureOperator rep(2);
  rep.H = 3.0 * Mat::Identity(4, 4);
  rep.H(3, 3) = 5.0;
  CHECK(inf_norm(square_spectral(rep).H - square_coord(rep).H) < 1e-12);

  // non-identity metric: coordinate formula equals the Cholesky-frame route
  for (int n : {2, 3}) {
    HermitianMetric g = rand_metric(rng, n);
    CurvatureOperator cm = rand_operator(rng, n);
    Mat sym = 0.5 * (cm.H + cm.H.adjoint().eval());
    // build an operator Hermitian as an H-matrix with metric g attached
    CurvatureOperator om(sym, g);
    Mat a = square_coord(om).H, b = square_spectral(om).H;
    CHECK(inf_norm(a - b) < 1e-9 * std::max(1.0, inf_norm(a)));
  }
}

TEST_CASE("sharp: basis-expansion oracle, symmetry, metric independence") {
  const int n = 2;
  // [Id, anything] = 0
  CurvatureOperator idp = CurvatureOperator::identity_pair(n);
  CHECK(inf_norm(sharp(idp, idp).H) < 1e-14);
  CurvatureOperator a1(1);
  a1.H(0, 0) = 2.0;
  CHECK(inf_norm(sharp(a1, a1).H) == 0.0);

  Rng rng(17);
  CurvatureOperator p = rand_operator(rng, n), q = rand_operator(rng, n);
  // brute-force expansion over basis elements per the defining bilinear rule
  // (the expansion is symmetric in (P,Q) by construction)
  auto basis_sharp = [n](const Mat& P, const Mat& Q) {
    Mat acc = Mat::Zero(n * n, n * n);
    for (int A = 0; A < n * n; ++A)
      for (int B = 0; B < n * n; ++B)
        for (int C = 0; C < n * n; ++C)
          for (int D = 0; D < n * n; ++D) {
            const cplx w = P(A, B) * Q(C, D);
            if (w == cplx(0, 0)) continue;
            Endo ea = unvec_endo(Vec::Unit(n * n, A), n), eb = unvec_endo(Vec::Unit(n * n, B), n);
            Endo ec = unvec_endo(Vec::Unit(n * n, C), n), ed = unvec_endo(Vec::Unit(n * n, D), n);
            Vec v1 = vec_endo(ea * ec - ec * ea);
            Vec w1 = vec_endo(eb * ed - ed * eb);
            acc += w * (v1 * w1.adjoint());
          }
    return acc;
  };
  Mat pq = sharp(p, q).H;
  Mat oracle = basis_sharp(p.H, q.H);
  CHECK(inf_norm(pq - oracle) < 1e-10 * std::max(1.0, inf_norm(pq)));

  // symmetry and real bilinearity
  CHECK(inf_norm(sharp(p, q).H - sharp(q, p).H) < 1e-12);
  CurvatureOperator r = rand_operator(rng, n);
  Mat lhs = sharp(CurvatureOperator(Mat(2.5 * p.H + r.H), p.metric), q).H;
  Mat rhs = 2.5 * sharp(p, q).H + sharp(r, q).H;
  CHECK(inf_norm(lhs - rhs) < 1e-11 * std::max(1.0, inf_norm(rhs)));

  // attaching different metrics must not change the sharp product
  HermitianMetric g = rand_metric(rng, n);
  CurvatureOperator pg(p.H, g), qg(q.H, g);
  CHECK(inf_norm(sharp(pg, qg).H - sharp(p, q).H) < 1e-13);
}

TEST_CASE("sharp square: eigenbasis oracle") {
  Rng rng(18);
  // rank-one operators have vanishing sharp square
  Endo v = rng.complex_gaussian(3, 3);
  CHECK(inf_norm(sharp_square(CurvatureOperator::rank_one(v)).H) < 1e-12);
  CurvatureOperator a1(1);
  a1.H(0, 0) = -3.0;
  CHECK(inf_norm(sharp_square(a1).H) == 0.0);

  for (int n : {2, 3}) {
    CurvatureOperator om = rand_operator(rng, n);
    Mat direct = sharp_square(om).H;
    CHECK(inf_norm(direct - 0.5 * sharp(om, om).H) < 1e-11 * std::max(1.0, inf_norm(direct)));
    EigenSystem sys = eigen_system(om);
    Mat oracle = Mat::Zero(n * n, n * n);
    for (int i = 0; i < n * n; ++i)
      for (int j = i + 1; j < n * n; ++j) {
        Endo w = sys.endos[i] * sys.endos[j] - sys.endos[j] * sys.endos[i];
        Vec c = vec_endo(w);
        oracle += sys.eigenvalues(i) * sys.eigenvalues(j) * (c * c.adjoint());
      }
    CHECK(inf_norm(direct - oracle) < 1e-10 * std::max(1.0, inf_norm(oracle)));
  }
}

TEST_CASE("ad action: central element, Leibniz identity, generator consistency") {
  Rng rng(19);
  const int n = 3;
  CurvatureOperator om = rand_operator(rng, n);
  CHECK(inf_norm(ad_action(Mat::Identity(n, n), om).H) < 1e-12);
  CHECK(inf_norm(ad_action(rng.complex_gaussian(n, n), CurvatureOperator(n)).H) == 0.0);

  Endo v = rng.complex_gaussian(n, n), u = rng.complex_gaussian(n, n);
  Endo comm = v * u - u * v;
  cplx lhs = evaluate_bilinear(ad_action(v, om), u, u) + evaluate_bilinear(om, comm, u) +
             evaluate_bilinear(om, u, comm);
  CHECK(std::abs(lhs) < 1e-11 * std::max(1.0, inf_norm(om.H)));

  // <Ad_{exp(tau v)} Omega, Ad-conjugated u> is constant in tau; its derivative
  // matches the ad_action generator by finite differences
  const double h = 1e-5;
  auto pair_at = [&](double tau) {
    Mat p = (tau * v).exp();
    CurvatureOperator conj_om = ad_conjugate(p, om);
    Endo cu = p * u * p.inverse();
    return evaluate(conj_om, cu, 1e-6);
  };
  CHECK(std::abs(pair_at(h) - pair_at(-h)) / (2 * h) < 1e-6);
  auto pair_fixed_u = [&](double tau) {
    Mat p = (tau * v).exp();
    return evaluate(ad_conjugate(p, om), u, 1e-6);
  };
  const double fd = (pair_fixed_u(h) - pair_fixed_u(-h)) / (2 * h);
  CHECK(fd == doctest::Approx(evaluate(ad_action(v, om), u)).epsilon(1e-5));
}

TEST_CASE("gram operators") {
  CHECK(inf_norm(gram({}, 2).H) == 0.0);
  CurvatureOperator g1 = gram({basis_endo(2, 0, 1)});
  CHECK(evaluate(g1, basis_endo(2, 1, 0)) == doctest::Approx(1.0));

  Rng rng(20);
  const int n = 3;
  std::vector<Endo> a;
  for (int i = 0; i < 4; ++i) a.push_back(rng.complex_gaussian(n, n));
  CurvatureOperator om = gram(a);
  Endo u = rng.complex_gaussian(n, n);
  double oracle = 0.0;
  for (const Endo& ai : a) oracle += std::norm(trace_pairing(ai, u));
  CHECK(evaluate(om, u) == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("Hermiticity closure and PSD invariants") {
  Rng rng(21);
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 2 + rep % 3;
    CurvatureOperator om = rand_operator(rng, n);
    CHECK(hermiticity_defect(square_coord(om).H) < 1e-12);
    CHECK(hermiticity_defect(sharp_square(om).H) < 1e-12);
    CHECK(hermiticity_defect(ad_action(rng.complex_gaussian(n, n), om).H) < 1e-12);
  }
  // PSD of Omega^2 over 200 random operators with n <= 4
  for (int rep = 0; rep < 200; ++rep) {
    const int n = 1 + rep % 4;
    CurvatureOperator om = rand_operator(rng, n);
    Mat sq = square_coord(om).H;
    Eigen::SelfAdjointEigenSolver<Mat> es(sq, Eigen::EigenvaluesOnly);
    const double scale = om.H.norm();
    CHECK(es.eigenvalues().minCoeff() >= -1e-10 * scale * scale);
  }
  // kernel characterization via a zero eigenvalue
  CurvatureOperator om = rand_operator(rng, 3);
  EigenSystem sys = eigen_system(om);
  // shift so that the smallest eigenvalue is exactly zero
  om.H -= sys.eigenvalues(0) * Mat::Identity(9, 9);
  sys = eigen_system(om);
  Endo u = sys.endos[0].adjoint();
  const double scale = om.H.norm();
  CHECK(evaluate(square_coord(om), u) <= 1e-10 * scale * scale);
}

TEST_CASE("hermiticity enforcement thresholds") {
  Rng rng(22);
  Mat h = rand_hermitian(rng, 4);
  Mat bumped = h;
  bumped(0, 1) += cplx(0, 5e-11);  // within the symmetrization band
  Mat fixed = enforce_hermitian(bumped);
  CHECK(hermiticity_defect(fixed) < 1e-15);
  Mat broken = h;
  broken(0, 1) += 1e-3;
  CHECK_THROWS_AS(enforce_hermitian(broken), NumericalError);
}

TEST_CASE("JSON fixtures round trip") {
  Rng rng(23);
  CurvatureOperator om = rand_operator(rng, 2);
  om.metric = rand_metric(rng, 2);
  CurvatureOperator back = operator_from_json(to_json(om));
  CHECK(inf_norm(back.H - om.H) == 0.0);
  CHECK(inf_norm(back.metric.g - om.metric.g) < 1e-15);
  IndexedCurvature t4 = to_indexed(om, om.metric);
  IndexedCurvature t4b = indexed_from_json(to_json(t4));
  for (size_t i = 0; i < t4.t4.size(); ++i) CHECK(t4.t4[i] == t4b.t4[i]);
}
