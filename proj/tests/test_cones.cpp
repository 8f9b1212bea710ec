#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/SVD>
#include <unsupported/Eigen/MatrixFunctions>

#include "hcf/cones.hpp"
#include "test_util.hpp"

using namespace hcf;
using namespace hcf::testutil;

namespace {

// independent global oracle for the Griffiths margin at n = 2: dense grid over
// CP^1 in xi (phases drop out of the biquadratic), exact 2x2 eigenvalue in eta,
// then local refinement rounds
double griffiths_grid_oracle(const Mat& H, double a_penalty = 0.0) {
  auto lam_min_at = [&](double a, double b) {
    Vec xi(2);
    xi << std::cos(a), std::sin(a) * std::exp(cplx(0, b));
    Mat M = Mat::Zero(2, 2);
    for (int k = 0; k < 2; ++k)
      for (int l = 0; l < 2; ++l) {
        cplx s(0, 0);
        for (int i = 0; i < 2; ++i)
          for (int j = 0; j < 2; ++j) s += H(k * 2 + i, l * 2 + j) * xi(i) * std::conj(xi(j));
        M(k, l) = s;
      }
    if (a_penalty != 0.0) M -= a_penalty * (xi * xi.adjoint());
    const double tr = 0.5 * (M(0, 0).real() + M(1, 1).real());
    const double det = (M(0, 0) * M(1, 1) - M(0, 1) * M(1, 0)).real();
    return tr - std::sqrt(std::max(0.0, tr * tr - det));
  };
  double best = std::numeric_limits<double>::infinity();
  double ca = 0, cb = 0, ra = kPi / 2, rb = kPi;
  const int N = 48;
  for (int round = 0; round < 4; ++round) {
    double ba = ca, bb = cb;
    for (int ia = 0; ia <= N; ++ia)
      for (int ib = 0; ib <= N; ++ib) {
        const double a = ca + ra * (2.0 * ia / N - 1.0);
        const double b = cb + rb * (2.0 * ib / N - 1.0);
        const double v = lam_min_at(a, b);
        if (v < best) {
          best = v;
          ba = a;
          bb = b;
        }
      }
    ca = ba;
    cb = bb;
    ra /= N / 4.0;
    rb /= N / 4.0;
  }
  return best;
}

int numeric_rank(const Mat& m, double tol = 1e-8) {
  Eigen::JacobiSVD<Mat> svd(m);
  if (svd.singularValues().size() == 0 || svd.singularValues()(0) < 1e-10) return 0;
  int r = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > tol * svd.singularValues()(0)) ++r;
  return r;
}

}  // namespace

TEST_CASE("exact margins: full algebra and identity") {
  const int n = 2;
  // gram over the full basis gives the identity H-matrix
  std::vector<Endo> all;
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i) all.push_back(basis_endo(n, k, i));
  CurvatureOperator om = gram(all);
  CHECK(inf_norm(om.H - Mat::Identity(4, 4)) < 1e-14);
  MembershipReport rep = margin(om, {SFamily::full_algebra(), NiceFunction::zero()});
  CHECK(rep.margin == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.certified);
  CHECK(evaluate(om, rep.minimizer) == doctest::Approx(rep.margin).epsilon(1e-10));

  CurvatureOperator idp = CurvatureOperator::identity_pair(n);
  MembershipReport rid = margin(idp, {SFamily::identity_only(), NiceFunction::zero()});
  CHECK(rid.margin == doctest::Approx(n * n).epsilon(1e-12));

  // scalings of the identity report on the unit slice
  MembershipReport rsc = margin(idp, {SFamily::scalings_of_identity(), NiceFunction::zero()});
  CHECK(rsc.margin == doctest::Approx(n * n / double(n)).epsilon(1e-12));
}

TEST_CASE("rank-one margin matches the dense grid oracle") {
  Rng rng(31);
  for (int rep = 0; rep < 6; ++rep) {
    CurvatureOperator om = rep % 2 == 0 ? rand_psd(rng, 2) : rand_operator(rng, 2);
    MarginOptions mo;
    mo.seed = 100 + rep;
    MembershipReport r = margin(om, {SFamily::rank_one(), NiceFunction::zero()}, mo);
    const double oracle = griffiths_grid_oracle(om.H);
    const double scale = std::max(1.0, inf_norm(om.H));
    CHECK(std::abs(r.margin - oracle) < 1e-4 * scale);
    CHECK(evaluate(om, r.minimizer) == doctest::Approx(r.margin).epsilon(5e-7));
    CHECK(numeric_rank(r.minimizer) == 1);
    CHECK(std::abs(r.minimizer.norm() - 1.0) < 1e-9);
  }
  // trace_square penalty variant against the penalized grid oracle
  CurvatureOperator om = rand_operator(rng, 2);
  MembershipReport r = margin(om, {SFamily::rank_one(), NiceFunction::trace_square(0.3, 0.1)});
  CHECK(std::abs(r.margin - (griffiths_grid_oracle(om.H, 0.3) - 0.1)) <
        1e-4 * std::max(1.0, inf_norm(om.H)));
}

TEST_CASE("rank-one traceless: constraint and relaxation ordering") {
  Rng rng(32);
  for (int rep = 0; rep < 4; ++rep) {
    CurvatureOperator om = rand_operator(rng, 3);
    MarginOptions mo;
    mo.seed = 55 + rep;
    MembershipReport r1 = margin(om, {SFamily::rank_one(), NiceFunction::zero()}, mo);
    MembershipReport rt = margin(om, {SFamily::rank_one_traceless(), NiceFunction::zero()}, mo);
    CHECK(std::abs(rt.minimizer.trace()) < 1e-8);  // constraint holds
    CHECK(rt.margin >= r1.margin - 1e-8);          // smaller family, larger inf
    CHECK(evaluate(om, rt.minimizer) == doctest::Approx(rt.margin).epsilon(1e-6));
  }
}

TEST_CASE("rank-m margins: nesting and consistency at the extremes") {
  Rng rng(33);
  const int n = 3;
  for (int rep = 0; rep < 4; ++rep) {
    CurvatureOperator om = rand_operator(rng, n);
    MarginOptions mo;
    mo.seed = 200 + rep;
    const double full = margin(om, {SFamily::full_algebra(), NiceFunction::zero()}, mo).margin;
    const double m2 = margin(om, {SFamily::rank_m(2), NiceFunction::zero()}, mo).margin;
    const double r1 = margin(om, {SFamily::rank_one(), NiceFunction::zero()}, mo).margin;
    CHECK(full <= m2 + 1e-8);
    CHECK(m2 <= r1 + 1e-8);
    // rank_m(n) falls back to the exact full-algebra margin
    const double mn = margin(om, {SFamily::rank_m(n), NiceFunction::zero()}, mo).margin;
    CHECK(mn == doctest::Approx(full).epsilon(1e-12));
    // rank_m(1) agrees with the rank-one path
    const double m1 = margin(om, {SFamily::rank_m(1), NiceFunction::zero()}, mo).margin;
    CHECK(m1 == doctest::Approx(r1).epsilon(1e-6));
  }
  // rank_m(2) minimizer has rank <= 2
  CurvatureOperator om = rand_operator(rng, 3);
  MembershipReport r = margin(om, {SFamily::rank_m(2), NiceFunction::zero()});
  CHECK(numeric_rank(r.minimizer, 1e-6) <= 2);
}

TEST_CASE("margins under conjugation: unitary values, GL membership signs") {
  Rng rng(34);
  const int n = 2;
  CurvatureOperator om = rand_operator(rng, n);
  Mat a = rand_hermitian(rng, n);
  Mat u = (cplx(0, 1) * a).exp();
  CurvatureOperator conj_u = ad_conjugate(u, om);
  for (SFamily fam : {SFamily::full_algebra(), SFamily::identity_only()}) {
    const double m0 = margin(om, {fam, NiceFunction::zero()}).margin;
    const double m1 = margin(conj_u, {fam, NiceFunction::zero()}).margin;
    CHECK(m1 == doctest::Approx(m0).epsilon(1e-6));
  }
  MarginOptions mo;
  mo.seed = 77;
  const double g0 = margin(om, {SFamily::rank_one(), NiceFunction::zero()}, mo).margin;
  const double g1 = margin(conj_u, {SFamily::rank_one(), NiceFunction::zero()}, mo).margin;
  CHECK(g1 == doctest::Approx(g0).epsilon(1e-6));

  // general invertible conjugation preserves membership (inertia), and the
  // identity pairing exactly
  Mat p = rng.complex_gaussian(n, n) + 3.0 * Mat::Identity(n, n);
  CurvatureOperator conj_p = ad_conjugate(p, om);
  const double f0 = margin(om, {SFamily::full_algebra(), NiceFunction::zero()}).margin;
  const double f1 = margin(conj_p, {SFamily::full_algebra(), NiceFunction::zero()}).margin;
  CHECK((f0 >= 0) == (f1 >= 0));
  const double i0 = margin(om, {SFamily::identity_only(), NiceFunction::zero()}).margin;
  const double i1 = margin(conj_p, {SFamily::identity_only(), NiceFunction::zero()}).margin;
  CHECK(i1 == doctest::Approx(i0).epsilon(1e-9));
}

TEST_CASE("midpoint convexity of the certified sets") {
  Rng rng(35);
  const int n = 2;
  ConeSpec cone{SFamily::rank_one(), NiceFunction::zero()};
  int done = 0;
  while (done < 4) {
    CurvatureOperator a = rand_psd(rng, n), b = rand_psd(rng, n);
    MarginOptions mo;
    mo.seed = 300 + done;
    if (margin(a, cone, mo).margin < 0 || margin(b, cone, mo).margin < 0) continue;
    CurvatureOperator mid(Mat(0.5 * (a.H + b.H)), a.metric);
    CHECK(margin(mid, cone, mo).margin >= -1e-8);
    ++done;
  }
}

TEST_CASE("nice functions: Ad invariance and the quadratic-scaling limit") {
  Rng rng(36);
  const int n = 3;
  NiceFunction fs[] = {NiceFunction::zero(), NiceFunction::trace_square(0.7, -0.2),
                       NiceFunction::spectral_abs_sum()};
  Endo s = rng.complex_gaussian(n, n);
  Mat p = rng.complex_gaussian(n, n) + 3.0 * Mat::Identity(n, n);
  Endo s_conj = p * s * p.inverse();
  for (const auto& f : fs) CHECK(f(s) == doctest::Approx(f(s_conj)).epsilon(1e-8));

  // F(s_i) lambda_i^2 -> F_infty(s) along lambda_i s_i -> s
  NiceFunction tsq = NiceFunction::trace_square(0.7, -0.2);
  double prev_err = std::numeric_limits<double>::infinity();
  for (int i = 1; i <= 4; ++i) {
    const double lam = std::pow(10.0, -i);
    Endo si = s / lam;
    const double err = std::abs(tsq(si) * lam * lam - tsq.f_infty(s));
    CHECK(err < prev_err + 1e-15);
    prev_err = err;
  }
  CHECK(tsq.f_infty(s) == doctest::Approx(0.7 * std::norm(s.trace())));
  CHECK(NiceFunction::spectral_abs_sum().f_infty(s) == 0.0);
}

TEST_CASE("mu values") {
  const int n = 2;
  CurvatureOperator idp = CurvatureOperator::identity_pair(n);
  CHECK(mu_value(idp, SFamily::identity_only()) == doctest::Approx(1.0));
  CHECK(mu_value(CurvatureOperator(n), SFamily::identity_only()) == doctest::Approx(0.0));
  CHECK(mu_value(CurvatureOperator(n), SFamily::full_algebra()) ==
        doctest::Approx(0.0).epsilon(1e-8));
  CHECK(std::isinf(mu_value(idp, SFamily::rank_one_traceless())));
  CHECK(mu_value(idp, SFamily::rank_one_traceless()) > 0);

  MarginOptions mo;
  mo.seed = 404;
  CHECK(std::abs(mu_value(CurvatureOperator(n), SFamily::rank_one(), mo)) < 1e-7);

  // random PSD operator against a sampling oracle on the ratio
  Rng rng(37);
  CurvatureOperator om = rand_psd(rng, n);
  om.H /= om.H.norm();
  const double mu = mu_value(om, SFamily::rank_one(), mo);
  double oracle = std::numeric_limits<double>::infinity();
  Rng gr(38);
  for (int it = 0; it < 200000; ++it) {
    Vec xi = gr.complex_gaussian_vec(n), eta = gr.complex_gaussian_vec(n);
    xi.normalize();
    eta.normalize();
    Endo u = xi * eta.adjoint();
    const double tr2 = std::norm(u.trace());
    if (tr2 < 1e-4) continue;
    oracle = std::min(oracle, evaluate(om, u) / tr2);
  }
  CHECK(mu == doctest::Approx(oracle).epsilon(2e-3));

  // an operator negative on a traceless rank-one direction has mu = -infinity
  CurvatureOperator neg(n);
  neg.H = -CurvatureOperator::rank_one(basis_endo(n, 0, 1)).H;
  const double mneg = mu_value(neg, SFamily::rank_one(), mo);
  CHECK(std::isinf(mneg));
  CHECK(mneg < 0);
}

TEST_CASE("boundary samples land on the boundary with a contact element") {
  Rng rng(39);
  const int n = 2;
  SUBCASE("full algebra") {
    BoundaryPair bp =
        boundary_sample({SFamily::full_algebra(), NiceFunction::zero()}, rng, 1.0, n);
    Eigen::SelfAdjointEigenSolver<Mat> es(bp.om.H, Eigen::EigenvaluesOnly);
    CHECK(std::abs(es.eigenvalues().minCoeff()) < 1e-8);
    CHECK(std::abs(evaluate(bp.om, bp.u)) < 1e-8);
  }
  SUBCASE("identity only, affine shift") {
    ConeSpec cone{SFamily::identity_only(), NiceFunction::trace_square(0.0, 0.37)};
    BoundaryPair bp = boundary_sample(cone, rng, 1.0, n);
    CHECK(evaluate(bp.om, Mat::Identity(n, n)) == doctest::Approx(0.37).epsilon(1e-8));
  }
  SUBCASE("rank one, grid oracle certifies the boundary") {
    BoundaryPair bp =
        boundary_sample({SFamily::rank_one(), NiceFunction::zero()}, rng, 1.0, n, 1e-8);
    CHECK(std::abs(griffiths_grid_oracle(bp.om.H)) < 1e-6);
    CHECK(std::abs(evaluate(bp.om, bp.u)) < 1e-6);
  }
  SUBCASE("rank one traceless") {
    BoundaryPair bp =
        boundary_sample({SFamily::rank_one_traceless(), NiceFunction::zero()}, rng, 1.0, n);
    CHECK(std::abs(evaluate(bp.om, bp.u)) < 1e-6);
    CHECK(std::abs(bp.u.trace()) < 1e-8);
  }
}

TEST_CASE("boundary at infinity") {
  CHECK(boundary_at_infinity(SFamily::identity_only()).kind == SKind::zero_only);
  CHECK(boundary_at_infinity(SFamily::rank_one()).kind == SKind::rank_one);
  CHECK(boundary_at_infinity(SFamily::rank_m(2)).kind == SKind::rank_m);

  // sampling oracle: limits of lambda_i s_i with s_i of rank exactly m realize
  // every rank 0..m
  Rng rng(41);
  const int n = 3, m = 2;
  std::vector<int> seen_ranks;
  for (int target = 0; target <= m; ++target) {
    Mat x = rng.complex_gaussian(n, m), y = rng.complex_gaussian(n, m);
    // closed-form limit of lambda_i s_i: keep the 1/lambda block, drop the rest
    Mat dlim = Mat::Zero(m, m);
    for (int c = 0; c < target; ++c) dlim(c, c) = 1.0;
    Mat limit = x * dlim * y.adjoint();
    double prev = std::numeric_limits<double>::infinity();
    for (int i = 2; i <= 6; i += 2) {
      const double lam = std::pow(10.0, -i);
      Mat d = Mat::Zero(m, m);
      for (int c = 0; c < m; ++c) d(c, c) = c < target ? 1.0 / lam : 1.0;
      Mat s_i = x * d * y.adjoint();
      CHECK(numeric_rank(s_i, 1e-8) == m);  // members have rank exactly m
      const double err = inf_norm(lam * s_i - limit);
      CHECK(err < prev + 1e-14);  // decreasing, up to the machine floor
      prev = err;
    }
    seen_ranks.push_back(numeric_rank(limit, 1e-6));
  }
  CHECK(seen_ranks == std::vector<int>{0, 1, 2});
}

TEST_CASE("cone spec JSON") {
  ConeSpec c =
      cone_from_json(R"({"s": "rank_one", "f": {"kind": "trace_square", "a": 0.0, "b": 0.0}})");
  CHECK(c.s.kind == SKind::rank_one);
  CHECK(c.f.kind == NiceFunction::Kind::trace_square);
  ConeSpec c2 = cone_from_json(R"({"s": "rank_m", "m": 2})");
  CHECK(c2.s.m == 2);
  CHECK(c2.f.kind == NiceFunction::Kind::zero);
  CHECK_THROWS_AS(cone_from_json(R"({"s": "nope"})"), DimensionError);
  ConeSpec c3 = cone_from_json(cone_to_json(c2));
  CHECK(c3.s.kind == SKind::rank_m);

  // unsupported combination is rejected
  Rng rng(42);
  CurvatureOperator om = rand_operator(rng, 2);
  CHECK_THROWS_AS(margin(om, {SFamily::rank_one(), NiceFunction::spectral_abs_sum()}),
                  DimensionError);
}

TEST_CASE("margins are deterministic for a fixed seed") {
  Rng rng(43);
  CurvatureOperator om = rand_operator(rng, 2);
  MarginOptions mo;
  mo.seed = 777;
  MembershipReport a = margin(om, {SFamily::rank_one(), NiceFunction::zero()}, mo);
  MembershipReport b = margin(om, {SFamily::rank_one(), NiceFunction::zero()}, mo);
  CHECK(a.margin == b.margin);
  CHECK(inf_norm(a.minimizer - b.minimizer) == 0.0);
}
