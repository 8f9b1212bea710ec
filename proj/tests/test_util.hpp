// shared helpers for the unit tests
#pragma once

#include "hcf/algebra.hpp"
#include "hcf/rng.hpp"

namespace hcf::testutil {

inline Mat rand_hermitian(Rng& rng, int dim) {
  Mat a = rng.complex_gaussian(dim, dim);
  return 0.5 * (a + a.adjoint().eval());
}

inline CurvatureOperator rand_operator(Rng& rng, int n) {
  return CurvatureOperator(rand_hermitian(rng, n * n), HermitianMetric::identity(n));
}

inline HermitianMetric rand_metric(Rng& rng, int n) {
  Mat a = rng.complex_gaussian(n, n);
  return HermitianMetric(Mat(a * a.adjoint() + n * Mat::Identity(n, n)));
}

inline CurvatureOperator rand_psd(Rng& rng, int n, int gens = -1) {
  std::vector<Endo> a;
  const int count = gens > 0 ? gens : n * n;
  for (int i = 0; i < count; ++i) a.push_back(rng.complex_gaussian(n, n));
  return gram(a);
}

inline Endo basis_endo(int n, int k, int i) {
  Endo e = Mat::Zero(n, n);
  e(k, i) = 1.0;
  return e;
}

}  // namespace hcf::testutil
