// Invariant-set families C(S,F): nice functions, numerical membership
// certification (margins), the monotone quantity mu, and boundary sampling.
//
// Margins for scale-invariant families are taken on the unit Frobenius slice
// ||u||_F = 1 in the unitary frame of the operator's metric; IdentityOnly is
// the raw value <Omega, Id (x) conj Id> - F(Id).
#pragma once

#include <limits>
#include <optional>

#include "hcf/algebra.hpp"
#include "hcf/rng.hpp"

namespace hcf {

enum class SKind {
  full_algebra,
  rank_one,
  rank_one_traceless,
  rank_m,
  identity_only,
  scalings_of_identity,
  zero_only,  // boundary at infinity of IdentityOnly
};

struct SFamily {
  SKind kind = SKind::full_algebra;
  int m = 1;  // rank bound, rank_m only

  static SFamily full_algebra() { return {SKind::full_algebra, 0}; }
  static SFamily rank_one() { return {SKind::rank_one, 1}; }
  static SFamily rank_one_traceless() { return {SKind::rank_one_traceless, 1}; }
  static SFamily rank_m(int m) { return {SKind::rank_m, m}; }
  static SFamily identity_only() { return {SKind::identity_only, 0}; }
  static SFamily scalings_of_identity() { return {SKind::scalings_of_identity, 0}; }
  bool scale_invariant() const {
    return kind != SKind::identity_only;
  }
};

struct NiceFunction {
  enum class Kind { zero, trace_square, spectral_abs_sum };
  Kind kind = Kind::zero;
  double a = 0.0, b = 0.0;  // trace_square: F(s) = a |tr s|^2 + b

  static NiceFunction zero() { return {}; }
  static NiceFunction trace_square(double a, double b) {
    return {Kind::trace_square, a, b};
  }
  static NiceFunction spectral_abs_sum() { return {Kind::spectral_abs_sum, 0, 0}; }

  double operator()(const Endo& s) const;
  double f_infty(const Endo& s) const;  // limit F(s_i) lambda_i^2 along lambda_i s_i -> s
};

struct ConeSpec {
  SFamily s;
  NiceFunction f;
};

// {"s": "rank_one", "m": 2, "f": {"kind": "trace_square", "a": 0.0, "b": 0.0}}
ConeSpec cone_from_json(const std::string& text);
std::string cone_to_json(const ConeSpec& cone);
std::string skind_name(SKind k);

struct MembershipReport {
  double margin = 0.0;
  Endo minimizer;       // in the operator's original coordinates
  bool certified = false;  // exact spectral result vs heuristic minimization
  int restarts_used = 0;
};

struct MarginOptions {
  int restarts = 32;
  int max_iters = 200;
  double tol = 1e-10;     // value-stagnation tolerance
  uint64_t seed = 0x5eed;
  std::optional<Endo> warm_start;  // frame-coordinates hint (grid monitors)
};

MembershipReport margin(const CurvatureOperator& om, const ConeSpec& cone,
                        const MarginOptions& opts = {});

// inf over s in S (tr s != 0) of <Omega, s (x) conj s> / |tr s|^2;
// +-infinity encoded in the return value
double mu_value(const CurvatureOperator& om, const SFamily& s,
                const MarginOptions& opts = {});

struct BoundaryPair {
  CurvatureOperator om;
  Endo u;        // contact element, original coordinates
  double f_u;    // F(u) at the contact
  MembershipReport report;
};

// random PSD operator shifted onto the cone boundary (|margin| <= tol*scale)
BoundaryPair boundary_sample(const ConeSpec& cone, Rng& rng, double scale,
                             int n, double contact_tol = 1e-8,
                             const MarginOptions& opts = {});

SFamily boundary_at_infinity(const SFamily& s);

}  // namespace hcf
