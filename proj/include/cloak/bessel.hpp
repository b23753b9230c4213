#pragma once

// Complex-argument cylindrical and spherical Bessel/Hankel functions with
// overflow-safe scaled forms. Evaluation strategy: double-double ascending
// series for |z| <= 20, Hankel asymptotic expansions for the base orders
// beyond, stable upward recurrence for H, and continued fractions plus the
// Wronskian for J at large argument.

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>

#include "cloak/errors.hpp"
#include "cloak/scaled.hpp"

namespace cloak::specfun {

using cd = std::complex<double>;

enum class Family { cylindrical, spherical };
enum class Scaling { plain, exponential_scaled };

struct BesselQuery {
  Family family = Family::cylindrical;
  int order = 0;
  cd z{0.0, 0.0};
  Scaling scaling = Scaling::plain;
};

struct BesselQuad {
  cd value{0.0, 0.0};
  cd derivative{0.0, 0.0};
};

// Value/derivative pair in exponent-carrying form (true, unscaled values).
struct ScaledPair {
  ScaledC v;
  ScaledC d;
};

namespace detail {

// ---------------------------------------------------------------------------
// Double-double arithmetic, just enough for cancellation-prone series.

struct dd {
  double hi = 0.0, lo = 0.0;
};

inline dd two_sum(double a, double b) {
  double s = a + b;
  double bb = s - a;
  return {s, (a - (s - bb)) + (b - bb)};
}

inline dd quick_two_sum(double a, double b) {
  double s = a + b;
  return {s, b - (s - a)};
}

inline dd two_prod(double a, double b) {
  double p = a * b;
  return {p, std::fma(a, b, -p)};
}

inline dd dd_add(dd a, dd b) {
  dd s = two_sum(a.hi, b.hi);
  s.lo += a.lo + b.lo;
  return quick_two_sum(s.hi, s.lo);
}

inline dd dd_sub(dd a, dd b) { return dd_add(a, {-b.hi, -b.lo}); }

inline dd dd_mul(dd a, dd b) {
  dd p = two_prod(a.hi, b.hi);
  p.lo += a.hi * b.lo + a.lo * b.hi;
  return quick_two_sum(p.hi, p.lo);
}

inline dd dd_mul_d(dd a, double b) {
  dd p = two_prod(a.hi, b);
  p.lo += a.lo * b;
  return quick_two_sum(p.hi, p.lo);
}

inline dd dd_div_d(dd a, double b) {
  double q1 = a.hi / b;
  dd p = two_prod(q1, b);
  dd r = dd_sub(a, p);
  double q2 = (r.hi + r.lo) / b;
  return quick_two_sum(q1, q2);
}

struct cdd {
  dd re, im;
};

inline cdd cdd_from(cd z) { return {{z.real(), 0.0}, {z.imag(), 0.0}}; }

inline cdd cdd_add(cdd a, cdd b) {
  return {dd_add(a.re, b.re), dd_add(a.im, b.im)};
}

inline cdd cdd_mul(cdd a, cdd b) {
  return {dd_sub(dd_mul(a.re, b.re), dd_mul(a.im, b.im)),
          dd_add(dd_mul(a.re, b.im), dd_mul(a.im, b.re))};
}

inline cdd cdd_mul_d(cdd a, double b) {
  return {dd_mul_d(a.re, b), dd_mul_d(a.im, b)};
}

inline cdd cdd_div_d(cdd a, double b) {
  return {dd_div_d(a.re, b), dd_div_d(a.im, b)};
}

inline cd cdd_to(cdd a) { return {a.re.hi + a.re.lo, a.im.hi + a.im.lo}; }

inline double cdd_abs(cdd a) { return std::hypot(a.re.hi, a.im.hi); }

// ---------------------------------------------------------------------------
// Series evaluations (|z| <= kSeriesLimit).

constexpr double kSeriesLimit = 20.0;
constexpr int kMaxSeriesTerms = 400;

// Normalized cylindrical series: J_n(z) = (z/2)^n / n! * S(n, z),
// S = sum_k t_k, t_0 = 1, t_{k+1} = t_k * (-z^2/4) / ((k+1)(n+k+1)).
inline cdd cyl_j_series_core(int n, cd z) {
  cdd w = cdd_from(-z * z);
  w = cdd_div_d(w, 4.0);
  cdd t = cdd_from({1.0, 0.0});
  cdd s = t;
  for (int k = 0; k < kMaxSeriesTerms; ++k) {
    t = cdd_mul(t, w);
    t = cdd_div_d(t, double(k + 1) * double(n + k + 1));
    s = cdd_add(s, t);
    if (cdd_abs(t) < 1e-36 * (cdd_abs(s) + 1e-300)) break;
  }
  return s;
}

inline ScaledC cyl_j_series(int n, cd z) {
  cdd s = cyl_j_series_core(n, z);
  cd l = double(n) * std::log(z / 2.0);
  double le = l.real() - std::lgamma(double(n) + 1.0);
  cd m = cdd_to(s) * std::exp(cd(0.0, l.imag()));
  return ScaledC{m, le}.normalize();
}

// Spherical: j_n(z) = z^n / (2n+1)!! * S, t_{k+1} = t_k*(-z^2/2)/((k+1)(2n+2k+3)).
inline ScaledC sph_j_series(int n, cd z) {
  cdd w = cdd_from(-z * z);
  w = cdd_div_d(w, 2.0);
  cdd t = cdd_from({1.0, 0.0});
  cdd s = t;
  for (int k = 0; k < kMaxSeriesTerms; ++k) {
    t = cdd_mul(t, w);
    t = cdd_div_d(t, double(k + 1) * double(2 * n + 2 * k + 3));
    s = cdd_add(s, t);
    if (cdd_abs(t) < 1e-36 * (cdd_abs(s) + 1e-300)) break;
  }
  // (2n+1)!! = (2n+1)! / (2^n n!)
  double ldf = std::lgamma(2.0 * n + 2.0) - double(n) * std::log(2.0) -
               std::lgamma(double(n) + 1.0);
  cd l = double(n) * std::log(z);
  cd m = cdd_to(s) * std::exp(cd(0.0, l.imag()));
  return ScaledC{m, l.real() - ldf}.normalize();
}

// Y_0 and Y_1 power series (double-double accumulation).
constexpr double kEulerGamma = 0.57721566490153286060651209008240;

inline void cyl_y01_series(cd z, ScaledC& y0, ScaledC& y1) {
  cd lg = std::log(z / 2.0) + kEulerGamma;
  cdd j0 = cyl_j_series_core(0, z);  // J_0
  cdd j1c = cyl_j_series_core(1, z);
  cdd j1 = cdd_mul(j1c, cdd_from(z / 2.0));  // J_1 = (z/2) * S(1,z)

  // sum_{k>=1} H_k * u_k, u_k = (-z^2/4)^k / (k!)^2
  cdd w = cdd_div_d(cdd_from(-z * z), 4.0);
  cdd u = cdd_from({1.0, 0.0});
  dd hk{0.0, 0.0};
  cdd s0 = cdd_from({0.0, 0.0});
  for (int k = 1; k < kMaxSeriesTerms; ++k) {
    u = cdd_mul(u, w);
    u = cdd_div_d(u, double(k) * double(k));
    hk = dd_add(hk, dd_div_d({1.0, 0.0}, double(k)));
    cdd term = {dd_mul(u.re, hk), dd_mul(u.im, hk)};
    s0 = cdd_add(s0, term);
    if (cdd_abs(term) < 1e-36 * (cdd_abs(s0) + 1e-300)) break;
  }
  cd y0v = (2.0 / M_PI) * (lg * cdd_to(j0) - cdd_to(s0));

  // sum_k (-1)^k (H_k + H_{k+1}) (z/2)^{2k+1} / (k!(k+1)!)
  cdd v = cdd_from(z / 2.0);
  dd hk1{1.0, 0.0};  // H_{k+1} at k = 0
  hk = {0.0, 0.0};
  cdd s1 = {dd_mul(v.re, dd_add(hk, hk1)), dd_mul(v.im, dd_add(hk, hk1))};
  for (int k = 1; k < kMaxSeriesTerms; ++k) {
    v = cdd_mul(v, w);
    v = cdd_div_d(v, double(k) * double(k + 1));
    hk = dd_add(hk, dd_div_d({1.0, 0.0}, double(k)));
    hk1 = dd_add(hk1, dd_div_d({1.0, 0.0}, double(k + 1)));
    dd h = dd_add(hk, hk1);
    cdd term = {dd_mul(v.re, h), dd_mul(v.im, h)};
    s1 = cdd_add(s1, term);
    if (cdd_abs(term) < 1e-36 * (cdd_abs(s1) + 1e-300)) break;
  }
  cd y1v = (2.0 / M_PI) * lg * cdd_to(j1) - 2.0 / (M_PI * z) -
           cdd_to(s1) / M_PI;
  y0 = ScaledC{y0v}.normalize();
  y1 = ScaledC{y1v}.normalize();
}

// ---------------------------------------------------------------------------
// Hankel asymptotic expansions for base orders, |z| > ~17.

// H^{(1,2)}_n(z) ~ sqrt(2/(pi z)) e^{+-i chi} sum_k (+-i)^k a_k(n)/z^k,
// chi = z - n pi/2 - pi/4. Returned as ScaledC with the e^{+-Im z} exponent.
inline ScaledC cyl_h_asym(int n, cd z, int kind) {
  double sgn = (kind == 1) ? 1.0 : -1.0;
  cd iz = sgn * cd(0.0, 1.0) / z;
  double mu = 4.0 * double(n) * double(n);
  cd term{1.0, 0.0};
  cd sum = term;
  double prev = 1.0;
  for (int k = 1; k < 60; ++k) {
    double num = mu - double(2 * k - 1) * double(2 * k - 1);
    term *= iz * (num / (8.0 * double(k)));
    double a = std::abs(term);
    if (a > prev) break;  // asymptotic series turned
    sum += term;
    prev = a;
    if (a < 1e-18) break;
  }
  cd amp = std::sqrt(2.0 / (M_PI * z));
  double chi_re = z.real() - double(n) * M_PI / 2.0 - M_PI / 4.0;
  cd m = amp * std::exp(cd(0.0, sgn * chi_re)) * sum;
  return ScaledC{m, -sgn * z.imag()}.normalize();
}

// ---------------------------------------------------------------------------
// Upward recurrence ladders (stable for H-type solutions).

// C_{k+1} = (step(k)/z) C_k - C_{k-1}; cylindrical step(k) = 2k,
// spherical step(k) = 2k+1. Inputs/outputs carry a shared exponent.
inline ScaledPair ladder_up(int n, cd z, ScaledC c0, ScaledC c1,
                            bool spherical) {
  if (n == 0) return {c0, -c1};  // C'_0 = -C_1 in both families
  // march with common exponent
  double E = std::max(c0.e, c1.e);
  cd a = c0.is_zero() ? cd(0, 0) : c0.m * std::exp(c0.e - E);
  cd b = c1.is_zero() ? cd(0, 0) : c1.m * std::exp(c1.e - E);
  cd prev = a, cur = b;
  for (int k = 1; k < n; ++k) {
    double step = spherical ? double(2 * k + 1) : double(2 * k);
    cd next = (step / z) * cur - prev;
    prev = cur;
    cur = next;
    double mag = std::max(std::abs(cur), std::abs(prev));
    if (mag > 1e250) {
      double l = std::log(mag);
      cur *= std::exp(-l);
      prev *= std::exp(-l);
      E += l;
    }
  }
  ScaledC vn = ScaledC{cur, E}.normalize();
  ScaledC vnm1 = ScaledC{prev, E}.normalize();
  // C'_n = C_{n-1} - (q/z) C_n, q = n (cylindrical) or n+1 (spherical)
  double q = spherical ? double(n + 1) : double(n);
  ScaledC dn = vnm1 - vn * (q / z);
  return {vn, dn};
}

// ---------------------------------------------------------------------------
// Continued fraction CF1 (Lentz) for the minimal-solution ratio.

// Returns u = C_{n+1}/C_n for the J-type solution; cylindrical b_k = 2(n+k)/z,
// spherical b_k = (2(n+k)+1)/z.
inline cd cf1_ratio(int n, cd z, bool spherical) {
  const double tiny = 1e-290;
  auto bk = [&](int k) {
    return spherical ? cd(double(2 * (n + k) + 1), 0.0) / z
                     : cd(double(2 * (n + k)), 0.0) / z;
  };
  cd f = bk(1);
  if (std::abs(f) < tiny) f = tiny;
  cd C = f, D = 0.0;
  const std::int64_t cap = 2000000;
  for (std::int64_t k = 2; k <= cap; ++k) {
    cd b = bk(int(std::min<std::int64_t>(k, 1 << 30)));
    const cd a{-1.0, 0.0};
    D = b + a * D;
    if (std::abs(D) < tiny) D = tiny;
    C = b + a / C;
    if (std::abs(C) < tiny) C = tiny;
    D = 1.0 / D;
    cd delta = C * D;
    f *= delta;
    if (std::abs(delta - 1.0) < 5e-17) return 1.0 / f;
  }
  throw accuracy_loss_error("continued fraction CF1 failed to converge",
                            1e-8);
}

// log-derivative J'_n/J_n by continued fraction (minimal solution, always
// well-conditioned; converges fast even deep in the upper half-plane).
inline cd logderiv_j_cf(int n, cd z, bool spherical) {
  cd u = cf1_ratio(n, z, spherical);
  return double(n) / z - u;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Internal scaled evaluations (true values in exponent-carrying form).
// Require n >= 0 and Re z >= 0; the public API reduces general arguments.

namespace detail {

inline void check_finite(cd z) {
  if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
    throw invalid_input_error("non-finite Bessel argument");
}

inline ScaledPair cyl_h_scaled(int n, cd z) {
  if (z == cd(0.0, 0.0)) throw domain_error("Hankel function at z = 0");
  ScaledC h0, h1;
  if (std::abs(z) <= kSeriesLimit) {
    ScaledC y0, y1;
    cyl_y01_series(z, y0, y1);
    ScaledC j0 = cyl_j_series(0, z);
    ScaledC j1 = cyl_j_series(1, z);
    h0 = j0 + y0 * cd(0.0, 1.0);
    h1 = j1 + y1 * cd(0.0, 1.0);
  } else {
    h0 = cyl_h_asym(0, z, 1);
    h1 = cyl_h_asym(1, z, 1);
  }
  return ladder_up(n, z, h0, h1, false);
}

inline ScaledPair cyl_j_scaled(int n, cd z) {
  if (z == cd(0.0, 0.0)) {
    if (n == 0) return {ScaledC{1.0}, ScaledC{}};
    if (n == 1) return {ScaledC{}, ScaledC{0.5}};
    return {ScaledC{}, ScaledC{}};
  }
  if (std::abs(z) <= kSeriesLimit) {
    ScaledC jn = cyl_j_series(n, z);
    ScaledC jn1 = cyl_j_series(n + 1, z);
    ScaledC d = jn * (double(n) / z) - jn1;
    return {jn, d};
  }
  ScaledPair h = cyl_h_scaled(n, z);
  cd f = logderiv_j_cf(n, z, false);
  // Wronskian J H' - J' H = 2i/(pi z)
  ScaledC denom = h.d - h.v * f;
  ScaledC jn = ScaledC{2.0 * cd(0.0, 1.0) / (M_PI * z)} / denom;
  return {jn, jn * f};
}

inline ScaledPair sph_h_scaled(int n, cd z) {
  if (z == cd(0.0, 0.0)) throw domain_error("spherical Hankel at z = 0");
  ScaledC h0 = scaled_exp(cd(0.0, 1.0) * z) * (-cd(0.0, 1.0) / z);
  ScaledC h1 = scaled_exp(cd(0.0, 1.0) * z) * (-(z + cd(0.0, 1.0)) / (z * z));
  return ladder_up(n, z, h0, h1, true);
}

inline ScaledPair sph_j_scaled(int n, cd z) {
  if (z == cd(0.0, 0.0)) {
    if (n == 0) return {ScaledC{1.0}, ScaledC{}};
    if (n == 1) return {ScaledC{}, ScaledC{1.0 / 3.0}};
    return {ScaledC{}, ScaledC{}};
  }
  if (std::abs(z) <= kSeriesLimit) {
    ScaledC jn = sph_j_series(n, z);
    ScaledC jn1 = sph_j_series(n + 1, z);
    ScaledC d = jn * (double(n) / z) - jn1;
    return {jn, d};
  }
  ScaledPair h = sph_h_scaled(n, z);
  cd f = logderiv_j_cf(n, z, true);
  // Wronskian j h' - j' h = i/z^2
  ScaledC denom = h.d - h.v * f;
  ScaledC jn = ScaledC{cd(0.0, 1.0) / (z * z)} / denom;
  return {jn, jn * f};
}

// Reflection to the right half-plane. sign_flip receives the parity factor.
inline ScaledPair reflect_pair(const ScaledPair& p, double parity,
                               bool flip_derivative_sign) {
  double ds = flip_derivative_sign ? -1.0 : 1.0;
  return {p.v * cd(parity, 0.0), p.d * cd(parity * ds, 0.0)};
}

}  // namespace detail

namespace detail {
inline ScaledC conj_s(const ScaledC& a) { return {std::conj(a.m), a.e}; }
}  // namespace detail

// J-type pair, any n >= 0, any finite z.
inline ScaledPair bessel_j_scaled_pair(Family fam, int n, cd z) {
  detail::check_finite(z);
  if (n < 0) throw invalid_input_error("negative order in scaled evaluation");
  bool sph = (fam == Family::spherical);
  if (z.imag() < 0.0) {
    // J_n(conj z) = conj(J_n(z)); keeps the Wronskian extraction in the
    // upper half-plane where H^{(1)} dominates and no cancellation occurs
    ScaledPair p = bessel_j_scaled_pair(fam, n, std::conj(z));
    return {detail::conj_s(p.v), detail::conj_s(p.d)};
  }
  if (z.real() >= 0.0)
    return sph ? detail::sph_j_scaled(n, z) : detail::cyl_j_scaled(n, z);
  cd w = -z;
  ScaledPair p = bessel_j_scaled_pair(fam, n, w);
  double parity = (n % 2 == 0) ? 1.0 : -1.0;
  // C_n(-w) = parity * C_n(w), d/dz picks up an extra sign
  return {p.v * cd(parity, 0.0), p.d * cd(-parity, 0.0)};
}

inline ScaledPair hankel1_scaled_pair(Family fam, int n, cd z) {
  detail::check_finite(z);
  if (n < 0) throw invalid_input_error("negative order in scaled evaluation");
  bool sph = (fam == Family::spherical);
  if (z.real() >= 0.0)
    return sph ? detail::sph_h_scaled(n, z) : detail::cyl_h_scaled(n, z);
  double parity = (n % 2 == 0) ? 1.0 : -1.0;
  cd wb = std::conj(-z);  // right half-plane
  if (sph) {
    // h_n(z) = parity h2_n(-z), h2_n(w) = conj(h_n(conj w)); single-valued
    ScaledPair h = detail::sph_h_scaled(n, wb);
    return {detail::conj_s(h.v) * cd(parity, 0.0),
            detail::conj_s(h.d) * cd(-parity, 0.0)};
  }
  if (z.imag() >= 0.0) {
    // principal branch: H1_n(w e^{i pi}) = -parity H2_n(w) = -parity
    // conj(H1_n(conj w)); the conjugate route avoids the 2J - H cancellation
    ScaledPair h = detail::cyl_h_scaled(n, wb);
    return {detail::conj_s(h.v) * cd(-parity, 0.0),
            detail::conj_s(h.d) * cd(parity, 0.0)};
  }
  // lower-left: H1 = 2J - H2 with H2 exponentially small here
  ScaledPair j = bessel_j_scaled_pair(fam, n, z);
  ScaledPair h2 = hankel1_scaled_pair(fam, n, std::conj(z));  // upper-left
  return {j.v + j.v - detail::conj_s(h2.v),
          j.d + j.d - detail::conj_s(h2.d)};
}

// ---------------------------------------------------------------------------
// Public operations.

namespace detail {

inline int reduce_order(const BesselQuery& q) {
  if (q.order >= 0) return q.order;
  if (q.family == Family::spherical)
    throw invalid_input_error("negative spherical order");
  return -q.order;  // reflection parity applied by caller
}

inline BesselQuad finish(const BesselQuery& q, ScaledPair p) {
  if (q.order < 0 && (-q.order) % 2 != 0) {
    // J_{-n} = (-1)^n J_n, same for H^{(1)}
    p.v = -p.v;
    p.d = -p.d;
  }
  double shift = 0.0;
  cd phase{1.0, 0.0};
  if (q.scaling == Scaling::exponential_scaled) {
    shift = -std::abs(q.z.imag());
  }
  BesselQuad out;
  out.value = (ScaledC{p.v.m * phase, p.v.e + shift}).to_complex();
  out.derivative = (ScaledC{p.d.m * phase, p.d.e + shift}).to_complex();
  return out;
}

inline BesselQuad finish_hankel(const BesselQuery& q, ScaledPair p) {
  if (q.order < 0 && (-q.order) % 2 != 0) {
    p.v = -p.v;
    p.d = -p.d;
  }
  if (q.scaling == Scaling::exponential_scaled) {
    // documented factor exp(-i z)
    ScaledC s = scaled_exp(-cd(0.0, 1.0) * q.z);
    p.v = p.v * s;
    p.d = p.d * s;
  }
  return {p.v.to_complex(), p.d.to_complex()};
}

}  // namespace detail

inline BesselQuad bessel_j(const BesselQuery& q) {
  int n = detail::reduce_order(q);
  return detail::finish(q, bessel_j_scaled_pair(q.family, n, q.z));
}

inline BesselQuad hankel1(const BesselQuery& q) {
  int n = detail::reduce_order(q);
  return detail::finish_hankel(q, hankel1_scaled_pair(q.family, n, q.z));
}

// J'_n/J_n, cancellation-free. Signals pole proximity so the caller can
// switch to the degenerate interface branch.
inline cd log_deriv_j(const BesselQuery& q) {
  int n = detail::reduce_order(q);
  detail::check_finite(q.z);
  ScaledPair p = bessel_j_scaled_pair(q.family, n, q.z);
  if (p.v.is_zero() ||
      p.v.log_abs() < p.d.log_abs() + std::log(1e-13))
    throw pole_proximity_error("argument at/near a zero of J_n");
  return (p.d / p.v).to_complex();
}

inline cd hankel1_log_deriv(const BesselQuery& q) {
  int n = detail::reduce_order(q);
  detail::check_finite(q.z);
  if (q.z == cd(0.0, 0.0)) throw domain_error("Hankel log-derivative at z = 0");
  ScaledPair p = hankel1_scaled_pair(q.family, n, q.z);
  return (p.d / p.v).to_complex();
}

// J_n(z)/H^{(1)}_n(z) with matched scalings; finite whenever representable.
inline cd cross_ratio_jh(const BesselQuery& q) {
  int n = detail::reduce_order(q);
  detail::check_finite(q.z);
  if (q.z == cd(0.0, 0.0)) throw domain_error("cross ratio at z = 0");
  ScaledPair j = bessel_j_scaled_pair(q.family, n, q.z);
  ScaledPair h = hankel1_scaled_pair(q.family, n, q.z);
  ScaledC r = j.v / h.v;
  if (r.log_abs() < -745.0) return {0.0, 0.0};
  return r.to_complex();
}

}  // namespace cloak::specfun
