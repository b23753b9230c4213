#pragma once

#include <cmath>
#include <complex>
#include <limits>

#include "cloak/errors.hpp"

namespace cloak {

// Complex number in mantissa/exponent form: value = m * exp(e).
// Keeps products and ratios of Bessel functions representable across the
// lossy-layer regime where raw values overflow double precision.
struct ScaledC {
  std::complex<double> m{0.0, 0.0};
  double e = 0.0;

  ScaledC() = default;
  ScaledC(std::complex<double> mantissa, double expo) : m(mantissa), e(expo) {}
  explicit ScaledC(std::complex<double> v) : m(v), e(0.0) {}
  explicit ScaledC(double v) : m(v, 0.0), e(0.0) {}

  bool is_zero() const { return m == std::complex<double>(0.0, 0.0); }

  // Pull |m| back toward [1, e); exponent absorbs the rest.
  ScaledC& normalize() {
    double a = std::abs(m);
    if (a == 0.0) {
      e = 0.0;
      return *this;
    }
    double le = std::log(a);
    m /= std::exp(le);
    e += le;
    return *this;
  }

  double log_abs() const {
    if (is_zero()) return -std::numeric_limits<double>::infinity();
    return std::log(std::abs(m)) + e;
  }

  // Collapse to a plain complex. Underflow flushes to zero; overflow throws.
  std::complex<double> to_complex() const {
    if (is_zero()) return {0.0, 0.0};
    double la = log_abs();
    if (la > 709.0)
      throw accuracy_loss_error("scaled value overflows double precision",
                                std::exp(std::min(la - 709.0, 700.0)));
    if (la < -745.0) return {0.0, 0.0};
    return m * std::exp(e);
  }
};

inline ScaledC operator*(const ScaledC& a, const ScaledC& b) {
  if (a.is_zero() || b.is_zero()) return ScaledC{};
  ScaledC r{a.m * b.m, a.e + b.e};
  return r.normalize();
}

inline ScaledC operator*(const ScaledC& a, std::complex<double> c) {
  return a * ScaledC(c);
}

inline ScaledC operator/(const ScaledC& a, const ScaledC& b) {
  if (a.is_zero()) return ScaledC{};
  if (b.is_zero()) throw domain_error("scaled division by zero");
  ScaledC r{a.m / b.m, a.e - b.e};
  return r.normalize();
}

inline ScaledC operator-(const ScaledC& a) { return {-a.m, a.e}; }

inline ScaledC operator+(const ScaledC& a, const ScaledC& b) {
  if (a.is_zero()) return b;
  if (b.is_zero()) return a;
  const ScaledC& hi = (a.e >= b.e) ? a : b;
  const ScaledC& lo = (a.e >= b.e) ? b : a;
  double d = lo.e - hi.e;
  if (d < -1400.0) return hi;
  ScaledC r{hi.m + lo.m * std::exp(d), hi.e};
  return r.normalize();
}

inline ScaledC operator-(const ScaledC& a, const ScaledC& b) { return a + (-b); }

// exp(w) for complex w as a ScaledC, exact in the exponent.
inline ScaledC scaled_exp(std::complex<double> w) {
  return ScaledC{std::exp(std::complex<double>(0.0, w.imag())), w.real()};
}

}  // namespace cloak
