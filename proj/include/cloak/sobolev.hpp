#pragma once

// Fractional Sobolev norms H^s on circles and spheres through surface
// eigenbasis expansions, plus modal projection of sampled boundary data.
// 2D basis: e^{in theta}/sqrt(2 pi r), orthonormal in L^2 of the circle of
// radius r. 3D basis: Y_n^m / r with Y_n^m orthonormal on the unit sphere
// (Condon-Shortley phase).

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <tuple>
#include <utility>
#include <vector>

#include "cloak/errors.hpp"

namespace cloak::sobolev {

using cd = std::complex<double>;

struct ModalDensity {
  int dimension = 2;
  double radius = 1.0;
  // 2D: n -> c_n with density(theta) = sum c_n e^{in theta}
  std::map<int, cd> c2;
  // 3D: (n, m) -> c_n^m against orthonormal Y_n^m
  std::map<std::pair<int, int>, cd> c3;

  int truncation_order() const {
    int nmax = 0;
    if (dimension == 2) {
      for (auto& [n, c] : c2) nmax = std::max(nmax, std::abs(n));
    } else {
      for (auto& [nm, c] : c3) nmax = std::max(nmax, nm.first);
    }
    return nmax;
  }

  void validate() const {
    if (dimension != 2 && dimension != 3)
      throw invalid_input_error("dimension must be 2 or 3");
    if (!(radius > 0.0) || !std::isfinite(radius))
      throw invalid_input_error("radius must be positive and finite");
    auto finite = [](cd c) {
      return std::isfinite(c.real()) && std::isfinite(c.imag());
    };
    for (auto& [n, c] : c2)
      if (!finite(c)) throw invalid_input_error("non-finite coefficient");
    for (auto& [nm, c] : c3) {
      if (nm.first < 0 || std::abs(nm.second) > nm.first)
        throw invalid_input_error("spherical index out of range (|m| <= n)");
      if (!finite(c)) throw invalid_input_error("non-finite coefficient");
    }
  }
};

struct SobolevIndex {
  double s = 0.0;
};

inline double hs_norm(const ModalDensity& d, SobolevIndex idx) {
  d.validate();
  double r = d.radius, s = idx.s;
  double sum = 0.0;
  if (d.dimension == 2) {
    for (auto& [n, c] : d.c2) {
      double lam = double(n) * double(n);
      sum += std::pow(1.0 + lam / (r * r), s) * std::norm(c) * 2.0 * M_PI * r;
    }
  } else {
    for (auto& [nm, c] : d.c3) {
      double n = nm.first;
      double lam = n * (n + 1.0);
      sum += std::pow(1.0 + lam / (r * r), s) * std::norm(c) * r * r;
    }
  }
  return std::sqrt(sum);
}

inline ModalDensity rescale_density(const ModalDensity& d, double new_radius) {
  d.validate();
  if (!(new_radius > 0.0) || !std::isfinite(new_radius))
    throw invalid_input_error("new radius must be positive and finite");
  ModalDensity out = d;
  out.radius = new_radius;
  return out;
}

// ---------------------------------------------------------------------------
// Spherical harmonics (orthonormal, Condon-Shortley) and Gauss-Legendre.

namespace detail {

// Fully-normalized associated Legendre values P~_n^m(x) for a fixed m and
// all n in [m, nmax]; Y_n^m(theta, phi) = P~_n^m(cos theta) e^{i m phi}.
inline std::vector<double> normalized_plm(int m, int nmax, double x) {
  double sx = std::sqrt(std::max(0.0, 1.0 - x * x));
  double pmm = std::sqrt(1.0 / (4.0 * M_PI));
  for (int k = 1; k <= m; ++k)
    pmm *= -std::sqrt((2.0 * k + 1.0) / (2.0 * k)) * sx;
  std::vector<double> out;
  out.reserve(nmax - m + 1);
  out.push_back(pmm);
  if (nmax == m) return out;
  double p1 = x * std::sqrt(2.0 * m + 3.0) * pmm;
  out.push_back(p1);
  double p0 = pmm;
  for (int n = m + 2; n <= nmax; ++n) {
    double a = std::sqrt((4.0 * n * n - 1.0) / (double(n) * n - double(m) * m));
    double b = std::sqrt((double(n - 1) * (n - 1) - double(m) * m) /
                         (4.0 * double(n - 1) * (n - 1) - 1.0));
    double p2 = a * (x * p1 - b * p0);
    p0 = p1;
    p1 = p2;
    out.push_back(p2);
  }
  return out;
}

inline cd sph_harmonic(int n, int m, double theta, double phi) {
  int am = std::abs(m);
  double p = normalized_plm(am, n, std::cos(theta)).back();
  cd y = p * std::exp(cd(0.0, am * phi));
  if (m >= 0) return y;
  double sgn = (am % 2 == 0) ? 1.0 : -1.0;
  return sgn * std::conj(y);
}

// Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration.
inline void gauss_legendre(int q, std::vector<double>& x,
                           std::vector<double>& w) {
  x.assign(q, 0.0);
  w.assign(q, 0.0);
  for (int i = 0; i < (q + 1) / 2; ++i) {
    double t = std::cos(M_PI * (i + 0.75) / (q + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = t;
      for (int k = 2; k <= q; ++k) {
        double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = q * (t * p1 - p0) / (t * t - 1.0);
      double dt = p1 / dp;
      t -= dt;
      if (std::abs(dt) < 1e-15) break;
    }
    x[i] = -t;
    x[q - 1 - i] = t;
    w[i] = w[q - 1 - i] = 2.0 / ((1.0 - t * t) * dp * dp);
  }
}

}  // namespace detail

struct SphereNode {
  double theta;
  double phi;
  double weight;  // quadrature weight on the unit sphere
};

// Product grid exact for spherical polynomials of degree <= 2*n_max.
inline std::vector<SphereNode> sphere_quadrature(int n_max) {
  if (n_max < 0) throw invalid_input_error("negative truncation order");
  int q = n_max + 1;
  int mphi = 2 * n_max + 1;
  std::vector<double> x, w;
  detail::gauss_legendre(q, x, w);
  std::vector<SphereNode> nodes;
  nodes.reserve(size_t(q) * mphi);
  for (int i = 0; i < q; ++i) {
    double theta = std::acos(x[i]);
    for (int j = 0; j < mphi; ++j)
      nodes.push_back({theta, 2.0 * M_PI * j / mphi,
                       w[i] * 2.0 * M_PI / mphi});
  }
  return nodes;
}

// Reconstruction at a point on the carrying circle/sphere.
inline cd eval_density(const ModalDensity& d, double theta, double phi = 0.0) {
  cd sum{0.0, 0.0};
  if (d.dimension == 2) {
    for (auto& [n, c] : d.c2) sum += c * std::exp(cd(0.0, n * theta));
  } else {
    for (auto& [nm, c] : d.c3)
      sum += c * detail::sph_harmonic(nm.first, nm.second, theta, phi);
  }
  return sum;
}

// 2D projection: samples (theta_j, f_j) on >= 2*N_max+1 uniformly spaced
// angles; exact DFT recovery for band-limited data.
inline ModalDensity modal_project(
    const std::vector<std::pair<double, cd>>& samples, double radius,
    int n_max) {
  if (n_max < 0) throw invalid_input_error("negative truncation order");
  int m = int(samples.size());
  if (m < 2 * n_max + 1)
    throw invalid_input_error("need at least 2*N_max+1 uniform samples");
  std::vector<std::pair<double, cd>> s = samples;
  std::sort(s.begin(), s.end(),
            [](auto& a, auto& b) { return a.first < b.first; });
  double step = 2.0 * M_PI / m;
  for (int j = 1; j < m; ++j) {
    if (std::abs((s[j].first - s[0].first) - j * step) > 1e-9)
      throw invalid_input_error("angles are not uniformly spaced");
  }
  ModalDensity d;
  d.dimension = 2;
  d.radius = radius;
  if (!(radius > 0.0)) throw invalid_input_error("radius must be positive");
  for (int n = -n_max; n <= n_max; ++n) {
    cd acc{0.0, 0.0};
    for (auto& [th, f] : s) acc += f * std::exp(cd(0.0, -n * th));
    d.c2[n] = acc / double(m);
  }
  return d;
}

// 3D projection: samples must sit on the canonical product grid
// (Gauss-Legendre colatitudes x uniform azimuths starting at phi = 0).
inline ModalDensity modal_project(
    const std::vector<std::tuple<double, double, cd>>& samples, double radius,
    int n_max) {
  if (n_max < 0) throw invalid_input_error("negative truncation order");
  if (!(radius > 0.0)) throw invalid_input_error("radius must be positive");
  // group by colatitude
  std::map<double, std::vector<std::pair<double, cd>>> rows;
  for (auto& [th, ph, f] : samples) {
    bool merged = false;
    for (auto& [key, row] : rows) {
      if (std::abs(key - th) < 1e-12) {
        row.push_back({ph, f});
        merged = true;
        break;
      }
    }
    if (!merged) rows[th].push_back({ph, f});
  }
  int q = int(rows.size());
  if (q < n_max + 1)
    throw invalid_input_error("need at least N_max+1 colatitude levels");
  std::vector<double> x, w;
  detail::gauss_legendre(q, x, w);
  // verify nodes and azimuth structure
  size_t mphi = 0;
  {
    int i = q - 1;  // rows sorted by increasing theta = decreasing cos
    for (auto& [th, row] : rows) {
      if (std::abs(std::cos(th) - x[i]) > 1e-9)
        throw invalid_input_error(
            "colatitudes are not Gauss-Legendre nodes for this level count");
      --i;
      if (mphi == 0) mphi = row.size();
      if (row.size() != mphi)
        throw invalid_input_error("ragged azimuth rows in sphere samples");
    }
  }
  if (mphi < size_t(2 * n_max + 1))
    throw invalid_input_error("need at least 2*N_max+1 azimuth samples");
  ModalDensity d;
  d.dimension = 3;
  d.radius = radius;
  for (int n = 0; n <= n_max; ++n)
    for (int m = -n; m <= n; ++m) d.c3[{n, m}] = cd(0.0, 0.0);
  int i = q - 1;
  for (auto& [th, row] : rows) {
    double wth = w[i--] * 2.0 * M_PI / double(mphi);
    for (auto& [ph, f] : row) {
      if (std::abs(std::remainder(ph * double(mphi) / (2.0 * M_PI),
                                  1.0)) > 1e-9 * mphi)
        throw invalid_input_error("azimuths are not the uniform grid");
      for (int n = 0; n <= n_max; ++n)
        for (int m = -n; m <= n; ++m)
          d.c3[{n, m}] +=
              wth * f * std::conj(detail::sph_harmonic(n, m, th, ph));
    }
  }
  return d;
}

}  // namespace cloak::sobolev
