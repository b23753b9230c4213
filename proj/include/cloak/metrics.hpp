#pragma once

// Measured quantities: boundary-trace gaps between the cloaked and free
// problems, operator-norm differences of the Neumann-to-Dirichlet maps,
// conormal-derivative norms on the device boundary, gaps to the sound-hard
// annulus, norms of the small-inclusion field, and log-log rate fitting.

#include <cmath>
#include <complex>
#include <string>
#include <utility>
#include <vector>

#include "cloak/errors.hpp"
#include "cloak/sobolev.hpp"
#include "cloak/solver.hpp"

namespace cloak::metrics {

using cd = std::complex<double>;
using material::CloakConfig;
using sobolev::ModalDensity;
using sobolev::SobolevIndex;

// ---------------------------------------------------------------------------
// Probes and sweep bookkeeping.

// Smooth broadband Neumann probe: every low mode excited, reproducible runs.
inline ModalDensity default_probe(int dimension, double radius) {
  ModalDensity d;
  d.dimension = dimension;
  d.radius = radius;
  if (dimension == 2) {
    for (int n = -8; n <= 8; ++n) d.c2[n] = cd(1.0 / (1.0 + n * n), 0.0);
  } else if (dimension == 3) {
    for (int n = 0; n <= 6; ++n)
      for (int m = -n; m <= n; ++m)
        d.c3[{n, m}] = cd(1.0 / (1.0 + n * (n + 1.0)), 0.0);
  } else {
    throw invalid_input_error("dimension must be 2 or 3");
  }
  return d;
}

struct SweepSample {
  double parameter = 0.0;  // rho, tau, or delta
  double value = 0.0;      // measured norm, nonnegative
  int n_max_used = 0;
  std::vector<std::string> warnings;
};

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::vector<std::pair<double, double>> points;  // (log10 param, log10 value)
};

inline RateFit fit_rate(const std::vector<SweepSample>& samples) {
  if (samples.size() < 3)
    throw invalid_input_error("rate fit needs at least 3 samples");
  RateFit f;
  for (const auto& s : samples) {
    if (!(s.parameter > 0.0) || !std::isfinite(s.parameter))
      throw invalid_input_error("sweep parameter must be positive and finite");
    if (!(s.value > 0.0) || !std::isfinite(s.value))
      throw invalid_input_error(
          "rate fit needs strictly positive finite norms");
    f.points.emplace_back(std::log10(s.parameter), std::log10(s.value));
  }
  double n = double(f.points.size());
  double sx = 0.0, sy = 0.0;
  for (auto& [x, y] : f.points) {
    sx += x;
    sy += y;
  }
  double mx = sx / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (auto& [x, y] : f.points) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
    syy += (y - my) * (y - my);
  }
  if (sxx == 0.0)
    throw invalid_input_error("all sweep parameters coincide; no fit");
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (syy == 0.0) {
    f.r_squared = 1.0;
  } else {
    double ss_res = 0.0;
    for (auto& [x, y] : f.points) {
      double e = y - (f.slope * x + f.intercept);
      ss_res += e * e;
    }
    f.r_squared = 1.0 - ss_res / syy;
  }
  return f;
}

// ---------------------------------------------------------------------------
// Gap norms.

namespace detail {

// Applies f(n, m, psi_n) over the probe's modes and collects a density on
// the given radius with coefficients f * psi.
template <typename F>
ModalDensity map_density(const ModalDensity& psi, double radius, F&& factor) {
  ModalDensity out;
  out.dimension = psi.dimension;
  out.radius = radius;
  if (psi.dimension == 2) {
    for (auto& [n, c] : psi.c2) out.c2[n] = c * factor(std::abs(n));
  } else {
    for (auto& [nm, c] : psi.c3) out.c3[nm] = c * factor(nm.first);
  }
  return out;
}

template <typename F>
ModalDensity transfer_density(const CloakConfig& c, const ModalDensity& psi,
                              bool no_cloak, F&& pick) {
  std::map<int, cd> cache;
  return map_density(psi, c.R, [&](int an) {
    auto it = cache.find(an);
    if (it == cache.end()) {
      auto t = solver::cloak_mode_transfer(c, an, no_cloak);
      it = cache.emplace(an, pick(t)).first;
    }
    return it->second;
  });
}

}  // namespace detail

// || u_rho - u_0 ||_{H^{1/2}(dB_R)} from the cancellation-free per-mode gaps.
inline double trace_gap(const CloakConfig& c, const ModalDensity& psi,
                        bool no_cloak = false) {
  psi.validate();
  if (psi.dimension != c.dimension)
    throw invalid_input_error("probe dimension mismatch");
  ModalDensity gap = detail::transfer_density(
      c, psi, no_cloak, [](const solver::ModeTransfer& t) {
        return t.ntd_free * t.trace_gap;  // d_n - d_n^0
      });
  return sobolev::hs_norm(gap, SobolevIndex{0.5});
}

// sup_n (1 + lambda_n/R^2)^{1/2} |d_n - d_n^0| with a doubling-certified tail.
inline double ntd_diff_opnorm(const CloakConfig& c, bool no_cloak = false) {
  double R = c.R;
  auto mode_value = [&](int n) {
    auto t = solver::cloak_mode_transfer(c, n, no_cloak);
    double lam = c.dimension == 2 ? double(n) * n : double(n) * (n + 1);
    return std::sqrt(1.0 + lam / (R * R)) * std::abs(t.ntd_free * t.trace_gap);
  };
  int n_max = int(std::ceil(c.omega * R)) + 20;
  auto sup_to = [&](int nmax) {
    double sup = 0.0;
    for (int n = 0; n <= nmax; ++n) sup = std::max(sup, mode_value(n));
    return sup;
  };
  double sup = sup_to(n_max);
  for (;;) {
    int doubled = 2 * n_max;
    if (doubled > 2000)
      throw truncation_unconverged_error(
          "operator-norm tail failed to certify below the mode cap");
    double sup2 = sup_to(doubled);
    if (std::abs(sup2 - sup) <= 1e-10 * std::max(sup, 1e-300)) return sup2;
    n_max = doubled;
    sup = sup2;
  }
}

// H^s norm (default s = -1/2) of the conormal derivative of the exterior
// solution on |x| = rho, rescaled to the unit circle/sphere.
inline double conormal_norm(const CloakConfig& c, const ModalDensity& psi,
                            SobolevIndex s = SobolevIndex{-0.5}) {
  psi.validate();
  if (psi.dimension != c.dimension)
    throw invalid_input_error("probe dimension mismatch");
  ModalDensity flux = detail::transfer_density(
      c, psi, false, [&](const solver::ModeTransfer& t) {
        return cd(c.omega, 0.0) * t.conormal;
      });
  ModalDensity unit = sobolev::rescale_density(flux, 1.0);
  return sobolev::hs_norm(unit, s);
}

// || u_sh - u_rho ||_{H^{1/2}(dB_R)} against the sound-hard annulus with the
// same inner radius, using the cancellation-free per-mode difference.
inline double sound_hard_gap(const CloakConfig& c, const ModalDensity& psi) {
  psi.validate();
  if (psi.dimension != c.dimension)
    throw invalid_input_error("probe dimension mismatch");
  ModalDensity gap = detail::transfer_density(
      c, psi, false,
      [](const solver::ModeTransfer& t) { return t.sh_gap; });
  return sobolev::hs_norm(gap, SobolevIndex{0.5});
}

// ---------------------------------------------------------------------------
// Small-inclusion norms.

struct InclusionNorms {
  double trace_r0 = 0.0;  // H^{1/2} norm of W on |x| = r0
  double trace_r2 = 0.0;  // H^{1/2} norm of W on |x| = r2
  double l2_shell = 0.0;  // L^2 volume norm of W over r0 < |x| < r2
};

inline InclusionNorms inclusion_gap_norms(const solver::InclusionProblem& p) {
  auto s = solver::small_inclusion_field(p);
  InclusionNorms out;
  out.trace_r0 =
      sobolev::hs_norm(solver::trace_density(s, p.r0), SobolevIndex{0.5});
  out.trace_r2 =
      sobolev::hs_norm(solver::trace_density(s, p.r2), SobolevIndex{0.5});
  // modal orthogonality reduces the shell integral to radial quadratures;
  // 64 panels of 8-point Gauss-Legendre each
  using namespace specfun;
  Family fam = s.dimension == 2 ? Family::cylindrical : Family::spherical;
  static const double gx[4] = {0.1834346424956498, 0.5255324099163290,
                               0.7966664774136267, 0.9602898564975363};
  static const double gw[4] = {0.3626837833783620, 0.3137066458778873,
                               0.2223810344533745, 0.1012285362903763};
  double total = 0.0;
  double angular = s.dimension == 2 ? 2.0 * M_PI : 1.0;
  for (auto& [key, mc] : s.modes) {
    int an = std::abs(key.first);
    auto integrand = [&](double r) {
      auto h = hankel1_scaled_pair(fam, an, cd(p.omega * r, 0.0));
      ScaledC v = mc.b * h.v;
      double la = v.log_abs();
      double a2 = la < -350.0 ? 0.0 : std::exp(2.0 * la);
      return a2 * std::pow(r, s.dimension - 1.0);
    };
    double acc = 0.0;
    for (int i = 0; i < 64; ++i) {
      double a = p.r0 + (p.r2 - p.r0) * i / 64.0;
      double b = p.r0 + (p.r2 - p.r0) * (i + 1) / 64.0;
      double cmid = (a + b) / 2, hw = (b - a) / 2;
      for (int k = 0; k < 4; ++k)
        acc += gw[k] * hw *
               (integrand(cmid - hw * gx[k]) + integrand(cmid + hw * gx[k]));
    }
    total += angular * acc;
  }
  out.l2_shell = std::sqrt(total);
  return out;
}

// Lemma-style ratio: trace norm at r0 over the H^{-3/2} norm of the datum
// rescaled to the unit circle/sphere.
inline double inclusion_trace_ratio(const solver::InclusionProblem& p) {
  double denom = sobolev::hs_norm(sobolev::rescale_density(p.phi, 1.0),
                                  SobolevIndex{-1.5});
  if (denom == 0.0)
    throw invalid_input_error("zero inclusion datum has no ratio");
  return inclusion_gap_norms(p).trace_r0 / denom;
}

// ---------------------------------------------------------------------------
// Energy identity residual.

// Relative residual of (absorbed power in the lossy layer) against
// (power entering through the outer Neumann boundary).
inline double energy_residual(const CloakConfig& c, const ModalDensity& psi) {
  auto s = solver::solve_cloak(c, psi);
  double lhs = solver::lossy_absorption(c, s);
  double rhs = solver::boundary_power(s, psi);
  double scale = std::max(std::abs(lhs), std::abs(rhs));
  if (scale == 0.0) return 0.0;
  return std::abs(lhs - rhs) / scale;
}

}  // namespace cloak::metrics
