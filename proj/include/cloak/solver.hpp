#pragma once

// Per-mode solution of the radial boundary-value problems: the three-region
// cloak transmission problem, the free problem, the sound-hard annulus, and
// the exterior small-inclusion problem, plus two independent oracles (dense
// 5x5 solve and radial ODE integration).
//
// All transfer quantities are assembled in exponent-carrying arithmetic so
// nothing overflows even when the lossy wavenumber has a huge imaginary part.

#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <map>
#include <utility>
#include <vector>

#include "cloak/bessel.hpp"
#include "cloak/errors.hpp"
#include "cloak/material.hpp"
#include "cloak/scaled.hpp"
#include "cloak/sobolev.hpp"

namespace cloak::solver {

using cd = std::complex<double>;
using material::CloakConfig;
using material::DerivedParams;
using sobolev::ModalDensity;

// ---------------------------------------------------------------------------
// Mode transfer ladder.

struct ModeTransfer {
  int n = 0;
  ScaledC upsilon;  // d_n = upsilon * c_n; exceeds double range in the deep
                    // lossy regime, hence exponent-carrying
  cd hcal;          // lossy-layer logarithmic-derivative aggregate
  cd gamma;         // b_n = gamma * a_n (exterior reflection)
  cd ntd_diag;      // d_n = u-trace at R per unit psi_n
  cd ntd_free;      // d_n^0 = J/(omega J') at omega R
  cd trace_gap;     // (d_n - d_n^0)/d_n^0, cancellation-free
  cd conormal;      // l_n per unit psi_n (conormal trace factor at rho)
  cd ntd_sh;        // diagonal of the sound-hard annulus with the same rho
  cd sh_gap;        // d_n - ntd_sh, assembled without cancellation
  // coefficients per unit psi_n
  ScaledC a, b, c, d, e;
};

namespace detail {

using specfun::Family;
using specfun::ScaledPair;

inline Family family_of(int dimension) {
  return dimension == 2 ? Family::cylindrical : Family::spherical;
}

inline cd to_c(const ScaledC& s) { return s.to_complex(); }

}  // namespace detail

// no_cloak replaces all three regions by the background medium {I, 1}; the
// coefficients then continue analytically across the fictitious interfaces.
inline ModeTransfer cloak_mode_transfer(const CloakConfig& cfg, int n,
                                        bool no_cloak = false) {
  using namespace specfun;
  if (n < 0) throw invalid_input_error("mode index must be nonnegative");
  DerivedParams p = material::derive(cfg);
  Family fam = detail::family_of(cfg.dimension);
  double w = cfg.omega, R = cfg.R, rho = cfg.rho;

  ModeTransfer t;
  t.n = n;

  ScaledPair jR = bessel_j_scaled_pair(fam, n, cd(w * R, 0.0));
  ScaledPair hR = hankel1_scaled_pair(fam, n, cd(w * R, 0.0));
  ScaledPair jr = bessel_j_scaled_pair(fam, n, cd(w * rho, 0.0));
  ScaledPair hr = hankel1_scaled_pair(fam, n, cd(w * rho, 0.0));
  {
    ScaledC den = jR.d * cd(w, 0.0);
    if (den.is_zero())
      throw near_resonance_error("free NtD diagonal is singular");
    t.ntd_free = detail::to_c(jR.v / den);
  }

  // Wronskian values J H' - J' H at the two real radii
  auto wronskian = [&](double z) {
    return fam == Family::cylindrical
               ? ScaledC{cd(0.0, 2.0 / M_PI)} / ScaledC{cd(z, 0.0)}
               : ScaledC{cd(0.0, 1.0)} / ScaledC{cd(z * z, 0.0)};
  };

  // sound-hard annulus diagonal with the same inner radius
  ScaledC gamma_sh = -(jr.d / hr.d);
  ScaledC den_sh = jR.d + gamma_sh * hR.d;
  if (den_sh.is_zero())
    throw near_resonance_error("sound-hard annulus diagonal is singular");
  t.ntd_sh = detail::to_c((jR.v + gamma_sh * hR.v) / (den_sh * cd(w, 0.0)));

  if (no_cloak) {
    t.upsilon = ScaledC{};
    t.gamma = cd(0.0, 0.0);
    t.ntd_diag = t.ntd_free;
    t.trace_gap = cd(0.0, 0.0);
    ScaledC a = ScaledC{1.0} / (jR.d * cd(w, 0.0));
    t.a = a;
    t.b = ScaledC{};
    t.c = a;
    t.d = ScaledC{};
    t.e = a;
    t.conormal = detail::to_c(a * jr.d);
    t.hcal = detail::to_c(jr.d / jr.v);
    // d0 - d_sh = Gamma_sh (J H' - J' H)(wR) / (w J'(wR) (J' + Gamma_sh H')(wR))
    ScaledC g0 = (gamma_sh * wronskian(w * R)) /
                 ((jR.d * cd(w, 0.0)) * den_sh);
    t.sh_gap = g0.log_abs() < -745.0 ? cd(0.0, 0.0) : detail::to_c(g0);
    return t;
  }

  cd z1 = p.omega_l * (rho / 2.0);
  cd z2 = p.omega_l * rho;
  cd za = p.omega_a * (rho / 2.0);

  ScaledPair j1 = bessel_j_scaled_pair(fam, n, z1);
  ScaledPair h1 = hankel1_scaled_pair(fam, n, z1);
  ScaledPair j2 = bessel_j_scaled_pair(fam, n, z2);
  ScaledPair h2 = hankel1_scaled_pair(fam, n, z2);
  ScaledPair ja = bessel_j_scaled_pair(fam, n, za);

  // Upsilon_n: inner-interface reflection. The degenerate branch applies
  // when the core field has a Dirichlet node at the interface.
  bool degenerate = ja.v.is_zero() ||
                    ja.v.log_abs() < ja.d.log_abs() + std::log(1e-13);
  ScaledC inner_den;  // H' - A H L_a at z1, reused for the e back-substitution
  if (degenerate) {
    t.upsilon = -(j1.v / h1.v);
  } else {
    cd la = detail::to_c(ja.d / ja.v);  // J'_n/J_n at the core argument
    ScaledC num = j1.d - j1.v * (p.contrast * la);
    inner_den = h1.d - h1.v * (p.contrast * la);
    if (inner_den.is_zero())
      throw near_resonance_error("inner-interface denominator vanished");
    t.upsilon = -(num / inner_den);
  }

  // H_n: aggregate log-derivative at the outer lining interface.
  ScaledC lining_num = j2.d + t.upsilon * h2.d;
  ScaledC lining_den = j2.v + t.upsilon * h2.v;
  if (lining_den.is_zero())
    throw near_resonance_error("lining denominator vanished");
  ScaledC hcal_s = lining_num / lining_den;
  t.hcal = detail::to_c(hcal_s);

  // Gamma_n: exterior reflection ratio at |x| = rho.
  ScaledC bh = hcal_s * p.lining_impedance;
  ScaledC gnum = jr.v * bh - jr.d;
  ScaledC gden = hr.v * bh - hr.d;
  if (gden.is_zero())
    throw near_resonance_error("exterior reflection denominator vanished");
  ScaledC gamma_s = -(gnum / gden);
  t.gamma = detail::to_c(gamma_s);

  // NtD diagonal and its cancellation-free gap to the free diagonal.
  ScaledC dden = (jR.d + gamma_s * hR.d) * cd(w, 0.0);
  {
    double mag = std::max((jR.d * cd(w, 0.0)).log_abs(),
                          (gamma_s * hR.d * cd(w, 0.0)).log_abs());
    if (dden.is_zero() || dden.log_abs() < mag + std::log(1e-14))
      throw near_resonance_error(
          "NtD denominator collapsed: omega is near an interior eigenvalue");
  }
  ScaledC dnum = jR.v + gamma_s * hR.v;
  t.ntd_diag = detail::to_c(dnum / dden);

  ScaledC r1 = hR.v / jR.v;  // H/J at omega R
  ScaledC r2 = hR.d / jR.d;  // H'/J' at omega R
  ScaledC gap = (gamma_s * (r1 - r2)) / (ScaledC{1.0} + gamma_s * r2);
  t.trace_gap = gap.log_abs() < -745.0 ? cd(0.0, 0.0) : detail::to_c(gap);

  // d_n - d_n^sh without differencing: Gamma - Gamma_sh collapses to
  // B H_n W(w rho) / ((B H_n H - H')(w rho) H'(w rho)), and the diagonal
  // difference to -(Gamma - Gamma_sh) (H J' - J H')(wR) / (w den den_sh)
  {
    ScaledC shg = (bh * wronskian(w * rho) * wronskian(w * R)) /
                  (dden * den_sh * gden * hr.d);
    t.sh_gap = shg.log_abs() < -745.0 ? cd(0.0, 0.0) : detail::to_c(shg);
  }

  // coefficients per unit psi_n
  t.a = ScaledC{1.0} / dden;
  t.b = gamma_s * t.a;
  ScaledC outer_at_rho = t.a * jr.v + t.b * hr.v;
  t.c = outer_at_rho / lining_den;
  t.d = t.upsilon * t.c;
  if (degenerate) {
    // e from the flux equation: sqrt(sigma_a q_a) e J'(za) = B_l [cJ'+dH'](z1)
    ScaledC flux = (t.c * j1.d + t.d * h1.d) * p.lining_impedance;
    cd root_a = std::sqrt(cd(p.sigma_a * p.q_a, 0.0));
    t.e = flux / (ja.d * root_a);
  } else {
    // J + Upsilon H at z1 collapses to Wronskian / (H' - A H L_a), avoiding
    // the exponential cancellation of forming the sum directly
    ScaledC wron =
        fam == Family::cylindrical
            ? ScaledC{cd(0.0, 2.0 / M_PI)} / ScaledC{z1}
            : ScaledC{cd(0.0, 1.0)} / ScaledC{z1 * z1};
    t.e = (t.c * wron) / (inner_den * ja.v);
  }

  // conormal factor l_n = a J'(omega rho) + b H'(omega rho)
  ScaledC l = t.a * jr.d + t.b * hr.d;
  t.conormal = l.log_abs() < -745.0 ? cd(0.0, 0.0) : detail::to_c(l);
  return t;
}

// ---------------------------------------------------------------------------
// Layered solutions.

struct ModeCoeffs {
  ScaledC e, c, d, a, b;
};

struct LayeredSolution {
  enum class Kind { cloak, free_space, sound_hard, inclusion };
  Kind kind = Kind::free_space;
  int dimension = 2;
  double R = 1.0;            // outer radius (unused for inclusion)
  double r_core = 0.0;       // rho/2 for cloak
  double r_lining = 0.0;     // rho for cloak, rho for sound-hard annulus,
                             // tau for inclusion (inner boundary)
  cd omega{1.0, 0.0};
  cd omega_a{0.0, 0.0};
  cd omega_l{0.0, 0.0};
  int n_max = 0;
  // key: (signed n, 0) in 2D; (n, m) in 3D
  std::map<std::pair<int, int>, ModeCoeffs> modes;
};

namespace detail {

inline void check_density(const ModalDensity& psi, int dimension,
                          double radius) {
  psi.validate();
  if (psi.dimension != dimension)
    throw invalid_input_error("density dimension mismatch");
  if (std::abs(psi.radius - radius) > 1e-12 * radius)
    throw invalid_input_error("density must live on the outer boundary");
}

template <typename F>
void for_each_mode(const ModalDensity& psi, F&& f) {
  if (psi.dimension == 2) {
    for (auto& [n, coeff] : psi.c2) f(n, 0, coeff);
  } else {
    for (auto& [nm, coeff] : psi.c3) f(nm.first, nm.second, coeff);
  }
}

}  // namespace detail

inline LayeredSolution solve_cloak(const CloakConfig& cfg,
                                   const ModalDensity& psi,
                                   bool no_cloak = false) {
  detail::check_density(psi, cfg.dimension, cfg.R);
  LayeredSolution s;
  s.kind = LayeredSolution::Kind::cloak;
  s.dimension = cfg.dimension;
  s.R = cfg.R;
  s.r_core = cfg.rho / 2.0;
  s.r_lining = cfg.rho;
  s.omega = cd(cfg.omega, 0.0);
  DerivedParams p = material::derive(cfg);
  s.omega_a = no_cloak ? cd(cfg.omega, 0.0) : cd(p.omega_a, 0.0);
  s.omega_l = no_cloak ? cd(cfg.omega, 0.0) : p.omega_l;
  std::map<int, ModeTransfer> cache;
  detail::for_each_mode(psi, [&](int n, int m, cd coeff) {
    int an = std::abs(n);
    auto it = cache.find(an);
    if (it == cache.end())
      it = cache.emplace(an, cloak_mode_transfer(cfg, an, no_cloak)).first;
    const ModeTransfer& t = it->second;
    ModeCoeffs mc;
    ScaledC ps{coeff};
    mc.a = t.a * ps;
    mc.b = t.b * ps;
    mc.c = t.c * ps;
    mc.d = t.d * ps;
    mc.e = t.e * ps;
    s.modes[{n, m}] = mc;
    s.n_max = std::max(s.n_max, an);
  });
  return s;
}

inline LayeredSolution solve_free(double omega, double R,
                                  const ModalDensity& psi, int dimension) {
  using namespace specfun;
  detail::check_density(psi, dimension, R);
  LayeredSolution s;
  s.kind = LayeredSolution::Kind::free_space;
  s.dimension = dimension;
  s.R = R;
  s.omega = cd(omega, 0.0);
  Family fam = detail::family_of(dimension);
  detail::for_each_mode(psi, [&](int n, int m, cd coeff) {
    int an = std::abs(n);
    ScaledPair jR = bessel_j_scaled_pair(fam, an, cd(omega * R, 0.0));
    ScaledC den = jR.d * cd(omega, 0.0);
    if (den.is_zero() || jR.d.log_abs() < jR.v.log_abs() + std::log(1e-13))
      throw near_resonance_error(
          "omega R is at a Neumann eigenfrequency (J' ~ 0)");
    ModeCoeffs mc;
    mc.a = ScaledC{coeff} / den;
    s.modes[{n, m}] = mc;
    s.n_max = std::max(s.n_max, an);
  });
  return s;
}

inline LayeredSolution solve_sound_hard_annulus(double omega, double R,
                                                double rho,
                                                const ModalDensity& psi,
                                                int dimension) {
  using namespace specfun;
  detail::check_density(psi, dimension, R);
  if (!(0.0 < rho && rho < R))
    throw invalid_input_error("need 0 < rho < R for the annulus");
  LayeredSolution s;
  s.kind = LayeredSolution::Kind::sound_hard;
  s.dimension = dimension;
  s.R = R;
  s.r_lining = rho;
  s.omega = cd(omega, 0.0);
  Family fam = detail::family_of(dimension);
  detail::for_each_mode(psi, [&](int n, int m, cd coeff) {
    int an = std::abs(n);
    ScaledPair jr = bessel_j_scaled_pair(fam, an, cd(omega * rho, 0.0));
    ScaledPair hr = hankel1_scaled_pair(fam, an, cd(omega * rho, 0.0));
    ScaledPair jR = bessel_j_scaled_pair(fam, an, cd(omega * R, 0.0));
    ScaledPair hR = hankel1_scaled_pair(fam, an, cd(omega * R, 0.0));
    if (hr.d.is_zero())
      throw near_resonance_error("annulus inner condition degenerate");
    ScaledC gsh = -(jr.d / hr.d);  // b/a forced by the inner Neumann wall
    ScaledC den = (jR.d + gsh * hR.d) * cd(omega, 0.0);
    double mag = std::max((jR.d * cd(omega, 0.0)).log_abs(),
                          (gsh * hR.d * cd(omega, 0.0)).log_abs());
    if (den.is_zero() || den.log_abs() < mag + std::log(1e-14))
      throw near_resonance_error("annulus Neumann problem is resonant");
    ModeCoeffs mc;
    mc.a = ScaledC{coeff} / den;
    mc.b = gsh * mc.a;
    s.modes[{n, m}] = mc;
    s.n_max = std::max(s.n_max, an);
  });
  return s;
}

struct InclusionProblem {
  double omega = 1.0;
  double tau = 0.1;     // inclusion scale
  ModalDensity phi;     // Neumann data on |x| = tau
  double r0 = 1.0;      // observation radii
  double r2 = 2.0;

  void validate() const {
    phi.validate();
    if (!(0.0 < tau && tau < r0 / 4.0 && r0 < r2))
      throw invalid_input_error("need 0 < tau < r0/4 < r2/4");
    if (!(omega > 0.0)) throw invalid_input_error("omega must be positive");
    if (std::abs(phi.radius - tau) > 1e-12 * tau)
      throw invalid_input_error("phi must live on the inclusion boundary");
  }
};

inline LayeredSolution small_inclusion_field(const InclusionProblem& p) {
  using namespace specfun;
  p.validate();
  LayeredSolution s;
  s.kind = LayeredSolution::Kind::inclusion;
  s.dimension = p.phi.dimension;
  s.R = p.r2;
  s.r_lining = p.tau;
  s.omega = cd(p.omega, 0.0);
  Family fam = detail::family_of(s.dimension);
  detail::for_each_mode(p.phi, [&](int n, int m, cd coeff) {
    int an = std::abs(n);
    ScaledPair ht = hankel1_scaled_pair(fam, an, cd(p.omega * p.tau, 0.0));
    ModeCoeffs mc;
    mc.b = ScaledC{coeff} / (ht.d * cd(p.omega, 0.0));
    s.modes[{n, m}] = mc;
    s.n_max = std::max(s.n_max, an);
  });
  return s;
}

// ---------------------------------------------------------------------------
// Field evaluation and boundary traces.

namespace detail {

// value (and radial derivative) of the radial part of one mode at radius r
inline void mode_radial(const LayeredSolution& s, const ModeCoeffs& mc, int an,
                        double r, cd& val, cd& der) {
  using namespace specfun;
  Family fam = family_of(s.dimension);
  auto eval = [&](const ScaledC& ja_c, const ScaledC& hb_c, cd k) {
    ScaledPair j = bessel_j_scaled_pair(fam, an, k * r);
    ScaledC v = ja_c * j.v;
    ScaledC d = ja_c * j.d;
    if (!hb_c.is_zero()) {
      ScaledPair h = hankel1_scaled_pair(fam, an, k * r);
      v = v + hb_c * h.v;
      d = d + hb_c * h.d;
    }
    val = v.log_abs() < -745.0 ? cd(0, 0) : v.to_complex();
    der = d.log_abs() < -745.0 ? cd(0, 0) : d.to_complex() * k;
  };
  switch (s.kind) {
    case LayeredSolution::Kind::cloak:
      if (r <= s.r_core)
        eval(mc.e, ScaledC{}, s.omega_a);
      else if (r <= s.r_lining)
        eval(mc.c, mc.d, s.omega_l);
      else
        eval(mc.a, mc.b, s.omega);
      break;
    case LayeredSolution::Kind::free_space:
      eval(mc.a, ScaledC{}, s.omega);
      break;
    case LayeredSolution::Kind::sound_hard:
      eval(mc.a, mc.b, s.omega);
      break;
    case LayeredSolution::Kind::inclusion:
      eval(ScaledC{}, mc.b, s.omega);
      break;
  }
}

inline void check_point(const LayeredSolution& s, double r) {
  bool ok = true;
  switch (s.kind) {
    case LayeredSolution::Kind::cloak:
    case LayeredSolution::Kind::free_space:
      ok = r >= 0.0 && r <= s.R;
      break;
    case LayeredSolution::Kind::sound_hard:
      ok = r >= s.r_lining && r <= s.R;
      break;
    case LayeredSolution::Kind::inclusion:
      ok = r >= s.r_lining;
      break;
  }
  if (!ok) throw cloak::domain_error("point outside the solution's domain");
}

}  // namespace detail

inline cd field_eval(const LayeredSolution& s, double r, double theta,
                     double phi = 0.0) {
  detail::check_point(s, r);
  cd sum{0.0, 0.0};
  for (auto& [key, mc] : s.modes) {
    auto [n, m] = key;
    cd val, der;
    detail::mode_radial(s, mc, std::abs(n), r, val, der);
    cd ang = s.dimension == 2 ? std::exp(cd(0.0, n * theta))
                              : sobolev::detail::sph_harmonic(n, m, theta, phi);
    sum += val * ang;
  }
  return sum;
}

inline cd field_radial_derivative(const LayeredSolution& s, double r,
                                  double theta, double phi = 0.0) {
  detail::check_point(s, r);
  cd sum{0.0, 0.0};
  for (auto& [key, mc] : s.modes) {
    auto [n, m] = key;
    cd val, der;
    detail::mode_radial(s, mc, std::abs(n), r, val, der);
    cd ang = s.dimension == 2 ? std::exp(cd(0.0, n * theta))
                              : sobolev::detail::sph_harmonic(n, m, theta, phi);
    sum += der * ang;
  }
  return sum;
}

// Modal density of the solution's trace on |x| = r.
inline ModalDensity trace_density(const LayeredSolution& s, double r) {
  detail::check_point(s, r);
  ModalDensity d;
  d.dimension = s.dimension;
  d.radius = r;
  for (auto& [key, mc] : s.modes) {
    auto [n, m] = key;
    cd val, der;
    detail::mode_radial(s, mc, std::abs(n), r, val, der);
    if (s.dimension == 2)
      d.c2[n] = val;
    else
      d.c3[{n, m}] = val;
  }
  return d;
}

// Modal density of the conormal derivative du/dr on |x| = r.
inline ModalDensity conormal_density(const LayeredSolution& s, double r) {
  detail::check_point(s, r);
  ModalDensity d;
  d.dimension = s.dimension;
  d.radius = r;
  for (auto& [key, mc] : s.modes) {
    auto [n, m] = key;
    cd val, der;
    detail::mode_radial(s, mc, std::abs(n), r, val, der);
    if (s.dimension == 2)
      d.c2[n] = der;
    else
      d.c3[{n, m}] = der;
  }
  return d;
}

// ---------------------------------------------------------------------------
// Dense 5x5 oracle.

struct DirectModeResult {
  cd e, c, d, a, b;
  double condition = 0.0;   // infinity-norm condition estimate
  double residual = 0.0;    // max relative equation residual
};

namespace detail {

// partial-pivot solve of a k x k complex system; returns the solution and
// fills cond with ||A||_inf * ||A^{-1}||_inf
inline std::vector<cd> dense_solve(std::vector<std::vector<cd>> A,
                                   std::vector<cd> rhs, double& cond) {
  int k = int(A.size());
  double norm_a = 0.0;
  for (auto& row : A) {
    double r = 0.0;
    for (auto& v : row) r += std::abs(v);
    norm_a = std::max(norm_a, r);
  }
  // augment with identity to recover the inverse for the condition estimate
  std::vector<std::vector<cd>> aug(k, std::vector<cd>(2 * k + 1, cd(0, 0)));
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) aug[i][j] = A[i][j];
    aug[i][k + i] = cd(1.0, 0.0);
    aug[i][2 * k] = rhs[i];
  }
  for (int col = 0; col < k; ++col) {
    int piv = col;
    for (int r = col + 1; r < k; ++r)
      if (std::abs(aug[r][col]) > std::abs(aug[piv][col])) piv = r;
    if (std::abs(aug[piv][col]) == 0.0)
      throw oracle_unreliable_error("dense oracle matrix is singular");
    std::swap(aug[col], aug[piv]);
    cd d = aug[col][col];
    for (auto& v : aug[col]) v /= d;
    for (int r = 0; r < k; ++r) {
      if (r == col) continue;
      cd f = aug[r][col];
      if (f == cd(0, 0)) continue;
      for (int j = col; j < 2 * k + 1; ++j) aug[r][j] -= f * aug[col][j];
    }
  }
  double norm_inv = 0.0;
  for (int i = 0; i < k; ++i) {
    double r = 0.0;
    for (int j = 0; j < k; ++j) r += std::abs(aug[i][k + j]);
    norm_inv = std::max(norm_inv, r);
  }
  cond = norm_a * norm_inv;
  std::vector<cd> x(k);
  for (int i = 0; i < k; ++i) x[i] = aug[i][2 * k];
  return x;
}

}  // namespace detail

// Dense direct solve of the five transmission equations in the unknowns
// (e, c, d, a, b). Only trustworthy in a documented envelope.
inline DirectModeResult direct_mode_solve(const CloakConfig& cfg, int n,
                                          cd psi_n, bool no_cloak = false) {
  using namespace specfun;
  if (n < 0) throw invalid_input_error("mode index must be nonnegative");
  if (!(cfg.rho >= 0.02 && n <= 15 && cfg.delta <= 2.0))
    throw oracle_unreliable_error(
        "outside the dense-oracle envelope (rho >= 0.02, n <= 15, delta <= 2)");
  DerivedParams p = material::derive(cfg);
  Family fam = detail::family_of(cfg.dimension);
  double w = cfg.omega, R = cfg.R, rho = cfg.rho;
  cd omega_a = no_cloak ? cd(w, 0.0) : cd(p.omega_a, 0.0);
  cd omega_l = no_cloak ? cd(w, 0.0) : p.omega_l;
  cd root_a = no_cloak ? cd(1.0, 0.0) : std::sqrt(cd(p.sigma_a * p.q_a, 0.0));
  cd root_l = no_cloak ? cd(1.0, 0.0) : p.lining_impedance;

  auto pv = [&](cd z) {
    auto q = bessel_j_scaled_pair(fam, n, z);
    return std::pair<cd, cd>{q.v.to_complex(), q.d.to_complex()};
  };
  auto ph = [&](cd z) {
    auto q = hankel1_scaled_pair(fam, n, z);
    return std::pair<cd, cd>{q.v.to_complex(), q.d.to_complex()};
  };
  auto [ja, jap] = pv(omega_a * (rho / 2.0));
  auto [j1, j1p] = pv(omega_l * (rho / 2.0));
  auto [h1, h1p] = ph(omega_l * (rho / 2.0));
  auto [j2, j2p] = pv(omega_l * rho);
  auto [h2, h2p] = ph(omega_l * rho);
  auto [jr, jrp] = pv(cd(w * rho, 0.0));
  auto [hr, hrp] = ph(cd(w * rho, 0.0));
  auto [jR, jRp] = pv(cd(w * R, 0.0));
  auto [hR, hRp] = ph(cd(w * R, 0.0));

  // unknown order: e, c, d, a, b
  std::vector<std::vector<cd>> A = {
      {ja, -j1, -h1, 0.0, 0.0},
      {root_a * jap, -root_l * j1p, -root_l * h1p, 0.0, 0.0},
      {0.0, j2, h2, -jr, -hr},
      {0.0, root_l * j2p, root_l * h2p, -jrp, -hrp},
      {0.0, 0.0, 0.0, w * jRp, w * hRp},
  };
  std::vector<cd> rhs = {0.0, 0.0, 0.0, 0.0, psi_n};
  // equilibrate rows then columns so the condition estimate measures the
  // intrinsic difficulty of the solve, not the mixed scales of the entries
  std::array<double, 5> col_scale{};
  for (int i = 0; i < 5; ++i) {
    double r = 0.0;
    for (int j = 0; j < 5; ++j) r = std::max(r, std::abs(A[i][j]));
    if (r == 0.0) throw oracle_unreliable_error("dense oracle row vanished");
    for (int j = 0; j < 5; ++j) A[i][j] /= r;
    rhs[i] /= r;
  }
  for (int j = 0; j < 5; ++j) {
    double cmax = 0.0;
    for (int i = 0; i < 5; ++i) cmax = std::max(cmax, std::abs(A[i][j]));
    if (cmax == 0.0)
      throw oracle_unreliable_error("dense oracle column vanished");
    col_scale[j] = cmax;
    for (int i = 0; i < 5; ++i) A[i][j] /= cmax;
  }
  double cond = 0.0;
  auto x = detail::dense_solve(A, rhs, cond);
  for (int j = 0; j < 5; ++j) x[j] /= col_scale[j];
  if (cond > 1e12)
    throw oracle_unreliable_error("dense oracle condition estimate > 1e12");
  DirectModeResult out;
  out.e = x[0];
  out.c = x[1];
  out.d = x[2];
  out.a = x[3];
  out.b = x[4];
  out.condition = cond;
  double worst = 0.0;
  for (int i = 0; i < 5; ++i) {
    cd acc{0.0, 0.0};
    double scale = 0.0;
    for (int j = 0; j < 5; ++j) {
      cd term = A[i][j] * col_scale[j] * x[j];
      acc += term;
      scale = std::max(scale, std::abs(term));
    }
    acc -= rhs[i];
    scale = std::max(scale, std::abs(rhs[i]));
    if (scale > 0.0) worst = std::max(worst, std::abs(acc) / scale);
  }
  out.residual = worst;
  return out;
}

// ---------------------------------------------------------------------------
// Radial ODE oracle: integrates
//   u'' + (N-1)/r u' + (k^2 - lambda_n/r^2) u = 0
// region by region with transmission jumps [u] = 0, [sigma u'] = 0, starting
// from the regular Frobenius solution u ~ r^n, then rescales so the outer
// Neumann datum matches psi_n. Returns u(R).
inline cd radial_ode_oracle(const CloakConfig& cfg, int n, cd psi_n,
                            bool no_cloak = false) {
  if (n < 0) throw invalid_input_error("mode index must be nonnegative");
  if (!(cfg.rho >= 0.02 && n <= 15 && cfg.delta <= 2.0))
    throw oracle_unreliable_error(
        "outside the ODE-oracle envelope (rho >= 0.02, n <= 15, delta <= 2)");
  DerivedParams p = material::derive(cfg);
  double N = cfg.dimension;
  double lam = cfg.dimension == 2 ? double(n) * n : double(n) * (n + 1);
  double w = cfg.omega, R = cfg.R, rho = cfg.rho;
  cd k_core = no_cloak ? cd(w, 0.0) : cd(p.omega_a, 0.0);
  cd k_lining = no_cloak ? cd(w, 0.0) : p.omega_l;
  double sig_core = no_cloak ? 1.0 : p.sigma_a;
  double sig_lining = no_cloak ? 1.0 : p.sigma_l;

  // Frobenius start at r0 inside the core: u = sum a_j r^{n+2j}
  double r0 = rho / 4.0;
  cd u{0.0, 0.0}, du{0.0, 0.0};
  {
    cd aj{1.0, 0.0};
    double expo = n;
    for (int j = 0; j <= 16; ++j) {
      double e = expo + 2.0 * j;
      cd term = aj * std::pow(r0, e);
      u += term;
      du += term * (e / r0);
      aj = -aj * k_core * k_core /
           (2.0 * (j + 1) * (2.0 * expo + 2.0 * (j + 1) + N - 2.0));
    }
  }

  auto integrate = [&](cd k, double ra, double rb, cd& uu, cd& dd) {
    double len = rb - ra;
    int steps = std::max(400, int(15.0 * std::abs(k) * len) + 1);
    double h = len / steps;
    auto rhs = [&](double r, cd uv, cd dv, cd& fu, cd& fd) {
      fu = dv;
      fd = -((N - 1.0) / r) * dv - (k * k - lam / (r * r)) * uv;
    };
    double r = ra;
    for (int i = 0; i < steps; ++i) {
      cd k1u, k1d, k2u, k2d, k3u, k3d, k4u, k4d;
      rhs(r, uu, dd, k1u, k1d);
      rhs(r + h / 2, uu + h / 2 * k1u, dd + h / 2 * k1d, k2u, k2d);
      rhs(r + h / 2, uu + h / 2 * k2u, dd + h / 2 * k2d, k3u, k3d);
      rhs(r + h, uu + h * k3u, dd + h * k3d, k4u, k4d);
      uu += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
      dd += h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
      r += h;
      double mag = std::max(std::abs(uu), std::abs(dd));
      if (!std::isfinite(mag) || mag > 1e280)
        throw accuracy_loss_error("radial ODE oracle blew up", 1.0);
    }
  };

  integrate(k_core, r0, rho / 2.0, u, du);
  du *= sig_core / sig_lining;  // [sigma u'] = 0 across the core interface
  integrate(k_lining, rho / 2.0, rho, u, du);
  du *= sig_lining / 1.0;  // lining to background
  integrate(cd(w, 0.0), rho, R, u, du);
  if (std::abs(du) == 0.0)
    throw near_resonance_error("ODE oracle: Neumann trace vanished");
  cd scale = psi_n / du;
  return u * scale;
}

// ---------------------------------------------------------------------------
// Energy bookkeeping (lossy-layer absorption vs boundary power).

namespace detail {

// 15-point Gauss-Kronrod with embedded 7-point Gauss error estimate.
inline void gk15(const std::function<double(double)>& f, double a, double b,
                 double& value, double& err) {
  static const double xgk[8] = {
      0.991455371120813, 0.949107912342759, 0.864864423359769,
      0.741531185599394, 0.586087235467691, 0.405845151377397,
      0.207784955007898, 0.0};
  static const double wgk[8] = {
      0.022935322010529, 0.063092092629979, 0.104790010322250,
      0.140653259715525, 0.169004726639267, 0.190350578064785,
      0.204432940075298, 0.209482141084728};
  static const double wg[4] = {0.129484966168870, 0.279705391489277,
                               0.381830050505119, 0.417959183673469};
  double c = (a + b) / 2, hw = (b - a) / 2;
  double resk = 0.0, resg = 0.0;
  for (int i = 0; i < 8; ++i) {
    double fv1 = f(c - hw * xgk[i]);
    double fv2 = (i == 7) ? fv1 : f(c + hw * xgk[i]);
    double sum = (i == 7) ? fv1 : fv1 + fv2;
    resk += wgk[i] * sum;
    if (i % 2 == 1) resg += wg[i / 2] * sum;
  }
  value = resk * hw;
  err = std::abs(resk - resg) * hw;
}

inline double adaptive_quad(const std::function<double(double)>& f, double a,
                            double b, double tol, int depth = 0) {
  double v, e;
  gk15(f, a, b, v, e);
  if (e <= tol * std::max(1.0, std::abs(v)) || depth > 24) return v;
  double m = (a + b) / 2;
  return adaptive_quad(f, a, m, tol, depth + 1) +
         adaptive_quad(f, m, b, tol, depth + 1);
}

}  // namespace detail

// beta omega^2 * integral over the lossy layer of |u|^2.
inline double lossy_absorption(const CloakConfig& cfg,
                               const LayeredSolution& s) {
  if (s.kind != LayeredSolution::Kind::cloak)
    throw invalid_input_error("absorption is defined for cloak solutions");
  using namespace specfun;
  Family fam = detail::family_of(s.dimension);
  double total = 0.0;
  double angular = s.dimension == 2 ? 2.0 * M_PI : 1.0;
  // panel density follows the oscillation/decay scale of omega_l
  int panels = std::max(4, int(std::abs(s.omega_l) * cfg.rho / 2.0));
  for (auto& [key, mc] : s.modes) {
    int an = std::abs(key.first);
    auto integrand = [&](double r) {
      ScaledPair j = bessel_j_scaled_pair(fam, an, s.omega_l * r);
      ScaledC v = mc.c * j.v;
      if (!mc.d.is_zero()) {
        ScaledPair h = hankel1_scaled_pair(fam, an, s.omega_l * r);
        v = v + mc.d * h.v;
      }
      double la = v.log_abs();
      double a2 = la < -350.0 ? 0.0 : std::exp(2.0 * la);
      return a2 * std::pow(r, s.dimension - 1.0);
    };
    double acc = 0.0;
    double lo = cfg.rho / 2.0, hi = cfg.rho;
    for (int i = 0; i < panels; ++i) {
      double a = lo + (hi - lo) * i / panels;
      double b = lo + (hi - lo) * (i + 1) / panels;
      acc += detail::adaptive_quad(integrand, a, b, 1e-12);
    }
    total += angular * acc;
  }
  return cfg.beta * cfg.omega * cfg.omega * total;
}

// -Im \int_{\partial B_R} psi conj(u) dsigma from the modal data.
inline double boundary_power(const LayeredSolution& s,
                             const ModalDensity& psi) {
  detail::check_density(psi, s.dimension, s.R);
  double angular = s.dimension == 2 ? 2.0 * M_PI * s.R : s.R * s.R;
  double total = 0.0;
  detail::for_each_mode(psi, [&](int n, int m, cd coeff) {
    auto it = s.modes.find({n, m});
    if (it == s.modes.end()) return;
    cd val, der;
    detail::mode_radial(s, it->second, std::abs(n), s.R, val, der);
    total += -std::imag(coeff * std::conj(val)) * angular;
  });
  return total;
}

}  // namespace cloak::solver
