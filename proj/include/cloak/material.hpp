#pragma once

// Transformation acoustics: radial blow-up maps, push-forward of media, and
// assembly of the cloak construction. The device occupies the ball of radius
// R; a small ball of radius rho in the virtual domain is blown up to the
// inclusion D = B_{R1}. The lossy lining lives in the virtual annulus
// rho/2 < |x| < rho, the cloaked content inside |x| < rho/2.

#include <array>
#include <cmath>
#include <complex>
#include <ostream>
#include <string>
#include <vector>

#include "cloak/bessel.hpp"
#include "cloak/errors.hpp"
#include "cloak/format.hpp"

namespace cloak::material {

using cd = std::complex<double>;

struct CloakConfig {
  int dimension = 2;          // N in {2, 3}
  double rho = 0.1;           // regularization parameter
  double delta = 1.0;         // lining exponent
  double alpha = 1.0, beta = 1.0, gamma = 1.0;  // lining constants
  double omega = 1.0;         // angular frequency
  double R = 1.0;             // outer radius of the device
  double sigma_a_prime = 1.0; // cloaked-content density (scalar)
  double q_a_prime = 1.0;     // cloaked-content modulus
  // 3D only: use the literal q_a = q'_a/rho^2 content pull-back instead of
  // the transformation-consistent q'_a/rho^3 (both give the same rate).
  bool paper_literal_3d = false;

  void validate() const;
};

struct DerivedParams {
  double sigma_l = 0.0;  // gamma rho^{2+delta}
  cd q_l;                // alpha + i beta
  double sigma_a = 0.0;  // rho^{2-N} sigma'_a
  double q_a = 0.0;      // rho^{-N} q'_a (or rho^{-2} in literal-3d mode)
  double omega_a = 0.0;  // omega sqrt(q_a/sigma_a)
  cd omega_l;            // omega sqrt(q_l/sigma_l), Im > 0
  cd contrast;           // A (2D) / A~ (3D) = sqrt(sigma_a q_a / sigma_l q_l)
  cd lining_impedance;   // sqrt(sigma_l q_l)
  cd branch_constant;    // sqrt(1+i) = 2^{1/4} e^{i pi/8}
};

inline DerivedParams derive(const CloakConfig& c) {
  c.validate();
  DerivedParams p;
  double N = c.dimension;
  p.sigma_l = c.gamma * std::pow(c.rho, 2.0 + c.delta);
  p.q_l = cd(c.alpha, c.beta);
  p.sigma_a = std::pow(c.rho, 2.0 - N) * c.sigma_a_prime;
  double content_pow = (c.dimension == 3 && c.paper_literal_3d) ? 2.0 : N;
  p.q_a = std::pow(c.rho, -content_pow) * c.q_a_prime;
  p.omega_a = c.omega * std::sqrt(p.q_a / p.sigma_a);
  p.omega_l = c.omega * std::sqrt(p.q_l / p.sigma_l);
  if (p.omega_l.imag() < 0.0) p.omega_l = -p.omega_l;
  p.contrast = std::sqrt(cd(p.sigma_a * p.q_a, 0.0) / (p.sigma_l * p.q_l));
  p.lining_impedance = std::sqrt(p.sigma_l * p.q_l);
  p.branch_constant = std::pow(2.0, 0.25) * std::exp(cd(0.0, M_PI / 8.0));
  return p;
}

inline void CloakConfig::validate() const {
  if (dimension != 2 && dimension != 3)
    throw invalid_input_error("dimension must be 2 or 3");
  auto pos = [](double v) { return v > 0.0 && std::isfinite(v); };
  if (!pos(rho) || !pos(delta) || !pos(alpha) || !pos(beta) || !pos(gamma) ||
      !pos(omega) || !pos(R) || !pos(sigma_a_prime) || !pos(q_a_prime))
    throw invalid_input_error("all cloak parameters must be positive finite");
  if (!(rho < std::min(R / 4.0, 0.5)))
    throw invalid_input_error("rho must satisfy rho < min(R/4, 1/2)");
  // -omega^2 must not be a Neumann eigenvalue of the ball: omega R must stay
  // away from zeros of J'_n (2D) / j'_n (3D). Newton distance estimate.
  using namespace specfun;
  Family fam = dimension == 2 ? Family::cylindrical : Family::spherical;
  double x = omega * R;
  int nmax = int(std::ceil(x)) + 20;
  for (int n = 0; n <= nmax; ++n) {
    auto p = bessel_j_scaled_pair(fam, n, cd(x, 0.0));
    double jv = p.v.to_complex().real();
    double jd = p.d.to_complex().real();
    double jdd = dimension == 2
                     ? -jd / x + (double(n) * n / (x * x) - 1.0) * jv
                     : -2.0 * jd / x +
                           (double(n) * (n + 1.0) / (x * x) - 1.0) * jv;
    double dist = std::abs(jd) / std::max(std::abs(jdd), 1e-300);
    if (dist < 1e-6)
      throw near_resonance_error(
          "omega R is within 1e-6 of a Neumann eigenfrequency of the ball "
          "(zero of the Bessel derivative, order " + std::to_string(n) + ")");
  }
}

// ---------------------------------------------------------------------------
// Blow-up map (radial).

using Point = std::array<double, 3>;

struct BlowupMap {
  enum class Direction { forward, inverse };
  int dimension = 2;
  double rho = 0.1;
  double R1 = 1.0;
  double R2 = 2.0;
  Direction direction = Direction::forward;

  void validate() const {
    if (dimension != 2 && dimension != 3)
      throw invalid_input_error("dimension must be 2 or 3");
    if (!(0.0 < rho && rho < R1 && R1 < R2))
      throw invalid_input_error("need 0 < rho < R1 < R2");
  }
};

struct Jacobian {
  int dimension = 2;
  std::array<std::array<double, 3>, 3> M{};  // dimension x dimension block
  double det = 0.0;
};

namespace detail {

inline double norm(const Point& x, int dim) {
  double s = 0.0;
  for (int i = 0; i < dim; ++i) s += x[i] * x[i];
  return std::sqrt(s);
}

// annulus branch radii map f(r) = c0 + c1 r
inline void affine_coeffs(const BlowupMap& m, double& c0, double& c1) {
  c0 = (m.R1 - m.rho) / (m.R2 - m.rho) * m.R2;
  c1 = (m.R2 - m.R1) / (m.R2 - m.rho);
}

}  // namespace detail

inline Point blowup_forward(const BlowupMap& m, const Point& x) {
  m.validate();
  double r = detail::norm(x, m.dimension);
  Point y{0.0, 0.0, 0.0};
  if (m.direction == BlowupMap::Direction::forward) {
    if (r < m.rho) {  // core dilation
      for (int i = 0; i < m.dimension; ++i) y[i] = x[i] / m.rho;
      return y;
    }
    if (r == 0.0) throw domain_error("origin is not in the annulus branch");
    double c0, c1;
    detail::affine_coeffs(m, c0, c1);
    double scale = (c0 + c1 * r) / r;
    for (int i = 0; i < m.dimension; ++i) y[i] = scale * x[i];
    return y;
  }
  // inverse: |y| >= R1 -> affine inverse, else core inverse
  if (r < m.R1) {
    for (int i = 0; i < m.dimension; ++i) y[i] = x[i] * m.rho;
    return y;
  }
  if (r == 0.0) throw domain_error("origin is not in the annulus branch");
  double c0, c1;
  detail::affine_coeffs(m, c0, c1);
  double rx = (r - c0) / c1;
  double scale = rx / r;
  for (int i = 0; i < m.dimension; ++i) y[i] = scale * x[i];
  return y;
}

inline Jacobian blowup_jacobian(const BlowupMap& m, const Point& x) {
  m.validate();
  int dim = m.dimension;
  double r = detail::norm(x, dim);
  bool forward = m.direction == BlowupMap::Direction::forward;
  double boundary = forward ? m.rho : m.R1;
  if (std::abs(r - boundary) < 1e-12)
    throw domain_error("point is within 1e-12 of the branch boundary");
  double fr, fpr;  // f(r) and f'(r) of the radial map
  if (forward) {
    if (r < m.rho) {
      fr = r / m.rho;
      fpr = 1.0 / m.rho;
    } else {
      if (r == 0.0) throw domain_error("origin is not in the annulus branch");
      double c0, c1;
      detail::affine_coeffs(m, c0, c1);
      fr = c0 + c1 * r;
      fpr = c1;
    }
  } else {
    if (r < m.R1) {
      fr = r * m.rho;
      fpr = m.rho;
    } else {
      if (r == 0.0) throw domain_error("origin is not in the annulus branch");
      double c0, c1;
      detail::affine_coeffs(m, c0, c1);
      fr = (r - c0) / c1;
      fpr = 1.0 / c1;
    }
  }
  Jacobian jac;
  jac.dimension = dim;
  double tang = (r == 0.0) ? fpr : fr / r;
  // M = f'(r) xhat xhat^T + (f(r)/r)(I - xhat xhat^T)
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) {
      double xij = (r == 0.0) ? 0.0 : x[i] * x[j] / (r * r);
      jac.M[i][j] = (fpr - tang) * xij + (i == j ? tang : 0.0);
    }
  jac.det = fpr * std::pow(tang, dim - 1);
  if (!(jac.det > 0.0)) throw orientation_error("non-positive Jacobian");
  return jac;
}

// ---------------------------------------------------------------------------
// Push-forward of media: F_* sigma = M sigma M^T / J, F_* q = q / J.

struct SymmetricTensor {
  int dimension = 2;
  std::array<std::array<double, 3>, 3> a{};

  static SymmetricTensor scaled_identity(int dim, double s) {
    SymmetricTensor t;
    t.dimension = dim;
    for (int i = 0; i < dim; ++i) t.a[i][i] = s;
    return t;
  }
};

inline std::pair<SymmetricTensor, cd> push_forward(const SymmetricTensor& sigma,
                                                   cd q, const Jacobian& jac) {
  if (!(jac.det > 0.0))
    throw orientation_error("push-forward requires an orientation-preserving "
                            "map (J > 0)");
  int dim = sigma.dimension;
  if (jac.dimension != dim)
    throw invalid_input_error("dimension mismatch in push-forward");
  for (int i = 0; i < dim; ++i)
    for (int j = i + 1; j < dim; ++j)
      if (std::abs(sigma.a[i][j] - sigma.a[j][i]) >
          1e-12 * (std::abs(sigma.a[i][j]) + 1.0))
        throw invalid_input_error("sigma must be symmetric");
  SymmetricTensor out;
  out.dimension = dim;
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) {
      double s = 0.0;
      for (int k = 0; k < dim; ++k)
        for (int l = 0; l < dim; ++l)
          s += jac.M[i][k] * sigma.a[k][l] * jac.M[j][l];
      out.a[i][j] = s / jac.det;
    }
  return {out, q / jac.det};
}

// ---------------------------------------------------------------------------
// Cloak assembly.

struct RegionConstants {
  double inner = 0.0, outer = 0.0;
  cd sigma;  // scalar multiple of the identity
  cd q;
  std::string label;
};

struct PhysicalSample {
  double r = 0.0;
  double sigma_rad = 0.0, sigma_tan = 0.0;
  cd q;
  std::string region;
};

struct CloakAssembly {
  CloakConfig config;
  double R1 = 1.0;
  DerivedParams derived;
  std::vector<RegionConstants> virtual_regions;
  std::vector<PhysicalSample> physical;
};

inline CloakAssembly cloak_assembly(const CloakConfig& c, double R1,
                                    int grid_points = 100) {
  c.validate();
  if (!(c.rho < R1 && R1 < c.R))
    throw invalid_input_error("need rho < R1 < R");
  if (grid_points < 1) throw invalid_input_error("empty sampling grid");
  CloakAssembly a;
  a.config = c;
  a.R1 = R1;
  a.derived = derive(c);
  double N = c.dimension;

  a.virtual_regions = {
      {c.rho, c.R, cd(1.0, 0.0), cd(1.0, 0.0), "exterior"},
      {c.rho / 2.0, c.rho, cd(a.derived.sigma_l, 0.0), a.derived.q_l,
       "lining"},
      {0.0, c.rho / 2.0, cd(a.derived.sigma_a, 0.0), cd(a.derived.q_a, 0.0),
       "content"},
  };

  // Physical description: content and lining are images of the virtual core
  // under the dilation x -> (R1/rho) x; the cloak shell is the push-forward
  // of free space under the annulus branch.
  double cdil = R1 / c.rho;
  double sig_l_phys = a.derived.sigma_l * std::pow(cdil, 2.0 - N);
  cd q_l_phys = a.derived.q_l * std::pow(cdil, -N);
  BlowupMap map{c.dimension, c.rho, R1, c.R, BlowupMap::Direction::forward};
  for (int i = 0; i < grid_points; ++i) {
    double r = c.R * (i + 0.5) / grid_points;
    PhysicalSample s;
    s.r = r;
    if (r <= R1 / 2.0) {
      s.sigma_rad = s.sigma_tan = c.sigma_a_prime;
      s.q = cd(c.q_a_prime, 0.0);
      s.region = "content";
    } else if (r <= R1) {
      s.sigma_rad = s.sigma_tan = sig_l_phys;
      s.q = q_l_phys;
      s.region = "lining";
    } else {
      // pull the physical radius back through the annulus branch
      BlowupMap inv = map;
      inv.direction = BlowupMap::Direction::inverse;
      Point y{r, 0.0, 0.0};
      Point x = blowup_forward(inv, y);
      Jacobian jac = blowup_jacobian(map, x);
      auto [st, qq] =
          push_forward(SymmetricTensor::scaled_identity(c.dimension, 1.0),
                       cd(1.0, 0.0), jac);
      s.sigma_rad = st.a[0][0];  // x lies on the first axis
      s.sigma_tan = st.a[1][1];
      s.q = qq;
      s.region = "cloak";
    }
    a.physical.push_back(std::move(s));
  }
  return a;
}

// CSV export of the physical radial profile.
inline void material_map_export(const CloakAssembly& a, std::ostream& os) {
  os << "r,sigma_rad,sigma_tan,q_re,q_im,region\n";
  for (auto& s : a.physical) {
    os << format_double(s.r) << ',' << format_double(s.sigma_rad) << ','
       << format_double(s.sigma_tan) << ',' << format_double(s.q.real()) << ','
       << format_double(s.q.imag()) << ',' << s.region << '\n';
  }
}

}  // namespace cloak::material
