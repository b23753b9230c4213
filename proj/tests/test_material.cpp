#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <sstream>

#include "cloak/material.hpp"

using namespace cloak;
using namespace cloak::material;
using cd = std::complex<double>;

namespace {

CloakConfig base2d() {
  CloakConfig c;
  c.dimension = 2;
  c.rho = 0.05;
  c.delta = 1.0;
  c.omega = 2.0;
  c.R = 1.0;
  return c;
}

Point fd_column(const BlowupMap& m, const Point& x, int j, double h) {
  Point xp = x, xm = x;
  xp[j] += h;
  xm[j] -= h;
  Point yp = blowup_forward(m, xp), ym = blowup_forward(m, xm);
  return {(yp[0] - ym[0]) / (2 * h), (yp[1] - ym[1]) / (2 * h),
          (yp[2] - ym[2]) / (2 * h)};
}

}  // namespace

TEST_CASE("derived parameters match the closed forms") {
  auto c = base2d();
  auto p = derive(c);
  CHECK(p.sigma_l == Catch::Approx(std::pow(0.05, 3.0)).epsilon(1e-14));
  CHECK(p.q_l == cd(1.0, 1.0));
  CHECK(p.sigma_a == 1.0);
  CHECK(p.q_a == Catch::Approx(1.0 / (0.05 * 0.05)).epsilon(1e-14));
  CHECK(p.omega_l.imag() > 0.0);

  // omega_l = omega 2^{1/4} e^{i pi/8} rho^{-1-delta/2} for alpha=beta=gamma=1
  cd want = c.omega * std::pow(2.0, 0.25) * std::exp(cd(0.0, M_PI / 8.0)) *
            std::pow(c.rho, -1.0 - c.delta / 2.0);
  CHECK(std::abs(p.omega_l - want) <= 1e-12 * std::abs(want));

  // A = sqrt(sigma'_a q'_a) rho^{-2-delta/2} / (2^{1/4} e^{i pi/8})
  cd wa = std::sqrt(c.sigma_a_prime * c.q_a_prime) *
          std::pow(c.rho, -2.0 - c.delta / 2.0) / p.branch_constant;
  CHECK(std::abs(p.contrast - wa) <= 1e-12 * std::abs(p.contrast));

  // omega_a = omega sqrt(q_a / sigma_a)
  CHECK(p.omega_a == Catch::Approx(c.omega / c.rho).epsilon(1e-14));

  // 3D content pull-back, both conventions
  CloakConfig c3 = c;
  c3.dimension = 3;
  auto p3 = derive(c3);
  CHECK(p3.q_a == Catch::Approx(std::pow(0.05, -3.0)).epsilon(1e-14));
  CHECK(p3.sigma_a == Catch::Approx(1.0 / 0.05).epsilon(1e-14));
  c3.paper_literal_3d = true;
  auto p3l = derive(c3);
  CHECK(p3l.q_a == Catch::Approx(std::pow(0.05, -2.0)).epsilon(1e-14));
}

TEST_CASE("config validation") {
  auto c = base2d();
  CHECK_NOTHROW(c.validate());

  auto bad = c;
  bad.rho = 0.3;  // >= R/4
  CHECK_THROWS_AS(bad.validate(), invalid_input_error);
  bad = c;
  bad.beta = -1.0;
  CHECK_THROWS_AS(bad.validate(), invalid_input_error);
  bad = c;
  bad.dimension = 4;
  CHECK_THROWS_AS(bad.validate(), invalid_input_error);

  // omega R at a zero of J'_0 (= first zero of J_1): Neumann resonance
  bad = c;
  bad.R = 1.0;
  bad.omega = 3.8317059702075123;
  CHECK_THROWS_AS(bad.validate(), near_resonance_error);
  // and slightly away it passes
  bad.omega = 3.84;
  CHECK_NOTHROW(bad.validate());
}

TEST_CASE("blow-up map boundary behavior") {
  BlowupMap m{2, 0.1, 1.0, 2.0, BlowupMap::Direction::forward};
  Point x{0.1, 0.0, 0.0};
  auto y = blowup_forward(m, x);
  CHECK(std::hypot(y[0], y[1]) == Catch::Approx(1.0).epsilon(1e-14));

  x = {0.0, 2.0, 0.0};
  y = blowup_forward(m, x);
  CHECK(std::hypot(y[0], y[1]) == Catch::Approx(2.0).epsilon(1e-14));

  x = {std::sqrt(0.5), std::sqrt(0.5), 0.0};  // |x| = 1
  y = blowup_forward(m, x);
  CHECK(std::hypot(y[0], y[1]) == Catch::Approx(2.8 / 1.9).epsilon(1e-14));

  // inverse round trip through both branches
  BlowupMap inv = m;
  inv.direction = BlowupMap::Direction::inverse;
  for (double r : {0.05, 0.3, 1.2, 1.9}) {
    Point p{r * 0.6, r * 0.8, 0.0};
    auto fwd = blowup_forward(m, p);
    auto back = blowup_forward(inv, fwd);
    CHECK(std::abs(back[0] - p[0]) < 1e-13);
    CHECK(std::abs(back[1] - p[1]) < 1e-13);
  }
}

TEST_CASE("jacobian branches and finite-difference oracle") {
  BlowupMap m{3, 0.1, 1.0, 2.0, BlowupMap::Direction::forward};
  Point core{0.02, 0.01, -0.03};
  auto j = blowup_jacobian(m, core);
  CHECK(j.det == Catch::Approx(std::pow(0.1, -3.0)).epsilon(1e-12));
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k)
      CHECK(j.M[i][k] == Catch::Approx(i == k ? 10.0 : 0.0).margin(1e-12));

  // annulus eigenvalues: radial (R2-R1)/(R2-rho), tangential |F(x)|/|x|
  Point x{0.5, 0.4, -0.2};
  double r = std::sqrt(0.5 * 0.5 + 0.4 * 0.4 + 0.2 * 0.2);
  j = blowup_jacobian(m, x);
  double c1 = (2.0 - 1.0) / (2.0 - 0.1);
  auto y = blowup_forward(m, x);
  double fr = std::sqrt(y[0] * y[0] + y[1] * y[1] + y[2] * y[2]);
  // radial eigenvalue: xhat^T M xhat
  double rad = 0.0, frob = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) rad += x[i] / r * j.M[i][k] * x[k] / r;
  CHECK(rad == Catch::Approx(c1).epsilon(1e-12));
  CHECK(j.det == Catch::Approx(c1 * std::pow(fr / r, 2.0)).epsilon(1e-12));

  // full matrix vs central differences, both dimensions and branches
  for (auto pt : {Point{0.03, -0.05, 0.01}, Point{0.9, 0.3, -0.5}}) {
    auto jac = blowup_jacobian(m, pt);
    for (int col = 0; col < 3; ++col) {
      auto fd = fd_column(m, pt, col, 1e-6);
      for (int row = 0; row < 3; ++row) {
        INFO("entry " << row << "," << col);
        CHECK(std::abs(jac.M[row][col] - fd[row]) <=
              1e-6 * std::max(1.0, std::abs(fd[row])));
      }
    }
  }

  // branch-boundary ambiguity
  Point amb{0.1, 0.0, 0.0};
  CHECK_THROWS_AS(blowup_jacobian(m, amb), cloak::domain_error);
}

TEST_CASE("push-forward algebra") {
  // identity map
  Jacobian id;
  id.dimension = 2;
  id.M[0][0] = id.M[1][1] = 1.0;
  id.det = 1.0;
  auto sig = SymmetricTensor::scaled_identity(2, 3.5);
  auto [s1, q1] = push_forward(sig, cd(2.0, -1.0), id);
  CHECK(s1.a[0][0] == 3.5);
  CHECK(s1.a[1][1] == 3.5);
  CHECK(q1 == cd(2.0, -1.0));

  // dilation x -> x/rho in 2D and 3D
  for (int dim : {2, 3}) {
    double rho = 0.05;
    Jacobian dil;
    dil.dimension = dim;
    for (int i = 0; i < dim; ++i) dil.M[i][i] = 1.0 / rho;
    dil.det = std::pow(rho, -double(dim));
    auto [sd, qd] = push_forward(SymmetricTensor::scaled_identity(dim, 2.0),
                                 cd(3.0, 0.0), dil);
    CHECK(sd.a[0][0] ==
          Catch::Approx(2.0 * std::pow(rho, dim - 2.0)).epsilon(1e-14));
    CHECK(qd.real() == Catch::Approx(3.0 * std::pow(rho, double(dim)))
                           .epsilon(1e-14));
  }

  // generic linear map with sigma = I: eigenvalues of M M^T / J against a
  // closed-form 2x2 symmetric eigen-decomposition
  Jacobian lin;
  lin.dimension = 2;
  lin.M[0][0] = 1.3;
  lin.M[0][1] = 0.4;
  lin.M[1][0] = -0.2;
  lin.M[1][1] = 0.9;
  lin.det = 1.3 * 0.9 - 0.4 * (-0.2);
  auto [se, qe] =
      push_forward(SymmetricTensor::scaled_identity(2, 1.0), cd(1.0, 0.0), lin);
  double a = se.a[0][0], b = se.a[0][1], d = se.a[1][1];
  CHECK(se.a[1][0] == Catch::Approx(b).epsilon(1e-14));
  double mean = (a + d) / 2.0, disc = std::sqrt((a - d) * (a - d) / 4 + b * b);
  // oracle: eigenvalues of M M^T / J computed independently
  double g00 = (1.3 * 1.3 + 0.4 * 0.4) / lin.det;
  double g01 = (1.3 * (-0.2) + 0.4 * 0.9) / lin.det;
  double g11 = (0.2 * 0.2 + 0.9 * 0.9) / lin.det;
  double omean = (g00 + g11) / 2.0;
  double odisc = std::sqrt((g00 - g11) * (g00 - g11) / 4 + g01 * g01);
  CHECK(mean + disc == Catch::Approx(omean + odisc).epsilon(1e-10));
  CHECK(mean - disc == Catch::Approx(omean - odisc).epsilon(1e-10));

  // round trip with the inverse jacobian
  Jacobian invj;
  invj.dimension = 2;
  invj.M[0][0] = lin.M[1][1] / lin.det;
  invj.M[0][1] = -lin.M[0][1] / lin.det;
  invj.M[1][0] = -lin.M[1][0] / lin.det;
  invj.M[1][1] = lin.M[0][0] / lin.det;
  invj.det = 1.0 / lin.det;
  SymmetricTensor arb;
  arb.dimension = 2;
  arb.a[0][0] = 2.0;
  arb.a[0][1] = arb.a[1][0] = 0.3;
  arb.a[1][1] = 0.8;
  auto [mid, qm] = push_forward(arb, cd(0.5, 0.25), lin);
  auto [back, qb] = push_forward(mid, qm, invj);
  for (int i = 0; i < 2; ++i)
    for (int k = 0; k < 2; ++k)
      CHECK(back.a[i][k] == Catch::Approx(arb.a[i][k]).margin(1e-12));
  CHECK(std::abs(qb - cd(0.5, 0.25)) < 1e-12);

  // errors
  Jacobian flipped = lin;
  flipped.det = -1.0;
  CHECK_THROWS_AS(push_forward(arb, cd(1.0, 0.0), flipped),
                  orientation_error);
  SymmetricTensor nonsym = arb;
  nonsym.a[0][1] = 99.0;
  CHECK_THROWS_AS(push_forward(nonsym, cd(1.0, 0.0), lin),
                  invalid_input_error);
}

TEST_CASE("cloak assembly: virtual constants and physical profile") {
  auto c = base2d();
  auto a = cloak_assembly(c, 0.5, 100);

  REQUIRE(a.virtual_regions.size() == 3);
  CHECK(a.virtual_regions[1].label == "lining");
  CHECK(a.virtual_regions[1].sigma ==
        cd(c.gamma * std::pow(c.rho, 2.0 + c.delta), 0.0));
  CHECK(a.virtual_regions[1].q == cd(c.alpha, c.beta));
  CHECK(a.virtual_regions[0].sigma == cd(1.0, 0.0));

  CHECK(a.physical.size() == 100);

  // the blow-up map fixes the outer boundary pointwise
  BlowupMap m{2, c.rho, 0.5, c.R, BlowupMap::Direction::forward};
  Point edge{c.R, 0.0, 0.0};
  auto y = blowup_forward(m, edge);
  CHECK(std::hypot(y[0], y[1]) == Catch::Approx(c.R).epsilon(1e-14));

  // shell samples: cross-check against push_forward with a finite-difference
  // jacobian of the forward map; 2D shell also satisfies rad*tan = 1
  for (auto& s : a.physical) {
    if (s.region != "cloak") continue;
    CHECK(s.sigma_rad * s.sigma_tan == Catch::Approx(1.0).epsilon(1e-10));
    BlowupMap inv = m;
    inv.direction = BlowupMap::Direction::inverse;
    Point x = blowup_forward(inv, {s.r, 0.0, 0.0});
    Jacobian fd;
    fd.dimension = 2;
    for (int col = 0; col < 2; ++col) {
      auto colv = fd_column(m, x, col, 1e-7);
      fd.M[0][col] = colv[0];
      fd.M[1][col] = colv[1];
    }
    fd.det = fd.M[0][0] * fd.M[1][1] - fd.M[0][1] * fd.M[1][0];
    auto [st, q] = push_forward(SymmetricTensor::scaled_identity(2, 1.0),
                                cd(1.0, 0.0), fd);
    CHECK(std::abs(st.a[0][0] - s.sigma_rad) < 1e-6 * s.sigma_rad);
    CHECK(std::abs(st.a[1][1] - s.sigma_tan) < 1e-6 * s.sigma_tan);
    CHECK(std::abs(q - s.q) < 1e-6 * std::abs(s.q));
  }

  // lining rows carry positive loss; content rows are the target medium
  bool saw_lining = false, saw_content = false;
  for (auto& s : a.physical) {
    if (s.region == "lining") {
      saw_lining = true;
      CHECK(s.q.imag() > 0.0);
    }
    if (s.region == "content") {
      saw_content = true;
      CHECK(s.sigma_rad == c.sigma_a_prime);
      CHECK(s.q == cd(c.q_a_prime, 0.0));
    }
  }
  CHECK(saw_lining);
  CHECK(saw_content);

  CHECK_THROWS_AS(cloak_assembly(c, c.rho / 2.0, 10), invalid_input_error);
}

TEST_CASE("material map CSV export") {
  auto c = base2d();
  auto a = cloak_assembly(c, 0.5, 40);
  std::ostringstream os;
  material_map_export(a, os);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "r,sigma_rad,sigma_tan,q_re,q_im,region");
  int rows = 0;
  std::string prev_content_row;
  while (std::getline(in, line)) {
    ++rows;
    // homogeneous regions produce constant columns after the radius
    if (line.find(",content") != std::string::npos) {
      auto tail = line.substr(line.find(','));
      if (!prev_content_row.empty()) CHECK(tail == prev_content_row);
      prev_content_row = tail;
    }
  }
  CHECK(rows == 40);
}
