#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <complex>

#include "cloak/metrics.hpp"

using cloak::material::CloakConfig;
using cloak::metrics::RateFit;
using cloak::metrics::SweepSample;
using cloak::sobolev::ModalDensity;
using cloak::sobolev::SobolevIndex;
using cd = std::complex<double>;
namespace metrics = cloak::metrics;
namespace solver = cloak::solver;

namespace {

// desk protocol used throughout: omega=1, R=2, delta=1, content (2, 3)
CloakConfig desk_config(int dim, double rho, double delta = 1.0) {
  CloakConfig c;
  c.dimension = dim;
  c.rho = rho;
  c.delta = delta;
  c.omega = 1.0;
  c.R = 2.0;
  c.sigma_a_prime = 2.0;
  c.q_a_prime = 3.0;
  return c;
}

ModalDensity unit_mode(int dim, double radius, int n, int m = 0) {
  ModalDensity d;
  d.dimension = dim;
  d.radius = radius;
  if (dim == 2)
    d.c2[n] = cd(1.0, 0.0);
  else
    d.c3[{n, m}] = cd(1.0, 0.0);
  return d;
}

}  // namespace

TEST_CASE("rate fit recovers exact power laws") {
  std::vector<SweepSample> s;
  for (double x : {0.1, 0.05, 0.02})
    s.push_back({x, 7.0 * x * x, 0, {}});
  auto f = metrics::fit_rate(s);
  CHECK(std::abs(f.slope - 2.0) < 1e-10);
  CHECK(std::abs(f.intercept - std::log10(7.0)) < 1e-10);
  CHECK(std::abs(f.r_squared - 1.0) < 1e-12);
  REQUIRE(f.points.size() == 3);
}

TEST_CASE("rate fit slope is scale invariant") {
  std::vector<SweepSample> s, s2;
  for (double x : {0.3, 0.1, 0.03, 0.01}) {
    double y = 2.5 * std::pow(x, 1.7);
    s.push_back({x, y, 0, {}});
    s2.push_back({x, 1234.5 * y, 0, {}});
  }
  auto f = metrics::fit_rate(s);
  auto g = metrics::fit_rate(s2);
  CHECK(std::abs(f.slope - g.slope) < 1e-12);
  CHECK(std::abs(g.intercept - f.intercept - std::log10(1234.5)) < 1e-10);
}

TEST_CASE("rate fit tolerates mild multiplicative noise") {
  // deterministic +-1% multiplicative perturbations on y = x^3
  const double bump[6] = {1.01, 0.99, 1.008, 0.992, 1.005, 0.995};
  std::vector<SweepSample> s;
  int i = 0;
  for (double x : {0.5, 0.2, 0.1, 0.05, 0.02, 0.01})
    s.push_back({x, std::pow(x, 3.0) * bump[i++ % 6], 0, {}});
  auto f = metrics::fit_rate(s);
  CHECK(std::abs(f.slope - 3.0) < 0.05);
  CHECK(f.r_squared > 0.999);
}

TEST_CASE("rate fit input validation") {
  std::vector<SweepSample> two = {{0.1, 1.0, 0, {}}, {0.2, 2.0, 0, {}}};
  CHECK_THROWS_AS(metrics::fit_rate(two), cloak::invalid_input_error);
  std::vector<SweepSample> zero = {
      {0.1, 1.0, 0, {}}, {0.2, 0.0, 0, {}}, {0.3, 2.0, 0, {}}};
  CHECK_THROWS_AS(metrics::fit_rate(zero), cloak::invalid_input_error);
  std::vector<SweepSample> same = {
      {0.1, 1.0, 0, {}}, {0.1, 2.0, 0, {}}, {0.1, 3.0, 0, {}}};
  CHECK_THROWS_AS(metrics::fit_rate(same), cloak::invalid_input_error);
}

TEST_CASE("trace gap vanishes without a cloak and halving rho divides it") {
  for (int dim : {2, 3}) {
    double rho = 0.01;
    CloakConfig c = desk_config(dim, rho);
    ModalDensity psi = unit_mode(dim, c.R, 0);
    CHECK(metrics::trace_gap(c, psi, /*no_cloak=*/true) < 1e-10);

    double g1 = metrics::trace_gap(c, psi);
    double g2 = metrics::trace_gap(desk_config(dim, rho / 2.0), psi);
    double ratio = g1 / g2;
    INFO("dim=" << dim << " ratio=" << ratio);
    double lo = std::pow(2.0, dim - 0.15), hi = std::pow(2.0, dim + 0.15);
    CHECK(ratio > lo);
    CHECK(ratio < hi);
  }
}

TEST_CASE("NtD operator norm dominates single-mode Rayleigh quotients") {
  for (int dim : {2, 3}) {
    CloakConfig c = desk_config(dim, 0.05);
    CHECK(metrics::ntd_diff_opnorm(c, /*no_cloak=*/true) == 0.0);
    double op = metrics::ntd_diff_opnorm(c);
    REQUIRE(op > 0.0);
    double best = 0.0;
    for (int n = 0; n <= 9; ++n) {
      ModalDensity psi = unit_mode(dim, c.R, n, dim == 3 ? 0 : 0);
      double quotient = metrics::trace_gap(c, psi) /
                        cloak::sobolev::hs_norm(psi, SobolevIndex{-0.5});
      CHECK(op >= quotient * (1.0 - 1e-12));
      best = std::max(best, quotient);
    }
    // the sup is attained on a low mode at this scale
    CHECK(op <= best * (1.0 + 1e-12));
  }
}

TEST_CASE("NtD gap rho-sweep fits the dimension as its slope") {
  for (int dim : {2, 3}) {
    std::vector<SweepSample> samples;
    for (double rho : {0.03, 0.01, 0.003, 0.001})
      samples.push_back(
          {rho, metrics::ntd_diff_opnorm(desk_config(dim, rho)), 0, {}});
    auto f = metrics::fit_rate(samples);
    INFO("dim=" << dim << " slope=" << f.slope);
    CHECK(f.slope > dim - 0.1);
    CHECK(f.slope < dim + 0.2);
    CHECK(f.r_squared > 0.999);
  }
}

TEST_CASE("conormal norm scales like rho^(1+delta/2) and dies with delta") {
  for (int dim : {2, 3}) {
    for (double delta : {1.0, 2.0}) {
      CloakConfig c = desk_config(dim, 0.01, delta);
      ModalDensity psi = metrics::default_probe(dim, c.R);
      double v1 = metrics::conormal_norm(c, psi);
      double v2 =
          metrics::conormal_norm(desk_config(dim, 0.005, delta), psi);
      double ratio = v1 / v2;
      double expo = 1.0 + delta / 2.0;
      INFO("dim=" << dim << " delta=" << delta << " ratio=" << ratio);
      CHECK(ratio > std::pow(2.0, expo - 0.1));
      CHECK(ratio < std::pow(2.0, expo + 0.1));
    }
    // fixed rho, increasing delta: strictly decreasing toward sound-hard
    CloakConfig c = desk_config(dim, 0.05);
    ModalDensity psi = metrics::default_probe(dim, c.R);
    double prev = 1e300;
    double first = 0.0, last = 0.0;
    for (double delta : {1.0, 2.0, 4.0, 8.0}) {
      c.delta = delta;
      double v = metrics::conormal_norm(c, psi);
      if (delta == 1.0) first = v;
      last = v;
      INFO("dim=" << dim << " delta=" << delta << " v=" << v);
      CHECK(v < prev);
      prev = v;
    }
    CHECK(last < 1e-2 * first);
  }
}

TEST_CASE("sound-hard gap vanishes on zero data and fits slope >= N") {
  for (int dim : {2, 3}) {
    CloakConfig c = desk_config(dim, 0.05);
    ModalDensity zero;
    zero.dimension = dim;
    zero.radius = c.R;
    CHECK(metrics::sound_hard_gap(c, zero) == 0.0);

    ModalDensity psi = metrics::default_probe(dim, c.R);
    std::vector<SweepSample> samples;
    for (double rho : {0.03, 0.01, 0.003, 0.001})
      samples.push_back(
          {rho, metrics::sound_hard_gap(desk_config(dim, rho), psi), 0, {}});
    auto f = metrics::fit_rate(samples);
    INFO("dim=" << dim << " slope=" << f.slope);
    CHECK(f.slope >= dim - 0.15);
  }
}

TEST_CASE("inclusion norms vanish on zero data and fit slope N-1") {
  for (int dim : {2, 3}) {
    solver::InclusionProblem p;
    p.omega = 1.0;
    p.tau = 0.01;
    p.r0 = 1.0;
    p.r2 = 3.0;
    p.phi.dimension = dim;
    p.phi.radius = p.tau;
    auto zeros = metrics::inclusion_gap_norms(p);
    CHECK(zeros.trace_r0 == 0.0);
    CHECK(zeros.trace_r2 == 0.0);
    CHECK(zeros.l2_shell == 0.0);

    std::vector<SweepSample> samples;
    for (double tau : {0.1, 0.03, 0.01, 0.003, 0.001}) {
      solver::InclusionProblem q = p;
      q.tau = tau;
      q.phi.radius = tau;
      if (dim == 2) {
        for (int n = -4; n <= 4; ++n)
          q.phi.c2[n] = cd(1.0 / (1.0 + n * n), 0.0);
      } else {
        for (int n = 0; n <= 3; ++n)
          for (int m = -n; m <= n; ++m)
            q.phi.c3[{n, m}] = cd(1.0 / (1.0 + n * (n + 1.0)), 0.0);
      }
      samples.push_back({tau, metrics::inclusion_trace_ratio(q), 0, {}});
    }
    auto f = metrics::fit_rate(samples);
    INFO("dim=" << dim << " slope=" << f.slope);
    CHECK(std::abs(f.slope - (dim - 1.0)) < 0.1);

    // the pointwise field decays outward even though the trace norms carry
    // the growing surface measure
    solver::InclusionProblem q = p;
    q.tau = 0.01;
    q.phi.radius = q.tau;
    if (dim == 2)
      q.phi.c2[0] = cd(1.0, 0.0);
    else
      q.phi.c3[{0, 0}] = cd(1.0, 0.0);
    auto norms = metrics::inclusion_gap_norms(q);
    CHECK(norms.trace_r0 > 0.0);
    CHECK(norms.l2_shell > 0.0);
    auto s = solver::small_inclusion_field(q);
    CHECK(std::abs(solver::field_eval(s, q.r2, 0.2, 0.4)) <
          std::abs(solver::field_eval(s, q.r0, 0.2, 0.4)));
  }
}

TEST_CASE("energy residual is tiny in the mild regime") {
  for (int dim : {2, 3}) {
    for (double rho : {0.05, 0.1}) {
      CloakConfig c = desk_config(dim, rho);
      ModalDensity psi = metrics::default_probe(dim, c.R);
      double r = metrics::energy_residual(c, psi);
      INFO("dim=" << dim << " rho=" << rho << " residual=" << r);
      CHECK(r < 1e-8);
    }
  }
}

TEST_CASE("metric input validation") {
  CloakConfig c = desk_config(2, 0.05);
  ModalDensity wrong = metrics::default_probe(3, c.R);
  CHECK_THROWS_AS(metrics::trace_gap(c, wrong), cloak::invalid_input_error);
  CHECK_THROWS_AS(metrics::conormal_norm(c, wrong),
                  cloak::invalid_input_error);
  CHECK_THROWS_AS(metrics::sound_hard_gap(c, wrong),
                  cloak::invalid_input_error);
  CHECK_THROWS_AS(metrics::default_probe(4, 1.0), cloak::invalid_input_error);
}
