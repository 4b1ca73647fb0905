#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "mplab/mp_analytics.hpp"

using namespace mplab;

namespace {

// Narayana form of the MP moments: E eta^k = sigma^{2k} sum_r c^{r+1}/(r+1) C(k,r) C(k-1,r).
double narayana_moment(int k, double s2, double c) {
  auto binom = [](int n, int r) { return std::tgamma(n + 1.0) / (std::tgamma(r + 1.0) * std::tgamma(n - r + 1.0)); };
  double s = 0.0;
  for (int r = 0; r < k; ++r) s += std::pow(c, r + 1) / (r + 1) * binom(k, r) * binom(k - 1, r);
  return std::pow(s2, k) * s;
}

double block_max_diff(const Block2& a, const Block2& b) {
  double d = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) d = std::max(d, std::abs(a[i][j] - b[i][j]));
  return d;
}

}  // namespace

TEST(MpLaw, Edges) {
  const MpParams p(1.0, 2.0);
  EXPECT_NEAR(p.u_plus(), 5.828427124746190, 1e-12);
  EXPECT_NEAR(p.u_minus(), 0.171572875253810, 1e-12);
  EXPECT_THROW(MpParams(0.0, 1.0), std::invalid_argument);
  EXPECT_THROW(MpParams(1.0, -1.0), std::invalid_argument);
}

TEST(MpLaw, DensityValues) {
  const MpParams p(1.0, 1.0);
  EXPECT_NEAR(mp_density(2.0, p), 1.0 / (2.0 * std::numbers::pi), 1e-15);
  EXPECT_EQ(mp_density(p.u_plus() + 1.0, p), 0.0);
  EXPECT_EQ(mp_density(-0.5, p), 0.0);
}

TEST(MpLaw, AtomWeight) {
  EXPECT_EQ(mp_atom_weight({1.0, 0.5}), 0.5);
  EXPECT_EQ(mp_atom_weight({1.0, 1.0}), 0.0);
  EXPECT_EQ(mp_atom_weight({1.0, 2.0}), 0.0);
}

TEST(MpLaw, NormalizationIncludingAtom) {
  for (double c : {0.25, 0.5, 1.0, 2.0, 4.0})
    for (double s2 : {0.5, 1.0, 1.3}) {
      const MpParams p(s2, c);
      EXPECT_NEAR(mp_integrate([](double) { return 1.0; }, p), 1.0, 1e-10) << "c=" << c;
    }
}

TEST(MpLaw, MomentsMatchNarayana) {
  for (double c : {0.25, 0.5, 1.0, 2.0, 4.0}) {
    const MpParams p(1.3, c);
    for (int k = 1; k <= 4; ++k) {
      const double quad = mp_integrate([&](double x) { return std::pow(x, k); }, p);
      EXPECT_NEAR(quad, narayana_moment(k, 1.3, c), 1e-9 * narayana_moment(k, 1.3, c)) << k;
      EXPECT_NEAR(mp_moment(k, p), narayana_moment(k, 1.3, c), 1e-12 * narayana_moment(k, 1.3, c)) << k;
    }
    EXPECT_EQ(mp_expect(TestFunction::identity(), p), c * 1.3);
  }
  const MpParams unit(1.0, 1.0);
  EXPECT_EQ(mp_expect(TestFunction::polynomial({0, 0, 1}), unit), 2.0);
  EXPECT_EQ(mp_expect(TestFunction::polynomial({0, 0, 0, 1}), unit), 5.0);
  EXPECT_EQ(mp_expect(TestFunction::constant(1.0), unit), 1.0);
}

TEST(MpLaw, CdfAgainstReference) {
  EXPECT_NEAR(mp_cdf(2.0, {1.0, 2.0}), 0.57600421510386856, 1e-9);
  EXPECT_NEAR(mp_cdf(0.5, {1.0, 0.5}), 0.65915494309189534, 1e-9);
  EXPECT_NEAR(mp_cdf(2.0, {1.3, 1.0}), 0.73559398501814796, 1e-9);
  EXPECT_EQ(mp_cdf(-1.0, {1.0, 0.5}), 0.0);
  EXPECT_NEAR(mp_cdf(100.0, {1.0, 0.5}), 1.0, 1e-10);
}

TEST(Stieltjes, ClosedFormValues) {
  const MpParams p(1.0, 1.0);
  const cplx g = stieltjes_g({-1.0, 0.0}, p);
  EXPECT_NEAR(g.real(), (1.0 - std::sqrt(5.0)) / 2.0, 1e-15);
  EXPECT_NEAR(g.imag(), 0.0, 1e-15);
  EXPECT_NEAR(stieltjes_g({5.0, 0.0}, p).real(), 0.276393202250021, 1e-14);
  EXPECT_THROW(stieltjes_g({2.0, 0.0}, p), DomainError);
}

TEST(Stieltjes, AgreesWithQuadrature) {
  for (double c : {0.5, 1.0, 2.0}) {
    const MpParams p(1.3, c);
    for (cplx z : {cplx(-1.0, 0.0), cplx(1.0, 0.5), cplx(3.0, -2.0), cplx(p.u_plus() + 0.5, 0.0)}) {
      const double re = mp_integrate([&](double x) { return (1.0 / (z - x)).real(); }, p);
      const double im = mp_integrate([&](double x) { return (1.0 / (z - x)).imag(); }, p);
      const cplx g = stieltjes_g(z, p);
      EXPECT_NEAR(g.real(), re, 1e-10);
      EXPECT_NEAR(g.imag(), im, 1e-10);
    }
  }
}

TEST(Stieltjes, DecayAtInfinity) {
  const MpParams p(1.0, 1.0);
  for (cplx z : {cplx(1e6, 0.0), cplx(0.0, 1e6), cplx(-1e6, 1.0)}) {
    const cplx g = stieltjes_g(z, p);
    EXPECT_LT(std::abs(g - 1.0 / z) / std::abs(1.0 / z), 1e-5);
  }
}

TEST(Stieltjes, QuadraticResidualAndBoundOnGrid) {
  for (double c : {0.25, 0.5, 1.0, 2.0, 4.0}) {
    const MpParams p(1.0, c);
    for (double x = -3.0; x <= 10.0; x += 0.5)
      for (double y : {-2.0, -0.1, 0.01, 0.1, 1.0, 5.0}) {
        const cplx z(x, y);
        const cplx g = stieltjes_g(z, p);
        EXPECT_LT(stieltjes_residual(z, g, p), 1e-12) << z;
        EXPECT_LE(std::abs(g), 1.0 / std::abs(y) * (1 + 1e-12)) << z;
        EXPECT_LT(g.imag() * y, 0.0) << z;  // maps the upper half-plane to the lower
      }
  }
  const MpParams unit(1.0, 1.0);
  EXPECT_LE(std::abs(stieltjes_g({0.0, 1.0}, unit)), 1.0);
}

TEST(Stieltjes, RatioInversionRelation) {
  for (double c : {0.5, 2.0, 3.0}) {
    const MpParams p(1.0, c);
    const cplx z(3.0, 1.0);
    const cplx d = stieltjes_g(z, p.inverse_ratio()) - (stieltjes_g(c * z, p) + (1.0 - 1.0 / c) / z);
    EXPECT_LT(std::abs(d), 1e-12);
  }
}

TEST(CltFunctionals, Omega2) {
  const MpParams unit(1.0, 1.0);
  EXPECT_EQ(omega2(TestFunction::constant(3.0), unit), 0.0);
  for (double c : {0.5, 1.0, 2.0})
    EXPECT_NEAR(omega2(TestFunction::identity(), {1.3, c}), c * 1.3 * 1.3, 1e-10);
  EXPECT_NEAR(omega2(TestFunction::cauchy_re({5.0, 0.0}), unit), 0.013049516849970557, 1e-12);
  EXPECT_NEAR(omega2(TestFunction::gaussian_bump(2.0, 0.5), {1.0, 2.0}), 0.11558588248498696, 1e-10);
  EXPECT_NEAR(omega2(TestFunction::cauchy_im({2.0, 1.0}), {1.3, 0.5}), 0.061945899451699431, 1e-10);
}

TEST(CltFunctionals, Omega2ConvergesUnderRefinement) {
  QuadOptions coarse;
  coarse.abs_tol = 1e-9;
  QuadOptions fine;
  fine.abs_tol = 1e-13;
  const auto f = TestFunction::cauchy_re({5.0, 0.0});
  EXPECT_NEAR(omega2(f, {1.0, 1.0}, coarse), omega2(f, {1.0, 1.0}, fine), 1e-10);
}

TEST(CltFunctionals, Rho) {
  const MpParams unit(1.0, 1.0);
  EXPECT_NEAR(rho(TestFunction::constant(2.0), unit), 0.0, 1e-12);
  for (double c : {0.5, 1.0, 2.0}) EXPECT_NEAR(rho(TestFunction::identity(), {1.3, c}), std::sqrt(c) * 1.3, 1e-10);
  EXPECT_NEAR(rho(TestFunction::polynomial({0, 0, 1}), unit), 3.0, 1e-10);
  EXPECT_NEAR(rho(TestFunction::cauchy_re({5.0, 0.0}), unit), 0.10557280900008412, 1e-12);
  EXPECT_NEAR(rho(TestFunction::gaussian_bump(2.0, 0.5), {1.0, 2.0}), -0.018013479136415985, 1e-10);
  EXPECT_NEAR(rho(TestFunction::cauchy_im({2.0, 1.0}), {1.3, 0.5}), -0.19538352151812655, 1e-10);
}

TEST(CltFunctionals, FirstOrthonormalPolynomial) {
  for (double c : {0.25, 0.5, 1.0, 2.0, 4.0}) {
    const MpParams p(1.3, c);
    const double m0 = mp_integrate([&](double x) { return mp_first_orthonormal(x, p); }, p);
    const double m2 = mp_integrate([&](double x) { return std::pow(mp_first_orthonormal(x, p), 2); }, p);
    EXPECT_NEAR(m0, 0.0, 1e-10);
    EXPECT_NEAR(m2, 1.0, 1e-10);
  }
}

TEST(PhiKernel, LargeArgumentsTendToOne) {
  const cplx z(0.0, 1e6);
  const auto k = phi_kernel(z, z, {1.0, 1.0});
  EXPECT_NEAR(k.value.phi.real(), 1.0, 1e-5);
  EXPECT_NEAR(k.value.phi.imag(), 0.0, 1e-5);
}

TEST(PhiKernel, RoutesAgree) {
  for (double c : {0.5, 1.0, 2.0}) {
    const auto k = phi_kernel({0.0, 2.0}, {1.0, 1.0}, {1.0, c});
    EXPECT_LT(k.discrepancy, 1e-9) << c;
  }
}

TEST(EntryPrediction, LinearCases) {
  const auto f = TestFunction::identity();
  for (double c : {0.5, 1.0, 2.0}) {
    const MpParams p(1.3, c);
    const double s4 = 1.3 * 1.3;
    EXPECT_NEAR(predict_entry_clt(f, p, Field::real, 0.0, true).variance, 2 * c * s4, 1e-9);
    EXPECT_NEAR(predict_entry_clt(f, p, Field::real, -2 * s4, true).variance, 0.0, 1e-9);
    EXPECT_NEAR(predict_entry_clt(f, p, Field::real, 6 * s4, false).variance, c * s4, 1e-9);
    // Exact finite-N value for exponential entries: c (m4 - sigma^4) = 8 c sigma^4.
    EXPECT_NEAR(predict_entry_clt(f, p, Field::real, 6 * s4, true).variance, 8 * c * s4, 1e-9);
    const auto cx = predict_entry_clt(f, p, Field::complex, 0.0, false);
    EXPECT_NEAR(cx.re_variance, c * s4 / 2, 1e-9);
    EXPECT_NEAR(cx.im_variance, c * s4 / 2, 1e-9);
    EXPECT_NEAR(predict_entry_clt(f, p, Field::complex, 0.0, true).variance, c * s4, 1e-9);
  }
}

TEST(EntryPrediction, ConstantHasNoFluctuation) {
  const auto pr = predict_entry_clt(TestFunction::constant(1.0), {1.0, 1.0}, Field::real, 3.0, true);
  EXPECT_EQ(pr.variance, 0.0);
}

TEST(ResolventCov, OffDiagonalAgainstReference) {
  const cplx z(0.0, 2.0), w(1.0, 1.0);
  const struct {
    double s2, c;
    Block2 ref;
  } cases[] = {
      {1.0, 1.0, {{{0.03529180913015742, 0.0013908112545792611}, {-0.045865048811653623, 0.013683188190607196}}}},
      {1.0, 2.0, {{{0.017610610853219476, -0.0042561717258544744}, {-0.038294345642314876, 0.042571010194293176}}}},
      {1.3, 0.5, {{{0.036620412431465215, 0.0061682554097503263}, {-0.03963448087157587, 0.0044405800127185487}}}},
  };
  for (const auto& k : cases) {
    const auto r = predict_resolvent_field_cov(z, w, {k.s2, k.c}, Field::real, 0.0, 0, 1);
    EXPECT_LT(block_max_diff(r.block, k.ref), 1e-10) << k.c;
    EXPECT_LT(r.discrepancy, 1e-8) << k.c;
  }
}

TEST(ResolventCov, DiagonalRademacherAgainstReference) {
  const Block2 ref{{{0.013918503185386398, 0.019427342108460673}, {-0.0036036796581960038, 0.0014787091489424241}}};
  const auto r = predict_resolvent_field_cov({0.0, 2.0}, {1.0, 1.0}, {1.0, 1.0}, Field::real, -2.0, 0, 0);
  EXPECT_LT(block_max_diff(r.block, ref), 1e-10);
}

TEST(ResolventCov, DiagonalIsTwiceOffDiagonalWithoutKappa4) {
  for (double c : {0.5, 1.0, 2.0}) {
    const MpParams p(1.0, c);
    const auto d = predict_resolvent_field_cov({0.5, 1.5}, {2.0, 0.7}, p, Field::real, 0.0, 0, 0);
    const auto o = predict_resolvent_field_cov({0.5, 1.5}, {2.0, 0.7}, p, Field::real, 0.0, 0, 1);
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) EXPECT_NEAR(d.block[a][b], 2 * o.block[a][b], 1e-12);
  }
}

TEST(ResolventCov, ConjugateReflection) {
  // Psi_ij(conj z) = conj Psi_ji(z), which is conj Psi_ij(z) for real
  // symmetric matrices and on the diagonal: the Im row flips sign.
  const MpParams p(1.0, 2.0);
  const cplx z(0.5, 1.5), w(2.0, 0.7);
  for (Field fd : {Field::real, Field::complex})
    for (int j : {0, 1}) {
      if (fd == Field::complex && j == 1) continue;
      const auto a = predict_resolvent_field_cov(z, w, p, fd, 1.0, 0, j);
      const auto b = predict_resolvent_field_cov(std::conj(z), w, p, fd, 1.0, 0, j);
      for (int col = 0; col < 2; ++col) {
        EXPECT_NEAR(b.block[0][col], a.block[0][col], 1e-12);
        EXPECT_NEAR(b.block[1][col], -a.block[1][col], 1e-12);
      }
    }
}

TEST(ResolventCov, AllPathsAgree) {
  for (double c : {0.5, 1.0, 2.0})
    for (Field fd : {Field::real, Field::complex})
      for (int j : {0, 1}) {
        const auto r = predict_resolvent_field_cov({0.0, 2.0}, {1.0, 1.0}, {1.3, c}, fd, -0.7, 0, j);
        EXPECT_LT(r.discrepancy, 1e-8);
      }
}

TEST(ResolventCov, RejectsPointsOnSupport) {
  EXPECT_THROW(predict_resolvent_field_cov({1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}, Field::real, 0, 0, 1), DomainError);
}
