#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "rankda/linalg.hpp"
#include "rankda/quadrature.hpp"
#include "rankda/special_functions.hpp"

using namespace rankda;

TEST(Quadrature, BetaFunctionAcrossShapes) {
  for (double a : {1.0, 1.5, 2.0, 7.0, 30.0, 91.0, 100.0}) {
    for (double b : {1.0, 3.0, 12.5, 47.0, 100.0}) {
      auto log_f = [&](double x) { return (a - 1) * std::log(x) + (b - 1) * std::log1p(-x); };
      const auto r = integrate_log(log_f, 0.0, 1.0);
      EXPECT_NEAR(r.log_value, log_beta(a, b), 1e-10) << a << "," << b;
    }
  }
}

TEST(Quadrature, SingularEndpoints) {
  // integral x^{-1/2} = 2 and integral x^{-0.7} = 1/0.3.
  EXPECT_NEAR(integrate_log([](double x) { return -0.5 * std::log(x); }, 0.0, 1.0).value(), 2.0, 1e-8);
  EXPECT_NEAR(integrate_log([](double x) { return -0.7 * std::log(x); }, 0.0, 1.0).value(), 1.0 / 0.3, 1e-7);
  // Increasing integrands peak on the right endpoint.
  EXPECT_NEAR(integrate_log([](double x) { return 0.5 * std::log(x); }, 0.0, 1.0).value(), 2.0 / 3, 1e-12);
}

TEST(Quadrature, HugeScaleStaysInLogSpace) {
  // exp(-1e4) * integral of a narrow bump, far below double range.
  auto log_f = [](double x) { return -1e4 + 900 * std::log(x) + 460 * std::log1p(-x); };
  EXPECT_NEAR(integrate_log(log_f, 0.0, 1.0).log_value, -1e4 + log_beta(901, 461), 1e-9);
}

TEST(Quadrature, GeneralInterval) {
  const auto r = integrate_log([](double x) { return std::log(std::sin(x)); }, 0.0, 3.141592653589793);
  EXPECT_NEAR(r.value(), 2.0, 1e-12);
  EXPECT_THROW(integrate_log([](double) { return 0.0; }, 1.0, 0.0), std::invalid_argument);
}

TEST(Quadrature, PanelBudgetIsEnforced) {
  QuadratureOptions opt;
  opt.max_panels = 20;
  opt.rel_tol = 1e-15;
  auto log_f = [](double x) { return std::log(std::fabs(std::sin(200 * x)) + 1e-3); };
  EXPECT_THROW(integrate_log(log_f, 0.0, 1.0, opt), NumericalError);
}

TEST(Linalg, MatrixProducts) {
  Matrix a(2, 3), b(3, 2);
  double v = 1.0;
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 3; ++j) a(i, j) = v++;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) b(i, j) = v++;
  const Matrix c = a * b;
  EXPECT_EQ(c(0, 0), 1 * 7 + 2 * 9 + 3 * 11);
  EXPECT_EQ(c(1, 1), 4 * 8 + 5 * 10 + 6 * 12);
  EXPECT_EQ(a.transpose()(2, 1), 6.0);
  EXPECT_EQ((Matrix::identity(3) * b).max_abs_diff(b), 0.0);
  const auto row = a.left_multiply({1.0, 2.0});
  EXPECT_EQ(row, (std::vector<double>{9.0, 12.0, 15.0}));
  EXPECT_THROW(a * a, std::invalid_argument);
}

TEST(Linalg, JacobiReconstructsRandomSymmetric) {
  for (std::size_t n : {1u, 2u, 5u, 16u, 36u}) {
    Matrix s(n, n);
    unsigned state = 12345u + static_cast<unsigned>(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        state = state * 1103515245u + 12345u;
        s(i, j) = s(j, i) = static_cast<double>(state % 2001) / 1000.0 - 1.0;
      }
    }
    const auto e = jacobi_eigen(s);
    for (std::size_t i = 1; i < n; ++i) EXPECT_GE(e.values[i - 1], e.values[i]);
    Matrix rebuilt(n, n);
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) rebuilt(i, j) += e.values[k] * e.vectors(i, k) * e.vectors(j, k);
    EXPECT_LT(rebuilt.max_abs_diff(s), 1e-10) << n;
    const Matrix vtv = e.vectors.transpose() * e.vectors;
    EXPECT_LT(vtv.max_abs_diff(Matrix::identity(n)), 1e-10) << n;
  }
}

TEST(Linalg, JacobiKnownSpectra) {
  Matrix m(2, 2);
  m(0, 0) = 2;
  m(1, 1) = 2;
  m(0, 1) = m(1, 0) = 1;
  const auto e = jacobi_eigen(m);
  EXPECT_NEAR(e.values[0], 3.0, 1e-14);
  EXPECT_NEAR(e.values[1], 1.0, 1e-14);
  const auto id = jacobi_eigen(Matrix::identity(4));
  for (double v : id.values) EXPECT_EQ(v, 1.0);
  EXPECT_THROW(jacobi_eigen(Matrix(2, 3)), std::invalid_argument);
}
