#include "doctest.h"

#include "latnet/model.hpp"
#include "latnet/splines.hpp"
#include "support/test_support.hpp"

using namespace latnet;
using namespace latnet::testing;

TEST_CASE("basis is a partition of unity with local support") {
  Rng rng(11);
  for (int m : {4, 6, 10}) {
    const SplineBasis basis(m, 2.5);
    for (int trial = 0; trial < 200; ++trial) {
      const Scalar t = rng.uniform(0.0, 2.5);
      const BasisSupport b = basis.eval(t);
      CHECK(b.count <= 4);
      CHECK(b.first >= 0);
      CHECK(b.first + b.count <= m);
      Scalar sum = 0.0;
      for (int k = 0; k < b.count; ++k) {
        CHECK(b.weight[static_cast<size_t>(k)] >= 0.0);
        sum += b.weight[static_cast<size_t>(k)];
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("boundary evaluation keeps only the clamped basis") {
  const SplineBasis basis(10, 1.0);
  const BasisSupport at_zero = basis.eval(0.0);
  CHECK(at_zero.count == 1);
  CHECK(at_zero.first == 0);
  CHECK(at_zero.weight[0] == doctest::Approx(1.0));
  const BasisSupport at_end = basis.eval(1.0);
  CHECK(at_end.count == 1);
  CHECK(at_end.first == 9);
  CHECK(at_end.weight[0] == doctest::Approx(1.0));
}

TEST_CASE("evaluation rejects t outside the horizon") {
  const SplineBasis basis(6, 1.0);
  CHECK_THROWS_AS(basis.eval(-0.01), Error);
  CHECK_THROWS_AS(basis.eval(1.01), Error);
}

TEST_CASE("de Boor evaluation matches the naive recursion") {
  Rng rng(5);
  for (int m : {4, 5, 8, 12}) {
    const SplineBasis basis(m, 1.7);
    for (int trial = 0; trial < 100; ++trial) {
      const Scalar t = trial == 0 ? 0.0 : (trial == 1 ? 1.7 : rng.uniform(0.0, 1.7));
      const Vector oracle = naive_basis_row(basis, t);
      const BasisSupport b = basis.eval(t);
      Vector dense = Vector::Zero(m);
      for (int k = 0; k < b.count; ++k) dense[b.first + k] = b.weight[static_cast<size_t>(k)];
      CHECK((dense - oracle).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("constant coefficients evaluate to the constant point") {
  Rng rng(7);
  const SplineBasis basis(8, 1.0);
  ParamLayout layout{1, 8, 2, 0, false};
  Coefficients coeffs(layout);
  Vector v(2);
  v << 0.7, -1.2;
  for (int k = 0; k < 8; ++k) coeffs.node(0).row(k) = v.transpose();
  for (int trial = 0; trial < 50; ++trial) {
    const Scalar t = rng.uniform(0.0, 1.0);
    const Vector z = spline_value(basis.eval(t), coeffs.node(0));
    CHECK((z - v).norm() < 1e-12);
  }
}

TEST_CASE("position handles zero, ramp, and static coefficients") {
  const int m = 6;
  const SplineBasis basis(m, 1.0);
  ParamLayout layout{2, m, 2, 0, false};

  SUBCASE("all-zero coefficients sit at the origin") {
    Coefficients coeffs(layout);
    RateModel model(basis, layout, SimilarityConfig{});
    CHECK(model.position(coeffs, 0, 0.3).norm() == 0.0);
  }

  SUBCASE("ramp rows yield a monotone rightward trajectory") {
    Coefficients coeffs(layout);
    for (int k = 0; k < m; ++k) coeffs.node(0)(k, 0) = static_cast<Scalar>(k + 1) / m;
    RateModel model(basis, layout, SimilarityConfig{});
    Scalar prev = -1.0;
    for (int s = 0; s <= 20; ++s) {
      const Scalar t = static_cast<Scalar>(s) / 20.0;
      // oracle: direct basis expansion against the naive recursion
      const Vector row = naive_basis_row(basis, t);
      Scalar expect = 0.0;
      for (int k = 0; k < m; ++k) expect += row[k] * coeffs.node(0)(k, 0);
      const Vector z = model.position(coeffs, 0, t);
      CHECK(z[0] == doctest::Approx(expect).epsilon(1e-12));
      CHECK(z[0] >= prev - 1e-12);
      prev = z[0];
    }
  }

  SUBCASE("static nodes report their stored point at every t") {
    Coefficients coeffs(layout);
    coeffs.node(1).row(0) << 2.0, -3.0;
    coeffs.node(1).row(3) << 9.0, 9.0;  // ignored for static nodes
    RateModel model(basis, layout, SimilarityConfig{}, nullptr, {false, true});
    for (Scalar t : {0.0, 0.4, 1.0}) {
      const Vector z = model.position(coeffs, 1, t);
      CHECK(z[0] == doctest::Approx(2.0));
      CHECK(z[1] == doctest::Approx(-3.0));
    }
  }

  SUBCASE("unknown node index errors") {
    Coefficients coeffs(layout);
    RateModel model(basis, layout, SimilarityConfig{});
    CHECK_THROWS_AS(model.position(coeffs, 5, 0.1), Error);
  }
}

TEST_CASE("position is linear in the coefficients") {
  Rng rng(13);
  const SplineBasis basis(7, 1.0);
  ParamLayout layout{3, 7, 2, 0, false};
  const Coefficients a = random_coefficients(layout, rng);
  const Coefficients b = random_coefficients(layout, rng);
  Coefficients mix(layout);
  mix.flat() = 0.3 * a.flat() + 1.7 * b.flat();
  RateModel model(basis, layout, SimilarityConfig{});
  for (int trial = 0; trial < 20; ++trial) {
    const Scalar t = rng.uniform(0.0, 1.0);
    const int node = static_cast<int>(rng.below(3));
    const Vector expect =
        0.3 * model.position(a, node, t) + 1.7 * model.position(b, node, t);
    CHECK((model.position(mix, node, t) - expect).norm() < 1e-12);
  }
}

TEST_CASE("smoothness penalty hand values") {
  SUBCASE("constant rows have zero first differences") {
    ParamLayout layout{2, 5, 2, 0, false};
    Coefficients coeffs(layout);
    for (int i = 0; i < 2; ++i)
      for (int k = 0; k < 5; ++k) coeffs.node(i).row(k) << 1.5, -0.5;
    CHECK(smoothness_penalty(coeffs).value == doctest::Approx(0.0));
  }
  SUBCASE("one node, rows (0, 1, 3) gives 1 + 4 = 5") {
    ParamLayout layout{1, 3, 1, 0, false};
    Coefficients coeffs(layout);
    coeffs.node(0)(0, 0) = 0.0;
    coeffs.node(0)(1, 0) = 1.0;
    coeffs.node(0)(2, 0) = 3.0;
    CHECK(smoothness_penalty(coeffs).value == doctest::Approx(5.0));
  }
}

TEST_CASE("smoothness gradient matches finite differences") {
  Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    ParamLayout layout{2 + static_cast<int>(rng.below(3)), 3 + static_cast<int>(rng.below(3)),
                       1 + static_cast<int>(rng.below(2)), 0, false};
    const Coefficients coeffs = random_coefficients(layout, rng);
    const ValueGrad analytic = smoothness_penalty(coeffs);
    const Vector numeric = finite_diff(
        [&](const Vector& x) { return smoothness_penalty(Coefficients(layout, x)).value; },
        coeffs.flat());
    CHECK(max_rel_error(analytic.grad, numeric) < 1e-6);
  }
}

TEST_CASE("smoothness penalty is translation invariant per node") {
  Rng rng(19);
  ParamLayout layout{3, 6, 2, 0, false};
  Coefficients coeffs = random_coefficients(layout, rng);
  const Scalar before = smoothness_penalty(coeffs).value;
  RowVector shift(2);
  shift << 4.2, -1.1;
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 6; ++k) coeffs.node(i).row(k) += shift;
  CHECK(smoothness_penalty(coeffs).value == doctest::Approx(before).epsilon(1e-12));
}
