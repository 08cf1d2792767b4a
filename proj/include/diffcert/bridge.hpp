#pragma once

#include <array>

#include "diffcert/error.hpp"
#include "diffcert/expr.hpp"

namespace diffcert {

/// Value, first and second derivative at one end of a bridge.
struct Jet {
  double value = 0.0;
  double slope = 0.0;
  double curvature = 0.0;
};

inline Jet jet_of(const Expr& f, double x) {
  const Expr d = differentiate(f);
  return {f(x), d(x), differentiate(d)(x)};
}

/// The quintic polynomial on [x0, x1] matching both jets (C^2 at the joins).
inline Expr hermite_bridge(double x0, double x1, const Jet& left, const Jet& right) {
  if (!(x1 > x0)) throw ParameterError("hermite bridge needs x0 < x1");
  const double h = x1 - x0;
  static constexpr std::array<std::array<double, 6>, 6> basis{{
      {1, 0, 0, -10, 15, -6},
      {0, 1, 0, -6, 8, -3},
      {0, 0, 0.5, -1.5, 1.5, -0.5},
      {0, 0, 0, 10, -15, 6},
      {0, 0, 0, -4, 7, -3},
      {0, 0, 0, 0.5, -1, 0.5},
  }};
  const std::array<double, 6> w{left.value, h * left.slope, h * h * left.curvature,
                                right.value, h * right.slope, h * h * right.curvature};
  std::array<double, 6> c{};
  for (int j = 0; j < 6; ++j)
    for (int k = 0; k < 6; ++k) c[k] += w[j] * basis[j][k];
  const Expr t = (Expr::variable() - Expr::constant(x0)) / Expr::constant(h);
  Expr p = Expr::constant(c[5]);
  for (int k = 4; k >= 0; --k) p = p * t + Expr::constant(c[k]);
  return p;
}

/// left on x < lo, mid on [lo, hi], right on x > hi, written with sign
/// indicators so the result is one expression.
inline Expr piecewise3(const Expr& left, double lo, const Expr& mid, double hi, const Expr& right) {
  const Expr x = Expr::variable();
  const Expr half = Expr::constant(0.5);
  const Expr above = half * (Expr::constant(1.0) + Expr::unary(Op::Sign, x - Expr::constant(hi)));
  const Expr below = half * (Expr::constant(1.0) - Expr::unary(Op::Sign, x - Expr::constant(lo)));
  const Expr inside = Expr::constant(1.0) - above - below;
  return below * left + inside * mid + above * right;
}

}  // namespace diffcert
