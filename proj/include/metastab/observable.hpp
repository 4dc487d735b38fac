#pragma once

#include <vector>

#include <json.hpp>

#include "metastab/density.hpp"

namespace metastab {

// Piecewise-affine function on [0, 1]. Pieces tile [0, 1] in order; each
// piece carries its own one-sided end values, so jumps sit between pieces.
class Observable {
public:
  struct Piece {
    double x0, x1; // x0 < x1
    double v0, v1; // limits at x0+ and x1-
  };

  Observable() = default;
  explicit Observable(std::vector<Piece> pieces);

  static Observable constant(double c);
  static Observable identity();
  // Value values[j] on [edges[j], edges[j+1]); edges run 0 .. 1.
  static Observable step(const std::vector<double>& edges, const std::vector<double>& values);
  static Observable from_density(const CellDensity& d);

  const std::vector<Piece>& pieces() const { return pieces_; }
  std::vector<double> breakpoints() const;

  double operator()(double x, Side side = Side::right) const;
  double integral(const Interval& iv) const;
  // ∫_iv A(x) φ(x) dx, exact for piecewise-constant φ.
  double integral_against(const CellDensity& density, const Interval& iv) const;

  double total_variation() const;
  double sup_norm() const;

  Observable operator+(const Observable& other) const;
  Observable operator*(double s) const;
  Observable shifted(double c) const;

  nlohmann::json to_json() const;
  static Observable from_json(const nlohmann::json& j);

private:
  std::vector<Piece> pieces_;
};

// Var(A) + sup|A|.
double bv_norm(const Observable& a);

} // namespace metastab
