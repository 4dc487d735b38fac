#pragma once

// Independent reference computations used only by the tests.

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "metastab/map_model.hpp"
#include "metastab/transfer_operator.hpp"

namespace oracle {

// Ulam matrix on the full n-grid from absolute coordinates: for each cell and
// affine branch, the image of the overlap is intersected with every cell.
inline Eigen::MatrixXd ulam_dense(const metastab::MapFamily& family, double eps, std::size_t n) {
  const double h = 1.0 / static_cast<double>(n);
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (const auto& b : family.branches(eps)) {
    const double s = b.slope(), c = b.intercept();
    for (std::size_t k = 0; k < n; ++k) {
      const double lo = std::max(k * h, b.domain().lo), hi = std::min((k + 1) * h, b.domain().hi);
      if (!(hi > lo)) continue;
      double y0 = s * lo + c, y1 = s * hi + c;
      if (y0 > y1) std::swap(y0, y1);
      for (std::size_t l = 0; l < n; ++l) {
        const double ov = std::min(y1, (l + 1) * h) - std::max(y0, l * h);
        if (ov > 0) P(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l)) += ov / std::abs(s) / h;
      }
    }
  }
  return P;
}

// Restriction to the cells of interval j (hole operator).
inline Eigen::MatrixXd restrict_block(const Eigen::MatrixXd& P, const metastab::Interval& iv) {
  const auto n = P.rows();
  const auto a = static_cast<Eigen::Index>(std::llround(iv.lo * static_cast<double>(n)));
  const auto b = static_cast<Eigen::Index>(std::llround(iv.hi * static_cast<double>(n)));
  return P.block(a, a, b - a, b - a);
}

struct DenseSpectrum {
  std::vector<std::complex<double>> values; // sorted by decreasing modulus
  Eigen::VectorXd perron_left;              // density (left eigenvector of P), L1-normalized
  Eigen::VectorXd perron_right;             // right eigenvector of P
};

inline DenseSpectrum spectrum(const Eigen::MatrixXd& P) {
  DenseSpectrum out;
  Eigen::EigenSolver<Eigen::MatrixXd> es(P.transpose());
  const auto& ev = es.eigenvalues();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(ev.size()));
  for (Eigen::Index i = 0; i < ev.size(); ++i) order[static_cast<std::size_t>(i)] = i;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return std::abs(ev(a)) > std::abs(ev(b)); });
  for (auto i : order) out.values.push_back(ev(i));
  out.perron_left = es.eigenvectors().col(order[0]).real();
  out.perron_left /= out.perron_left.sum();
  Eigen::EigenSolver<Eigen::MatrixXd> er(P);
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < er.eigenvalues().size(); ++i)
    if (std::abs(er.eigenvalues()(i)) > std::abs(er.eigenvalues()(best))) best = i;
  out.perron_right = er.eigenvectors().col(best).real();
  if (out.perron_right.sum() < 0) out.perron_right = -out.perron_right;
  return out;
}

// Dense copy of an operator's forward matrix.
inline Eigen::MatrixXd dense(const metastab::UlamOperator& op) {
  const auto& M = op.matrix();
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(M.rows), static_cast<Eigen::Index>(M.cols));
  for (std::size_t r = 0; r < M.rows; ++r)
    for (std::size_t k = M.row_ptr[r]; k < M.row_ptr[r + 1]; ++k)
      D(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(M.col[k])) = M.val[k];
  return D;
}

// Continuous-time chain whose holding times are all Exp(rate): probability
// that some holding time starting at t_k <= S (t_0 = 0) is <= sigma.
// Renewal equation u(s) = (1 - e^{-r σ}) + ∫_σ^s r e^{-r t} u(s - t) dt,
// solved by the trapezoid rule on a uniform grid.
inline double double_jump_renewal(double rate, double S, double sigma, std::size_t steps = 20000) {
  const double dt = S / static_cast<double>(steps);
  const double a = 1.0 - std::exp(-rate * sigma);
  std::vector<double> u(steps + 1, a);
  const auto f = [&](double t) { return rate * std::exp(-rate * t); };
  for (std::size_t i = 0; i <= steps; ++i) {
    const double s = static_cast<double>(i) * dt;
    if (s <= sigma || static_cast<double>(i) * dt < std::ceil(sigma / dt - 1e-9) * dt) continue;
    // integrate t from sigma to s: u(s - t) with s - t on the grid when sigma is
    double acc = 0.0;
    const auto lo = static_cast<std::size_t>(std::ceil(sigma / dt - 1e-9));
    for (std::size_t k = lo; k <= i; ++k) {
      const double w = (k == lo || k == i) ? 0.5 : 1.0;
      acc += w * f(static_cast<double>(k) * dt) * (k == 0 ? a : u[i - k]);
    }
    // partial panel between sigma and the first grid point
    const double gap = static_cast<double>(lo) * dt - sigma;
    acc *= dt;
    acc += gap * f(sigma) * u[i - lo];
    u[i] = a + acc;
  }
  return u[steps];
}

} // namespace oracle
