#include "metastab/observable.hpp"

#include <algorithm>
#include <cmath>

#include "metastab/error.hpp"

namespace metastab {

namespace {

double piece_value(const Observable::Piece& p, double x) {
  if (p.x1 == p.x0) return p.v0;
  const double t = (x - p.x0) / (p.x1 - p.x0);
  return p.v0 + t * (p.v1 - p.v0);
}

// ∫_a^b of the affine piece, a and b inside [x0, x1].
double piece_integral(const Observable::Piece& p, double a, double b) {
  return 0.5 * (piece_value(p, a) + piece_value(p, b)) * (b - a);
}

} // namespace

Observable::Observable(std::vector<Piece> pieces) : pieces_(std::move(pieces)) {
  if (pieces_.empty()) throw ConfigError("Observable: no pieces");
  if (pieces_.front().x0 != 0.0 || pieces_.back().x1 != 1.0)
    throw ConfigError("Observable: pieces must cover [0, 1]");
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    const auto& p = pieces_[i];
    if (!(p.x1 > p.x0)) throw ConfigError("Observable: empty or reversed piece");
    if (i > 0 && pieces_[i - 1].x1 != p.x0) throw ConfigError("Observable: pieces must be contiguous and sorted");
    if (!std::isfinite(p.v0) || !std::isfinite(p.v1)) throw ConfigError("Observable: non-finite value");
  }
}

Observable Observable::constant(double c) { return Observable({{0.0, 1.0, c, c}}); }

Observable Observable::identity() { return Observable({{0.0, 1.0, 0.0, 1.0}}); }

Observable Observable::step(const std::vector<double>& edges, const std::vector<double>& values) {
  if (edges.size() != values.size() + 1) throw ConfigError("Observable::step: need one more edge than value");
  std::vector<Piece> pieces;
  for (std::size_t j = 0; j < values.size(); ++j) pieces.push_back({edges[j], edges[j + 1], values[j], values[j]});
  return Observable(std::move(pieces));
}

Observable Observable::from_density(const CellDensity& d) {
  std::vector<Piece> pieces;
  const double n = static_cast<double>(d.cells());
  for (std::size_t k = 0; k < d.cells(); ++k) {
    const double x0 = static_cast<double>(k) / n, x1 = static_cast<double>(k + 1) / n;
    if (!pieces.empty() && pieces.back().v0 == d.values[k]) {
      pieces.back().x1 = x1;
      continue;
    }
    pieces.push_back({x0, x1, d.values[k], d.values[k]});
  }
  return Observable(std::move(pieces));
}

std::vector<double> Observable::breakpoints() const {
  std::vector<double> out;
  out.reserve(pieces_.size() + 1);
  for (const auto& p : pieces_) out.push_back(p.x0);
  out.push_back(1.0);
  return out;
}

double Observable::operator()(double x, Side side) const {
  x = std::clamp(x, 0.0, 1.0);
  auto it = std::upper_bound(pieces_.begin(), pieces_.end(), x,
                             [](double v, const Piece& p) { return v < p.x1; });
  if (it == pieces_.end()) return pieces_.back().v1;
  if (side == Side::left && x == it->x0 && it != pieces_.begin()) return std::prev(it)->v1;
  return piece_value(*it, x);
}

double Observable::integral(const Interval& iv) const {
  double sum = 0.0;
  for (const auto& p : pieces_) {
    const double a = std::max(iv.lo, p.x0), b = std::min(iv.hi, p.x1);
    if (b > a) sum += piece_integral(p, a, b);
  }
  return sum;
}

double Observable::integral_against(const CellDensity& density, const Interval& iv) const {
  const double n = static_cast<double>(density.cells());
  double sum = 0.0;
  for (const auto& p : pieces_) {
    const double a = std::max(iv.lo, p.x0), b = std::min(iv.hi, p.x1);
    if (!(b > a)) continue;
    auto k = static_cast<std::size_t>(std::clamp(std::floor(a * n), 0.0, n - 1));
    for (; k < density.cells(); ++k) {
      const double c0 = static_cast<double>(k) / n, c1 = static_cast<double>(k + 1) / n;
      if (c0 >= b) break;
      const double lo = std::max(a, c0), hi = std::min(b, c1);
      if (hi > lo && density.values[k] != 0.0) sum += density.values[k] * piece_integral(p, lo, hi);
    }
  }
  return sum;
}

double Observable::total_variation() const {
  double var = 0.0;
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    var += std::abs(pieces_[i].v1 - pieces_[i].v0);
    if (i > 0) var += std::abs(pieces_[i].v0 - pieces_[i - 1].v1);
  }
  return var;
}

double Observable::sup_norm() const {
  double s = 0.0;
  for (const auto& p : pieces_) s = std::max({s, std::abs(p.v0), std::abs(p.v1)});
  return s;
}

Observable Observable::operator+(const Observable& other) const {
  std::vector<double> xs = breakpoints();
  const auto ys = other.breakpoints();
  xs.insert(xs.end(), ys.begin(), ys.end());
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  std::vector<Piece> pieces;
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    const double a = xs[i], b = xs[i + 1];
    pieces.push_back({a, b, (*this)(a, Side::right) + other(a, Side::right),
                      (*this)(b, Side::left) + other(b, Side::left)});
  }
  return Observable(std::move(pieces));
}

Observable Observable::operator*(double s) const {
  auto pieces = pieces_;
  for (auto& p : pieces) {
    p.v0 *= s;
    p.v1 *= s;
  }
  return Observable(std::move(pieces));
}

Observable Observable::shifted(double c) const {
  auto pieces = pieces_;
  for (auto& p : pieces) {
    p.v0 += c;
    p.v1 += c;
  }
  return Observable(std::move(pieces));
}

nlohmann::json Observable::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : pieces_) arr.push_back({p.x0, p.x1, p.v0, p.v1});
  return {{"type", "piecewise_affine"}, {"pieces", arr}};
}

Observable Observable::from_json(const nlohmann::json& j) {
  const std::string type = j.value("type", "piecewise_affine");
  if (type == "constant") return constant(j.at("value").get<double>());
  if (type == "identity") return identity();
  if (type == "step") return step(j.at("edges").get<std::vector<double>>(), j.at("values").get<std::vector<double>>());
  if (type == "piecewise_affine") {
    std::vector<Piece> pieces;
    for (const auto& row : j.at("pieces")) {
      if (row.size() != 4) throw ConfigError("observable piece must be [x0, x1, v0, v1]");
      pieces.push_back({row[0].get<double>(), row[1].get<double>(), row[2].get<double>(), row[3].get<double>()});
    }
    return Observable(std::move(pieces));
  }
  throw ConfigError("unknown observable type '" + type + "'");
}

double bv_norm(const Observable& a) { return a.total_variation() + a.sup_norm(); }

} // namespace metastab
