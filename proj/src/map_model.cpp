#include "metastab/map_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <openssl/evp.h>

#include <boost/math/tools/roots.hpp>

#include "metastab/error.hpp"

namespace metastab {

// --- Branch -------------------------------------------------------------------

Branch::Branch(Interval domain, double slope, double intercept)
    : domain_(domain), map_(Affine{slope, intercept}) {
  if (!(domain.hi > domain.lo)) throw FamilyDefinitionError("Branch: empty domain");
  if (slope == 0.0) throw FamilyDefinitionError("Branch: zero slope");
}

Branch::Branch(Interval domain, Fn value, Fn derivative)
    : domain_(domain), map_(Smooth{std::move(value), std::move(derivative)}) {
  if (!(domain.hi > domain.lo)) throw FamilyDefinitionError("Branch: empty domain");
}

double Branch::slope() const { return is_affine() ? std::get<Affine>(map_).slope : derivative(domain_.lo); }

double Branch::intercept() const { return is_affine() ? std::get<Affine>(map_).intercept : 0.0; }

double Branch::operator()(double x) const {
  if (const auto* a = std::get_if<Affine>(&map_)) return a->slope * x + a->intercept;
  return std::get<Smooth>(map_).value(x);
}

double Branch::derivative(double x) const {
  if (const auto* a = std::get_if<Affine>(&map_)) return a->slope;
  return std::get<Smooth>(map_).derivative(x);
}

bool Branch::increasing() const { return derivative(0.5 * (domain_.lo + domain_.hi)) > 0; }

double Branch::min_expansion(int samples) const {
  if (const auto* a = std::get_if<Affine>(&map_)) return std::abs(a->slope);
  double m = std::numeric_limits<double>::infinity();
  for (int i = 0; i < samples; ++i) {
    const double x = domain_.lo + (domain_.hi - domain_.lo) * i / (samples - 1);
    m = std::min(m, std::abs(derivative(x)));
  }
  return m;
}

Interval Branch::image() const {
  const double a = (*this)(domain_.lo), b = (*this)(domain_.hi);
  return {std::min(a, b), std::max(a, b)};
}

Interval Branch::preimage(const Interval& target, const Interval& restrict) const {
  const Interval dom = domain_.intersect(restrict);
  if (dom.empty() || target.empty()) return {dom.lo, dom.lo};
  if (const auto* a = std::get_if<Affine>(&map_)) {
    double x0 = (target.lo - a->intercept) / a->slope;
    double x1 = (target.hi - a->intercept) / a->slope;
    if (x0 > x1) std::swap(x0, x1);
    Interval r = Interval{x0, x1}.intersect(dom);
    return r.empty() ? Interval{dom.lo, dom.lo} : r;
  }
  // Monotone smooth branch: invert each endpoint by bisection.
  const bool up = increasing();
  auto invert = [&](double y) {
    const double fa = (*this)(dom.lo), fb = (*this)(dom.hi);
    const double lo_val = std::min(fa, fb), hi_val = std::max(fa, fb);
    if (y <= lo_val) return up ? dom.lo : dom.hi;
    if (y >= hi_val) return up ? dom.hi : dom.lo;
    auto g = [&](double x) { return (*this)(x)-y; };
    boost::math::tools::eps_tolerance<double> tol(50);
    const auto r = boost::math::tools::bisect(g, dom.lo, dom.hi, tol);
    return 0.5 * (r.first + r.second);
  };
  double x0 = invert(target.lo), x1 = invert(target.hi);
  if (x0 > x1) std::swap(x0, x1);
  Interval r = Interval{x0, x1}.intersect(dom);
  return r.empty() ? Interval{dom.lo, dom.lo} : r;
}

// --- MapFamily ----------------------------------------------------------------

MapFamily::MapFamily(std::string name, nlohmann::json params, std::vector<double> boundaries, Interval eps_range,
                     BranchBuilder builder, bool builtin)
    : name_(std::move(name)), params_(std::move(params)), boundaries_(std::move(boundaries)), eps_range_(eps_range),
      builder_(std::move(builder)), builtin_(builtin) {
  for (std::size_t i = 0; i < boundaries_.size(); ++i) {
    if (!(boundaries_[i] > 0.0 && boundaries_[i] < 1.0)) throw FamilyDefinitionError("boundary outside (0, 1)");
    if (i > 0 && !(boundaries_[i] > boundaries_[i - 1])) throw FamilyDefinitionError("boundaries must increase");
  }
  if (eps_range_.lo < 0.0 || eps_range_.hi < eps_range_.lo) throw FamilyDefinitionError("bad epsilon range");
}

std::vector<Interval> MapFamily::intervals() const {
  std::vector<Interval> out;
  double lo = 0.0;
  for (double b : boundaries_) {
    out.push_back({lo, b});
    lo = b;
  }
  out.push_back({lo, 1.0});
  return out;
}

Interval MapFamily::interval(int j) const { return intervals().at(static_cast<std::size_t>(j)); }

int MapFamily::state_of(double x) const {
  return static_cast<int>(std::upper_bound(boundaries_.begin(), boundaries_.end(), x) - boundaries_.begin());
}

void MapFamily::check_eps(double eps) const {
  if (!(eps >= eps_range_.lo && eps <= eps_range_.hi))
    throw ConfigError("epsilon " + std::to_string(eps) + " outside the validity range of family '" + name_ + "'");
}

std::vector<Branch> MapFamily::branches(double eps) const {
  check_eps(eps);
  auto out = builder_(eps);
  if (out.empty()) throw FamilyDefinitionError("family '" + name_ + "' produced no branches");
  if (out.front().domain().lo != 0.0 || out.back().domain().hi != 1.0)
    throw FamilyDefinitionError("branches of '" + name_ + "' must cover [0, 1]");
  for (std::size_t i = 1; i < out.size(); ++i)
    if (out[i].domain().lo != out[i - 1].domain().hi)
      throw FamilyDefinitionError("branches of '" + name_ + "' must be contiguous");
  return out;
}

MapFamily& MapFamily::with_exact(ExactDescription exact) {
  exact_ = std::move(exact);
  return *this;
}

MapFamily& MapFamily::with_reference_densities(std::vector<CellDensity> densities) {
  if (static_cast<int>(densities.size()) != m()) throw FamilyDefinitionError("one reference density per interval");
  reference_densities_ = std::move(densities);
  return *this;
}

nlohmann::json MapFamily::to_json() const {
  return {{"name", name_}, {"params", params_}, {"eps_range", {eps_range_.lo, eps_range_.hi}}};
}

std::string git_blob_hash(const std::string& content) {
  const std::string blob = "blob " + std::to_string(content.size()) + std::string(1, '\0') + content;
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(blob.data(), blob.size(), digest, &len, EVP_sha1(), nullptr);
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

std::string family_content_hash(const MapFamily& family) { return git_blob_hash(family.to_json().dump()); }

// --- BranchTable ----------------------------------------------------------------

BranchTable::BranchTable(const MapFamily& family, double eps) : branches_(family.branches(eps)), eps_(eps) {
  for (const auto& b : branches_) {
    right_edges_.push_back(b.domain().hi);
    all_affine_ = all_affine_ && b.is_affine();
    slope_.push_back(b.is_affine() ? b.slope() : 0.0);
    intercept_.push_back(b.is_affine() ? b.intercept() : 0.0);
  }
}

std::size_t BranchTable::branch_index(double x, Side side) const {
  // Right side: the branch whose [lo, hi) holds x. Left side: the branch
  // whose (lo, hi] holds x. x = 1 and x = 0 fall back to the only candidate.
  const std::size_t n = right_edges_.size();
  std::size_t k = 0;
  if (side == Side::right) {
    while (k + 1 < n && x >= right_edges_[k]) ++k;
  } else {
    while (k + 1 < n && x > right_edges_[k]) ++k;
  }
  return k;
}

double BranchTable::operator()(double x, Side side) const {
  const std::size_t k = branch_index(x, side);
  const double y = all_affine_ ? slope_[k] * x + intercept_[k] : branches_[k](x);
  return std::clamp(y, 0.0, 1.0);
}

std::vector<double> BranchTable::breakpoints() const {
  std::vector<double> out{0.0};
  for (const auto& b : branches_) out.push_back(b.domain().hi);
  return out;
}

double eval_map(const MapFamily& family, double eps, double x, Side side) {
  if (!(x >= 0.0 && x <= 1.0)) throw ConfigError("eval_map: x outside [0, 1]");
  return BranchTable(family, eps)(x, side);
}

// --- holes ----------------------------------------------------------------------

double HoleSet::total_measure(int i) const {
  double s = 0.0;
  for (int j = 0; j < m; ++j) s += measures[i][j];
  return s;
}

double HoleSet::lebesgue(int i, int j) const {
  double s = 0.0;
  for (const auto& iv : intervals[i][j]) s += iv.length();
  return s;
}

namespace {

// Slivers below this length are rounding artifacts of preimage arithmetic.
constexpr double kSliver = 1e-12;

void append_merged(std::vector<Interval>& list, Interval iv) {
  if (iv.length() < kSliver) return;
  if (!list.empty() && list.back().hi >= iv.lo) {
    list.back().hi = std::max(list.back().hi, iv.hi);
    return;
  }
  list.push_back(iv);
}

} // namespace

HoleSet compute_holes(const MapFamily& family, double eps, const std::vector<CellDensity>& densities) {
  const int m = family.m();
  if (static_cast<int>(densities.size()) != m) throw ConfigError("compute_holes: need one density per interval");
  const auto branches = family.branches(eps);
  const auto ivs = family.intervals();
  HoleSet hs;
  hs.eps = eps;
  hs.m = m;
  hs.intervals.assign(m, std::vector<std::vector<Interval>>(m));
  hs.measures.assign(m, std::vector<double>(m, 0.0));
  for (int i = 0; i < m; ++i) {
    for (const auto& br : branches) {
      const Interval dom = br.domain().intersect(ivs[i]);
      if (dom.empty()) continue;
      for (int j = 0; j < m; ++j) {
        if (j == i) continue;
        // The last interval is closed at 1.
        Interval target = ivs[j];
        if (j == m - 1) target.hi = std::nextafter(1.0, 2.0);
        append_merged(hs.intervals[i][j], br.preimage(target, dom));
      }
    }
    for (int j = 0; j < m; ++j) {
      for (const auto& h : hs.intervals[i][j]) {
        for (double b : family.boundaries()) {
          if (h.lo <= b && b <= h.hi)
            throw FamilyDefinitionError("hole H_" + std::to_string(i + 1) + std::to_string(j + 1) +
                                        " touches boundary point " + std::to_string(b));
        }
        hs.measures[i][j] += densities[i].integral(h);
      }
    }
  }
  return hs;
}

std::vector<double> infinitesimal_holes(const MapFamily& family) {
  const auto branches = family.branches(0.0);
  std::vector<double> out;
  const auto& bs = family.boundaries();
  for (const auto& br : branches) {
    const Interval img = br.image();
    for (double b : bs) {
      if (b < img.lo || b > img.hi) continue;
      double x;
      if (br.is_affine()) {
        x = (b - br.intercept()) / br.slope();
      } else {
        auto g = [&](double t) { return br(t) - b; };
        boost::math::tools::eps_tolerance<double> tol(50);
        const auto r = boost::math::tools::bisect(g, br.domain().lo, br.domain().hi, tol);
        x = 0.5 * (r.first + r.second);
      }
      const bool is_boundary = std::any_of(bs.begin(), bs.end(), [&](double c) { return std::abs(c - x) < 1e-14; });
      if (!is_boundary) out.push_back(x);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end(), [](double a, double b) { return std::abs(a - b) < 1e-14; }),
            out.end());
  return out;
}

} // namespace metastab
