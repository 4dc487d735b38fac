#include <algorithm>
#include <cmath>
#include <memory>

#include <fftw3.h>
#include <fmt/format.h>

#include "metastab/error.hpp"
#include "metastab/rng.hpp"
#include "metastab/trajectory_sim.hpp"
#include "orbit_detail.hpp"

namespace metastab {
namespace {

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

// Autocorrelation Ĉ(n) = L^-1 Σ_{k<L-n} a_k a_{k+n}, n = 0..max_lag, through
// a zero-padded FFT. The plan is created once (not thread-safe) and executed
// on per-call buffers with the new-array interface (thread-safe).
class Autocorrelator {
public:
  explicit Autocorrelator(std::size_t length) : length_(length) {
    size_ = 1;
    while (size_ < 2 * length) size_ <<= 1;
    auto* in = fftw_alloc_real(size_);
    auto* spec = fftw_alloc_complex(size_ / 2 + 1);
    forward_ = fftw_plan_dft_r2c_1d(static_cast<int>(size_), in, spec, FFTW_ESTIMATE);
    backward_ = fftw_plan_dft_c2r_1d(static_cast<int>(size_), spec, in, FFTW_ESTIMATE);
    fftw_free(in);
    fftw_free(spec);
  }
  ~Autocorrelator() {
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
  }
  Autocorrelator(const Autocorrelator&) = delete;
  Autocorrelator& operator=(const Autocorrelator&) = delete;

  std::vector<double> operator()(const std::vector<double>& a, std::size_t max_lag) const {
    std::unique_ptr<double, FftwFree> buf(fftw_alloc_real(size_));
    std::unique_ptr<fftw_complex, FftwFree> spec(fftw_alloc_complex(size_ / 2 + 1));
    std::fill(buf.get(), buf.get() + size_, 0.0);
    std::copy(a.begin(), a.end(), buf.get());
    fftw_execute_dft_r2c(forward_, buf.get(), spec.get());
    for (std::size_t k = 0; k <= size_ / 2; ++k) {
      auto& c = spec.get()[k];
      c[0] = c[0] * c[0] + c[1] * c[1];
      c[1] = 0.0;
    }
    fftw_execute_dft_c2r(backward_, spec.get(), buf.get());
    std::vector<double> out(max_lag + 1);
    const double norm = static_cast<double>(size_) * static_cast<double>(length_);
    for (std::size_t n = 0; n <= max_lag; ++n) out[n] = buf.get()[n] / norm;
    return out;
  }

private:
  std::size_t length_, size_;
  fftw_plan forward_, backward_;
};

double burn(const BranchTable& table, double x, std::uint64_t steps, RandomStream* d) {
  for (std::uint64_t k = 0; k < steps; ++k) x = detail::advance(table, x, d);
  return x;
}

} // namespace

double DiffusionResult::estimator_z() const {
  const double se = std::hypot(batch_means.std_error, green_kubo.std_error);
  return se > 0 ? std::abs(batch_means.value - green_kubo.value) / se : 0.0;
}

DiffusionResult estimate_diffusion(const MapFamily& family, double eps, const Observable& a, const SimConfig& cfg,
                                   const DiffusionOptions& opts) {
  cfg.validate();
  family.check_eps(eps);
  if (cfg.initial_law != InitialLaw::mu_eps) throw ConfigError("estimate_diffusion: initial law must be mu_eps");
  if (opts.gk_orbits < 2) throw ConfigError("estimate_diffusion: need at least 2 Green-Kubo orbits");
  const BranchTable table(family, eps);
  const std::uint64_t N = static_cast<std::uint64_t>(std::ceil(cfg.horizon_S / eps - 1e-9));
  if (opts.gk_orbit_length <= N) throw ConfigError("estimate_diffusion: Green-Kubo orbits must exceed the lag window");
  DiffusionResult res;

  // Pilot run for μ_ε(A).
  constexpr std::size_t kPilotChunks = 16;
  const std::uint64_t pilot_len = std::max<std::uint64_t>(opts.pilot_steps / kPilotChunks, 1);
  std::vector<double> pilot(kPilotChunks);
  kernels::for_each_index(
      kPilotChunks,
      [&](std::size_t c) {
        RandomStream init(cfg.seed, StreamPurpose::pilot, c);
        std::optional<RandomStream> dither;
        if (cfg.dither) dither.emplace(cfg.seed, StreamPurpose::dither, detail::kDitherPilot + c);
        RandomStream* d = dither ? &*dither : nullptr;
        double x = burn(table, init.uniform(), cfg.burn_in, d);
        double sum = 0.0;
        for (std::uint64_t k = 0; k < pilot_len; ++k) {
          sum += a(x);
          x = detail::advance(table, x, d);
        }
        pilot[c] = sum / static_cast<double>(pilot_len);
      },
      cfg.exec);
  const auto pm = stats::mean_var(pilot);
  res.pilot_mean = pm.mean;
  res.pilot_se = pm.std_error();

  // Batch means over independent trajectories, windows N and 2N.
  std::vector<double> xn(cfg.n_traj), x2n(cfg.n_traj);
  kernels::for_each_index(
      cfg.n_traj,
      [&](std::size_t i) {
        RandomStream init(cfg.seed, StreamPurpose::initial, i);
        std::optional<RandomStream> dither;
        if (cfg.dither) dither.emplace(cfg.seed, StreamPurpose::dither, detail::kDitherBatch + i);
        RandomStream* d = dither ? &*dither : nullptr;
        double x = burn(table, init.uniform(), cfg.burn_in, d);
        double s1 = 0.0, s2 = 0.0;
        for (std::uint64_t k = 0; k < 2 * N; ++k) {
          const double v = a(x) - res.pilot_mean;
          (k < N ? s1 : s2) += v;
          x = detail::advance(table, x, d);
        }
        xn[i] = s1 / std::sqrt(static_cast<double>(N));
        x2n[i] = (s1 + s2) / std::sqrt(static_cast<double>(2 * N));
      },
      cfg.exec);
  auto batch = [&](const std::vector<double>& xs, std::uint64_t window) {
    const auto v = stats::variance_with_error(xs);
    DiffusionEstimate e;
    e.method = "batch_means";
    e.value = v.variance;
    e.std_error = v.std_error;
    e.N = window;
    e.n_traj = cfg.n_traj;
    e.truncation_S = cfg.horizon_S * static_cast<double>(window) / static_cast<double>(N);
    return e;
  };
  res.batch_means = batch(xn, N);
  res.batch_means_2N = batch(x2n, 2 * N);
  {
    const double d1 = res.batch_means.value, d2 = res.batch_means_2N.value;
    const double se = std::hypot(res.batch_means.std_error, res.batch_means_2N.std_error);
    if (std::abs(d2 - d1) > opts.plateau_tolerance * std::abs(d1) && std::abs(d2 - d1) > 3 * se)
      res.warnings.push_back(fmt::format(
          "batch-means variance has not reached a plateau (N: {:.6g}, 2N: {:.6g}); S is too small", d1, d2));
  }

  // Green-Kubo: Ĉ(0) + 2 Σ_{n=1}^{N} Ĉ(n) per long orbit.
  const std::size_t L = opts.gk_orbit_length;
  const Autocorrelator acf(L);
  std::vector<std::vector<double>> corr(opts.gk_orbits);
  std::vector<double> per_orbit(opts.gk_orbits);
  kernels::for_each_index(
      opts.gk_orbits,
      [&](std::size_t r) {
        RandomStream init(cfg.seed, StreamPurpose::green_kubo, r);
        std::optional<RandomStream> dither;
        if (cfg.dither) dither.emplace(cfg.seed, StreamPurpose::dither, detail::kDitherGreenKubo + r);
        RandomStream* d = dither ? &*dither : nullptr;
        double x = burn(table, init.uniform(), cfg.burn_in, d);
        std::vector<double> series(L);
        for (std::size_t k = 0; k < L; ++k) {
          series[k] = a(x) - res.pilot_mean;
          x = detail::advance(table, x, d);
        }
        corr[r] = acf(series, N);
        double sum = corr[r][0];
        for (std::size_t n = 1; n <= N; ++n) sum += 2.0 * corr[r][n];
        per_orbit[r] = sum;
      },
      cfg.exec);
  const auto gk = stats::mean_var(per_orbit);
  res.green_kubo.method = "green_kubo";
  res.green_kubo.value = gk.mean;
  res.green_kubo.std_error = gk.std_error();
  res.green_kubo.N = N;
  res.green_kubo.n_traj = opts.gk_orbits;
  res.green_kubo.truncation_S = cfg.horizon_S;
  res.green_kubo.orbit_length = L;

  res.autocorrelation.assign(N + 1, 0.0);
  res.autocorrelation_se.assign(N + 1, 0.0);
  std::vector<double> lag(opts.gk_orbits);
  for (std::size_t n = 0; n <= N; ++n) {
    for (std::size_t r = 0; r < opts.gk_orbits; ++r) lag[r] = corr[r][n];
    const auto mv = stats::mean_var(lag);
    res.autocorrelation[n] = mv.mean;
    res.autocorrelation_se[n] = mv.std_error();
  }
  return res;
}

EmpiricalDensity empirical_density(const MapFamily& family, double eps, std::size_t n_cells, std::uint64_t total_steps,
                                   std::uint64_t seed, const std::optional<CellDensity>& limit,
                                   const std::optional<CellDensity>& ulam, const EmpiricalDensityOptions& opts) {
  family.check_eps(eps);
  if (n_cells < 1) throw ConfigError("empirical_density: need at least one cell");
  if (opts.chunks < 2) throw ConfigError("empirical_density: need at least 2 chunks");
  if (opts.start_state && (*opts.start_state < 0 || *opts.start_state >= family.m()))
    throw ConfigError("empirical_density: start state out of range");
  const BranchTable table(family, eps);
  const int m = family.m();
  const std::uint64_t per_chunk = (total_steps + opts.chunks - 1) / opts.chunks;
  const Interval start = opts.start_state ? family.interval(*opts.start_state) : Interval{0.0, 1.0};
  std::vector<std::vector<std::uint64_t>> chunk_counts(opts.chunks, std::vector<std::uint64_t>(m, 0));

  auto fill = [&](std::size_t c, std::vector<std::uint64_t>& hist) {
    RandomStream init(seed, StreamPurpose::histogram, c);
    std::optional<RandomStream> dither;
    if (opts.dither) dither.emplace(seed, StreamPurpose::dither, detail::kDitherHistogram + c);
    RandomStream* d = dither ? &*dither : nullptr;
    double x = start.lo + init.uniform() * start.length();
    x = burn(table, x, opts.burn_in, d);
    auto& counts = chunk_counts[c];
    for (std::uint64_t k = 0; k < per_chunk; ++k) {
      const auto cell = std::min(static_cast<std::size_t>(x * static_cast<double>(n_cells)), n_cells - 1);
      ++hist[cell];
      ++counts[static_cast<std::size_t>(family.state_of(x))];
      x = detail::advance(table, x, d);
    }
  };
  const auto hist = opts.exec == kernels::Exec::parallel ? kernels::histogram_parallel(opts.chunks, n_cells, fill)
                                                         : kernels::histogram_reference(opts.chunks, n_cells, fill);

  EmpiricalDensity out;
  out.total_steps = per_chunk * opts.chunks;
  const double total = static_cast<double>(out.total_steps);
  out.histogram.source = DensitySource::empirical;
  out.histogram.values.resize(n_cells);
  for (std::size_t k = 0; k < n_cells; ++k)
    out.histogram.values[k] = static_cast<double>(hist[k]) * static_cast<double>(n_cells) / total;

  std::vector<double> frac(opts.chunks);
  for (int j = 0; j < m; ++j) {
    std::uint64_t count = 0;
    for (std::size_t c = 0; c < opts.chunks; ++c) {
      count += chunk_counts[c][static_cast<std::size_t>(j)];
      frac[c] = static_cast<double>(chunk_counts[c][static_cast<std::size_t>(j)]) / static_cast<double>(per_chunk);
    }
    out.interval_masses.push_back(static_cast<double>(count) / total);
    out.interval_mass_se.push_back(stats::mean_var(frac).std_error());
  }
  if (limit) out.l1_to_limit = out.histogram.l1_distance(*limit);
  if (ulam) out.l1_to_ulam = out.histogram.l1_distance(*ulam);
  return out;
}

} // namespace metastab
