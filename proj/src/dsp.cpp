#include "copresence/dsp.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <utility>

namespace copresence::dsp {

namespace {

// FFTW planning is not thread-safe; execution with the new-array interface is.
// Plans are created once per (size, direction) with FFTW_UNALIGNED so they can
// run on std::vector storage.
class PlanCache {
 public:
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  fftw_plan get(std::size_t n, bool forward) {
    std::lock_guard lock(mu_);
    auto key = std::make_pair(n, forward);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    std::vector<double> real(n);
    std::vector<Complex> cplx(n / 2 + 1);
    auto* c = reinterpret_cast<fftw_complex*>(cplx.data());
    const int ni = static_cast<int>(n);
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED | (forward ? 0u : FFTW_DESTROY_INPUT);
    fftw_plan plan = forward ? fftw_plan_dft_r2c_1d(ni, real.data(), c, flags)
                             : fftw_plan_dft_c2r_1d(ni, c, real.data(), flags);
    plans_.emplace(key, plan);
    return plan;
  }

 private:
  std::mutex mu_;
  std::map<std::pair<std::size_t, bool>, fftw_plan> plans_;
};

PlanCache& cache() {
  static PlanCache c;
  return c;
}

}  // namespace

std::vector<Complex> rfft(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<Complex> out(n / 2 + 1);
  if (n == 0) return out;
  std::vector<double> in(x.begin(), x.end());
  fftw_execute_dft_r2c(cache().get(n, true), in.data(), reinterpret_cast<fftw_complex*>(out.data()));
  return out;
}

std::vector<double> irfft(std::span<const Complex> spectrum, std::size_t n) {
  std::vector<double> out(n);
  if (n == 0) return out;
  std::vector<Complex> in(spectrum.begin(), spectrum.end());
  in.resize(n / 2 + 1);
  fftw_execute_dft_c2r(cache().get(n, false), reinterpret_cast<fftw_complex*>(in.data()), out.data());
  const double scale = 1.0 / static_cast<double>(n);
  for (auto& v : out) v *= scale;
  return out;
}

std::size_t next_pow2(std::size_t n) noexcept {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

std::vector<double> cross_correlation(std::span<const double> a, std::span<const double> b) {
  const std::size_t na = a.size(), nb = b.size();
  if (na == 0 || nb == 0) return {};
  const std::size_t len = na + nb - 1;
  const std::size_t m = next_pow2(len);
  std::vector<double> pa(m, 0.0), pb(m, 0.0);
  std::copy(a.begin(), a.end(), pa.begin());
  std::copy(b.begin(), b.end(), pb.begin());
  auto fa = rfft(pa);
  auto fb = rfft(pb);
  for (std::size_t k = 0; k < fa.size(); ++k) fa[k] = std::conj(fa[k]) * fb[k];
  auto circ = irfft(fa, m);
  // circ[lag mod m] holds sum_n a[n] b[n + lag].
  std::vector<double> out(len);
  for (std::size_t k = 0; k < len; ++k) {
    const long lag = static_cast<long>(k) - static_cast<long>(na - 1);
    const std::size_t idx = lag >= 0 ? static_cast<std::size_t>(lag)
                                     : m - static_cast<std::size_t>(-lag);
    out[k] = circ[idx];
  }
  return out;
}

std::vector<double> filter_frequency_response(std::span<const double> x, double sample_rate,
                                              const std::function<double(double)>& gain) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  auto spec = rfft(x);
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double f = static_cast<double>(k) * sample_rate / static_cast<double>(n);
    spec[k] *= gain(f);
  }
  return irfft(spec, n);
}

std::vector<double> pre_emphasis(std::span<const double> x, double coef) {
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] - (i > 0 ? coef * x[i - 1] : 0.0);
  return y;
}

double butterworth_highpass_gain(double f, double cutoff_hz, int order) noexcept {
  if (f <= 0.0) return 0.0;
  const double r = std::pow(cutoff_hz / f, 2 * order);
  return 1.0 / std::sqrt(1.0 + r);
}

double butterworth_lowpass_gain(double f, double cutoff_hz, int order) noexcept {
  const double r = std::pow(f / cutoff_hz, 2 * order);
  return 1.0 / std::sqrt(1.0 + r);
}

}  // namespace copresence::dsp
