#pragma once

// Spectral helpers over FFTW. All functions are thread-safe.

#include <complex>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace copresence::dsp {

using Complex = std::complex<double>;

/// Real-to-complex DFT, unnormalized. Returns n/2 + 1 bins.
std::vector<Complex> rfft(std::span<const double> x);

/// Inverse of rfft for a length-n signal, normalized by 1/n.
std::vector<double> irfft(std::span<const Complex> spectrum, std::size_t n);

std::size_t next_pow2(std::size_t n) noexcept;

/// Full linear cross-correlation c[k] = sum_n a[n] * b[n + lag] for
/// lag = k - (a.size() - 1), i.e. lags from -(a.size()-1) to b.size()-1.
std::vector<double> cross_correlation(std::span<const double> a, std::span<const double> b);

/// Zero-phase filtering: multiplies each DFT bin by gain(frequency_hz).
std::vector<double> filter_frequency_response(std::span<const double> x, double sample_rate,
                                              const std::function<double(double)>& gain);

/// y[n] = x[n] - coef * x[n-1], y[0] = x[0].
std::vector<double> pre_emphasis(std::span<const double> x, double coef);

/// Magnitude response of an n-th order Butterworth high-pass at `cutoff_hz`.
double butterworth_highpass_gain(double f, double cutoff_hz, int order) noexcept;
double butterworth_lowpass_gain(double f, double cutoff_hz, int order) noexcept;

}  // namespace copresence::dsp
