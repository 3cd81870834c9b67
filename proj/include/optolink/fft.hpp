#pragma once

#include <optolink/types.hpp>

#include <span>
#include <vector>

namespace optolink::fft {

// Thin FFTW wrapper. Plans are created once per (size, kind) under a mutex and
// executed with the new-array interface, so concurrent calls are safe.

/// Unnormalized forward transform, X[k] = sum_n x[n] exp(-2 pi i k n / N).
std::vector<Complex> forward(std::span<const Complex> x);

/// Normalized inverse transform (includes the 1/N factor).
std::vector<Complex> inverse(std::span<const Complex> spectrum);

/// Real-input forward transform, returns N/2 + 1 bins.
std::vector<Complex> forward_real(std::span<const double> x);

/// Normalized inverse of forward_real for a signal of length n.
std::vector<double> inverse_real(std::span<const Complex> half_spectrum, std::size_t n);

/// Signed frequency of bin k in standard FFT ordering (DC first, negatives in the upper half).
inline double bin_frequency(std::size_t k, std::size_t n, double sample_rate_hz)
{
    const auto sk = static_cast<double>(k);
    const auto sn = static_cast<double>(n);
    return (k <= (n - 1) / 2 ? sk : sk - sn) * sample_rate_hz / sn;
}

} // namespace optolink::fft
