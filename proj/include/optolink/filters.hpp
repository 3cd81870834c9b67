#pragma once

#include <optolink/types.hpp>

#include <span>
#include <vector>

namespace optolink::filters {

/// -3 dB angular frequency (rad/s) of the delay-normalized 5th-order Bessel
/// prototype 945 / (s^5 + 15 s^4 + 105 s^3 + 420 s^2 + 945 s + 945).
double bessel5_prototype_cutoff();

/// Response of the 5th-order Bessel low-pass scaled so |H(cutoff_hz)|^2 = 1/2.
/// H(-f) = conj(H(f)), H(0) = 1.
Complex bessel5_response(double f_hz, double cutoff_hz);

/// Group delay at DC of the scaled filter, in seconds.
double bessel5_group_delay(double cutoff_hz);

/// Frequency-domain Bessel low-pass applied over a periodic real sequence of fixed length.
/// The response is precomputed once so the same object can filter many acquisitions.
class BesselLowpass {
public:
    BesselLowpass(std::size_t n, double sample_rate_hz, double cutoff_hz);

    std::vector<double> apply(std::span<const double> x) const;

    /// Sum of |H_k|^2 / N over all N bins: output variance of filtered unit white noise.
    double noise_power_gain() const;

    std::size_t size() const noexcept { return n_; }

private:
    std::size_t n_;
    std::vector<Complex> half_response_;
};

/// One-shot convenience wrapper around BesselLowpass.
std::vector<double> bessel_lowpass(std::span<const double> x, double sample_rate_hz,
                                   double cutoff_hz);

} // namespace optolink::filters
