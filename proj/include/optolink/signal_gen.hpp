#pragma once

#include <optolink/types.hpp>

#include <cstdint>
#include <vector>

namespace optolink::signal {

/// Length convention for one PRBS period.
enum class PrbsPeriod {
    maximal_length, ///< plain m-sequence, 2^n - 1 bits
    power_of_two,   ///< m-sequence with one extra 0 in its longest zero run, 2^n bits
};

/// Feedback taps (polynomial exponents) of the primitive polynomial used for `order`.
std::vector<int> prbs_taps(int order);

/// One period of a Fibonacci LFSR sequence. order in [2, 31], seed != 0 (masked to order bits).
BitSequence generate_prbs(int order, std::uint32_t seed, double bitrate_hz = 10e9,
                          PrbsPeriod period = PrbsPeriod::power_of_two);

struct ModulatorParams {
    double analog_bandwidth_hz = 30e9;
    double extinction_ratio_db = 13.9;
    double chirp = 0.0;
    double avg_power_w = 1e-3;

    void validate() const;
};

/// Integral number of grid samples per bit; throws ParameterError otherwise.
std::size_t samples_per_bit(double grid_rate_hz, double bitrate_hz);

/// NRZ drive -> 5th-order Bessel band limit -> ideal intensity mapper -> chirp-free field.
/// The mean of |A|^2 is normalized to avg_power_w; imaginary parts are exactly zero.
ComplexEnvelope modulate(const BitSequence& bits, const ModulatorParams& params,
                         double grid_rate_hz);

} // namespace optolink::signal
