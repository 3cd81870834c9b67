#pragma once

#include <optolink/filters.hpp>
#include <optolink/types.hpp>

#include <span>
#include <vector>

namespace optolink::receiver {

/// Photodiode + oscilloscope. Voltages in mV, noise variance sigma^2 = m V + q in mV^2.
struct ReceiverParams {
    double noise_m_mv = 0.0189;
    double noise_q_mv2 = 0.2263;
    double scope_bw_hz = 16e9;
    double scope_rate_hz = 40e9;
    int adc_bits = 8;
    double full_scale_mv = 100.0;
    double responsivity_mv_per_mw = 50.0;

    void validate() const;

    /// 28 GHz / 160 GSa/s front end used for the 40 Gbps studies.
    static ReceiverParams forty_gbps();
};

enum class DetectStatus {
    ok,
    overflow_warning, ///< more than half of the samples clipped at full scale
};

struct Detection {
    SampledWaveform waveform;         ///< scope-rate samples, mV, quantized
    std::size_t offset_samples = 0;   ///< grid index of the first scope sample
    DetectStatus status = DetectStatus::ok;
    double overflow_fraction = 0.0;
};

/// sigma^2 = m max(V, 0) + q.
double noise_variance(double v_mv, const ReceiverParams& params);

/// |field|^2 rescaled to a mean of prx_dbm, then converted to mV through the responsivity.
SampledWaveform to_voltage(const ComplexEnvelope& field, const ReceiverParams& params,
                           double prx_dbm);

/// Adds zero-mean Gaussian noise with signal-dependent variance, in place.
void add_noise(std::span<double> v_mv, const ReceiverParams& params, Rng& rng);

/// ADC code for a voltage: round(V / FS * (2^bits - 1)), clipped to [0, 2^bits - 1].
int adc_code(double v_mv, const ReceiverParams& params);

/// Quantizes in place to code * FS / (2^bits - 1). Returns the fraction of samples
/// clipped at full scale.
double quantize(std::span<double> v_mv, const ReceiverParams& params);

/// Every factor-th sample starting at offset.
SampledWaveform decimate(const SampledWaveform& wave, std::size_t factor, std::size_t offset);

/// Reusable detection engine for a fixed grid length: noise -> Bessel -> ADC -> decimation.
/// The filter response is computed once; acquire() is const and thread-safe.
class ReceiverChain {
public:
    ReceiverChain(const ReceiverParams& params, double grid_rate_hz, double bitrate_hz,
                  std::size_t n_samples);

    /// Random first-sample offset, uniform over the first quarter of a bit (grid samples).
    std::size_t draw_offset(Rng& rng) const;

    /// Runs the chain on a clean voltage trace; rng drives the offset then the noise.
    Detection acquire(std::span<const double> clean_mv, Rng& rng) const;

    /// Noiseless chain (filter + decimate, no ADC) at a given offset; used for the RX1 reference.
    SampledWaveform reference(std::span<const double> clean_mv, std::size_t offset) const;

    const ReceiverParams& params() const noexcept { return params_; }
    std::size_t decimation() const noexcept { return decimation_; }
    std::size_t samples_per_bit_grid() const noexcept { return sps_grid_; }
    std::size_t samples_per_bit_scope() const noexcept { return sps_grid_ / decimation_; }
    double grid_rate_hz() const noexcept { return grid_rate_hz_; }
    const filters::BesselLowpass& filter() const noexcept { return filter_; }

private:
    ReceiverParams params_;
    double grid_rate_hz_;
    std::size_t sps_grid_;
    std::size_t decimation_;
    filters::BesselLowpass filter_;
};

/// Convenience: to_voltage + ReceiverChain::acquire with a fresh RNG seeded from rng_seed.
Detection detect(const ComplexEnvelope& field, const ReceiverParams& params, double bitrate_hz,
                 double prx_dbm, std::uint64_t rng_seed);

/// Reported when the noise spread is zero.
inline constexpr double kSnrCapDb = 99.0;

/// 10 log10((I1 - I0)^2 / ((sigma0^2 + sigma1^2) / 2)); capped at kSnrCapDb for
/// noiseless levels. Throws DegenerateSignalError when I1 <= I0.
double snr_at_receiver(const LevelStats& stats);

/// Level statistics with sigma taken from the noise model at the clean levels i0, i1.
LevelStats model_level_stats(double i0_mv, double i1_mv, const ReceiverParams& params);

} // namespace optolink::receiver
