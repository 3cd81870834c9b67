#pragma once

#include <optolink/types.hpp>

#include <span>
#include <vector>

namespace optolink::perceptron {

/// Configuration of the delayed complex perceptron. Channel k (0-based) is delayed
/// by k * delta_t_s, attenuated by attenuation_db[k] and phase shifted by a heater.
/// Channel 0 is the undelayed reference and carries no tunable phase.
struct DeviceState {
    int n_taps = 4;
    double delta_t_s = 50e-12;
    std::vector<double> attenuation_db{0.0, 2.1, 4.3, 6.4};
    std::vector<double> phase_offsets_rad{0.0, 0.0, 0.0, 0.0};
    std::vector<double> currents_ma{0.0, 0.0, 0.0, 0.0};
    std::vector<double> gamma_rad_per_ma2{0.01, 0.01, 0.01, 0.01};
    double insertion_loss_db = 8.2; ///< grating/insertion loss, reported only
    double current_min_ma = 0.0;
    double current_max_ma = 30.0;

    /// Throws ParameterError on inconsistent sizes, attenuation_db[0] != 0 or currents out of bounds.
    void validate() const;

    /// Same device with n_taps channels, all currents and offsets zero.
    static DeviceState with_taps(int n_taps, double delta_t_s, std::vector<double> attenuation_db);

    /// Copy with the trainable currents (channels 1..n-1) replaced.
    DeviceState with_currents(std::span<const double> trainable_currents_ma) const;
};

/// phi_k = phi_k^0 + i_k^2 gamma_k for k >= 1; phi_0 = 0.
std::vector<double> phases_from_currents(const DeviceState& state);

/// Inverse of phases_from_currents for channels 1..n-1: the smallest current whose
/// phase equals the requested one modulo 2 pi. Throws if it exceeds the current bounds.
std::vector<double> currents_for_phases(const DeviceState& state,
                                        std::span<const double> trainable_phases_rad);

/// |w_k| = 10^(-attenuation_db[k] / 20).
std::vector<double> tap_magnitudes(const DeviceState& state);

/// w_k = a_k exp(i phi_k).
std::vector<Complex> tap_weights(const DeviceState& state);

/// Overall amplitude factor of the ideal 1xN splitter and Nx1 combiner (1/N).
double combiner_scale(const DeviceState& state);

/// Delay of one tap in grid samples; throws if delta_t is not a whole number of samples.
std::size_t tap_delay_samples(const DeviceState& state, double sample_rate_hz);

/// out(t) = (1/N) sum_k w_k u(t - k delta_t), delays as circular sample shifts.
ComplexEnvelope apply(const ComplexEnvelope& field, const DeviceState& state);

/// Same as apply() with explicit weights (length n_taps); used by the phase-space optimizer.
ComplexEnvelope apply_weights(const ComplexEnvelope& field, std::size_t delay_samples,
                              std::span<const Complex> weights, double scale);

/// -10 log10(P_out / P_in) for this field, excluding the fixed insertion loss.
double excess_loss_db(const DeviceState& state, const ComplexEnvelope& field);

} // namespace optolink::perceptron
