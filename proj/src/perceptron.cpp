#include <optolink/perceptron.hpp>

#include <algorithm>

namespace optolink::perceptron {
namespace {

double wrap_two_pi(double phase)
{
    double r = std::fmod(phase, kTwoPi);
    return r < 0.0 ? r + kTwoPi : r;
}

} // namespace

void DeviceState::validate() const
{
    if (n_taps < 1) throw ParameterError("device: n_taps must be >= 1");
    const auto n = static_cast<std::size_t>(n_taps);
    if (attenuation_db.size() != n || phase_offsets_rad.size() != n || currents_ma.size() != n ||
        gamma_rad_per_ma2.size() != n) {
        throw ParameterError("device: per-channel vectors must have n_taps entries");
    }
    if (attenuation_db.front() != 0.0) {
        throw ParameterError("device: channel 1 is the undelayed reference (0 dB)");
    }
    if (std::any_of(attenuation_db.begin(), attenuation_db.end(), [](double a) { return !(a >= 0.0); })) {
        throw ParameterError("device: attenuations must be >= 0 dB");
    }
    if (!(delta_t_s > 0.0)) throw ParameterError("device: delta_t must be positive");
    if (!(current_max_ma > current_min_ma)) throw ParameterError("device: empty current range");
    for (double i : currents_ma) {
        if (!std::isfinite(i) || i < current_min_ma || i > current_max_ma) {
            throw ParameterError("device: current " + std::to_string(i) + " mA outside [" +
                                 std::to_string(current_min_ma) + ", " +
                                 std::to_string(current_max_ma) + "]");
        }
    }
}

DeviceState DeviceState::with_taps(int n_taps, double delta_t_s, std::vector<double> attenuation_db)
{
    if (n_taps < 1) throw ParameterError("device: n_taps must be >= 1");
    const auto n = static_cast<std::size_t>(n_taps);
    DeviceState s;
    s.n_taps = n_taps;
    s.delta_t_s = delta_t_s;
    s.attenuation_db = std::move(attenuation_db);
    s.phase_offsets_rad.assign(n, 0.0);
    s.currents_ma.assign(n, 0.0);
    s.gamma_rad_per_ma2.assign(n, 0.01);
    s.validate();
    return s;
}

DeviceState DeviceState::with_currents(std::span<const double> trainable_currents_ma) const
{
    if (trainable_currents_ma.size() + 1 != static_cast<std::size_t>(n_taps)) {
        throw ParameterError("device: expected n_taps - 1 trainable currents");
    }
    DeviceState s = *this;
    s.currents_ma[0] = 0.0;
    std::copy(trainable_currents_ma.begin(), trainable_currents_ma.end(), s.currents_ma.begin() + 1);
    s.validate();
    return s;
}

std::vector<double> phases_from_currents(const DeviceState& state)
{
    state.validate();
    std::vector<double> phases(state.currents_ma.size(), 0.0);
    for (std::size_t k = 1; k < phases.size(); ++k) {
        const double i = state.currents_ma[k];
        phases[k] = state.phase_offsets_rad[k] + i * i * state.gamma_rad_per_ma2[k];
    }
    return phases;
}

std::vector<double> currents_for_phases(const DeviceState& state,
                                        std::span<const double> trainable_phases_rad)
{
    if (trainable_phases_rad.size() + 1 != static_cast<std::size_t>(state.n_taps)) {
        throw ParameterError("device: expected n_taps - 1 phases");
    }
    std::vector<double> currents(trainable_phases_rad.size());
    for (std::size_t j = 0; j < currents.size(); ++j) {
        const std::size_t k = j + 1;
        const double gamma = state.gamma_rad_per_ma2[k];
        if (!(gamma > 0.0)) throw ParameterError("device: gamma must be positive to invert phases");
        const double excess = wrap_two_pi(trainable_phases_rad[j] - state.phase_offsets_rad[k]);
        currents[j] = std::sqrt(excess / gamma);
        if (currents[j] < state.current_min_ma || currents[j] > state.current_max_ma) {
            throw ParameterError("device: phase not reachable within the current bounds");
        }
    }
    return currents;
}

std::vector<double> tap_magnitudes(const DeviceState& state)
{
    std::vector<double> a(state.attenuation_db.size());
    for (std::size_t k = 0; k < a.size(); ++k) a[k] = std::pow(10.0, -state.attenuation_db[k] / 20.0);
    return a;
}

std::vector<Complex> tap_weights(const DeviceState& state)
{
    const auto a = tap_magnitudes(state);
    const auto phi = phases_from_currents(state);
    std::vector<Complex> w(a.size());
    for (std::size_t k = 0; k < w.size(); ++k) w[k] = std::polar(a[k], phi[k]);
    return w;
}

double combiner_scale(const DeviceState& state) { return 1.0 / static_cast<double>(state.n_taps); }

std::size_t tap_delay_samples(const DeviceState& state, double sample_rate_hz)
{
    const double samples = state.delta_t_s * sample_rate_hz;
    const double rounded = std::round(samples);
    if (rounded < 1.0 || std::abs(samples - rounded) > 1e-6 * rounded) {
        throw ParameterError("device: delta_t is not a whole number of grid samples");
    }
    return static_cast<std::size_t>(rounded);
}

ComplexEnvelope apply_weights(const ComplexEnvelope& field, std::size_t delay_samples,
                              std::span<const Complex> weights, double scale)
{
    const std::size_t n = field.size();
    if (n == 0) throw ParameterError("device: empty field");
    ComplexEnvelope out{std::vector<Complex>(n, Complex{}), field.sample_rate_hz};
    const auto& u = field.samples;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        const Complex w = scale * weights[k];
        const std::size_t shift = (k * delay_samples) % n;
        // out[t] += w * u[t - shift] (circular)
        for (std::size_t t = 0; t < shift; ++t) out.samples[t] += w * u[t + n - shift];
        for (std::size_t t = shift; t < n; ++t) out.samples[t] += w * u[t - shift];
    }
    return out;
}

ComplexEnvelope apply(const ComplexEnvelope& field, const DeviceState& state)
{
    const auto weights = tap_weights(state);
    return apply_weights(field, tap_delay_samples(state, field.sample_rate_hz), weights,
                         combiner_scale(state));
}

double excess_loss_db(const DeviceState& state, const ComplexEnvelope& field)
{
    const double p_in = field.mean_power_w();
    if (!(p_in > 0.0)) throw DegenerateSignalError("excess_loss: input power is zero");
    const double p_out = apply(field, state).mean_power_w();
    return -power_ratio_to_db(p_out / p_in);
}

} // namespace optolink::perceptron
