#include <optolink/fiber.hpp>

#include <optolink/fft.hpp>

namespace optolink::fiber {

void FiberParams::validate() const
{
    if (!(length_m >= 0.0)) throw ParameterError("fiber: length must be >= 0");
    if (!(alpha_db_per_km >= 0.0)) throw ParameterError("fiber: loss must be >= 0");
    if (!std::isfinite(beta2_ps2_per_m)) throw ParameterError("fiber: beta2 must be finite");
}

double FiberParams::beta2_from_dispersion_ps2_per_m() const
{
    const double d_s_per_m2 = dispersion_ps_nm_km * 1e-12 / (1e-9 * 1e3);
    const double lambda_m = lambda_nm * 1e-9;
    return -d_s_per_m2 * lambda_m * lambda_m / (kTwoPi * kSpeedOfLight) * 1e24;
}

double FiberParams::parameterization_mismatch() const
{
    const double from_d = beta2_from_dispersion_ps2_per_m();
    return std::abs(beta2_ps2_per_m - from_d) / std::abs(from_d);
}

double alpha_db_per_km_to_per_m(double alpha_db_per_km)
{
    return alpha_db_per_km * std::log(10.0) / 10.0 / 1000.0;
}

ComplexEnvelope propagate(const ComplexEnvelope& field, const FiberParams& fiber)
{
    fiber.validate();
    if (field.samples.empty()) throw ParameterError("propagate: empty field");
    if (fiber.length_m == 0.0) return field;

    const std::size_t n = field.size();
    const double z = fiber.length_m;
    const double half_beta2_z = 0.5 * fiber.beta2_s2_per_m() * z;
    const double amplitude = std::exp(-0.5 * alpha_db_per_km_to_per_m(fiber.alpha_db_per_km) * z);

    auto spectrum = fft::forward(field.samples);
    for (std::size_t k = 0; k < n; ++k) {
        const double omega = kTwoPi * fft::bin_frequency(k, n, field.sample_rate_hz);
        spectrum[k] *= amplitude * std::polar(1.0, half_beta2_z * omega * omega);
    }
    return ComplexEnvelope{fft::inverse(spectrum), field.sample_rate_hz};
}

double dispersion_length(double t0_s, const FiberParams& fiber)
{
    if (!(t0_s > 0.0)) throw ParameterError("dispersion_length: T0 must be positive");
    const double beta2 = std::abs(fiber.beta2_s2_per_m());
    if (beta2 == 0.0) throw ParameterError("dispersion_length: beta2 is zero (no dispersion)");
    return t0_s * t0_s / beta2;
}

double dispersion_length_from_d(double t0_s, const FiberParams& fiber)
{
    if (!(t0_s > 0.0)) throw ParameterError("dispersion_length: T0 must be positive");
    const double d_s_per_m2 = std::abs(fiber.dispersion_ps_nm_km) * 1e-12 / (1e-9 * 1e3);
    if (d_s_per_m2 == 0.0) throw ParameterError("dispersion_length: D is zero (no dispersion)");
    const double lambda_m = fiber.lambda_nm * 1e-9;
    return kTwoPi * kSpeedOfLight * t0_s * t0_s / (lambda_m * lambda_m * d_s_per_m2);
}

TapRecommendation recommend_taps(double bitrate_hz, double length_m, const FiberParams& fiber,
                                 double delta_omega_rad_s, double delta_t_s)
{
    if (!(bitrate_hz > 0.0) || !(delta_t_s > 0.0) || !(length_m >= 0.0) ||
        !(delta_omega_rad_s > 0.0)) {
        throw ParameterError("recommend_taps: arguments must be positive");
    }
    TapRecommendation rec;
    rec.broadening_s = std::abs(length_m * fiber.beta2_s2_per_m() * delta_omega_rad_s);
    rec.pulse_width_s = 1.0 / bitrate_hz + rec.broadening_s;
    // Truncate, but absorb representation error so exact multiples (100 ps / 50 ps) stay exact.
    rec.n_taps = static_cast<int>(std::floor(rec.pulse_width_s / delta_t_s * (1.0 + 1e-12)));
    return rec;
}

} // namespace optolink::fiber
