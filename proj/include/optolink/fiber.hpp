#pragma once

#include <optolink/types.hpp>

namespace optolink::fiber {

/// Standard single-mode fiber. beta2 drives propagation; D is kept for the
/// dispersion-length report only.
struct FiberParams {
    double length_m = 0.0;
    double beta2_ps2_per_m = -0.021;
    double alpha_db_per_km = 0.2;
    double dispersion_ps_nm_km = 17.2;
    double lambda_nm = 1550.0;

    void validate() const;

    double beta2_s2_per_m() const { return beta2_ps2_per_m * 1e-24; }

    /// beta2 implied by D and lambda: -D lambda^2 / (2 pi c0), in ps^2/m.
    double beta2_from_dispersion_ps2_per_m() const;

    /// |beta2 - beta2(D)| / |beta2(D)|.
    double parameterization_mismatch() const;
};

/// dB/km -> 1/m (power attenuation coefficient, ln(10)/10/1000 scaling).
double alpha_db_per_km_to_per_m(double alpha_db_per_km);

/// Linear dispersive, lossy propagation in one Fourier step over the periodic field:
/// A(z, w) = exp(i z beta2/2 w^2 - alpha z / 2) A(0, w).
ComplexEnvelope propagate(const ComplexEnvelope& field, const FiberParams& fiber);

/// T0^2 / |beta2|, meters. Throws ParameterError for beta2 == 0 or T0 <= 0.
double dispersion_length(double t0_s, const FiberParams& fiber);

/// 2 pi c0 T0^2 / (lambda^2 |D|), meters.
double dispersion_length_from_d(double t0_s, const FiberParams& fiber);

struct TapRecommendation {
    int n_taps = 0;
    double broadening_s = 0.0;  ///< |L beta2 dw|
    double pulse_width_s = 0.0; ///< 1/B + broadening
};

/// Tap count for a delay-line equalizer: int((1/B + |L beta2 dw|) / dt), truncated.
TapRecommendation recommend_taps(double bitrate_hz, double length_m, const FiberParams& fiber,
                                 double delta_omega_rad_s, double delta_t_s);

} // namespace optolink::fiber
