#include <optolink/filters.hpp>

#include <optolink/fft.hpp>

#include <array>

namespace optolink::filters {
namespace {

constexpr std::array<double, 6> kBessel5 = {945.0, 945.0, 420.0, 105.0, 15.0, 1.0};

Complex prototype(double omega)
{
    const Complex s(0.0, omega);
    Complex denom = kBessel5.back();
    for (int i = static_cast<int>(kBessel5.size()) - 2; i >= 0; --i) denom = denom * s + kBessel5[i];
    return kBessel5.front() / denom;
}

double solve_cutoff()
{
    double lo = 1.0, hi = 4.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (std::norm(prototype(mid)) > 0.5 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace

double bessel5_prototype_cutoff()
{
    static const double cutoff = solve_cutoff();
    return cutoff;
}

Complex bessel5_response(double f_hz, double cutoff_hz)
{
    if (!(cutoff_hz > 0.0)) throw ParameterError("bessel: cutoff must be positive");
    return prototype(f_hz / cutoff_hz * bessel5_prototype_cutoff());
}

double bessel5_group_delay(double cutoff_hz)
{
    // Prototype has unit group delay at DC.
    return bessel5_prototype_cutoff() / (kTwoPi * cutoff_hz);
}

BesselLowpass::BesselLowpass(std::size_t n, double sample_rate_hz, double cutoff_hz)
    : n_(n), half_response_(n / 2 + 1)
{
    if (n == 0) throw ParameterError("bessel: empty sequence");
    if (!(sample_rate_hz > 0.0)) throw ParameterError("bessel: sample rate must be positive");
    for (std::size_t k = 0; k < half_response_.size(); ++k) {
        const double f = static_cast<double>(k) * sample_rate_hz / static_cast<double>(n);
        half_response_[k] = bessel5_response(f, cutoff_hz);
    }
}

std::vector<double> BesselLowpass::apply(std::span<const double> x) const
{
    if (x.size() != n_) throw ParameterError("bessel: input length does not match the filter");
    auto spectrum = fft::forward_real(x);
    for (std::size_t k = 0; k < spectrum.size(); ++k) spectrum[k] *= half_response_[k];
    return fft::inverse_real(spectrum, n_);
}

double BesselLowpass::noise_power_gain() const
{
    double acc = std::norm(half_response_.front());
    const std::size_t last = half_response_.size() - 1;
    for (std::size_t k = 1; k < half_response_.size(); ++k) {
        const bool nyquist = (n_ % 2 == 0) && k == last;
        acc += (nyquist ? 1.0 : 2.0) * std::norm(half_response_[k]);
    }
    return acc / static_cast<double>(n_);
}

std::vector<double> bessel_lowpass(std::span<const double> x, double sample_rate_hz,
                                   double cutoff_hz)
{
    return BesselLowpass(x.size(), sample_rate_hz, cutoff_hz).apply(x);
}

} // namespace optolink::filters
