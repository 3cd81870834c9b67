#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace optolink {

using Complex = std::complex<double>;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kSpeedOfLight = 299'792'458.0;

/// Raised when an operation receives arguments outside its contract.
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a computation is well-posed but degenerate (flat trace, empty class).
class DegenerateSignalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct BitSequence {
    std::vector<std::uint8_t> bits;
    double bitrate_hz = 10e9;

    std::size_t size() const noexcept { return bits.size(); }
};

/// Real, uniformly sampled waveform. Units depend on the stage (mV after detection).
struct SampledWaveform {
    std::vector<double> samples;
    double sample_rate_hz = 0.0;
    double t0_s = 0.0;

    std::size_t size() const noexcept { return samples.size(); }
};

/// Complex optical field envelope in sqrt(W) on a uniform grid.
struct ComplexEnvelope {
    std::vector<Complex> samples;
    double sample_rate_hz = 0.0;

    std::size_t size() const noexcept { return samples.size(); }

    double energy_j() const
    {
        double acc = 0.0;
        for (const auto& s : samples) acc += std::norm(s);
        return acc / sample_rate_hz;
    }

    double mean_power_w() const
    {
        if (samples.empty()) return 0.0;
        double acc = 0.0;
        for (const auto& s : samples) acc += std::norm(s);
        return acc / static_cast<double>(samples.size());
    }
};

/// Mean/spread of the low and high levels plus the decision threshold.
struct LevelStats {
    double i0 = 0.0;
    double i1 = 0.0;
    double sigma0 = 0.0;
    double sigma1 = 0.0;
    double threshold = 0.0;
};

inline double db_to_power_ratio(double db) { return std::pow(10.0, db / 10.0); }
inline double power_ratio_to_db(double ratio) { return 10.0 * std::log10(ratio); }
inline double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }
inline double mw_to_dbm(double mw) { return 10.0 * std::log10(mw); }

using Rng = std::mt19937_64;

/// Independent stream keyed by an arbitrary tuple of integers, e.g.
/// (master_seed, acquisition_index). Same keys always give the same stream.
inline Rng make_rng(std::initializer_list<std::uint64_t> keys)
{
    std::vector<std::uint32_t> words;
    words.reserve(2 * keys.size() + 1);
    words.push_back(0x6f70746fu);
    for (auto k : keys) {
        words.push_back(static_cast<std::uint32_t>(k & 0xffffffffu));
        words.push_back(static_cast<std::uint32_t>(k >> 32));
    }
    std::seed_seq seq(words.begin(), words.end());
    return Rng(seq);
}

/// Derives a 64-bit child seed from a parent seed and stream indices.
inline std::uint64_t derive_seed(std::initializer_list<std::uint64_t> keys)
{
    auto rng = make_rng(keys);
    return rng();
}

/// Ratio of two rates that must be a positive integer (samples per bit, decimation).
inline std::size_t integral_ratio(double numerator, double denominator, const char* what)
{
    if (!(numerator > 0.0) || !(denominator > 0.0)) {
        throw ParameterError(std::string(what) + ": rates must be positive");
    }
    const double ratio = numerator / denominator;
    const double rounded = std::round(ratio);
    if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-6 * rounded) {
        throw ParameterError(std::string(what) + ": ratio " + std::to_string(ratio) +
                             " is not a positive integer");
    }
    return static_cast<std::size_t>(rounded);
}

} // namespace optolink
