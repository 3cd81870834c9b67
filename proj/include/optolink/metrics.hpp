#pragma once

#include <optolink/types.hpp>

#include <iosfwd>
#include <span>
#include <vector>

namespace optolink::metrics {

/// One value per bit: the sample_index-th (1-based) scope sample of every bit, with its
/// ground-truth label.
struct UndersampledTrace {
    std::vector<double> values;
    std::vector<std::uint8_t> labels;
    int sample_index = 1;

    std::size_t size() const noexcept { return values.size(); }
};

/// Circular shift s maximizing the normalized cross-correlation of in[n] and out[n + s].
/// out[n] = in[n - 17] gives 17. Throws DegenerateSignalError for a flat trace.
std::size_t align(const SampledWaveform& input, const SampledWaveform& output);

/// Normalized circular cross-correlation value at a given shift (Pearson coefficient).
double correlation_at(const SampledWaveform& input, const SampledWaveform& output, std::size_t shift);

/// aligned[n] = wave[(n + shift) mod N].
SampledWaveform circular_shift(const SampledWaveform& wave, std::size_t shift);

/// Picks sample `sample_index` (1..samples_per_bit) of every bit. labels must hold one
/// entry per bit of the window (the bit pattern repeats if it is shorter).
UndersampledTrace undersample(const SampledWaveform& aligned, std::span<const std::uint8_t> labels,
                              std::size_t samples_per_bit, int sample_index);

/// Means and population standard deviations of the two classes; threshold = midpoint.
LevelStats level_stats(const UndersampledTrace& trace);

struct SeparationLoss {
    double loss = 0.0; ///< E[0] - E[1]
    double e0 = 0.0;   ///< mean of low-labeled values above I0 + 1.28 sigma0
    double e1 = 0.0;   ///< mean of high-labeled values below I1 - 1.28 sigma1
    double tail_fraction0 = 0.0;
    double tail_fraction1 = 0.0;
    bool fallback0 = false; ///< empty tail, E[0] fell back to the largest low value
    bool fallback1 = false; ///< empty tail, E[1] fell back to the smallest high value
};

inline constexpr double kTailCutSigmas = 1.28;

SeparationLoss separation_loss_details(const UndersampledTrace& trace);
double separation_loss(const UndersampledTrace& trace);

inline constexpr int kThresholdLevels = 10;

struct BerCount {
    double ber = 0.0;
    std::size_t errors = 0;
    std::size_t bits = 0;
    double threshold = 0.0;
    int threshold_index = 0;
    int sample_index = 1;
};

/// Minimum counted BER over the given traces (one per sample index) and 10 thresholds
/// linspace(min, max, 10) of each trace; a value > threshold is read as 1.
/// Ties go to the earlier trace, then the lower threshold.
BerCount ber_count(std::span<const UndersampledTrace> traces);

/// Gaussian two-level BER: 1/4 [erfc((I1 - ID)/(s1 sqrt2)) + erfc((ID - I0)/(s0 sqrt2))].
double ber_model(const LevelStats& stats);

/// Threshold in [I0, I1] minimizing ber_model (golden-section search).
double optimal_threshold(LevelStats stats);

/// Error-free floor 1 / (acquisitions * bits per acquisition).
double ber_floor(std::size_t acquisitions, std::size_t bits_per_acquisition);

// Eye and histogram exports.

struct Histogram {
    std::vector<double> bin_centers; ///< normalized amplitude, [0, 1]
    std::vector<std::size_t> count0;
    std::vector<std::size_t> count1;
    double lo = 0.0; ///< raw value mapped to 0
    double hi = 1.0; ///< raw value mapped to 1
};

/// Per-class histogram of the trace values normalized to [0, 1] by min/max.
Histogram level_histogram(const UndersampledTrace& trace, std::size_t bins = 50);

/// Merges histograms built on the same bin edges.
void accumulate(Histogram& into, const Histogram& other);

/// sum_k min(p0[k], p1[k]) with p normalized per class.
double class_overlap(const Histogram& hist);

/// Fraction of class `label` values whose normalized amplitude lies in [lo, hi].
double band_occupancy(const Histogram& hist, int label, double lo, double hi);
/// Same over both classes together: share of the whole population in [lo, hi].
double population_in_band(const Histogram& hist, double lo, double hi);

struct EyePoint {
    double bit_phase; ///< [0, 1) position within the bit
    double amplitude;
};

/// Folds a waveform modulo the bit period.
std::vector<EyePoint> eye_points(const SampledWaveform& wave, double bitrate_hz);

void write_histogram_csv(std::ostream& os, const Histogram& hist);
void write_eye_csv(std::ostream& os, std::span<const EyePoint> points);

} // namespace optolink::metrics
