#include <optolink/metrics.hpp>

#include <optolink/fft.hpp>

#include <algorithm>
#include <limits>
#include <numeric>
#include <ostream>

namespace optolink::metrics {
namespace {

struct Centered {
    std::vector<double> values;
    double norm = 0.0;
};

Centered center(const std::vector<double>& x)
{
    Centered c{x, 0.0};
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    for (auto& v : c.values) {
        v -= mean;
        c.norm += v * v;
    }
    c.norm = std::sqrt(c.norm);
    return c;
}

void require_comparable(const SampledWaveform& a, const SampledWaveform& b)
{
    if (a.size() != b.size() || a.samples.empty()) {
        throw ParameterError("align: traces must be non-empty and of equal length");
    }
    if (std::abs(a.sample_rate_hz - b.sample_rate_hz) > 1e-9 * a.sample_rate_hz) {
        throw ParameterError("align: sample rates differ");
    }
}

struct ClassMoments {
    double mean = 0.0;
    double sigma = 0.0;
    std::size_t count = 0;
};

ClassMoments moments(const UndersampledTrace& t, std::uint8_t label)
{
    ClassMoments m;
    double sum = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t.labels[i] != label) continue;
        sum += t.values[i];
        ++m.count;
    }
    if (m.count == 0) return m;
    m.mean = sum / static_cast<double>(m.count);
    double ss = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t.labels[i] == label) ss += (t.values[i] - m.mean) * (t.values[i] - m.mean);
    }
    m.sigma = std::sqrt(ss / static_cast<double>(m.count));
    return m;
}

void require_labels(const UndersampledTrace& t)
{
    if (t.values.empty()) throw ParameterError("trace is empty");
    if (t.labels.size() != t.values.size()) throw ParameterError("trace labels and values differ in length");
}

} // namespace

std::size_t align(const SampledWaveform& input, const SampledWaveform& output)
{
    require_comparable(input, output);
    const auto a = center(input.samples);
    const auto b = center(output.samples);
    if (a.norm == 0.0 || b.norm == 0.0) throw DegenerateSignalError("align: flat trace");

    const std::vector<Complex> ca(a.values.begin(), a.values.end());
    const std::vector<Complex> cb(b.values.begin(), b.values.end());
    auto fa = fft::forward(ca);
    const auto fb = fft::forward(cb);
    for (std::size_t k = 0; k < fa.size(); ++k) fa[k] = std::conj(fa[k]) * fb[k];
    const auto xc = fft::inverse(fa);

    std::size_t best = 0;
    for (std::size_t s = 1; s < xc.size(); ++s) {
        if (xc[s].real() > xc[best].real()) best = s;
    }
    return best;
}

double correlation_at(const SampledWaveform& input, const SampledWaveform& output, std::size_t shift)
{
    require_comparable(input, output);
    const auto a = center(input.samples);
    const auto b = center(output.samples);
    if (a.norm == 0.0 || b.norm == 0.0) throw DegenerateSignalError("correlation: flat trace");
    const std::size_t n = a.values.size();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a.values[i] * b.values[(i + shift) % n];
    return acc / (a.norm * b.norm);
}

SampledWaveform circular_shift(const SampledWaveform& wave, std::size_t shift)
{
    SampledWaveform out = wave;
    const std::size_t n = wave.size();
    if (n == 0) return out;
    shift %= n;
    std::rotate(out.samples.begin(), out.samples.begin() + static_cast<std::ptrdiff_t>(shift),
                out.samples.end());
    return out;
}

UndersampledTrace undersample(const SampledWaveform& aligned, std::span<const std::uint8_t> labels,
                              std::size_t samples_per_bit, int sample_index)
{
    if (samples_per_bit == 0) throw ParameterError("undersample: samples_per_bit must be >= 1");
    if (sample_index < 1 || static_cast<std::size_t>(sample_index) > samples_per_bit) {
        throw ParameterError("undersample: sample_index out of range");
    }
    if (aligned.size() % samples_per_bit != 0) {
        throw ParameterError("undersample: waveform does not hold whole bits");
    }
    if (labels.empty()) throw ParameterError("undersample: no labels");
    const std::size_t bits = aligned.size() / samples_per_bit;
    UndersampledTrace t;
    t.sample_index = sample_index;
    t.values.resize(bits);
    t.labels.resize(bits);
    const auto pick = static_cast<std::size_t>(sample_index - 1);
    for (std::size_t j = 0; j < bits; ++j) {
        t.values[j] = aligned.samples[j * samples_per_bit + pick];
        t.labels[j] = labels[j % labels.size()];
    }
    return t;
}

LevelStats level_stats(const UndersampledTrace& trace)
{
    require_labels(trace);
    const auto lo = moments(trace, 0);
    const auto hi = moments(trace, 1);
    if (lo.count == 0 || hi.count == 0) throw DegenerateSignalError("level_stats: one class is empty");
    return LevelStats{lo.mean, hi.mean, lo.sigma, hi.sigma, 0.5 * (lo.mean + hi.mean)};
}

SeparationLoss separation_loss_details(const UndersampledTrace& trace)
{
    const auto stats = level_stats(trace);
    const double cut0 = stats.i0 + kTailCutSigmas * stats.sigma0;
    const double cut1 = stats.i1 - kTailCutSigmas * stats.sigma1;

    double sum0 = 0.0, sum1 = 0.0;
    std::size_t n0 = 0, n1 = 0, total0 = 0, total1 = 0;
    double max0 = -std::numeric_limits<double>::infinity();
    double min1 = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const double v = trace.values[i];
        if (trace.labels[i] == 0) {
            ++total0;
            max0 = std::max(max0, v);
            if (v > cut0) {
                sum0 += v;
                ++n0;
            }
        } else {
            ++total1;
            min1 = std::min(min1, v);
            if (v < cut1) {
                sum1 += v;
                ++n1;
            }
        }
    }

    SeparationLoss out;
    out.fallback0 = n0 == 0;
    out.fallback1 = n1 == 0;
    out.e0 = out.fallback0 ? max0 : sum0 / static_cast<double>(n0);
    out.e1 = out.fallback1 ? min1 : sum1 / static_cast<double>(n1);
    out.tail_fraction0 = static_cast<double>(n0) / static_cast<double>(total0);
    out.tail_fraction1 = static_cast<double>(n1) / static_cast<double>(total1);
    out.loss = out.e0 - out.e1;
    return out;
}

double separation_loss(const UndersampledTrace& trace) { return separation_loss_details(trace).loss; }

BerCount ber_count(std::span<const UndersampledTrace> traces)
{
    if (traces.empty()) throw ParameterError("ber_count: no traces");
    BerCount best;
    bool have = false;
    for (const auto& t : traces) {
        require_labels(t);
        const auto [mn, mx] = std::minmax_element(t.values.begin(), t.values.end());
        const double lo = *mn;
        const double span = *mx - *mn;
        for (int level = 0; level < kThresholdLevels; ++level) {
            const double thr = level == kThresholdLevels - 1
                                   ? *mx
                                   : lo + span * level / static_cast<double>(kThresholdLevels - 1);
            std::size_t errors = 0;
            for (std::size_t i = 0; i < t.size(); ++i) {
                const std::uint8_t decided = t.values[i] > thr ? 1 : 0;
                errors += decided != t.labels[i];
            }
            if (!have || errors < best.errors) {
                have = true;
                best.errors = errors;
                best.bits = t.size();
                best.threshold = thr;
                best.threshold_index = level;
                best.sample_index = t.sample_index;
            }
        }
    }
    best.ber = static_cast<double>(best.errors) / static_cast<double>(best.bits);
    return best;
}

double ber_model(const LevelStats& s)
{
    if (!(s.sigma0 > 0.0) || !(s.sigma1 > 0.0)) throw ParameterError("ber_model: sigmas must be positive");
    return 0.25 * (std::erfc((s.i1 - s.threshold) / (s.sigma1 * std::numbers::sqrt2)) +
                   std::erfc((s.threshold - s.i0) / (s.sigma0 * std::numbers::sqrt2)));
}

double optimal_threshold(LevelStats s)
{
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = std::min(s.i0, s.i1), b = std::max(s.i0, s.i1);
    auto f = [&](double x) {
        s.threshold = x;
        return ber_model(s);
    };
    double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
    double fc = f(c), fd = f(d);
    for (int i = 0; i < 200 && (b - a) > 1e-12 * (1.0 + std::abs(a)); ++i) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

double ber_floor(std::size_t acquisitions, std::size_t bits_per_acquisition)
{
    if (acquisitions == 0 || bits_per_acquisition == 0) throw ParameterError("ber_floor: empty measurement");
    return 1.0 / (static_cast<double>(acquisitions) * static_cast<double>(bits_per_acquisition));
}

Histogram level_histogram(const UndersampledTrace& trace, std::size_t bins)
{
    require_labels(trace);
    if (bins == 0) throw ParameterError("histogram: bins must be >= 1");
    const auto [mn, mx] = std::minmax_element(trace.values.begin(), trace.values.end());
    Histogram h;
    h.lo = *mn;
    h.hi = *mx;
    h.bin_centers.resize(bins);
    h.count0.assign(bins, 0);
    h.count1.assign(bins, 0);
    for (std::size_t k = 0; k < bins; ++k) h.bin_centers[k] = (static_cast<double>(k) + 0.5) / static_cast<double>(bins);
    const double span = h.hi - h.lo;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const double u = span > 0.0 ? (trace.values[i] - h.lo) / span : 0.0;
        const auto k = std::min(static_cast<std::size_t>(u * static_cast<double>(bins)), bins - 1);
        (trace.labels[i] == 0 ? h.count0 : h.count1)[k] += 1;
    }
    return h;
}

void accumulate(Histogram& into, const Histogram& other)
{
    if (into.bin_centers.empty()) {
        into = other;
        return;
    }
    if (into.count0.size() != other.count0.size()) throw ParameterError("histogram: bin counts differ");
    for (std::size_t k = 0; k < into.count0.size(); ++k) {
        into.count0[k] += other.count0[k];
        into.count1[k] += other.count1[k];
    }
}

double class_overlap(const Histogram& hist)
{
    const double n0 = static_cast<double>(std::accumulate(hist.count0.begin(), hist.count0.end(), std::size_t{0}));
    const double n1 = static_cast<double>(std::accumulate(hist.count1.begin(), hist.count1.end(), std::size_t{0}));
    if (n0 == 0.0 || n1 == 0.0) throw DegenerateSignalError("class_overlap: one class is empty");
    double acc = 0.0;
    for (std::size_t k = 0; k < hist.count0.size(); ++k) {
        acc += std::min(static_cast<double>(hist.count0[k]) / n0, static_cast<double>(hist.count1[k]) / n1);
    }
    return acc;
}

double band_occupancy(const Histogram& hist, int label, double lo, double hi)
{
    const auto& counts = label == 0 ? hist.count0 : hist.count1;
    const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::size_t{0}));
    if (total == 0.0) return 0.0;
    std::size_t in_band = 0;
    for (std::size_t k = 0; k < counts.size(); ++k) {
        if (hist.bin_centers[k] >= lo && hist.bin_centers[k] <= hi) in_band += counts[k];
    }
    return static_cast<double>(in_band) / total;
}

double population_in_band(const Histogram& hist, double lo, double hi)
{
    std::size_t total = 0, in_band = 0;
    for (std::size_t k = 0; k < hist.count0.size(); ++k) {
        const std::size_t c = hist.count0[k] + hist.count1[k];
        total += c;
        if (hist.bin_centers[k] >= lo && hist.bin_centers[k] <= hi) in_band += c;
    }
    return total == 0 ? 0.0 : static_cast<double>(in_band) / static_cast<double>(total);
}

std::vector<EyePoint> eye_points(const SampledWaveform& wave, double bitrate_hz)
{
    if (!(bitrate_hz > 0.0) || !(wave.sample_rate_hz > 0.0)) throw ParameterError("eye: rates must be positive");
    std::vector<EyePoint> pts(wave.size());
    for (std::size_t i = 0; i < wave.size(); ++i) {
        const double t_bits = (wave.t0_s + static_cast<double>(i) / wave.sample_rate_hz) * bitrate_hz;
        double phase = t_bits - std::floor(t_bits);
        if (phase >= 1.0 - 1e-9) phase = 0.0;
        pts[i] = EyePoint{phase, wave.samples[i]};
    }
    return pts;
}

void write_histogram_csv(std::ostream& os, const Histogram& hist)
{
    os << "value_bin,count_class0,count_class1\n";
    for (std::size_t k = 0; k < hist.bin_centers.size(); ++k) {
        os << hist.bin_centers[k] << ',' << hist.count0[k] << ',' << hist.count1[k] << '\n';
    }
}

void write_eye_csv(std::ostream& os, std::span<const EyePoint> points)
{
    os << "bit_phase,amplitude\n";
    for (const auto& p : points) os << p.bit_phase << ',' << p.amplitude << '\n';
}

} // namespace optolink::metrics
