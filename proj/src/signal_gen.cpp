#include <optolink/signal_gen.hpp>

#include <optolink/filters.hpp>

#include <algorithm>
#include <array>
#include <numeric>

namespace optolink::signal {
namespace {

// Maximal-length feedback taps, orders 2..31. Order 10 uses x^10 + x^7 + 1.
const std::array<std::vector<int>, 32> kTaps = {{
    {},
    {},
    {2, 1},
    {3, 2},
    {4, 3},
    {5, 3},
    {6, 5},
    {7, 6},
    {8, 6, 5, 4},
    {9, 5},
    {10, 7},
    {11, 9},
    {12, 6, 4, 1},
    {13, 4, 3, 1},
    {14, 5, 3, 1},
    {15, 14},
    {16, 15, 13, 4},
    {17, 14},
    {18, 11},
    {19, 6, 2, 1},
    {20, 17},
    {21, 19},
    {22, 21},
    {23, 18},
    {24, 23, 22, 17},
    {25, 22},
    {26, 6, 2, 1},
    {27, 5, 2, 1},
    {28, 25},
    {29, 27},
    {30, 6, 4, 1},
    {31, 28},
}};

// Inserts a 0 after the unique cyclic run of (order - 1) zeros.
std::vector<std::uint8_t> complete_zero_run(const std::vector<std::uint8_t>& mseq, int order)
{
    const std::size_t n = mseq.size();
    const auto run = static_cast<std::size_t>(order - 1);
    for (std::size_t start = 0; start < n; ++start) {
        bool zeros = mseq[(start + n - 1) % n] == 1;
        for (std::size_t j = 0; zeros && j < run; ++j) zeros = mseq[(start + j) % n] == 0;
        if (!zeros) continue;
        // Rotate so the run starts at index 0, insert, rotate back.
        std::vector<std::uint8_t> rotated(n);
        for (std::size_t j = 0; j < n; ++j) rotated[j] = mseq[(start + j) % n];
        rotated.insert(rotated.begin() + static_cast<std::ptrdiff_t>(run), std::uint8_t{0});
        std::vector<std::uint8_t> out(n + 1);
        for (std::size_t j = 0; j < n + 1; ++j) out[(start + j) % (n + 1)] = rotated[j];
        return out;
    }
    throw std::logic_error("prbs: zero run not found");
}

} // namespace

std::vector<int> prbs_taps(int order)
{
    if (order < 2 || order > 31) throw ParameterError("prbs: order must be in [2, 31]");
    return kTaps[static_cast<std::size_t>(order)];
}

BitSequence generate_prbs(int order, std::uint32_t seed, double bitrate_hz, PrbsPeriod period)
{
    const auto taps = prbs_taps(order);
    const std::uint32_t mask = (1u << order) - 1u;
    std::uint32_t state = seed & mask;
    if (state == 0) throw ParameterError("prbs: seed must be nonzero in the low `order` bits");
    if (!(bitrate_hz > 0.0)) throw ParameterError("prbs: bitrate must be positive");

    const std::size_t length = (std::size_t{1} << order) - 1;
    std::vector<std::uint8_t> bits(length);
    for (std::size_t i = 0; i < length; ++i) {
        bits[i] = static_cast<std::uint8_t>((state >> (order - 1)) & 1u);
        std::uint32_t feedback = 0;
        for (int t : taps) feedback ^= (state >> (t - 1)) & 1u;
        state = ((state << 1) | feedback) & mask;
    }
    if (period == PrbsPeriod::power_of_two) bits = complete_zero_run(bits, order);
    return BitSequence{std::move(bits), bitrate_hz};
}

void ModulatorParams::validate() const
{
    if (!(extinction_ratio_db > 0.0)) throw ParameterError("modulator: extinction ratio must be > 0 dB");
    if (chirp != 0.0) throw ParameterError("modulator: only chirp-free modulation is supported");
    if (!(analog_bandwidth_hz > 0.0)) throw ParameterError("modulator: bandwidth must be positive");
    if (!(avg_power_w > 0.0)) throw ParameterError("modulator: average power must be positive");
}

std::size_t samples_per_bit(double grid_rate_hz, double bitrate_hz)
{
    return integral_ratio(grid_rate_hz, bitrate_hz, "samples per bit");
}

ComplexEnvelope modulate(const BitSequence& bits, const ModulatorParams& params,
                         double grid_rate_hz)
{
    params.validate();
    if (bits.bits.empty()) throw ParameterError("modulate: empty bit sequence");
    const std::size_t sps = samples_per_bit(grid_rate_hz, bits.bitrate_hz);

    std::vector<double> drive(bits.size() * sps);
    for (std::size_t i = 0; i < bits.size(); ++i) {
        std::fill_n(drive.begin() + static_cast<std::ptrdiff_t>(i * sps), sps,
                    static_cast<double>(bits.bits[i]));
    }
    drive = filters::bessel_lowpass(drive, grid_rate_hz, params.analog_bandwidth_hz);
    for (auto& d : drive) d = std::max(d, 0.0);

    const double inv_er = 1.0 / db_to_power_ratio(params.extinction_ratio_db);
    const double mean_drive = std::accumulate(drive.begin(), drive.end(), 0.0) /
                              static_cast<double>(drive.size());
    const double p_high = params.avg_power_w / (inv_er + (1.0 - inv_er) * mean_drive);
    const double p_low = p_high * inv_er;

    ComplexEnvelope field{std::vector<Complex>(drive.size()), grid_rate_hz};
    for (std::size_t i = 0; i < drive.size(); ++i) {
        field.samples[i] = Complex(std::sqrt(p_low + (p_high - p_low) * drive[i]), 0.0);
    }
    return field;
}

} // namespace optolink::signal
