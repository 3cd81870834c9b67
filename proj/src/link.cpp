#include <optolink/link.hpp>

#include <optolink/filters.hpp>

#include <algorithm>
#include <limits>
#include <numeric>

namespace optolink::link {
namespace {

std::size_t window_samples(const LinkConfig& c)
{
    const auto sps = signal::samples_per_bit(c.grid_rate_hz, c.bitrate_hz);
    const std::size_t period = std::size_t{1} << c.prbs_order;
    return period * static_cast<std::size_t>(c.periods_per_acquisition) * sps;
}

const LinkConfig& checked(const LinkConfig& c)
{
    c.validate();
    return c;
}

} // namespace

void LinkConfig::validate() const
{
    if (prbs_order < 2 || prbs_order > 20) throw ParameterError("link: prbs_order must be in [2, 20]");
    if (periods_per_acquisition < 1) throw ParameterError("link: periods_per_acquisition must be >= 1");
    modulator.validate();
    fiber.validate();
    receiver.validate();
    if (use_device) device.validate();
    const auto sps = signal::samples_per_bit(grid_rate_hz, bitrate_hz);
    const auto dec = integral_ratio(grid_rate_hz, receiver.scope_rate_hz, "scope decimation");
    if (sps % dec != 0) throw ParameterError("link: scope samples per bit must be integral");
    if (training_sample_index < 1 || static_cast<std::size_t>(training_sample_index) > sps / dec) {
        throw ParameterError("link: training_sample_index out of range");
    }
}

LinkConfig LinkConfig::ten_gbps(double length_m, bool use_device)
{
    LinkConfig c;
    c.fiber.length_m = length_m;
    c.use_device = use_device;
    return c;
}

LinkConfig LinkConfig::forty_gbps(double length_m, double delta_t_s)
{
    LinkConfig c;
    c.bitrate_hz = 40e9;
    c.fiber.length_m = length_m;
    c.receiver = receiver::ReceiverParams::forty_gbps();
    c.use_device = delta_t_s > 0.0;
    if (c.use_device) c.device = perceptron::DeviceState::with_taps(4, delta_t_s, {0.0, 2.1, 4.3, 6.4});
    return c;
}

LinkSimulator::LinkSimulator(LinkConfig config)
    : config_(std::move(config)),
      chain_(checked(config_).receiver, config_.grid_rate_hz, config_.bitrate_hz, window_samples(config_))
{
    bits_ = signal::generate_prbs(config_.prbs_order, config_.prbs_seed, config_.bitrate_hz);
    labels_.reserve(bits_.size() * static_cast<std::size_t>(config_.periods_per_acquisition));
    for (int p = 0; p < config_.periods_per_acquisition; ++p) {
        labels_.insert(labels_.end(), bits_.bits.begin(), bits_.bits.end());
    }
    const BitSequence window{labels_, config_.bitrate_hz};
    tx_ = signal::modulate(window, config_.modulator, config_.grid_rate_hz);
    rx_field_ = fiber::propagate(tx_, config_.fiber);
    if (config_.use_device) tap_delay_ = perceptron::tap_delay_samples(config_.device, config_.grid_rate_hz);

    // Back-to-back levels at 0 dBm from the mid-bit samples of the transmitted intensity.
    const auto btb = receiver::to_voltage(tx_, config_.receiver, 0.0);
    const std::size_t sps = chain_.samples_per_bit_grid();
    double sum[2] = {0.0, 0.0};
    std::size_t count[2] = {0, 0};
    for (std::size_t b = 0; b < labels_.size(); ++b) {
        const int label = labels_[b] ? 1 : 0;
        sum[label] += btb.samples[b * sps + sps / 2];
        ++count[label];
    }
    level0_ = sum[0] / static_cast<double>(count[0]);
    level1_ = sum[1] / static_cast<double>(count[1]);

    // Transmitter and scope filters delay the detected bits; the references are rotated
    // so that scope sample 4b + j belongs to bit b.
    const double delay_s = filters::bessel5_group_delay(config_.modulator.analog_bandwidth_hz) +
                           filters::bessel5_group_delay(config_.receiver.scope_bw_hz);
    label_delay_ = static_cast<std::size_t>(std::lround(delay_s * config_.receiver.scope_rate_hz));

    const std::size_t offsets = std::max<std::size_t>(sps / 4, 1);
    references_.reserve(offsets);
    for (std::size_t o = 0; o < offsets; ++o) {
        references_.push_back(metrics::circular_shift(chain_.reference(btb.samples, o), label_delay_));
    }
}

std::vector<Complex> LinkSimulator::weights_for(std::span<const double> trainable, WeightSpace space) const
{
    const auto& dev = config_.device;
    if (trainable.size() != static_cast<std::size_t>(dev.n_taps - 1)) {
        throw ParameterError("link: expected one coordinate per tunable channel");
    }
    if (space == WeightSpace::currents) return perceptron::tap_weights(dev.with_currents(trainable));
    const auto mags = perceptron::tap_magnitudes(dev);
    std::vector<Complex> w(mags.size());
    w[0] = mags[0];
    for (std::size_t k = 1; k < mags.size(); ++k) w[k] = std::polar(mags[k], trainable[k - 1]);
    return w;
}

ComplexEnvelope LinkSimulator::output_field(std::span<const Complex> weights) const
{
    if (!config_.use_device) return rx_field_;
    return perceptron::apply_weights(rx_field_, tap_delay_, weights, perceptron::combiner_scale(config_.device));
}

ComplexEnvelope LinkSimulator::output_field() const
{
    if (!config_.use_device) return rx_field_;
    return perceptron::apply(rx_field_, config_.device);
}

double LinkSimulator::excess_loss_db(const ComplexEnvelope& output) const
{
    const double in = rx_field_.mean_power_w();
    const double out = output.mean_power_w();
    if (!(out > 0.0)) return std::numeric_limits<double>::infinity();
    return -power_ratio_to_db(out / in);
}

Acquisition LinkSimulator::acquire_voltage(std::span<const double> clean_mv, Rng& rng) const
{
    Acquisition a;
    a.detection = chain_.acquire(clean_mv, rng);
    const auto& ref = references_.at(a.detection.offset_samples);
    a.shift = metrics::align(ref, a.detection.waveform);
    a.aligned = metrics::circular_shift(a.detection.waveform, a.shift);
    a.aligned.t0_s = 0.0; // now indexed from the start of bit 0
    const std::size_t spb = chain_.samples_per_bit_scope();
    a.traces.reserve(spb);
    for (std::size_t j = 1; j <= spb; ++j) {
        a.traces.push_back(metrics::undersample(a.aligned, labels_, spb, static_cast<int>(j)));
    }
    return a;
}

Acquisition LinkSimulator::acquire(const ComplexEnvelope& output, double prx_dbm, Rng& rng) const
{
    const auto clean = receiver::to_voltage(output, config_.receiver, prx_dbm);
    return acquire_voltage(clean.samples, rng);
}

double LinkSimulator::loss(const ComplexEnvelope& output, double prx_dbm, std::uint64_t noise_seed) const
{
    auto rng = make_rng({noise_seed});
    try {
        const auto a = acquire(output, prx_dbm, rng);
        return metrics::separation_loss(a.traces.at(static_cast<std::size_t>(config_.training_sample_index - 1)));
    } catch (const DegenerateSignalError&) {
        // A configuration that extinguishes the signal is simply the worst possible one.
        return std::numeric_limits<double>::infinity();
    }
}

training::Objective LinkSimulator::objective(double prx_dbm, WeightSpace space) const
{
    if (!config_.use_device) throw ParameterError("link: nothing to train without a device");
    return [this, prx_dbm, space](std::span<const double> x, std::uint64_t seed) {
        const auto w = weights_for(x, space);
        return loss(output_field(w), prx_dbm, seed);
    };
}

TrainedDevice LinkSimulator::train(const TrainOptions& options) const
{
    const auto objective_fn = objective(options.prx_dbm, options.space);
    const auto& dev = config_.device;
    const auto dims = static_cast<std::size_t>(dev.n_taps - 1);
    const double lo = options.space == WeightSpace::currents ? dev.current_min_ma : 0.0;
    const double hi = options.space == WeightSpace::currents ? dev.current_max_ma : kTwoPi;

    TrainedDevice out;
    if (options.optimizer == "pso") {
        auto swarm = options.swarm;
        if (swarm.lower.empty()) swarm.lower.assign(dims, lo);
        if (swarm.upper.empty()) swarm.upper.assign(dims, hi);
        out.record = training::train_pso(objective_fn, swarm);
        out.initial_loss = objective_fn(std::vector<double>(dims, lo), derive_seed({swarm.master_seed, 0xba5e}));
    } else if (options.optimizer == "adam") {
        auto adam = options.adam;
        if (adam.lower.empty()) adam.lower.assign(dims, lo);
        if (adam.upper.empty()) adam.upper.assign(dims, hi);
        if (adam.start.empty()) {
            auto rng = make_rng({adam.master_seed, 0x57a7});
            std::uniform_real_distribution<double> u(0.0, 1.0);
            adam.start.resize(dims);
            for (std::size_t d = 0; d < dims; ++d) adam.start[d] = adam.lower[d] + u(rng) * (adam.upper[d] - adam.lower[d]);
        }
        out.record = training::train_adam(objective_fn, adam);
        out.initial_loss = objective_fn(std::vector<double>(dims, lo), derive_seed({adam.master_seed, 0xba5e}));
    } else {
        throw ParameterError("link: unknown optimizer '" + options.optimizer + "'");
    }

    const auto& best = out.record.best_position;
    out.weights = weights_for(best, options.space);
    if (options.space == WeightSpace::currents) {
        out.currents_ma = best;
    } else {
        out.currents_ma = perceptron::currents_for_phases(dev, best);
    }
    out.phases_rad = perceptron::phases_from_currents(dev.with_currents(out.currents_ma));
    for (auto& p : out.phases_rad) p = std::fmod(std::fmod(p, kTwoPi) + kTwoPi, kTwoPi);
    out.record.final_phases_rad = out.phases_rad;
    out.excess_loss_db = excess_loss_db(output_field(out.weights));
    return out;
}

BerPoint LinkSimulator::measure_ber(const ComplexEnvelope& output, double prx_dbm, std::size_t n_acquisitions,
                                   std::uint64_t seed, int jobs) const
{
    if (n_acquisitions == 0) throw ParameterError("measure_ber: need at least one acquisition");
    const auto clean = receiver::to_voltage(output, config_.receiver, prx_dbm);
    std::vector<double> ber(n_acquisitions);
    std::vector<std::size_t> errors(n_acquisitions);
    std::vector<std::uint8_t> overflow(n_acquisitions);
    training::parallel_for(n_acquisitions, jobs, [&](std::size_t a) {
        auto rng = make_rng({seed, a});
        const auto acq = acquire_voltage(clean.samples, rng);
        const auto count = metrics::ber_count(acq.traces);
        ber[a] = count.ber;
        errors[a] = count.errors;
        overflow[a] = acq.detection.status == receiver::DetectStatus::overflow_warning;
    });

    BerPoint p;
    p.prx_dbm = prx_dbm;
    p.n_acquisitions = n_acquisitions;
    p.bits = n_acquisitions * labels_.size();
    p.errors = std::accumulate(errors.begin(), errors.end(), std::size_t{0});
    p.overflow_acquisitions = static_cast<std::size_t>(std::count(overflow.begin(), overflow.end(), 1));
    const double n = static_cast<double>(n_acquisitions);
    const double mean = std::accumulate(ber.begin(), ber.end(), 0.0) / n;
    double ss = 0.0;
    for (double b : ber) ss += (b - mean) * (b - mean);
    p.ber_std = n_acquisitions > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    if (p.errors == 0) {
        p.ber_mean = metrics::ber_floor(n_acquisitions, labels_.size());
        p.floored = true;
    } else {
        p.ber_mean = mean;
    }
    return p;
}

LevelStats LinkSimulator::btb_levels(double prx_dbm) const
{
    const double s = dbm_to_mw(prx_dbm);
    return receiver::model_level_stats(level0_ * s, level1_ * s, config_.receiver);
}

double LinkSimulator::snr_db(double prx_dbm) const { return receiver::snr_at_receiver(btb_levels(prx_dbm)); }

double LinkSimulator::prx_for_snr(double target_db) const
{
    double lo = -60.0, hi = 20.0;
    if (!(snr_db(lo) < target_db && snr_db(hi) > target_db)) {
        throw ParameterError("link: SNR target outside the reachable range");
    }
    for (int i = 0; i < 100 && hi - lo > 1e-9; ++i) {
        const double mid = 0.5 * (lo + hi);
        (snr_db(mid) < target_db ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace optolink::link
