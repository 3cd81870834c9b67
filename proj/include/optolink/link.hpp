#pragma once

#include <optolink/fiber.hpp>
#include <optolink/metrics.hpp>
#include <optolink/perceptron.hpp>
#include <optolink/receiver.hpp>
#include <optolink/signal_gen.hpp>
#include <optolink/trainer.hpp>

#include <span>
#include <string>
#include <vector>

namespace optolink::link {

/// Everything needed to simulate one transmitter -> fiber -> (device) -> receiver link.
struct LinkConfig {
    double bitrate_hz = 10e9;
    double grid_rate_hz = 320e9;
    int prbs_order = 10;
    std::uint32_t prbs_seed = 0x2a5;
    int periods_per_acquisition = 1; ///< PRBS periods captured by one acquisition
    signal::ModulatorParams modulator;
    fiber::FiberParams fiber;
    bool use_device = false;
    perceptron::DeviceState device;
    receiver::ReceiverParams receiver;
    int training_sample_index = 3;

    void validate() const;

    /// 10 Gbps, 50 ps taps, 16 GHz / 40 GSa/s scope.
    static LinkConfig ten_gbps(double length_m, bool use_device);
    /// 40 Gbps, 28 GHz / 160 GSa/s scope, taps spaced delta_t_s (no device when delta_t_s <= 0).
    static LinkConfig forty_gbps(double length_m, double delta_t_s);
};

/// Trainable coordinates: heater currents (mA, bounded) or channel phases (rad, [0, 2 pi]).
enum class WeightSpace { currents, phases };

/// Result of one noisy acquisition after alignment to the transmitted bits.
struct Acquisition {
    receiver::Detection detection;
    SampledWaveform aligned;
    std::size_t shift = 0;
    std::vector<metrics::UndersampledTrace> traces; ///< sample indices 1..samples_per_bit
};

struct BerPoint {
    double prx_dbm = 0.0;
    double ber_mean = 0.0; ///< floored at 1 / (N bits) when no error was counted
    double ber_std = 0.0;
    std::size_t n_acquisitions = 0;
    std::size_t errors = 0;
    std::size_t bits = 0;
    bool floored = false;
    std::size_t overflow_acquisitions = 0;
};

struct TrainOptions {
    std::string optimizer = "pso"; ///< pso | adam
    WeightSpace space = WeightSpace::currents;
    double prx_dbm = 0.0;
    training::SwarmConfig swarm;   ///< bounds filled in from the device when empty
    training::AdamConfig adam;     ///< bounds and start filled in when empty
};

struct TrainedDevice {
    training::TrainingRecord record;
    std::vector<double> currents_ma;   ///< trainable channels 1..n-1
    std::vector<double> phases_rad;    ///< all channels, channel 0 = 0, wrapped to [0, 2 pi)
    std::vector<Complex> weights;
    double excess_loss_db = 0.0;
    double initial_loss = 0.0;         ///< loss at zero currents / zero phases, same noise seed
};

/// Precomputes the deterministic part of a link (bits, transmitted and propagated field,
/// receiver filter, alignment references) so noisy acquisitions are cheap. Const methods
/// are thread-safe.
class LinkSimulator {
public:
    explicit LinkSimulator(LinkConfig config);

    const LinkConfig& config() const noexcept { return config_; }
    const BitSequence& bits() const noexcept { return bits_; }
    const ComplexEnvelope& transmitted() const noexcept { return tx_; }
    const ComplexEnvelope& received_field() const noexcept { return rx_field_; }
    const receiver::ReceiverChain& chain() const noexcept { return chain_; }
    std::size_t bits_per_acquisition() const noexcept { return labels_.size(); }
    std::span<const std::uint8_t> labels() const noexcept { return labels_; }

    std::vector<Complex> weights_for(std::span<const double> trainable, WeightSpace space) const;
    /// Received field after the device with the given weights; the bare fiber output
    /// when the link has no device.
    ComplexEnvelope output_field(std::span<const Complex> weights) const;
    /// Output field with the configured device currents (or no device).
    ComplexEnvelope output_field() const;
    double excess_loss_db(const ComplexEnvelope& output) const;

    Acquisition acquire(const ComplexEnvelope& output, double prx_dbm, Rng& rng) const;
    /// Same as acquire() from a precomputed clean voltage trace.
    Acquisition acquire_voltage(std::span<const double> clean_mv, Rng& rng) const;

    /// Separation loss at the training sample of a single fresh acquisition.
    double loss(const ComplexEnvelope& output, double prx_dbm, std::uint64_t noise_seed) const;
    training::Objective objective(double prx_dbm, WeightSpace space) const;
    TrainedDevice train(const TrainOptions& options) const;

    /// Mean and spread of the per-acquisition counted BER over n_acquisitions.
    BerPoint measure_ber(const ComplexEnvelope& output, double prx_dbm, std::size_t n_acquisitions,
                         std::uint64_t seed, int jobs = 1) const;

    /// Noise-model level statistics of the back-to-back signal at a received power.
    LevelStats btb_levels(double prx_dbm) const;
    double snr_db(double prx_dbm) const;
    /// Received power at which snr_db reaches the target (bisection on [-60, 20] dBm).
    double prx_for_snr(double snr_db) const;

private:
    LinkConfig config_;
    BitSequence bits_;
    std::vector<std::uint8_t> labels_;
    ComplexEnvelope tx_;
    ComplexEnvelope rx_field_;
    receiver::ReceiverChain chain_;
    std::size_t tap_delay_ = 0;
    std::size_t label_delay_ = 0; ///< scope samples between a bit start and its detected onset
    std::vector<SampledWaveform> references_; ///< noiseless back-to-back scope trace per offset
    double level0_ = 0.0; ///< back-to-back levels at 0 dBm, mV
    double level1_ = 0.0;
};

} // namespace optolink::link
