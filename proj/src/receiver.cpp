#include <optolink/receiver.hpp>

#include <algorithm>

namespace optolink::receiver {

void ReceiverParams::validate() const
{
    if (noise_m_mv < 0.0 || noise_q_mv2 < 0.0) throw ParameterError("receiver: noise coefficients must be >= 0");
    if (adc_bits < 1 || adc_bits > 16) throw ParameterError("receiver: adc_bits must be in [1, 16]");
    if (!(full_scale_mv > 0.0)) throw ParameterError("receiver: full scale must be positive");
    if (!(scope_bw_hz > 0.0) || !(scope_rate_hz > 0.0)) throw ParameterError("receiver: bandwidth and rate must be positive");
    if (!(responsivity_mv_per_mw > 0.0)) throw ParameterError("receiver: responsivity must be positive");
}

ReceiverParams ReceiverParams::forty_gbps()
{
    ReceiverParams p;
    p.scope_bw_hz = 28e9;
    p.scope_rate_hz = 160e9;
    return p;
}

double noise_variance(double v_mv, const ReceiverParams& params)
{
    return params.noise_m_mv * std::max(v_mv, 0.0) + params.noise_q_mv2;
}

SampledWaveform to_voltage(const ComplexEnvelope& field, const ReceiverParams& params, double prx_dbm)
{
    params.validate();
    const double mean_w = field.mean_power_w();
    if (!(mean_w > 0.0)) throw DegenerateSignalError("detect: field carries no power");
    const double scale = params.responsivity_mv_per_mw * dbm_to_mw(prx_dbm) / mean_w;
    SampledWaveform v{std::vector<double>(field.size()), field.sample_rate_hz, 0.0};
    for (std::size_t i = 0; i < field.size(); ++i) v.samples[i] = scale * std::norm(field.samples[i]);
    return v;
}

void add_noise(std::span<double> v_mv, const ReceiverParams& params, Rng& rng)
{
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (auto& v : v_mv) v += std::sqrt(noise_variance(v, params)) * gauss(rng);
}

int adc_code(double v_mv, const ReceiverParams& params)
{
    const int top = (1 << params.adc_bits) - 1;
    const double code = std::round(v_mv / params.full_scale_mv * top);
    return static_cast<int>(std::clamp(code, 0.0, static_cast<double>(top)));
}

double quantize(std::span<double> v_mv, const ReceiverParams& params)
{
    const int top = (1 << params.adc_bits) - 1;
    const double lsb = params.full_scale_mv / top;
    std::size_t clipped = 0;
    for (auto& v : v_mv) {
        const int code = adc_code(v, params);
        if (code == top && v > params.full_scale_mv) ++clipped;
        v = code * lsb;
    }
    return v_mv.empty() ? 0.0 : static_cast<double>(clipped) / static_cast<double>(v_mv.size());
}

SampledWaveform decimate(const SampledWaveform& wave, std::size_t factor, std::size_t offset)
{
    if (factor == 0) throw ParameterError("decimate: factor must be >= 1");
    if (offset >= wave.size()) throw ParameterError("decimate: offset beyond the waveform");
    SampledWaveform out;
    out.sample_rate_hz = wave.sample_rate_hz / static_cast<double>(factor);
    out.t0_s = wave.t0_s + static_cast<double>(offset) / wave.sample_rate_hz;
    out.samples.reserve((wave.size() - offset + factor - 1) / factor);
    for (std::size_t i = offset; i < wave.size(); i += factor) out.samples.push_back(wave.samples[i]);
    return out;
}

ReceiverChain::ReceiverChain(const ReceiverParams& params, double grid_rate_hz, double bitrate_hz,
                             std::size_t n_samples)
    : params_(params),
      grid_rate_hz_(grid_rate_hz),
      sps_grid_(integral_ratio(grid_rate_hz, bitrate_hz, "samples per bit")),
      decimation_(integral_ratio(grid_rate_hz, params.scope_rate_hz, "scope decimation")),
      filter_(n_samples, grid_rate_hz, params.scope_bw_hz)
{
    params_.validate();
    if (sps_grid_ % decimation_ != 0) {
        throw ParameterError("receiver: scope samples per bit must be integral");
    }
    if (n_samples % sps_grid_ != 0) throw ParameterError("receiver: window must hold whole bits");
}

std::size_t ReceiverChain::draw_offset(Rng& rng) const
{
    const std::size_t quarter = std::max<std::size_t>(sps_grid_ / 4, 1);
    return std::uniform_int_distribution<std::size_t>(0, quarter - 1)(rng);
}

Detection ReceiverChain::acquire(std::span<const double> clean_mv, Rng& rng) const
{
    Detection det;
    det.offset_samples = draw_offset(rng);

    std::vector<double> v(clean_mv.begin(), clean_mv.end());
    add_noise(v, params_, rng);
    v = filter_.apply(v);

    SampledWaveform grid{std::move(v), grid_rate_hz_, 0.0};
    det.waveform = decimate(grid, decimation_, det.offset_samples);
    det.overflow_fraction = quantize(det.waveform.samples, params_);
    det.status = det.overflow_fraction > 0.5 ? DetectStatus::overflow_warning : DetectStatus::ok;
    return det;
}

SampledWaveform ReceiverChain::reference(std::span<const double> clean_mv, std::size_t offset) const
{
    SampledWaveform grid{filter_.apply(clean_mv), grid_rate_hz_, 0.0};
    return decimate(grid, decimation_, offset);
}

Detection detect(const ComplexEnvelope& field, const ReceiverParams& params, double bitrate_hz,
                 double prx_dbm, std::uint64_t rng_seed)
{
    if (field.samples.empty()) throw ParameterError("detect: empty field");
    const auto clean = to_voltage(field, params, prx_dbm);
    const ReceiverChain chain(params, field.sample_rate_hz, bitrate_hz, clean.size());
    auto rng = make_rng({rng_seed});
    return chain.acquire(clean.samples, rng);
}

double snr_at_receiver(const LevelStats& stats)
{
    const double swing = stats.i1 - stats.i0;
    if (!(swing > 0.0)) throw DegenerateSignalError("snr: signal has a single level");
    const double noise = 0.5 * (stats.sigma0 * stats.sigma0 + stats.sigma1 * stats.sigma1);
    if (noise <= 0.0) return kSnrCapDb;
    return std::min(power_ratio_to_db(swing * swing / noise), kSnrCapDb);
}

LevelStats model_level_stats(double i0_mv, double i1_mv, const ReceiverParams& params)
{
    LevelStats s;
    s.i0 = i0_mv;
    s.i1 = i1_mv;
    s.sigma0 = std::sqrt(noise_variance(i0_mv, params));
    s.sigma1 = std::sqrt(noise_variance(i1_mv, params));
    s.threshold = 0.5 * (i0_mv + i1_mv);
    return s;
}

} // namespace optolink::receiver
