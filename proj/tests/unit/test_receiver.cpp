#include <doctest.h>

#include <optolink/receiver.hpp>
#include <optolink/signal_gen.hpp>

#include <cmath>

using namespace optolink;
using receiver::ReceiverParams;

TEST_CASE("noise variance follows m V + q")
{
    ReceiverParams p;
    CHECK(receiver::noise_variance(0.0, p) == doctest::Approx(0.2263));
    CHECK(receiver::noise_variance(10.0, p) == doctest::Approx(0.0189 * 10 + 0.2263));
    CHECK(receiver::noise_variance(-3.0, p) == doctest::Approx(0.2263));
}

TEST_CASE("added noise has the model variance at constant levels")
{
    ReceiverParams p;
    for (double v : {0.0, 5.0, 10.0, 40.0}) {
        std::vector<double> x(200000, v);
        auto rng = make_rng({7, static_cast<std::uint64_t>(v)});
        receiver::add_noise(x, p, rng);
        double m = 0, s = 0;
        for (double y : x) m += y;
        m /= static_cast<double>(x.size());
        for (double y : x) s += (y - m) * (y - m);
        s /= static_cast<double>(x.size() - 1);
        CHECK(std::abs(m - v) < 0.01);
        CHECK(s == doctest::Approx(receiver::noise_variance(v, p)).epsilon(0.02));
    }
}

TEST_CASE("adc codes and quantization")
{
    ReceiverParams p;
    CHECK(receiver::adc_code(0.0, p) == 0);
    CHECK(receiver::adc_code(-5.0, p) == 0);
    CHECK(receiver::adc_code(100.0, p) == 255);
    CHECK(receiver::adc_code(250.0, p) == 255);
    CHECK(receiver::adc_code(50.0, p) == 128);

    std::vector<double> v{-1.0, 10.0, 99.9, 150.0};
    const double clipped = receiver::quantize(v, p);
    CHECK(clipped == doctest::Approx(0.25));
    CHECK(v[0] == 0.0);
    CHECK(v[1] == doctest::Approx(26 * 100.0 / 255));
    CHECK(v[3] == doctest::Approx(100.0));
}

TEST_CASE("decimation picks every factor-th sample")
{
    SampledWaveform w{{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11}, 12.0, 0.0};
    const auto d = receiver::decimate(w, 4, 3);
    REQUIRE(d.size() == 3);
    CHECK(d.samples == std::vector<double>{3, 7, 11});
    CHECK(d.sample_rate_hz == doctest::Approx(3.0));
    CHECK(d.t0_s == doctest::Approx(0.25));
}

TEST_CASE("voltage conversion scales to the received power")
{
    const auto bits = signal::generate_prbs(7, 1);
    const auto f = signal::modulate(bits, {}, 320e9);
    ReceiverParams p;
    const auto v = receiver::to_voltage(f, p, -10.0);
    double m = 0;
    for (double x : v.samples) m += x;
    m /= static_cast<double>(v.size());
    CHECK(m == doctest::Approx(0.1 * 50.0).epsilon(1e-12));
}

TEST_CASE("receiver chain geometry and offsets")
{
    ReceiverParams p;
    const receiver::ReceiverChain chain(p, 320e9, 10e9, 32 * 128);
    CHECK(chain.decimation() == 8);
    CHECK(chain.samples_per_bit_scope() == 4);
    auto rng = make_rng({3});
    for (int i = 0; i < 200; ++i) CHECK(chain.draw_offset(rng) < 8);

    const auto r40 = ReceiverParams::forty_gbps();
    const receiver::ReceiverChain c40(r40, 320e9, 40e9, 8 * 128);
    CHECK(c40.samples_per_bit_scope() == 4);
    CHECK_THROWS_AS(receiver::ReceiverChain(p, 320e9, 10e9, 100), ParameterError);
    ReceiverParams bad = p;
    bad.scope_rate_hz = 30e9;
    CHECK_THROWS_AS(receiver::ReceiverChain(bad, 320e9, 10e9, 32 * 128), ParameterError);
}

TEST_CASE("detection is reproducible from its seed")
{
    const auto bits = signal::generate_prbs(7, 1);
    const auto f = signal::modulate(bits, {}, 320e9);
    const auto a = receiver::detect(f, {}, 10e9, -10.0, 42);
    const auto b = receiver::detect(f, {}, 10e9, -10.0, 42);
    const auto c = receiver::detect(f, {}, 10e9, -10.0, 43);
    CHECK(a.waveform.samples == b.waveform.samples);
    CHECK(a.offset_samples == b.offset_samples);
    CHECK(a.waveform.samples != c.waveform.samples);
    CHECK(a.waveform.size() == bits.size() * 4);
    CHECK(a.status == receiver::DetectStatus::ok);

    const auto hot = receiver::detect(f, {}, 10e9, 10.0, 42);
    CHECK(hot.status == receiver::DetectStatus::overflow_warning);
}

TEST_CASE("snr at the receiver")
{
    LevelStats s{0.0, 10.0, 1.0, 1.0, 5.0};
    CHECK(receiver::snr_at_receiver(s) == doctest::Approx(20.0));
    s.sigma0 = s.sigma1 = 0.0;
    CHECK(receiver::snr_at_receiver(s) == receiver::kSnrCapDb);
    s.i1 = 0.0;
    CHECK_THROWS_AS(receiver::snr_at_receiver(s), DegenerateSignalError);

    const auto m = receiver::model_level_stats(1.0, 9.0, {});
    CHECK(m.sigma1 * m.sigma1 == doctest::Approx(0.0189 * 9 + 0.2263));
    CHECK(m.threshold == doctest::Approx(5.0));
}
