#include <doctest.h>

#include <optolink/metrics.hpp>

#include <cmath>
#include <sstream>

using namespace optolink;
using metrics::UndersampledTrace;

namespace {

SampledWaveform random_wave(std::size_t n, std::uint64_t seed)
{
    auto rng = make_rng({seed});
    std::normal_distribution<double> g;
    SampledWaveform w{std::vector<double>(n), 40e9, 0.0};
    for (auto& v : w.samples) v = g(rng);
    return w;
}

UndersampledTrace two_gaussians(std::size_t n_per_class, double i0, double s0, double i1, double s1,
                                std::uint64_t seed)
{
    auto rng = make_rng({seed});
    std::normal_distribution<double> g;
    UndersampledTrace t;
    for (std::size_t i = 0; i < n_per_class; ++i) {
        t.values.push_back(i0 + s0 * g(rng));
        t.labels.push_back(0);
        t.values.push_back(i1 + s1 * g(rng));
        t.labels.push_back(1);
    }
    return t;
}

// E[X | X > mu + c sigma] for a normal X, in units of sigma above mu.
double tail_mean_sigmas(double c)
{
    const double pdf = std::exp(-0.5 * c * c) / std::sqrt(kTwoPi);
    return pdf / (0.5 * std::erfc(c / std::numbers::sqrt2));
}

} // namespace

TEST_CASE("align recovers a circular shift of 17")
{
    const auto in = random_wave(4096, 1);
    SampledWaveform out = in;
    for (std::size_t n = 0; n < in.size(); ++n) out.samples[n] = in.samples[(n + in.size() - 17) % in.size()];
    CHECK(metrics::align(in, out) == 17);
    const auto back = metrics::circular_shift(out, 17);
    CHECK(back.samples == in.samples);
    CHECK(metrics::correlation_at(in, out, 17) == doctest::Approx(1.0));
}

TEST_CASE("align ignores gain and offset")
{
    const auto in = random_wave(1024, 2);
    SampledWaveform out = in;
    for (std::size_t n = 0; n < in.size(); ++n) out.samples[n] = 0.3 * in.samples[(n + in.size() - 500) % in.size()] + 7.0;
    CHECK(metrics::align(in, out) == 500);
    SampledWaveform flat{std::vector<double>(1024, 2.0), 40e9, 0.0};
    CHECK_THROWS_AS(metrics::align(in, flat), DegenerateSignalError);
    CHECK_THROWS_AS(metrics::align(in, random_wave(512, 3)), ParameterError);
}

TEST_CASE("undersampling picks one sample per bit")
{
    SampledWaveform w{{0, 1, 2, 3, 10, 11, 12, 13, 20, 21, 22, 23}, 40e9, 0.0};
    const std::vector<std::uint8_t> labels{0, 1, 1};
    const auto t = metrics::undersample(w, labels, 4, 2);
    CHECK(t.values == std::vector<double>{1, 11, 21});
    CHECK(t.labels == labels);
    CHECK(t.sample_index == 2);
    CHECK_THROWS_AS(metrics::undersample(w, labels, 4, 0), ParameterError);
    CHECK_THROWS_AS(metrics::undersample(w, labels, 4, 5), ParameterError);
    CHECK_THROWS_AS(metrics::undersample(w, labels, 5, 1), ParameterError);
}

TEST_CASE("separation loss matches truncated-normal tail means")
{
    const double i0 = 2.0, s0 = 0.5, i1 = 8.0, s1 = 0.8;
    const auto t = two_gaussians(200000, i0, s0, i1, s1, 11);
    const auto d = metrics::separation_loss_details(t);
    const double k = tail_mean_sigmas(metrics::kTailCutSigmas);
    CHECK(d.e0 == doctest::Approx(i0 + k * s0).epsilon(0.003));
    CHECK(d.e1 == doctest::Approx(i1 - k * s1).epsilon(0.003));
    CHECK(d.tail_fraction0 == doctest::Approx(0.1003).epsilon(0.03));
    CHECK(d.loss == doctest::Approx((i0 + k * s0) - (i1 - k * s1)).epsilon(0.005));
    CHECK_FALSE(d.fallback0);
}

TEST_CASE("separation loss falls back to the extreme value when a tail is empty")
{
    UndersampledTrace t;
    t.values = {1.0, 1.0, 5.0, 5.0};
    t.labels = {0, 0, 1, 1};
    const auto d = metrics::separation_loss_details(t);
    CHECK(d.fallback0);
    CHECK(d.fallback1);
    CHECK(d.loss == doctest::Approx(-4.0));
}

TEST_CASE("loss is affine-equivariant, counted BER affine-invariant")
{
    const auto t = two_gaussians(5000, 0.0, 1.0, 3.0, 1.2, 5);
    auto u = t;
    for (auto& v : u.values) v = 2.5 * v - 4.0;
    CHECK(metrics::separation_loss(u) == doctest::Approx(2.5 * metrics::separation_loss(t)));
    const auto a = metrics::ber_count(std::span(&t, 1));
    const auto b = metrics::ber_count(std::span(&u, 1));
    CHECK(a.errors == b.errors);
    CHECK(a.threshold_index == b.threshold_index);
}

TEST_CASE("counted BER: clean, inverted, and the all-zeros bound")
{
    UndersampledTrace clean;
    for (int i = 0; i < 100; ++i) {
        clean.values.push_back(i % 3 == 0 ? 1.0 : 0.0);
        clean.labels.push_back(i % 3 == 0 ? 1 : 0);
    }
    CHECK(metrics::ber_count(std::span(&clean, 1)).errors == 0);

    auto inverted = clean;
    for (auto& l : inverted.labels) l = static_cast<std::uint8_t>(1 - l);
    const auto r = metrics::ber_count(std::span(&inverted, 1));
    CHECK(r.errors == 66);
    CHECK(r.threshold_index == 9);

    const auto noisy = two_gaussians(2000, 0.0, 1.0, 0.5, 1.0, 9);
    std::size_t ones = 0;
    for (auto l : noisy.labels) ones += l;
    CHECK(metrics::ber_count(std::span(&noisy, 1)).errors <= std::min(ones, noisy.size() - ones) + 1);
}

TEST_CASE("counted BER takes the best of several sample positions")
{
    const auto bad = two_gaussians(1000, 0.0, 1.0, 0.5, 1.0, 1);
    const auto good = two_gaussians(1000, 0.0, 0.1, 1.0, 0.1, 2);
    std::vector<UndersampledTrace> traces{bad, good};
    traces[0].sample_index = 1;
    traces[1].sample_index = 2;
    const auto r = metrics::ber_count(traces);
    CHECK(r.sample_index == 2);
    CHECK(r.errors == 0);
}

TEST_CASE("gaussian BER model identities")
{
    LevelStats s{0.0, 1.0, 0.1, 0.1, 0.5};
    CHECK(metrics::ber_model(s) == doctest::Approx(0.5 * std::erfc(0.5 / (0.1 * std::numbers::sqrt2))));
    s.i1 = 0.0;
    s.threshold = 0.0;
    CHECK(metrics::ber_model(s) == doctest::Approx(0.5));
    s.sigma0 = 0.0;
    CHECK_THROWS_AS(metrics::ber_model(s), ParameterError);
}

TEST_CASE("optimal threshold agrees with a grid search")
{
    LevelStats s{1.0, 5.0, 0.4, 0.9, 0.0};
    const double t = metrics::optimal_threshold(s);
    double best_t = 0.0, best = 1.0;
    for (int k = 0; k <= 400000; ++k) {
        s.threshold = 1.0 + 4.0 * k / 400000.0;
        const double b = metrics::ber_model(s);
        if (b < best) {
            best = b;
            best_t = s.threshold;
        }
    }
    CHECK(t == doctest::Approx(best_t).epsilon(1e-4));
    s.threshold = t;
    CHECK(metrics::ber_model(s) == doctest::Approx(best).epsilon(1e-8));
    CHECK(t < 3.0); // pulled toward the quieter level
}

TEST_CASE("BER model matches Monte Carlo counting")
{
    const LevelStats s{0.0, 1.0, 0.2, 0.25, 0.45};
    auto t = two_gaussians(100000, s.i0, s.sigma0, s.i1, s.sigma1, 21);
    std::size_t errors = 0;
    for (std::size_t i = 0; i < t.size(); ++i) errors += (t.values[i] > s.threshold ? 1 : 0) != t.labels[i];
    const double p = metrics::ber_model(s);
    const double n = static_cast<double>(t.size());
    CHECK(std::abs(static_cast<double>(errors) / n - p) < 4.0 * std::sqrt(p * (1 - p) / n));
}

TEST_CASE("error-free floor")
{
    CHECK(metrics::ber_floor(1000, 1024) == doctest::Approx(1.0 / 1024000.0));
    CHECK_THROWS_AS(metrics::ber_floor(0, 1024), ParameterError);
}

TEST_CASE("level histogram, overlap and band occupancy")
{
    UndersampledTrace t;
    t.values = {0.0, 0.1, 0.35, 0.9, 1.0, 0.35};
    t.labels = {0, 0, 0, 1, 1, 1};
    const auto h = metrics::level_histogram(t, 10);
    CHECK(h.count0[0] == 1);
    CHECK(h.count0[1] == 1);
    CHECK(h.count1[9] == 2);
    CHECK(h.count0[3] == 1);
    CHECK(h.count1[3] == 1);
    CHECK(metrics::class_overlap(h) == doctest::Approx(1.0 / 3.0));
    CHECK(metrics::band_occupancy(h, 0, 0.3, 0.4) == doctest::Approx(1.0 / 3.0));
    CHECK(metrics::population_in_band(h, 0.3, 0.4) == doctest::Approx(2.0 / 6.0));

    auto sum = h;
    metrics::accumulate(sum, h);
    CHECK(sum.count1[9] == 4);
    CHECK(metrics::class_overlap(sum) == doctest::Approx(metrics::class_overlap(h)));

    std::ostringstream os;
    metrics::write_histogram_csv(os, h);
    CHECK(os.str().rfind("value_bin,count_class0,count_class1\n", 0) == 0);
}

TEST_CASE("eye folding")
{
    SampledWaveform w{{1, 2, 3, 4, 5, 6, 7, 8}, 40e9, 0.0};
    const auto pts = metrics::eye_points(w, 10e9);
    REQUIRE(pts.size() == 8);
    CHECK(pts[0].bit_phase == 0.0);
    CHECK(pts[1].bit_phase == doctest::Approx(0.25));
    CHECK(pts[4].bit_phase == doctest::Approx(0.0).scale(1.0));
    for (const auto& p : pts) CHECK((p.bit_phase >= 0.0 && p.bit_phase < 1.0));
    std::ostringstream os;
    metrics::write_eye_csv(os, pts);
    CHECK(os.str().rfind("bit_phase,amplitude\n", 0) == 0);
}
