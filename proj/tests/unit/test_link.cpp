#include <doctest.h>

#include <optolink/link.hpp>

#include <cmath>

using namespace optolink;
using link::LinkConfig;
using link::LinkSimulator;

TEST_CASE("10 Gbps preset geometry")
{
    const LinkSimulator sim(LinkConfig::ten_gbps(0.0, false));
    CHECK(sim.bits().size() == 1024);
    CHECK(sim.bits_per_acquisition() == 1024);
    CHECK(sim.transmitted().size() == 1024 * 32);
    CHECK(sim.chain().samples_per_bit_scope() == 4);
}

TEST_CASE("snr and received power are inverse")
{
    const LinkSimulator sim(LinkConfig::ten_gbps(0.0, false));
    const double prx = sim.prx_for_snr(11.2);
    CHECK(sim.snr_db(prx) == doctest::Approx(11.2).epsilon(1e-6));
    CHECK(sim.snr_db(prx + 1.0) > sim.snr_db(prx));
    const auto lv = sim.btb_levels(-10.0);
    CHECK(lv.i1 > lv.i0);
    CHECK(lv.i0 > 0.0);
}

TEST_CASE("back-to-back acquisitions align to the transmitted bits")
{
    const LinkSimulator sim(LinkConfig::ten_gbps(0.0, false));
    const auto out = sim.output_field();
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto rng = make_rng({seed});
        const auto acq = sim.acquire(out, -8.0, rng);
        REQUIRE(acq.traces.size() == 4);
        const auto ber = metrics::ber_count(acq.traces);
        CHECK(ber.errors == 0);
        CHECK(acq.aligned.t0_s == 0.0);
    }
}

TEST_CASE("back-to-back BER floors at high power and rises at low power")
{
    const LinkSimulator sim(LinkConfig::ten_gbps(0.0, false));
    const auto out = sim.output_field();
    const auto hi = sim.measure_ber(out, -10.0, 20, 1);
    CHECK(hi.floored);
    CHECK(hi.ber_mean == doctest::Approx(1.0 / (20.0 * 1024.0)));
    const auto lo = sim.measure_ber(out, -24.0, 20, 1);
    CHECK(lo.ber_mean > 1e-3);
    CHECK(lo.ber_std > 0.0);
    CHECK(lo.n_acquisitions == 20);
}

TEST_CASE("BER measurement is reproducible across thread counts")
{
    const LinkSimulator sim(LinkConfig::ten_gbps(50e3, false));
    const auto out = sim.output_field();
    const auto a = sim.measure_ber(out, -18.0, 12, 77, 1);
    const auto b = sim.measure_ber(out, -18.0, 12, 77, 3);
    CHECK(a.ber_mean == b.ber_mean);
    CHECK(a.ber_std == b.ber_std);
    CHECK(a.errors == b.errors);
}

TEST_CASE("device weights, excess loss and the loss objective")
{
    const LinkSimulator sim(LinkConfig::ten_gbps(125e3, true));
    const std::vector<double> zero{0.0, 0.0, 0.0};
    const auto w = sim.weights_for(zero, link::WeightSpace::currents);
    REQUIRE(w.size() == 4);
    CHECK(w[0] == Complex{1.0, 0.0});
    const auto out = sim.output_field(w);
    CHECK(sim.excess_loss_db(out) > 0.0);

    const std::vector<double> phases{1.0, 2.0, 3.0};
    const auto wp = sim.weights_for(phases, link::WeightSpace::phases);
    CHECK(std::arg(wp[2]) == doctest::Approx(2.0));

    const double prx = sim.prx_for_snr(11.2);
    CHECK(sim.loss(out, prx, 5) == sim.loss(out, prx, 5));
    const auto f = sim.objective(prx, link::WeightSpace::currents);
    CHECK(f(zero, 5) == doctest::Approx(sim.loss(out, prx, 5)));
}

TEST_CASE("short training improves on the untrained device")
{
    const LinkSimulator sim(LinkConfig::ten_gbps(125e3, true));
    link::TrainOptions opt;
    opt.prx_dbm = sim.prx_for_snr(11.2);
    opt.swarm.n_particles = 8;
    opt.swarm.n_iterations = 10;
    opt.swarm.master_seed = 3;
    const auto t = sim.train(opt);
    CHECK(t.record.best_loss.size() == 11);
    CHECK(t.record.best_loss.back() < t.initial_loss);
    CHECK(t.currents_ma.size() == 3);
    CHECK(t.phases_rad.size() == 4);
    CHECK(t.phases_rad[0] == 0.0);
    for (double p : t.phases_rad) CHECK((p >= 0.0 && p < kTwoPi));
    for (double i : t.currents_ma) CHECK((i >= 0.0 && i <= 30.0));
}

TEST_CASE("40 Gbps preset")
{
    const auto cfg = LinkConfig::forty_gbps(10e3, 12.5e-12);
    CHECK(cfg.use_device);
    const LinkSimulator sim(cfg);
    CHECK(sim.chain().samples_per_bit_scope() == 4);
    CHECK_FALSE(LinkConfig::forty_gbps(10e3, 0.0).use_device);
}
