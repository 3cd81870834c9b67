#include <doctest.h>

#include <optolink/config.hpp>
#include <optolink/experiment.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

using namespace optolink;
using experiment::CrossingStatus;
using experiment::GainStatus;

namespace fs = std::filesystem;

namespace {

// BER falling one decade per 2 dB, crossing 1e-3 at `at_dbm`.
std::vector<link::BerPoint> curve(double at_dbm, double start = -24.0, double stop = -8.0)
{
    std::vector<link::BerPoint> c;
    for (double p = start; p <= stop + 1e-9; p += 1.0) {
        link::BerPoint pt;
        pt.prx_dbm = p;
        pt.ber_mean = std::pow(10.0, -3.0 - (p - at_dbm) / 2.0);
        c.push_back(pt);
    }
    return c;
}

std::string slurp(const fs::path& p)
{
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / ("optolink_unit_" + name);
    fs::remove_all(dir);
    return dir;
}

experiment::Scenario small_scenario(experiment::Mode mode)
{
    experiment::Scenario s;
    s.mode = mode;
    s.link = link::LinkConfig::ten_gbps(50e3, true);
    s.prx_dbm = experiment::prx_grid(-20, -14, 2);
    s.acquisitions = 8;
    s.seed = 4;
    s.training.particles = 6;
    s.training.iterations = 4;
    return s;
}

} // namespace

TEST_CASE("prx grid includes both ends")
{
    CHECK(experiment::prx_grid(-22, -8, 1).size() == 15);
    CHECK(experiment::prx_grid(-20, -14, 2) == std::vector<double>{-20, -18, -16, -14});
    CHECK_THROWS_AS(experiment::prx_grid(-20, -14, 0), ParameterError);
}

TEST_CASE("threshold crossing: bracketed, extrapolated, missing")
{
    const auto c = experiment::threshold_crossing(curve(-15.0), 1e-3);
    CHECK(c.status == CrossingStatus::bracketed);
    CHECK(c.prx_dbm == doctest::Approx(-15.0));
    CHECK_FALSE(c.monotonic_warning);

    const auto e = experiment::threshold_crossing(curve(-6.5), 1e-3);
    CHECK(e.status == CrossingStatus::extrapolated);
    CHECK(e.prx_dbm == doctest::Approx(-6.5));

    CHECK(experiment::threshold_crossing(curve(-2.0), 1e-3).status == CrossingStatus::not_crossed);
}

TEST_CASE("gain of constructed curves")
{
    // 3 dB better sensitivity, 1 dB excess loss.
    const auto r = experiment::gain_report(curve(-18.0), curve(-15.0), 1.0, 1e-3);
    CHECK(r.status == GainStatus::ok);
    CHECK(r.gain_db == doctest::Approx(2.0));
    CHECK(experiment::gain_report(curve(-15.0), curve(-15.0), 0.0, 1e-3).gain_db == doctest::Approx(0.0).scale(1.0));
    CHECK(experiment::gain_report(curve(-15.0), curve(-18.0), 0.0, 1e-3).gain_db == doctest::Approx(-3.0));

    // Unequalized curve never gets there: lower bound at the extrapolation limit.
    std::vector<link::BerPoint> flat = curve(-15.0);
    for (auto& p : flat) p.ber_mean = 1.5e-2;
    const auto lb = experiment::gain_report(curve(-15.0), flat, 1.0, 1e-3);
    CHECK(lb.status == GainStatus::lower_bound);
    CHECK(lb.gain_db == doctest::Approx(-8.0 + 3.0 + 15.0 - 1.0));
    CHECK(experiment::gain_report(flat, flat, 0.0, 1e-3).status == GainStatus::undefined);
}

TEST_CASE("phase trend flag")
{
    const std::vector<double> lengths{25, 50, 75, 100, 125};
    std::vector<std::vector<double>> rising, falling;
    for (std::size_t i = 0; i < lengths.size(); ++i) {
        const double p = std::fmod(1.3 * static_cast<double>(i + 1), kTwoPi);
        rising.push_back({0.0, p, p, p});
        falling.push_back({0.0, kTwoPi - 1.0 - 0.5 * static_cast<double>(i), 1.0, 1.0});
    }
    const auto up = experiment::phase_trend(lengths, rising);
    CHECK(up.slope_rad_per_km > 0.0);
    CHECK(up.mean_phase.back() == doctest::Approx(6.5));
    CHECK(up.flag);

    const auto down = experiment::phase_trend(lengths, falling);
    CHECK(down.slope_rad_per_km < 0.0);
    CHECK_FALSE(down.flag);
}

TEST_CASE("scenario hash ignores the name and tracks physics")
{
    auto a = small_scenario(experiment::Mode::fiber_only);
    auto b = a;
    b.name = "renamed";
    CHECK(a.hash() == b.hash());
    CHECK(a.hash().size() == 16);
    b.link.fiber.length_m = 51e3;
    CHECK(a.hash() != b.hash());
    b = a;
    b.seed = 5;
    CHECK(a.hash() != b.hash());

    auto btb = a;
    btb.mode = experiment::Mode::btb;
    CHECK(btb.effective_link().fiber.length_m == 0.0);
    CHECK_FALSE(btb.effective_link().use_device);
    CHECK_FALSE(a.effective_link().use_device);
}

TEST_CASE("scan writes its artifacts and resumes to identical bytes")
{
    const auto dir = scratch("resume");
    experiment::RunOptions opt;
    opt.out_dir = dir;
    const auto sc = small_scenario(experiment::Mode::fiber_plus_nn);
    const auto first = experiment::run_scenario(sc, opt);
    const auto run = dir / first.hash;
    for (const char* f : {"ber_curve.csv", "metadata.json", "training_log.jsonl", "training.json", "progress.jsonl"}) {
        CHECK(fs::exists(run / f));
    }
    const auto csv = slurp(run / "ber_curve.csv");
    CHECK(csv.rfind("prx_dbm,ber_mean,ber_std,n_acquisitions\n", 0) == 0);

    // Interrupt after two cells (with a torn third line), then resume.
    const auto progress = slurp(run / "progress.jsonl");
    std::istringstream lines(progress);
    std::string l1, l2, l3;
    std::getline(lines, l1);
    std::getline(lines, l2);
    std::getline(lines, l3);
    {
        std::ofstream os(run / "progress.jsonl", std::ios::binary | std::ios::trunc);
        os << l1 << '\n' << l2 << '\n' << l3.substr(0, l3.size() / 2);
    }
    fs::remove(run / "ber_curve.csv");
    opt.resume = true;
    const auto resumed = experiment::run_scenario(sc, opt);
    CHECK(resumed.resumed);
    CHECK(slurp(run / "ber_curve.csv") == csv);
    CHECK(slurp(run / "progress.jsonl") == progress);

    // A fresh rerun elsewhere gives the same bytes too.
    experiment::RunOptions other;
    other.out_dir = scratch("rerun");
    other.jobs = 2;
    experiment::run_scenario(sc, other);
    CHECK(slurp(other.out_dir / first.hash / "ber_curve.csv") == csv);
    fs::remove_all(dir);
    fs::remove_all(other.out_dir);
}

TEST_CASE("fixed currents skip training")
{
    auto sc = small_scenario(experiment::Mode::fiber_plus_nn);
    sc.fixed_currents_ma = {1.0, 2.0, 3.0};
    experiment::RunOptions opt;
    opt.write_files = false;
    const auto r = experiment::run_scenario(sc, opt);
    CHECK_FALSE(r.trained.has_value());
    CHECK(r.currents_ma == sc.fixed_currents_ma);
    CHECK(r.points.size() == 4);
    CHECK(r.excess_loss_db > 0.0);
}

TEST_CASE("config parsing")
{
    const auto c = config::parse_config(R"(
; comment
[scenario]
name = short
mode = fiber_only
bitrate_gbps = 10
length_km = 75
prx_dbm = -20:-10:2
acquisitions = 50
seed = 9

[trainer]
particles = 12
space = phases

[gain]
lengths_km = 25, 50

[study40g]
delays_ps = 0, 12.5
)");
    CHECK(c.scenario.name == "short");
    CHECK(c.scenario.mode == experiment::Mode::fiber_only);
    CHECK(c.scenario.link.fiber.length_m == doctest::Approx(75e3));
    CHECK(c.scenario.prx_dbm == std::vector<double>{-20, -18, -16, -14, -12, -10});
    CHECK(c.scenario.acquisitions == 50);
    CHECK(c.scenario.seed == 9);
    CHECK(c.scenario.training.particles == 12);
    CHECK(c.scenario.training.space == link::WeightSpace::phases);
    CHECK(c.gain_lengths_km == std::vector<double>{25, 50});
    CHECK(c.study.delays_ps == std::vector<double>{0, 12.5});

    const auto forty = config::parse_config("[scenario]\nbitrate_gbps = 40\n[device]\ndelta_t_ps = 12.5\n");
    CHECK(forty.scenario.link.bitrate_hz == 40e9);
    CHECK(forty.scenario.link.device.delta_t_s == doctest::Approx(12.5e-12));
    CHECK(forty.scenario.link.receiver.scope_rate_hz == 160e9);

    CHECK_THROWS_AS(config::parse_config("[scenario]\nbogus = 1\n"), ParameterError);
    CHECK_THROWS_AS(config::parse_config("[scenario]\nacquisitions = 2.5\n"), ParameterError);
    CHECK_THROWS_AS(config::parse_config("[scenario]\nmode = sideways\n"), ParameterError);
    CHECK_THROWS_AS(config::parse_list("1:2"), ParameterError);
}

TEST_CASE("default config is the 10 Gbps, 125 km equalized scan")
{
    const auto c = config::default_config();
    CHECK(c.scenario.mode == experiment::Mode::fiber_plus_nn);
    CHECK(c.scenario.link.fiber.length_m == doctest::Approx(125e3));
    CHECK(c.scenario.prx_dbm.front() == -24.0);
    CHECK(c.scenario.prx_dbm.back() == -8.0);
    CHECK(c.scenario.acquisitions == 1000);
}

TEST_CASE("shipped configs parse")
{
    int n = 0;
    for (const auto& e : fs::directory_iterator(fs::path(OPTOLINK_SOURCE_DIR) / "configs")) {
        if (e.path().extension() != ".ini") continue;
        CAPTURE(e.path().string());
        CHECK_NOTHROW(config::load_config(e.path()));
        ++n;
    }
    CHECK(n >= 3);
    const auto forty = config::load_config(fs::path(OPTOLINK_SOURCE_DIR) / "configs" / "forty_gbps_study.ini");
    CHECK(forty.study.delays_ps.size() == 3);
    CHECK(forty.study.snr_grid_db.size() == 19);
}
