#include <doctest.h>

#include <optolink/perceptron.hpp>
#include <optolink/trainer.hpp>

#include <atomic>
#include <cmath>
#include <sstream>

#include <json.hpp>

using namespace optolink;
using training::SwarmConfig;

namespace {

const std::vector<double> kCenter{3.0, -1.5, 7.0};

double quadratic(std::span<const double> x, std::uint64_t)
{
    double acc = 0.0;
    for (std::size_t d = 0; d < x.size(); ++d) acc += (x[d] - kCenter[d]) * (x[d] - kCenter[d]);
    return acc;
}

// Quadratic plus seed-driven noise, to exercise the rescoring path.
double noisy_quadratic(std::span<const double> x, std::uint64_t seed)
{
    auto rng = make_rng({seed});
    return quadratic(x, seed) + std::normal_distribution<double>(0.0, 0.05)(rng);
}

SwarmConfig box3()
{
    SwarmConfig c;
    c.lower = {-10, -10, -10};
    c.upper = {10, 10, 10};
    c.n_particles = 20;
    c.n_iterations = 60;
    c.master_seed = 5;
    return c;
}

} // namespace

TEST_CASE("pso finds the minimum of a quadratic")
{
    const auto rec = training::train_pso(quadratic, box3());
    REQUIRE(rec.best_position.size() == 3);
    for (std::size_t d = 0; d < 3; ++d) CHECK(rec.best_position[d] == doctest::Approx(kCenter[d]).epsilon(0.01));
    CHECK(rec.best_loss.back() < 1e-3);
    CHECK(rec.best_loss.size() == 61);
    CHECK(rec.optimizer == "pso");
}

TEST_CASE("pso best loss never increases and positions stay in the box")
{
    auto cfg = box3();
    cfg.lower = {4, -10, -10}; // optimum outside the box along the first axis
    const auto rec = training::train_pso(noisy_quadratic, cfg);
    for (std::size_t i = 1; i < rec.best_loss.size(); ++i) CHECK(rec.best_loss[i] <= rec.best_loss[i - 1]);
    for (const auto& p : rec.best_position_trace) {
        for (std::size_t d = 0; d < 3; ++d) CHECK((p[d] >= cfg.lower[d] && p[d] <= cfg.upper[d]));
    }
    CHECK(rec.best_position[0] == doctest::Approx(4.0).epsilon(0.01));
}

TEST_CASE("pso is reproducible and independent of the thread count")
{
    auto cfg = box3();
    const auto a = training::train_pso(noisy_quadratic, cfg);
    const auto b = training::train_pso(noisy_quadratic, cfg);
    cfg.jobs = 3;
    const auto c = training::train_pso(noisy_quadratic, cfg);
    CHECK(a.best_loss == b.best_loss);
    CHECK(a.best_position == b.best_position);
    CHECK(a.best_loss == c.best_loss);
    CHECK(a.best_position_trace == c.best_position_trace);
    cfg.master_seed = 6;
    CHECK(training::train_pso(noisy_quadratic, cfg).best_position != a.best_position);
}

TEST_CASE("pso configuration checks")
{
    auto cfg = box3();
    cfg.upper = {10, 10};
    CHECK_THROWS_AS(training::train_pso(quadratic, cfg), ParameterError);
    cfg = box3();
    cfg.n_particles = 0;
    CHECK_THROWS_AS(training::train_pso(quadratic, cfg), ParameterError);
    cfg = box3();
    cfg.upper[1] = cfg.lower[1];
    CHECK_THROWS_AS(training::train_pso(quadratic, cfg), ParameterError);
}

TEST_CASE("objective failures carry the offending position")
{
    auto cfg = box3();
    auto failing = [](std::span<const double> x, std::uint64_t) -> double {
        if (x[0] > 5.0) throw std::runtime_error("boom");
        return 0.0;
    };
    try {
        training::train_pso(failing, cfg);
        FAIL("expected an EvaluationError");
    } catch (const training::EvaluationError& e) {
        REQUIRE(e.position().size() == 3);
        CHECK(e.position()[0] > 5.0);
    }
}

TEST_CASE("pso recovers a two-tap phase by grid-search oracle")
{
    // Target: the two-tap output with phase 2.2 rad; the loss is the field mismatch.
    auto rng = make_rng({9});
    std::normal_distribution<double> g;
    ComplexEnvelope u{std::vector<Complex>(512), 320e9};
    for (auto& s : u.samples) s = Complex{g(rng), g(rng)};
    const std::size_t delay = 16;
    const auto weights = [](double phi) { return std::vector<Complex>{1.0, std::polar(0.78, phi)}; };
    const auto target = perceptron::apply_weights(u, delay, weights(2.2), 0.5);
    auto mismatch = [&](std::span<const double> x, std::uint64_t) {
        const auto out = perceptron::apply_weights(u, delay, weights(x[0]), 0.5);
        double acc = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) acc += std::norm(out.samples[i] - target.samples[i]);
        return acc / static_cast<double>(out.size());
    };

    double grid_best = 1e300, grid_phi = 0.0;
    for (int k = 0; k <= 6283; ++k) {
        const double phi = k * 1e-3;
        const double l = mismatch(std::span(&phi, 1), 0);
        if (l < grid_best) {
            grid_best = l;
            grid_phi = phi;
        }
    }
    SwarmConfig cfg;
    cfg.lower = {0.0};
    cfg.upper = {kTwoPi};
    cfg.n_particles = 10;
    cfg.n_iterations = 40;
    const auto rec = training::train_pso(mismatch, cfg);
    CHECK(grid_phi == doctest::Approx(2.2).epsilon(1e-3));
    CHECK(rec.best_position[0] == doctest::Approx(grid_phi).epsilon(1e-3));
    CHECK(rec.best_loss.back() <= grid_best + 1e-9);
}

TEST_CASE("central differences are exact on a quadratic")
{
    const std::vector<double> x{1.0, 2.0, 3.0};
    const std::vector<double> lo{-10, -10, -10}, hi{10, 10, 10};
    std::size_t evals = 0;
    const auto g = training::central_difference_gradient(quadratic, x, 0.25, lo, hi, 1, &evals);
    for (std::size_t d = 0; d < 3; ++d) CHECK(g[d] == doctest::Approx(2.0 * (x[d] - kCenter[d])));
    CHECK(evals == 6);
}

TEST_CASE("adam descends a quadratic and is flagged experimental")
{
    training::AdamConfig cfg;
    cfg.lower = {-10, -10, -10};
    cfg.upper = {10, 10, 10};
    cfg.start = {0, 0, 0};
    cfg.learning_rate = 0.3;
    cfg.max_iterations = 400;
    const auto rec = training::train_adam(quadratic, cfg);
    CHECK(rec.experimental);
    CHECK(rec.optimizer == "adam");
    CHECK(rec.best_loss.back() < 0.05);
    for (std::size_t i = 1; i < rec.best_loss.size(); ++i) CHECK(rec.best_loss[i] <= rec.best_loss[i - 1]);
}

TEST_CASE("adam halves the step after a divergent move")
{
    training::AdamConfig cfg;
    cfg.lower = {-100};
    cfg.upper = {100};
    cfg.start = {1.0};
    cfg.learning_rate = 50.0;
    cfg.max_iterations = 30;
    auto f = [](std::span<const double> x, std::uint64_t) { return x[0] * x[0]; };
    const auto rec = training::train_adam(f, cfg);
    CHECK(rec.step_halvings > 0);
    CHECK(rec.best_loss.back() <= 1.0);
}

TEST_CASE("training log has one json object per iteration")
{
    auto cfg = box3();
    cfg.n_iterations = 4;
    const auto rec = training::train_pso(quadratic, cfg);
    std::ostringstream os;
    training::write_training_log(os, rec);
    std::istringstream is(os.str());
    std::string line;
    int n = 0;
    while (std::getline(is, line)) {
        const auto j = nlohmann::json::parse(line);
        CHECK(j.at("iteration").get<int>() == n);
        CHECK(j.at("best_loss").get<double>() == rec.best_loss[static_cast<std::size_t>(n)]);
        CHECK(j.at("best_currents").size() == 3);
        ++n;
    }
    CHECK(n == 5);
}

TEST_CASE("parallel_for covers every index and forwards exceptions")
{
    std::vector<std::atomic<int>> hits(100);
    training::parallel_for(100, 4, [&](std::size_t i) { hits[i] += 1; });
    for (auto& h : hits) CHECK(h.load() == 1);
    CHECK_THROWS_AS(training::parallel_for(10, 3,
                                           [](std::size_t i) {
                                               if (i == 7) throw std::logic_error("x");
                                           }),
                    std::logic_error);
}
