#include <optolink/experiment.hpp>

#include <json.hpp>

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace optolink::experiment {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "optolink 0.1.0";

std::uint64_t fnv1a(const std::string& text)
{
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string hex16(std::uint64_t v)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
    return buf;
}

std::string fixed(double v, int digits)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string sci(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9e", v);
    return buf;
}

json link_json(const link::LinkConfig& c)
{
    json j;
    j["bitrate_hz"] = c.bitrate_hz;
    j["grid_rate_hz"] = c.grid_rate_hz;
    j["prbs_order"] = c.prbs_order;
    j["prbs_seed"] = c.prbs_seed;
    j["periods_per_acquisition"] = c.periods_per_acquisition;
    j["modulator"] = {{"bandwidth_hz", c.modulator.analog_bandwidth_hz},
                      {"extinction_ratio_db", c.modulator.extinction_ratio_db},
                      {"chirp", c.modulator.chirp},
                      {"avg_power_w", c.modulator.avg_power_w}};
    j["fiber"] = {{"length_m", c.fiber.length_m},
                  {"beta2_ps2_per_m", c.fiber.beta2_ps2_per_m},
                  {"alpha_db_per_km", c.fiber.alpha_db_per_km}};
    const auto& r = c.receiver;
    j["receiver"] = {{"noise_m_mv", r.noise_m_mv},       {"noise_q_mv2", r.noise_q_mv2},
                     {"scope_bw_hz", r.scope_bw_hz},     {"scope_rate_hz", r.scope_rate_hz},
                     {"adc_bits", r.adc_bits},           {"full_scale_mv", r.full_scale_mv},
                     {"responsivity_mv_per_mw", r.responsivity_mv_per_mw}};
    j["training_sample_index"] = c.training_sample_index;
    if (c.use_device) {
        const auto& d = c.device;
        j["device"] = {{"n_taps", d.n_taps},
                       {"delta_t_s", d.delta_t_s},
                       {"attenuation_db", d.attenuation_db},
                       {"phase_offsets_rad", d.phase_offsets_rad},
                       {"gamma_rad_per_ma2", d.gamma_rad_per_ma2},
                       {"current_min_ma", d.current_min_ma},
                       {"current_max_ma", d.current_max_ma}};
    }
    return j;
}

json training_json(const TrainingSettings& t)
{
    json j = {{"optimizer", t.optimizer},
              {"snr_db", t.snr_db},
              {"space", t.space == link::WeightSpace::currents ? "currents" : "phases"}};
    if (t.optimizer == "pso") {
        j["particles"] = t.particles;
        j["iterations"] = t.iterations;
        j["inertia"] = t.inertia;
        j["cognitive"] = t.cognitive;
        j["social"] = t.social;
        j["velocity_clamp"] = t.velocity_clamp;
    } else {
        j["fd_step_ma"] = t.fd_step_ma;
        j["learning_rate"] = t.learning_rate;
        j["iterations"] = t.adam_iterations;
    }
    return j;
}

json point_json(const link::BerPoint& p)
{
    return {{"prx_dbm", p.prx_dbm}, {"ber_mean", p.ber_mean},    {"ber_std", p.ber_std},
            {"n", p.n_acquisitions}, {"errors", p.errors},       {"bits", p.bits},
            {"floored", p.floored},  {"overflow", p.overflow_acquisitions}};
}

link::BerPoint point_from_json(const json& j)
{
    link::BerPoint p;
    p.prx_dbm = j.at("prx_dbm").get<double>();
    p.ber_mean = j.at("ber_mean").get<double>();
    p.ber_std = j.at("ber_std").get<double>();
    p.n_acquisitions = j.at("n").get<std::size_t>();
    p.errors = j.at("errors").get<std::size_t>();
    p.bits = j.at("bits").get<std::size_t>();
    p.floored = j.at("floored").get<bool>();
    p.overflow_acquisitions = j.at("overflow").get<std::size_t>();
    return p;
}

void write_text(const fs::path& path, const std::string& text)
{
    const auto tmp = fs::path(path.string() + ".tmp");
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot write " + tmp.string());
        os << text;
    }
    fs::rename(tmp, path);
}

void store_training(const fs::path& dir, const link::TrainedDevice& trained, double training_prx_dbm)
{
    std::ostringstream log;
    training::write_training_log(log, trained.record);
    write_text(dir / "training_log.jsonl", log.str());
    json j = {{"currents_ma", trained.currents_ma},
              {"phases_rad", trained.phases_rad},
              {"training_prx_dbm", training_prx_dbm},
              {"excess_loss_db", trained.excess_loss_db},
              {"initial_loss", trained.initial_loss},
              {"final_loss", trained.record.best_loss.back()},
              {"evaluations", trained.record.evaluations},
              {"optimizer", trained.record.optimizer},
              {"experimental", trained.record.experimental}};
    write_text(dir / "training.json", j.dump(2) + "\n");
}

double wrap_pi(double x)
{
    x = std::fmod(x + std::numbers::pi, kTwoPi);
    if (x < 0.0) x += kTwoPi;
    return x - std::numbers::pi;
}

std::vector<double> log_ber(const std::vector<link::BerPoint>& curve)
{
    std::vector<double> y(curve.size());
    for (std::size_t i = 0; i < curve.size(); ++i) y[i] = std::log10(std::max(curve[i].ber_mean, 1e-300));
    return y;
}

} // namespace

std::string to_string(Mode mode)
{
    switch (mode) {
    case Mode::btb: return "btb";
    case Mode::fiber_only: return "fiber_only";
    case Mode::fiber_plus_nn: return "fiber_plus_nn";
    }
    return "?";
}

Mode mode_from_string(const std::string& text)
{
    if (text == "btb") return Mode::btb;
    if (text == "fiber_only") return Mode::fiber_only;
    if (text == "fiber_plus_nn") return Mode::fiber_plus_nn;
    throw ParameterError("unknown mode '" + text + "' (btb | fiber_only | fiber_plus_nn)");
}

std::string to_string(CrossingStatus status)
{
    switch (status) {
    case CrossingStatus::bracketed: return "bracketed";
    case CrossingStatus::extrapolated: return "extrapolated";
    case CrossingStatus::not_crossed: return "not_crossed";
    }
    return "?";
}

std::string to_string(GainStatus status)
{
    switch (status) {
    case GainStatus::ok: return "ok";
    case GainStatus::lower_bound: return "lower_bound";
    case GainStatus::upper_bound: return "upper_bound";
    case GainStatus::undefined: return "undefined";
    }
    return "?";
}

link::LinkConfig Scenario::effective_link() const
{
    auto c = link;
    if (mode == Mode::btb) c.fiber.length_m = 0.0;
    c.use_device = mode == Mode::fiber_plus_nn;
    return c;
}

void Scenario::validate() const
{
    effective_link().validate();
    if (prx_dbm.empty()) throw ParameterError("scenario: empty PRX grid");
    if (acquisitions == 0) throw ParameterError("scenario: acquisitions must be >= 1");
    if (mode == Mode::fiber_plus_nn && !fixed_currents_ma.empty() &&
        fixed_currents_ma.size() != static_cast<std::size_t>(link.device.n_taps - 1)) {
        throw ParameterError("scenario: fixed currents need one value per tunable channel");
    }
    if (training.optimizer != "pso" && training.optimizer != "adam") {
        throw ParameterError("scenario: optimizer must be pso or adam");
    }
}

std::string Scenario::canonical() const
{
    json j;
    j["mode"] = to_string(mode);
    j["link"] = link_json(effective_link());
    j["prx_dbm"] = prx_dbm;
    j["acquisitions"] = acquisitions;
    j["seed"] = seed;
    if (mode == Mode::fiber_plus_nn) {
        if (fixed_currents_ma.empty()) {
            j["training"] = training_json(training);
        } else {
            j["fixed_currents_ma"] = fixed_currents_ma;
        }
    }
    return j.dump();
}

std::string Scenario::hash() const { return hex16(fnv1a(canonical())); }

std::vector<double> prx_grid(double start, double stop, double step)
{
    if (!(step > 0.0) || stop < start) throw ParameterError("prx grid: need start <= stop and step > 0");
    std::vector<double> out;
    const auto n = static_cast<long>(std::floor((stop - start) / step + 1e-9));
    for (long i = 0; i <= n; ++i) out.push_back(start + static_cast<double>(i) * step);
    return out;
}

link::TrainedDevice train_scenario(const Scenario& scenario, const link::LinkSimulator& sim, int jobs)
{
    const auto& t = scenario.training;
    link::TrainOptions opt;
    opt.optimizer = t.optimizer;
    opt.space = t.space;
    opt.prx_dbm = sim.prx_for_snr(t.snr_db);
    opt.swarm.n_particles = t.particles;
    opt.swarm.n_iterations = t.iterations;
    opt.swarm.inertia = t.inertia;
    opt.swarm.cognitive = t.cognitive;
    opt.swarm.social = t.social;
    opt.swarm.velocity_clamp = t.velocity_clamp;
    opt.swarm.master_seed = derive_seed({scenario.seed, 0x7a41});
    opt.swarm.jobs = jobs;
    opt.adam.max_iterations = t.adam_iterations;
    opt.adam.learning_rate = t.learning_rate;
    opt.adam.fd_step = t.space == link::WeightSpace::currents ? t.fd_step_ma : 0.05;
    opt.adam.master_seed = derive_seed({scenario.seed, 0x7a41});
    return sim.train(opt);
}

link::TrainedDevice train_and_store(const Scenario& scenario, const RunOptions& options)
{
    auto sc = scenario;
    sc.mode = Mode::fiber_plus_nn;
    sc.fixed_currents_ma.clear();
    sc.validate();
    const link::LinkSimulator sim(sc.effective_link());
    auto trained = train_scenario(sc, sim, options.jobs);
    if (options.write_files) {
        const fs::path dir = options.out_dir / sc.hash();
        fs::create_directories(dir);
        store_training(dir, trained, sim.prx_for_snr(sc.training.snr_db));
    }
    return trained;
}

void write_ber_curve_csv(std::ostream& os, const std::vector<link::BerPoint>& points)
{
    os << "prx_dbm,ber_mean,ber_std,n_acquisitions\n";
    for (const auto& p : points) {
        os << fixed(p.prx_dbm, 4) << ',' << sci(p.ber_mean) << ',' << sci(p.ber_std) << ',' << p.n_acquisitions
           << '\n';
    }
}

BerScanResult run_scenario(const Scenario& scenario, const RunOptions& options)
{
    scenario.validate();
    const link::LinkSimulator sim(scenario.effective_link());

    BerScanResult res;
    res.scenario = scenario;
    res.hash = scenario.hash();
    res.provenance = std::string(kVersion) + "+" + res.hash;

    const fs::path dir = options.out_dir / res.hash;
    const fs::path progress_path = dir / "progress.jsonl";
    const fs::path training_path = dir / "training.json";
    if (options.write_files) {
        fs::create_directories(dir);
        if (!options.resume) {
            fs::remove(progress_path);
            fs::remove(training_path);
        }
    }

    std::vector<Complex> weights;
    if (scenario.mode == Mode::fiber_plus_nn) {
        if (!scenario.fixed_currents_ma.empty()) {
            res.currents_ma = scenario.fixed_currents_ma;
            weights = sim.weights_for(res.currents_ma, link::WeightSpace::currents);
            auto phases = perceptron::phases_from_currents(scenario.link.device.with_currents(res.currents_ma));
            for (auto& p : phases) p = std::fmod(std::fmod(p, kTwoPi) + kTwoPi, kTwoPi);
            res.phases_rad = phases;
        } else if (options.write_files && options.resume && fs::exists(training_path)) {
            std::ifstream is(training_path);
            const auto j = json::parse(is);
            res.currents_ma = j.at("currents_ma").get<std::vector<double>>();
            res.phases_rad = j.at("phases_rad").get<std::vector<double>>();
            res.training_prx_dbm = j.at("training_prx_dbm").get<double>();
            weights = sim.weights_for(res.currents_ma, link::WeightSpace::currents);
            res.resumed = true;
        } else {
            auto trained = train_scenario(scenario, sim, options.jobs);
            res.currents_ma = trained.currents_ma;
            res.phases_rad = trained.phases_rad;
            res.training_prx_dbm = sim.prx_for_snr(scenario.training.snr_db);
            // Currents are the stored knob; rebuild weights from them so resumed runs match.
            weights = sim.weights_for(res.currents_ma, link::WeightSpace::currents);
            if (options.write_files) store_training(dir, trained, res.training_prx_dbm);
            res.trained = std::move(trained);
        }
    }
    const auto output = scenario.mode == Mode::fiber_plus_nn ? sim.output_field(weights) : sim.output_field();
    if (scenario.mode == Mode::fiber_plus_nn) res.excess_loss_db = sim.excess_loss_db(output);

    std::vector<link::BerPoint> done;
    if (options.write_files && options.resume && fs::exists(progress_path)) {
        std::ifstream is(progress_path);
        std::string line;
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            try {
                done.push_back(point_from_json(json::parse(line)));
            } catch (const json::exception&) {
                break; // torn last line of an interrupted run
            }
        }
        res.resumed = res.resumed || !done.empty();
    }

    std::ofstream progress;
    if (options.write_files) {
        // Rewrite the verified prefix so a torn line never survives.
        std::ostringstream prefix;
        for (std::size_t i = 0; i < done.size() && i < scenario.prx_dbm.size(); ++i) {
            prefix << point_json(done[i]).dump() << '\n';
        }
        write_text(progress_path, prefix.str());
        progress.open(progress_path, std::ios::app);
    }

    for (std::size_t i = 0; i < scenario.prx_dbm.size(); ++i) {
        const double prx = scenario.prx_dbm[i];
        if (i < done.size() && done[i].prx_dbm == prx) {
            res.points.push_back(done[i]);
            continue;
        }
        const auto point =
            sim.measure_ber(output, prx, scenario.acquisitions, derive_seed({scenario.seed, 0xbe5, i}), options.jobs);
        res.points.push_back(point);
        if (progress.is_open()) {
            progress << point_json(point).dump() << '\n';
            progress.flush();
        }
    }

    if (options.write_files) {
        std::ostringstream csv;
        write_ber_curve_csv(csv, res.points);
        write_text(dir / "ber_curve.csv", csv.str());

        json meta;
        meta["name"] = scenario.name;
        meta["hash"] = res.hash;
        meta["provenance"] = res.provenance;
        meta["scenario"] = json::parse(scenario.canonical());
        meta["bits_per_acquisition"] = sim.bits_per_acquisition();
        meta["snr_db_at_prx"] = json::array();
        for (double prx : scenario.prx_dbm) meta["snr_db_at_prx"].push_back(sim.snr_db(prx));
        if (scenario.mode == Mode::fiber_plus_nn) {
            meta["trained_currents_ma"] = res.currents_ma;
            meta["trained_phases_rad"] = res.phases_rad;
            meta["excess_loss_db"] = res.excess_loss_db;
            meta["insertion_loss_db"] = scenario.link.device.insertion_loss_db;
            meta["training_prx_dbm"] = res.training_prx_dbm;
        }
        meta["points"] = json::array();
        for (const auto& p : res.points) meta["points"].push_back(point_json(p));
        write_text(dir / "metadata.json", meta.dump(2) + "\n");
    }
    return res;
}

Crossing threshold_crossing(const std::vector<link::BerPoint>& input, double ber_threshold, double max_extrapolation_db)
{
    Crossing c;
    if (input.size() < 2) return c;
    auto curve = input;
    std::stable_sort(curve.begin(), curve.end(),
                     [](const auto& a, const auto& b) { return a.prx_dbm < b.prx_dbm; });
    const auto y = log_ber(curve);
    const double t = std::log10(ber_threshold);
    const std::size_t n = curve.size();
    auto x = [&](std::size_t i) { return curve[i].prx_dbm; };

    auto rises_near = [&](std::size_t i) {
        const std::size_t from = i > 0 ? i - 1 : 0;
        const std::size_t to = std::min(n - 1, i + 2);
        for (std::size_t k = from; k < to; ++k) {
            if (y[k + 1] > y[k]) return true;
        }
        return false;
    };

    for (std::size_t i = 0; i + 1 < n; ++i) {
        if (y[i] > t && y[i + 1] <= t) {
            const double f = (y[i] - t) / (y[i] - y[i + 1]);
            c.prx_dbm = x(i) + f * (x(i + 1) - x(i));
            c.status = CrossingStatus::bracketed;
            c.monotonic_warning = rises_near(i);
            for (std::size_t k = i + 1; k < n; ++k) c.monotonic_warning = c.monotonic_warning || y[k] > t;
            return c;
        }
    }

    const bool all_above = std::all_of(y.begin(), y.end(), [&](double v) { return v > t; });
    const bool all_below = std::all_of(y.begin(), y.end(), [&](double v) { return v <= t; });
    if (all_above) {
        const double slope = (y[n - 1] - y[n - 2]) / (x(n - 1) - x(n - 2));
        if (slope < 0.0) {
            const double xc = x(n - 1) + (t - y[n - 1]) / slope;
            if (xc - x(n - 1) <= max_extrapolation_db) {
                c.prx_dbm = xc;
                c.status = CrossingStatus::extrapolated;
            }
        }
        c.monotonic_warning = rises_near(n - 2);
    } else if (all_below) {
        const double slope = (y[1] - y[0]) / (x(1) - x(0));
        if (slope < 0.0) {
            const double xc = x(0) + (t - y[0]) / slope;
            if (x(0) - xc <= max_extrapolation_db) {
                c.prx_dbm = xc;
                c.status = CrossingStatus::extrapolated;
            }
        }
        c.monotonic_warning = rises_near(0);
    } else {
        c.monotonic_warning = true; // only upward crossings
    }
    return c;
}

GainReport gain_report(const std::vector<link::BerPoint>& with_nn, const std::vector<link::BerPoint>& without_nn,
                       double excess_loss_db, double ber_threshold, double max_extrapolation_db)
{
    GainReport r;
    r.excess_loss_db = excess_loss_db;
    r.with_nn = threshold_crossing(with_nn, ber_threshold, max_extrapolation_db);
    r.without_nn = threshold_crossing(without_nn, ber_threshold, max_extrapolation_db);
    r.warning = r.with_nn.monotonic_warning || r.without_nn.monotonic_warning;

    auto last_prx = [](const std::vector<link::BerPoint>& c) {
        double m = -std::numeric_limits<double>::infinity();
        for (const auto& p : c) m = std::max(m, p.prx_dbm);
        return m;
    };
    auto never_reached = [&](const std::vector<link::BerPoint>& c) {
        return std::all_of(c.begin(), c.end(), [&](const auto& p) { return p.ber_mean > ber_threshold; });
    };

    const bool with_ok = r.with_nn.status != CrossingStatus::not_crossed;
    const bool without_ok = r.without_nn.status != CrossingStatus::not_crossed;
    if (with_ok && without_ok) {
        r.gain_db = r.without_nn.prx_dbm - r.with_nn.prx_dbm - excess_loss_db;
        r.status = GainStatus::ok;
    } else if (with_ok && !without_nn.empty() && never_reached(without_nn)) {
        r.gain_db = last_prx(without_nn) + max_extrapolation_db - r.with_nn.prx_dbm - excess_loss_db;
        r.status = GainStatus::lower_bound;
    } else if (without_ok && !with_nn.empty() && never_reached(with_nn)) {
        r.gain_db = r.without_nn.prx_dbm - (last_prx(with_nn) + max_extrapolation_db) - excess_loss_db;
        r.status = GainStatus::upper_bound;
    } else {
        r.gain_db = std::numeric_limits<double>::quiet_NaN();
        r.status = GainStatus::undefined;
    }
    return r;
}

std::vector<GainRow> gain_study(const Scenario& base, const std::vector<double>& lengths_km, const RunOptions& options,
                                double ber_threshold)
{
    std::vector<GainRow> rows;
    for (double km : lengths_km) {
        Scenario without = base;
        without.mode = Mode::fiber_only;
        without.link.fiber.length_m = km * 1e3;
        Scenario with = without;
        with.mode = Mode::fiber_plus_nn;

        const auto r_without = run_scenario(without, options);
        const auto r_with = run_scenario(with, options);
        GainRow row;
        row.length_km = km;
        row.report = gain_report(r_with.points, r_without.points, r_with.excess_loss_db, ber_threshold);
        row.currents_ma = r_with.currents_ma;
        row.phases_rad = r_with.phases_rad;
        row.hash_with = r_with.hash;
        row.hash_without = r_without.hash;
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_gain_csv(std::ostream& os, const std::vector<GainRow>& rows)
{
    os << "length_km,prx_with_dbm,prx_without_dbm,excess_loss_db,gain_db,status,warning\n";
    for (const auto& r : rows) {
        os << fixed(r.length_km, 3) << ',' << fixed(r.report.with_nn.prx_dbm, 4) << ','
           << fixed(r.report.without_nn.prx_dbm, 4) << ',' << fixed(r.report.excess_loss_db, 4) << ','
           << fixed(r.report.gain_db, 4) << ',' << to_string(r.report.status) << ',' << (r.report.warning ? 1 : 0)
           << '\n';
    }
}

PhaseTrend phase_trend(const std::vector<double>& lengths_km, const std::vector<std::vector<double>>& phases_rad)
{
    if (lengths_km.size() != phases_rad.size() || lengths_km.empty()) {
        throw ParameterError("phase_trend: need one phase vector per length");
    }
    const std::size_t channels = phases_rad.front().size();
    if (channels < 2) throw ParameterError("phase_trend: need at least one tunable channel");

    PhaseTrend t;
    t.lengths_km = lengths_km;
    t.unwrapped.assign(lengths_km.size(), std::vector<double>(channels - 1));
    for (std::size_t k = 1; k < channels; ++k) {
        double prev = std::fmod(std::fmod(phases_rad[0].at(k), kTwoPi) + kTwoPi, kTwoPi);
        t.unwrapped[0][k - 1] = prev;
        for (std::size_t i = 1; i < lengths_km.size(); ++i) {
            const double cur = t.unwrapped[i - 1][k - 1] + wrap_pi(phases_rad[i].at(k) - phases_rad[i - 1].at(k));
            t.unwrapped[i][k - 1] = cur;
        }
    }
    for (const auto& row : t.unwrapped) {
        t.mean_phase.push_back(std::accumulate(row.begin(), row.end(), 0.0) / static_cast<double>(row.size()));
    }

    const double n = static_cast<double>(lengths_km.size());
    const double mx = std::accumulate(lengths_km.begin(), lengths_km.end(), 0.0) / n;
    const double my = std::accumulate(t.mean_phase.begin(), t.mean_phase.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < lengths_km.size(); ++i) {
        sxy += (lengths_km[i] - mx) * (t.mean_phase[i] - my);
        sxx += (lengths_km[i] - mx) * (lengths_km[i] - mx);
    }
    t.slope_rad_per_km = sxx > 0.0 ? sxy / sxx : 0.0;
    t.final_distance_to_2pi = std::abs(wrap_pi(t.mean_phase.back() - kTwoPi));
    t.non_decreasing = t.slope_rad_per_km >= 0.0;
    t.near_two_pi = t.final_distance_to_2pi <= std::numbers::pi / 2.0;
    t.flag = t.non_decreasing && t.near_two_pi;
    return t;
}

void write_phase_csv(std::ostream& os, const PhaseTrend& trend)
{
    os << "length_km";
    const std::size_t ch = trend.unwrapped.empty() ? 0 : trend.unwrapped.front().size();
    for (std::size_t k = 0; k < ch; ++k) os << ",phase_ch" << (k + 2) << "_rad";
    os << ",mean_rad\n";
    for (std::size_t i = 0; i < trend.lengths_km.size(); ++i) {
        os << fixed(trend.lengths_km[i], 3);
        for (double p : trend.unwrapped[i]) os << ',' << fixed(p, 6);
        os << ',' << fixed(trend.mean_phase[i], 6) << '\n';
    }
}

namespace {

struct Requirement {
    double snr_db = 0.0;
    CrossingStatus status = CrossingStatus::not_crossed;
};

// SNR needed to reach the threshold: ascending sweep that stops at the first point below it.
Requirement required_snr(const link::LinkSimulator& sim, const ComplexEnvelope& output, const Study40Settings& s,
                         std::uint64_t seed, int jobs)
{
    std::vector<link::BerPoint> pts;
    for (std::size_t i = 0; i < s.snr_grid_db.size(); ++i) {
        const double snr = s.snr_grid_db[i];
        auto p = sim.measure_ber(output, sim.prx_for_snr(snr), s.acquisitions, derive_seed({seed, i}), jobs);
        p.prx_dbm = snr; // the crossing is taken on the SNR axis
        pts.push_back(p);
        if (pts.size() >= 2 && p.ber_mean <= s.ber_threshold) break;
    }
    const auto c = threshold_crossing(pts, s.ber_threshold, 3.0);
    return {c.prx_dbm, c.status};
}

} // namespace

Study40Result reach_and_penalty_study(const Study40Settings& s, const RunOptions& options)
{
    Study40Result res;
    {
        const link::LinkSimulator btb(link::LinkConfig::forty_gbps(0.0, 0.0));
        const auto req = required_snr(btb, btb.output_field(), s, derive_seed({s.seed, 0xb7b}), options.jobs);
        if (req.status == CrossingStatus::not_crossed) {
            throw DegenerateSignalError("study40g: back-to-back link never reaches the threshold on the SNR grid");
        }
        res.btb_required_snr_db = req.snr_db;
    }

    for (std::size_t di = 0; di < s.delays_ps.size(); ++di) {
        const double delay_ps = s.delays_ps[di];
        for (std::size_t li = 0; li < s.lengths_km.size(); ++li) {
            const double km = s.lengths_km[li];
            const link::LinkSimulator sim(link::LinkConfig::forty_gbps(km * 1e3, delay_ps * 1e-12));
            const double prx = sim.prx_for_snr(s.snr_db);

            StudyRow row;
            row.delay_ps = delay_ps;
            row.length_km = km;
            ComplexEnvelope output = sim.output_field();
            if (sim.config().use_device) {
                Scenario sc;
                sc.link = sim.config();
                sc.mode = Mode::fiber_plus_nn;
                sc.seed = derive_seed({s.seed, di, li});
                sc.training = s.training;
                sc.training.snr_db = s.snr_db;
                const auto trained = train_scenario(sc, sim, options.jobs);
                output = sim.output_field(trained.weights);
                row.phases_rad = trained.phases_rad;
                row.excess_loss_db = trained.excess_loss_db;
                row.untrainable = !(trained.record.best_loss.back() < trained.initial_loss);
            }
            const auto p = sim.measure_ber(output, prx, s.acquisitions, derive_seed({s.seed, 0x12db, di, li}),
                                           options.jobs);
            row.ber_at_snr = p.ber_mean;
            row.ber_floored = p.floored;
            const auto req = required_snr(sim, output, s, derive_seed({s.seed, 0x5e9, di, li}), options.jobs);
            row.required_snr_db = req.snr_db;
            row.required_status = req.status;
            row.interpolable = req.status != CrossingStatus::not_crossed;
            row.penalty_db = row.interpolable ? req.snr_db - res.btb_required_snr_db
                                              : std::numeric_limits<double>::quiet_NaN();
            res.rows.push_back(row);
            if (!row.interpolable) break;
        }

        StudyReach reach;
        reach.delay_ps = delay_ps;
        std::vector<const StudyRow*> rows;
        for (const auto& r : res.rows) {
            if (r.delay_ps == delay_ps) rows.push_back(&r);
        }
        const double t = std::log10(s.ber_threshold);
        bool found = false;
        for (std::size_t i = 0; i < rows.size() && !found; ++i) {
            if (rows[i]->ber_at_snr <= s.ber_threshold) continue;
            found = true;
            if (i == 0) {
                reach.reach_km = rows[0]->length_km;
            } else {
                const double y0 = std::log10(rows[i - 1]->ber_at_snr), y1 = std::log10(rows[i]->ber_at_snr);
                const double f = (t - y0) / (y1 - y0);
                reach.reach_km = rows[i - 1]->length_km + f * (rows[i]->length_km - rows[i - 1]->length_km);
            }
        }
        if (!found && !rows.empty()) {
            reach.reach_km = rows.back()->length_km;
            reach.lower_bound = true;
        }
        for (const auto* r : rows) {
            if (r->interpolable) reach.max_penalty_db = std::max(reach.max_penalty_db, r->penalty_db);
        }
        res.reach.push_back(reach);
    }
    return res;
}

void write_study_csv(std::ostream& os, const Study40Result& result)
{
    os << "delay_ps,length_km,ber_at_snr,required_snr_db,penalty_db,interpolable,untrainable,excess_loss_db\n";
    for (const auto& r : result.rows) {
        os << fixed(r.delay_ps, 3) << ',' << fixed(r.length_km, 3) << ',' << sci(r.ber_at_snr) << ','
           << fixed(r.required_snr_db, 4) << ',' << fixed(r.penalty_db, 4) << ',' << (r.interpolable ? 1 : 0) << ','
           << (r.untrainable ? 1 : 0) << ',' << fixed(r.excess_loss_db, 4) << '\n';
    }
}

EyeExport export_eye(const link::LinkSimulator& sim, const ComplexEnvelope& output, double prx_dbm, int sample_index,
                     std::size_t acquisitions, std::uint64_t seed, std::size_t bins)
{
    if (acquisitions == 0) throw ParameterError("export_eye: need at least one acquisition");
    EyeExport e;
    e.trace.sample_index = sample_index;
    for (std::size_t a = 0; a < acquisitions; ++a) {
        auto rng = make_rng({seed, a});
        const auto acq = sim.acquire(output, prx_dbm, rng);
        if (a == 0) e.eye = metrics::eye_points(acq.aligned, sim.config().bitrate_hz);
        const auto& tr = acq.traces.at(static_cast<std::size_t>(sample_index - 1));
        e.trace.values.insert(e.trace.values.end(), tr.values.begin(), tr.values.end());
        e.trace.labels.insert(e.trace.labels.end(), tr.labels.begin(), tr.labels.end());
    }
    e.histogram = metrics::level_histogram(e.trace, bins);
    return e;
}

} // namespace optolink::experiment
