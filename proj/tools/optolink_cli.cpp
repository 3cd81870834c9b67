// optolink: train, scan, gain, study40g, export-eye.

#include <optolink/config.hpp>
#include <optolink/experiment.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace optolink;
using nlohmann::json;

namespace {

struct Common {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir = "runs";
    bool resume = false;
    int jobs = 1;
};

config::ExperimentConfig load(const Common& c)
{
    auto cfg = c.config_path.empty() ? config::default_config() : config::load_config(c.config_path);
    if (c.seed) {
        cfg.scenario.seed = *c.seed;
        cfg.study.seed = *c.seed;
    }
    return cfg;
}

experiment::RunOptions run_options(const Common& c)
{
    experiment::RunOptions o;
    o.out_dir = c.out_dir;
    o.resume = c.resume;
    o.jobs = std::max(1, c.jobs);
    return o;
}

void add_common(CLI::App* app, Common& c)
{
    app->add_option("--config", c.config_path, "INI config file (built-in 10 Gbps / 125 km scenario when omitted)")
        ->check(CLI::ExistingFile);
    app->add_option("--seed", c.seed, "Master seed (overrides the config)");
    app->add_option("--out-dir", c.out_dir, "Output root; results go to one subdirectory per scenario hash");
    app->add_flag("--resume", c.resume, "Continue a partial run from its last completed cell");
    app->add_option("--jobs", c.jobs, "Worker threads")->check(CLI::PositiveNumber);
}

void write_file(const fs::path& path, const std::string& text)
{
    fs::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os << text;
}

std::string short_hash(const std::string& text)
{
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

int cmd_train(const Common& c)
{
    const auto cfg = load(c);
    auto sc = cfg.scenario;
    sc.mode = experiment::Mode::fiber_plus_nn;
    const auto trained = experiment::train_and_store(sc, run_options(c));
    std::cout << "scenario " << sc.hash() << '\n'
              << "loss " << trained.initial_loss << " -> " << trained.record.best_loss.back() << " ("
              << trained.record.evaluations << " evaluations)\n"
              << "currents_ma";
    for (double i : trained.currents_ma) std::cout << ' ' << i;
    std::cout << "\nphases_rad";
    for (double p : trained.phases_rad) std::cout << ' ' << p;
    std::cout << "\nexcess_loss_db " << trained.excess_loss_db << '\n';
    return 0;
}

int cmd_scan(const Common& c)
{
    const auto cfg = load(c);
    const auto res = experiment::run_scenario(cfg.scenario, run_options(c));
    std::cout << "scenario " << res.hash << (res.resumed ? " (resumed)" : "") << '\n';
    experiment::write_ber_curve_csv(std::cout, res.points);
    std::cout << "written to " << (fs::path(c.out_dir) / res.hash).string() << '\n';
    return 0;
}

int cmd_gain(const Common& c)
{
    const auto cfg = load(c);
    const auto rows = experiment::gain_study(cfg.scenario, cfg.gain_lengths_km, run_options(c), cfg.gain_ber_threshold);

    std::vector<double> lengths;
    std::vector<std::vector<double>> phases;
    for (const auto& r : rows) {
        lengths.push_back(r.length_km);
        phases.push_back(r.phases_rad);
    }
    const auto trend = experiment::phase_trend(lengths, phases);

    std::ostringstream key;
    key << cfg.scenario.canonical() << '|' << cfg.gain_ber_threshold;
    for (double l : cfg.gain_lengths_km) key << ',' << l;
    const fs::path dir = fs::path(c.out_dir) / ("gain-" + short_hash(key.str()));

    std::ostringstream gain_csv, phase_csv;
    experiment::write_gain_csv(gain_csv, rows);
    experiment::write_phase_csv(phase_csv, trend);
    write_file(dir / "gain.csv", gain_csv.str());
    write_file(dir / "phases.csv", phase_csv.str());
    json j = {{"phase_trend_flag", trend.flag},
              {"phase_slope_rad_per_km", trend.slope_rad_per_km},
              {"final_distance_to_2pi_rad", trend.final_distance_to_2pi}};
    write_file(dir / "summary.json", j.dump(2) + "\n");

    std::cout << gain_csv.str() << "phase trend " << (trend.flag ? "holds" : "does not hold") << '\n'
              << "written to " << dir.string() << '\n';
    return 0;
}

int cmd_study40g(const Common& c)
{
    const auto cfg = load(c);
    const auto res = experiment::reach_and_penalty_study(cfg.study, run_options(c));

    std::ostringstream key;
    const auto& s = cfg.study;
    key << s.snr_db << '|' << s.acquisitions << '|' << s.ber_threshold << '|' << s.seed << '|'
        << s.training.particles << '|' << s.training.iterations;
    for (double l : s.lengths_km) key << ',' << l;
    for (double d : s.delays_ps) key << ';' << d;
    for (double g : s.snr_grid_db) key << ':' << g;
    const fs::path dir = fs::path(c.out_dir) / ("study40g-" + short_hash(key.str()));

    std::ostringstream csv;
    experiment::write_study_csv(csv, res);
    write_file(dir / "study40g.csv", csv.str());
    json j;
    j["btb_required_snr_db"] = res.btb_required_snr_db;
    for (const auto& r : res.reach) {
        j["reach"].push_back({{"delay_ps", r.delay_ps},
                              {"reach_km", r.reach_km},
                              {"lower_bound", r.lower_bound},
                              {"max_penalty_db", r.max_penalty_db}});
    }
    write_file(dir / "summary.json", j.dump(2) + "\n");
    std::cout << csv.str() << j.dump(2) << "\nwritten to " << dir.string() << '\n';
    return 0;
}

int cmd_export_eye(const Common& c)
{
    const auto cfg = load(c);
    const auto& sc = cfg.scenario;
    sc.validate();
    const link::LinkSimulator sim(sc.effective_link());
    const fs::path dir = fs::path(c.out_dir) / sc.hash();
    fs::create_directories(dir);

    ComplexEnvelope output = sim.output_field();
    if (sc.mode == experiment::Mode::fiber_plus_nn) {
        std::vector<double> currents = sc.fixed_currents_ma;
        const auto stored = dir / "training.json";
        if (currents.empty() && c.resume && fs::exists(stored)) {
            std::ifstream is(stored);
            currents = json::parse(is).at("currents_ma").get<std::vector<double>>();
        }
        if (currents.empty()) currents = experiment::train_and_store(sc, run_options(c)).currents_ma;
        output = sim.output_field(sim.weights_for(currents, link::WeightSpace::currents));
    }
    const double prx = cfg.export_prx_dbm.value_or(*std::max_element(sc.prx_dbm.begin(), sc.prx_dbm.end()));
    const auto e = experiment::export_eye(sim, output, prx, cfg.export_sample_index, cfg.export_acquisitions,
                                          derive_seed({sc.seed, 0xe7e}), cfg.export_bins);

    std::ostringstream eye, hist;
    metrics::write_eye_csv(eye, e.eye);
    metrics::write_histogram_csv(hist, e.histogram);
    write_file(dir / "eye.csv", eye.str());
    write_file(dir / "histogram.csv", hist.str());
    std::cout << "class overlap " << metrics::class_overlap(e.histogram) << ", population in [0.3, 0.4] "
              << metrics::population_in_band(e.histogram, 0.3, 0.4) << '\n'
              << "written to " << dir.string() << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"IMDD link simulator with a delayed complex perceptron equalizer"};
    app.require_subcommand(1);

    Common common;
    struct Verb {
        const char* name;
        const char* help;
        int (*run)(const Common&);
    };
    const Verb verbs[] = {
        {"train", "Train the device currents for the configured scenario", cmd_train},
        {"scan", "BER versus received power for the configured scenario", cmd_scan},
        {"gain", "Gain versus fiber length, with and without the device", cmd_gain},
        {"study40g", "40 Gbps reach and SNR penalty versus length", cmd_study40g},
        {"export-eye", "Eye diagram and level histogram CSVs", cmd_export_eye},
    };
    std::vector<std::pair<CLI::App*, const Verb*>> subs;
    for (const auto& v : verbs) {
        auto* sub = app.add_subcommand(v.name, v.help);
        add_common(sub, common);
        subs.emplace_back(sub, &v);
    }

    CLI11_PARSE(app, argc, argv);
    try {
        for (const auto& [sub, verb] : subs) {
            if (sub->parsed()) return verb->run(common);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
