#include <optolink/config.hpp>
#include <optolink/experiment.hpp>

#include <pybind11/complex.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace optolink;

namespace {

template <class T>
py::array_t<T> to_array(const std::vector<T>& v)
{
    return py::array_t<T>(static_cast<py::ssize_t>(v.size()), v.data());
}

ComplexEnvelope envelope(py::array_t<Complex, py::array::c_style | py::array::forcecast> samples, double rate)
{
    ComplexEnvelope e;
    e.samples.assign(samples.data(), samples.data() + samples.size());
    e.sample_rate_hz = rate;
    return e;
}

metrics::UndersampledTrace trace_from(py::array_t<double, py::array::c_style | py::array::forcecast> values,
                                      py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast> labels,
                                      int sample_index)
{
    if (values.size() != labels.size()) throw ParameterError("values and labels differ in length");
    metrics::UndersampledTrace t;
    t.values.assign(values.data(), values.data() + values.size());
    t.labels.assign(labels.data(), labels.data() + labels.size());
    t.sample_index = sample_index;
    return t;
}

py::dict point_dict(const link::BerPoint& p)
{
    py::dict d;
    d["prx_dbm"] = p.prx_dbm;
    d["ber_mean"] = p.ber_mean;
    d["ber_std"] = p.ber_std;
    d["n_acquisitions"] = p.n_acquisitions;
    d["errors"] = p.errors;
    d["bits"] = p.bits;
    d["floored"] = p.floored;
    return d;
}

py::dict record_dict(const training::TrainingRecord& r)
{
    py::dict d;
    d["optimizer"] = r.optimizer;
    d["best_loss"] = r.best_loss;
    d["incumbent_loss"] = r.incumbent_loss;
    d["best_position"] = r.best_position;
    d["evaluations"] = r.evaluations;
    d["step_halvings"] = r.step_halvings;
    d["experimental"] = r.experimental;
    return d;
}

link::LinkConfig link_config(double bitrate_gbps, double length_km, double delta_t_ps)
{
    if (bitrate_gbps == 10.0) {
        auto c = link::LinkConfig::ten_gbps(length_km * 1e3, delta_t_ps > 0.0);
        if (delta_t_ps > 0.0) c.device.delta_t_s = delta_t_ps * 1e-12;
        return c;
    }
    if (bitrate_gbps == 40.0) return link::LinkConfig::forty_gbps(length_km * 1e3, delta_t_ps * 1e-12);
    throw ParameterError("bitrate_gbps must be 10 or 40");
}

} // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "IMDD link simulator with a delayed complex perceptron equalizer";

    py::register_exception<ParameterError>(m, "ParameterError", PyExc_ValueError);
    py::register_exception<DegenerateSignalError>(m, "DegenerateSignalError", PyExc_RuntimeError);

    // signal generation and channel
    m.def(
        "generate_prbs",
        [](int order, std::uint32_t seed, bool maximal_length) {
            const auto period = maximal_length ? signal::PrbsPeriod::maximal_length : signal::PrbsPeriod::power_of_two;
            return to_array(signal::generate_prbs(order, seed, 10e9, period).bits);
        },
        py::arg("order"), py::arg("seed") = 1, py::arg("maximal_length") = false);
    m.def(
        "modulate",
        [](py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast> bits, double bitrate_hz,
           double grid_rate_hz, double extinction_ratio_db, double avg_power_w) {
            BitSequence b{{bits.data(), bits.data() + bits.size()}, bitrate_hz};
            signal::ModulatorParams p;
            p.extinction_ratio_db = extinction_ratio_db;
            p.avg_power_w = avg_power_w;
            return to_array(signal::modulate(b, p, grid_rate_hz).samples);
        },
        py::arg("bits"), py::arg("bitrate_hz") = 10e9, py::arg("grid_rate_hz") = 320e9,
        py::arg("extinction_ratio_db") = 13.9, py::arg("avg_power_w") = 1e-3);
    m.def(
        "propagate",
        [](py::array_t<Complex, py::array::c_style | py::array::forcecast> field, double sample_rate_hz,
           double length_m, double beta2_ps2_per_m, double alpha_db_per_km) {
            fiber::FiberParams f;
            f.length_m = length_m;
            f.beta2_ps2_per_m = beta2_ps2_per_m;
            f.alpha_db_per_km = alpha_db_per_km;
            return to_array(fiber::propagate(envelope(field, sample_rate_hz), f).samples);
        },
        py::arg("field"), py::arg("sample_rate_hz"), py::arg("length_m"), py::arg("beta2_ps2_per_m") = -0.021,
        py::arg("alpha_db_per_km") = 0.2);
    m.def(
        "recommend_taps",
        [](double bitrate_hz, double length_m, double delta_omega, double delta_t_s, double beta2_ps2_per_m) {
            fiber::FiberParams f;
            f.beta2_ps2_per_m = beta2_ps2_per_m;
            const auto r = fiber::recommend_taps(bitrate_hz, length_m, f, delta_omega, delta_t_s);
            return py::make_tuple(r.n_taps, r.broadening_s, r.pulse_width_s);
        },
        py::arg("bitrate_hz"), py::arg("length_m"), py::arg("delta_omega_rad_s"), py::arg("delta_t_s"),
        py::arg("beta2_ps2_per_m") = -0.021, "Returns (n_taps, broadening_s, pulse_width_s).");
    m.def(
        "dispersion_length",
        [](double t0_s, double beta2_ps2_per_m) {
            fiber::FiberParams f;
            f.beta2_ps2_per_m = beta2_ps2_per_m;
            return fiber::dispersion_length(t0_s, f);
        },
        py::arg("t0_s"), py::arg("beta2_ps2_per_m") = -0.021);

    // device
    m.def(
        "phases_from_currents",
        [](std::vector<double> trainable_currents_ma, double gamma) {
            auto s = perceptron::DeviceState::with_taps(static_cast<int>(trainable_currents_ma.size() + 1), 50e-12,
                                                        {0.0, 2.1, 4.3, 6.4});
            s.gamma_rad_per_ma2.assign(static_cast<std::size_t>(s.n_taps), gamma);
            return perceptron::phases_from_currents(s.with_currents(trainable_currents_ma));
        },
        py::arg("currents_ma"), py::arg("gamma_rad_per_ma2") = 0.01);
    m.def(
        "apply_device",
        [](py::array_t<Complex, py::array::c_style | py::array::forcecast> field, double sample_rate_hz,
           std::vector<double> currents_ma, double delta_t_s) {
            auto s = perceptron::DeviceState::with_taps(4, delta_t_s, {0.0, 2.1, 4.3, 6.4}).with_currents(currents_ma);
            const auto in = envelope(field, sample_rate_hz);
            const auto out = perceptron::apply(in, s);
            return py::make_tuple(to_array(out.samples), perceptron::excess_loss_db(s, in));
        },
        py::arg("field"), py::arg("sample_rate_hz"), py::arg("currents_ma"), py::arg("delta_t_s") = 50e-12,
        "Returns (output field, excess loss dB).");

    // receiver
    m.def("noise_variance", [](double v_mv) { return receiver::noise_variance(v_mv, receiver::ReceiverParams{}); },
          py::arg("v_mv"));
    m.def(
        "detect",
        [](py::array_t<Complex, py::array::c_style | py::array::forcecast> field, double sample_rate_hz,
           double bitrate_hz, double prx_dbm, std::uint64_t seed) {
            const auto params = bitrate_hz == 40e9 ? receiver::ReceiverParams::forty_gbps() : receiver::ReceiverParams{};
            const auto d = receiver::detect(envelope(field, sample_rate_hz), params, bitrate_hz, prx_dbm, seed);
            return py::make_tuple(to_array(d.waveform.samples), d.offset_samples);
        },
        py::arg("field"), py::arg("sample_rate_hz"), py::arg("bitrate_hz"), py::arg("prx_dbm"), py::arg("seed") = 1,
        "Returns (scope samples in mV, grid offset).");

    // metrics
    m.def(
        "align",
        [](std::vector<double> input, std::vector<double> output) {
            return metrics::align({std::move(input), 1.0, 0.0}, {std::move(output), 1.0, 0.0});
        },
        py::arg("input"), py::arg("output"));
    m.def(
        "separation_loss",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> values,
           py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast> labels) {
            return metrics::separation_loss(trace_from(values, labels, 1));
        },
        py::arg("values"), py::arg("labels"));
    m.def(
        "ber_count",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> values,
           py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast> labels) {
            const std::vector<metrics::UndersampledTrace> t{trace_from(values, labels, 1)};
            const auto b = metrics::ber_count(t);
            return py::make_tuple(b.ber, b.threshold, b.sample_index);
        },
        py::arg("values"), py::arg("labels"), "Returns (ber, threshold, sample_index).");
    m.def(
        "ber_model",
        [](double i0, double i1, double s0, double s1, std::optional<double> threshold) {
            LevelStats s{i0, i1, s0, s1, 0.0};
            s.threshold = threshold ? *threshold : metrics::optimal_threshold(s);
            return metrics::ber_model(s);
        },
        py::arg("i0"), py::arg("i1"), py::arg("sigma0"), py::arg("sigma1"), py::arg("threshold") = py::none());

    // training
    m.def(
        "train_pso",
        [](std::function<double(std::vector<double>, std::uint64_t)> fn, std::vector<double> lower,
           std::vector<double> upper, int particles, int iterations, std::uint64_t seed) {
            training::SwarmConfig c;
            c.lower = std::move(lower);
            c.upper = std::move(upper);
            c.n_particles = particles;
            c.n_iterations = iterations;
            c.master_seed = seed;
            const training::Objective obj = [&fn](std::span<const double> x, std::uint64_t s) {
                return fn(std::vector<double>(x.begin(), x.end()), s);
            };
            return record_dict(training::train_pso(obj, c));
        },
        py::arg("objective"), py::arg("lower"), py::arg("upper"), py::arg("particles") = 20,
        py::arg("iterations") = 100, py::arg("seed") = 1);

    py::class_<link::LinkSimulator>(m, "LinkSimulator")
        .def(py::init([](double bitrate_gbps, double length_km, double delta_t_ps) {
                 return std::make_unique<link::LinkSimulator>(link_config(bitrate_gbps, length_km, delta_t_ps));
             }),
             py::arg("bitrate_gbps") = 10.0, py::arg("length_km") = 0.0, py::arg("delta_t_ps") = 0.0,
             "delta_t_ps > 0 inserts the 4-tap device with that delay granularity.")
        .def("snr_db", &link::LinkSimulator::snr_db, py::arg("prx_dbm"))
        .def("prx_for_snr", &link::LinkSimulator::prx_for_snr, py::arg("snr_db"))
        .def("bits", [](const link::LinkSimulator& s) { return to_array(s.bits().bits); })
        .def(
            "loss",
            [](const link::LinkSimulator& s, std::vector<double> currents_ma, double prx_dbm, std::uint64_t seed) {
                const auto w = s.config().use_device ? s.weights_for(currents_ma, link::WeightSpace::currents)
                                                     : std::vector<Complex>{};
                return s.loss(s.output_field(w), prx_dbm, seed);
            },
            py::arg("currents_ma"), py::arg("prx_dbm"), py::arg("seed") = 1)
        .def(
            "train",
            [](const link::LinkSimulator& s, double prx_dbm, int particles, int iterations, std::uint64_t seed,
               const std::string& optimizer) {
                link::TrainOptions o;
                o.optimizer = optimizer;
                o.prx_dbm = prx_dbm;
                o.swarm.n_particles = particles;
                o.swarm.n_iterations = iterations;
                o.swarm.master_seed = seed;
                o.adam.master_seed = seed;
                link::TrainedDevice t;
                {
                    py::gil_scoped_release release;
                    t = s.train(o);
                }
                py::dict d = record_dict(t.record);
                d["currents_ma"] = t.currents_ma;
                d["phases_rad"] = t.phases_rad;
                d["excess_loss_db"] = t.excess_loss_db;
                d["initial_loss"] = t.initial_loss;
                return d;
            },
            py::arg("prx_dbm"), py::arg("particles") = 20, py::arg("iterations") = 100, py::arg("seed") = 1,
            py::arg("optimizer") = "pso")
        .def(
            "measure_ber",
            [](const link::LinkSimulator& s, double prx_dbm, std::size_t acquisitions,
               std::optional<std::vector<double>> currents_ma, std::uint64_t seed) {
                ComplexEnvelope out = s.output_field();
                if (currents_ma) out = s.output_field(s.weights_for(*currents_ma, link::WeightSpace::currents));
                link::BerPoint p;
                {
                    py::gil_scoped_release release;
                    p = s.measure_ber(out, prx_dbm, acquisitions, seed);
                }
                return point_dict(p);
            },
            py::arg("prx_dbm"), py::arg("acquisitions") = 100, py::arg("currents_ma") = py::none(),
            py::arg("seed") = 1);

    // experiments
    m.def(
        "run_scenario",
        [](const std::string& config_text, const std::filesystem::path& out_dir, bool resume, int jobs) {
            const auto cfg = config::parse_config(config_text);
            experiment::RunOptions o{out_dir, resume, jobs, true};
            experiment::BerScanResult r;
            {
                py::gil_scoped_release release;
                r = experiment::run_scenario(cfg.scenario, o);
            }
            py::dict d;
            d["hash"] = r.hash;
            py::list pts;
            for (const auto& p : r.points) pts.append(point_dict(p));
            d["points"] = pts;
            d["currents_ma"] = r.currents_ma;
            d["excess_loss_db"] = r.excess_loss_db;
            d["resumed"] = r.resumed;
            return d;
        },
        py::arg("config_text"), py::arg("out_dir"), py::arg("resume") = false, py::arg("jobs") = 1,
        "Runs the scan described by an INI config string; files land in out_dir/<hash>/.");
    m.def(
        "gain_report",
        [](std::vector<double> prx_with, std::vector<double> ber_with, std::vector<double> prx_without,
           std::vector<double> ber_without, double el_db, double threshold) {
            auto curve = [](const std::vector<double>& x, const std::vector<double>& y) {
                if (x.size() != y.size()) throw ParameterError("PRX and BER lists differ in length");
                std::vector<link::BerPoint> c(x.size());
                for (std::size_t i = 0; i < x.size(); ++i) {
                    c[i].prx_dbm = x[i];
                    c[i].ber_mean = y[i];
                }
                return c;
            };
            const auto r = experiment::gain_report(curve(prx_with, ber_with), curve(prx_without, ber_without), el_db,
                                                   threshold);
            return py::make_tuple(r.gain_db, experiment::to_string(r.status));
        },
        py::arg("prx_with"), py::arg("ber_with"), py::arg("prx_without"), py::arg("ber_without"),
        py::arg("excess_loss_db"), py::arg("ber_threshold") = 2e-3, "Returns (gain_db, status).");
}
