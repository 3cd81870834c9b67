#include <optolink/config.hpp>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace optolink::config {
namespace pt = boost::property_tree;

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& text)
{
    try {
        std::size_t used = 0;
        const double v = std::stod(trim(text), &used);
        if (used != trim(text).size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw ParameterError("config: " + key + " expects a number, got '" + text + "'");
    }
}

long to_integer(const std::string& key, const std::string& text)
{
    const double v = to_double(key, text);
    if (v != std::floor(v)) throw ParameterError("config: " + key + " expects an integer, got '" + text + "'");
    return static_cast<long>(v);
}

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

// Keys that pick a preset must be applied before everything else.
const std::map<std::string, Setter>& setters()
{
    static const std::map<std::string, Setter> table = {
        // scenario
        {"scenario.name", [](auto& c, const auto& v) { c.scenario.name = trim(v); }},
        {"scenario.mode", [](auto& c, const auto& v) { c.scenario.mode = experiment::mode_from_string(trim(v)); }},
        {"scenario.length_km", [](auto& c, const auto& v) { c.scenario.link.fiber.length_m = 1e3 * to_double("length_km", v); }},
        {"scenario.prx_dbm", [](auto& c, const auto& v) { c.scenario.prx_dbm = parse_list(v); }},
        {"scenario.acquisitions", [](auto& c, const auto& v) { c.scenario.acquisitions = static_cast<std::size_t>(to_integer("acquisitions", v)); }},
        {"scenario.periods_per_acquisition", [](auto& c, const auto& v) { c.scenario.link.periods_per_acquisition = static_cast<int>(to_integer("periods_per_acquisition", v)); }},
        {"scenario.seed", [](auto& c, const auto& v) { c.scenario.seed = static_cast<std::uint64_t>(to_integer("seed", v)); }},
        {"scenario.prbs_order", [](auto& c, const auto& v) { c.scenario.link.prbs_order = static_cast<int>(to_integer("prbs_order", v)); }},
        {"scenario.prbs_seed", [](auto& c, const auto& v) { c.scenario.link.prbs_seed = static_cast<std::uint32_t>(to_integer("prbs_seed", v)); }},
        {"scenario.training_sample_index", [](auto& c, const auto& v) { c.scenario.link.training_sample_index = static_cast<int>(to_integer("training_sample_index", v)); }},
        {"scenario.grid_rate_gsps", [](auto& c, const auto& v) { c.scenario.link.grid_rate_hz = 1e9 * to_double("grid_rate_gsps", v); }},
        // modulator
        {"modulator.bandwidth_ghz", [](auto& c, const auto& v) { c.scenario.link.modulator.analog_bandwidth_hz = 1e9 * to_double("bandwidth_ghz", v); }},
        {"modulator.extinction_ratio_db", [](auto& c, const auto& v) { c.scenario.link.modulator.extinction_ratio_db = to_double("extinction_ratio_db", v); }},
        {"modulator.avg_power_mw", [](auto& c, const auto& v) { c.scenario.link.modulator.avg_power_w = 1e-3 * to_double("avg_power_mw", v); }},
        // fiber
        {"fiber.beta2_ps2_per_m", [](auto& c, const auto& v) { c.scenario.link.fiber.beta2_ps2_per_m = to_double("beta2_ps2_per_m", v); }},
        {"fiber.alpha_db_per_km", [](auto& c, const auto& v) { c.scenario.link.fiber.alpha_db_per_km = to_double("alpha_db_per_km", v); }},
        {"fiber.dispersion_ps_nm_km", [](auto& c, const auto& v) { c.scenario.link.fiber.dispersion_ps_nm_km = to_double("dispersion_ps_nm_km", v); }},
        {"fiber.lambda_nm", [](auto& c, const auto& v) { c.scenario.link.fiber.lambda_nm = to_double("lambda_nm", v); }},
        // device
        {"device.attenuation_db", [](auto& c, const auto& v) { c.scenario.link.device.attenuation_db = parse_list(v); }},
        {"device.phase_offsets_rad", [](auto& c, const auto& v) { c.scenario.link.device.phase_offsets_rad = parse_list(v); }},
        {"device.gamma_rad_per_ma2", [](auto& c, const auto& v) {
             auto& d = c.scenario.link.device;
             d.gamma_rad_per_ma2.assign(static_cast<std::size_t>(d.n_taps), to_double("gamma_rad_per_ma2", v));
         }},
        {"device.current_min_ma", [](auto& c, const auto& v) { c.scenario.link.device.current_min_ma = to_double("current_min_ma", v); }},
        {"device.current_max_ma", [](auto& c, const auto& v) { c.scenario.link.device.current_max_ma = to_double("current_max_ma", v); }},
        {"device.insertion_loss_db", [](auto& c, const auto& v) { c.scenario.link.device.insertion_loss_db = to_double("insertion_loss_db", v); }},
        {"device.currents_ma", [](auto& c, const auto& v) { c.scenario.fixed_currents_ma = parse_list(v); }},
        // receiver
        {"receiver.noise_m_mv", [](auto& c, const auto& v) { c.scenario.link.receiver.noise_m_mv = to_double("noise_m_mv", v); }},
        {"receiver.noise_q_mv2", [](auto& c, const auto& v) { c.scenario.link.receiver.noise_q_mv2 = to_double("noise_q_mv2", v); }},
        {"receiver.bandwidth_ghz", [](auto& c, const auto& v) { c.scenario.link.receiver.scope_bw_hz = 1e9 * to_double("bandwidth_ghz", v); }},
        {"receiver.scope_rate_gsps", [](auto& c, const auto& v) { c.scenario.link.receiver.scope_rate_hz = 1e9 * to_double("scope_rate_gsps", v); }},
        {"receiver.adc_bits", [](auto& c, const auto& v) { c.scenario.link.receiver.adc_bits = static_cast<int>(to_integer("adc_bits", v)); }},
        {"receiver.full_scale_mv", [](auto& c, const auto& v) { c.scenario.link.receiver.full_scale_mv = to_double("full_scale_mv", v); }},
        {"receiver.responsivity_mv_per_mw", [](auto& c, const auto& v) { c.scenario.link.receiver.responsivity_mv_per_mw = to_double("responsivity_mv_per_mw", v); }},
        // trainer
        {"trainer.optimizer", [](auto& c, const auto& v) { c.scenario.training.optimizer = trim(v); }},
        {"trainer.particles", [](auto& c, const auto& v) { c.scenario.training.particles = static_cast<int>(to_integer("particles", v)); }},
        {"trainer.iterations", [](auto& c, const auto& v) { c.scenario.training.iterations = static_cast<int>(to_integer("iterations", v)); }},
        {"trainer.inertia", [](auto& c, const auto& v) { c.scenario.training.inertia = to_double("inertia", v); }},
        {"trainer.cognitive", [](auto& c, const auto& v) { c.scenario.training.cognitive = to_double("cognitive", v); }},
        {"trainer.social", [](auto& c, const auto& v) { c.scenario.training.social = to_double("social", v); }},
        {"trainer.velocity_clamp", [](auto& c, const auto& v) { c.scenario.training.velocity_clamp = to_double("velocity_clamp", v); }},
        {"trainer.snr_db", [](auto& c, const auto& v) { c.scenario.training.snr_db = to_double("snr_db", v); }},
        {"trainer.fd_step_ma", [](auto& c, const auto& v) { c.scenario.training.fd_step_ma = to_double("fd_step_ma", v); }},
        {"trainer.learning_rate", [](auto& c, const auto& v) { c.scenario.training.learning_rate = to_double("learning_rate", v); }},
        {"trainer.adam_iterations", [](auto& c, const auto& v) { c.scenario.training.adam_iterations = static_cast<int>(to_integer("adam_iterations", v)); }},
        {"trainer.space", [](auto& c, const auto& v) {
             const auto t = trim(v);
             if (t != "currents" && t != "phases") throw ParameterError("config: trainer.space must be currents or phases");
             c.scenario.training.space = t == "currents" ? link::WeightSpace::currents : link::WeightSpace::phases;
         }},
        // gain
        {"gain.lengths_km", [](auto& c, const auto& v) { c.gain_lengths_km = parse_list(v); }},
        {"gain.ber_threshold", [](auto& c, const auto& v) { c.gain_ber_threshold = to_double("ber_threshold", v); }},
        // study40g
        {"study40g.lengths_km", [](auto& c, const auto& v) { c.study.lengths_km = parse_list(v); }},
        {"study40g.delays_ps", [](auto& c, const auto& v) { c.study.delays_ps = parse_list(v); }},
        {"study40g.snr_db", [](auto& c, const auto& v) { c.study.snr_db = to_double("snr_db", v); }},
        {"study40g.snr_grid_db", [](auto& c, const auto& v) { c.study.snr_grid_db = parse_list(v); }},
        {"study40g.acquisitions", [](auto& c, const auto& v) { c.study.acquisitions = static_cast<std::size_t>(to_integer("acquisitions", v)); }},
        {"study40g.ber_threshold", [](auto& c, const auto& v) { c.study.ber_threshold = to_double("ber_threshold", v); }},
        {"study40g.seed", [](auto& c, const auto& v) { c.study.seed = static_cast<std::uint64_t>(to_integer("seed", v)); }},
        {"study40g.particles", [](auto& c, const auto& v) { c.study.training.particles = static_cast<int>(to_integer("particles", v)); }},
        {"study40g.iterations", [](auto& c, const auto& v) { c.study.training.iterations = static_cast<int>(to_integer("iterations", v)); }},
        // export
        {"export.sample_index", [](auto& c, const auto& v) { c.export_sample_index = static_cast<int>(to_integer("sample_index", v)); }},
        {"export.acquisitions", [](auto& c, const auto& v) { c.export_acquisitions = static_cast<std::size_t>(to_integer("acquisitions", v)); }},
        {"export.prx_dbm", [](auto& c, const auto& v) { c.export_prx_dbm = to_double("prx_dbm", v); }},
        {"export.bins", [](auto& c, const auto& v) { c.export_bins = static_cast<std::size_t>(to_integer("bins", v)); }},
    };
    return table;
}

// Applied first: a preset resets the link, then the other keys refine it.
void apply_presets(ExperimentConfig& c, const pt::ptree& tree)
{
    if (const auto rate = tree.get_optional<std::string>("scenario.bitrate_gbps")) {
        const double gbps = to_double("bitrate_gbps", *rate);
        if (gbps == 10.0) {
            c.scenario.link = link::LinkConfig::ten_gbps(0.0, true);
        } else if (gbps == 40.0) {
            c.scenario.link = link::LinkConfig::forty_gbps(0.0, 18.75e-12);
            c.scenario.training.snr_db = 12.0;
        } else {
            c.scenario.link.bitrate_hz = gbps * 1e9;
        }
    }
    auto& d = c.scenario.link.device;
    const auto taps = tree.get_optional<std::string>("device.n_taps");
    const auto dt = tree.get_optional<std::string>("device.delta_t_ps");
    if (taps || dt) {
        const int n = taps ? static_cast<int>(to_integer("n_taps", *taps)) : d.n_taps;
        const double delta = dt ? 1e-12 * to_double("delta_t_ps", *dt) : d.delta_t_s;
        auto att = d.attenuation_db;
        att.resize(static_cast<std::size_t>(std::max(n, 1)), att.empty() ? 0.0 : att.back());
        d = perceptron::DeviceState::with_taps(n, delta, att);
    }
}

} // namespace

std::vector<double> parse_list(const std::string& text)
{
    const auto t = trim(text);
    if (t.empty()) return {};
    if (t.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::stringstream ss(t);
        std::string part;
        while (std::getline(ss, part, ':')) parts.push_back(part);
        if (parts.size() != 3) throw ParameterError("config: range must be start:stop:step, got '" + t + "'");
        return experiment::prx_grid(to_double("range", parts[0]), to_double("range", parts[1]),
                                    to_double("range", parts[2]));
    }
    std::vector<double> out;
    std::stringstream ss(t);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_double("list", item));
    return out;
}

ExperimentConfig default_config()
{
    ExperimentConfig c;
    c.scenario.name = "fiber_plus_nn_125km";
    c.scenario.mode = experiment::Mode::fiber_plus_nn;
    c.scenario.link = link::LinkConfig::ten_gbps(125e3, true);
    c.scenario.prx_dbm = experiment::prx_grid(-24.0, -8.0, 1.0);
    c.scenario.acquisitions = 1000;
    return c;
}

ExperimentConfig parse_config(const std::string& text)
{
    pt::ptree tree;
    std::istringstream is(text);
    try {
        pt::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ParameterError(std::string("config: ") + e.what());
    }

    auto c = default_config();
    apply_presets(c, tree);
    const auto& table = setters();
    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty()) {
            throw ParameterError("config: key '" + section + "' must live inside a [section]");
        }
        for (const auto& [key, value] : body) {
            const std::string full = section + "." + key;
            if (full == "scenario.bitrate_gbps" || full == "device.n_taps" || full == "device.delta_t_ps") continue;
            const auto it = table.find(full);
            if (it == table.end()) throw ParameterError("config: unknown key '" + full + "'");
            it->second(c, value.data());
        }
    }
    c.scenario.validate();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path)
{
    std::ifstream is(path);
    if (!is) throw ParameterError("config: cannot open " + path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str());
}

} // namespace optolink::config
