#pragma once

#include <optolink/experiment.hpp>

#include <filesystem>
#include <optional>
#include <string>

namespace optolink::config {

/// Everything the command line verbs read from a config file.
struct ExperimentConfig {
    experiment::Scenario scenario;
    std::vector<double> gain_lengths_km{25, 50, 75, 100, 125};
    double gain_ber_threshold = 2e-3;
    experiment::Study40Settings study;
    int export_sample_index = 2;
    std::size_t export_acquisitions = 20;
    std::optional<double> export_prx_dbm; ///< highest scenario PRX when unset
    std::size_t export_bins = 50;
};

/// Built-in 10 Gbps, 125 km, fiber_plus_nn scenario.
ExperimentConfig default_config();

/// INI text: [section] headers and key = value lines, ';' or '#' comments.
/// Lists are comma separated; a range a:b:step expands to a, a+step, ..., b.
/// Unknown sections or keys are rejected.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// "1, 2, 3" or "a:b:step".
std::vector<double> parse_list(const std::string& text);

} // namespace optolink::config
