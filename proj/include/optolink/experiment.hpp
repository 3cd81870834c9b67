#pragma once

#include <optolink/link.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace optolink::experiment {

enum class Mode { btb, fiber_only, fiber_plus_nn };

std::string to_string(Mode mode);
Mode mode_from_string(const std::string& text);

struct TrainingSettings {
    std::string optimizer = "pso";
    int particles = 20;
    int iterations = 100;
    double inertia = 0.7;
    double cognitive = 1.5;
    double social = 1.5;
    double velocity_clamp = 0.2;
    double snr_db = 11.2;      ///< operating point used to pick the training PRX
    double fd_step_ma = 0.25;  ///< Adam finite-difference step
    double learning_rate = 0.5;
    int adam_iterations = 200;
    link::WeightSpace space = link::WeightSpace::currents;
};

/// One BER-vs-PRX sweep. btb forces a zero-length link without device.
struct Scenario {
    std::string name = "scenario";
    Mode mode = Mode::fiber_only;
    link::LinkConfig link = link::LinkConfig::ten_gbps(0.0, false);
    std::vector<double> prx_dbm;
    std::size_t acquisitions = 1000;
    std::uint64_t seed = 1;
    TrainingSettings training;
    std::vector<double> fixed_currents_ma; ///< skips training when set (fiber_plus_nn only)

    /// Link actually simulated: btb zeroes the length, only fiber_plus_nn keeps the device.
    link::LinkConfig effective_link() const;
    void validate() const;
    /// Canonical JSON text of everything that influences the results.
    std::string canonical() const;
    /// 16 hex digits; names the output directory.
    std::string hash() const;
};

struct BerScanResult {
    Scenario scenario;
    std::string hash;
    std::string provenance;
    std::vector<link::BerPoint> points;
    std::optional<link::TrainedDevice> trained;
    std::vector<double> currents_ma;
    std::vector<double> phases_rad;
    double excess_loss_db = 0.0;
    double training_prx_dbm = 0.0;
    bool resumed = false;
};

struct RunOptions {
    std::filesystem::path out_dir = "runs";
    bool resume = false;
    int jobs = 1;
    bool write_files = true;
};

/// PRX grid start:stop:step, both ends included when they fall on the grid.
std::vector<double> prx_grid(double start, double stop, double step);

/// Trains if needed, then sweeps PRX. With write_files, results go to out_dir/<hash>/
/// (ber_curve.csv, metadata.json, training_log.jsonl, progress.jsonl); resume continues
/// from the last completed PRX cell of a previous partial run.
BerScanResult run_scenario(const Scenario& scenario, const RunOptions& options);

/// Trains the device of a fiber_plus_nn scenario at its SNR operating point.
link::TrainedDevice train_scenario(const Scenario& scenario, const link::LinkSimulator& sim, int jobs = 1);

/// Trains the scenario's device (forcing fiber_plus_nn) and stores training_log.jsonl and
/// training.json under out_dir/<hash>/, where a resumed scan picks them up.
link::TrainedDevice train_and_store(const Scenario& scenario, const RunOptions& options);

void write_ber_curve_csv(std::ostream& os, const std::vector<link::BerPoint>& points);

// Threshold crossings and gain.

enum class CrossingStatus { bracketed, extrapolated, not_crossed };
std::string to_string(CrossingStatus status);

struct Crossing {
    double prx_dbm = 0.0;
    CrossingStatus status = CrossingStatus::not_crossed;
    bool monotonic_warning = false;
};

/// PRX at which the curve falls through ber_threshold, linear in (PRX, log10 BER).
/// Outside the measured range the last two points are extrapolated by at most
/// max_extrapolation_db.
Crossing threshold_crossing(const std::vector<link::BerPoint>& curve, double ber_threshold,
                            double max_extrapolation_db = 3.0);

enum class GainStatus { ok, lower_bound, upper_bound, undefined };
std::string to_string(GainStatus status);

struct GainReport {
    double gain_db = 0.0;
    GainStatus status = GainStatus::undefined;
    Crossing with_nn;
    Crossing without_nn;
    double excess_loss_db = 0.0;
    bool warning = false;
};

/// Receiver-sensitivity improvement PRX(without) - PRX(with) - EL at ber_threshold.
/// When the unequalized curve never reaches the threshold the result is a lower bound
/// taken at the extrapolation limit.
GainReport gain_report(const std::vector<link::BerPoint>& with_nn, const std::vector<link::BerPoint>& without_nn,
                       double excess_loss_db, double ber_threshold = 2e-3, double max_extrapolation_db = 3.0);

struct GainRow {
    double length_km = 0.0;
    GainReport report;
    std::vector<double> currents_ma;
    std::vector<double> phases_rad;
    std::string hash_with;
    std::string hash_without;
};

/// Runs fiber_only and fiber_plus_nn scans of `base` at each length and reports the gain.
std::vector<GainRow> gain_study(const Scenario& base, const std::vector<double>& lengths_km,
                                const RunOptions& options, double ber_threshold = 2e-3);
void write_gain_csv(std::ostream& os, const std::vector<GainRow>& rows);

// Trained-phase trend.

struct PhaseTrend {
    std::vector<double> lengths_km;
    std::vector<std::vector<double>> unwrapped; ///< [length][channel 1..n-1], rad
    std::vector<double> mean_phase;             ///< per length, mean over tunable channels
    double slope_rad_per_km = 0.0;
    double final_distance_to_2pi = 0.0; ///< circular distance of the last mean phase to 2 pi
    bool non_decreasing = false;
    bool near_two_pi = false;
    bool flag = false;
};

/// Phases (all channels, wrapped) per length. Each tunable channel is unwrapped along
/// length starting from its value in [0, 2 pi); the trend holds when the least-squares
/// slope of the channel-mean phase is >= 0 and the last mean lies within pi/2 of 2 pi.
PhaseTrend phase_trend(const std::vector<double>& lengths_km, const std::vector<std::vector<double>>& phases_rad);
void write_phase_csv(std::ostream& os, const PhaseTrend& trend);

// 40 Gbps reach / SNR penalty.

struct Study40Settings {
    std::vector<double> lengths_km{0, 2, 4, 6, 8, 10, 12, 14, 16, 18, 20, 22, 24};
    std::vector<double> delays_ps{0.0, 12.5, 18.75}; ///< 0 = no device
    double snr_db = 12.0;
    std::vector<double> snr_grid_db{4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20, 21, 22};
    std::size_t acquisitions = 1000; ///< x 1024 bits per BER point
    double ber_threshold = 2.26e-4;
    std::uint64_t seed = 1;
    TrainingSettings training{.snr_db = 12.0, .space = link::WeightSpace::phases};
};

struct StudyRow {
    double delay_ps = 0.0;
    double length_km = 0.0;
    double ber_at_snr = 0.0;
    bool ber_floored = false;
    double required_snr_db = 0.0;
    CrossingStatus required_status = CrossingStatus::not_crossed;
    double penalty_db = 0.0;
    bool interpolable = false;
    bool untrainable = false; ///< trained loss did not improve on the zero-phase loss
    std::vector<double> phases_rad;
    double excess_loss_db = 0.0;
};

struct StudyReach {
    double delay_ps = 0.0;
    double reach_km = 0.0;
    bool lower_bound = false; ///< BER stayed below threshold up to the last interpolable length
    double max_penalty_db = 0.0;
};

struct Study40Result {
    double btb_required_snr_db = 0.0;
    std::vector<StudyRow> rows;
    std::vector<StudyReach> reach;
};

/// Sweeps length at fixed SNR for each device delay; each configuration stops after the
/// first length where the threshold is no longer interpolable (that row is kept, flagged).
Study40Result reach_and_penalty_study(const Study40Settings& settings, const RunOptions& options);
void write_study_csv(std::ostream& os, const Study40Result& result);

// Eye and histogram export.

struct EyeExport {
    std::vector<metrics::EyePoint> eye;
    metrics::Histogram histogram;
    metrics::UndersampledTrace trace; ///< concatenated over acquisitions
};

/// Aligned acquisitions of `output` at prx_dbm: overlaid eye of the first one and the level
/// histogram at sample_index over all of them.
EyeExport export_eye(const link::LinkSimulator& sim, const ComplexEnvelope& output, double prx_dbm,
                     int sample_index, std::size_t acquisitions, std::uint64_t seed, std::size_t bins = 50);

} // namespace optolink::experiment
