#pragma once

#include <optolink/types.hpp>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace optolink::training {

/// Loss at a position. The seed selects the noise realization so evaluations stay
/// reproducible regardless of evaluation order or thread count.
using Objective = std::function<double(std::span<const double> position, std::uint64_t noise_seed)>;

/// Thrown when the objective fails; carries the offending position.
class EvaluationError : public std::runtime_error {
public:
    EvaluationError(const std::string& what, std::vector<double> position)
        : std::runtime_error(what), position_(std::move(position))
    {
    }
    const std::vector<double>& position() const noexcept { return position_; }

private:
    std::vector<double> position_;
};

struct SwarmConfig {
    int n_particles = 20;
    int n_iterations = 100;
    double inertia = 0.7;
    double cognitive = 1.5;
    double social = 1.5;
    double velocity_clamp = 0.2; ///< fraction of the box width per dimension
    std::vector<double> lower;
    std::vector<double> upper;
    std::uint64_t master_seed = 1;
    bool rescore_incumbent = true; ///< re-evaluate the global best every iteration
    int jobs = 1;

    void validate() const;
};

struct TrainingRecord {
    std::string optimizer;
    std::vector<double> best_loss;      ///< best-so-far loss after each iteration (non-increasing)
    std::vector<double> incumbent_loss; ///< current global-best score after each iteration
    std::vector<double> best_position;
    std::vector<std::vector<double>> best_position_trace;
    std::vector<double> final_phases_rad; ///< filled by callers that know the device model
    std::size_t evaluations = 0;
    int step_halvings = 0;     ///< Adam only
    bool experimental = false; ///< Adam: may stop early in a local minimum
};

/// Global-best particle swarm over a box. Positions are clamped to the box walls
/// (velocity component zeroed on contact). Deterministic given master_seed.
TrainingRecord train_pso(const Objective& objective, const SwarmConfig& config);

struct AdamConfig {
    int max_iterations = 200;
    double learning_rate = 0.5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double fd_step = 0.25;
    double plateau_tolerance = 1e-4;
    int plateau_patience = 15;
    double divergence_factor = 0.5; ///< a step is divergent if the loss grows by this fraction of |loss|
    std::vector<double> lower;
    std::vector<double> upper;
    std::vector<double> start;
    std::uint64_t master_seed = 1;

    void validate() const;
};

/// Central finite-difference gradient, clamped to the box at the walls.
std::vector<double> central_difference_gradient(const Objective& objective, std::span<const double> x,
                                                double step, std::span<const double> lower,
                                                std::span<const double> upper, std::uint64_t seed,
                                                std::size_t* evaluations = nullptr);

/// Adam-style moment-averaged descent with finite-difference gradients. Divergent steps
/// are undone and the learning rate halved. Flagged experimental.
TrainingRecord train_adam(const Objective& objective, const AdamConfig& config);

/// One JSON object per iteration: {"iteration", "best_loss", "best_currents"}.
void write_training_log(std::ostream& os, const TrainingRecord& record);

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Exceptions propagate (first one wins).
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

} // namespace optolink::training
