#include <optolink/trainer.hpp>

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <ostream>
#include <thread>

namespace optolink::training {
namespace {

// Stream tags for derive_seed / make_rng.
enum : std::uint64_t { kInit = 1, kEvaluate = 2, kMove = 3, kRescore = 4, kGradient = 5, kStep = 6 };

void validate_box(std::span<const double> lower, std::span<const double> upper)
{
    if (lower.empty() || lower.size() != upper.size()) throw ParameterError("optimizer: bounds must be non-empty and matched");
    for (std::size_t d = 0; d < lower.size(); ++d) {
        if (!std::isfinite(lower[d]) || !std::isfinite(upper[d]) || !(upper[d] > lower[d])) {
            throw ParameterError("optimizer: bounds must be finite with upper > lower");
        }
    }
}

double evaluate(const Objective& objective, std::span<const double> x, std::uint64_t seed)
{
    double loss = 0.0;
    try {
        loss = objective(x, seed);
    } catch (const EvaluationError&) {
        throw;
    } catch (const std::exception& e) {
        throw EvaluationError(std::string("objective failed: ") + e.what(), {x.begin(), x.end()});
    }
    return loss;
}

} // namespace

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn)
{
    const auto workers = static_cast<std::size_t>(std::max(1, jobs));
    if (workers == 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::min(workers, n); ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

void SwarmConfig::validate() const
{
    if (n_particles < 2) throw ParameterError("pso: need at least 2 particles");
    if (n_iterations < 0) throw ParameterError("pso: negative iteration count");
    if (!(inertia > 0.0 && inertia < 1.0)) throw ParameterError("pso: inertia must be in (0, 1)");
    if (!(velocity_clamp > 0.0)) throw ParameterError("pso: velocity clamp must be positive");
    validate_box(lower, upper);
}

TrainingRecord train_pso(const Objective& objective, const SwarmConfig& config)
{
    config.validate();
    const std::size_t dims = config.lower.size();
    const auto n = static_cast<std::size_t>(config.n_particles);
    const auto seed = config.master_seed;

    std::vector<double> width(dims), vmax(dims);
    for (std::size_t d = 0; d < dims; ++d) {
        width[d] = config.upper[d] - config.lower[d];
        vmax[d] = config.velocity_clamp * width[d];
    }

    std::vector<std::vector<double>> pos(n, std::vector<double>(dims));
    std::vector<std::vector<double>> vel(n, std::vector<double>(dims));
    for (std::size_t p = 0; p < n; ++p) {
        auto rng = make_rng({seed, kInit, p});
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        for (std::size_t d = 0; d < dims; ++d) {
            pos[p][d] = config.lower[d] + unit(rng) * width[d];
            vel[p][d] = (2.0 * unit(rng) - 1.0) * vmax[d];
        }
    }

    std::vector<double> score(n);
    auto evaluate_swarm = [&](std::uint64_t iteration) {
        parallel_for(n, config.jobs, [&](std::size_t p) {
            score[p] = evaluate(objective, pos[p], derive_seed({seed, kEvaluate, iteration, p}));
        });
    };

    TrainingRecord rec;
    rec.optimizer = "pso";
    evaluate_swarm(0);
    rec.evaluations += n;

    auto pbest = pos;
    auto pbest_score = score;
    std::size_t g = static_cast<std::size_t>(std::min_element(score.begin(), score.end()) - score.begin());
    std::vector<double> gbest = pos[g];
    double gbest_score = score[g];
    std::size_t gbest_evals = 1;
    double best_so_far = gbest_score;
    std::vector<double> best_position = gbest;

    auto record_iteration = [&] {
        if (gbest_score < best_so_far) {
            best_so_far = gbest_score;
            best_position = gbest;
        }
        rec.best_loss.push_back(best_so_far);
        rec.incumbent_loss.push_back(gbest_score);
        rec.best_position_trace.push_back(best_position);
    };
    record_iteration();

    for (int it = 1; it <= config.n_iterations; ++it) {
        const auto iteration = static_cast<std::uint64_t>(it);
        for (std::size_t p = 0; p < n; ++p) {
            auto rng = make_rng({seed, kMove, iteration, p});
            std::uniform_real_distribution<double> unit(0.0, 1.0);
            for (std::size_t d = 0; d < dims; ++d) {
                const double r1 = unit(rng), r2 = unit(rng);
                double v = config.inertia * vel[p][d] + config.cognitive * r1 * (pbest[p][d] - pos[p][d]) +
                           config.social * r2 * (gbest[d] - pos[p][d]);
                v = std::clamp(v, -vmax[d], vmax[d]);
                double x = pos[p][d] + v;
                if (x < config.lower[d] || x > config.upper[d]) {
                    x = std::clamp(x, config.lower[d], config.upper[d]);
                    v = 0.0;
                }
                pos[p][d] = x;
                vel[p][d] = v;
            }
        }
        evaluate_swarm(iteration);
        rec.evaluations += n;

        if (config.rescore_incumbent) {
            const double again = evaluate(objective, gbest, derive_seed({seed, kRescore, iteration}));
            ++rec.evaluations;
            gbest_score = (gbest_score * static_cast<double>(gbest_evals) + again) /
                          static_cast<double>(gbest_evals + 1);
            ++gbest_evals;
        }
        for (std::size_t p = 0; p < n; ++p) {
            if (score[p] < pbest_score[p]) {
                pbest_score[p] = score[p];
                pbest[p] = pos[p];
            }
            if (score[p] < gbest_score) {
                gbest_score = score[p];
                gbest = pos[p];
                gbest_evals = 1;
            }
        }
        record_iteration();
    }
    rec.best_position = best_position;
    return rec;
}

void AdamConfig::validate() const
{
    validate_box(lower, upper);
    if (start.size() != lower.size()) throw ParameterError("adam: start has the wrong dimension");
    if (max_iterations < 1) throw ParameterError("adam: need at least one iteration");
    if (!(learning_rate > 0.0) || !(fd_step > 0.0)) throw ParameterError("adam: step sizes must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw ParameterError("adam: moment decays must be in [0, 1)");
    }
}

std::vector<double> central_difference_gradient(const Objective& objective, std::span<const double> x,
                                                double step, std::span<const double> lower,
                                                std::span<const double> upper, std::uint64_t seed,
                                                std::size_t* evaluations)
{
    std::vector<double> grad(x.size());
    std::vector<double> probe(x.begin(), x.end());
    for (std::size_t d = 0; d < x.size(); ++d) {
        const double hi = std::min(x[d] + step, upper[d]);
        const double lo = std::max(x[d] - step, lower[d]);
        probe[d] = hi;
        const double f_hi = evaluate(objective, probe, derive_seed({seed, d, 1}));
        probe[d] = lo;
        const double f_lo = evaluate(objective, probe, derive_seed({seed, d, 0}));
        probe[d] = x[d];
        grad[d] = hi > lo ? (f_hi - f_lo) / (hi - lo) : 0.0;
        if (evaluations != nullptr) *evaluations += 2;
    }
    return grad;
}

TrainingRecord train_adam(const Objective& objective, const AdamConfig& config)
{
    config.validate();
    const std::size_t dims = config.lower.size();
    const auto seed = config.master_seed;

    TrainingRecord rec;
    rec.optimizer = "adam";
    rec.experimental = true;

    std::vector<double> x(dims);
    for (std::size_t d = 0; d < dims; ++d) x[d] = std::clamp(config.start[d], config.lower[d], config.upper[d]);
    double loss = evaluate(objective, x, derive_seed({seed, kStep, 0}));
    ++rec.evaluations;

    double best = loss;
    std::vector<double> best_x = x;
    std::vector<double> m(dims, 0.0), v(dims, 0.0);
    double lr = config.learning_rate;
    int since_improvement = 0;
    int t = 0;

    rec.best_loss.push_back(best);
    rec.incumbent_loss.push_back(loss);
    rec.best_position_trace.push_back(best_x);

    for (int it = 1; it <= config.max_iterations; ++it) {
        const auto iteration = static_cast<std::uint64_t>(it);
        const auto grad = central_difference_gradient(objective, x, config.fd_step, config.lower, config.upper,
                                                      derive_seed({seed, kGradient, iteration}), &rec.evaluations);
        ++t;
        std::vector<double> candidate(dims);
        std::vector<double> m_next(dims), v_next(dims);
        for (std::size_t d = 0; d < dims; ++d) {
            m_next[d] = config.beta1 * m[d] + (1.0 - config.beta1) * grad[d];
            v_next[d] = config.beta2 * v[d] + (1.0 - config.beta2) * grad[d] * grad[d];
            const double m_hat = m_next[d] / (1.0 - std::pow(config.beta1, t));
            const double v_hat = v_next[d] / (1.0 - std::pow(config.beta2, t));
            candidate[d] = std::clamp(x[d] - lr * m_hat / (std::sqrt(v_hat) + config.epsilon),
                                      config.lower[d], config.upper[d]);
        }
        const double next = evaluate(objective, candidate, derive_seed({seed, kStep, iteration}));
        ++rec.evaluations;

        const bool divergent = !std::isfinite(next) || next > loss + config.divergence_factor * std::abs(loss);
        if (divergent) {
            lr *= 0.5;
            ++rec.step_halvings;
        } else {
            x = std::move(candidate);
            loss = next;
            m = std::move(m_next);
            v = std::move(v_next);
        }

        if (loss < best - config.plateau_tolerance * std::max(1.0, std::abs(best))) {
            since_improvement = 0;
        } else {
            ++since_improvement;
        }
        if (loss < best) {
            best = loss;
            best_x = x;
        }
        rec.best_loss.push_back(best);
        rec.incumbent_loss.push_back(loss);
        rec.best_position_trace.push_back(best_x);
        if (since_improvement >= config.plateau_patience) break;
    }
    rec.best_position = best_x;
    return rec;
}

void write_training_log(std::ostream& os, const TrainingRecord& record)
{
    for (std::size_t i = 0; i < record.best_loss.size(); ++i) {
        nlohmann::ordered_json line;
        line["iteration"] = i;
        line["best_loss"] = record.best_loss[i];
        line["best_currents"] = record.best_position_trace[i];
        os << line.dump() << '\n';
    }
}

} // namespace optolink::training
