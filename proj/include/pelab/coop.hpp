#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pelab/approximator.hpp"
#include "pelab/errors.hpp"
#include "pelab/gridworld.hpp"
#include "pelab/metrics.hpp"
#include "pelab/rng.hpp"

namespace pelab {

/// Plain constant-rate stochastic gradient steps for the two parameter sets.
/// Momentum variants are deliberately absent so oracle comparisons stay exact.
struct SgdStep {
    double r_rate = 0.1;
    double x_rate = 0.1;
};

namespace coop_detail {

inline void check_pair_finite(const Eigen::VectorXd& r, const Eigen::VectorXd& x,
                              std::uint64_t step_index) {
    if (!r.allFinite() || !x.allFinite() || r.norm() > default_divergence_threshold ||
        x.norm() > default_divergence_threshold)
        throw DivergenceError("cooperative update diverged at step " + std::to_string(step_index),
                              step_index);
}

}  // namespace coop_detail

/**
 * One cooperative evaluation step (two parameter sets, any differentiable
 * approximator). The r-network descends the squared TD residual against the
 * frozen x-network's bootstrap value; the x-network then descends its squared
 * gap to the freshly updated r-network at the visited state:
 *
 *   r' = r + r_rate * (g + alpha J_x(j) - J_r(i)) * grad_r J_r(i)
 *   x' = x + x_rate * (J_{r'}(i) - J_x(i))        * grad_x J_x(i)
 *
 * The x-update uses r' (post-update), and moves x toward r'.
 */
template <ValueApproximator A>
std::pair<Eigen::VectorXd, Eigen::VectorXd> coop_eval_step(const A& approx,
                                                           const Eigen::VectorXd& r,
                                                           const Eigen::VectorXd& x,
                                                           const Transition& t, double alpha,
                                                           const SgdStep& step) {
    const double td = t.reward + alpha * approx.value(t.to_state, x) - approx.value(t.from_state, r);
    Eigen::VectorXd r_next = r + step.r_rate * td * approx.gradient(t.from_state, r);
    const double lag = approx.value(t.from_state, r_next) - approx.value(t.from_state, x);
    Eigen::VectorXd x_next = x + step.x_rate * lag * approx.gradient(t.from_state, x);
    coop_detail::check_pair_finite(r_next, x_next, t.step_index);
    return {std::move(r_next), std::move(x_next)};
}

/**
 * The Q-factor variant: r descends the squared residual against the
 * Bellman-optimality target built from the x-network (the max over next
 * actions is a function of x alone, so it is constant with respect to r),
 * then x descends its gap to the updated r at the visited pair.
 * terminal_next suppresses the bootstrap term.
 */
template <QApproximator Q>
std::pair<Eigen::VectorXd, Eigen::VectorXd> coop_q_step(const Q& qmodel, const Eigen::VectorXd& r,
                                                        const Eigen::VectorXd& x, int state,
                                                        int action, double reward, int next_state,
                                                        bool terminal_next, double alpha,
                                                        const SgdStep& step,
                                                        std::uint64_t step_index = 0) {
    double bootstrap = 0.0;
    if (!terminal_next) {
        bootstrap = qmodel.value(next_state, 0, x);
        for (int v = 1; v < qmodel.n_actions(); ++v)
            bootstrap = std::max(bootstrap, qmodel.value(next_state, v, x));
    }
    const double target = reward + alpha * bootstrap;
    const double residual = target - qmodel.value(state, action, r);
    Eigen::VectorXd r_next = r + step.r_rate * residual * qmodel.gradient(state, action, r);
    const double lag = qmodel.value(state, action, r_next) - qmodel.value(state, action, x);
    Eigen::VectorXd x_next = x + step.x_rate * lag * qmodel.gradient(state, action, x);
    coop_detail::check_pair_finite(r_next, x_next, step_index);
    return {std::move(r_next), std::move(x_next)};
}

/**
 * Epsilon-greedy with linearly decaying epsilon: with probability eps pick
 * uniformly among all actions, otherwise the argmax (ties broken toward the
 * lowest action index). The greedy action therefore has total probability
 * 1 - eps + eps/m.
 */
struct ExplorationPolicy {
    double eps_start = 1.0;
    double eps_end = 0.1;
    std::uint64_t decay_steps = 1;

    double epsilon_at(std::uint64_t t) const {
        if (t >= decay_steps) return eps_end;
        const double frac = static_cast<double>(t) / static_cast<double>(decay_steps);
        return eps_start + (eps_end - eps_start) * frac;
    }
};

template <QApproximator Q>
int greedy_action(const Q& qmodel, const Eigen::VectorXd& params, int state) {
    int best = 0;
    double best_value = qmodel.value(state, 0, params);
    for (int a = 1; a < qmodel.n_actions(); ++a) {
        const double v = qmodel.value(state, a, params);
        if (v > best_value) {
            best_value = v;
            best = a;
        }
    }
    return best;
}

/// Draw order is fixed: first the explore/exploit draw, then (only when
/// exploring) the uniform action draw. Deterministic given the rng state.
template <QApproximator Q>
int epsilon_greedy_action(const Q& qmodel, const Eigen::VectorXd& params, int state,
                          double epsilon, SplitMix64& rng) {
    detail::require(epsilon >= 0.0 && epsilon <= 1.0, "epsilon must lie in [0, 1]");
    if (epsilon > 0.0 && rng.uniform01() < epsilon)
        return static_cast<int>(rng.below(static_cast<std::uint64_t>(qmodel.n_actions())));
    return greedy_action(qmodel, params, state);
}

struct ControlConfig {
    int start_cell = 0;
    int max_episodes = 1000;
    int max_steps_per_episode = 200;
    std::uint64_t max_total_steps = 50000;
    SgdStep step{0.1, 0.1};
    ExplorationPolicy exploration{1.0, 0.1, 25000};
    std::uint64_t seed = 0;
};

struct EpisodeRecord {
    int episode = 0;
    double undiscounted_return = 0.0;
    int steps = 0;
    double epsilon = 0.0;
};

struct ControlLog {
    std::vector<EpisodeRecord> episodes;
    Eigen::VectorXd final_r;
    Eigen::VectorXd final_x;
    std::vector<int> greedy_policy;  // per cell; -1 at terminal cells
    std::uint64_t total_steps = 0;
};

/**
 * Cooperative Q-learning on a gridworld: episodes of epsilon-greedy acting
 * (greedy with respect to the r-network) with one cooperative Q-step per
 * transition. Epsilon decays over total environment steps. Deterministic
 * per seed.
 */
template <QApproximator Q>
ControlLog run_control(const GridWorld& world, const Q& qmodel, const ControlConfig& config) {
    detail::require(config.start_cell >= 0 && config.start_cell < world.n_cells(),
                    "run_control: start cell out of range");
    detail::require(!world.is_terminal(config.start_cell), "run_control: start cell is terminal");
    detail::require(config.max_episodes >= 1 && config.max_steps_per_episode >= 1,
                    "run_control: episode caps must be positive");

    SplitMix64 rng(config.seed);
    Eigen::VectorXd r = Eigen::VectorXd::Zero(qmodel.params_dim());
    Eigen::VectorXd x = Eigen::VectorXd::Zero(qmodel.params_dim());

    ControlLog log;
    std::uint64_t total_steps = 0;
    for (int episode = 0; episode < config.max_episodes; ++episode) {
        if (total_steps >= config.max_total_steps) break;
        int state = config.start_cell;
        double episode_return = 0.0;
        int episode_steps = 0;
        while (episode_steps < config.max_steps_per_episode &&
               total_steps < config.max_total_steps) {
            const double eps = config.exploration.epsilon_at(total_steps);
            const int action = epsilon_greedy_action(qmodel, r, state, eps, rng);
            const auto [next_state, reward] = world.apply(state, action);
            const bool terminal_next = world.is_terminal(next_state);
            std::tie(r, x) = coop_q_step(qmodel, r, x, state, action, reward, next_state,
                                         terminal_next, world.discount(), config.step, total_steps);
            episode_return += reward;
            ++episode_steps;
            ++total_steps;
            state = next_state;
            if (terminal_next) break;
        }
        log.episodes.push_back({episode, episode_return, episode_steps,
                                config.exploration.epsilon_at(total_steps)});
    }

    log.final_r = r;
    log.final_x = x;
    log.total_steps = total_steps;
    log.greedy_policy.assign(static_cast<std::size_t>(world.n_cells()), -1);
    for (int cell = 0; cell < world.n_cells(); ++cell)
        if (!world.is_terminal(cell)) log.greedy_policy[cell] = greedy_action(qmodel, r, cell);
    return log;
}

}  // namespace pelab
