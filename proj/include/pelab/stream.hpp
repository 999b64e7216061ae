#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "pelab/chain.hpp"
#include "pelab/metrics.hpp"
#include "pelab/rng.hpp"
#include "pelab/scenario.hpp"

namespace pelab {

/**
 * Stateful transition source, deterministic per seed.
 *
 * iid_weighted: each step draws the source state from the chain's weighting
 * and the successor from the transition row; zero-weight states are never
 * drawn as sources. trajectory: follows the transition matrix from a restart
 * draw, restarting once an absorbing self-loop (P(i,i) = 1) has been taken
 * or the episode cap is reached; the first transition of each episode
 * carries episode_start.
 */
class TransitionSampler {
public:
    TransitionSampler(const MarkovRewardProcess& mrp, SamplingRegime regime,
                      Eigen::VectorXd restart, std::uint64_t episode_cap, std::uint64_t seed)
        : mrp_(mrp),
          regime_(regime),
          restart_(std::move(restart)),
          episode_cap_(episode_cap),
          rng_(seed) {
        detail::require(episode_cap_ >= 1, "episode cap must be at least 1");
        detail::require(restart_.size() == mrp_.n_states(),
                        "restart distribution length mismatch");
        if (regime_ == SamplingRegime::trajectory) {
            state_ = draw_from(restart_);
            fresh_episode_ = true;
        }
    }

    TransitionSampler(const ChainScenario& scenario, std::uint64_t seed)
        : TransitionSampler(scenario.mrp, scenario.sampling, scenario.restart,
                            scenario.episode_cap, seed) {}

    Transition next() {
        Transition t;
        t.step_index = step_;
        if (regime_ == SamplingRegime::iid_weighted) {
            t.from_state = draw_from(mrp_.weighting());
            t.to_state = draw_row(t.from_state);
        } else {
            t.from_state = state_;
            t.to_state = draw_row(state_);
            t.episode_start = fresh_episode_;
            fresh_episode_ = false;
            ++episode_steps_;
            const bool absorbed = t.to_state == t.from_state &&
                                  mrp_.transition()(t.from_state, t.from_state) == 1.0;
            if (absorbed || episode_steps_ >= episode_cap_) {
                state_ = draw_from(restart_);
                fresh_episode_ = true;
                episode_steps_ = 0;
            } else {
                state_ = t.to_state;
            }
        }
        t.reward = mrp_.reward()(t.from_state, t.to_state);
        ++step_;
        return t;
    }

private:
    int draw_from(const Eigen::VectorXd& weights) {
        return static_cast<int>(
            rng_.categorical({weights.data(), static_cast<std::size_t>(weights.size())}));
    }

    int draw_row(int state) {
        const Eigen::VectorXd row = mrp_.transition().row(state);
        return static_cast<int>(
            rng_.categorical({row.data(), static_cast<std::size_t>(row.size())}));
    }

    MarkovRewardProcess mrp_;
    SamplingRegime regime_;
    Eigen::VectorXd restart_;
    std::uint64_t episode_cap_;
    SplitMix64 rng_;
    std::uint64_t step_ = 0;
    int state_ = 0;
    bool fresh_episode_ = false;
    std::uint64_t episode_steps_ = 0;
};

inline std::vector<Transition> iid_transition_stream(const MarkovRewardProcess& mrp,
                                                     std::uint64_t seed, std::uint64_t n) {
    detail::require(n >= 1, "transition stream length must be at least 1");
    TransitionSampler sampler(mrp, SamplingRegime::iid_weighted, mrp.weighting(), 1, seed);
    std::vector<Transition> stream;
    stream.reserve(n);
    for (std::uint64_t t = 0; t < n; ++t) stream.push_back(sampler.next());
    return stream;
}

inline std::vector<Transition> trajectory_transition_stream(const MarkovRewardProcess& mrp,
                                                            const Eigen::VectorXd& restart,
                                                            std::uint64_t episode_cap,
                                                            std::uint64_t seed, std::uint64_t n) {
    detail::require(n >= 1, "transition stream length must be at least 1");
    TransitionSampler sampler(mrp, SamplingRegime::trajectory, restart, episode_cap, seed);
    std::vector<Transition> stream;
    stream.reserve(n);
    for (std::uint64_t t = 0; t < n; ++t) stream.push_back(sampler.next());
    return stream;
}

}  // namespace pelab
