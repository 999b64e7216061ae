#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace pelab {

/**
 * One sampled transition (i, g, j), the unit of online learning.
 * episode_start marks the first transition after a (re)start in the
 * trajectory sampling regime; eligibility traces reset on it.
 */
struct Transition {
    int from_state = 0;
    int to_state = 0;
    double reward = 0.0;
    std::uint64_t step_index = 0;
    bool episode_start = false;
};

/**
 * One probe row: the learner's parameters at a step together with the exact
 * error functionals evaluated at them. wall_us is the wall-clock offset from
 * run start; it is recorded only when timing is explicitly enabled, since
 * serialized artifacts are otherwise byte-reproducible.
 */
struct MetricsRecord {
    std::uint64_t step_index = 0;
    Eigen::VectorXd primary;
    Eigen::VectorXd auxiliary;
    double msbe = 0.0;
    double mspbe = 0.0;
    double td_error = 0.0;
    std::int64_t wall_us = 0;
};

}  // namespace pelab
