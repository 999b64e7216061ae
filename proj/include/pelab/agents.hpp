#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pelab/chain.hpp"
#include "pelab/errors.hpp"
#include "pelab/metrics.hpp"
#include "pelab/schedule.hpp"

namespace pelab {

enum class Algorithm { td0, td_lambda, residual_gradient, gtd2, alternating_cd };

inline std::string algorithm_name(Algorithm a) {
    switch (a) {
        case Algorithm::td0: return "td0";
        case Algorithm::td_lambda: return "td_lambda";
        case Algorithm::residual_gradient: return "residual";
        case Algorithm::gtd2: return "gtd2";
        case Algorithm::alternating_cd: return "alternating_cd";
    }
    return "unknown";
}

/**
 * Learnable state of one online evaluator. primary is theta (or r for the
 * alternating scheme); auxiliary is the second vector where the algorithm
 * has one: the eligibility trace z for TD(lambda), w for GTD2, x for the
 * alternating scheme. Zero-length substitutes are stored as zero vectors so
 * the metrics schema stays uniform.
 */
struct EvaluatorState {
    Algorithm algorithm = Algorithm::td0;
    Eigen::VectorXd primary;
    Eigen::VectorXd auxiliary;
    std::uint64_t step_count = 0;
    double last_td_error = 0.0;
};

/**
 * Shared stepper for the linear online evaluators. The object holds the
 * immutable run configuration (features, discount, rates); step() maps a
 * state and a transition to the successor state, so states are plain values
 * and identical streams reproduce identical parameter sequences.
 *
 * Update rules, with d = g + alpha phi(j)^T theta' - phi(i)^T theta
 * (theta' = x for the alternating scheme, theta otherwise):
 *   td0:            theta += rate * d * phi(i)
 *   td_lambda:      z = (alpha lambda) z + phi(i);  theta += rate * d * z
 *   residual:       theta += rate * d * (phi(i) - alpha phi(j))
 *                   (descent on the sampled squared Bellman error)
 *   gtd2:           w += aux_rate * (d - phi(i)^T w) phi(i)
 *                   theta += rate * (phi(i) - alpha phi(j)) (phi(i)^T w)
 *                   (both sides evaluated at the pre-update pair)
 *   alternating_cd: r += rate * d * phi(i), then
 *                   x += aux_rate * (phi(i)^T r_new - phi(i)^T x) phi(i)
 *                   (x chases the already-updated r; the order is normative)
 */
class LinearEvaluator {
public:
    LinearEvaluator(Algorithm algorithm, FeatureMap phi, double discount,
                    StepSizeSchedule rate, StepSizeSchedule aux_rate, double lambda = 0.0,
                    double divergence_threshold = default_divergence_threshold,
                    bool reset_trace_on_restart = true)
        : algorithm_(algorithm),
          phi_(std::move(phi)),
          discount_(discount),
          rate_(rate),
          aux_rate_(aux_rate),
          lambda_(lambda),
          divergence_threshold_(divergence_threshold),
          reset_trace_on_restart_(reset_trace_on_restart) {
        detail::require(discount_ > 0.0 && discount_ <= 1.0, "discount must lie in (0, 1]");
        detail::require(lambda_ >= 0.0 && lambda_ < 1.0, "lambda must lie in [0, 1)");
        detail::require(divergence_threshold_ > 0.0, "divergence threshold must be positive");
    }

    LinearEvaluator(Algorithm algorithm, FeatureMap phi, double discount, StepSizeSchedule rate)
        : LinearEvaluator(algorithm, std::move(phi), discount, rate, rate) {}

    Algorithm algorithm() const { return algorithm_; }
    const FeatureMap& features() const { return phi_; }
    double discount() const { return discount_; }
    double lambda() const { return lambda_; }

    /// Initial state. The auxiliary vector seeds x for the alternating
    /// scheme and w for GTD2; the TD(lambda) trace always starts at zero.
    EvaluatorState make_state(const Eigen::VectorXd& primary0,
                              const Eigen::VectorXd& auxiliary0) const {
        const auto k = phi_.n_features();
        detail::require(primary0.size() == k, "initial primary parameter length mismatch");
        detail::require(auxiliary0.size() == k, "initial auxiliary parameter length mismatch");
        EvaluatorState s;
        s.algorithm = algorithm_;
        s.primary = primary0;
        s.auxiliary =
            algorithm_ == Algorithm::td_lambda ? Eigen::VectorXd::Zero(k).eval() : auxiliary0;
        return s;
    }

    EvaluatorState make_state(const Eigen::VectorXd& primary0) const {
        return make_state(primary0, Eigen::VectorXd::Zero(phi_.n_features()));
    }

    EvaluatorState step(const EvaluatorState& state, const Transition& t) const {
        detail::require(state.algorithm == algorithm_, "state belongs to a different algorithm");
        detail::require(t.from_state >= 0 && t.from_state < phi_.n_states() &&
                            t.to_state >= 0 && t.to_state < phi_.n_states(),
                        "transition state index out of range");
        detail::require(std::isfinite(t.reward), "transition reward must be finite");

        const Eigen::VectorXd phi_i = phi_.row(t.from_state);
        const Eigen::VectorXd phi_j = phi_.row(t.to_state);
        const double rate = rate_.at(state.step_count);
        const double aux_rate = aux_rate_.at(state.step_count);

        EvaluatorState next = state;
        next.step_count = state.step_count + 1;

        switch (algorithm_) {
            case Algorithm::td0: {
                const double d = td_error(t.reward, phi_i, phi_j, state.primary, state.primary);
                next.primary = state.primary + rate * d * phi_i;
                next.last_td_error = d;
                break;
            }
            case Algorithm::td_lambda: {
                Eigen::VectorXd trace = state.auxiliary;
                if (t.episode_start && reset_trace_on_restart_) trace.setZero();
                trace = (discount_ * lambda_) * trace + phi_i;
                const double d = td_error(t.reward, phi_i, phi_j, state.primary, state.primary);
                next.primary = state.primary + rate * d * trace;
                next.auxiliary = trace;
                next.last_td_error = d;
                break;
            }
            case Algorithm::residual_gradient: {
                const double d = td_error(t.reward, phi_i, phi_j, state.primary, state.primary);
                next.primary = state.primary + rate * d * (phi_i - discount_ * phi_j);
                next.last_td_error = d;
                break;
            }
            case Algorithm::gtd2: {
                const double d = td_error(t.reward, phi_i, phi_j, state.primary, state.primary);
                const double correction = phi_i.dot(state.auxiliary);
                next.auxiliary = state.auxiliary + aux_rate * (d - correction) * phi_i;
                next.primary = state.primary + rate * correction * (phi_i - discount_ * phi_j);
                next.last_td_error = d;
                break;
            }
            case Algorithm::alternating_cd: {
                const double d = td_error(t.reward, phi_i, phi_j, state.primary, state.auxiliary);
                next.primary = state.primary + rate * d * phi_i;
                const double lag = phi_i.dot(next.primary) - phi_i.dot(state.auxiliary);
                next.auxiliary = state.auxiliary + aux_rate * lag * phi_i;
                next.last_td_error = d;
                break;
            }
        }

        check_finite(next, t.step_index);
        return next;
    }

private:
    double td_error(double reward, const Eigen::VectorXd& phi_i, const Eigen::VectorXd& phi_j,
                    const Eigen::VectorXd& primary, const Eigen::VectorXd& target) const {
        return reward + discount_ * phi_j.dot(target) - phi_i.dot(primary);
    }

    void check_finite(const EvaluatorState& s, std::uint64_t step_index) const {
        const bool finite = s.primary.allFinite() && s.auxiliary.allFinite();
        if (!finite || s.primary.norm() > divergence_threshold_ ||
            s.auxiliary.norm() > divergence_threshold_) {
            throw DivergenceError(algorithm_name(algorithm_) +
                                      " diverged at step " + std::to_string(step_index),
                                  step_index);
        }
    }

    Algorithm algorithm_;
    FeatureMap phi_;
    double discount_;
    StepSizeSchedule rate_;
    StepSizeSchedule aux_rate_;
    double lambda_;
    double divergence_threshold_;
    bool reset_trace_on_restart_;
};

/**
 * Drives a stepper over a transition stream and records the exact error
 * functionals after every probe_every-th step (the final step is always
 * probed). Probing reads the state without perturbing it, so probe density
 * cannot change the parameter trajectory.
 */
inline std::vector<MetricsRecord> mspbe_trajectory(const LinearEvaluator& evaluator,
                                                   const EvaluatorState& initial,
                                                   std::span<const Transition> stream,
                                                   const MarkovRewardProcess& mrp,
                                                   std::uint64_t probe_every) {
    detail::require(probe_every >= 1, "probe_every must be at least 1");
    std::vector<MetricsRecord> records;
    EvaluatorState state = initial;
    for (std::size_t n = 0; n < stream.size(); ++n) {
        state = evaluator.step(state, stream[n]);
        const std::uint64_t step = n + 1;
        if (step % probe_every == 0 || step == stream.size()) {
            MetricsRecord rec;
            rec.step_index = step;
            rec.primary = state.primary;
            rec.auxiliary = state.auxiliary;
            rec.msbe = msbe(mrp, evaluator.features(), state.primary);
            rec.mspbe = mspbe(mrp, evaluator.features(), state.primary);
            rec.td_error = state.last_td_error;
            records.push_back(std::move(rec));
        }
    }
    return records;
}

/**
 * Coordinate-descent TD(0): repeatedly fit r to the Bellman image of the
 * frozen x-network, then pull x onto the fitted r. Each inner loop iterates
 * the exact expected update over the chain's transition distribution
 * (the mean-field form of the online rule) until the parameter change drops
 * below inner_delta, so the outer iterates reproduce exact projected value
 * iteration: Phi r_{k+1} = Pi T(Phi x_k).
 */
struct CoordinateDescentOptions {
    double inner_delta = 1e-8;
    int inner_cap = 10000;
    double r_rate = 0.5;
    double x_rate = 0.5;
    int outer_iterations = 20;
};

struct CoordinateDescentResult {
    /// outer_r[k] is r after k outer iterations (outer_r[0] = r0); likewise x.
    std::vector<Eigen::VectorXd> outer_r;
    std::vector<Eigen::VectorXd> outer_x;
    int inner_cap_hits = 0;
};

inline CoordinateDescentResult coordinate_descent_td0(const MarkovRewardProcess& mrp,
                                                      const FeatureMap& phi,
                                                      const Eigen::VectorXd& r0,
                                                      const Eigen::VectorXd& x0,
                                                      const CoordinateDescentOptions& opt) {
    detail::require(opt.inner_delta > 0.0, "inner_delta must be positive");
    detail::require(opt.inner_cap >= 1, "inner_cap must be at least 1");
    detail::require(opt.r_rate > 0.0 && opt.x_rate > 0.0, "rates must be positive");
    detail::require(r0.size() == phi.n_features() && x0.size() == phi.n_features(),
                    "coordinate_descent_td0: parameter length mismatch");

    const Eigen::MatrixXd d = mrp.weighting().asDiagonal();
    const Eigen::MatrixXd gram = phi.matrix().transpose() * d * phi.matrix();
    const Eigen::MatrixXd cross =
        mrp.discount() * phi.matrix().transpose() * d * mrp.transition() * phi.matrix();
    const Eigen::VectorXd b = phi.matrix().transpose() * d * mrp.expected_reward();

    CoordinateDescentResult result;
    result.outer_r.push_back(r0);
    result.outer_x.push_back(x0);
    Eigen::VectorXd r = r0;
    Eigen::VectorXd x = x0;
    for (int k = 0; k < opt.outer_iterations; ++k) {
        // r-loop: expected update r += beta (b + C x - M r), x frozen.
        bool converged = false;
        for (int n = 0; n < opt.inner_cap; ++n) {
            const Eigen::VectorXd delta = opt.r_rate * (b + cross * x - gram * r);
            r += delta;
            if (delta.cwiseAbs().maxCoeff() < opt.inner_delta) {
                converged = true;
                break;
            }
        }
        if (!converged) ++result.inner_cap_hits;
        // x-loop: expected update x += gamma M (r - x), r frozen.
        converged = false;
        for (int n = 0; n < opt.inner_cap; ++n) {
            const Eigen::VectorXd delta = opt.x_rate * (gram * (r - x));
            x += delta;
            if (delta.cwiseAbs().maxCoeff() < opt.inner_delta) {
                converged = true;
                break;
            }
        }
        if (!converged) ++result.inner_cap_hits;
        result.outer_r.push_back(r);
        result.outer_x.push_back(x);
    }
    return result;
}

}  // namespace pelab
