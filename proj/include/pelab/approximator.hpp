#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <concepts>

#include "pelab/chain.hpp"
#include "pelab/errors.hpp"
#include "pelab/rng.hpp"

namespace pelab {

/**
 * Behavioral contract of a differentiable state-value approximator:
 * value(state, params) and its parameter gradient, plus the parameter
 * dimension. The cooperative updates are written against this concept so a
 * test can plug in any hand-rolled nonlinear model.
 */
template <typename A>
concept ValueApproximator = requires(const A a, int state, const Eigen::VectorXd& params) {
    { a.value(state, params) } -> std::convertible_to<double>;
    { a.gradient(state, params) } -> std::convertible_to<Eigen::VectorXd>;
    { a.params_dim() } -> std::convertible_to<Eigen::Index>;
};

/// Same contract over (state, action) pairs.
template <typename Q>
concept QApproximator = requires(const Q q, int state, int action, const Eigen::VectorXd& params) {
    { q.value(state, action, params) } -> std::convertible_to<double>;
    { q.gradient(state, action, params) } -> std::convertible_to<Eigen::VectorXd>;
    { q.params_dim() } -> std::convertible_to<Eigen::Index>;
    { q.n_actions() } -> std::convertible_to<int>;
};

/// Linear architecture J(i, p) = phi(i)^T p. With this model the cooperative
/// evaluation step reduces to the alternating coordinate-descent stepper.
class LinearValueApproximator {
public:
    explicit LinearValueApproximator(FeatureMap phi) : phi_(std::move(phi)) {}

    double value(int state, const Eigen::VectorXd& params) const {
        return phi_.row(state).dot(params);
    }
    Eigen::VectorXd gradient(int state, const Eigen::VectorXd& params) const {
        (void)params;
        return phi_.row(state);
    }
    Eigen::Index params_dim() const { return phi_.n_features(); }

private:
    FeatureMap phi_;
};

/// Tabular Q-factors: one parameter per (state, action) pair.
class TabularQApproximator {
public:
    TabularQApproximator(int n_states, int n_actions)
        : n_states_(n_states), n_actions_(n_actions) {
        detail::require(n_states >= 1 && n_actions >= 1,
                        "TabularQApproximator: empty state or action set");
    }

    double value(int state, int action, const Eigen::VectorXd& params) const {
        return params[index(state, action)];
    }
    Eigen::VectorXd gradient(int state, int action, const Eigen::VectorXd& params) const {
        Eigen::VectorXd g = Eigen::VectorXd::Zero(params.size());
        g[index(state, action)] = 1.0;
        return g;
    }
    Eigen::Index params_dim() const {
        return static_cast<Eigen::Index>(n_states_) * n_actions_;
    }
    int n_actions() const { return n_actions_; }
    int n_states() const { return n_states_; }

private:
    Eigen::Index index(int state, int action) const {
        detail::require(state >= 0 && state < n_states_, "state index out of range");
        detail::require(action >= 0 && action < n_actions_, "action index out of range");
        return static_cast<Eigen::Index>(state) * n_actions_ + action;
    }

    int n_states_;
    int n_actions_;
};

/**
 * Finite-difference self-test for a value approximator: the analytic
 * gradient must match central differences within a relative tolerance on
 * random parameter/state probes. Throws ContractViolation on failure.
 */
template <ValueApproximator A>
void approximator_self_test(const A& approx, int n_states, SplitMix64& rng, int probes = 20,
                            double relative_tol = 1e-5) {
    const double h = 1e-6;
    for (int p = 0; p < probes; ++p) {
        const int state = static_cast<int>(rng.below(static_cast<std::uint64_t>(n_states)));
        Eigen::VectorXd params(approx.params_dim());
        for (Eigen::Index c = 0; c < params.size(); ++c) params[c] = rng.uniform(-2.0, 2.0);
        const Eigen::VectorXd analytic = approx.gradient(state, params);
        for (Eigen::Index c = 0; c < params.size(); ++c) {
            Eigen::VectorXd hi = params, lo = params;
            hi[c] += h;
            lo[c] -= h;
            const double numeric = (approx.value(state, hi) - approx.value(state, lo)) / (2.0 * h);
            const double scale = std::max({1.0, std::abs(numeric), std::abs(analytic[c])});
            if (std::abs(numeric - analytic[c]) > relative_tol * scale)
                throw ContractViolation("approximator self-test failed: gradient mismatch");
        }
    }
}

}  // namespace pelab
