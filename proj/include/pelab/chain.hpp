#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pelab/errors.hpp"

namespace pelab {

using ValueVector = Eigen::VectorXd;

inline constexpr double default_condition_bound = 1e12;

namespace detail {

inline void require(bool ok, const std::string& message) {
    if (!ok) throw ContractViolation(message);
}

/// Condition number of a symmetric PSD matrix from its eigenvalue spread.
/// Returns +inf when the smallest eigenvalue is not strictly positive.
inline double spd_condition(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (lo <= 0.0 || hi <= 0.0) return std::numeric_limits<double>::infinity();
    return hi / lo;
}

}  // namespace detail

/**
 * Finite Markov reward process: row-stochastic transition matrix P,
 * per-transition rewards g(i,j), discount factor, and the state weighting
 * used for the D-norm. All exact operators below consume this model.
 *
 * The weighting is an explicit input, never derived from P; the objectives
 * here are defined with respect to whatever distribution the caller chose.
 */
class MarkovRewardProcess {
public:
    MarkovRewardProcess(Eigen::MatrixXd transition, Eigen::MatrixXd reward,
                        double discount, Eigen::VectorXd weighting)
        : transition_(std::move(transition)),
          reward_(std::move(reward)),
          weighting_(std::move(weighting)),
          discount_(discount) {
        const auto n = transition_.rows();
        detail::require(n >= 1, "MarkovRewardProcess: needs at least one state");
        detail::require(transition_.cols() == n, "transition matrix must be square");
        detail::require(reward_.rows() == n && reward_.cols() == n,
                        "reward matrix shape must match transition matrix");
        detail::require(weighting_.size() == n, "weighting length must equal state count");
        detail::require(discount_ > 0.0 && discount_ <= 1.0, "discount must lie in (0, 1]");
        for (Eigen::Index i = 0; i < n; ++i) {
            double row_sum = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                const double p = transition_(i, j);
                detail::require(p >= 0.0 && p <= 1.0, "transition entries must lie in [0, 1]");
                row_sum += p;
            }
            detail::require(std::abs(row_sum - 1.0) <= 1e-12,
                            "transition row " + std::to_string(i) + " must sum to 1");
        }
        double weight_sum = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            detail::require(weighting_[i] >= 0.0, "weighting entries must be nonnegative");
            weight_sum += weighting_[i];
        }
        detail::require(std::abs(weight_sum - 1.0) <= 1e-12, "weighting must sum to 1");
    }

    Eigen::Index n_states() const { return transition_.rows(); }
    const Eigen::MatrixXd& transition() const { return transition_; }
    const Eigen::MatrixXd& reward() const { return reward_; }
    const Eigen::VectorXd& weighting() const { return weighting_; }
    double discount() const { return discount_; }

    /// Expected immediate reward per state: g_bar(i) = sum_j P(i,j) g(i,j).
    ValueVector expected_reward() const {
        return (transition_.cwiseProduct(reward_)).rowwise().sum();
    }

private:
    Eigen::MatrixXd transition_;
    Eigen::MatrixXd reward_;
    Eigen::VectorXd weighting_;
    double discount_;
};

/**
 * The diagonal weighting matrix D = diag(pi). Kept as the diagonal vector;
 * trace is 1 by construction of the weighting.
 */
class WeightedNorm {
public:
    explicit WeightedNorm(Eigen::VectorXd weighting) : diag_(std::move(weighting)) {
        double sum = 0.0;
        for (Eigen::Index i = 0; i < diag_.size(); ++i) {
            detail::require(diag_[i] >= 0.0, "WeightedNorm: diagonal must be nonnegative");
            sum += diag_[i];
        }
        detail::require(std::abs(sum - 1.0) <= 1e-12, "WeightedNorm: trace must be 1");
    }

    const Eigen::VectorXd& diagonal() const { return diag_; }
    Eigen::Index size() const { return diag_.size(); }

    /// ||v||_D^2 = sum_i pi(i) v(i)^2.
    double squared_norm(const ValueVector& v) const {
        detail::require(v.size() == diag_.size(), "WeightedNorm: dimension mismatch");
        return v.cwiseProduct(v).dot(diag_);
    }

private:
    Eigen::VectorXd diag_;
};

/**
 * The n_states x k design matrix. Each row is the feature vector of one
 * state. Columns must all be used somewhere (no all-zero column); the
 * D-weighted Gram matrix is validated where a weighting is available.
 */
class FeatureMap {
public:
    explicit FeatureMap(Eigen::MatrixXd features) : phi_(std::move(features)) {
        detail::require(phi_.rows() >= 1 && phi_.cols() >= 1, "FeatureMap: empty matrix");
        detail::require(phi_.cols() <= phi_.rows(),
                        "FeatureMap: more features than states (k must be <= n)");
        detail::require(phi_.allFinite(), "FeatureMap: entries must be finite");
        for (Eigen::Index c = 0; c < phi_.cols(); ++c) {
            detail::require(phi_.col(c).cwiseAbs().maxCoeff() > 0.0,
                            "FeatureMap: column " + std::to_string(c) + " is all zero");
        }
    }

    const Eigen::MatrixXd& matrix() const { return phi_; }
    Eigen::Index n_states() const { return phi_.rows(); }
    Eigen::Index n_features() const { return phi_.cols(); }

    /// Feature row of one state as a column vector.
    Eigen::VectorXd row(Eigen::Index state) const {
        detail::require(state >= 0 && state < phi_.rows(), "FeatureMap: state index out of range");
        return phi_.row(state).transpose();
    }

private:
    Eigen::MatrixXd phi_;
};

/// Phi^T D Phi, the D-weighted feature Gram matrix.
inline Eigen::MatrixXd gram_matrix(const FeatureMap& phi, const WeightedNorm& d) {
    detail::require(phi.n_states() == d.size(), "gram_matrix: dimension mismatch");
    return phi.matrix().transpose() * d.diagonal().asDiagonal() * phi.matrix();
}

/// Throws DegenerateFeatures if the D-weighted Gram matrix is singular or
/// has condition number above the bound.
inline void check_gram_condition(const FeatureMap& phi, const WeightedNorm& d,
                                 double bound = default_condition_bound) {
    const double cond = detail::spd_condition(gram_matrix(phi, d));
    if (!(cond < bound)) {
        std::ostringstream msg;
        msg << "degenerate features under weighting: Gram condition number " << cond
            << " exceeds bound " << bound;
        throw DegenerateFeatures(msg.str(), cond);
    }
}

/**
 * One application of the Bellman operator:
 *   (TJ)(i) = sum_j P(i,j) (g(i,j) + alpha J(j)) = g_bar(i) + alpha (PJ)(i).
 */
inline ValueVector bellman_apply(const MarkovRewardProcess& mrp, const ValueVector& j) {
    detail::require(j.size() == mrp.n_states(), "bellman_apply: value vector length mismatch");
    return mrp.expected_reward() + mrp.discount() * (mrp.transition() * j);
}

/**
 * The lambda-weighted Bellman operator T^lambda J, computed in closed form
 * as (I - lambda*alpha*P)^{-1} (g_bar + alpha (1-lambda) P J). At lambda = 0
 * this dispatches to bellman_apply, so the two agree bit for bit.
 */
inline ValueVector lambda_bellman_apply(const MarkovRewardProcess& mrp, const ValueVector& j,
                                        double lambda) {
    detail::require(lambda >= 0.0 && lambda < 1.0, "lambda must lie in [0, 1)");
    detail::require(j.size() == mrp.n_states(),
                    "lambda_bellman_apply: value vector length mismatch");
    if (lambda == 0.0) return bellman_apply(mrp, j);
    const auto n = mrp.n_states();
    const Eigen::MatrixXd system =
        Eigen::MatrixXd::Identity(n, n) - lambda * mrp.discount() * mrp.transition();
    const ValueVector rhs =
        mrp.expected_reward() + mrp.discount() * (1.0 - lambda) * (mrp.transition() * j);
    return system.partialPivLu().solve(rhs);
}

/**
 * The D-weighted orthogonal projection onto the feature span:
 *   Pi = Phi (Phi^T D Phi)^{-1} Phi^T D.
 * Pi is idempotent and D-self-adjoint (D Pi symmetric).
 */
inline Eigen::MatrixXd projection_matrix(const FeatureMap& phi, const WeightedNorm& d,
                                         double condition_bound = default_condition_bound) {
    check_gram_condition(phi, d, condition_bound);
    const Eigen::MatrixXd gram = gram_matrix(phi, d);
    const Eigen::MatrixXd phi_t_d =
        phi.matrix().transpose() * d.diagonal().asDiagonal().toDenseMatrix();
    return phi.matrix() * gram.ldlt().solve(phi_t_d);
}

/// Mean squared Bellman error ||T(Phi theta) - Phi theta||_D^2.
inline double msbe(const MarkovRewardProcess& mrp, const FeatureMap& phi,
                   const Eigen::VectorXd& theta) {
    detail::require(phi.n_states() == mrp.n_states(), "msbe: feature/state count mismatch");
    detail::require(theta.size() == phi.n_features(), "msbe: parameter length mismatch");
    const ValueVector value = phi.matrix() * theta;
    const ValueVector residual = bellman_apply(mrp, value) - value;
    return WeightedNorm(mrp.weighting()).squared_norm(residual);
}

/// Analytic gradient of msbe with respect to theta:
///   d/dtheta ||T(Phi theta) - Phi theta||_D^2 = 2 (alpha P Phi - Phi)^T D delta.
inline Eigen::VectorXd msbe_gradient(const MarkovRewardProcess& mrp, const FeatureMap& phi,
                                     const Eigen::VectorXd& theta) {
    detail::require(theta.size() == phi.n_features(), "msbe_gradient: parameter length mismatch");
    const ValueVector value = phi.matrix() * theta;
    const ValueVector residual = bellman_apply(mrp, value) - value;
    const Eigen::MatrixXd jacobian =
        mrp.discount() * mrp.transition() * phi.matrix() - phi.matrix();
    return 2.0 * jacobian.transpose() * mrp.weighting().asDiagonal() * residual;
}

/**
 * Mean squared projected Bellman error, evaluated through the Gram form
 *   (Phi^T D delta)^T (Phi^T D Phi)^{-1} (Phi^T D delta),  delta = T(Phi theta) - Phi theta.
 */
inline double mspbe(const MarkovRewardProcess& mrp, const FeatureMap& phi,
                    const Eigen::VectorXd& theta,
                    double condition_bound = default_condition_bound) {
    detail::require(phi.n_states() == mrp.n_states(), "mspbe: feature/state count mismatch");
    detail::require(theta.size() == phi.n_features(), "mspbe: parameter length mismatch");
    const WeightedNorm d(mrp.weighting());
    check_gram_condition(phi, d, condition_bound);
    const ValueVector value = phi.matrix() * theta;
    const ValueVector residual = bellman_apply(mrp, value) - value;
    const Eigen::VectorXd projected_residual =
        phi.matrix().transpose() * d.diagonal().asDiagonal() * residual;
    const Eigen::VectorXd solved = gram_matrix(phi, d).ldlt().solve(projected_residual);
    return projected_residual.dot(solved);
}

/// The same quantity computed the long way round, ||Pi T(Phi theta) - Phi theta||_D^2.
/// Kept as the second algebraic route; the two must agree to ~1e-10.
inline double mspbe_via_projection(const MarkovRewardProcess& mrp, const FeatureMap& phi,
                                   const Eigen::VectorXd& theta,
                                   double condition_bound = default_condition_bound) {
    const WeightedNorm d(mrp.weighting());
    const Eigen::MatrixXd pi = projection_matrix(phi, d, condition_bound);
    const ValueVector value = phi.matrix() * theta;
    const ValueVector residual = pi * bellman_apply(mrp, value) - value;
    return d.squared_norm(residual);
}

/**
 * The TD fixed point r* with Phi r* = Pi T(Phi r*), solved from
 *   A r* = b,  A = Phi^T D (Phi - alpha P Phi),  b = Phi^T D g_bar.
 * Throws when A is singular (no unique fixed point), reporting A.
 */
inline Eigen::VectorXd td_fixed_point(const MarkovRewardProcess& mrp, const FeatureMap& phi) {
    detail::require(phi.n_states() == mrp.n_states(),
                    "td_fixed_point: feature/state count mismatch");
    const Eigen::MatrixXd d = mrp.weighting().asDiagonal();
    const Eigen::MatrixXd a =
        phi.matrix().transpose() * d *
        (phi.matrix() - mrp.discount() * mrp.transition() * phi.matrix());
    const Eigen::VectorXd b = phi.matrix().transpose() * d * mrp.expected_reward();
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    lu.setThreshold(1e-12);
    if (!lu.isInvertible()) {
        std::ostringstream msg;
        msg << "no unique TD fixed point: A = Phi^T D (Phi - alpha P Phi) is singular; A =\n" << a;
        throw ContractViolation(msg.str());
    }
    return lu.solve(b);
}

/**
 * Exact projected value iteration: Phi r_{t+1} = Pi T(Phi r_t), each step a
 * D-weighted least-squares solve. Returns the sequence (r_0, r_1, ..., r_iterations).
 */
inline std::vector<Eigen::VectorXd> projected_value_iteration(const MarkovRewardProcess& mrp,
                                                              const FeatureMap& phi,
                                                              const Eigen::VectorXd& r0,
                                                              int iterations) {
    detail::require(r0.size() == phi.n_features(),
                    "projected_value_iteration: parameter length mismatch");
    detail::require(iterations >= 0, "projected_value_iteration: negative iteration count");
    const WeightedNorm d(mrp.weighting());
    check_gram_condition(phi, d);
    const Eigen::MatrixXd gram = gram_matrix(phi, d);
    const auto gram_solver = gram.ldlt();
    std::vector<Eigen::VectorXd> sequence;
    sequence.reserve(static_cast<std::size_t>(iterations) + 1);
    sequence.push_back(r0);
    for (int t = 0; t < iterations; ++t) {
        const ValueVector target = bellman_apply(mrp, phi.matrix() * sequence.back());
        sequence.push_back(
            gram_solver.solve(phi.matrix().transpose() * d.diagonal().asDiagonal() * target));
    }
    return sequence;
}

/**
 * The exact value J* = (I - alpha P)^{-1} g_bar. Requires alpha < 1; an
 * undiscounted value may be unbounded (a reward-carrying self-loop already
 * diverges), so alpha = 1 is rejected.
 */
inline ValueVector exact_value(const MarkovRewardProcess& mrp) {
    detail::require(mrp.discount() < 1.0,
                    "exact_value: undiscounted value may be unbounded (alpha = 1 rejected)");
    const auto n = mrp.n_states();
    const Eigen::MatrixXd system =
        Eigen::MatrixXd::Identity(n, n) - mrp.discount() * mrp.transition();
    return system.partialPivLu().solve(mrp.expected_reward());
}

}  // namespace pelab
