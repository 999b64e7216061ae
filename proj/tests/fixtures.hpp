// Shared test fixtures: the 3-state study chain, built by hand so library
// scenario builders can be checked against an independent construction.
#pragma once

#include <Eigen/Dense>

#include "pelab/chain.hpp"

namespace fixtures {

// A branches to B and C with probability 1/2 each; B and C are absorbing
// self-loops with reward 1; all other rewards 0. Weighting [0, 0.8, 0.2].
inline pelab::MarkovRewardProcess chain3(double alpha = 0.9) {
    Eigen::MatrixXd p(3, 3), g(3, 3);
    p << 0.0, 0.5, 0.5,
         0.0, 1.0, 0.0,
         0.0, 0.0, 1.0;
    g.setZero();
    g(1, 1) = 1.0;
    g(2, 2) = 1.0;
    Eigen::VectorXd pi(3);
    pi << 0.0, 0.8, 0.2;
    return pelab::MarkovRewardProcess(p, g, alpha, pi);
}

// Scalar features phi = (eps, -1, 1).
inline pelab::FeatureMap features3(double eps = 0.01) {
    Eigen::MatrixXd phi(3, 1);
    phi << eps, -1.0, 1.0;
    return pelab::FeatureMap(phi);
}

inline Eigen::VectorXd scalar(double v) {
    Eigen::VectorXd out(1);
    out << v;
    return out;
}

}  // namespace fixtures
