#pragma once

#include <Eigen/Dense>
#include <cstdio>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "pelab/chain.hpp"
#include "pelab/csv.hpp"
#include "pelab/errors.hpp"
#include "pelab/gridworld.hpp"
#include "pelab/kvfile.hpp"
#include "pelab/rng.hpp"

namespace pelab {

enum class SamplingRegime { iid_weighted, trajectory };

inline std::string sampling_name(SamplingRegime regime) {
    return regime == SamplingRegime::iid_weighted ? "iid_weighted" : "trajectory";
}

/// Scenario-level knobs every named scenario accepts; the study chain's
/// discount is not part of its definition, so it must always be explicit.
struct ScenarioOptions {
    double discount = 0.9;
    double epsilon_feature = 0.01;
    SamplingRegime sampling = SamplingRegime::iid_weighted;
    std::uint64_t episode_cap = 100;
};

struct ChainScenario {
    MarkovRewardProcess mrp;
    FeatureMap features;
    SamplingRegime sampling = SamplingRegime::iid_weighted;
    Eigen::VectorXd restart;  // trajectory restart distribution; defaults to the weighting
    std::uint64_t episode_cap = 100;
    double epsilon_feature = 0.01;
};

struct GridScenario {
    GridWorld world;
};

/**
 * A named, immutable experiment world: either a finite chain with features
 * or a gridworld for the control loop.
 */
class Scenario {
public:
    Scenario(std::string name, ChainScenario chain)
        : name_(std::move(name)), body_(std::move(chain)) {}
    Scenario(std::string name, GridScenario grid)
        : name_(std::move(name)), body_(std::move(grid)) {}

    const std::string& name() const { return name_; }
    bool is_chain() const { return std::holds_alternative<ChainScenario>(body_); }
    const ChainScenario& chain() const {
        if (!is_chain())
            throw ConfigError("scenario `" + name_ + "` is not a chain scenario", "scenario");
        return std::get<ChainScenario>(body_);
    }
    const GridScenario& grid() const {
        if (is_chain())
            throw ConfigError("scenario `" + name_ + "` is not a gridworld scenario", "scenario");
        return std::get<GridScenario>(body_);
    }

private:
    std::string name_;
    std::variant<ChainScenario, GridScenario> body_;
};

namespace scenario_detail {

inline bool parse_random_chain_name(const std::string& name, int& n, int& k,
                                    std::uint64_t& seed) {
    int consumed = 0;
    unsigned long long s = 0;
    if (std::sscanf(name.c_str(), "random-chain(%d,%d,%llu)%n", &n, &k, &s, &consumed) == 3 &&
        consumed == static_cast<int>(name.size())) {
        seed = s;
        return true;
    }
    return false;
}

inline MarkovRewardProcess random_chain_mrp(int n, double discount, SplitMix64& rng) {
    Eigen::MatrixXd p(n, n), g(n, n);
    for (int i = 0; i < n; ++i) {
        double row_sum = 0.0;
        for (int j = 0; j < n; ++j) {
            p(i, j) = 0.05 + rng.uniform01();
            row_sum += p(i, j);
        }
        int arg_max = 0;
        for (int j = 0; j < n; ++j) {
            p(i, j) /= row_sum;
            if (p(i, j) > p(i, arg_max)) arg_max = j;
        }
        double others = 0.0;
        for (int j = 0; j < n; ++j)
            if (j != arg_max) others += p(i, j);
        p(i, arg_max) = 1.0 - others;
        for (int j = 0; j < n; ++j) g(i, j) = rng.uniform(-1.0, 1.0);
    }
    Eigen::VectorXd pi(n);
    double pi_sum = 0.0;
    for (int i = 0; i < n; ++i) {
        pi[i] = 0.05 + rng.uniform01();
        pi_sum += pi[i];
    }
    int arg_max = 0;
    for (int i = 0; i < n; ++i) {
        pi[i] /= pi_sum;
        if (pi[i] > pi[arg_max]) arg_max = i;
    }
    double others = 0.0;
    for (int i = 0; i < n; ++i)
        if (i != arg_max) others += pi[i];
    pi[arg_max] = 1.0 - others;
    return MarkovRewardProcess(p, g, discount, pi);
}

inline FeatureMap random_chain_features(int n, int k, SplitMix64& rng,
                                        const Eigen::VectorXd& weighting) {
    // Retry until the D-weighted Gram matrix is comfortably conditioned;
    // draws come from the same generator, so the scenario stays a pure
    // function of its seed.
    while (true) {
        Eigen::MatrixXd phi(n, k);
        for (int i = 0; i < n; ++i)
            for (int c = 0; c < k; ++c) phi(i, c) = rng.uniform(-2.0, 2.0);
        bool zero_column = false;
        for (int c = 0; c < k; ++c)
            if (phi.col(c).cwiseAbs().maxCoeff() == 0.0) zero_column = true;
        if (zero_column) continue;
        const FeatureMap features(phi);
        const double cond =
            detail::spd_condition(gram_matrix(features, WeightedNorm(weighting)));
        if (cond < 1e6) return features;
    }
}

}  // namespace scenario_detail

/**
 * Built-in scenarios:
 *   paper-3state          the 3-state branching chain with reward-1 self
 *                         loops, weighting [0, 0.8, 0.2], scalar features
 *                         (eps, -1, 1)
 *   gridworld-4x4         4x4 gridworld, terminal at the far corner,
 *                         move reward -1, undiscounted
 *   random-chain(n,k,s)   a seeded random chain with k features
 */
inline Scenario builtin_scenario(const std::string& name, const ScenarioOptions& options = {}) {
    if (name == "paper-3state") {
        Eigen::MatrixXd p(3, 3), g(3, 3);
        p << 0.0, 0.5, 0.5,
             0.0, 1.0, 0.0,
             0.0, 0.0, 1.0;
        g.setZero();
        g(1, 1) = 1.0;
        g(2, 2) = 1.0;
        Eigen::VectorXd pi(3);
        pi << 0.0, 0.8, 0.2;
        Eigen::MatrixXd phi(3, 1);
        phi << options.epsilon_feature, -1.0, 1.0;
        ChainScenario chain{MarkovRewardProcess(p, g, options.discount, pi), FeatureMap(phi),
                            options.sampling, pi, options.episode_cap, options.epsilon_feature};
        return Scenario("paper-3state", std::move(chain));
    }
    if (name == "gridworld-4x4") {
        return Scenario("gridworld-4x4", GridScenario{GridWorld(4, 4, {15}, -1.0, 1.0)});
    }
    int n = 0, k = 0;
    std::uint64_t seed = 0;
    if (scenario_detail::parse_random_chain_name(name, n, k, seed)) {
        if (n < 1 || k < 1 || k > n)
            throw ConfigError("random-chain: need 1 <= k <= n, got n=" + std::to_string(n) +
                                  " k=" + std::to_string(k),
                              "scenario");
        SplitMix64 rng(seed);
        auto mrp = scenario_detail::random_chain_mrp(n, options.discount, rng);
        auto features = scenario_detail::random_chain_features(n, k, rng, mrp.weighting());
        Eigen::VectorXd restart = mrp.weighting();
        ChainScenario chain{std::move(mrp), std::move(features), options.sampling,
                            std::move(restart), options.episode_cap, options.epsilon_feature};
        return Scenario(name, std::move(chain));
    }
    throw ConfigError("unknown scenario name: `" + name + "`", "scenario");
}

/// Scenario file keys. Anything else in a scenario block is rejected.
inline bool is_scenario_key(const std::string& key) {
    if (key == "states" || key == "weighting" || key == "discount" || key == "sampling" ||
        key == "epsilon_feature" || key == "episode_cap")
        return true;
    return key.rfind("transition.", 0) == 0 || key.rfind("reward.", 0) == 0 ||
           key.rfind("features.", 0) == 0;
}

/**
 * Collects every invariant violation in a scenario key-value block, each
 * tagged with the key path it concerns. Empty result means the block
 * describes a valid chain scenario.
 */
inline std::vector<std::pair<std::string, std::string>> scenario_violations(
    const KeyValueFile& kv, const std::string& prefix = "") {
    std::vector<std::pair<std::string, std::string>> out;
    const auto fail = [&](const std::string& key, const std::string& message) {
        out.emplace_back(prefix + key, message);
    };

    for (const auto& key : kv.keys())
        if (!is_scenario_key(key)) fail(key, "unknown scenario key");

    long n = 0;
    if (!kv.has("states")) {
        fail("states", "missing state count");
        return out;
    }
    try {
        n = static_cast<long>(kv.get_u64("states"));
    } catch (const ConfigError& e) {
        fail("states", e.what());
        return out;
    }
    if (n < 1) {
        fail("states", "state count must be at least 1");
        return out;
    }

    const double eps = kv.get_double_or("epsilon_feature", 0.01);

    for (long i = 0; i < n; ++i) {
        double row_sum = 0.0;
        for (long j = 0; j < n; ++j) {
            const std::string key = "transition." + std::to_string(i) + "." + std::to_string(j);
            double p = 0.0;
            if (kv.has(key)) {
                try {
                    p = kv.get_double(key);
                } catch (const ConfigError& e) {
                    fail(key, e.what());
                    continue;
                }
            }
            if (p < 0.0 || p > 1.0) fail(key, "probability outside [0, 1]");
            row_sum += p;
        }
        if (std::abs(row_sum - 1.0) > 1e-12)
            fail("transition." + std::to_string(i),
                 "row sums to " + format_double(row_sum) + ", expected 1");
    }

    if (!kv.has("weighting")) {
        fail("weighting", "missing weighting vector");
    } else {
        try {
            const auto pi = kv.get_doubles("weighting");
            if (static_cast<long>(pi.size()) != n)
                fail("weighting", "expected " + std::to_string(n) + " entries");
            double sum = 0.0;
            for (double w : pi) {
                if (w < 0.0) fail("weighting", "entries must be nonnegative");
                sum += w;
            }
            if (std::abs(sum - 1.0) > 1e-12)
                fail("weighting", "sums to " + format_double(sum) + ", expected 1");
        } catch (const ConfigError& e) {
            fail("weighting", e.what());
        }
    }

    if (kv.has("discount")) {
        try {
            const double alpha = kv.get_double("discount");
            if (alpha <= 0.0 || alpha > 1.0) fail("discount", "must lie in (0, 1]");
        } catch (const ConfigError& e) {
            fail("discount", e.what());
        }
    }

    if (kv.has("sampling")) {
        const std::string regime = kv.get("sampling");
        if (regime != "iid_weighted" && regime != "trajectory")
            fail("sampling", "unknown sampling regime `" + regime + "`");
    }

    // Feature rows: consistent width, no all-zero column, well-conditioned
    // Gram matrix under the weighting.
    long k = -1;
    std::vector<std::vector<double>> feature_rows(static_cast<std::size_t>(n));
    bool features_ok = true;
    for (long i = 0; i < n; ++i) {
        const std::string key = "features." + std::to_string(i);
        if (!kv.has(key)) {
            fail(key, "missing feature row");
            features_ok = false;
            continue;
        }
        std::vector<double> row;
        std::istringstream in(kv.get(key));
        std::string token;
        bool row_ok = true;
        while (in >> token) {
            if (token == "eps") {
                row.push_back(eps);
            } else {
                try {
                    row.push_back(kv.to_double(key, token));
                } catch (const ConfigError& e) {
                    fail(key, e.what());
                    row_ok = false;
                    break;
                }
            }
        }
        if (!row_ok) {
            features_ok = false;
            continue;
        }
        if (k < 0) k = static_cast<long>(row.size());
        if (static_cast<long>(row.size()) != k || row.empty()) {
            fail(key, "expected " + std::to_string(k) + " feature values");
            features_ok = false;
        }
        feature_rows[static_cast<std::size_t>(i)] = std::move(row);
    }
    if (features_ok && k >= 1 && out.empty()) {
        Eigen::MatrixXd phi(n, k);
        for (long i = 0; i < n; ++i)
            for (long c = 0; c < k; ++c)
                phi(i, c) = feature_rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
        if (k > n) {
            fail("features.0", "more features than states");
        } else {
            for (long c = 0; c < k; ++c)
                if (phi.col(c).cwiseAbs().maxCoeff() == 0.0)
                    fail("features." + std::to_string(c), "feature column " + std::to_string(c) +
                                                              " is all zero");
            const auto pi = kv.get_doubles("weighting");
            Eigen::VectorXd d(n);
            for (long i = 0; i < n; ++i) d[i] = pi[static_cast<std::size_t>(i)];
            const Eigen::MatrixXd gram = phi.transpose() * d.asDiagonal() * phi;
            const double cond = detail::spd_condition(gram);
            if (!(cond < default_condition_bound))
                fail("features.0", "degenerate features under weighting: Gram condition number " +
                                       format_double(cond) + " exceeds bound " +
                                       format_double(default_condition_bound));
        }
    }
    return out;
}

/// Builds a chain scenario from a parseable key-value block. Throws the
/// first violation as a ConfigError carrying its key path.
inline Scenario scenario_from_kv(const KeyValueFile& kv, const std::string& name,
                                 const std::optional<ScenarioOptions>& overrides = {}) {
    const auto violations = scenario_violations(kv);
    if (!violations.empty())
        throw ConfigError(violations.front().first + ": " + violations.front().second,
                          violations.front().first);

    const auto n = static_cast<Eigen::Index>(kv.get_u64("states"));
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const std::string suffix = std::to_string(i) + "." + std::to_string(j);
            if (kv.has("transition." + suffix)) p(i, j) = kv.get_double("transition." + suffix);
            if (kv.has("reward." + suffix)) g(i, j) = kv.get_double("reward." + suffix);
        }
    }
    const auto pi_raw = kv.get_doubles("weighting");
    Eigen::VectorXd pi(n);
    for (Eigen::Index i = 0; i < n; ++i) pi[i] = pi_raw[static_cast<std::size_t>(i)];

    double eps = kv.get_double_or("epsilon_feature", 0.01);
    double discount = kv.get_double_or("discount", 0.9);
    SamplingRegime sampling = kv.get_or("sampling", "iid_weighted") == "trajectory"
                                  ? SamplingRegime::trajectory
                                  : SamplingRegime::iid_weighted;
    std::uint64_t episode_cap = kv.get_u64_or("episode_cap", 100);
    if (overrides) {
        eps = overrides->epsilon_feature;
        discount = overrides->discount;
        sampling = overrides->sampling;
        episode_cap = overrides->episode_cap;
    }

    std::vector<std::vector<double>> rows(static_cast<std::size_t>(n));
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        std::istringstream in(kv.get("features." + std::to_string(i)));
        std::string token;
        auto& row = rows[static_cast<std::size_t>(i)];
        while (in >> token) row.push_back(token == "eps" ? eps : std::stod(token));
        k = static_cast<Eigen::Index>(row.size());
    }
    Eigen::MatrixXd phi(n, k);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index c = 0; c < k; ++c)
            phi(i, c) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];

    ChainScenario chain{MarkovRewardProcess(p, g, discount, pi), FeatureMap(phi),
                        sampling, pi, episode_cap, eps};
    return Scenario(name, std::move(chain));
}

/// Flat key-value rendering of a chain scenario (the inline form echoed in
/// run artifacts). Zero transition/reward entries are omitted.
inline KeyValueFile scenario_to_kv(const ChainScenario& scenario) {
    KeyValueFile kv;
    const auto& mrp = scenario.mrp;
    kv.set("states", std::to_string(mrp.n_states()));
    for (Eigen::Index i = 0; i < mrp.n_states(); ++i) {
        for (Eigen::Index j = 0; j < mrp.n_states(); ++j) {
            const std::string suffix = std::to_string(i) + "." + std::to_string(j);
            if (mrp.transition()(i, j) != 0.0)
                kv.set("transition." + suffix, format_double(mrp.transition()(i, j)));
            if (mrp.reward()(i, j) != 0.0)
                kv.set("reward." + suffix, format_double(mrp.reward()(i, j)));
        }
    }
    std::string weights;
    for (Eigen::Index i = 0; i < mrp.n_states(); ++i) {
        if (i) weights += ' ';
        weights += format_double(mrp.weighting()[i]);
    }
    kv.set("weighting", weights);
    kv.set("discount", format_double(mrp.discount()));
    for (Eigen::Index i = 0; i < mrp.n_states(); ++i) {
        std::string row;
        for (Eigen::Index c = 0; c < scenario.features.n_features(); ++c) {
            if (c) row += ' ';
            row += format_double(scenario.features.matrix()(i, c));
        }
        kv.set("features." + std::to_string(i), row);
    }
    kv.set("sampling", sampling_name(scenario.sampling));
    kv.set("epsilon_feature", format_double(scenario.epsilon_feature));
    kv.set("episode_cap", std::to_string(scenario.episode_cap));
    return kv;
}

}  // namespace pelab
