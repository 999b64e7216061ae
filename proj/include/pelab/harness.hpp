#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "pelab/agents.hpp"
#include "pelab/chain.hpp"
#include "pelab/csv.hpp"
#include "pelab/errors.hpp"
#include "pelab/kvfile.hpp"
#include "pelab/metrics.hpp"
#include "pelab/rng.hpp"
#include "pelab/scenario.hpp"
#include "pelab/schedule.hpp"
#include "pelab/stream.hpp"

namespace pelab {

enum class RunAlgorithm { td0, td_lambda, residual, gtd2, alternating_cd, cd_td0 };

inline std::string run_algorithm_name(RunAlgorithm a) {
    switch (a) {
        case RunAlgorithm::td0: return "td0";
        case RunAlgorithm::td_lambda: return "td_lambda";
        case RunAlgorithm::residual: return "residual";
        case RunAlgorithm::gtd2: return "gtd2";
        case RunAlgorithm::alternating_cd: return "alternating_cd";
        case RunAlgorithm::cd_td0: return "cd_td0";
    }
    return "unknown";
}

/// How a config refers to its scenario: a builtin name, a scenario file
/// path, or an inline scenario.* block, plus the scenario-level knobs that
/// may override file values when set explicitly.
struct ScenarioRef {
    std::string name;
    std::optional<KeyValueFile> inline_block;
    ScenarioOptions options;
    bool discount_explicit = false;
    bool epsilon_explicit = false;
    bool sampling_explicit = false;
    bool episode_cap_explicit = false;
};

/**
 * A fully resolved experiment: scenario reference, algorithm,
 * hyperparameters, initial parameters, run length, probing density and
 * seed. Parsed from flat key-value text; echoing the resolved form back
 * (RunArtifact::serialize) reproduces the run bit-identically.
 */
struct ExperimentConfig {
    ScenarioRef scenario;

    RunAlgorithm algorithm = RunAlgorithm::td0;
    StepSizeSchedule rate = StepSizeSchedule::constant(0.01);
    StepSizeSchedule aux_rate = StepSizeSchedule::constant(0.01);
    double lambda = 0.0;
    std::vector<double> theta0{0.0};
    std::vector<double> aux0;
    bool aux0_given = false;
    std::uint64_t steps = 1;
    std::uint64_t probe_every = 100;
    std::uint64_t seed = 0;
    bool seed_explicit = false;
    double divergence_threshold = default_divergence_threshold;
    bool record_walltime = false;
    double inner_delta = 1e-8;
    int inner_cap = 10000;
    double grid_min = -10.0;
    double grid_max = 10.0;
    double grid_step = 0.01;
};

namespace harness_detail {

inline StepSizeSchedule parse_schedule(const KeyValueFile& kv, const std::string& key) {
    const std::string& raw = kv.get(key);
    double base = 0.0, offset = 0.0;
    int consumed = 0;
    if (std::sscanf(raw.c_str(), "harmonic(%lf,%lf)%n", &base, &offset, &consumed) == 2 &&
        consumed == static_cast<int>(raw.size())) {
        if (base <= 0.0 || offset <= 0.0)
            throw ConfigError(key + ": harmonic base and offset must be positive", key,
                              kv.line_of(key));
        return StepSizeSchedule::harmonic(base, offset);
    }
    const double value = kv.to_double(key, raw);
    if (value <= 0.0) throw ConfigError(key + ": must be positive", key, kv.line_of(key));
    return StepSizeSchedule::constant(value);
}

inline std::string schedule_to_string(const StepSizeSchedule& s) {
    if (s.kind() == StepSizeSchedule::Kind::constant) return format_double(s.base());
    return "harmonic(" + format_double(s.base()) + "," + format_double(s.offset()) + ")";
}

inline std::string join_doubles(const std::vector<double>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ' ';
        out += format_double(values[i]);
    }
    return out;
}

inline const std::set<std::string>& allowed_config_keys() {
    static const std::set<std::string> keys{
        "scenario",      "algorithm",      "rate",          "aux_rate",
        "lambda",        "theta0",         "aux0",          "steps",
        "probe_every",   "seed",           "discount",      "epsilon_feature",
        "sampling",      "episode_cap",    "divergence_threshold",
        "record_walltime", "inner_delta",  "inner_cap",     "grid_min",
        "grid_max",      "grid_step",      "rng",           "status"};
    return keys;
}

}  // namespace harness_detail

inline RunAlgorithm parse_algorithm_tag(const std::string& tag, const std::string& key = "algorithm",
                                        int line = 0) {
    if (tag == "td0") return RunAlgorithm::td0;
    if (tag == "td_lambda") return RunAlgorithm::td_lambda;
    if (tag == "residual") return RunAlgorithm::residual;
    if (tag == "gtd2") return RunAlgorithm::gtd2;
    if (tag == "alternating_cd") return RunAlgorithm::alternating_cd;
    if (tag == "cd_td0") return RunAlgorithm::cd_td0;
    throw ConfigError(key + ": unknown algorithm tag `" + tag + "`", key, line);
}

/// Parses the scenario reference and scenario-level knobs out of a config
/// block. Shared by experiment, sweep and control configs.
inline ScenarioRef parse_scenario_ref(const KeyValueFile& kv) {
    ScenarioRef ref;
    ref.name = kv.get("scenario");
    KeyValueFile inline_block;
    bool has_inline = false;
    for (const auto& key : kv.keys()) {
        if (key.rfind("scenario.", 0) == 0) {
            inline_block.set(key.substr(9), kv.get(key), kv.line_of(key));
            has_inline = true;
        }
    }
    if (has_inline) {
        if (ref.name != "inline")
            throw ConfigError("scenario: scenario.* keys require `scenario = inline`, got `" +
                                  ref.name + "`",
                              "scenario", kv.line_of("scenario"));
        ref.inline_block = std::move(inline_block);
    } else if (ref.name == "inline") {
        throw ConfigError("scenario: `inline` needs scenario.* keys", "scenario",
                          kv.line_of("scenario"));
    }

    ref.discount_explicit = kv.has("discount");
    ref.options.discount = kv.get_double_or("discount", 0.9);
    if (ref.options.discount <= 0.0 || ref.options.discount > 1.0)
        throw ConfigError("discount: must lie in (0, 1]", "discount", kv.line_of("discount"));
    ref.epsilon_explicit = kv.has("epsilon_feature");
    ref.options.epsilon_feature = kv.get_double_or("epsilon_feature", 0.01);
    if (kv.has("sampling")) {
        ref.sampling_explicit = true;
        const std::string regime = kv.get("sampling");
        if (regime == "iid_weighted") {
            ref.options.sampling = SamplingRegime::iid_weighted;
        } else if (regime == "trajectory") {
            ref.options.sampling = SamplingRegime::trajectory;
        } else {
            throw ConfigError("sampling: unknown regime `" + regime + "`", "sampling",
                              kv.line_of("sampling"));
        }
    }
    ref.episode_cap_explicit = kv.has("episode_cap");
    ref.options.episode_cap = kv.get_u64_or("episode_cap", 100);
    if (ref.options.episode_cap < 1)
        throw ConfigError("episode_cap: must be at least 1", "episode_cap",
                          kv.line_of("episode_cap"));
    return ref;
}

inline ExperimentConfig parse_experiment_config(const KeyValueFile& kv) {
    ExperimentConfig config;
    for (const auto& key : kv.keys()) {
        if (key.rfind("scenario.", 0) == 0) continue;
        if (!harness_detail::allowed_config_keys().count(key))
            throw ConfigError(key + ": unknown config key", key, kv.line_of(key));
    }
    if (kv.has("rng") && kv.get("rng") != "splitmix64")
        throw ConfigError("rng: this build only provides `splitmix64`", "rng", kv.line_of("rng"));

    config.scenario = parse_scenario_ref(kv);
    config.algorithm = parse_algorithm_tag(kv.get("algorithm"), "algorithm",
                                           kv.line_of("algorithm"));
    config.rate = harness_detail::parse_schedule(kv, "rate");
    config.aux_rate = kv.has("aux_rate") ? harness_detail::parse_schedule(kv, "aux_rate")
                                         : config.rate;
    config.lambda = kv.get_double_or("lambda", 0.0);
    if (config.lambda < 0.0 || config.lambda >= 1.0)
        throw ConfigError("lambda: must lie in [0, 1)", "lambda", kv.line_of("lambda"));
    if (kv.has("theta0")) config.theta0 = kv.get_doubles("theta0");
    if (kv.has("aux0")) {
        config.aux0 = kv.get_doubles("aux0");
        config.aux0_given = true;
    }
    config.steps = kv.get_u64("steps");
    if (config.steps < 1) throw ConfigError("steps: must be at least 1", "steps",
                                            kv.line_of("steps"));
    config.probe_every = kv.get_u64_or("probe_every", 100);
    if (config.probe_every < 1)
        throw ConfigError("probe_every: must be at least 1", "probe_every",
                          kv.line_of("probe_every"));
    if (kv.has("seed")) {
        config.seed = kv.get_u64("seed");
        config.seed_explicit = true;
    }

    config.divergence_threshold =
        kv.get_double_or("divergence_threshold", default_divergence_threshold);
    if (config.divergence_threshold <= 0.0)
        throw ConfigError("divergence_threshold: must be positive", "divergence_threshold",
                          kv.line_of("divergence_threshold"));
    config.record_walltime = kv.get_bool_or("record_walltime", false);
    config.inner_delta = kv.get_double_or("inner_delta", 1e-8);
    if (config.inner_delta <= 0.0)
        throw ConfigError("inner_delta: must be positive", "inner_delta",
                          kv.line_of("inner_delta"));
    config.inner_cap = static_cast<int>(kv.get_u64_or("inner_cap", 10000));
    if (config.inner_cap < 1)
        throw ConfigError("inner_cap: must be at least 1", "inner_cap", kv.line_of("inner_cap"));
    config.grid_min = kv.get_double_or("grid_min", -10.0);
    config.grid_max = kv.get_double_or("grid_max", 10.0);
    config.grid_step = kv.get_double_or("grid_step", 0.01);
    if (config.grid_step <= 0.0)
        throw ConfigError("grid_step: must be positive", "grid_step", kv.line_of("grid_step"));
    if (config.grid_max < config.grid_min)
        throw ConfigError("grid_max: must not be below grid_min", "grid_max",
                          kv.line_of("grid_max"));
    return config;
}

inline bool is_builtin_scenario_name(const std::string& name) {
    int n = 0, k = 0;
    std::uint64_t seed = 0;
    return name == "paper-3state" || name == "gridworld-4x4" ||
           scenario_detail::parse_random_chain_name(name, n, k, seed);
}

/// Resolves a scenario reference: builtin name, inline block, or a scenario
/// file path. Explicit config-level knobs override file values.
inline Scenario build_scenario(const ScenarioRef& ref) {
    const auto apply_overrides = [&](KeyValueFile& block) {
        if (ref.discount_explicit) block.set("discount", format_double(ref.options.discount));
        if (ref.epsilon_explicit)
            block.set("epsilon_feature", format_double(ref.options.epsilon_feature));
        if (ref.sampling_explicit) block.set("sampling", sampling_name(ref.options.sampling));
        if (ref.episode_cap_explicit)
            block.set("episode_cap", std::to_string(ref.options.episode_cap));
    };
    if (ref.inline_block) {
        KeyValueFile block = *ref.inline_block;
        apply_overrides(block);
        return scenario_from_kv(block, "inline");
    }
    if (is_builtin_scenario_name(ref.name)) return builtin_scenario(ref.name, ref.options);
    // Otherwise a scenario file path.
    KeyValueFile block = KeyValueFile::parse_file(ref.name);
    apply_overrides(block);
    return scenario_from_kv(block, ref.name);
}

enum class RunStatus { completed, diverged, inner_cap_hit };

/**
 * The run record: a fully resolved config echo, the probed metrics table
 * and the termination status. Serialized as a single human-readable file,
 * config block then CSV block, separated by a `---` line. Serialization is
 * byte-reproducible unless walltime recording was switched on.
 */
struct RunArtifact {
    KeyValueFile config_echo;
    std::vector<MetricsRecord> records;
    RunStatus status = RunStatus::completed;
    std::uint64_t diverged_step = 0;
    int inner_cap_hits = 0;
    Eigen::Index n_params = 1;

    std::string status_string() const {
        switch (status) {
            case RunStatus::completed: return "completed";
            case RunStatus::diverged: return "diverged(" + std::to_string(diverged_step) + ")";
            case RunStatus::inner_cap_hit:
                return "inner_cap_hit(" + std::to_string(inner_cap_hits) + ")";
        }
        return "unknown";
    }

    CsvTable metrics_csv() const {
        CsvTable table;
        table.header.push_back("step");
        for (Eigen::Index c = 0; c < n_params; ++c)
            table.header.push_back("param_" + std::to_string(c));
        for (Eigen::Index c = 0; c < n_params; ++c)
            table.header.push_back("aux_" + std::to_string(c));
        table.header.insert(table.header.end(), {"msbe", "mspbe", "td_error", "wall_us"});
        for (const auto& rec : records) {
            std::vector<std::string> row;
            row.push_back(std::to_string(rec.step_index));
            for (Eigen::Index c = 0; c < n_params; ++c) row.push_back(format_double(rec.primary[c]));
            for (Eigen::Index c = 0; c < n_params; ++c)
                row.push_back(format_double(rec.auxiliary[c]));
            row.push_back(format_double(rec.msbe));
            row.push_back(format_double(rec.mspbe));
            row.push_back(format_double(rec.td_error));
            row.push_back(std::to_string(rec.wall_us));
            table.rows.push_back(std::move(row));
        }
        return table;
    }

    std::string serialize() const {
        std::string out;
        for (const auto& key : config_echo.keys())
            out += key + " = " + config_echo.get(key) + "\n";
        out += "status = " + status_string() + "\n";
        out += "---\n";
        out += metrics_csv().serialize();
        return out;
    }
};

namespace harness_detail {

inline KeyValueFile make_config_echo(const ExperimentConfig& config, const Scenario& scenario) {
    KeyValueFile echo;
    const bool builtin = !config.scenario.inline_block &&
                         (config.scenario.name == "paper-3state" ||
                          config.scenario.name == "gridworld-4x4" ||
                          config.scenario.name.rfind("random-chain(", 0) == 0);
    if (builtin) {
        echo.set("scenario", config.scenario.name);
    } else {
        // File and inline scenarios are echoed inline so the artifact alone
        // reproduces the run even if the file later changes.
        echo.set("scenario", "inline");
        const KeyValueFile block = scenario_to_kv(scenario.chain());
        for (const auto& key : block.keys()) echo.set("scenario." + key, block.get(key));
    }
    echo.set("algorithm", run_algorithm_name(config.algorithm));
    echo.set("rate", schedule_to_string(config.rate));
    echo.set("aux_rate", schedule_to_string(config.aux_rate));
    if (config.algorithm == RunAlgorithm::td_lambda)
        echo.set("lambda", format_double(config.lambda));
    echo.set("theta0", join_doubles(config.theta0));
    if (config.aux0_given) echo.set("aux0", join_doubles(config.aux0));
    echo.set("steps", std::to_string(config.steps));
    echo.set("probe_every", std::to_string(config.probe_every));
    echo.set("seed", std::to_string(config.seed));
    echo.set("discount", format_double(config.scenario.options.discount));
    echo.set("epsilon_feature", format_double(config.scenario.options.epsilon_feature));
    echo.set("sampling", sampling_name(config.scenario.options.sampling));
    echo.set("episode_cap", std::to_string(config.scenario.options.episode_cap));
    echo.set("divergence_threshold", format_double(config.divergence_threshold));
    echo.set("record_walltime", config.record_walltime ? "true" : "false");
    if (config.algorithm == RunAlgorithm::cd_td0) {
        echo.set("inner_delta", format_double(config.inner_delta));
        echo.set("inner_cap", std::to_string(config.inner_cap));
    }
    echo.set("rng", "splitmix64");
    return echo;
}

inline Eigen::VectorXd broadcast(const std::vector<double>& values, Eigen::Index k,
                                 const std::string& key) {
    Eigen::VectorXd out(k);
    if (values.size() == 1) {
        out.setConstant(values[0]);
        return out;
    }
    if (static_cast<Eigen::Index>(values.size()) != k)
        throw ConfigError(key + ": expected 1 or " + std::to_string(k) + " values, got " +
                              std::to_string(values.size()),
                          key);
    for (Eigen::Index c = 0; c < k; ++c) out[c] = values[static_cast<std::size_t>(c)];
    return out;
}

}  // namespace harness_detail

/**
 * Executes one experiment: exactly config.steps stepper steps (or outer
 * iterations for cd_td0), probing the exact error functionals at step 0,
 * every probe_every steps and the final step. Divergence is recorded in the
 * status, never thrown past this boundary.
 */
inline RunArtifact run(const ExperimentConfig& config) {
    const Scenario scenario = build_scenario(config.scenario);
    const ChainScenario& chain = scenario.chain();
    const auto k = chain.features.n_features();

    RunArtifact artifact;
    artifact.config_echo = harness_detail::make_config_echo(config, scenario);
    artifact.n_params = k;

    const Eigen::VectorXd theta0 = harness_detail::broadcast(config.theta0, k, "theta0");
    Eigen::VectorXd aux0 = Eigen::VectorXd::Zero(k);
    if (config.aux0_given) {
        aux0 = harness_detail::broadcast(config.aux0, k, "aux0");
    } else if (config.algorithm == RunAlgorithm::alternating_cd ||
               config.algorithm == RunAlgorithm::cd_td0) {
        aux0 = theta0;
    }

    const auto start_time = std::chrono::steady_clock::now();
    const auto wall_us_now = [&]() -> std::int64_t {
        if (!config.record_walltime) return 0;
        return std::chrono::duration_cast<std::chrono::microseconds>(
                   std::chrono::steady_clock::now() - start_time)
            .count();
    };
    const auto probe = [&](std::uint64_t step, const Eigen::VectorXd& primary,
                           const Eigen::VectorXd& auxiliary, double td_error) {
        MetricsRecord rec;
        rec.step_index = step;
        rec.primary = primary;
        rec.auxiliary = auxiliary;
        rec.msbe = msbe(chain.mrp, chain.features, primary);
        rec.mspbe = mspbe(chain.mrp, chain.features, primary);
        rec.td_error = td_error;
        rec.wall_us = wall_us_now();
        artifact.records.push_back(std::move(rec));
    };

    if (config.algorithm == RunAlgorithm::cd_td0) {
        if (config.rate.kind() != StepSizeSchedule::Kind::constant ||
            config.aux_rate.kind() != StepSizeSchedule::Kind::constant)
            throw ConfigError("rate: cd_td0 uses constant inner rates", "rate");
        CoordinateDescentOptions opt;
        opt.inner_delta = config.inner_delta;
        opt.inner_cap = config.inner_cap;
        opt.r_rate = config.rate.base();
        opt.x_rate = config.aux_rate.base();
        opt.outer_iterations = static_cast<int>(config.steps);
        const auto result =
            coordinate_descent_td0(chain.mrp, chain.features, theta0, aux0, opt);
        for (std::uint64_t outer = 0; outer <= config.steps; ++outer) {
            if (outer == 0 || outer % config.probe_every == 0 || outer == config.steps)
                probe(outer, result.outer_r[outer], result.outer_x[outer], 0.0);
        }
        if (result.inner_cap_hits > 0) {
            artifact.status = RunStatus::inner_cap_hit;
            artifact.inner_cap_hits = result.inner_cap_hits;
        }
        return artifact;
    }

    const Algorithm alg = [&] {
        switch (config.algorithm) {
            case RunAlgorithm::td0: return Algorithm::td0;
            case RunAlgorithm::td_lambda: return Algorithm::td_lambda;
            case RunAlgorithm::residual: return Algorithm::residual_gradient;
            case RunAlgorithm::gtd2: return Algorithm::gtd2;
            default: return Algorithm::alternating_cd;
        }
    }();
    const LinearEvaluator evaluator(alg, chain.features, chain.mrp.discount(), config.rate,
                                    config.aux_rate, config.lambda,
                                    config.divergence_threshold);
    EvaluatorState state = evaluator.make_state(theta0, aux0);
    TransitionSampler sampler(chain, config.seed);

    probe(0, state.primary, state.auxiliary, 0.0);
    for (std::uint64_t t = 0; t < config.steps; ++t) {
        const Transition transition = sampler.next();
        try {
            state = evaluator.step(state, transition);
        } catch (const DivergenceError& e) {
            artifact.status = RunStatus::diverged;
            artifact.diverged_step = e.step;
            break;
        }
        const std::uint64_t step = t + 1;
        if (step % config.probe_every == 0 || step == config.steps)
            probe(step, state.primary, state.auxiliary, state.last_td_error);
    }
    return artifact;
}

struct SweepRow {
    double theta;
    double msbe_value;
    double mspbe_value;
};

/**
 * Exact error surfaces over a scalar parameter grid. Only scalar
 * architectures sweep; the grid is monotone by construction.
 */
inline std::vector<SweepRow> sweep(const Scenario& scenario, double grid_min, double grid_max,
                                   double grid_step) {
    const ChainScenario& chain = scenario.chain();
    if (chain.features.n_features() != 1)
        throw ConfigError("sweep requires a scalar parameter scenario (k = 1)", "scenario");
    if (grid_step <= 0.0) throw ConfigError("grid_step: must be positive", "grid_step");
    if (grid_max < grid_min)
        throw ConfigError("grid_max: must not be below grid_min", "grid_max");
    const auto count =
        static_cast<std::int64_t>(std::floor((grid_max - grid_min) / grid_step + 1e-9));
    std::vector<SweepRow> rows;
    rows.reserve(static_cast<std::size_t>(count) + 1);
    Eigen::VectorXd theta(1);
    for (std::int64_t i = 0; i <= count; ++i) {
        theta[0] = grid_min + static_cast<double>(i) * grid_step;
        rows.push_back({theta[0], msbe(chain.mrp, chain.features, theta),
                        mspbe(chain.mrp, chain.features, theta)});
    }
    return rows;
}

inline CsvTable sweep_csv(const std::vector<SweepRow>& rows) {
    CsvTable table;
    table.header = {"theta", "msbe", "mspbe"};
    for (const auto& row : rows)
        table.rows.push_back({format_double(row.theta), format_double(row.msbe_value),
                              format_double(row.mspbe_value)});
    return table;
}

/// Sweep configs carry only a scenario reference and the grid bounds.
struct SweepConfig {
    ScenarioRef scenario;
    double grid_min = -10.0;
    double grid_max = 10.0;
    double grid_step = 0.01;
};

inline SweepConfig parse_sweep_config(const KeyValueFile& kv) {
    static const std::set<std::string> allowed{"scenario",    "discount", "epsilon_feature",
                                               "sampling",    "episode_cap",
                                               "grid_min",    "grid_max", "grid_step"};
    for (const auto& key : kv.keys()) {
        if (key.rfind("scenario.", 0) == 0) continue;
        if (!allowed.count(key))
            throw ConfigError(key + ": unknown sweep config key", key, kv.line_of(key));
    }
    SweepConfig config;
    config.scenario = parse_scenario_ref(kv);
    config.grid_min = kv.get_double_or("grid_min", -10.0);
    config.grid_max = kv.get_double_or("grid_max", 10.0);
    config.grid_step = kv.get_double_or("grid_step", 0.01);
    if (config.grid_step <= 0.0)
        throw ConfigError("grid_step: must be positive", "grid_step", kv.line_of("grid_step"));
    if (config.grid_max < config.grid_min)
        throw ConfigError("grid_max: must not be below grid_min", "grid_max",
                          kv.line_of("grid_max"));
    return config;
}

struct CompareResult {
    std::vector<RunArtifact> runs;
    std::vector<std::string> labels;
    CsvTable aligned;
};

/**
 * Runs several configs on the same scenario and aligns their projected-error
 * curves by step index. Runs with an explicit seed keep it; runs without
 * one get child seeds derived from the compare-level seed and the run index
 * (derive_seed), so unseeded duplicates still explore independent streams.
 * Output ordering is by run index.
 */
inline CompareResult compare(std::vector<ExperimentConfig> configs, std::uint64_t parent_seed) {
    if (configs.size() < 2)
        throw ConfigError("compare needs at least 2 configs, got " +
                          std::to_string(configs.size()));

    std::string reference_scenario;
    for (std::size_t i = 0; i < configs.size(); ++i) {
        const Scenario scenario = build_scenario(configs[i].scenario);
        const auto scenario_kv = scenario_to_kv(scenario.chain());
        std::string identity;
        for (const auto& key : scenario_kv.keys())
            identity += key + "=" + scenario_kv.get(key) + ";";
        if (i == 0) {
            reference_scenario = identity;
        } else if (identity != reference_scenario) {
            throw ConfigError("compare: run " + std::to_string(i) +
                              " resolves to a different scenario than run 0");
        }
        if (configs[i].steps != configs[0].steps ||
            configs[i].probe_every != configs[0].probe_every)
            throw ConfigError("compare: run " + std::to_string(i) +
                              " has a different steps/probe_every grid than run 0");
    }

    CompareResult result;
    std::map<std::string, int> label_counts;
    for (std::size_t i = 0; i < configs.size(); ++i) {
        if (!configs[i].seed_explicit) {
            configs[i].seed = derive_seed(parent_seed, i);
            configs[i].seed_explicit = true;
        }
        std::string label = run_algorithm_name(configs[i].algorithm);
        const int count = ++label_counts[label];
        if (count > 1) label += "_" + std::to_string(count);
        result.labels.push_back(label);
        result.runs.push_back(run(configs[i]));
    }

    result.aligned.header.push_back("step");
    for (const auto& label : result.labels) result.aligned.header.push_back("mspbe_" + label);
    const auto& reference_records = result.runs.front().records;
    std::vector<std::uint64_t> steps;
    for (const auto& rec : reference_records) steps.push_back(rec.step_index);
    for (std::size_t s = 0; s < steps.size(); ++s) {
        std::vector<std::string> row;
        row.push_back(std::to_string(steps[s]));
        for (const auto& artifact : result.runs) {
            if (s < artifact.records.size() && artifact.records[s].step_index == steps[s]) {
                row.push_back(format_double(artifact.records[s].mspbe));
            } else {
                row.push_back("");  // run ended early (diverged)
            }
        }
        result.aligned.rows.push_back(std::move(row));
    }
    return result;
}

}  // namespace pelab
