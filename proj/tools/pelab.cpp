// pelab: run policy-evaluation experiments, sweep error surfaces, compare
// algorithms, run the toy control loop, and render CSV curves as SVG.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <unistd.h>

#include "pelab/coop.hpp"
#include "pelab/csv.hpp"
#include "pelab/errors.hpp"
#include "pelab/harness.hpp"
#include "pelab/kvfile.hpp"
#include "pelab/scenario.hpp"
#include "pelab/svg.hpp"

namespace {

using namespace pelab;

struct CommonArgs {
    std::vector<std::string> configs;
    std::string out;
    std::vector<std::string> sets;
    std::uint64_t seed = 0;
    bool seed_given = false;
    bool quiet = false;
};

bool color_enabled() {
    return isatty(fileno(stdout)) && std::getenv("NO_COLOR") == nullptr;
}

std::string paint(const std::string& text, const char* code) {
    if (!color_enabled()) return text;
    return std::string("\033[") + code + "m" + text + "\033[0m";
}

/// Applies --set KEY=VALUE pairs (last writer wins) and --seed.
KeyValueFile load_config(const std::string& path, const CommonArgs& args) {
    KeyValueFile kv = KeyValueFile::parse_file(path);
    for (const auto& pair : args.sets) {
        const auto eq = pair.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ConfigError("--set expects KEY=VALUE, got `" + pair + "`");
        kv.set(pair.substr(0, eq), pair.substr(eq + 1));
    }
    if (args.seed_given) kv.set("seed", std::to_string(args.seed));
    return kv;
}

/// All outputs go through a temporary name and a rename, so a failed run
/// never leaves a partial file behind.
void atomic_write(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot write output file: " + path);
        out << content;
        if (!out) throw ConfigError("write failed: " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

int cmd_evaluate(const CommonArgs& args) {
    const KeyValueFile kv = load_config(args.configs.front(), args);
    const ExperimentConfig config = parse_experiment_config(kv);
    const RunArtifact artifact = run(config);
    atomic_write(args.out, artifact.serialize());
    if (!args.quiet) {
        const bool ok = artifact.status != RunStatus::diverged;
        std::cout << "status: " << paint(artifact.status_string(), ok ? "32" : "31") << "\n"
                  << "artifact: " << args.out << "\n";
    }
    return artifact.status == RunStatus::diverged ? 2 : 0;
}

int cmd_sweep(const CommonArgs& args) {
    const KeyValueFile kv = load_config(args.configs.front(), args);
    const SweepConfig config = parse_sweep_config(kv);
    const Scenario scenario = build_scenario(config.scenario);
    const auto rows = sweep(scenario, config.grid_min, config.grid_max, config.grid_step);
    atomic_write(args.out, sweep_csv(rows).serialize());
    if (!args.quiet)
        std::cout << "sweep: " << rows.size() << " rows -> " << args.out << "\n";
    return 0;
}

int cmd_compare(const CommonArgs& args) {
    std::vector<ExperimentConfig> configs;
    for (const auto& path : args.configs) {
        KeyValueFile kv = KeyValueFile::parse_file(path);
        for (const auto& pair : args.sets) {
            const auto eq = pair.find('=');
            if (eq == std::string::npos || eq == 0)
                throw ConfigError("--set expects KEY=VALUE, got `" + pair + "`");
            kv.set(pair.substr(0, eq), pair.substr(eq + 1));
        }
        configs.push_back(parse_experiment_config(kv));
    }
    const CompareResult result = compare(std::move(configs), args.seed);
    atomic_write(args.out, result.aligned.serialize());
    if (!args.quiet) {
        for (std::size_t i = 0; i < result.runs.size(); ++i)
            std::cout << result.labels[i] << ": " << result.runs[i].status_string() << "\n";
        std::cout << "aligned table: " << args.out << "\n";
    }
    return 0;
}

ControlConfig parse_control_config(const KeyValueFile& kv) {
    static const std::set<std::string> allowed{
        "scenario", "rate",      "aux_rate",        "eps_start", "eps_end",
        "eps_decay_steps",       "episodes",        "step_cap",  "total_steps",
        "start_cell", "seed"};
    for (const auto& key : kv.keys())
        if (!allowed.count(key))
            throw ConfigError(key + ": unknown control config key", key, kv.line_of(key));

    ControlConfig config;
    const double rate = kv.get_double_or("rate", 0.1);
    const double aux_rate = kv.get_double_or("aux_rate", rate);
    if (rate <= 0.0) throw ConfigError("rate: must be positive", "rate", kv.line_of("rate"));
    if (aux_rate <= 0.0)
        throw ConfigError("aux_rate: must be positive", "aux_rate", kv.line_of("aux_rate"));
    config.step = SgdStep{rate, aux_rate};
    config.exploration.eps_start = kv.get_double_or("eps_start", 1.0);
    config.exploration.eps_end = kv.get_double_or("eps_end", 0.1);
    config.exploration.decay_steps = kv.get_u64_or("eps_decay_steps", 25000);
    for (const char* key : {"eps_start", "eps_end"}) {
        const double eps = kv.get_double_or(key, 0.5);
        if (eps < 0.0 || eps > 1.0)
            throw ConfigError(std::string(key) + ": must lie in [0, 1]", key, kv.line_of(key));
    }
    config.max_episodes = static_cast<int>(kv.get_u64_or("episodes", 100000));
    config.max_steps_per_episode = static_cast<int>(kv.get_u64_or("step_cap", 200));
    config.max_total_steps = kv.get_u64_or("total_steps", 50000);
    if (config.max_episodes < 1)
        throw ConfigError("episodes: must be at least 1", "episodes", kv.line_of("episodes"));
    if (config.max_steps_per_episode < 1)
        throw ConfigError("step_cap: must be at least 1", "step_cap", kv.line_of("step_cap"));
    if (config.max_total_steps < 1)
        throw ConfigError("total_steps: must be at least 1", "total_steps",
                          kv.line_of("total_steps"));
    config.start_cell = static_cast<int>(kv.get_u64_or("start_cell", 0));
    config.seed = kv.get_u64_or("seed", 0);
    return config;
}

std::string policy_grid_text(const GridWorld& world, const std::vector<int>& policy) {
    static const char action_chars[] = {'U', 'D', 'L', 'R'};
    std::string text;
    for (int y = 0; y < world.height(); ++y) {
        for (int x = 0; x < world.width(); ++x) {
            const int cell = y * world.width() + x;
            text += world.is_terminal(cell) ? 'T' : action_chars[policy[cell]];
        }
        text += '\n';
    }
    return text;
}

int cmd_control(const CommonArgs& args) {
    const KeyValueFile kv = load_config(args.configs.front(), args);
    const std::string scenario_name = kv.get_or("scenario", "gridworld-4x4");
    const Scenario scenario = builtin_scenario(scenario_name);
    const GridWorld& world = scenario.grid().world;
    const ControlConfig config = parse_control_config(kv);

    const TabularQApproximator qmodel(world.n_cells(), GridWorld::n_actions);
    const ControlLog log = run_control(world, qmodel, config);

    CsvTable table;
    table.header = {"episode", "return", "steps", "epsilon"};
    for (const auto& ep : log.episodes)
        table.rows.push_back({std::to_string(ep.episode), format_double(ep.undiscounted_return),
                              std::to_string(ep.steps), format_double(ep.epsilon)});
    atomic_write(args.out, table.serialize());

    const std::string grid = policy_grid_text(world, log.greedy_policy);
    atomic_write(args.out + ".policy.txt", grid);
    if (!args.quiet) {
        std::cout << "episodes: " << log.episodes.size() << " (" << log.total_steps
                  << " steps)\n"
                  << "episode log: " << args.out << "\n"
                  << "greedy policy (" << args.out << ".policy.txt):\n"
                  << grid;
    }
    return 0;
}

int cmd_plot(const CommonArgs& args) {
    const KeyValueFile kv = load_config(args.configs.front(), args);
    const PlotSpec spec = parse_plot_spec(kv);
    atomic_write(args.out, render_svg(spec));
    if (!args.quiet) std::cout << "plot: " << args.out << "\n";
    return 0;
}

int cmd_validate(const CommonArgs& args) {
    const KeyValueFile kv = load_config(args.configs.front(), args);
    std::vector<std::pair<std::string, std::string>> violations;
    if (kv.has("states")) {
        violations = scenario_violations(kv);
    } else {
        try {
            const ExperimentConfig config = parse_experiment_config(kv);
            build_scenario(config.scenario);  // runs every constructor invariant
        } catch (const ConfigError& e) {
            violations.emplace_back(e.key.empty() ? "config" : e.key, e.what());
        } catch (const ContractViolation& e) {
            violations.emplace_back("scenario", e.what());
        } catch (const DegenerateFeatures& e) {
            violations.emplace_back("features", e.what());
        }
    }
    if (violations.empty()) {
        if (!args.quiet)
            std::cout << paint("ok", "32") << ": " << args.configs.front() << "\n";
        return 0;
    }
    for (const auto& [key, message] : violations)
        std::cerr << paint("invalid", "31") << " " << key << ": " << message << "\n";
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pelab: a laboratory for linear policy evaluation and projected "
                 "Bellman error tracking"};
    app.require_subcommand(1);
    app.footer("Exit codes: 0 success, 1 configuration or I/O error, 2 run diverged "
               "(evaluate only; the artifact is still written).");

    CommonArgs args;
    const auto add_common = [&](CLI::App* cmd, bool many_configs, bool needs_out) {
        auto* config_opt =
            cmd->add_option("--config", args.configs,
                            many_configs ? "Config file(s); repeat for each run" : "Config file")
                ->required()
                ->check(CLI::ExistingFile);
        if (!many_configs) config_opt->expected(1);
        if (needs_out)
            cmd->add_option("--out", args.out, "Output file path")->required();
        cmd->add_option("--set", args.sets, "Override config entries, KEY=VALUE (repeatable)");
        cmd->add_option("--seed", args.seed, "Override the seed")
            ->each([&](const std::string&) { args.seed_given = true; });
        cmd->add_flag("--quiet", args.quiet, "Suppress status output");
    };

    auto* evaluate = app.add_subcommand("evaluate", "Run one experiment, write a run artifact");
    add_common(evaluate, false, true);
    auto* sweep = app.add_subcommand("sweep", "Exact msbe/mspbe over a parameter grid");
    add_common(sweep, false, true);
    auto* compare =
        app.add_subcommand("compare", "Run several configs on one scenario, align by step");
    add_common(compare, true, true);
    auto* control = app.add_subcommand("control", "Cooperative Q-learning on a gridworld");
    add_common(control, false, true);
    auto* plot = app.add_subcommand("plot", "Render CSV columns as an SVG line chart");
    add_common(plot, false, true);
    auto* validate = app.add_subcommand("validate", "Check a config without running it");
    add_common(validate, false, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (evaluate->parsed()) return cmd_evaluate(args);
        if (sweep->parsed()) return cmd_sweep(args);
        if (compare->parsed()) {
            if (args.configs.size() < 2)
                throw ConfigError("compare needs at least 2 --config files");
            return cmd_compare(args);
        }
        if (control->parsed()) return cmd_control(args);
        if (plot->parsed()) return cmd_plot(args);
        if (validate->parsed()) return cmd_validate(args);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const ContractViolation& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const DegenerateFeatures& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
