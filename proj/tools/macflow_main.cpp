/// Command-line driver: simulations, convergence studies and property suites
/// from flat key = value config files.

#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "macflow/commands.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    bool quiet = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "path to the run configuration")->required();
    cmd->add_option("--out", args.out_dir, "output directory (overrides config)");
    cmd->add_option("--seed", args.seed, "rng seed (overrides config)")
        ->each([&args](const std::string&) { args.seed_set = true; });
    cmd->add_flag("--quiet", args.quiet, "suppress progress output");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"macflow: filter-stabilized incompressible flow solver"};
    app.require_subcommand(1);

    CommonArgs run_args, conv_args, props_args;
    CLI::App* cmd_run_app = app.add_subcommand("run", "time-step a zero-forcing decay problem");
    add_common(cmd_run_app, run_args);
    CLI::App* cmd_conv_app =
        app.add_subcommand("convergence", "temporal convergence study (manufactured solution)");
    add_common(cmd_conv_app, conv_args);
    CLI::App* cmd_props_app =
        app.add_subcommand("filter-props", "filter/stepper property suite with JSON report");
    add_common(cmd_props_app, props_args);

    CLI11_PARSE(app, argc, argv);

    auto load = [](const CommonArgs& args, const std::vector<std::string>& required,
                   macflow::RunConfig& cfg, bool& indicator_specified) {
        const macflow::ConfigMap m = macflow::ConfigMap::from_file(args.config_path);
        cfg = macflow::make_run_config(m, required);
        indicator_specified = m.has("indicator");
        if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
        if (args.seed_set) cfg.seed = args.seed;
    };

    try {
        macflow::RunConfig cfg;
        bool indicator_specified = false;
        if (cmd_run_app->parsed()) {
            load(run_args, {"nx", "ny", "dt", "t_final", "nu"}, cfg, indicator_specified);
            return macflow::cmd_run(cfg, run_args.quiet);
        }
        if (cmd_conv_app->parsed()) {
            load(conv_args, {}, cfg, indicator_specified);
            return macflow::cmd_convergence(cfg, conv_args.quiet);
        }
        if (cmd_props_app->parsed()) {
            load(props_args, {}, cfg, indicator_specified);
            return macflow::cmd_filter_props(cfg, props_args.quiet, indicator_specified);
        }
    } catch (const macflow::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return macflow::exit_config_error;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return macflow::exit_config_error;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return macflow::exit_solver_failure;
    }
    return macflow::exit_ok;
}
