// rbnlab: one subcommand per experiment kind.
//   rbnlab <kind> [--config FILE] [--seed N] [--out DIR] [--paths N] [--steps N] [--threads N] [--print-config]
// Exit codes: 0 success, 1 usage or invalid config, 2 regime refusal, 3 numerical failure.

#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "rbn/xlab.hpp"

using namespace rbn;

namespace {

int fail(int code, const std::string& status, const std::string& reason, const std::string& message) {
    std::cerr << xlab::Json{{"status", status}, {"reason", reason}, {"message", message}}.dump() << '\n';
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Regularization-by-noise numerical laboratory"};
    app.set_version_flag("--version", xlab::software_version());
    app.require_subcommand(1);

    struct Options {
        std::string config;
        std::optional<std::uint64_t> seed;
        std::optional<std::string> out;
        std::optional<std::size_t> paths, steps;
        std::optional<unsigned> threads;
        bool print = false;
    } opt;

    for (const auto kind : xlab::all_kinds()) {
        auto* sub = app.add_subcommand(xlab::to_string(kind), "run the " + xlab::to_string(kind) + " experiment");
        sub->add_option("--config", opt.config, "JSON config file")->check(CLI::ExistingFile);
        sub->add_option("--seed", opt.seed, "master seed");
        sub->add_option("--out", opt.out, "output directory");
        sub->add_option("--paths", opt.paths, "override every ensemble size");
        sub->add_option("--steps", opt.steps, "override every time-grid size");
        sub->add_option("--threads", opt.threads, "worker threads (outputs do not depend on it)");
        sub->add_flag("--print-config", opt.print, "print the resolved config and exit");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : xlab::exit_usage;
    }

    try {
        const auto kind = xlab::parse_kind(app.get_subcommands().front()->get_name());
        xlab::ExperimentConfig cfg = opt.config.empty() ? xlab::default_config(kind) : xlab::load_config(opt.config);
        if (cfg.kind != kind)
            return fail(xlab::exit_usage, "invalid", "kind_mismatch",
                        "config kind " + xlab::to_string(cfg.kind) + " does not match subcommand " + xlab::to_string(kind));
        if (opt.seed) cfg.seed = *opt.seed;
        if (opt.out) cfg.out = *opt.out;
        if (opt.paths) cfg.n_paths = *opt.paths;
        if (opt.steps) cfg.n_steps = *opt.steps;
        if (opt.threads) cfg.threads = *opt.threads;
        if (opt.print) {
            std::cout << xlab::to_json(cfg).dump(2) << '\n';
            return xlab::exit_ok;
        }
        const auto rep = xlab::run_experiment(cfg);
        std::cout << rep.to_json().dump(2) << '\n';
        return xlab::exit_ok;
    } catch (const RegimeRefusal& e) {
        return fail(xlab::exit_regime, "refused", e.reason(), e.what());
    } catch (const NumericalFailure& e) {
        return fail(xlab::exit_numerical, "numerical_failure", "numerical", e.what());
    } catch (const DomainError& e) {
        return fail(xlab::exit_usage, "invalid", "domain", e.what());
    }
}
