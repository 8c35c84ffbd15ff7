#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "cart/error.hpp"
#include "cart/pipeline.hpp"
#include "cart/version.hpp"

namespace {

using StageFn = void (*)(const cart::StageOptions&);

void add_stage(CLI::App& app, const std::string& name, const std::string& desc,
               cart::StageOptions& options, StageFn fn) {
    CLI::App* sub = app.add_subcommand(name, desc);
    sub->add_option("--config", options.config_path, "run configuration file")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out", options.out_dir, "run directory shared by all stages")
        ->capture_default_str();
    sub->add_option("--seed", options.seed_override, "override the config seed");
    sub->add_option("--threads", options.threads_override,
                    "worker threads (default: config, then core count)");
    sub->add_flag("--quiet", options.quiet, "suppress progress lines");
    sub->callback([&options, fn] { fn(options); });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"circuit-aware reward training on synthetic head/tail mixtures"};
    app.set_version_flag("--version", std::string(cart::kToolVersion));
    app.require_subcommand(1);

    cart::StageOptions options;
    add_stage(app, "synth", "sample the head/tail mixture into train and eval splits", options,
              cart::run_synth);
    add_stage(app, "train-baseline", "train the plain reward model", options,
              cart::run_train_baseline);
    add_stage(app, "discover", "find longtail-specialized circuits in the baseline model",
              options, cart::run_discover);
    add_stage(app, "assess", "score discovered circuits for vulnerability", options,
              cart::run_assess);
    add_stage(app, "train-cart", "train with the circuit-aware objective", options,
              cart::run_train_cart);
    add_stage(app, "ensemble", "train members on circuit subsets and fit simplex weights",
              options, cart::run_ensemble);
    add_stage(app, "report", "compare baseline and circuit-aware models", options,
              cart::run_report);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const cart::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const cart::MissingArtifactError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const cart::SchemaError& e) {
        std::cerr << "schema error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
