#include <cstdint>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ctes/experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"continuous-time event sequence toolkit"};
    app.require_subcommand(1);

    const char* tasks[] = {"simulate",  "simulate-hawkes", "fit",
                           "fit-imtpp", "fit-hawkes",      "transfer",
                           "impute",    "forecast",        "evaluate"};

    struct Args {
        std::string config;
        std::optional<std::uint64_t> seed;
        std::optional<std::string> out;
    };
    std::map<std::string, Args> args;

    for (const char* t : tasks) {
        auto* sub = app.add_subcommand(t);
        Args& a = args[t];
        sub->add_option("--config", a.config, "experiment config (JSON)")
            ->required()
            ->check(CLI::ExistingFile);
        sub->add_option("--seed", a.seed, "override the config seed");
        sub->add_option("--out", a.out, "override the output directory");
    }

    CLI11_PARSE(app, argc, argv);

    std::string task = app.get_subcommands().front()->get_name();
    const Args& a = args[task];
    try {
        ctes::ExperimentConfig cfg = ctes::ExperimentConfig::load(a.config);
        return ctes::run_experiment(cfg, task, a.seed, a.out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
