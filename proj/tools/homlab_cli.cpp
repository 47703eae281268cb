#include <CLI11.hpp>
#include <iostream>

#include "homlab/runner.hpp"

int main(int argc, char** argv) {
    CLI::App app{"homlab experiment runner"};
    app.require_subcommand(1);

    std::string config, out = "out";
    int threads = 0;
    auto* run = app.add_subcommand("run", "execute the study named in a config");
    run->add_option("config", config, "config file")->required();
    run->add_option("--out", out, "output directory");
    run->add_option("--threads", threads, "worker threads (overrides HOMLAB_THREADS)")->check(CLI::NonNegativeNumber);

    auto* validate = app.add_subcommand("validate", "check a config and list every violated rule");
    validate->add_option("config", config, "config file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : homlab::exit_validation;
    }

    if (threads > 0) homlab::set_threads(threads);
    const homlab::RunResult r = *validate ? homlab::validate_config_file(config) : homlab::run_study(config, out);
    if (r.code == homlab::exit_ok) {
        std::cout << r.message << "\n";
        for (const auto& f : r.files) std::cout << "  " << out << "/" << f << "\n";
    } else {
        std::cerr << r.message << (r.message.empty() || r.message.back() == '\n' ? "" : "\n");
    }
    return r.code;
}
