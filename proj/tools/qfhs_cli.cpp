// qfhs_cli: runs simulation studies, rolling forecasts and backtests from a
// JSON study configuration.

#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "qfhs/pipeline.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Quantile filtered historical simulation studies and backtests"};
    std::string config_path, command, out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> jobs, max_refits;
    bool print_config = false;
    app.add_option("--config", config_path, "study configuration (JSON)")->required()->check(CLI::ExistingFile);
    app.add_option("--command", command,
                   "simulate | fit | forecast | backtest | study-accuracy | study-alpha | bootstrap-alpha")
        ->required();
    app.add_option("--seed", seed, "override the configured seed");
    app.add_option("--out", out, "override the output directory");
    app.add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
    app.add_option("--max-refits", max_refits, "stop after this many fresh fits (resume later from the cache)");
    app.add_flag("--print-config", print_config, "print the resolved configuration and exit");
    CLI11_PARSE(app, argc, argv);

    const auto cmd = qfhs::cli::parse_command(command);
    if (!cmd) {
        std::cerr << "error: unknown command '" << command << "'\n";
        return 2;
    }
    try {
        auto cfg = qfhs::cli::load_config(config_path);
        if (seed) cfg.seed = *seed;
        if (!out.empty()) cfg.output = std::filesystem::absolute(out).string();
        if (jobs) cfg.jobs = *jobs;
        if (print_config) {
            std::cout << qfhs::cli::to_json(cfg).dump(2) << '\n';
            return 0;
        }
        qfhs::cli::RunOptions opts;
        opts.max_refits = max_refits;
        return qfhs::cli::run(cfg, *cmd, opts);
    } catch (const qfhs::cli::Interrupted& e) {
        std::cerr << "interrupted: " << e.what() << '\n';
        return 75;
    } catch (const qfhs::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const qfhs::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
