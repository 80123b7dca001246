#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ccebreak/csv.hpp"
#include "ccebreak/error.hpp"
#include "ccebreak/pipeline.hpp"

int main(int argc, char** argv) {
    ccebreak::RunConfig cfg;
    CLI::App app{"Common structural breaks in panels with interactive effects"};
    app.set_version_flag("--version", std::string(ccebreak::version()));

    app.add_option("command", cfg.command, "detect | test | estimate | ci | simulate | tables")
        ->required()
        ->check(CLI::IsMember({"detect", "test", "estimate", "ci", "simulate", "tables"}));
    app.add_option("--input", cfg.input, "long-format CSV: unit,time,y,<regressors>");
    app.add_option("--common-input", cfg.common_input, "CSV of known common regressors: time,<d...>");
    app.add_option("--unit", cfg.unit_column, "unit identifier column")->capture_default_str();
    app.add_option("--time", cfg.time_column, "time identifier column")->capture_default_str();
    app.add_option("--y", cfg.y_column, "outcome column")->capture_default_str();
    app.add_option("--x", cfg.x_columns, "regressor columns (default: all remaining)")->delimiter(',');
    app.add_option("--break-x", cfg.break_columns, "regressors whose coefficients break (default: all)")
        ->delimiter(',');
    app.add_flag("!--no-intercept", cfg.intercept, "do not add an intercept to the known common regressors");
    app.add_option("--time-order", cfg.time_order, "order of time labels")
        ->check(CLI::IsMember({"numeric", "lexical"}))
        ->capture_default_str();
    app.add_option("--alpha", cfg.alpha, "significance level")->capture_default_str();
    app.add_option("--trim", cfg.trim, "trimming fraction for the sup-Wald test")->capture_default_str();
    app.add_option("--kernel", cfg.kernel, "HAC kernel")
        ->check(CLI::IsMember({"bartlett", "uniform"}))
        ->capture_default_str();
    std::string bandwidth = "auto";
    app.add_option("--bandwidth", bandwidth, "HAC bandwidth S_T, or auto for floor(T^(1/3))")->capture_default_str();
    app.add_flag("--homoskedastic", cfg.homoskedastic, "use sigma^2 Omega_V^-1 instead of the HAC estimate");
    app.add_option("--max-breaks", cfg.max_breaks, "largest number of breaks to report")->capture_default_str();
    app.add_option("--seed", cfg.seed, "seed of the critical-value simulations")->capture_default_str();
    app.add_option("--paths", cfg.n_paths, "paths per critical-value simulation")->capture_default_str();
    app.add_option("--cache", cfg.cache, "critical-value cache file");
    app.add_option("--threads", cfg.threads, "worker threads for simulations")->capture_default_str();
    app.add_option("--config", cfg.experiment_config, "simulate: experiment configuration file");
    app.add_option("--write-panel", cfg.write_panel, "simulate: write one generated panel as CSV");
    app.add_option("--r-max", cfg.r_max, "tables: largest number of breaking coefficients")->capture_default_str();
    app.add_option("--out", cfg.out, "output file (default: standard output)");
    app.add_option("--format", cfg.format, "output format")
        ->check(CLI::IsMember({"json", "text"}))
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (bandwidth != "auto") {
            try {
                std::size_t used = 0;
                cfg.bandwidth = std::stoi(bandwidth, &used);
                if (used != bandwidth.size()) throw std::invalid_argument(bandwidth);
            } catch (const std::logic_error&) {
                throw ccebreak::Error(ccebreak::Errc::invalid_argument, "bandwidth must be a positive integer or auto");
            }
        }
        const std::string output = ccebreak::run_command(cfg);
        if (cfg.out.empty()) {
            std::fwrite(output.data(), 1, output.size(), stdout);
        } else {
            ccebreak::write_file_atomic(cfg.out, output);
        }
        return 0;
    } catch (const ccebreak::Error& e) {
        std::cerr << "ccebreak: " << ccebreak::to_string(e.code()) << ": " << e.what() << "\n";
        return ccebreak::exit_status(e.code());
    } catch (const std::exception& e) {
        std::cerr << "ccebreak: internal error: " << e.what() << "\n";
        return 3;
    }
}
