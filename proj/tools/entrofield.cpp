#include "entrofield/config.hpp"
#include "entrofield/report.hpp"
#include "entrofield/scenarios.hpp"
#include "entrofield/version.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

namespace {

// exit codes: 0 pass, 1 tolerance failure, 2 config error, 3 numeric failure
constexpr int kPass = 0;
constexpr int kToleranceFailure = 1;
constexpr int kConfigError = 2;
constexpr int kNumericFailure = 3;

int do_run(const std::string& config_path, const std::string& seed_flag,
           const std::string& out_flag, const std::string& format_flag) {
    std::ifstream in(config_path, std::ios::binary);
    if (!in) throw entrofield::ConfigError("cannot read config file '" + config_path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();

    entrofield::RunConfig cfg = entrofield::parse_config(buf.str());
    // flags win over file values
    if (!seed_flag.empty())
        cfg.seed = entrofield::config_detail::parse_uint("--seed", seed_flag);
    if (!out_flag.empty()) cfg.out_path = out_flag;
    if (!format_flag.empty()) {
        if (format_flag == "csv") cfg.format = entrofield::OutputFormat::csv;
        else if (format_flag == "json") cfg.format = entrofield::OutputFormat::json;
        else
            throw entrofield::ConfigError("--format: expected csv or json, got '" + format_flag +
                                          "'");
    }

    const entrofield::RunReport report = entrofield::run_scenario(cfg);
    const std::string body = entrofield::render_report(report, cfg.format);
    std::cout << body;
    if (!cfg.out_path.empty()) {
        std::ofstream out(cfg.out_path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write report to '" + cfg.out_path + "'");
        out << body;
        if (!out.good()) throw std::runtime_error("short write to '" + cfg.out_path + "'");
    }
    return report.pass() ? kPass : kToleranceFailure;
}

int do_scenarios() {
    std::printf("%-17s %-22s %s\n", "scenario", "required keys", "summary");
    for (const auto& info : entrofield::scenario_catalog())
        std::printf("%-17s %-22s %s\n", info.name, info.required, info.summary);
    return kPass;
}

}

int main(int argc, char** argv) {
    CLI::App app{"entrofield: lattice laboratory for the entropic dynamics of scalar fields"};
    app.set_version_flag("--version", entrofield::version_string);
    app.require_subcommand(1);

    std::string config_path, seed_flag, out_flag, format_flag;
    CLI::App* run = app.add_subcommand("run", "execute a scenario from a config file");
    run->add_option("--config", config_path, "path to a key = value config file")->required();
    run->add_option("--seed", seed_flag, "override the config seed");
    run->add_option("--out", out_flag, "also write the report to this path");
    run->add_option("--format", format_flag, "report format: csv or json");

    CLI::App* scen = app.add_subcommand("scenarios", "list scenarios and their required keys");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);   // --help / --version
        app.exit(e);
        return kConfigError;
    }

    try {
        if (scen->parsed()) return do_scenarios();
        return do_run(config_path, seed_flag, out_flag, format_flag);
    } catch (const entrofield::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kNumericFailure;
    }
}
