// canvolt: command-line driver for scenario runs, sweeps and calibration.
//
//   canvolt simulate <cfg> [--trace out.csv] [--summary out.json] [--check]
//   canvolt sweep <cfg> --out table.csv [--threads N]
//   canvolt calibrate --targets all|name[=value],... --out params.json
//   canvolt validate <cfg>
//   canvolt report tau-bit [--out table.csv]
//
// Exit codes: 0 success, 1 config error, 2 runtime error, 3 check failure.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

#include "canvolt/canvolt.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kRuntimeError = 2;
constexpr int kCheckFailed = 3;

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw canvolt::Error("cannot write " + path);
    return out;
}

void close_output(std::ofstream& out, const std::string& path) {
    out.close();
    if (!out) throw canvolt::Error("write failed: " + path);
}

struct Options {
    std::string config;
    std::string params;
    std::string trace;
    std::string summary;
    bool check = false;
    std::string out;
    unsigned threads = 0;
    std::string targets = "all";
    std::string report;
};

canvolt::ParameterSet load_params(const Options& o) {
    return canvolt::load_parameters(o.params.empty() ? canvolt::default_parameter_path() : o.params);
}

int simulate(const Options& o) {
    const auto base = load_params(o);
    const auto cfg = canvolt::parse_config(canvolt::read_text_file(o.config), base);
    const auto result = canvolt::run_scenario(cfg);
    if (!o.trace.empty()) {
        auto f = open_output(o.trace);
        canvolt::write_trace_csv(f, result.trace);
        close_output(f, o.trace);
    }
    const auto summary = canvolt::summary_json(result.summary, cfg);
    if (!o.summary.empty()) {
        auto f = open_output(o.summary);
        f << summary.dump(2) << '\n';
        close_output(f, o.summary);
    } else {
        std::cout << summary.dump(2) << '\n';
    }
    if (!o.check) return kOk;
    if (cfg.expect.empty()) {
        std::cerr << o.config << ": no [expect] section, nothing to check\n";
        return kOk;
    }
    const auto failures = canvolt::check_expectations(cfg.expect, result.summary);
    for (const auto& f : failures) std::cerr << "check failed: " << f << '\n';
    if (!failures.empty()) return kCheckFailed;
    std::cerr << "check passed\n";
    return kOk;
}

int sweep(const Options& o) {
    const auto base = load_params(o);
    const auto doc = canvolt::parse_ini(canvolt::read_text_file(o.config));
    const auto cfg = canvolt::config_from_ini(doc, base);
    if (!cfg.sweep) throw canvolt::ConfigError(0, "sweep", o.config + " has no [sweep] section");
    const std::string path = cfg.sweep->path;
    const auto values = cfg.sweep->values();
    for (double v : values) canvolt::config_at(doc, path, v, base);  // reject bad grid points before running
    const auto rows = canvolt::run_sweep(
        values, [&](double v) { return canvolt::config_at(doc, path, v, base); }, o.threads);
    auto f = open_output(o.out);
    canvolt::write_sweep_csv(f, rows);
    close_output(f, o.out);
    if (const auto first = canvolt::first_success(rows))
        std::cout << path << ": first success at " << *first << '\n';
    else
        std::cout << path << ": no successful grid point\n";
    return kOk;
}

int calibrate(const Options& o) {
    const auto set = canvolt::calibrate(canvolt::parse_targets(o.targets));
    canvolt::save_parameters(set, o.out);
    std::cout << canvolt::to_json(set).dump(2) << '\n';
    return kOk;
}

int validate(const Options& o) {
    const auto cfg = canvolt::parse_config(canvolt::read_text_file(o.config), load_params(o));
    std::cout << o.config << ": ok (" << cfg.ecus.size() << " ECUs, "
              << (cfg.attack ? canvolt::attack_name(cfg.attack->attack) : "no attack") << ", irs "
              << canvolt::device_name(cfg.irs.make()) << ")\n";
    return kOk;
}

int report(const Options& o) {
    const auto p = load_params(o);
    std::ofstream file;
    if (!o.out.empty()) file = open_output(o.out);
    std::ostream& out = o.out.empty() ? std::cout : file;
    out << "v_attack_h,tau_bit_us\n";
    for (const auto& row : canvolt::tau_bit_table(p.transceiver, p.timing)) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.1f,%.3f\n", row.v_attack_h, row.tau_bit * 1e6);
        out << buf;
    }
    if (!o.out.empty()) close_output(file, o.out);
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CAN bus voltage-attack and intrusion-response simulator"};
    app.require_subcommand(1);
    Options o;

    auto* sim = app.add_subcommand("simulate", "Run one scenario");
    sim->add_option("config", o.config, "Scenario file")->required()->check(CLI::ExistingFile);
    sim->add_option("--trace", o.trace, "Trace CSV output");
    sim->add_option("--summary", o.summary, "Summary JSON output (stdout if omitted)");
    sim->add_flag("--check", o.check, "Compare the run with the scenario's [expect] section");

    auto* swp = app.add_subcommand("sweep", "Run the scenario's [sweep] grid");
    swp->add_option("config", o.config, "Scenario file")->required()->check(CLI::ExistingFile);
    swp->add_option("--out", o.out, "Sweep table CSV output")->required();
    swp->add_option("--threads", o.threads, "Parallel runs (0 = hardware concurrency)");

    auto* cal = app.add_subcommand("calibrate", "Solve the calibration equations and write a parameter file");
    cal->add_option("--targets", o.targets, "all, or name[=value],... from sink_current, dos_threshold, "
                                            "tau_bit_5v, pulse_canl, pulse_canh, fra_threshold");
    cal->add_option("--out", o.out, "Parameter JSON output")->required();

    auto* val = app.add_subcommand("validate", "Parse and validate a scenario without running it");
    val->add_option("config", o.config, "Scenario file")->required()->check(CLI::ExistingFile);

    auto* rep = app.add_subcommand("report", "Analytic reports");
    rep->add_option("name", o.report, "Report name")->required()->check(CLI::IsMember({"tau-bit"}));
    rep->add_option("--out", o.out, "CSV output (stdout if omitted)");

    for (auto* sub : {sim, swp, val, rep})
        sub->add_option("--params", o.params, "Parameter file (default: $CANVOLT_PARAMS or the shipped default)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfigError;
    }

    try {
        if (*sim) return simulate(o);
        if (*swp) return sweep(o);
        if (*cal) return calibrate(o);
        if (*val) return validate(o);
        if (*rep) return report(o);
    } catch (const canvolt::ConfigError& e) {
        std::cerr << "config error: " << (o.config.empty() ? "" : o.config + ": ") << e.what() << '\n';
        return kConfigError;
    } catch (const canvolt::InfeasibleTarget& e) {
        std::cerr << "calibration error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntimeError;
    }
    return kOk;
}
