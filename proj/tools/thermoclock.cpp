#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <optional>
#include <iostream>
#include <sstream>

#include "thermoclock/cli/runner.hpp"
#include "thermoclock/errors.hpp"
#include "thermoclock/random.hpp"

using namespace thermoclock;
using namespace thermoclock::cli;

namespace {

struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string format = "table";
    unsigned parallel = 1;
    std::string axis;
    std::vector<std::string> values;
};

ExperimentConfig load(const Flags& f) {
    if (f.config.empty()) throw ValidationError("config", "no --config given");
    auto c = load_config(f.config);
    if (f.seed) c = c.with("seed", std::to_string(*f.seed));
    return c;
}

int do_run(const Flags& f) {
    const auto c = load(f);
    const auto report = run(c, RunOptions{resolve_out_dir(f.out, c), true});
    if (f.format == "json") std::cout << report_json(report);
    else if (f.format == "csv") std::cout << checks_csv(report);
    else std::cout << summary_table(report);
    return static_cast<int>(report.all_pass() ? Outcome::Pass : Outcome::CheckFailed);
}

int do_sweep(Flags f) {
    std::erase_if(f.values, [](const std::string& v) { return v.find_first_not_of(" \t") == std::string::npos; });
    const auto c = load(f);
    const auto dir = resolve_out_dir(f.out, c);
    const auto res = sweep(c, f.axis, f.values, dir, f.parallel);
    if (f.format == "json") {
        nlohmann::ordered_json j = nlohmann::ordered_json::array();
        for (const auto& p : res.points)
            j.push_back({{"value", p.value},
                         {"outcome", static_cast<int>(p.outcome)},
                         {"error", p.error},
                         {"report", p.error.empty() ? nlohmann::ordered_json::parse(report_json(p.report, false))
                                                    : nlohmann::ordered_json()}});
        std::cout << j.dump(2) << "\n";
    } else if (f.format == "csv") {
        std::ifstream in(dir / "sweep.csv");
        std::cout << in.rdbuf();
    } else {
        std::printf("%-16s %-6s %s\n", res.axis.c_str(), "exit", "result");
        for (const auto& p : res.points) {
            std::size_t passed = 0;
            for (const auto& ck : p.report.checks) passed += ck.pass;
            const std::string what = p.error.empty() ? std::to_string(passed) + "/" +
                                                           std::to_string(p.report.checks.size()) + " checks pass"
                                                     : p.error;
            std::printf("%-16s %-6d %s\n", p.value.c_str(), static_cast<int>(p.outcome), what.c_str());
        }
        std::printf("wrote %s\n", (dir / "sweep.csv").string().c_str());
    }
    return static_cast<int>(res.worst());
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Thermodynamic uncertainty and de Broglie clock experiments"};
    app.require_subcommand(1);
    Flags f;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", f.config, "config file (key = value or JSON)")->required();
        sub->add_option("--seed", f.seed, "override the config seed");
        sub->add_option("--out", f.out, "output directory (default: config out_dir, $THERMOCLOCK_OUT, thermoclock-out)");
        sub->add_option("--format", f.format, "stdout format")->check(CLI::IsMember({"table", "json", "csv"}));
        sub->add_option("--parallel", f.parallel, "worker threads")->check(CLI::Range(1u, 1024u));
    };
    auto* run_cmd = app.add_subcommand("run", "run one experiment");
    add_common(run_cmd);
    auto* sweep_cmd = app.add_subcommand("sweep", "run an experiment over values of one numeric key");
    add_common(sweep_cmd);
    sweep_cmd->add_option("--axis", f.axis, "config key to vary")->required();
    sweep_cmd->add_option("--values", f.values, "values, comma separated")->delimiter(',')->expected(0, -1);
    auto* validate_cmd = app.add_subcommand("validate", "check a config and print it with defaults resolved");
    validate_cmd->add_option("--config", f.config, "config file")->required();
    app.add_subcommand("list-models", "list experiments, models and parameters");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(Outcome::ConfigError);
    }

    try {
        set_thread_count(f.parallel);
        if (app.got_subcommand("list-models")) {
            std::cout << describe_models();
            return 0;
        }
        if (app.got_subcommand("validate")) {
            std::cout << to_text(load(f));
            return 0;
        }
        if (app.got_subcommand("sweep")) return do_sweep(f);
        return do_run(f);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(classify(e));
    }
}
