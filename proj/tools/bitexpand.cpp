// bitexpand: bit-depth expansion from the command line.
//
//   bitexpand <quantize|expand|train|eval|bench> [--config FILE] [--in PATH] [--out PATH]
//             [--method M] [--q N] [--H N] [--checkpoint PATH] [--seed N] [--epochs N]
//             [--threads N] [--set key=value ...]

#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bitexpand/app.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Bit-depth expansion toolkit"};
    app.require_subcommand(0, 0);

    std::string command;
    std::string config_file;
    std::map<std::string, std::string> flags;
    std::vector<std::string> extra;

    app.add_option("command", command, "quantize | expand | train | eval | bench")
        ->required()
        ->check(CLI::IsMember({"quantize", "expand", "train", "eval", "bench"}));
    app.add_option("--config", config_file, "key=value config file; flags override it");
    const std::vector<std::pair<std::string, std::string>> keyed = {
        {"--in", "in"},          {"--out", "out"},       {"--method", "method"},   {"--q", "q"},
        {"--H", "H"},            {"--checkpoint", "checkpoint"},                   {"--seed", "seed"},
        {"--epochs", "epochs"},  {"--threads", "threads"}, {"--lr", "lr"},          {"--resume", "resume"},
        {"--eval-dir", "eval_dir"},
    };
    for (const auto& [flag, key] : keyed) app.add_option(flag, flags[key]);
    app.add_option("--set", extra, "extra key=value settings (repeatable)");

    CLI11_PARSE(app, argc, argv);

    bitexpand::RunConfig cfg;
    try {
        cfg.threads = bitexpand::threads_from_env(1);
        if (!config_file.empty()) bitexpand::apply_config_file(cfg, config_file);
        for (const auto& kv : extra) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw bitexpand::ConfigError("--set expects key=value, got '" + kv + "'");
            bitexpand::apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
        }
        for (const auto& [flag, key] : keyed) {
            if (app.get_option(flag)->count() > 0) bitexpand::apply_setting(cfg, key, flags[key]);
        }
        cfg.command = command;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return bitexpand::run_command(cfg, std::cout, std::cerr);
}
