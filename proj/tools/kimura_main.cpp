#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "kimura/cli.hpp"

int main(int argc, char** argv) {
    namespace cli = kimura::cli;
    CLI::App app{"Stochastic Kimura equation: kernel identities, chaos moments, Monte Carlo, bound ledger"};
    std::string command, config_path, out;
    std::uint64_t seed = 0;
    int threads = 0;
    app.add_option("command", command, "identities | chaos | mc | ratio | holder | bounds | all")
        ->required()
        ->check(CLI::IsMember({"identities", "chaos", "mc", "ratio", "holder", "bounds", "all"}));
    app.add_option("--config", config_path, "flat key=value configuration")->required()->check(CLI::ExistingFile);
    auto* o_out = app.add_option("--out", out, "output directory (overrides out=)");
    auto* o_seed = app.add_option("--seed", seed, "master seed (overrides seed=)");
    auto* o_threads = app.add_option("--threads", threads, "worker threads, 0 = all cores")->check(CLI::NonNegativeNumber);
    CLI11_PARSE(app, argc, argv);

    std::ifstream f(config_path);
    std::stringstream text;
    text << f.rdbuf();
    // command-line values go in as config lines so they pass the same checks
    std::string merged = text.str() + "\n";
    auto strip = [&](const std::string& key) {
        std::istringstream is(merged);
        std::string line, kept;
        while (std::getline(is, line)) {
            const auto eq = line.find('=');
            std::string k = eq == std::string::npos ? "" : line.substr(0, eq);
            k.erase(0, k.find_first_not_of(" \t"));
            k.erase(k.find_last_not_of(" \t") + 1);
            if (k != key) kept += line + "\n";
        }
        merged = kept;
    };
    auto override_key = [&](const std::string& key, const std::string& value) {
        strip(key);
        merged += key + "=" + value + "\n";
    };
    override_key("command", command);
    if (*o_out) override_key("out", out);
    if (*o_seed) override_key("seed", std::to_string(seed));
    if (*o_threads) override_key("threads", std::to_string(threads));

    cli::ExperimentConfig cfg;
    try {
        cfg = cli::parse_config(merged);
    } catch (const cli::ConfigError& e) {
        for (const auto& i : e.issues) std::cerr << "config: " << i << '\n';
        return 2;
    }
    try {
        const cli::RunSummary s = cli::run(cfg);
        std::cout << cli::command_name(cfg.command) << ": " << s.ledger_rows << " ledger rows, " << s.violations
                  << " violations, exit " << s.exit_code << ", outputs in " << cfg.out << '\n';
        return s.exit_code;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
