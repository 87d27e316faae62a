#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "dicke_squeeze/cli.hpp"

namespace {

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw dicke::ConfigError("cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
    namespace cli = dicke::cli;
    CLI::App app{"Cavity-mediated spin squeezing of the dissipative Dicke model"};
    app.set_version_flag("--version", std::string(cli::version));
    std::string command, config_path, out_dir;
    int workers = 0;
    bool quiet = false;
    app.add_option("command", command, "evolve | sweep-theta | sweep-n | fit | presets | check-elimination "
                                       "(overrides the config's command)");
    app.add_option("-c,--config", config_path, "JSON run configuration");
    app.add_option("-o,--out", out_dir, "output directory (overrides the config's output)");
    app.add_option("-w,--workers", workers, "concurrent sweep rows (falls back to DICKE_SQUEEZE_WORKERS)")
        ->check(CLI::PositiveNumber);
    app.add_flag("-q,--quiet", quiet, "no progress output");
    CLI11_PARSE(app, argc, argv);

    try {
        if (config_path.empty() && command.empty()) throw dicke::ConfigError("give a command or --config");
        nlohmann::ordered_json root = nlohmann::ordered_json::object();
        if (!config_path.empty()) {
            try {
                root = nlohmann::ordered_json::parse(read_file(config_path));
            } catch (const nlohmann::json::parse_error& e) {
                throw dicke::ConfigError(std::string("malformed JSON: ") + e.what());
            }
            if (!root.is_object()) throw dicke::ConfigError("config: expected a JSON object");
        }
        if (!command.empty()) root["command"] = command;
        cli::RunConfig cfg = cli::parse_config(root);
        if (!out_dir.empty()) cfg.output = out_dir;
        if (workers > 0) {
            cfg.workers = workers;
        } else if (const char* env = std::getenv("DICKE_SQUEEZE_WORKERS"); env && *env) {
            const int w = std::atoi(env);
            if (w < 1) throw dicke::ConfigError("DICKE_SQUEEZE_WORKERS: must be a positive integer");
            cfg.workers = w;
        }
        return cli::run(cfg, quiet ? nullptr : &std::cerr);
    } catch (const dicke::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::exit_usage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::exit_usage;
    }
}
