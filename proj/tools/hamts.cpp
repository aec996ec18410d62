#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "hamts/hamts.hpp"

namespace {

// Exit codes: 0 success, 2 config error, 3 numerical failure,
// 4 classification inconclusive.
constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitInconclusive = 4;

int emit(const hamts::Report& rep, const std::string& out_path) {
    std::string payload = rep.is_csv ? rep.csv : rep.body.dump(2) + "\n";
    if (out_path.empty() || out_path == "-") {
        std::cout << payload;
    } else {
        std::ofstream out(out_path, std::ios::binary);
        if (!out) {
            std::cerr << "error: cannot write " << out_path << "\n";
            return kExitConfig;
        }
        out << payload;
    }
    return kExitOk;
}

int run_command(const std::string& command, const std::string& config_path,
                const std::string& out_path, const std::string& format, int parallel) {
    hamts::ProblemConfig cfg = hamts::load_config(config_path);
    if (!format.empty()) cfg.output.format = format;
    if (parallel > 0) cfg.solver.parallel = parallel;
    if (!out_path.empty()) cfg.output.path = out_path;
    hamts::Problem problem = hamts::build_problem(cfg);
    hamts::Report rep = hamts::run(command, problem);
    int rc = emit(rep, cfg.output.path);
    if (rc != kExitOk) return rc;
    if (command == "verify" && !rep.all_pass) return kExitNumerical;
    if (command == "classify" && !rep.all_pass) return kExitInconclusive;
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Weyl-Titchmarsh solver for linear Hamiltonian nabla systems on Sturmian "
                 "time scales"};
    app.require_subcommand(1);
    app.fallthrough();  // hamts <command> --config ... : flags follow the command

    std::string config_path, out_path, format;
    int parallel = 0;
    app.add_option("--config", config_path, "problem configuration (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    app.add_option("--out", out_path, "output path (default: stdout)");
    app.add_option("--format", format, "json or csv")
        ->check(CLI::IsMember({"json", "csv"}));
    app.add_option("--parallel", parallel, "worker threads for scans and b-sweeps");

    app.add_subcommand("eig", "regular eigenvalues on [rho(t0), horizon]");
    app.add_subcommand("weyl-trace", "Weyl disk trace over the b-list");
    app.add_subcommand("classify", "limit point / limit circle classification");
    app.add_subcommand("verify", "run the residual identity suite");

    CLI11_PARSE(app, argc, argv);
    std::string command = app.get_subcommands().front()->get_name();

    try {
        return run_command(command, config_path, out_path, format, parallel);
    } catch (const hamts::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const hamts::ValidationError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const hamts::InconclusiveError& e) {
        std::cerr << "inconclusive: " << e.what() << "\n";
        return kExitInconclusive;
    } catch (const hamts::Error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    }
}
