#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mqbqr/config.hpp"

int main(int argc, char** argv) {
    CLI::App app{"mqbqr: multiport quadratic boost converter modeling lab"};
    app.require_subcommand(1);

    std::string validate_path;
    auto* validate = app.add_subcommand("validate", "Check a run configuration without running it");
    validate->add_option("config", validate_path, "Path to the JSON configuration")->required();

    std::string run_path;
    auto* run = app.add_subcommand("run", "Run the scenario described by a configuration");
    run->add_option("config", run_path, "Path to the JSON configuration")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : mqbqr::config::kValidationFailure;
    }

    if (*validate) {
        const auto issues = mqbqr::config::validate(validate_path);
        for (const auto& i : issues) std::cerr << "error: " << i.path << ": " << i.message << "\n";
        if (!issues.empty()) return mqbqr::config::kValidationFailure;
        std::cout << "ok\n";
        return mqbqr::config::kOk;
    }
    return mqbqr::config::run(run_path);
}
