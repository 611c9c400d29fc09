// bicouple: run inequality experiments from YAML configs.
//
//   bicouple run CONFIG... [--experiment NAME] [--seed N] [--out DIR] [--set key=value]... [--jobs N]
//   bicouple list [--json]
//
// Exit status: 0 when every verdict is holds, degenerate or divergent; 2 when
// some verdict is violated; 1 on any configuration or runtime error.

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "bicouple/cli/config.hpp"
#include "bicouple/cli/registry.hpp"

namespace {

using namespace bicouple;
using namespace bicouple::cli;

struct RunFlags {
    std::vector<std::string> configs;
    std::string experiment;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::vector<std::string> sets;
    unsigned jobs = 1;
};

struct JobResult {
    bool error = false;
    bool violated = false;
    std::string message;
};

JobResult run_one(const RunFlags& flags, const std::string& config_path, bool isolate) {
    JobResult r;
    try {
        RunConfig config = config_path.empty() ? RunConfig{} : load_config(config_path);
        if (!flags.experiment.empty()) config.experiment = flags.experiment;
        if (flags.seed) config.seed = *flags.seed;
        for (const auto& s : flags.sets) apply_override(config, s);
        config = finalize(config);
        if (!flags.out.empty()) {
            std::filesystem::path dir = flags.out;
            if (isolate) dir /= std::filesystem::path(config_path).stem();
            config.output = dir;
        }
        const RunOutcome outcome = run(config);
        const auto& rep = outcome.report;
        r.violated = rep.verdict == Verdict::violated;
        std::ostringstream line;
        line << rep.name << ": " << to_string(rep.verdict) << " (left=" << rep.left << ", right=" << rep.right
             << ", tolerance=" << rep.tolerance << ")";
        for (const auto& f : outcome.files) line << "\n  wrote " << f.string();
        r.message = line.str();
    } catch (const std::exception& e) {
        r.error = true;
        r.message = std::string("error: ") + e.what();
    }
    return r;
}

int list_experiments(bool as_json) {
    if (as_json) {
        nlohmann::json out = nlohmann::json::array();
        for (const auto& e : experiments()) out.push_back(parameter_schema(e));
        std::cout << out.dump(2) << '\n';
        return 0;
    }
    for (const auto& e : experiments()) {
        std::cout << e.name << "\n  " << e.description << '\n';
        for (const auto& p : e.params) {
            std::cout << "    " << p.name << " (" << p.type << ")";
            if (!p.default_value.is_null()) std::cout << " = " << p.default_value.dump();
            else std::cout << " [optional]";
            std::cout << "  " << p.description << '\n';
        }
    }
    return 0;
}

int run_all(const RunFlags& flags) {
    std::vector<std::string> configs = flags.configs;
    if (configs.empty()) {
        if (flags.experiment.empty()) {
            std::cerr << "error: give at least one config file or --experiment\n";
            return 1;
        }
        configs.emplace_back();
    }
    const bool isolate = configs.size() > 1;
    std::vector<JobResult> results(configs.size());
    std::atomic<std::size_t> next{0};
    const unsigned workers = std::max(1U, std::min<unsigned>(flags.jobs, static_cast<unsigned>(configs.size())));
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < configs.size(); i = next++) results[i] = run_one(flags, configs[i], isolate);
        });
    for (auto& t : pool) t.join();

    int status = 0;
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        if (r.error) {
            std::cerr << (configs[i].empty() ? std::string("--experiment") : configs[i]) << ": " << r.message << '\n';
            status = 1;
        } else {
            std::cout << r.message << '\n';
            if (r.violated && status == 0) status = 2;
        }
    }
    return status;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Diffusion coupling and entropy inequality laboratory"};
    app.require_subcommand(1);

    RunFlags flags;
    auto* run_cmd = app.add_subcommand("run", "run experiments from YAML config files");
    run_cmd->add_option("configs", flags.configs, "config files")->check(CLI::ExistingFile);
    run_cmd->add_option("--experiment", flags.experiment, "experiment name (overrides the config)");
    run_cmd->add_option("--seed", flags.seed, "master seed (overrides the config)");
    run_cmd->add_option("--out", flags.out, "output directory (one subdirectory per config when several)");
    run_cmd->add_option("--set", flags.sets, "parameter override key=value (repeatable)");
    run_cmd->add_option("--jobs", flags.jobs, "configs run concurrently")->check(CLI::PositiveNumber);

    bool as_json = false;
    auto* list_cmd = app.add_subcommand("list", "list experiments and their parameters");
    list_cmd->add_flag("--json", as_json, "machine-readable parameter schemas");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 1;
    }
    if (*list_cmd) return list_experiments(as_json);
    return run_all(flags);
}
