#include <iostream>

#include "CLI11.hpp"
#include "eclipse/cli.hpp"

using namespace eclipse;

namespace {

struct Common {
    std::string scenario;
    std::string seeds;
    std::string out;
    bool ping_blacklist = false;
    bool no_rate_limit = false;
    int dns_cap = 0;
    unsigned jobs = 0;
    bool quiet = false;
    int verbose = 0;
    CLI::Option* seeds_opt = nullptr;

    std::vector<std::uint64_t> seed_list(const ScenarioProfile& p) const {
        return seeds_opt->count() ? parse_seeds(seeds) : default_seeds(p);
    }
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--scenario", c.scenario, "scenario JSON file")->check(CLI::ExistingFile);
    c.seeds_opt = cmd->add_option("--seeds", c.seeds, "seed list, e.g. 1,2,5-8 (default: the scenario's trials)");
    cmd->add_option("--out", c.out, "directory for CSV/JSON/table output");
    cmd->add_flag("--ping-blacklist", c.ping_blacklist, "enable the ping-rate blacklist on the target");
    cmd->add_flag("--no-rate-limit", c.no_rate_limit, "disable the 30 s inbound rate limit");
    cmd->add_option("--dns-cap", c.dns_cap, "cap published DNS entries per IP")->check(CLI::PositiveNumber);
    cmd->add_option("-j,--jobs", c.jobs, "trial worker threads (default: one per core)");
    cmd->add_flag("-q,--quiet", c.quiet, "do not print the table");
    cmd->add_flag("-v,--verbose", c.verbose, "print the aggregate JSON too");
}

Scenario resolve(const Common& c) {
    Scenario s = c.scenario.empty() ? Scenario{} : load_scenario(c.scenario);
    s.jobs = c.jobs;
    if (c.ping_blacklist) s.profile.ping_blacklist = true;
    if (c.no_rate_limit) s.profile.rate_limit = false;
    if (c.dns_cap > 0) {
        s.profile.dns_defenses.enabled = true;
        s.profile.dns_defenses.per_ip_cap = static_cast<std::size_t>(c.dns_cap);
    }
    return s;
}

void emit(const RunOutput& o, const Common& c) {
    if (!c.out.empty()) write_outputs(o, c.out);
    if (!c.quiet) std::cout << o.table;
    if (c.verbose) std::cout << o.aggregate.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Discovery and connection-management simulator with eclipse attack experiments"};
    app.require_subcommand(1);

    Common run_opts;
    std::string experiment;
    auto* run = app.add_subcommand("run", "run one experiment");
    run->add_option("-e,--experiment", experiment, "experiment name")
        ->required()
        ->check(CLI::IsMember(experiment_names()));
    add_common(run, run_opts);

    Common sweep_opts;
    std::string param, values;
    auto* sweep = app.add_subcommand("sweep", "sweep one parameter");
    sweep->add_option("--param", param, "parameter")->required()->check(CLI::IsMember(sweep_params()));
    sweep->add_option("--values", values, "comma-separated values")->required();
    add_common(sweep, sweep_opts);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            const auto s = resolve(run_opts);
            emit(run_experiment(experiment, s, run_opts.seed_list(s.profile)), run_opts);
        } else {
            const auto s = resolve(sweep_opts);
            emit(run_sweep(param, parse_values(values), s, sweep_opts.seed_list(s.profile)), sweep_opts);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
