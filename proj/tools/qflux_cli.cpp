#include "qflux/errors.hpp"
#include "qflux/experiments.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace ex = qflux::experiments;

namespace {

struct CommonOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::optional<double> tolerance;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool needs_config) {
    auto* cfg = cmd->add_option("--config", o.config, "scenario config (JSON)")->check(CLI::ExistingFile);
    if (needs_config) {
        cfg->required();
    }
    cmd->add_option("--seed", o.seed, "seed for stochastic scenarios");
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--tolerance", o.tolerance, "override every case tolerance");
}

void print_report(const ex::VerificationReport& r) {
    std::cout << (r.passed() ? "PASS " : "FAIL ") << r.kind << ": " << r.n_pass() << " passed, " << r.n_fail()
              << " failed, max abs dev " << ex::format_double(r.max_abs_dev()) << ", max rel dev "
              << ex::format_double(r.max_rel_dev()) << '\n';
    for (const auto& c : r.cases) {
        if (!c.informational && !c.pass) {
            std::cout << "  failed " << c.key << ": simulated " << ex::format_double(c.simulated) << ", expected "
                      << ex::format_double(c.closed_form) << ", " << c.metric << " dev "
                      << ex::format_double(c.deviation()) << " > " << ex::format_double(c.tolerance) << '\n';
        }
    }
}

int run_one(std::optional<ex::ScenarioKind> kind, const CommonOptions& o, const std::string& default_out) {
    ex::ScenarioConfig c = o.config.empty() ? ex::ScenarioConfig::defaults(*kind) : ex::ScenarioConfig::load(o.config, kind);
    if (o.seed) {
        c.seed = *o.seed;
    }
    if (!o.out.empty()) {
        c.out = o.out;
    } else if (c.out.empty()) {
        c.out = default_out;
    }
    ex::VerificationReport r = ex::run_scenario(c);
    if (o.tolerance) {
        r.override_tolerance(*o.tolerance);
        ex::write_text((std::filesystem::path(c.out) / (r.kind + "_report.json")).string(), r.to_json().dump(2) + "\n");
    }
    print_report(r);
    for (const auto& f : r.files) {
        std::cout << "  wrote " << f << '\n';
    }
    return r.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fluctuation relations for athermal systems and coherent batteries"};
    app.set_version_flag("--version", ex::tool_version);
    app.require_subcommand(1);

    CommonOptions fig2, fig3, fig4, sweep, jarz;
    add_common(app.add_subcommand("figure2", "generalised free energies vs chi"), fig2, false);
    add_common(app.add_subcommand("figure3", "predicted Crooks ratio and prefactor vs chi"), fig3, false);
    add_common(app.add_subcommand("figure4", "quantum distortion factors vs chi"), fig4, false);
    add_common(app.add_subcommand("sweep", "run any scenario from a config file"), sweep, true);
    add_common(app.add_subcommand("jarzynski", "photon added/subtracted Jarzynski check"), jarz, false);

    auto* verify = app.add_subcommand("verify", "run every verification suite");
    std::uint64_t verify_seed = ex::VerifyOptions{}.seed;
    double budget = ex::VerifyOptions{}.budget_seconds;
    std::string verify_out;
    std::optional<double> verify_tol;
    verify->add_option("--seed", verify_seed, "base seed");
    verify->add_option("--budget", budget, "time budget in seconds");
    verify->add_option("--out", verify_out, "output directory");
    verify->add_option("--tolerance", verify_tol, "override every case tolerance");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand("figure2")) {
            return run_one(ex::ScenarioKind::figure2, fig2, ".");
        }
        if (app.got_subcommand("figure3")) {
            return run_one(ex::ScenarioKind::figure3, fig3, ".");
        }
        if (app.got_subcommand("figure4")) {
            return run_one(ex::ScenarioKind::figure4, fig4, ".");
        }
        if (app.got_subcommand("jarzynski")) {
            return run_one(ex::ScenarioKind::jarzynski, jarz, ".");
        }
        if (app.got_subcommand("sweep")) {
            return run_one(std::nullopt, sweep, ".");
        }
        ex::VerifyOptions opts;
        opts.seed = verify_seed;
        opts.budget_seconds = budget;
        opts.tolerance = verify_tol;
        opts.out = verify_out;
        const ex::AggregateReport agg = ex::verify_all(opts);
        for (const auto& r : agg.reports) {
            print_report(r);
        }
        if (!verify_out.empty()) {
            const std::string path = (std::filesystem::path(verify_out) / "verify_report.json").string();
            ex::write_text(path, agg.to_json().dump(2) + "\n");
            std::cout << "wrote " << path << '\n';
        }
        std::cout << (agg.passed() ? "ALL PASS" : "FAILURES PRESENT") << '\n';
        return agg.passed() ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return ex::exit_code_for(e);
    }
}
