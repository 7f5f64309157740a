#pragma once

#include "qflux/rational.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace qflux::experiments {

inline constexpr const char* tool_version = "0.1.0";

enum class ScenarioKind {
    global_ft,
    crooks_added,
    crooks_subtracted,
    crooks_binomial_align,
    crooks_binomial_size,
    jarzynski,
    figure2,
    figure3,
    figure4,
    harmonic_limit,
};

std::string to_string(ScenarioKind kind);
ScenarioKind parse_kind(const std::string& text);
bool is_stochastic(ScenarioKind kind);
const std::vector<ScenarioKind>& all_kinds();

struct Cutoffs {
    // 0 selects the cutoff adaptively from tail_tol.
    std::size_t system = 0;
    std::size_t ladder = 0;
    double tail_tol = 1e-10;
    std::size_t max_dim = 256;
};

struct ScenarioConfig {
    ScenarioKind kind = ScenarioKind::figure2;
    Rational omega_i{1};
    std::vector<Rational> omega_f;
    std::vector<double> chi;
    std::vector<double> work;
    std::vector<double> p;
    std::vector<double> p_f;
    std::vector<std::size_t> n;
    std::vector<std::size_t> n_f;
    std::vector<double> lambda;
    std::optional<Rational> spacing;
    std::optional<std::uint64_t> seed;
    std::size_t cases = 0;
    Cutoffs cutoffs;
    double tolerance = 0.0;
    std::string out;

    static ScenarioConfig defaults(ScenarioKind kind);
    // Missing fields fall back to defaults(kind); schema violations raise ConfigError.
    static ScenarioConfig from_json(const nlohmann::json& j, std::optional<ScenarioKind> expected = std::nullopt);
    static ScenarioConfig load(const std::string& path, std::optional<ScenarioKind> expected = std::nullopt);
    nlohmann::json to_json() const;
    void validate() const;
};

struct CaseRecord {
    std::string key;
    std::map<std::string, double> inputs;
    double simulated = 0.0;
    double closed_form = 0.0;
    double abs_dev = 0.0;
    double rel_dev = 0.0;
    // "abs" or "rel": which deviation is held against the tolerance.
    std::string metric = "abs";
    double tolerance = 0.0;
    // Diagnostics are reported but do not decide the outcome.
    bool informational = false;
    bool pass = false;

    double deviation() const { return metric == "rel" ? rel_dev : abs_dev; }
};

CaseRecord make_case(std::string key, std::map<std::string, double> inputs, double simulated, double closed_form,
                     const std::string& metric, double tolerance, bool informational = false);

struct VerificationReport {
    std::string kind;
    std::vector<CaseRecord> cases;
    nlohmann::json provenance;
    std::vector<std::string> files;

    std::size_t n_pass() const;
    std::size_t n_fail() const;
    bool passed() const { return n_fail() == 0; }
    double max_abs_dev() const;
    double max_rel_dev() const;
    const CaseRecord* find(const std::string& key) const;

    void sort_cases();
    // Replaces every tolerance and recomputes the pass flags.
    void override_tolerance(double tol);
    nlohmann::json to_json() const;
};

VerificationReport run_scenario(const ScenarioConfig& config);

struct VerifyOptions {
    std::uint64_t seed = 20240101;
    double budget_seconds = 600.0;
    std::optional<double> tolerance;
    std::string out;
};

struct AggregateReport {
    std::vector<VerificationReport> reports;

    bool passed() const;
    nlohmann::json to_json() const;
};

AggregateReport verify_all(const VerifyOptions& options);

// Curve output helpers, shared with the self-consistency checks.
std::string format_double(double x);
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};
void write_csv(const std::string& path, const CsvTable& table);
CsvTable read_csv(const std::string& path);
void write_text(const std::string& path, const std::string& text);

std::vector<double> logspace(double lo, double hi, std::size_t count);
std::size_t max_dim_from_env(std::size_t fallback = 256);

// Exit code for an exception escaping a command: 2 config, 3 numeric/domain.
int exit_code_for(const std::exception& e);

}  // namespace qflux::experiments
