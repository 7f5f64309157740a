#include "qflux/experiments.hpp"

#include "qflux/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

namespace qflux::experiments {

namespace {

using nlohmann::json;

struct KindName {
    ScenarioKind kind;
    const char* name;
};

constexpr KindName kind_names[] = {
    {ScenarioKind::global_ft, "global-ft"},
    {ScenarioKind::crooks_added, "crooks-added"},
    {ScenarioKind::crooks_subtracted, "crooks-subtracted"},
    {ScenarioKind::crooks_binomial_align, "crooks-binomial-align"},
    {ScenarioKind::crooks_binomial_size, "crooks-binomial-size"},
    {ScenarioKind::jarzynski, "jarzynski"},
    {ScenarioKind::figure2, "figure2"},
    {ScenarioKind::figure3, "figure3"},
    {ScenarioKind::figure4, "figure4"},
    {ScenarioKind::harmonic_limit, "harmonic-limit"},
};

double json_number(const json& v, const std::string& field) {
    if (!v.is_number()) {
        throw ConfigError("field '" + field + "' must be a number");
    }
    return v.get<double>();
}

std::size_t json_count(const json& v, const std::string& field) {
    if (!v.is_number_integer() || v.get<long long>() < 0) {
        throw ConfigError("field '" + field + "' must be a non-negative integer");
    }
    return v.get<std::size_t>();
}

Rational json_rational(const json& v, const std::string& field) {
    if (v.is_string()) {
        return Rational::parse(v.get<std::string>());
    }
    if (v.is_number_integer()) {
        return Rational(v.get<std::int64_t>());
    }
    if (v.is_number()) {
        const auto r = Rational::from_double(v.get<double>());
        if (!r) {
            throw ConfigError("field '" + field + "' is not a rational with denominator <= 64");
        }
        return *r;
    }
    throw ConfigError("field '" + field + "' must be a rational (\"p/q\" or number)");
}

// A list, a scalar, or {"logspace": [lo, hi, count]}.
std::vector<double> json_grid(const json& v, const std::string& field) {
    if (v.is_number()) {
        return {v.get<double>()};
    }
    if (v.is_object()) {
        if (v.size() != 1 || !v.contains("logspace")) {
            throw ConfigError("field '" + field + "' object must be {\"logspace\": [lo, hi, count]}");
        }
        const json& a = v.at("logspace");
        if (!a.is_array() || a.size() != 3) {
            throw ConfigError("field '" + field + "': logspace needs [lo, hi, count]");
        }
        const double lo = json_number(a[0], field), hi = json_number(a[1], field);
        const std::size_t count = json_count(a[2], field);
        if (!(lo > 0.0) || !(hi >= lo) || count == 0) {
            throw ConfigError("field '" + field + "': logspace needs 0 < lo <= hi and count >= 1");
        }
        return logspace(lo, hi, count);
    }
    if (!v.is_array()) {
        throw ConfigError("field '" + field + "' must be a number, list or logspace object");
    }
    std::vector<double> out;
    for (const json& e : v) {
        out.push_back(json_number(e, field));
    }
    return out;
}

std::vector<std::size_t> json_counts(const json& v, const std::string& field) {
    if (!v.is_array()) {
        return {json_count(v, field)};
    }
    std::vector<std::size_t> out;
    for (const json& e : v) {
        out.push_back(json_count(e, field));
    }
    return out;
}

void require_nonempty(bool empty, const char* field, ScenarioKind kind) {
    if (empty) {
        throw ConfigError(std::string("grid '") + field + "' is empty for " + to_string(kind));
    }
}

}  // namespace

std::string to_string(ScenarioKind kind) {
    for (const auto& kn : kind_names) {
        if (kn.kind == kind) {
            return kn.name;
        }
    }
    return "unknown";
}

ScenarioKind parse_kind(const std::string& text) {
    for (const auto& kn : kind_names) {
        if (text == kn.name) {
            return kn.kind;
        }
    }
    throw ConfigError("unknown scenario kind '" + text + "'");
}

bool is_stochastic(ScenarioKind kind) {
    switch (kind) {
    case ScenarioKind::global_ft:
    case ScenarioKind::crooks_added:
    case ScenarioKind::crooks_subtracted:
    case ScenarioKind::crooks_binomial_align:
    case ScenarioKind::crooks_binomial_size:
    case ScenarioKind::jarzynski:
        return true;
    default:
        return false;
    }
}

const std::vector<ScenarioKind>& all_kinds() {
    static const std::vector<ScenarioKind> kinds = [] {
        std::vector<ScenarioKind> k;
        for (const auto& kn : kind_names) {
            k.push_back(kn.kind);
        }
        return k;
    }();
    return kinds;
}

// ---------------------------------------------------------------- config

ScenarioConfig ScenarioConfig::defaults(ScenarioKind kind) {
    ScenarioConfig c;
    c.kind = kind;
    c.cutoffs.max_dim = max_dim_from_env();
    switch (kind) {
    case ScenarioKind::global_ft:
        c.omega_f = {Rational(1), Rational(3, 2), Rational(2), Rational(3)};
        c.chi = {0.05, 3.0};
        c.seed = 1;
        c.cases = 200;
        c.cutoffs.system = 12;
        c.cutoffs.ladder = 24;
        c.tolerance = 1e-8;
        break;
    case ScenarioKind::crooks_added:
    case ScenarioKind::crooks_subtracted:
        c.omega_f = {Rational(3, 2), Rational(2), Rational(5)};
        c.chi = {0.1, 0.5, 1.0, 2.0};
        c.seed = 2;
        c.cases = 64;
        c.cutoffs.ladder = 32;
        c.tolerance = 1e-6;
        break;
    case ScenarioKind::crooks_binomial_align:
        c.omega_f = {Rational(1), Rational(2)};
        c.chi = {0.1, 0.5, 1.0, 2.0};
        c.p = {0.2, 0.5, 0.9};
        c.p_f = {0.3, 0.7, 1.0};
        c.n = {4};
        c.spacing = Rational(1, 2);
        c.seed = 3;
        c.cutoffs.system = 3;
        c.tolerance = 1e-6;
        break;
    case ScenarioKind::crooks_binomial_size:
        c.omega_f = {Rational(1), Rational(2)};
        c.chi = {0.1, 0.5, 1.0, 2.0};
        c.p = {0.3, 0.7, 1.0};
        c.n = {2, 5};
        c.n_f = {4, 7};
        c.spacing = Rational(1, 2);
        c.seed = 4;
        c.cutoffs.system = 3;
        c.tolerance = 1e-6;
        break;
    case ScenarioKind::jarzynski:
        c.omega_f = {Rational(3, 2), Rational(2)};
        c.chi = {1.0, 2.0};
        c.seed = 5;
        c.tolerance = 1e-6;
        break;
    case ScenarioKind::figure2:
        c.omega_f = {Rational(3, 2)};
        c.chi = logspace(0.01, 4.0, 80);
        c.tolerance = 1e-12;
        break;
    case ScenarioKind::figure3:
        c.omega_f = {Rational(5)};
        c.chi = logspace(0.01, 4.0, 80);
        c.work = {0.0, 2.0};
        c.tolerance = 1e-12;
        break;
    case ScenarioKind::figure4:
        c.chi = logspace(0.01, 10.0, 80);
        c.p = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
        c.p_f = {0.8};
        c.tolerance = 1e-10;
        break;
    case ScenarioKind::harmonic_limit:
        c.chi = {0.1, 0.5, 1.0, 2.0, 5.0};
        c.n = {8, 32, 128};
        c.n_f = {10000};
        c.lambda = {1.0, 2.0};
        c.tolerance = 1e-3;
        break;
    }
    return c;
}

ScenarioConfig ScenarioConfig::from_json(const json& j, std::optional<ScenarioKind> expected) {
    if (!j.is_object()) {
        throw ConfigError("config must be a JSON object");
    }
    std::optional<ScenarioKind> kind = expected;
    if (j.contains("kind")) {
        if (!j.at("kind").is_string()) {
            throw ConfigError("field 'kind' must be a string");
        }
        const ScenarioKind k = parse_kind(j.at("kind").get<std::string>());
        if (expected && *expected != k) {
            throw ConfigError("config kind '" + to_string(k) + "' does not match command '" + to_string(*expected) + "'");
        }
        kind = k;
    }
    if (!kind) {
        throw ConfigError("config has no 'kind'");
    }
    ScenarioConfig c = defaults(*kind);
    for (const auto& [field, v] : j.items()) {
        if (field == "kind") {
            continue;
        } else if (field == "omega_i") {
            c.omega_i = json_rational(v, field);
        } else if (field == "omega_f") {
            c.omega_f.clear();
            if (v.is_array()) {
                for (const json& e : v) {
                    c.omega_f.push_back(json_rational(e, field));
                }
            } else {
                c.omega_f.push_back(json_rational(v, field));
            }
        } else if (field == "spacing") {
            c.spacing = json_rational(v, field);
        } else if (field == "chi") {
            c.chi = json_grid(v, field);
        } else if (field == "work") {
            c.work = json_grid(v, field);
        } else if (field == "p") {
            c.p = json_grid(v, field);
        } else if (field == "p_f") {
            c.p_f = json_grid(v, field);
        } else if (field == "lambda") {
            c.lambda = json_grid(v, field);
        } else if (field == "n") {
            c.n = json_counts(v, field);
        } else if (field == "n_f") {
            c.n_f = json_counts(v, field);
        } else if (field == "seed") {
            if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
                throw ConfigError("field 'seed' must be a non-negative integer");
            }
            c.seed = v.get<std::uint64_t>();
        } else if (field == "cases") {
            c.cases = json_count(v, field);
        } else if (field == "tolerance") {
            c.tolerance = json_number(v, field);
        } else if (field == "out") {
            if (!v.is_string()) {
                throw ConfigError("field 'out' must be a string");
            }
            c.out = v.get<std::string>();
        } else if (field == "cutoffs") {
            if (!v.is_object()) {
                throw ConfigError("field 'cutoffs' must be an object");
            }
            for (const auto& [cf, cv] : v.items()) {
                if (cf == "system") {
                    c.cutoffs.system = json_count(cv, "cutoffs.system");
                } else if (cf == "ladder") {
                    c.cutoffs.ladder = json_count(cv, "cutoffs.ladder");
                } else if (cf == "tail_tol") {
                    c.cutoffs.tail_tol = json_number(cv, "cutoffs.tail_tol");
                } else {
                    throw ConfigError("unknown field 'cutoffs." + cf + "'");
                }
            }
        } else {
            throw ConfigError("unknown field '" + field + "'");
        }
    }
    c.validate();
    return c;
}

ScenarioConfig ScenarioConfig::load(const std::string& path, std::optional<ScenarioKind> expected) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read config '" + path + "'");
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
    }
    return from_json(j, expected);
}

void ScenarioConfig::validate() const {
    if (omega_i.num() <= 0) {
        throw ConfigError("omega_i must be positive");
    }
    for (const Rational& r : omega_f) {
        if (r.num() <= 0) {
            throw ConfigError("omega_f must be positive");
        }
    }
    if (spacing && spacing->num() <= 0) {
        throw ConfigError("spacing must be positive");
    }
    for (double x : chi) {
        if (!(x > 0.0) || !std::isfinite(x)) {
            throw ConfigError("chi values must be positive");
        }
    }
    for (const auto* grid : {&p, &p_f}) {
        for (double x : *grid) {
            if (!(x >= 0.0 && x <= 1.0)) {
                throw ConfigError("p values must lie in [0, 1]");
            }
        }
    }
    if (!(cutoffs.tail_tol > 0.0)) {
        throw ConfigError("cutoffs.tail_tol must be positive");
    }
    if (cutoffs.system > cutoffs.max_dim || cutoffs.ladder > cutoffs.max_dim) {
        throw ConfigError("cutoffs exceed the maximum dimension " + std::to_string(cutoffs.max_dim));
    }
    if (is_stochastic(kind) && !seed) {
        throw ConfigError("scenario " + to_string(kind) + " needs a seed");
    }
    require_nonempty(chi.empty(), "chi", kind);
    switch (kind) {
    case ScenarioKind::global_ft:
        require_nonempty(omega_f.empty(), "omega_f", kind);
        if (cases == 0) {
            throw ConfigError("global-ft needs cases >= 1");
        }
        if (cutoffs.system < 2 || cutoffs.ladder < 3) {
            throw ConfigError("global-ft needs cutoffs.system >= 2 and cutoffs.ladder >= 3");
        }
        break;
    case ScenarioKind::crooks_added:
    case ScenarioKind::crooks_subtracted:
    case ScenarioKind::jarzynski:
    case ScenarioKind::figure2:
        require_nonempty(omega_f.empty(), "omega_f", kind);
        break;
    case ScenarioKind::figure3:
        require_nonempty(omega_f.empty(), "omega_f", kind);
        require_nonempty(work.empty(), "work", kind);
        break;
    case ScenarioKind::crooks_binomial_align:
        require_nonempty(omega_f.empty(), "omega_f", kind);
        require_nonempty(p.empty(), "p", kind);
        require_nonempty(p_f.empty(), "p_f", kind);
        require_nonempty(n.empty(), "n", kind);
        break;
    case ScenarioKind::crooks_binomial_size:
        require_nonempty(omega_f.empty(), "omega_f", kind);
        require_nonempty(p.empty(), "p", kind);
        require_nonempty(n.empty(), "n", kind);
        require_nonempty(n_f.empty(), "n_f", kind);
        break;
    case ScenarioKind::figure4:
        require_nonempty(p.empty(), "p", kind);
        require_nonempty(p_f.empty(), "p_f", kind);
        break;
    case ScenarioKind::harmonic_limit:
        require_nonempty(n.empty(), "n", kind);
        require_nonempty(n_f.empty(), "n_f", kind);
        require_nonempty(lambda.empty(), "lambda", kind);
        break;
    }
}

json ScenarioConfig::to_json() const {
    json j;
    j["kind"] = to_string(kind);
    j["omega_i"] = omega_i.str();
    json wf = json::array();
    for (const Rational& r : omega_f) {
        wf.push_back(r.str());
    }
    j["omega_f"] = wf;
    if (spacing) {
        j["spacing"] = spacing->str();
    }
    j["chi"] = chi;
    if (!work.empty()) j["work"] = work;
    if (!p.empty()) j["p"] = p;
    if (!p_f.empty()) j["p_f"] = p_f;
    if (!n.empty()) j["n"] = n;
    if (!n_f.empty()) j["n_f"] = n_f;
    if (!lambda.empty()) j["lambda"] = lambda;
    if (seed) {
        j["seed"] = *seed;
    }
    if (cases) {
        j["cases"] = cases;
    }
    j["cutoffs"] = {{"system", cutoffs.system}, {"ladder", cutoffs.ladder}, {"tail_tol", cutoffs.tail_tol}};
    j["tolerance"] = tolerance;
    return j;
}

// ---------------------------------------------------------------- reports

CaseRecord make_case(std::string key, std::map<std::string, double> inputs, double simulated, double closed_form,
                     const std::string& metric, double tolerance, bool informational) {
    CaseRecord c;
    c.key = std::move(key);
    c.inputs = std::move(inputs);
    c.simulated = simulated;
    c.closed_form = closed_form;
    c.abs_dev = std::abs(simulated - closed_form);
    c.rel_dev = closed_form != 0.0 ? c.abs_dev / std::abs(closed_form) : c.abs_dev;
    c.metric = metric;
    c.tolerance = tolerance;
    c.informational = informational;
    c.pass = c.deviation() <= tolerance;
    return c;
}

std::size_t VerificationReport::n_pass() const {
    return static_cast<std::size_t>(
        std::count_if(cases.begin(), cases.end(), [](const CaseRecord& c) { return !c.informational && c.pass; }));
}

std::size_t VerificationReport::n_fail() const {
    return static_cast<std::size_t>(
        std::count_if(cases.begin(), cases.end(), [](const CaseRecord& c) { return !c.informational && !c.pass; }));
}

double VerificationReport::max_abs_dev() const {
    double m = 0.0;
    for (const CaseRecord& c : cases) {
        if (!c.informational) {
            m = std::max(m, c.abs_dev);
        }
    }
    return m;
}

double VerificationReport::max_rel_dev() const {
    double m = 0.0;
    for (const CaseRecord& c : cases) {
        if (!c.informational) {
            m = std::max(m, c.rel_dev);
        }
    }
    return m;
}

const CaseRecord* VerificationReport::find(const std::string& key) const {
    for (const CaseRecord& c : cases) {
        if (c.key == key) {
            return &c;
        }
    }
    return nullptr;
}

void VerificationReport::sort_cases() {
    std::sort(cases.begin(), cases.end(), [](const CaseRecord& a, const CaseRecord& b) { return a.key < b.key; });
}

void VerificationReport::override_tolerance(double tol) {
    for (CaseRecord& c : cases) {
        c.tolerance = tol;
        c.pass = c.deviation() <= tol;
    }
}

json VerificationReport::to_json() const {
    std::vector<const CaseRecord*> sorted;
    for (const CaseRecord& c : cases) {
        sorted.push_back(&c);
    }
    std::sort(sorted.begin(), sorted.end(), [](const CaseRecord* a, const CaseRecord* b) { return a->key < b->key; });
    json jc = json::array();
    for (const CaseRecord* c : sorted) {
        jc.push_back({{"key", c->key},
                      {"inputs", c->inputs},
                      {"simulated", c->simulated},
                      {"closed_form", c->closed_form},
                      {"abs_dev", c->abs_dev},
                      {"rel_dev", c->rel_dev},
                      {"metric", c->metric},
                      {"tolerance", c->tolerance},
                      {"informational", c->informational},
                      {"pass", c->pass}});
    }
    json j;
    j["kind"] = kind;
    j["cases"] = jc;
    j["summary"] = {{"n_pass", n_pass()},
                    {"n_fail", n_fail()},
                    {"n_informational", cases.size() - n_pass() - n_fail()},
                    {"max_abs_dev", max_abs_dev()},
                    {"max_rel_dev", max_rel_dev()},
                    {"passed", passed()}};
    j["provenance"] = provenance;
    j["files"] = files;
    return j;
}

bool AggregateReport::passed() const {
    return std::all_of(reports.begin(), reports.end(), [](const VerificationReport& r) { return r.passed(); });
}

json AggregateReport::to_json() const {
    json j;
    json suites = json::object();
    std::size_t pass = 0, fail = 0;
    for (const VerificationReport& r : reports) {
        suites[r.kind] = r.to_json();
        pass += r.n_pass();
        fail += r.n_fail();
    }
    j["suites"] = suites;
    j["summary"] = {{"n_pass", pass}, {"n_fail", fail}, {"passed", passed()}};
    j["version"] = tool_version;
    return j;
}

AggregateReport verify_all(const VerifyOptions& options) {
    using clock = std::chrono::steady_clock;
    const auto start = clock::now();
    AggregateReport agg;
    std::uint64_t salt = 0;
    for (ScenarioKind kind : all_kinds()) {
        ScenarioConfig c = ScenarioConfig::defaults(kind);
        if (c.seed) {
            c.seed = options.seed + salt;
        }
        ++salt;
        c.out = options.out.empty() ? "" : (std::filesystem::path(options.out) / to_string(kind)).string();
        VerificationReport r = run_scenario(c);
        if (options.tolerance) {
            r.override_tolerance(*options.tolerance);
        }
        agg.reports.push_back(std::move(r));
        const double elapsed = std::chrono::duration<double>(clock::now() - start).count();
        if (elapsed > options.budget_seconds) {
            throw BudgetExceeded("verify_all: " + std::to_string(elapsed) + " s exceeds budget of " +
                                 std::to_string(options.budget_seconds) + " s after " + to_string(kind));
        }
    }
    return agg;
}

// ---------------------------------------------------------------- files

std::string format_double(double x) {
    if (std::isnan(x)) {
        return "nan";
    }
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void write_csv(const std::string& path, const CsvTable& table) {
    std::ostringstream os;
    for (std::size_t c = 0; c < table.header.size(); ++c) {
        os << (c ? "," : "") << table.header[c];
    }
    os << '\n';
    for (const auto& row : table.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            os << (c ? "," : "") << format_double(row[c]);
        }
        os << '\n';
    }
    write_text(path, os.str());
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read '" + path + "'");
    }
    CsvTable t;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) {
            if (first) {
                t.header.push_back(cell);
            } else {
                row.push_back(cell == "nan" ? std::numeric_limits<double>::quiet_NaN() : std::stod(cell));
            }
        }
        if (!first) {
            t.rows.push_back(std::move(row));
        }
        first = false;
    }
    return t;
}

void write_text(const std::string& path, const std::string& text) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) {
        std::filesystem::create_directories(p.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ConfigError("cannot write '" + path + "'");
    }
    out << text;
}

std::vector<double> logspace(double lo, double hi, std::size_t count) {
    if (count == 1) {
        return {lo};
    }
    std::vector<double> out(count);
    const double a = std::log(lo), b = std::log(hi);
    for (std::size_t k = 0; k < count; ++k) {
        out[k] = std::exp(a + (b - a) * static_cast<double>(k) / static_cast<double>(count - 1));
    }
    out.front() = lo;
    out.back() = hi;
    return out;
}

std::size_t max_dim_from_env(std::size_t fallback) {
    const char* v = std::getenv("QFLUX_MAX_DIM");
    if (!v || !*v) {
        return fallback;
    }
    char* end = nullptr;
    const unsigned long long d = std::strtoull(v, &end, 10);
    if (*end != '\0' || d < 2) {
        throw ConfigError("QFLUX_MAX_DIM must be an integer >= 2");
    }
    return static_cast<std::size_t>(d);
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) {
        return 2;
    }
    if (dynamic_cast<const BudgetExceeded*>(&e)) {
        return 1;
    }
    return 3;
}

}  // namespace qflux::experiments
