#include "qflux/closedform.hpp"
#include "qflux/dynamics.hpp"
#include "qflux/errors.hpp"
#include "qflux/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <random>
#include <sstream>

namespace qflux::experiments {

namespace {

using nlohmann::json;

constexpr double nan_value = std::numeric_limits<double>::quiet_NaN();

std::string fmt(const char* pattern, double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, pattern, x);
    return buf;
}

std::string num(double x) { return fmt("%.6g", x); }
std::string lvl(std::size_t w) { return fmt("%03.0f", static_cast<double>(w)); }

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(salt), static_cast<std::uint32_t>(salt >> 32)};
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

// Case with an explicit pass rule (counts, monotonicity).
CaseRecord count_case(std::string key, std::map<std::string, double> inputs, double found, double required,
                      bool pass) {
    CaseRecord c;
    c.key = std::move(key);
    c.inputs = std::move(inputs);
    c.simulated = found;
    c.closed_form = required;
    c.abs_dev = pass ? 0.0 : std::abs(required - found);
    c.rel_dev = c.abs_dev;
    c.metric = "abs";
    c.tolerance = 0.0;
    c.pass = pass;
    return c;
}

std::size_t system_cutoff(const ScenarioConfig& c, ThermalFamily family, double beta, double omega_min) {
    if (c.cutoffs.system > 0) {
        return c.cutoffs.system;
    }
    return adaptive_cutoff(family, beta, omega_min, c.cutoffs.tail_tol, c.cutoffs.max_dim);
}

Rational battery_spacing(const ScenarioConfig& c, const Rational& omega_f) {
    return c.spacing ? *c.spacing : default_spacing(c.omega_i, omega_f);
}

OperatorMatrix diagonal_operator(const HilbertSpace& space, const Eigen::VectorXd& d) {
    return OperatorMatrix(space, d.cast<Complex>().asDiagonal());
}

// X_S = N (photon added) or N + 1 (photon subtracted).
MeasurementOperator photon_measurement(const HilbertSpace& space, cf::Photon sign) {
    const double offset = sign == cf::Photon::added ? 0.0 : 1.0;
    Eigen::VectorXd d(static_cast<Eigen::Index>(space.dim()));
    for (Eigen::Index k = 0; k < d.size(); ++k) {
        d(k) = static_cast<double>(k) + offset;
    }
    return MeasurementOperator(diagonal_operator(space, d));
}

ThermalFamily family_of(cf::Photon sign) {
    return sign == cf::Photon::added ? ThermalFamily::photon_added : ThermalFamily::photon_subtracted;
}

const char* sign_name(cf::Photon sign) { return sign == cf::Photon::added ? "added" : "subtracted"; }

MeasurementOperator switch_projector(Sector s) {
    return MeasurementOperator(basis_projector(HilbertSpace(2, "switch"), static_cast<std::size_t>(s)));
}

DensityState switch_state(Sector s) { return basis_state(HilbertSpace(2, "switch"), static_cast<std::size_t>(s)).density(); }

// System (x) ladder (x) switch, matching the joint model index layout.
MeasurementOperator joint_measurement(const MeasurementOperator& x_s, const MeasurementOperator& x_b, Sector s) {
    return tensor(tensor(x_s, x_b), switch_projector(s));
}

DensityState joint_state(const DensityState& rho_s, const DensityState& rho_b, Sector s) {
    return tensor(tensor(rho_s, rho_b), switch_state(s));
}

std::string out_file(const ScenarioConfig& c, const std::string& name) {
    return (std::filesystem::path(c.out) / name).string();
}

json provenance_of(const ScenarioConfig& c) {
    json p;
    p["tool_version"] = tool_version;
    p["seed"] = c.seed ? json(*c.seed) : json(nullptr);
    p["cutoffs"] = {{"system", c.cutoffs.system},
                    {"ladder", c.cutoffs.ladder},
                    {"tail_tol", c.cutoffs.tail_tol},
                    {"max_dim", c.cutoffs.max_dim}};
    p["config"] = c.to_json();
    return p;
}

// ---------------------------------------------------------------- global fluctuation relation

MeasurementOperator random_psd(const HilbertSpace& space, std::mt19937_64& rng) {
    const auto d = static_cast<Eigen::Index>(space.dim());
    std::uniform_int_distribution<Eigen::Index> rank_dist(1, d);
    const Eigen::Index r = rank_dist(rng);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix g(d, r);
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = 0; j < r; ++j) {
            const double re = normal(rng);
            g(i, j) = Complex(re, normal(rng));
        }
    }
    Matrix m = g * g.adjoint();
    m = 0.5 * (m + m.adjoint()).eval();
    return MeasurementOperator(space, m);
}

std::pair<MeasurementOperator, std::string> random_system_measurement(const HilbertSpace& space,
                                                                     std::mt19937_64& rng) {
    const std::size_t d = space.dim();
    std::uniform_int_distribution<int> family(0, 6);
    std::uniform_int_distribution<std::size_t> level(0, d - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    switch (family(rng)) {
    case 0:
        return {MeasurementOperator(identity(space)), "identity"};
    case 1: {
        Eigen::VectorXd n = Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(d), 0.0, static_cast<double>(d - 1));
        return {MeasurementOperator(diagonal_operator(space, n)), "number"};
    }
    case 2: {
        Eigen::VectorXd n = Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(d), 1.0, static_cast<double>(d));
        return {MeasurementOperator(diagonal_operator(space, n)), "number+1"};
    }
    case 3:
        return {MeasurementOperator(basis_projector(space, level(rng))), "fock"};
    case 4: {
        const std::size_t n = level(rng);
        return {MeasurementOperator(projector(binomial_state(n, unit(rng), space))), "binomial"};
    }
    case 5: {
        const Complex alpha = std::polar(std::sqrt(unit(rng) * static_cast<double>(d) / 2.0), 2.0 * M_PI * unit(rng));
        return {MeasurementOperator(projector(coherent_state(alpha, space, 1.0))), "coherent"};
    }
    default:
        return {random_psd(space, rng), "random-psd"};
    }
}

std::pair<MeasurementOperator, std::string> random_battery_measurement(const HilbertSpace& space,
                                                                      std::mt19937_64& rng) {
    const std::size_t d = space.dim();
    std::uniform_int_distribution<int> family(0, 4);
    std::uniform_int_distribution<std::size_t> level(0, d - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    switch (family(rng)) {
    case 0:
        return {MeasurementOperator(basis_projector(space, level(rng))), "eigen"};
    case 1: {
        const std::size_t n = level(rng);
        return {MeasurementOperator(projector(binomial_state(n, unit(rng), space))), "binomial"};
    }
    case 2:
        return {MeasurementOperator(identity(space)), "identity"};
    case 3:
        return {random_psd(space, rng), "random-psd"};
    default: {
        const Complex alpha = std::polar(std::sqrt(unit(rng) * static_cast<double>(d) / 2.0), 2.0 * M_PI * unit(rng));
        return {MeasurementOperator(projector(coherent_state(alpha, space, 1.0))), "coherent"};
    }
    }
}

VerificationReport run_global_ft(const ScenarioConfig& c) {
    VerificationReport rep;
    std::mt19937_64 rng(*c.seed);
    const double chi_lo = *std::min_element(c.chi.begin(), c.chi.end());
    const double chi_hi = *std::max_element(c.chi.begin(), c.chi.end());
    std::uniform_real_distribution<double> chi_dist(chi_lo, chi_hi);
    std::uniform_int_distribution<std::size_t> ds_dist(2, c.cutoffs.system);
    std::uniform_int_distribution<std::size_t> l_dist(3, c.cutoffs.ladder);
    std::uniform_int_distribution<std::size_t> wf_dist(0, c.omega_f.size() - 1);
    std::size_t kept = 0, attempts = 0, skipped = 0;
    const std::size_t max_attempts = 5 * c.cases;
    while (kept < c.cases && attempts < max_attempts) {
        ++attempts;
        const std::size_t ds = ds_dist(rng), l = l_dist(rng);
        const double chi = chi_dist(rng);
        const Rational wf = c.omega_f[wf_dist(rng)];
        const double beta = 2.0 * chi / c.omega_i.value();
        const SwitchedBattery battery(l, battery_spacing(c, wf));
        std::optional<JointModel> model;
        try {
            model = build_joint_model(c.omega_i, wf, ds, battery);
        } catch (const IncommensurateError&) {
            ++skipped;
            continue;
        }
        const auto blocks = spectral_blocks(*model);
        const std::uint64_t useed = rng();
        const ConservingUnitary u = sample_conserving_unitary(blocks, useed);

        const HilbertSpace sys = model->system_space(), lad = battery.ladder_space();
        const auto [xs_i, fam_si] = random_system_measurement(sys, rng);
        const auto [xs_f, fam_sf] = random_system_measurement(sys, rng);
        const auto [xb_i, fam_bi] = random_battery_measurement(lad, rng);
        const auto [xb_f, fam_bf] = random_battery_measurement(lad, rng);
        const OperatorMatrix hs_i = model->system_hamiltonian(Sector::i);
        const OperatorMatrix hs_f = model->system_hamiltonian(Sector::f);
        const OperatorMatrix hb = battery.ladder_hamiltonian();

        const DensityState rho_i = joint_state(gibbs_map(xs_i, hs_i, beta), gibbs_map(xb_i, hb, beta), Sector::i);
        const DensityState rho_f = joint_state(gibbs_map(xs_f, hs_f, beta), gibbs_map(xb_f, hb, beta), Sector::f);
        const double q_f = q_quantity(joint_measurement(xs_f, xb_f, Sector::f), rho_i, u);
        const double q_r = q_quantity(joint_measurement(xs_i, xb_i, Sector::i), rho_f, u);
        if (!(q_f > 1e-12) || !(q_r > 1e-12)) {
            ++skipped;
            continue;
        }
        const double d_free = gen_free_energy_diff(beta, hs_i, xs_i, hs_f, xs_f);
        const double d_work = gen_work_diff(beta, hb, xb_i, xb_f);
        const std::string key = "case-" + lvl(kept) + "|" + fam_si + "->" + fam_sf + "|" + fam_bi + "->" + fam_bf;
        rep.cases.push_back(make_case(key,
                                      {{"chi", chi},
                                       {"omega_f", wf.value()},
                                       {"system_cutoff", static_cast<double>(ds)},
                                       {"ladder", static_cast<double>(l)},
                                       {"unitary_seed", static_cast<double>(useed % (1ULL << 52))},
                                       {"Q_F", q_f},
                                       {"Q_R", q_r}},
                                      std::log(q_f) - std::log(q_r), beta * (d_work - d_free), "abs", c.tolerance));
        ++kept;
    }
    rep.cases.push_back(count_case("count", {{"attempts", static_cast<double>(attempts)},
                                             {"skipped", static_cast<double>(skipped)}},
                                   static_cast<double>(kept), static_cast<double>(c.cases), kept >= c.cases));
    return rep;
}

// ---------------------------------------------------------------- photon added / subtracted Crooks

VerificationReport run_crooks_photon(const ScenarioConfig& c, cf::Photon sign) {
    VerificationReport rep;
    CsvTable table{{"omega_f", "chi", "E_i", "E_f", "W", "P_F", "P_R", "n_F", "n_R", "ratio", "conditional_rhs",
                    "closed_form_rhs"},
                   {}};
    const std::size_t per_combo = c.cases == 0 ? 64 : c.cases;
    std::uint64_t salt = 0;
    for (const Rational& wf : c.omega_f) {
        for (double chi : c.chi) {
            ++salt;
            const double beta = 2.0 * chi / c.omega_i.value();
            const double w_min = std::min(c.omega_i.value(), wf.value());
            const std::size_t ds = system_cutoff(c, family_of(sign), beta, w_min);
            const std::size_t l = c.cutoffs.ladder > 0 ? c.cutoffs.ladder : 32;
            const Rational delta = battery_spacing(c, wf);
            const JointModel model = build_joint_model(c.omega_i, wf, ds, SwitchedBattery(l, delta));
            const auto blocks = spectral_blocks(model);
            const ConservingUnitary u = sample_conserving_unitary(blocks, derive_seed(*c.seed, salt));
            const HilbertSpace sys = model.system_space();
            const MeasurementOperator x = photon_measurement(sys, sign);
            const OperatorMatrix hs_i = model.system_hamiltonian(Sector::i);
            const OperatorMatrix hs_f = model.system_hamiltonian(Sector::f);
            const DensityState g_i = gibbs_map(x, hs_i, beta), g_f = gibbs_map(x, hs_f, beta);
            const double d_free = gen_free_energy_diff(beta, hs_i, x, hs_f, x);
            const cf::ScenarioParams params(beta, c.omega_i.value(), wf.value());
            const PhotonCount count = sign == cf::Photon::added ? PhotonCount::n : PhotonCount::n_plus_one;

            std::vector<LevelTransitions> fwd, rev;
            for (std::size_t w = 0; w < l; ++w) {
                fwd.push_back(level_transitions(g_i, {w, Sector::i}, Sector::f, u, model, count));
                rev.push_back(level_transitions(g_f, {w, Sector::f}, Sector::i, u, model, count));
            }
            struct Pair {
                std::size_t wi, wf;
            };
            std::vector<Pair> eligible;
            for (std::size_t wi = 0; wi < l; ++wi) {
                for (std::size_t wfl = 0; wfl < l; ++wfl) {
                    if (!(fwd[wi].probability[wfl] > 1e-10 && rev[wfl].probability[wi] > 1e-10)) {
                        continue;
                    }
                    try {
                        cf::prefactor_R(delta.value() * (static_cast<double>(wi) - static_cast<double>(wfl)), params,
                                        sign);
                        eligible.push_back({wi, wfl});
                    } catch (const UndefinedRatioError&) {
                    }
                }
            }
            const std::string combo = "omega_f=" + wf.str() + "|chi=" + num(chi);
            std::size_t defined = 0;
            const std::size_t stride = std::max<std::size_t>(1, eligible.size() / per_combo);
            for (std::size_t k = 0; k < eligible.size() && k / stride < per_combo; k += stride) {
                const auto [wi, wfl] = eligible[k];
                const double p_f = fwd[wi].probability[wfl], p_r = rev[wfl].probability[wi];
                const double n_f = fwd[wi].weighted[wfl] / p_f, n_r = rev[wfl].weighted[wi] / p_r;
                const double work = delta.value() * (static_cast<double>(wi) - static_cast<double>(wfl));
                const double ratio = p_f / p_r;
                const double conditional = (n_r / n_f) * std::exp(beta * (work - d_free));
                std::map<std::string, double> inputs{{"omega_f", wf.value()}, {"chi", chi},
                                                     {"E_i", static_cast<double>(wi)},
                                                     {"E_f", static_cast<double>(wfl)},
                                                     {"W", work},
                                                     {"P_F", p_f},
                                                     {"P_R", p_r},
                                                     {"system_cutoff", static_cast<double>(ds)}};
                const std::string pair = "|Ei=" + lvl(wi) + "|Ef=" + lvl(wfl);
                rep.cases.push_back(make_case("conditional|" + combo + pair, inputs, ratio, conditional, "rel",
                                              c.tolerance));
                const double closed = cf::crooks_rhs_pm(work, params, sign);
                ++defined;
                rep.cases.push_back(make_case("closed-form|" + combo + pair, inputs, ratio, closed, "rel",
                                              c.tolerance));
                table.rows.push_back({wf.value(), chi, static_cast<double>(wi), static_cast<double>(wfl), work, p_f,
                                      p_r, n_f, n_r, ratio, conditional, closed});
            }
            rep.cases.push_back(count_case("pairs|" + combo,
                                           {{"eligible", static_cast<double>(eligible.size())},
                                            {"system_cutoff", static_cast<double>(ds)}},
                                           static_cast<double>(defined), 50.0, defined >= 50));
        }
    }
    if (!c.out.empty()) {
        const std::string path = out_file(c, to_string(c.kind) + ".csv");
        write_csv(path, table);
        rep.files.push_back(path);
    }
    return rep;
}

// ---------------------------------------------------------------- binomial battery Crooks

struct BinomialCase {
    std::size_t n_i, n_f;
    double p_i, p_f;
};

VerificationReport run_crooks_binomial(const ScenarioConfig& c, bool align) {
    VerificationReport rep;
    std::vector<BinomialCase> grid;
    if (align) {
        for (std::size_t n : c.n) {
            for (double pi : c.p) {
                for (double pf : c.p_f) {
                    grid.push_back({n, n, pi, pf});
                }
            }
        }
    } else {
        for (std::size_t ni : c.n) {
            for (std::size_t nf : c.n_f) {
                for (double p : c.p) {
                    grid.push_back({ni, nf, p, p});
                }
            }
        }
    }
    const Rational delta = c.spacing ? *c.spacing : Rational(1, 2);
    const std::size_t ds = c.cutoffs.system > 0 ? c.cutoffs.system : 3;
    std::uint64_t salt = 0;
    for (const Rational& wf : c.omega_f) {
        for (double chi : c.chi) {
            const double beta = 2.0 * chi / delta.value();
            for (const BinomialCase& b : grid) {
                ++salt;
                if (b.p_i == 0.0 || b.p_f == 0.0) {
                    throw ConfigError("binomial Crooks scenarios need nonzero p");
                }
                const std::size_t l = c.cutoffs.ladder > 0 ? c.cutoffs.ladder : std::max(b.n_i, b.n_f) + 4;
                if (l <= std::max(b.n_i, b.n_f)) {
                    throw ConfigError("battery ladder too short for the binomial states");
                }
                const SwitchedBattery battery(l, delta);
                const JointModel model = build_joint_model(c.omega_i, wf, ds, battery);
                const auto blocks = spectral_blocks(model);
                const ConservingUnitary u = sample_conserving_unitary(blocks, derive_seed(*c.seed, salt));
                const HilbertSpace sys = model.system_space(), lad = battery.ladder_space();
                const MeasurementOperator xs(identity(sys));
                const MeasurementOperator xb_i(projector(binomial_state(b.n_i, b.p_i, lad)));
                const MeasurementOperator xb_f(projector(binomial_state(b.n_f, b.p_f, lad)));
                const OperatorMatrix hs_i = model.system_hamiltonian(Sector::i);
                const OperatorMatrix hs_f = model.system_hamiltonian(Sector::f);
                const OperatorMatrix hb = battery.ladder_hamiltonian();
                const DensityState rho_i = joint_state(gibbs_map(xs, hs_i, beta), gibbs_map(xb_i, hb, beta), Sector::i);
                const DensityState rho_f = joint_state(gibbs_map(xs, hs_f, beta), gibbs_map(xb_f, hb, beta), Sector::f);
                const double p_fwd = q_quantity(joint_measurement(xs, xb_f, Sector::f), rho_i, u);
                const double p_rev = q_quantity(joint_measurement(xs, xb_i, Sector::i), rho_f, u);
                const double d_free = gen_free_energy_diff(beta, hs_i, xs, hs_f, xs);
                const double q = align ? cf::q_align(b.p_i, b.p_f, chi) : cf::q_size(b.p_i, chi);
                const double w_q = align ? cf::w_q_align(b.n_i, b.p_i, b.p_f, beta, delta.value())
                                         : cf::w_q_size(b.n_i, b.n_f, b.p_i, beta, delta.value());
                const std::string key = "omega_f=" + wf.str() + "|chi=" + num(chi) + "|n_i=" + lvl(b.n_i) +
                                        "|n_f=" + lvl(b.n_f) + "|p_i=" + num(b.p_i) + "|p_f=" + num(b.p_f);
                std::map<std::string, double> inputs{{"omega_f", wf.value()}, {"chi", chi},
                                                     {"n_i", static_cast<double>(b.n_i)},
                                                     {"n_f", static_cast<double>(b.n_f)},
                                                     {"p_i", b.p_i},
                                                     {"p_f", b.p_f},
                                                     {"P_F", p_fwd},
                                                     {"P_R", p_rev}};
                if (!(p_fwd > 1e-12) || !(p_rev > 1e-12)) {
                    // energetically forbidden; the ratio is undefined
                    rep.cases.push_back(make_case("skipped|" + key, inputs, std::min(p_fwd, p_rev), 0.0, "abs", 0.0, true));
                    continue;
                }
                rep.cases.push_back(make_case("ratio|" + key, inputs, p_fwd / p_rev,
                                              std::exp(beta * (q * w_q - d_free)), "rel", c.tolerance));
                const double d_work = gen_work_diff(beta, hb, xb_i, xb_f);
                rep.cases.push_back(make_case("work-flow|" + key, inputs, d_work, q * w_q, "abs", 1e-10, true));
            }
        }
    }
    return rep;
}

// ---------------------------------------------------------------- Jarzynski

std::size_t work_quantum_bound(const JointModel& m) {
    const std::int64_t k_hi = std::max(m.k_system(Sector::i), m.k_system(Sector::f));
    const std::int64_t k_lo = std::min(m.k_system(Sector::i), m.k_system(Sector::f));
    const auto span = k_hi * static_cast<std::int64_t>(2 * m.system_cutoff() - 1) - k_lo;
    return static_cast<std::size_t>((span + 2 * m.k_battery() - 1) / (2 * m.k_battery()));
}

VerificationReport run_jarzynski(const ScenarioConfig& c) {
    VerificationReport rep;
    CsvTable table{{"sign", "omega_f", "chi", "k", "W", "P_F", "P_R_minus", "n_F", "n_R"}, {}};
    std::uint64_t salt = 0;
    for (cf::Photon sign : {cf::Photon::added, cf::Photon::subtracted}) {
        for (const Rational& wf : c.omega_f) {
            for (double chi : c.chi) {
                ++salt;
                const double beta = 2.0 * chi / c.omega_i.value();
                const double w_min = std::min(c.omega_i.value(), wf.value());
                const std::size_t ds = system_cutoff(c, family_of(sign), beta, w_min);
                const Rational delta = battery_spacing(c, wf);
                const JointModel probe(c.omega_i, wf, ds, SwitchedBattery(2, delta));
                const std::size_t l = c.cutoffs.ladder > 0 ? c.cutoffs.ladder : 5 * work_quantum_bound(probe) + 4;
                if (l > c.cutoffs.max_dim * 8) {
                    throw ConfigError("jarzynski ladder of " + std::to_string(l) + " levels exceeds the cap");
                }
                const JointModel model = build_joint_model(c.omega_i, wf, ds, SwitchedBattery(l, delta));
                const auto blocks = spectral_blocks(model);
                const LevelWindow window = ladder_interior(model, blocks);
                const ConservingUnitary u =
                    sample_translation_invariant_unitary(model, blocks, window, derive_seed(*c.seed, salt));
                const std::size_t w0 = (window.lo + window.hi) / 2;
                const std::size_t shift = std::min<std::size_t>(3, window.hi - w0);

                const HilbertSpace sys = model.system_space();
                const MeasurementOperator x = photon_measurement(sys, sign);
                const OperatorMatrix hs_i = model.system_hamiltonian(Sector::i);
                const OperatorMatrix hs_f = model.system_hamiltonian(Sector::f);
                const DensityState g_i = gibbs_map(x, hs_i, beta), g_f = gibbs_map(x, hs_f, beta);
                const PhotonCount count = sign == cf::Photon::added ? PhotonCount::n : PhotonCount::n_plus_one;
                const LevelTransitions fwd = level_transitions(g_i, {w0, Sector::i}, Sector::f, u, model, count);
                const LevelTransitions rev = level_transitions(g_f, {w0, Sector::f}, Sector::i, u, model, count);
                const LevelTransitions fwd_shift =
                    level_transitions(g_i, {w0 + shift, Sector::i}, Sector::f, u, model, count);
                const cf::ScenarioParams params(beta, c.omega_i.value(), wf.value());

                double avg = 0.0, avg_closed = 0.0, total_f = 0.0, total_r = 0.0, shift_gap = 0.0;
                for (std::size_t w = 0; w < l; ++w) {
                    total_f += fwd.probability[w];
                    total_r += rev.probability[w];
                    if (w + shift < l) {
                        shift_gap = std::max(shift_gap, std::abs(fwd.probability[w] - fwd_shift.probability[w + shift]));
                    }
                    if (!(fwd.probability[w] > 0.0)) {
                        continue;
                    }
                    // forward k = w0 - w pairs with the reverse jump from w0 to w0 + k
                    const long k = static_cast<long>(w0) - static_cast<long>(w);
                    const long w_rev = static_cast<long>(w0) + k;
                    const double work = delta.value() * static_cast<double>(k);
                    const double boltz = std::exp(-beta * work);
                    double n_r = nan_value;
                    if (w_rev >= 0 && w_rev < static_cast<long>(l)) {
                        const auto wr = static_cast<std::size_t>(w_rev);
                        if (rev.probability[wr] > default_prob_floor) {
                            n_r = rev.weighted[wr] / rev.probability[wr];
                            avg += fwd.weighted[w] * boltz / n_r;
                        }
                    }
                    try {
                        avg_closed += fwd.probability[w] * boltz / cf::prefactor_R(work, params, sign);
                    } catch (const UndefinedRatioError&) {
                    }
                    const double p_r_minus =
                        w_rev >= 0 && w_rev < static_cast<long>(l) ? rev.probability[static_cast<std::size_t>(w_rev)] : 0.0;
                    table.rows.push_back({cf::sign_of(sign), wf.value(), chi, static_cast<double>(k), work,
                                          fwd.probability[w], p_r_minus, fwd.weighted[w] / fwd.probability[w], n_r});
                }
                const double target = std::exp(beta * cf::gen_free_energy_pm(params, sign));
                const std::string combo = std::string(sign_name(sign)) + "|omega_f=" + wf.str() + "|chi=" + num(chi);
                const std::map<std::string, double> inputs{{"omega_f", wf.value()},
                                                           {"chi", chi},
                                                           {"system_cutoff", static_cast<double>(ds)},
                                                           {"ladder", static_cast<double>(l)},
                                                           {"w0", static_cast<double>(w0)},
                                                           {"window_lo", static_cast<double>(window.lo)},
                                                           {"window_hi", static_cast<double>(window.hi)}};
                rep.cases.push_back(make_case("jarzynski|" + combo, inputs, avg * target, 1.0, "rel", c.tolerance));
                rep.cases.push_back(make_case("normalization-reverse|" + combo, inputs, total_r, 1.0, "abs", 1e-10));
                rep.cases.push_back(make_case("normalization-forward|" + combo, inputs, total_f, 1.0, "abs", 1e-10));
                rep.cases.push_back(make_case("translation|" + combo, inputs, shift_gap, 0.0, "abs", 1e-12));
                rep.cases.push_back(
                    make_case("closed-form-prefactor|" + combo, inputs, avg_closed * target, 1.0, "rel", c.tolerance, true));
            }
        }
    }
    if (!c.out.empty()) {
        const std::string path = out_file(c, "jarzynski.csv");
        write_csv(path, table);
        rep.files.push_back(path);
    }
    return rep;
}

// ---------------------------------------------------------------- figures

std::string gnuplot_script(const std::string& csv, const std::string& title, const std::string& plots) {
    std::ostringstream os;
    os << "set datafile separator ','\n"
       << "set key autotitle columnhead\n"
       << "set logscale x\n"
       << "set xlabel 'chi'\n"
       << "set title '" << title << "'\n"
       << "plot " << plots << '\n';
    (void)csv;
    return os.str();
}

void emit_figure(const ScenarioConfig& c, VerificationReport& rep, const CsvTable& table, const std::string& title,
                 const std::string& plots) {
    if (c.out.empty()) {
        return;
    }
    const std::string name = to_string(c.kind);
    const std::string csv = out_file(c, name + ".csv");
    const std::string gp = out_file(c, name + ".gp");
    write_csv(csv, table);
    write_text(gp, gnuplot_script(csv, title, plots));
    rep.files.push_back(csv);
    rep.files.push_back(gp);
}

VerificationReport run_figure2(const ScenarioConfig& c) {
    VerificationReport rep;
    CsvTable table{{"chi", "dF", "2dF", "dEvac", "dFplus", "dFminus"}, {}};
    const double wi = c.omega_i.value();
    for (const Rational& wf : c.omega_f) {
        for (double chi : c.chi) {
            const cf::ScenarioParams s = cf::ScenarioParams::from_chi(chi, wi, wf.value());
            const double df = cf::delta_F(s) / wi, dvac = cf::delta_E_vac(s) / wi;
            const double dp = cf::gen_free_energy_pm(s, cf::Photon::added) / wi;
            const double dm = cf::gen_free_energy_pm(s, cf::Photon::subtracted) / wi;
            table.rows.push_back({chi, df, 2.0 * df, dvac, dp, dm});
            const std::map<std::string, double> inputs{{"chi", chi}, {"omega_f", wf.value()}};
            const std::string key = "omega_f=" + wf.str() + "|chi=" + fmt("%.10e", chi);
            rep.cases.push_back(make_case("dFplus|" + key, inputs, dp,
                                          cf::gen_free_energy_pm_via_partition(s, cf::Photon::added) / wi, "rel",
                                          c.tolerance));
            rep.cases.push_back(make_case("dFminus|" + key, inputs, dm,
                                          cf::gen_free_energy_pm_via_partition(s, cf::Photon::subtracted) / wi,
                                          "rel", c.tolerance));
        }
    }
    emit_figure(c, rep, table, "generalised free energies (omega_i units)",
                "f u 1:2 w l, f u 1:3 w l, f u 1:4 w l, f u 1:5 w l, f u 1:6 w l");
    return rep;
}

VerificationReport run_figure3(const ScenarioConfig& c) {
    VerificationReport rep;
    CsvTable table{{"chi", "W", "R_plus", "R_minus", "ratio_plus", "ratio_minus", "ratio_classical"}, {}};
    const double wi = c.omega_i.value();
    for (const Rational& wf : c.omega_f) {
        for (double w_units : c.work) {
            for (double chi : c.chi) {
                const cf::ScenarioParams s = cf::ScenarioParams::from_chi(chi, wi, wf.value());
                const double work = w_units * wi;
                double r[2] = {nan_value, nan_value}, ratio[2] = {nan_value, nan_value};
                int j = 0;
                for (cf::Photon sign : {cf::Photon::added, cf::Photon::subtracted}) {
                    try {
                        r[j] = cf::prefactor_R(work, s, sign);
                        ratio[j] = cf::crooks_rhs_pm(work, s, sign);
                    } catch (const UndefinedRatioError&) {
                    }
                    ++j;
                }
                const double classical = std::exp(s.beta * (work - cf::delta_F(s)));
                table.rows.push_back({chi, w_units, r[0], r[1], ratio[0], ratio[1], classical});
                // the plotted ratio factorises into the plotted prefactor and its exponent
                const std::string key = "omega_f=" + wf.str() + "|W=" + num(w_units) + "|chi=" + fmt("%.10e", chi);
                j = 0;
                for (cf::Photon sign : {cf::Photon::added, cf::Photon::subtracted}) {
                    if (std::isfinite(r[j])) {
                        const double expo = s.beta * (work - cf::sign_of(sign) * cf::delta_E_vac(s)) -
                                            2.0 * (cf::log_partition_fn(s.chi_i()) - cf::log_partition_fn(s.chi_f()));
                        rep.cases.push_back(make_case(std::string("ratio-") + sign_name(sign) + "|" + key,
                                                      {{"chi", chi}, {"W", w_units}, {"omega_f", wf.value()}},
                                                      ratio[j], r[j] * std::exp(expo), "rel", c.tolerance));
                    }
                    ++j;
                }
            }
        }
    }
    emit_figure(c, rep, table, "predicted ratio and prefactor",
                "f u 1:3 w l, f u 1:4 w l, f u 1:5 w l, f u 1:6 w l, f u 1:7 w l");
    return rep;
}

VerificationReport run_figure4(const ScenarioConfig& c) {
    VerificationReport rep;
    CsvTable table{{"chi", "p", "p_f", "q_align", "q_size"}, {}};
    for (double pf : c.p_f) {
        for (double p : c.p) {
            for (double chi : c.chi) {
                const double qa = p > 0.0 && pf > 0.0 ? cf::q_align(p, pf, chi) : cf::q_align_long_form(p, pf, chi);
                const double qs = p > 0.0 ? cf::q_size(p, chi) : cf::q_size_long_form(p, chi);
                table.rows.push_back({chi, p, pf, qa, qs});
                const std::map<std::string, double> inputs{{"chi", chi}, {"p", p}, {"p_f", pf}};
                const std::string key = "p_f=" + num(pf) + "|p=" + num(p) + "|chi=" + fmt("%.10e", chi);
                rep.cases.push_back(
                    make_case("q_align|" + key, inputs, qa, cf::q_align_long_form(p, pf, chi), "rel", c.tolerance));
                rep.cases.push_back(
                    make_case("q_size|" + key, inputs, qs, cf::q_size_long_form(p, chi), "rel", c.tolerance));
            }
        }
    }
    emit_figure(c, rep, table, "quantum distortion factors", "f u 1:4 w l, f u 1:5 w l");
    return rep;
}

// ---------------------------------------------------------------- harmonic limit

double coherent_infidelity(std::size_t n, double lambda) {
    const double p = lambda / static_cast<double>(n);
    double overlap = 0.0;
    for (std::size_t k = 0; k <= n; ++k) {
        const double kk = static_cast<double>(k), nn = static_cast<double>(n);
        const double log_b = 0.5 * (std::lgamma(nn + 1.0) - std::lgamma(kk + 1.0) - std::lgamma(nn - kk + 1.0) +
                                    kk * std::log(p) + (nn - kk) * std::log1p(-p));
        const double log_c = -0.5 * lambda + 0.5 * kk * std::log(lambda) - 0.5 * std::lgamma(kk + 1.0);
        overlap += std::exp(log_b + log_c);
    }
    return 1.0 - overlap * overlap;
}

double char_fn_gap(std::size_t n, double lambda) {
    double gap = 0.0;
    const std::size_t points = 512;
    for (std::size_t j = 0; j <= points; ++j) {
        const double t = 2.0 * M_PI * static_cast<double>(j) / static_cast<double>(points);
        gap = std::max(gap, std::abs(cf::char_fn_binomial(n, lambda / static_cast<double>(n), 1.0, t) -
                                     cf::char_fn_coherent(lambda, 1.0, t)));
    }
    return gap;
}

VerificationReport run_harmonic_limit(const ScenarioConfig& c) {
    VerificationReport rep;
    std::vector<std::size_t> ns = c.n;
    std::sort(ns.begin(), ns.end());
    for (double lambda : c.lambda) {
        std::vector<double> infid, gaps;
        for (std::size_t n : ns) {
            if (static_cast<double>(n) < lambda) {
                throw ConfigError("harmonic-limit needs n >= lambda");
            }
            infid.push_back(coherent_infidelity(n, lambda));
            gaps.push_back(char_fn_gap(n, lambda));
            const std::map<std::string, double> inputs{{"lambda", lambda}, {"n", static_cast<double>(n)}};
            const std::string key = "lambda=" + num(lambda) + "|n=" + lvl(n);
            rep.cases.push_back(make_case("infidelity|" + key, inputs, infid.back(), 0.0, "abs", 1.0, true));
            rep.cases.push_back(make_case("char-gap|" + key, inputs, gaps.back(), 0.0, "abs", 1.0, true));
        }
        std::size_t infid_viol = 0, gap_viol = 0;
        for (std::size_t k = 1; k < ns.size(); ++k) {
            infid_viol += infid[k] < infid[k - 1] ? 0 : 1;
            gap_viol += gaps[k] < gaps[k - 1] ? 0 : 1;
        }
        const std::string lk = "lambda=" + num(lambda);
        rep.cases.push_back(count_case("infidelity-decreasing|" + lk, {{"lambda", lambda}},
                                       static_cast<double>(infid_viol), 0.0, infid_viol == 0));
        rep.cases.push_back(count_case("char-gap-decreasing|" + lk, {{"lambda", lambda}},
                                       static_cast<double>(gap_viol), 0.0, gap_viol == 0));
        rep.cases.push_back(make_case("infidelity-largest-n|" + lk,
                                      {{"lambda", lambda}, {"n", static_cast<double>(ns.back())}}, infid.back(), 0.0,
                                      "abs", 1e-2));
    }
    // realignment between lambda_i/n and lambda_f/n at large n
    const double l_i = c.lambda.front(), l_f = c.lambda.size() > 1 ? c.lambda[1] : 2.0 * l_i;
    for (std::size_t n : c.n_f) {
        const double nn = static_cast<double>(n);
        for (double chi : c.chi) {
            rep.cases.push_back(make_case("q-harmonic|n=" + fmt("%06.0f", nn) + "|chi=" + num(chi),
                                          {{"n", nn}, {"chi", chi}, {"lambda_i", l_i}, {"lambda_f", l_f}},
                                          cf::q_align(l_i / nn, l_f / nn, chi), cf::q_harmonic(chi), "abs",
                                          c.tolerance));
        }
    }
    return rep;
}

}  // namespace

VerificationReport run_scenario(const ScenarioConfig& config) {
    config.validate();
    VerificationReport rep;
    switch (config.kind) {
    case ScenarioKind::global_ft:
        rep = run_global_ft(config);
        break;
    case ScenarioKind::crooks_added:
        rep = run_crooks_photon(config, cf::Photon::added);
        break;
    case ScenarioKind::crooks_subtracted:
        rep = run_crooks_photon(config, cf::Photon::subtracted);
        break;
    case ScenarioKind::crooks_binomial_align:
        rep = run_crooks_binomial(config, true);
        break;
    case ScenarioKind::crooks_binomial_size:
        rep = run_crooks_binomial(config, false);
        break;
    case ScenarioKind::jarzynski:
        rep = run_jarzynski(config);
        break;
    case ScenarioKind::figure2:
        rep = run_figure2(config);
        break;
    case ScenarioKind::figure3:
        rep = run_figure3(config);
        break;
    case ScenarioKind::figure4:
        rep = run_figure4(config);
        break;
    case ScenarioKind::harmonic_limit:
        rep = run_harmonic_limit(config);
        break;
    }
    rep.kind = to_string(config.kind);
    rep.provenance = provenance_of(config);
    rep.sort_cases();
    if (!config.out.empty()) {
        const std::string path = out_file(config, rep.kind + "_report.json");
        rep.files.push_back(path);
        write_text(path, rep.to_json().dump(2) + "\n");
    }
    return rep;
}

}  // namespace qflux::experiments
