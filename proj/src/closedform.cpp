#include "qflux/closedform.hpp"

#include "qflux/errors.hpp"

#include <cmath>
#include <string>

namespace qflux::cf {

namespace {

void require_chi(double chi, const char* where) {
    if (!(chi > 0.0) || !std::isfinite(chi)) {
        throw DomainError(std::string(where) + ": chi must be positive, got " + std::to_string(chi));
    }
}

void require_positive(double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
        throw DomainError(std::string(name) + " must be positive and finite");
    }
}

void require_prob(double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) {
        throw DomainError(std::string(name) + " outside [0,1]");
    }
}

void require_nonzero_prob(double p, const char* name) {
    require_prob(p, name);
    if (p == 0.0) {
        throw DomainError(std::string(name) + " = 0: log of zero in the ratio form");
    }
}

// p x + q with x = e^{-b}, em = expm1(-b), avoiding cancellation on either side.
double mix(double p, double b) {
    const double em = std::expm1(-b);
    if (p * -em < 0.5) {
        return 1.0 + p * em;
    }
    return (1.0 - p) + p * std::exp(-b);
}

// ln(p e^{-b} + q)
double log_mix(double p, double b) {
    const double em = std::expm1(-b);
    if (p * -em < 0.5) {
        return std::log1p(p * em);
    }
    return std::log((1.0 - p) + p * std::exp(-b));
}

// log1p(t)/t, continuous at t = 0
double log1p_ratio(double t) {
    if (std::abs(t) < 1e-8) {
        return 1.0 - 0.5 * t + t * t / 3.0;
    }
    return std::log1p(t) / t;
}

}  // namespace

ScenarioParams::ScenarioParams(double beta_, double omega_i_, double omega_f_)
    : beta(beta_), omega_i(omega_i_), omega_f(omega_f_) {
    require_positive(beta, "beta");
    require_positive(omega_i, "omega_i");
    require_positive(omega_f, "omega_f");
}

ScenarioParams ScenarioParams::from_chi(double chi_i, double omega_i, double omega_f) {
    require_chi(chi_i, "ScenarioParams");
    require_positive(omega_i, "omega_i");
    return ScenarioParams(2.0 * chi_i / omega_i, omega_i, omega_f);
}

BinomialParams::BinomialParams(std::size_t n_, double p_) : n(n_), p(p_) {
    require_prob(p, "p");
}

double BinomialParams::p_tilde(double beta, double omega) const {
    return cf::p_tilde(p, beta, omega);
}

// ---------------------------------------------------------------- oscillator thermodynamics

double partition_fn(double chi) {
    require_chi(chi, "partition_fn");
    return std::exp(-chi) / -std::expm1(-2.0 * chi);
}

double log_partition_fn(double chi) {
    require_chi(chi, "log_partition_fn");
    return -chi - std::log(-std::expm1(-2.0 * chi));
}

double mean_occupation(double chi) {
    require_chi(chi, "mean_occupation");
    return 1.0 / std::expm1(2.0 * chi);
}

double delta_F(const ScenarioParams& s) {
    return (log_partition_fn(s.chi_i()) - log_partition_fn(s.chi_f())) / s.beta;
}

double delta_E_vac(const ScenarioParams& s) {
    return 0.5 * (s.omega_f - s.omega_i);
}

double gen_free_energy_pm(const ScenarioParams& s, Photon sign) {
    return 2.0 * delta_F(s) + sign_of(sign) * delta_E_vac(s);
}

double gen_free_energy_pm_via_partition(const ScenarioParams& s, Photon sign) {
    // Tr[e^{-beta H} N] = Z^2 e^{-chi},  Tr[e^{-beta H}(N+1)] = Z^2 e^{+chi}
    const double sg = sign_of(sign);
    const double log_zt_i = 2.0 * log_partition_fn(s.chi_i()) - sg * s.chi_i();
    const double log_zt_f = 2.0 * log_partition_fn(s.chi_f()) - sg * s.chi_f();
    return -(log_zt_f - log_zt_i) / s.beta;
}

double prefactor_R(double work, const ScenarioParams& s, Photon sign) {
    const double k = sign == Photon::added ? 1.0 : s.omega_i / s.omega_f;
    const double dvac = delta_E_vac(s);
    const double num = s.omega_f * (2.0 * mean_occupation(s.chi_f()) + k) + work + dvac;
    const double den = s.omega_i * (2.0 * mean_occupation(s.chi_i()) + 1.0 / k) - work - dvac;
    if (!(num > 0.0) || !(den > 0.0)) {
        throw UndefinedRatioError("prefactor_R: numerator " + std::to_string(num) + ", denominator " +
                                  std::to_string(den) + " at W = " + std::to_string(work));
    }
    return (s.omega_f / s.omega_i) * num / den;
}

double crooks_rhs_pm(double work, const ScenarioParams& s, Photon sign) {
    const double expo = s.beta * (work - sign_of(sign) * delta_E_vac(s) - 2.0 * delta_F(s));
    return prefactor_R(work, s, sign) * std::exp(expo);
}

double jarzynski_rhs(const ScenarioParams& s, Photon sign) {
    return std::exp(-s.beta * gen_free_energy_pm(s, sign));
}

// ---------------------------------------------------------------- binomial batteries

double p_tilde(double p, double beta, double omega) {
    require_prob(p, "p");
    if (!(beta >= 0.0)) {
        throw DomainError("p_tilde: beta must be non-negative");
    }
    require_positive(omega, "omega");
    const double x = std::exp(-beta * omega);
    return p * x / mix(p, beta * omega);
}

double binomial_energy(std::size_t n, double p, double omega) {
    require_prob(p, "p");
    return omega * (static_cast<double>(n) * p + 0.5);
}

double binomial_eff_potential(std::size_t n, double p, double beta, double omega) {
    require_prob(p, "p");
    require_positive(beta, "beta");
    require_positive(omega, "omega");
    return 0.5 * omega - static_cast<double>(n) * log_mix(p, beta * omega) / beta;
}

double gen_work_align(std::size_t n, double p_i, double p_f, double beta, double omega) {
    require_nonzero_prob(p_i, "p_i");
    require_nonzero_prob(p_f, "p_f");
    require_positive(beta, "beta");
    require_positive(omega, "omega");
    // n [ln(p_f/pt_f) - ln(p_i/pt_i)] with ln(p/pt) = ln(p x + q) + beta omega
    const double b = beta * omega;
    return static_cast<double>(n) * (log_mix(p_f, b) - log_mix(p_i, b)) / beta;
}

double gen_work_size(std::size_t n_i, std::size_t n_f, double p, double beta, double omega) {
    require_nonzero_prob(p, "p");
    require_positive(beta, "beta");
    require_positive(omega, "omega");
    const double dn = static_cast<double>(n_f) - static_cast<double>(n_i);
    return dn * log_mix(p, beta * omega) / beta;
}

double gen_work_align_high_t(std::size_t n, double p_i, double p_f, double beta, double omega) {
    require_prob(p_i, "p_i");
    require_prob(p_f, "p_f");
    const double b = beta * omega;
    const double nn = static_cast<double>(n);
    const double var_i = nn * p_i * (1.0 - p_i), var_f = nn * p_f * (1.0 - p_f);
    return (b * nn * (p_i - p_f) - 0.5 * b * b * (var_i - var_f)) / beta;
}

double gen_work_size_high_t(std::size_t n_i, std::size_t n_f, double p, double beta, double omega) {
    require_prob(p, "p");
    const double b = beta * omega;
    const double dn = static_cast<double>(n_i) - static_cast<double>(n_f);
    return (b * dn * p - 0.5 * b * b * dn * p * (1.0 - p)) / beta;
}

double w_q_align(std::size_t n, double p_i, double p_f, double beta, double omega) {
    const double s_i = p_tilde(p_i, beta, omega) + p_i;
    const double s_f = p_tilde(p_f, beta, omega) + p_f;
    return 0.5 * omega * static_cast<double>(n) * (s_i - s_f);
}

double w_q_size(std::size_t n_i, std::size_t n_f, double p, double beta, double omega) {
    const double dn = static_cast<double>(n_i) - static_cast<double>(n_f);
    return 0.5 * omega * dn * (p_tilde(p, beta, omega) + p);
}

double q_align(double p_i, double p_f, double chi) {
    require_nonzero_prob(p_i, "p_i");
    require_nonzero_prob(p_f, "p_f");
    require_chi(chi, "q_align");
    const double b = 2.0 * chi;
    const double e = std::exp(-b), em = std::expm1(-b);
    const double a_i = mix(p_i, b), a_f = mix(p_f, b);
    // ln(a_i/a_f) / ((p_f - p_i)(1 + e/(a_i a_f))), continuous through p_i = p_f
    const double t = (p_i - p_f) * em / a_f;
    const double ratio = std::abs(t) < 0.5 ? log1p_ratio(t) : (log_mix(p_i, b) - log_mix(p_f, b)) / t;
    return (-em / a_f) * ratio / (1.0 + e / (a_i * a_f)) / chi;
}

double q_size(double p, double chi) {
    require_nonzero_prob(p, "p");
    require_chi(chi, "q_size");
    const double b = 2.0 * chi;
    const double pt = p * std::exp(-b) / mix(p, b);
    return -log_mix(p, b) / (pt + p) / chi;
}

double q_align_long_form(double p_i, double p_f, double chi) {
    require_prob(p_i, "p_i");
    require_prob(p_f, "p_f");
    require_chi(chi, "q_align_long_form");
    if (p_i == p_f) {
        const double e = std::exp(-2.0 * chi), a = mix(p_i, 2.0 * chi);
        return (-std::expm1(-2.0 * chi)) * a / (e + a * a) / chi;
    }
    const double b = 2.0 * chi;
    const double pt_i = p_tilde(p_i, 1.0, b);
    const double pt_f = p_tilde(p_f, 1.0, b);
    const double num = std::log(mix(p_i, b) / mix(p_f, b));
    return num / ((pt_f - pt_i) + (p_f - p_i)) / chi;
}

double q_size_long_form(double p, double chi) {
    require_prob(p, "p");
    require_chi(chi, "q_size_long_form");
    if (p == 0.0) {
        return q_harmonic(chi);
    }
    const double b = 2.0 * chi;
    const double pt = p_tilde(p, 1.0, b);
    return -std::log(mix(p, b)) / (pt + p) / chi;
}

double q_harmonic(double chi) {
    require_chi(chi, "q_harmonic");
    if (chi < 1e-4) {
        return 1.0 - chi * chi / 3.0;
    }
    return std::tanh(chi) / chi;
}

// ---------------------------------------------------------------- coherent limit

double coherent_eff_potential(double lambda, double beta, double omega) {
    if (!(lambda >= 0.0)) {
        throw DomainError("coherent_eff_potential: lambda must be non-negative");
    }
    require_positive(beta, "beta");
    require_positive(omega, "omega");
    return 0.5 * omega - lambda * std::expm1(-beta * omega) / beta;
}

std::complex<double> char_fn_binomial(std::size_t n, double p, double omega, double t) {
    require_prob(p, "p");
    const std::complex<double> z = 1.0 + p * (std::polar(1.0, omega * t) - 1.0);
    std::complex<double> acc = 1.0, base = z;
    for (std::size_t k = n; k > 0; k >>= 1) {
        if (k & 1U) {
            acc *= base;
        }
        base *= base;
    }
    return std::polar(1.0, 0.5 * omega * t) * acc;
}

std::complex<double> char_fn_coherent(double lambda, double omega, double t) {
    const std::complex<double> z = std::polar(1.0, omega * t) - 1.0;
    return std::exp(lambda * z + std::complex<double>(0.0, 0.5 * omega * t));
}

}  // namespace qflux::cf
