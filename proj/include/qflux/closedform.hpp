#pragma once

#include <complex>
#include <cstddef>

namespace qflux::cf {

enum class Photon { added, subtracted };

inline double sign_of(Photon s) noexcept { return s == Photon::added ? 1.0 : -1.0; }

struct ScenarioParams {
    double beta;
    double omega_i;
    double omega_f;

    ScenarioParams(double beta, double omega_i, double omega_f);
    // Build from chi_i = beta omega_i / 2 and the frequency ratio.
    static ScenarioParams from_chi(double chi_i, double omega_i, double omega_f);

    double chi_i() const noexcept { return 0.5 * beta * omega_i; }
    double chi_f() const noexcept { return 0.5 * beta * omega_f; }
};

struct BinomialParams {
    std::size_t n;
    double p;

    BinomialParams(std::size_t n, double p);
    double q() const noexcept { return 1.0 - p; }
    double p_tilde(double beta, double omega) const;
    double variance() const noexcept { return static_cast<double>(n) * p * (1.0 - p); }
};

double partition_fn(double chi);
double log_partition_fn(double chi);
double mean_occupation(double chi);
double delta_F(const ScenarioParams& s);
double delta_E_vac(const ScenarioParams& s);

double gen_free_energy_pm(const ScenarioParams& s, Photon sign);
// Same quantity through ln Z~ = 2 ln Z -/+ chi.
double gen_free_energy_pm_via_partition(const ScenarioParams& s, Photon sign);

double prefactor_R(double work, const ScenarioParams& s, Photon sign);
double crooks_rhs_pm(double work, const ScenarioParams& s, Photon sign);
double jarzynski_rhs(const ScenarioParams& s, Photon sign);

double p_tilde(double p, double beta, double omega);
double binomial_energy(std::size_t n, double p, double omega);
double binomial_eff_potential(std::size_t n, double p, double beta, double omega);

double gen_work_align(std::size_t n, double p_i, double p_f, double beta, double omega);
double gen_work_size(std::size_t n_i, std::size_t n_f, double p, double beta, double omega);
// Second-order expansions in beta*omega.
double gen_work_align_high_t(std::size_t n, double p_i, double p_f, double beta, double omega);
double gen_work_size_high_t(std::size_t n_i, std::size_t n_f, double p, double beta, double omega);

// Symmetrised energy flow (dE_plus - dE_minus) / 2.
double w_q_align(std::size_t n, double p_i, double p_f, double beta, double omega);
double w_q_size(std::size_t n_i, std::size_t n_f, double p, double beta, double omega);

double q_align(double p_i, double p_f, double chi);
double q_size(double p, double chi);
// Unreduced ratios; these also accept a vanishing p.
double q_align_long_form(double p_i, double p_f, double chi);
double q_size_long_form(double p, double chi);
double q_harmonic(double chi);

double coherent_eff_potential(double lambda, double beta, double omega);
std::complex<double> char_fn_binomial(std::size_t n, double p, double omega, double t);
std::complex<double> char_fn_coherent(double lambda, double omega, double t);

}  // namespace qflux::cf
