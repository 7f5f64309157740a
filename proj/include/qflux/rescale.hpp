#pragma once

#include "qflux/fock.hpp"

namespace qflux {

inline constexpr double min_beta = 1e-6;
// beta * (E_max - E_min) above this makes the inverse map meaningless in double.
inline constexpr double default_log_amplification_limit = 700.0;

// Hermitian positive semidefinite operator in the energy basis.
class MeasurementOperator {
public:
    MeasurementOperator(HilbertSpace space, Matrix m);
    explicit MeasurementOperator(const OperatorMatrix& op);

    // Skips validation; for products of validated factors.
    static MeasurementOperator trusted(HilbertSpace space, Matrix m);

    const HilbertSpace& space() const noexcept { return space_; }
    const Matrix& matrix() const noexcept { return m_; }
    std::size_t dim() const noexcept { return space_.dim(); }
    OperatorMatrix op() const { return {space_, m_}; }

private:
    struct Unchecked {};
    MeasurementOperator(Unchecked, HilbertSpace space, Matrix m);

    HilbertSpace space_;
    Matrix m_;
};

MeasurementOperator tensor(const MeasurementOperator& a, const MeasurementOperator& b);

struct EffectivePotentialValue {
    double value;
    double beta;
    // Smallest and largest energies carrying weight in X.
    double e_min;
    double e_max;
    // Trace of X; the bounds apply to value + ln(trace)/beta.
    double x_trace;

    double lower_bound() const;
    double upper_bound() const;
};

OperatorMatrix time_reversal(const OperatorMatrix& op);
MeasurementOperator time_reversal(const MeasurementOperator& x);
DensityState time_reversal(const DensityState& rho);

// T(e^{-bH/2} X e^{-bH/2}) / Tr[e^{-bH} X]; H must be diagonal.
DensityState gibbs_map(const MeasurementOperator& x, const OperatorMatrix& h, double beta);
// e^{bH/2} T(rho) e^{bH/2}, scaled to unit largest eigenvalue.
MeasurementOperator gibbs_map_inverse(const DensityState& rho, const OperatorMatrix& h, double beta,
                                      double log_amplification_limit = default_log_amplification_limit);

EffectivePotentialValue effective_potential(double beta, const OperatorMatrix& h,
                                            const MeasurementOperator& x);

double gen_free_energy_diff(double beta, const OperatorMatrix& h_i, const MeasurementOperator& x_i,
                            const OperatorMatrix& h_f, const MeasurementOperator& x_f);
double gen_work_diff(double beta, const OperatorMatrix& h_b, const MeasurementOperator& x_b_i,
                     const MeasurementOperator& x_b_f);

}  // namespace qflux
