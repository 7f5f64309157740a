#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace qflux {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline constexpr double default_tail_tol = 1e-10;
inline constexpr std::size_t default_max_cutoff = 256;

class HilbertSpace {
public:
    HilbertSpace(std::size_t dim, std::string label);

    static HilbertSpace product(const HilbertSpace& a, const HilbertSpace& b);

    std::size_t dim() const noexcept { return dim_; }
    const std::string& label() const noexcept { return label_; }
    // Factor dimensions, outermost first; a single entry for elementary spaces.
    const std::vector<std::size_t>& factors() const noexcept { return factors_; }

    bool operator==(const HilbertSpace& other) const noexcept {
        return dim_ == other.dim_ && factors_ == other.factors_;
    }

private:
    std::size_t dim_;
    std::string label_;
    std::vector<std::size_t> factors_;
};

// Square matrix in the number (energy) basis of its space.
class OperatorMatrix {
public:
    OperatorMatrix(HilbertSpace space, Matrix entries);

    const HilbertSpace& space() const noexcept { return space_; }
    const Matrix& matrix() const noexcept { return m_; }
    std::size_t dim() const noexcept { return space_.dim(); }

private:
    HilbertSpace space_;
    Matrix m_;
};

struct OscillatorMode {
    double omega;
    std::size_t cutoff;

    OscillatorMode(double omega, std::size_t cutoff);
    HilbertSpace space(const std::string& label = "system") const { return {cutoff, label}; }
};

class DensityState {
public:
    DensityState(HilbertSpace space, Matrix rho, double tail_mass = 0.0);

    const HilbertSpace& space() const noexcept { return space_; }
    const Matrix& matrix() const noexcept { return rho_; }
    std::size_t dim() const noexcept { return space_.dim(); }
    // Probability mass discarded by truncating to this space.
    double tail_mass() const noexcept { return tail_; }

    // Skips validation; only for states built from already validated factors.
    static DensityState trusted(HilbertSpace space, Matrix rho, double tail_mass = 0.0);

private:
    struct Unchecked {};
    DensityState(Unchecked, HilbertSpace space, Matrix rho, double tail_mass);

    HilbertSpace space_;
    Matrix rho_;
    double tail_;
};

class PureState {
public:
    PureState(HilbertSpace space, Vector amplitudes, double tail_mass = 0.0);

    const HilbertSpace& space() const noexcept { return space_; }
    const Vector& amplitudes() const noexcept { return psi_; }
    std::size_t dim() const noexcept { return space_.dim(); }
    double tail_mass() const noexcept { return tail_; }

    DensityState density() const;

private:
    HilbertSpace space_;
    Vector psi_;
    double tail_;
};

// Operators on a single mode; a acts as sqrt(n)|n-1><n|.
std::pair<OperatorMatrix, OperatorMatrix> ladder_operators(const OscillatorMode& mode);
OperatorMatrix number_operator(const OscillatorMode& mode);
OperatorMatrix hamiltonian(const OscillatorMode& mode);
OperatorMatrix identity(const HilbertSpace& space);
OperatorMatrix projector(const PureState& psi);
OperatorMatrix basis_projector(const HilbertSpace& space, std::size_t k);

// Thermal state and its photon-added / photon-subtracted relatives.
enum class ThermalFamily { thermal, photon_added, photon_subtracted };

// Weight outside levels 0..cutoff-1 of the untruncated state.
double tail_mass(ThermalFamily family, double beta, double omega, std::size_t cutoff);
// Smallest cutoff whose tail is <= tail_tol; TruncationError beyond max_cutoff.
std::size_t adaptive_cutoff(ThermalFamily family, double beta, double omega,
                            double tail_tol = default_tail_tol,
                            std::size_t max_cutoff = default_max_cutoff);

DensityState thermal_family_state(ThermalFamily family, double beta, const OscillatorMode& mode,
                                  double tail_tol = default_tail_tol);
DensityState thermal_state(double beta, const OscillatorMode& mode, double tail_tol = default_tail_tol);
DensityState photon_added_state(double beta, const OscillatorMode& mode,
                                double tail_tol = default_tail_tol);
DensityState photon_subtracted_state(double beta, const OscillatorMode& mode,
                                     double tail_tol = default_tail_tol);

PureState binomial_state(std::size_t n, double p, const HilbertSpace& space,
                         const std::vector<double>& phases = {});
PureState coherent_state(Complex alpha, const HilbertSpace& space, double tail_tol = default_tail_tol);
PureState basis_state(const HilbertSpace& space, std::size_t k);

OperatorMatrix tensor(const OperatorMatrix& a, const OperatorMatrix& b);
DensityState tensor(const DensityState& a, const DensityState& b);
PureState tensor(const PureState& a, const PureState& b);

OperatorMatrix dagger(const OperatorMatrix& op);
Complex trace(const OperatorMatrix& op);
Complex trace(const DensityState& rho);
Complex expectation(const OperatorMatrix& op, const DensityState& rho);
Complex expectation(const OperatorMatrix& op, const PureState& psi);

// Uhlmann fidelity specialised to a pure reference: <psi|rho|psi>.
double fidelity(const PureState& psi, const DensityState& rho);

}  // namespace qflux
