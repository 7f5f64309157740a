#include "qflux/fock.hpp"

#include "qflux/errors.hpp"

#include <unsupported/Eigen/KroneckerProduct>

#include <cmath>
#include <numbers>

namespace qflux {

namespace {

bool all_finite(const Matrix& m) {
    return m.allFinite();
}

void require_same(const HilbertSpace& a, const HilbertSpace& b, const char* where) {
    if (!(a == b)) {
        throw DimensionError(std::string(where) + ": incompatible spaces (" + std::to_string(a.dim()) +
                             " vs " + std::to_string(b.dim()) + ")");
    }
}

void require_beta(double beta) {
    if (!(beta > 0.0) || !std::isfinite(beta)) {
        throw DomainError("beta must be positive and finite");
    }
}

}  // namespace

// ---------------------------------------------------------------- spaces

HilbertSpace::HilbertSpace(std::size_t dim, std::string label)
    : dim_(dim), label_(std::move(label)), factors_{dim} {
    if (dim == 0) {
        throw DimensionError("HilbertSpace: dim must be >= 1");
    }
}

HilbertSpace HilbertSpace::product(const HilbertSpace& a, const HilbertSpace& b) {
    HilbertSpace out(a.dim_ * b.dim_, a.label_ + "*" + b.label_);
    out.factors_ = a.factors_;
    out.factors_.insert(out.factors_.end(), b.factors_.begin(), b.factors_.end());
    return out;
}

OperatorMatrix::OperatorMatrix(HilbertSpace space, Matrix entries)
    : space_(std::move(space)), m_(std::move(entries)) {
    const auto d = static_cast<Eigen::Index>(space_.dim());
    if (m_.rows() != d || m_.cols() != d) {
        throw DimensionError("OperatorMatrix: matrix is " + std::to_string(m_.rows()) + "x" +
                             std::to_string(m_.cols()) + ", space dim " + std::to_string(d));
    }
    if (!all_finite(m_)) {
        throw DomainError("OperatorMatrix: non-finite entry");
    }
}

OscillatorMode::OscillatorMode(double omega_, std::size_t cutoff_) : omega(omega_), cutoff(cutoff_) {
    if (!(omega > 0.0) || !std::isfinite(omega)) {
        throw DomainError("OscillatorMode: omega must be positive");
    }
    if (cutoff < 1) {
        throw DimensionError("OscillatorMode: cutoff must be >= 1");
    }
}

// ---------------------------------------------------------------- states

DensityState::DensityState(Unchecked, HilbertSpace space, Matrix rho, double tail_mass)
    : space_(std::move(space)), rho_(std::move(rho)), tail_(tail_mass) {}

DensityState DensityState::trusted(HilbertSpace space, Matrix rho, double tail_mass) {
    return DensityState(Unchecked{}, std::move(space), std::move(rho), tail_mass);
}

DensityState::DensityState(HilbertSpace space, Matrix rho, double tail_mass)
    : space_(std::move(space)), rho_(std::move(rho)), tail_(tail_mass) {
    const auto d = static_cast<Eigen::Index>(space_.dim());
    if (rho_.rows() != d || rho_.cols() != d) {
        throw DimensionError("DensityState: matrix does not match space");
    }
    if (!all_finite(rho_)) {
        throw DomainError("DensityState: non-finite entry");
    }
    if ((rho_ - rho_.adjoint()).cwiseAbs().maxCoeff() > 1e-12) {
        throw DomainError("DensityState: not Hermitian");
    }
    const Complex tr = rho_.trace();
    if (std::abs(tr.real() - 1.0) > 1e-10 || std::abs(tr.imag()) > 1e-12) {
        throw DomainError("DensityState: trace " + std::to_string(tr.real()) + " != 1");
    }
    const bool diagonal = (rho_ - Matrix(rho_.diagonal().asDiagonal())).cwiseAbs().maxCoeff() == 0.0;
    double min_eig;
    if (diagonal) {
        min_eig = rho_.diagonal().real().minCoeff();
    } else {
        Eigen::SelfAdjointEigenSolver<Matrix> es(rho_, Eigen::EigenvaluesOnly);
        min_eig = es.eigenvalues().minCoeff();
    }
    if (min_eig < -1e-10) {
        throw DomainError("DensityState: negative eigenvalue " + std::to_string(min_eig));
    }
    if (tail_ < 0.0 || tail_ > 1.0) {
        throw DomainError("DensityState: tail mass outside [0,1]");
    }
}

PureState::PureState(HilbertSpace space, Vector amplitudes, double tail_mass)
    : space_(std::move(space)), psi_(std::move(amplitudes)), tail_(tail_mass) {
    if (psi_.size() != static_cast<Eigen::Index>(space_.dim())) {
        throw DimensionError("PureState: amplitude count does not match space");
    }
    if (!psi_.allFinite()) {
        throw DomainError("PureState: non-finite amplitude");
    }
    if (std::abs(psi_.norm() - 1.0) > 1e-12) {
        throw DomainError("PureState: norm " + std::to_string(psi_.norm()) + " != 1");
    }
}

DensityState PureState::density() const {
    return DensityState::trusted(space_, psi_ * psi_.adjoint(), tail_);
}

// ---------------------------------------------------------------- operators

std::pair<OperatorMatrix, OperatorMatrix> ladder_operators(const OscillatorMode& mode) {
    if (mode.cutoff < 2) {
        throw DimensionError("ladder_operators: cutoff must be >= 2");
    }
    const auto d = static_cast<Eigen::Index>(mode.cutoff);
    Matrix a = Matrix::Zero(d, d);
    for (Eigen::Index n = 1; n < d; ++n) {
        a(n - 1, n) = std::sqrt(static_cast<double>(n));
    }
    Matrix ad = a.adjoint();
    return {OperatorMatrix(mode.space(), std::move(a)), OperatorMatrix(mode.space(), std::move(ad))};
}

OperatorMatrix number_operator(const OscillatorMode& mode) {
    const auto d = static_cast<Eigen::Index>(mode.cutoff);
    Eigen::VectorXd n = Eigen::VectorXd::LinSpaced(d, 0.0, static_cast<double>(d - 1));
    return OperatorMatrix(mode.space(), n.cast<Complex>().asDiagonal());
}

OperatorMatrix hamiltonian(const OscillatorMode& mode) {
    const auto d = static_cast<Eigen::Index>(mode.cutoff);
    Eigen::VectorXd e(d);
    for (Eigen::Index n = 0; n < d; ++n) {
        e(n) = mode.omega * (static_cast<double>(n) + 0.5);
    }
    return OperatorMatrix(mode.space(), e.cast<Complex>().asDiagonal());
}

OperatorMatrix identity(const HilbertSpace& space) {
    const auto d = static_cast<Eigen::Index>(space.dim());
    return OperatorMatrix(space, Matrix::Identity(d, d));
}

OperatorMatrix projector(const PureState& psi) {
    return OperatorMatrix(psi.space(), psi.amplitudes() * psi.amplitudes().adjoint());
}

OperatorMatrix basis_projector(const HilbertSpace& space, std::size_t k) {
    if (k >= space.dim()) {
        throw DimensionError("basis_projector: level out of range");
    }
    const auto d = static_cast<Eigen::Index>(space.dim());
    Matrix m = Matrix::Zero(d, d);
    m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)) = 1.0;
    return OperatorMatrix(space, std::move(m));
}

// ---------------------------------------------------------------- thermal family

double tail_mass(ThermalFamily family, double beta, double omega, std::size_t cutoff) {
    require_beta(beta);
    const double bw = beta * omega;
    const double d = static_cast<double>(cutoff);
    const double one_minus_x = -std::expm1(-bw);
    switch (family) {
    case ThermalFamily::thermal:
        return std::exp(-bw * d);
    case ThermalFamily::photon_added:
        // weights n x^n: tail = x^(D-1) (D(1-x) + x)
        return std::exp(-bw * (d - 1.0)) * (d * one_minus_x + std::exp(-bw));
    case ThermalFamily::photon_subtracted:
        // weights (n+1) x^n: tail = x^D (D(1-x) + 1)
        return std::exp(-bw * d) * (d * one_minus_x + 1.0);
    }
    return 1.0;
}

std::size_t adaptive_cutoff(ThermalFamily family, double beta, double omega, double tail_tol,
                            std::size_t max_cutoff) {
    for (std::size_t d = 2; d <= max_cutoff; ++d) {
        if (tail_mass(family, beta, omega, d) <= tail_tol) {
            return d;
        }
    }
    throw TruncationError("no cutoff <= " + std::to_string(max_cutoff) + " reaches tail " +
                          std::to_string(tail_tol));
}

DensityState thermal_family_state(ThermalFamily family, double beta, const OscillatorMode& mode,
                                  double tail_tol) {
    require_beta(beta);
    const double tail = tail_mass(family, beta, mode.omega, mode.cutoff);
    if (tail > tail_tol) {
        throw TruncationError("cutoff " + std::to_string(mode.cutoff) + " leaves tail mass " +
                              std::to_string(tail) + " > " + std::to_string(tail_tol));
    }
    const auto d = static_cast<Eigen::Index>(mode.cutoff);
    const double bw = beta * mode.omega;
    Eigen::VectorXd w(d);
    for (Eigen::Index n = 0; n < d; ++n) {
        const double nn = static_cast<double>(n);
        const double x_n = std::exp(-bw * nn);
        switch (family) {
        case ThermalFamily::thermal: w(n) = x_n; break;
        case ThermalFamily::photon_added: w(n) = nn * x_n; break;
        case ThermalFamily::photon_subtracted: w(n) = (nn + 1.0) * x_n; break;
        }
    }
    const double total = w.sum();
    if (!(total > 0.0)) {
        throw DegenerateMapError("thermal_family_state: no weight inside cutoff");
    }
    w /= total;
    return DensityState::trusted(mode.space(), w.cast<Complex>().asDiagonal(), tail);
}

DensityState thermal_state(double beta, const OscillatorMode& mode, double tail_tol) {
    return thermal_family_state(ThermalFamily::thermal, beta, mode, tail_tol);
}

DensityState photon_added_state(double beta, const OscillatorMode& mode, double tail_tol) {
    return thermal_family_state(ThermalFamily::photon_added, beta, mode, tail_tol);
}

DensityState photon_subtracted_state(double beta, const OscillatorMode& mode, double tail_tol) {
    return thermal_family_state(ThermalFamily::photon_subtracted, beta, mode, tail_tol);
}

// ---------------------------------------------------------------- pure states

PureState binomial_state(std::size_t n, double p, const HilbertSpace& space,
                         const std::vector<double>& phases) {
    if (!(p >= 0.0 && p <= 1.0)) {
        throw DomainError("binomial_state: p outside [0,1]");
    }
    if (n >= space.dim()) {
        throw DimensionError("binomial_state: n = " + std::to_string(n) + " needs dim > n, got " +
                             std::to_string(space.dim()));
    }
    if (!phases.empty() && phases.size() != n + 1) {
        throw DimensionError("binomial_state: expected n+1 phases");
    }
    Vector psi = Vector::Zero(static_cast<Eigen::Index>(space.dim()));
    const double q = 1.0 - p;
    for (std::size_t k = 0; k <= n; ++k) {
        double weight;
        if (p == 0.0) {
            weight = k == 0 ? 1.0 : 0.0;
        } else if (q == 0.0) {
            weight = k == n ? 1.0 : 0.0;
        } else {
            const double kk = static_cast<double>(k), nn = static_cast<double>(n);
            weight = std::exp(std::lgamma(nn + 1.0) - std::lgamma(kk + 1.0) - std::lgamma(nn - kk + 1.0) +
                              kk * std::log(p) + (nn - kk) * std::log1p(-p));
        }
        const double phi = phases.empty() ? 0.0 : phases[k];
        psi(static_cast<Eigen::Index>(k)) = std::polar(std::sqrt(weight), phi);
    }
    psi /= psi.norm();
    return PureState(space, std::move(psi));
}

PureState coherent_state(Complex alpha, const HilbertSpace& space, double tail_tol) {
    const double lambda = std::norm(alpha);
    const auto d = static_cast<Eigen::Index>(space.dim());
    Vector psi = Vector::Zero(d);
    if (lambda == 0.0) {
        psi(0) = 1.0;
        return PureState(space, std::move(psi));
    }
    const double log_lambda = std::log(lambda);
    const double theta = std::arg(alpha);
    auto log_poisson = [&](double k) { return -lambda + k * log_lambda - std::lgamma(k + 1.0); };
    for (Eigen::Index k = 0; k < d; ++k) {
        const double kk = static_cast<double>(k);
        psi(k) = std::polar(std::exp(0.5 * log_poisson(kk)), kk * theta);
    }
    // Poisson upper tail summed directly; terms decay once k exceeds lambda.
    double tail = 0.0;
    for (double k = static_cast<double>(d);; k += 1.0) {
        const double t = std::exp(log_poisson(k));
        tail += t;
        if (k > lambda && t < 1e-18 * std::max(tail, 1e-300)) {
            break;
        }
        if (k > static_cast<double>(d) + 10.0 * lambda + 1000.0) {
            break;
        }
    }
    if (tail > tail_tol) {
        throw TruncationError("coherent_state: tail mass " + std::to_string(tail) + " exceeds " +
                              std::to_string(tail_tol));
    }
    psi /= psi.norm();
    return PureState(space, std::move(psi), tail);
}

PureState basis_state(const HilbertSpace& space, std::size_t k) {
    if (k >= space.dim()) {
        throw DimensionError("basis_state: level out of range");
    }
    Vector psi = Vector::Zero(static_cast<Eigen::Index>(space.dim()));
    psi(static_cast<Eigen::Index>(k)) = 1.0;
    return PureState(space, std::move(psi));
}

// ---------------------------------------------------------------- algebra

OperatorMatrix tensor(const OperatorMatrix& a, const OperatorMatrix& b) {
    return OperatorMatrix(HilbertSpace::product(a.space(), b.space()),
                          Eigen::kroneckerProduct(a.matrix(), b.matrix()).eval());
}

DensityState tensor(const DensityState& a, const DensityState& b) {
    const double tail = 1.0 - (1.0 - a.tail_mass()) * (1.0 - b.tail_mass());
    return DensityState::trusted(HilbertSpace::product(a.space(), b.space()),
                                 Eigen::kroneckerProduct(a.matrix(), b.matrix()).eval(), tail);
}

PureState tensor(const PureState& a, const PureState& b) {
    const double tail = 1.0 - (1.0 - a.tail_mass()) * (1.0 - b.tail_mass());
    return PureState(HilbertSpace::product(a.space(), b.space()),
                     Eigen::kroneckerProduct(a.amplitudes(), b.amplitudes()).eval(), tail);
}

OperatorMatrix dagger(const OperatorMatrix& op) {
    return OperatorMatrix(op.space(), op.matrix().adjoint());
}

Complex trace(const OperatorMatrix& op) {
    return op.matrix().trace();
}

Complex trace(const DensityState& rho) {
    return rho.matrix().trace();
}

Complex expectation(const OperatorMatrix& op, const DensityState& rho) {
    require_same(op.space(), rho.space(), "expectation");
    // Tr[A rho] without forming the product.
    return (op.matrix().transpose().cwiseProduct(rho.matrix())).sum();
}

Complex expectation(const OperatorMatrix& op, const PureState& psi) {
    require_same(op.space(), psi.space(), "expectation");
    return psi.amplitudes().dot(op.matrix() * psi.amplitudes());
}

double fidelity(const PureState& psi, const DensityState& rho) {
    require_same(psi.space(), rho.space(), "fidelity");
    return psi.amplitudes().dot(rho.matrix() * psi.amplitudes()).real();
}

}  // namespace qflux
