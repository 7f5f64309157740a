#include "qflux/rescale.hpp"

#include "qflux/errors.hpp"

#include <unsupported/Eigen/KroneckerProduct>

#include <cmath>
#include <limits>

namespace qflux {

namespace {

void require_beta(double beta) {
    if (!(beta >= min_beta) || !std::isfinite(beta)) {
        throw DomainError("beta = " + std::to_string(beta) + " below minimum " + std::to_string(min_beta));
    }
}

Eigen::VectorXd diagonal_energies(const OperatorMatrix& h) {
    const Matrix& m = h.matrix();
    Eigen::VectorXd e = m.diagonal().real();
    const double scale = std::max(1.0, e.cwiseAbs().maxCoeff());
    const double off = (m - Matrix(m.diagonal().asDiagonal())).cwiseAbs().maxCoeff();
    if (off > 1e-12 * scale || m.diagonal().imag().cwiseAbs().maxCoeff() > 1e-12 * scale) {
        throw DomainError("Hamiltonian must be real diagonal in the energy basis");
    }
    return e;
}

void require_same(const HilbertSpace& a, const HilbertSpace& b, const char* where) {
    if (!(a == b)) {
        throw DimensionError(std::string(where) + ": operator and Hamiltonian live on different spaces");
    }
}

}  // namespace

MeasurementOperator::MeasurementOperator(Unchecked, HilbertSpace space, Matrix m)
    : space_(std::move(space)), m_(std::move(m)) {}

MeasurementOperator MeasurementOperator::trusted(HilbertSpace space, Matrix m) {
    return MeasurementOperator(Unchecked{}, std::move(space), std::move(m));
}

MeasurementOperator::MeasurementOperator(const OperatorMatrix& op) : MeasurementOperator(op.space(), op.matrix()) {}

MeasurementOperator::MeasurementOperator(HilbertSpace space, Matrix m) : space_(std::move(space)), m_(std::move(m)) {
    const auto d = static_cast<Eigen::Index>(space_.dim());
    if (m_.rows() != d || m_.cols() != d) {
        throw DimensionError("MeasurementOperator: matrix does not match space");
    }
    if (!m_.allFinite()) {
        throw DomainError("MeasurementOperator: non-finite entry");
    }
    const double scale = std::max(1.0, m_.cwiseAbs().maxCoeff());
    if ((m_ - m_.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
        throw DomainError("MeasurementOperator: not Hermitian");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(m_, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-10 * scale) {
        throw DomainError("MeasurementOperator: not positive semidefinite");
    }
    if (!(m_.diagonal().real().maxCoeff() > 0.0)) {
        throw DegenerateMapError("MeasurementOperator: zero operator");
    }
}

MeasurementOperator tensor(const MeasurementOperator& a, const MeasurementOperator& b) {
    return MeasurementOperator::trusted(HilbertSpace::product(a.space(), b.space()),
                                        Eigen::kroneckerProduct(a.matrix(), b.matrix()).eval());
}

double EffectivePotentialValue::lower_bound() const {
    return e_min - std::log(x_trace) / beta;
}

double EffectivePotentialValue::upper_bound() const {
    return e_max - std::log(x_trace) / beta;
}

OperatorMatrix time_reversal(const OperatorMatrix& op) {
    return OperatorMatrix(op.space(), op.matrix().transpose());
}

MeasurementOperator time_reversal(const MeasurementOperator& x) {
    return MeasurementOperator::trusted(x.space(), x.matrix().transpose());
}

DensityState time_reversal(const DensityState& rho) {
    return DensityState::trusted(rho.space(), rho.matrix().transpose(), rho.tail_mass());
}

DensityState gibbs_map(const MeasurementOperator& x, const OperatorMatrix& h, double beta) {
    require_beta(beta);
    require_same(x.space(), h.space(), "gibbs_map");
    const Eigen::VectorXd e = diagonal_energies(h);
    const Eigen::VectorXd xd = x.matrix().diagonal().real();
    const auto d = e.size();

    double e_ref = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < d; ++j) {
        if (xd(j) > 0.0) {
            e_ref = std::min(e_ref, e(j));
        }
    }
    if (!std::isfinite(e_ref)) {
        throw DegenerateMapError("gibbs_map: Tr[exp(-beta H) X] vanishes");
    }
    Eigen::VectorXd s(d);
    double norm = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
        s(j) = xd(j) > 0.0 ? std::exp(-0.5 * beta * (e(j) - e_ref)) : 0.0;
        norm += xd(j) * s(j) * s(j);
    }
    if (!(norm > 1e-300)) {
        throw DegenerateMapError("gibbs_map: normalizer below 1e-300");
    }
    Matrix rho = s.asDiagonal() * x.matrix().transpose() * s.asDiagonal();
    rho /= norm;
    rho = 0.5 * (rho + rho.adjoint()).eval();
    return DensityState(x.space(), std::move(rho));
}

MeasurementOperator gibbs_map_inverse(const DensityState& rho, const OperatorMatrix& h, double beta,
                                      double log_amplification_limit) {
    require_beta(beta);
    require_same(rho.space(), h.space(), "gibbs_map_inverse");
    const Eigen::VectorXd e = diagonal_energies(h);
    const Eigen::VectorXd rd = rho.matrix().diagonal().real();
    const auto d = e.size();

    double e_lo = std::numeric_limits<double>::infinity();
    double e_hi = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < d; ++j) {
        if (rd(j) > 0.0) {
            e_lo = std::min(e_lo, e(j));
            e_hi = std::max(e_hi, e(j));
        }
    }
    if (!std::isfinite(e_lo)) {
        throw DegenerateMapError("gibbs_map_inverse: state has no diagonal weight");
    }
    if (beta * (e_hi - e_lo) > log_amplification_limit) {
        throw OverflowError("gibbs_map_inverse: amplification exp(" + std::to_string(beta * (e_hi - e_lo)) +
                            ") exceeds exp(" + std::to_string(log_amplification_limit) + ")");
    }
    Eigen::VectorXd t(d);
    for (Eigen::Index j = 0; j < d; ++j) {
        t(j) = rd(j) > 0.0 ? std::exp(0.5 * beta * (e(j) - e_hi)) : 0.0;
    }
    Matrix m = t.asDiagonal() * rho.matrix().transpose() * t.asDiagonal();
    m = 0.5 * (m + m.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
    const double top = es.eigenvalues().maxCoeff();
    if (!(top > 0.0)) {
        throw DegenerateMapError("gibbs_map_inverse: recovered operator vanishes");
    }
    m /= top;
    return MeasurementOperator(rho.space(), std::move(m));
}

EffectivePotentialValue effective_potential(double beta, const OperatorMatrix& h, const MeasurementOperator& x) {
    require_beta(beta);
    require_same(x.space(), h.space(), "effective_potential");
    const Eigen::VectorXd e = diagonal_energies(h);
    const Eigen::VectorXd xd = x.matrix().diagonal().real();

    EffectivePotentialValue out{0.0, beta, std::numeric_limits<double>::infinity(),
                                -std::numeric_limits<double>::infinity(), 0.0};
    for (Eigen::Index j = 0; j < e.size(); ++j) {
        if (xd(j) > 0.0) {
            out.e_min = std::min(out.e_min, e(j));
            out.e_max = std::max(out.e_max, e(j));
            out.x_trace += xd(j);
        }
    }
    if (!std::isfinite(out.e_min)) {
        throw DegenerateMapError("effective_potential: Tr[exp(-beta H) X] vanishes");
    }
    // logsumexp over ln X_jj - beta E_j, shifted by the smallest supported energy
    double acc = 0.0;
    for (Eigen::Index j = 0; j < e.size(); ++j) {
        if (xd(j) > 0.0) {
            acc += xd(j) * std::exp(-beta * (e(j) - out.e_min));
        }
    }
    if (!(acc > 1e-300)) {
        throw DegenerateMapError("effective_potential: normalizer below 1e-300");
    }
    out.value = out.e_min - std::log(acc) / beta;
    return out;
}

double gen_free_energy_diff(double beta, const OperatorMatrix& h_i, const MeasurementOperator& x_i,
                            const OperatorMatrix& h_f, const MeasurementOperator& x_f) {
    return effective_potential(beta, h_f, x_f).value - effective_potential(beta, h_i, x_i).value;
}

double gen_work_diff(double beta, const OperatorMatrix& h_b, const MeasurementOperator& x_b_i,
                     const MeasurementOperator& x_b_f) {
    return effective_potential(beta, h_b, x_b_i).value - effective_potential(beta, h_b, x_b_f).value;
}

}  // namespace qflux
