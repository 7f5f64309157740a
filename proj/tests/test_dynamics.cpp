#include "qflux/dynamics.hpp"
#include "qflux/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace qflux;

namespace {

const HilbertSpace switch_space(2, "switch");

DensityState joint(const DensityState& s, const DensityState& b, Sector sec) {
    return tensor(tensor(s, b), basis_state(switch_space, static_cast<std::size_t>(sec)).density());
}

MeasurementOperator joint(const MeasurementOperator& s, const MeasurementOperator& b, Sector sec) {
    return tensor(tensor(s, b), MeasurementOperator(basis_projector(switch_space, static_cast<std::size_t>(sec))));
}

JointModel small_model() {
    return build_joint_model(Rational(1), Rational(3, 2), 4, SwitchedBattery(12, default_spacing(1, Rational(3, 2))));
}

}  // namespace

TEST_CASE("energies are exact keys") {
    const JointModel m = small_model();
    CHECK(m.dim() == 4 * 12 * 2);
    const Eigen::VectorXd e = m.energies();
    for (std::size_t k = 0; k < m.dim(); ++k) {
        const BasisLabel b = m.label(k);
        CHECK(m.index(b.n, b.w, b.sector) == k);
        const double ws = m.omega(b.sector).value();
        const double expected = ws * (b.n + 0.5) + 0.25 * (b.w + 0.5);
        CHECK(m.energy(k) == doctest::Approx(expected).epsilon(1e-15));
        CHECK(e(static_cast<Eigen::Index>(k)) == doctest::Approx(expected).epsilon(1e-15));
    }
    CHECK(m.cross_degeneracies() > 0);
    CHECK((m.hamiltonian().matrix().diagonal().real() - e).norm() < 1e-12);
}

TEST_CASE("frequencies must be commensurate") {
    const SwitchedBattery b(6, Rational(1, 2));
    CHECK_THROWS_AS(build_joint_model(1.0, M_PI, 3, b), IncommensurateError);
    CHECK_NOTHROW(build_joint_model(1.0, 1.5, 3, SwitchedBattery(6, Rational(1, 4))));
    CHECK(default_spacing(Rational(1), Rational(3, 2)) == Rational(1, 4));
    CHECK(default_spacing(Rational(2), Rational(3)) == Rational(1, 2));
    CHECK_THROWS_AS(SwitchedBattery(1, Rational(1)), DimensionError);
    CHECK_THROWS_AS(SwitchedBattery(4, Rational(0)), DomainError);
}

TEST_CASE("spectral blocks partition the basis by energy") {
    const JointModel m = small_model();
    const auto blocks = spectral_blocks(m);
    std::set<std::size_t> seen;
    double last = -1.0;
    for (const auto& b : blocks) {
        CHECK(b.energy > last);
        last = b.energy;
        for (std::size_t i : b.indices) {
            CHECK(m.energy_key(i) == b.key);
            CHECK(seen.insert(i).second);
        }
    }
    CHECK(seen.size() == m.dim());
}

TEST_CASE("sampled unitaries conserve energy and are symmetric") {
    const JointModel m = small_model();
    const auto blocks = spectral_blocks(m);
    const ConservingUnitary u = sample_conserving_unitary(blocks, 42);
    CHECK(u.unitarity_defect() < 1e-12);
    CHECK(u.symmetry_defect() < 1e-12);
    CHECK(u.commutator_norm(m.energies()) < 1e-12);
    const Matrix d = u.dense();
    CHECK((d * d.adjoint() - Matrix::Identity(d.rows(), d.cols())).norm() < 1e-12);
    const ConservingUnitary again = sample_conserving_unitary(blocks, 42);
    CHECK((again.dense() - d).norm() == 0.0);
    CHECK((identity_unitary(blocks).dense() - Matrix::Identity(d.rows(), d.cols())).norm() == 0.0);
}

TEST_CASE("translation invariant unitaries repeat along the ladder") {
    const JointModel m = build_joint_model(Rational(1), Rational(2), 3, SwitchedBattery(60, Rational(1, 2)));
    const auto blocks = spectral_blocks(m);
    const LevelWindow win = ladder_interior(m, blocks);
    const ConservingUnitary u = sample_translation_invariant_unitary(m, blocks, win, 7);
    CHECK(u.unitarity_defect() < 1e-12);
    CHECK(u.symmetry_defect() < 1e-12);
    const std::size_t q = max_work_quantum(m, blocks);
    for (std::size_t w = win.lo; w + 1 <= win.hi; ++w) {
        const Matrix a = battery_slice(u, m, {w, Sector::f}, {w + q, Sector::i});
        const Matrix b = battery_slice(u, m, {w + 1, Sector::f}, {w + 1 + q, Sector::i});
        if (w + 1 + q <= win.hi) {
            CHECK((a - b).norm() < 1e-14);
        }
    }
    CHECK_THROWS_AS(sample_translation_invariant_unitary(m, blocks, LevelWindow{win.lo, win.lo + 1}, 7), WindowError);
    CHECK_THROWS_AS(sample_translation_invariant_unitary(m, blocks, LevelWindow{0, 59}, 7), WindowError);
}

TEST_CASE("level transitions agree with the single-pair routines") {
    const JointModel m = small_model();
    const auto blocks = spectral_blocks(m);
    const ConservingUnitary u = sample_conserving_unitary(blocks, 3);
    const OscillatorMode mode(1.0, 4);
    const DensityState rho = thermal_state(0.4, mode, 1.0);
    const BatteryLevel start{6, Sector::i};
    const LevelTransitions lt = level_transitions(rho, start, Sector::f, u, m, PhotonCount::n_plus_one);
    double total = 0.0;
    for (std::size_t w = 0; w < 12; ++w) {
        const double p = transition_probability({w, Sector::f}, rho, start, u, m);
        CHECK(lt.probability[w] == doctest::Approx(p).epsilon(1e-12));
        total += p + transition_probability({w, Sector::i}, rho, start, u, m);
        if (p > 1e-8) {
            const auto c = conditional_photon_number({w, Sector::f}, rho, start, u, m, PhotonCount::n_plus_one);
            CHECK(lt.weighted[w] / lt.probability[w] == doctest::Approx(c.mean).epsilon(1e-10));
        }
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    const MeasurementOperator id(identity(m.system_space()));
    const double q = q_battery_eigen(id, rho, {5, Sector::f}, start, u, m);
    CHECK(q == doctest::Approx(lt.probability[5]).epsilon(1e-12));
    CHECK_THROWS_AS(conditional_photon_number({0, Sector::i}, rho, {11, Sector::i}, identity_unitary(blocks), m),
                    UndefinedRatioError);
    CHECK_THROWS_AS(transition_probability({0, Sector::f}, thermal_state(0.4, OscillatorMode(1.0, 5), 1.0), start, u, m),
                    DimensionError);
}

TEST_CASE("global fluctuation relation on a small model") {
    const JointModel m = small_model();
    const auto blocks = spectral_blocks(m);
    const double beta = 0.9;
    const HilbertSpace sys = m.system_space(), lad = m.battery().ladder_space();
    const auto hs_i = m.system_hamiltonian(Sector::i), hs_f = m.system_hamiltonian(Sector::f);
    const auto hb = m.battery().ladder_hamiltonian();
    const MeasurementOperator xs_i(identity(sys));
    const MeasurementOperator xs_f(projector(binomial_state(2, 0.4, sys)));
    Matrix xb_i_m = Matrix::Zero(12, 12);
    xb_i_m(4, 4) = 1.0;
    xb_i_m(5, 5) = 0.5;
    const MeasurementOperator xb_i(lad, xb_i_m);
    const MeasurementOperator xb_f(basis_projector(lad, 7));
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const ConservingUnitary u = sample_conserving_unitary(blocks, seed);
        const DensityState rho_i = joint(gibbs_map(xs_i, hs_i, beta), gibbs_map(xb_i, hb, beta), Sector::i);
        const DensityState rho_f = joint(gibbs_map(xs_f, hs_f, beta), gibbs_map(xb_f, hb, beta), Sector::f);
        const double q_f = q_quantity(joint(xs_f, xb_f, Sector::f), rho_i, u);
        const double q_r = q_quantity(joint(xs_i, xb_i, Sector::i), rho_f, u);
        REQUIRE(q_f > 1e-10);
        const double lhs = std::log(q_f / q_r);
        const double rhs = beta * (gen_work_diff(beta, hb, xb_i, xb_f) - gen_free_energy_diff(beta, hs_i, xs_i, hs_f, xs_f));
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
    }
}

TEST_CASE("work distributions are normalised") {
    const JointModel m = build_joint_model(Rational(1), Rational(2), 3, SwitchedBattery(60, Rational(1, 2)));
    const auto blocks = spectral_blocks(m);
    const LevelWindow win = ladder_interior(m, blocks);
    const ConservingUnitary u = sample_translation_invariant_unitary(m, blocks, win, 11);
    const DensityState rho = thermal_state(0.5, OscillatorMode(1.0, 3), 1.0);
    const std::size_t mid = (win.lo + win.hi) / 2;
    const WorkDistribution f = work_distribution(Direction::forward, rho, mid, u, m);
    CHECK(f.total() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(f.delta == doctest::Approx(0.5));
    CHECK_THROWS_AS(work_distribution(Direction::forward, rho, 0, u, m), WindowError);
}
