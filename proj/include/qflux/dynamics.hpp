#pragma once

#include "qflux/fock.hpp"
#include "qflux/rational.hpp"
#include "qflux/rescale.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

namespace qflux {

inline constexpr double default_prob_floor = 1e-12;

enum class Sector : std::size_t { i = 0, f = 1 };

inline Sector other(Sector s) noexcept { return s == Sector::i ? Sector::f : Sector::i; }

// Battery ladder with spacing delta and energies delta (w + 1/2), tensored with
// a degenerate two-level switch that marks the active system Hamiltonian.
struct SwitchedBattery {
    std::size_t ladder_dim;
    Rational spacing;

    SwitchedBattery(std::size_t ladder_dim, Rational spacing);

    HilbertSpace ladder_space() const { return {ladder_dim, "battery-ladder"}; }
    HilbertSpace space() const;
    OperatorMatrix ladder_hamiltonian() const;
    OperatorMatrix hamiltonian() const;
    OperatorMatrix sector_projector(Sector s) const;
};

struct BatteryLevel {
    std::size_t level;
    Sector sector;

    std::size_t index() const noexcept { return level * 2 + static_cast<std::size_t>(sector); }
};

struct BasisLabel {
    std::size_t n;
    std::size_t w;
    Sector sector;
};

class JointModel {
public:
    JointModel(Rational omega_i, Rational omega_f, std::size_t system_cutoff, SwitchedBattery battery);

    const Rational& omega_i() const noexcept { return omega_i_; }
    const Rational& omega_f() const noexcept { return omega_f_; }
    Rational omega(Sector s) const { return s == Sector::i ? omega_i_ : omega_f_; }
    std::size_t system_cutoff() const noexcept { return ds_; }
    const SwitchedBattery& battery() const noexcept { return battery_; }
    std::size_t dim() const noexcept { return ds_ * battery_.ladder_dim * 2; }

    HilbertSpace system_space() const { return {ds_, "system"}; }
    HilbertSpace space() const;

    OscillatorMode system_mode(Sector s) const;
    OperatorMatrix system_hamiltonian(Sector s) const;
    // Dense diagonal H_SB = 1 (x) H_B + H_S^i (x) P_i + H_S^f (x) P_f.
    OperatorMatrix hamiltonian() const;
    Eigen::VectorXd energies() const;

    // Energies are key / unit exactly.
    std::int64_t energy_key(std::size_t index) const;
    std::int64_t unit() const noexcept { return unit_; }
    double energy(std::size_t index) const { return static_cast<double>(energy_key(index)) / static_cast<double>(unit_); }

    std::size_t index(std::size_t n, std::size_t w, Sector s) const noexcept { return n * battery_.ladder_dim * 2 + w * 2 + static_cast<std::size_t>(s); }
    std::size_t index(std::size_t n, BatteryLevel b) const noexcept { return n * battery_.ladder_dim * 2 + b.index(); }
    BasisLabel label(std::size_t index) const noexcept;

    // Integer coefficients: key = k_s (2n+1) + k_b (2w+1).
    std::int64_t k_system(Sector s) const noexcept { return s == Sector::i ? k_i_ : k_f_; }
    std::int64_t k_battery() const noexcept { return k_b_; }

    // Number of (sector-i, sector-f) basis pairs sharing an energy.
    std::size_t cross_degeneracies() const;

private:
    Rational omega_i_, omega_f_;
    std::size_t ds_;
    SwitchedBattery battery_;
    std::int64_t unit_, k_i_, k_f_, k_b_;
};

JointModel build_joint_model(double omega_i, double omega_f, std::size_t system_cutoff, const SwitchedBattery& battery,
                             std::size_t min_cross_degeneracies = 1);
JointModel build_joint_model(Rational omega_i, Rational omega_f, std::size_t system_cutoff,
                             const SwitchedBattery& battery, std::size_t min_cross_degeneracies = 1);

// Half the largest common quantum of the two frequencies.
Rational default_spacing(Rational omega_i, Rational omega_f);

struct EnergyBlock {
    double energy;
    std::int64_t key;
    std::vector<std::size_t> indices;
};

// Groups basis indices by exact energy key; ascending energy, indices ascending.
// degeneracy_tol only guards the double-valued energies against the exact keys.
std::vector<EnergyBlock> spectral_blocks(const JointModel& model, double degeneracy_tol = 1e-9);

// Inclusive range of battery ladder levels.
struct LevelWindow {
    std::size_t lo;
    std::size_t hi;

    bool contains(std::size_t w) const noexcept { return w >= lo && w <= hi; }
    std::size_t width() const noexcept { return hi - lo + 1; }
};

// Block-diagonal unitary, stored per block.
class ConservingUnitary {
public:
    struct Block {
        std::vector<std::size_t> indices;
        Matrix u;
    };

    ConservingUnitary(std::size_t dim, std::vector<Block> blocks, std::uint64_t seed,
                      std::optional<LevelWindow> window = std::nullopt);

    std::size_t dim() const noexcept { return dim_; }
    std::uint64_t seed() const noexcept { return seed_; }
    const std::vector<Block>& blocks() const noexcept { return blocks_; }
    const std::optional<LevelWindow>& window() const noexcept { return window_; }

    // Block number and local position of a basis index.
    std::pair<std::size_t, std::size_t> locate(std::size_t index) const noexcept {
        return {block_of_[index], pos_of_[index]};
    }
    Complex element(std::size_t row, std::size_t col) const noexcept;

    Matrix dense() const;
    // U rho U^dagger exploiting the block structure.
    Matrix conjugate(const Matrix& rho) const;

    double unitarity_defect() const;
    double symmetry_defect() const;
    double commutator_norm(const Eigen::VectorXd& energies) const;

private:
    std::size_t dim_;
    std::vector<Block> blocks_;
    std::uint64_t seed_;
    std::optional<LevelWindow> window_;
    std::vector<std::size_t> block_of_, pos_of_;
};

// exp(iK) per block with K real symmetric Gaussian; seeded phases on singletons.
ConservingUnitary sample_conserving_unitary(const std::vector<EnergyBlock>& blocks, std::uint64_t seed);
ConservingUnitary identity_unitary(const std::vector<EnergyBlock>& blocks);

// Widest ladder window on which every block touching it is complete.
LevelWindow ladder_interior(const JointModel& model, const std::vector<EnergyBlock>& blocks);
// Largest battery level change any block can produce.
std::size_t max_work_quantum(const JointModel& model, const std::vector<EnergyBlock>& blocks);

// Block generators depend only on the block's internal pattern, never on its
// absolute battery level. Balanced patterns get a sector-swapping unitary.
ConservingUnitary sample_translation_invariant_unitary(const JointModel& model, const std::vector<EnergyBlock>& blocks,
                                                       LevelWindow window, std::uint64_t seed);

double q_quantity(const MeasurementOperator& x, const DensityState& rho, const ConservingUnitary& u);

// A[m, n] = <m, final| U |n, initial> on the system space.
Matrix battery_slice(const ConservingUnitary& u, const JointModel& model, BatteryLevel final_level,
                     BatteryLevel initial_level);

// Tr[X_S A rho_S A^dagger] for battery eigenstate preparation and measurement.
double q_battery_eigen(const MeasurementOperator& x_s, const DensityState& rho_s, BatteryLevel final_level,
                       BatteryLevel initial_level, const ConservingUnitary& u, const JointModel& model);

double transition_probability(BatteryLevel final_level, const DensityState& system_state, BatteryLevel initial_level,
                              const ConservingUnitary& u, const JointModel& model);

enum class PhotonCount { n, n_plus_one };

struct ConditionalPhotonNumber {
    double mean;
    double probability;
};

ConditionalPhotonNumber conditional_photon_number(BatteryLevel final_level, const DensityState& system_state,
                                                  BatteryLevel initial_level, const ConservingUnitary& u,
                                                  const JointModel& model, PhotonCount which = PhotonCount::n,
                                                  double prob_floor = default_prob_floor);

// Outcome statistics for every final level of one sector, from a single
// initial battery level; weighted[w] is the unnormalized (N + offset) moment.
struct LevelTransitions {
    std::vector<double> probability;
    std::vector<double> weighted;
};

LevelTransitions level_transitions(const DensityState& system_state, BatteryLevel initial_level, Sector final_sector,
                                   const ConservingUnitary& u, const JointModel& model,
                                   PhotonCount which = PhotonCount::n);

enum class Direction { forward, reverse };

// Work W = k * delta indexed by k, i.e. battery level change w0 - w_final.
struct WorkDistribution {
    double delta;
    std::map<long, double> probability;

    double total() const;
};

WorkDistribution work_distribution(Direction dir, const DensityState& system_state, std::size_t reference_level,
                                   const ConservingUnitary& u, const JointModel& model);

}  // namespace qflux
