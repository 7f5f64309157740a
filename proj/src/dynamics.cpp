#include "qflux/dynamics.hpp"

#include "qflux/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <unordered_map>

namespace qflux {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t value) {
    return splitmix64(seed ^ splitmix64(value + 0x632be59bd9b4e019ULL));
}

std::vector<Eigen::Index> as_eigen_indices(const std::vector<std::size_t>& idx) {
    return {idx.begin(), idx.end()};
}

// exp(iK) for K real symmetric with i.i.d. normal entries, symmetrised.
Matrix goe_exponential(std::size_t b, std::mt19937_64& rng) {
    const auto n = static_cast<Eigen::Index>(b);
    if (b == 1) {
        std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
        return Matrix::Constant(1, 1, std::polar(1.0, phase(rng)));
    }
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index c = 0; c < n; ++c) {
            k(r, c) = normal(rng);
        }
    }
    k = 0.5 * (k + k.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k);
    const Matrix v = es.eigenvectors().cast<Complex>();
    Vector phases(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        phases(j) = std::polar(1.0, es.eigenvalues()(j));
    }
    Matrix u = v * phases.asDiagonal() * v.transpose();
    return 0.5 * (u + u.transpose());
}

// Haar-random unitary from the QR decomposition of a complex Gaussian matrix.
Matrix haar_unitary(std::size_t b, std::mt19937_64& rng) {
    const auto n = static_cast<Eigen::Index>(b);
    std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
    Matrix z(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index c = 0; c < n; ++c) {
            const double re = normal(rng);
            z(r, c) = Complex(re, normal(rng));
        }
    }
    Eigen::HouseholderQR<Matrix> qr(z);
    Matrix q = qr.householderQ();
    const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < n; ++j) {
        const Complex d = r(j, j);
        q.col(j) *= std::abs(d) > 0.0 ? d / std::abs(d) : Complex(1.0);
    }
    return q;
}

// Members of an unrestricted block: every (sector, n) whose battery level is an integer.
struct PatternMember {
    Sector sector;
    std::size_t n;
    long w;
};

std::vector<PatternMember> block_pattern(const JointModel& model, std::int64_t key) {
    std::vector<PatternMember> out;
    const std::int64_t kb = model.k_battery();
    for (Sector s : {Sector::i, Sector::f}) {
        for (std::size_t n = 0; n < model.system_cutoff(); ++n) {
            const std::int64_t r = key - model.k_system(s) * static_cast<std::int64_t>(2 * n + 1);
            if (r % kb != 0) {
                continue;
            }
            const std::int64_t t = r / kb;
            if (t % 2 == 0) {
                continue;
            }
            out.push_back({s, n, static_cast<long>((t - 1) / 2)});
        }
    }
    return out;
}

bool block_complete(const JointModel& model, const EnergyBlock& block) {
    const auto pattern = block_pattern(model, block.key);
    const long l = static_cast<long>(model.battery().ladder_dim);
    return std::all_of(pattern.begin(), pattern.end(), [&](const PatternMember& m) { return m.w >= 0 && m.w < l; });
}

}  // namespace

// ---------------------------------------------------------------- battery and model

SwitchedBattery::SwitchedBattery(std::size_t ladder_dim_, Rational spacing_) : ladder_dim(ladder_dim_), spacing(spacing_) {
    if (ladder_dim < 2) {
        throw DimensionError("SwitchedBattery: ladder_dim must be >= 2");
    }
    if (spacing.num() <= 0) {
        throw DomainError("SwitchedBattery: spacing must be positive");
    }
}

HilbertSpace SwitchedBattery::space() const {
    return HilbertSpace::product(ladder_space(), HilbertSpace(2, "switch"));
}

OperatorMatrix SwitchedBattery::ladder_hamiltonian() const {
    return OperatorMatrix(ladder_space(), qflux::hamiltonian(OscillatorMode(spacing.value(), ladder_dim)).matrix());
}

OperatorMatrix SwitchedBattery::hamiltonian() const {
    return tensor(ladder_hamiltonian(), identity(HilbertSpace(2, "switch")));
}

OperatorMatrix SwitchedBattery::sector_projector(Sector s) const {
    return tensor(identity(ladder_space()), basis_projector(HilbertSpace(2, "switch"), static_cast<std::size_t>(s)));
}

JointModel::JointModel(Rational omega_i, Rational omega_f, std::size_t system_cutoff, SwitchedBattery battery)
    : omega_i_(omega_i), omega_f_(omega_f), ds_(system_cutoff), battery_(std::move(battery)) {
    if (omega_i_.num() <= 0 || omega_f_.num() <= 0) {
        throw DomainError("JointModel: frequencies must be positive");
    }
    if (ds_ < 2) {
        throw DimensionError("JointModel: system cutoff must be >= 2");
    }
    const Rational half(1, 2);
    const Rational ri = omega_i_ * half, rf = omega_f_ * half, rb = battery_.spacing * half;
    unit_ = lcm64(lcm64(ri.den(), rf.den()), rb.den());
    k_i_ = ri.num() * (unit_ / ri.den());
    k_f_ = rf.num() * (unit_ / rf.den());
    k_b_ = rb.num() * (unit_ / rb.den());
}

HilbertSpace JointModel::space() const {
    return HilbertSpace::product(system_space(), battery_.space());
}

OscillatorMode JointModel::system_mode(Sector s) const {
    return OscillatorMode(omega(s).value(), ds_);
}

OperatorMatrix JointModel::system_hamiltonian(Sector s) const {
    return qflux::hamiltonian(system_mode(s));
}

Eigen::VectorXd JointModel::energies() const {
    Eigen::VectorXd e(static_cast<Eigen::Index>(dim()));
    for (std::size_t j = 0; j < dim(); ++j) {
        e(static_cast<Eigen::Index>(j)) = energy(j);
    }
    return e;
}

OperatorMatrix JointModel::hamiltonian() const {
    return OperatorMatrix(space(), energies().cast<Complex>().asDiagonal());
}

BasisLabel JointModel::label(std::size_t index) const noexcept {
    const std::size_t per_n = battery_.ladder_dim * 2;
    const std::size_t n = index / per_n;
    const std::size_t rest = index % per_n;
    return {n, rest / 2, rest % 2 == 0 ? Sector::i : Sector::f};
}

std::int64_t JointModel::energy_key(std::size_t index) const {
    const BasisLabel l = label(index);
    return k_system(l.sector) * static_cast<std::int64_t>(2 * l.n + 1) + k_b_ * static_cast<std::int64_t>(2 * l.w + 1);
}

std::size_t JointModel::cross_degeneracies() const {
    std::unordered_map<std::int64_t, std::pair<std::size_t, std::size_t>> counts;
    for (std::size_t j = 0; j < dim(); ++j) {
        auto& c = counts[energy_key(j)];
        (label(j).sector == Sector::i ? c.first : c.second) += 1;
    }
    std::size_t total = 0;
    for (const auto& [key, c] : counts) {
        total += c.first * c.second;
    }
    return total;
}

JointModel build_joint_model(Rational omega_i, Rational omega_f, std::size_t system_cutoff,
                             const SwitchedBattery& battery, std::size_t min_cross_degeneracies) {
    JointModel model(omega_i, omega_f, system_cutoff, battery);
    const std::size_t found = model.cross_degeneracies();
    if (found < min_cross_degeneracies) {
        throw IncommensurateError("only " + std::to_string(found) + " cross-sector degeneracies, need " +
                                  std::to_string(min_cross_degeneracies));
    }
    return model;
}

JointModel build_joint_model(double omega_i, double omega_f, std::size_t system_cutoff, const SwitchedBattery& battery,
                             std::size_t min_cross_degeneracies) {
    const auto ri = Rational::from_double(omega_i);
    const auto rf = Rational::from_double(omega_f);
    if (!ri || !rf) {
        throw IncommensurateError("frequencies are not rationals with denominator <= 64");
    }
    return build_joint_model(*ri, *rf, system_cutoff, battery, min_cross_degeneracies);
}

Rational default_spacing(Rational omega_i, Rational omega_f) {
    const std::int64_t den = lcm64(omega_i.den(), omega_f.den());
    const std::int64_t g = std::gcd(omega_i.num() * (den / omega_i.den()), omega_f.num() * (den / omega_f.den()));
    return Rational(g, 2 * den);
}

std::vector<EnergyBlock> spectral_blocks(const JointModel& model, double degeneracy_tol) {
    std::vector<std::size_t> order(model.dim());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<std::int64_t> keys(model.dim());
    for (std::size_t j = 0; j < model.dim(); ++j) {
        keys[j] = model.energy_key(j);
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
    std::vector<EnergyBlock> blocks;
    for (std::size_t pos = 0; pos < order.size();) {
        const std::int64_t key = keys[order[pos]];
        EnergyBlock block{static_cast<double>(key) / static_cast<double>(model.unit()), key, {}};
        while (pos < order.size() && keys[order[pos]] == key) {
            const std::size_t j = order[pos++];
            if (std::abs(model.energy(j) - block.energy) > degeneracy_tol) {
                throw DomainError("spectral_blocks: energy spread exceeds degeneracy_tol");
            }
            block.indices.push_back(j);
        }
        blocks.push_back(std::move(block));
    }
    return blocks;
}

// ---------------------------------------------------------------- unitaries

ConservingUnitary::ConservingUnitary(std::size_t dim, std::vector<Block> blocks, std::uint64_t seed,
                                     std::optional<LevelWindow> window)
    : dim_(dim), blocks_(std::move(blocks)), seed_(seed), window_(window),
      block_of_(dim, dim), pos_of_(dim, 0) {
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        const Block& blk = blocks_[b];
        const auto sz = static_cast<Eigen::Index>(blk.indices.size());
        if (blk.u.rows() != sz || blk.u.cols() != sz) {
            throw DimensionError("ConservingUnitary: block matrix does not match its indices");
        }
        for (std::size_t p = 0; p < blk.indices.size(); ++p) {
            const std::size_t j = blk.indices[p];
            if (j >= dim || block_of_[j] != dim) {
                throw DimensionError("ConservingUnitary: blocks do not partition the basis");
            }
            block_of_[j] = b;
            pos_of_[j] = p;
        }
        const double defect = (blk.u.adjoint() * blk.u - Matrix::Identity(sz, sz)).cwiseAbs().maxCoeff();
        if (defect > 1e-10) {
            throw DomainError("ConservingUnitary: block is not unitary");
        }
    }
    if (std::find(block_of_.begin(), block_of_.end(), dim) != block_of_.end()) {
        throw DimensionError("ConservingUnitary: blocks do not cover the basis");
    }
}

Complex ConservingUnitary::element(std::size_t row, std::size_t col) const noexcept {
    if (block_of_[row] != block_of_[col]) {
        return 0.0;
    }
    return blocks_[block_of_[row]].u(static_cast<Eigen::Index>(pos_of_[row]), static_cast<Eigen::Index>(pos_of_[col]));
}

Matrix ConservingUnitary::dense() const {
    const auto d = static_cast<Eigen::Index>(dim_);
    Matrix out = Matrix::Zero(d, d);
    for (const Block& blk : blocks_) {
        const auto idx = as_eigen_indices(blk.indices);
        out(idx, idx) = blk.u;
    }
    return out;
}

Matrix ConservingUnitary::conjugate(const Matrix& rho) const {
    const auto d = static_cast<Eigen::Index>(dim_);
    if (rho.rows() != d || rho.cols() != d) {
        throw DimensionError("ConservingUnitary::conjugate: dimension mismatch");
    }
    Matrix left(d, d);
    for (const Block& blk : blocks_) {
        const auto idx = as_eigen_indices(blk.indices);
        left(idx, Eigen::all) = blk.u * rho(idx, Eigen::all);
    }
    Matrix out(d, d);
    for (const Block& blk : blocks_) {
        const auto idx = as_eigen_indices(blk.indices);
        out(Eigen::all, idx) = left(Eigen::all, idx) * blk.u.adjoint();
    }
    return out;
}

double ConservingUnitary::unitarity_defect() const {
    double worst = 0.0;
    for (const Block& blk : blocks_) {
        const auto n = blk.u.rows();
        worst = std::max(worst, (blk.u.adjoint() * blk.u - Matrix::Identity(n, n)).norm());
    }
    return worst;
}

double ConservingUnitary::symmetry_defect() const {
    double worst = 0.0;
    for (const Block& blk : blocks_) {
        worst = std::max(worst, (blk.u - blk.u.transpose()).norm());
    }
    return worst;
}

double ConservingUnitary::commutator_norm(const Eigen::VectorXd& energies) const {
    // [U, H]_{ab} = U_ab (E_b - E_a) inside each block
    double acc = 0.0;
    for (const Block& blk : blocks_) {
        for (std::size_t r = 0; r < blk.indices.size(); ++r) {
            for (std::size_t c = 0; c < blk.indices.size(); ++c) {
                const double gap = energies(static_cast<Eigen::Index>(blk.indices[c])) -
                                   energies(static_cast<Eigen::Index>(blk.indices[r]));
                acc += std::norm(blk.u(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) * gap);
            }
        }
    }
    return std::sqrt(acc);
}

ConservingUnitary sample_conserving_unitary(const std::vector<EnergyBlock>& blocks, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<ConservingUnitary::Block> out;
    out.reserve(blocks.size());
    std::size_t dim = 0;
    for (const EnergyBlock& b : blocks) {
        out.push_back({b.indices, goe_exponential(b.indices.size(), rng)});
        dim += b.indices.size();
    }
    return ConservingUnitary(dim, std::move(out), seed);
}

ConservingUnitary identity_unitary(const std::vector<EnergyBlock>& blocks) {
    std::vector<ConservingUnitary::Block> out;
    std::size_t dim = 0;
    for (const EnergyBlock& b : blocks) {
        const auto n = static_cast<Eigen::Index>(b.indices.size());
        out.push_back({b.indices, Matrix::Identity(n, n)});
        dim += b.indices.size();
    }
    return ConservingUnitary(dim, std::move(out), 0);
}

LevelWindow ladder_interior(const JointModel& model, const std::vector<EnergyBlock>& blocks) {
    const std::size_t l = model.battery().ladder_dim;
    std::vector<char> ok(l, 1);
    for (const EnergyBlock& b : blocks) {
        if (block_complete(model, b)) {
            continue;
        }
        for (std::size_t j : b.indices) {
            ok[model.label(j).w] = 0;
        }
    }
    // longest run of levels touched only by complete blocks
    std::size_t best_lo = 0, best_len = 0;
    for (std::size_t w = 0; w < l;) {
        if (!ok[w]) {
            ++w;
            continue;
        }
        std::size_t end = w;
        while (end < l && ok[end]) {
            ++end;
        }
        if (end - w > best_len) {
            best_len = end - w;
            best_lo = w;
        }
        w = end;
    }
    if (best_len == 0) {
        throw WindowError("battery ladder has no interior level");
    }
    return {best_lo, best_lo + best_len - 1};
}

std::size_t max_work_quantum(const JointModel& model, const std::vector<EnergyBlock>& blocks) {
    std::size_t q = 0;
    for (const EnergyBlock& b : blocks) {
        std::size_t lo = model.battery().ladder_dim, hi = 0;
        for (std::size_t j : b.indices) {
            const std::size_t w = model.label(j).w;
            lo = std::min(lo, w);
            hi = std::max(hi, w);
        }
        q = std::max(q, hi - lo);
    }
    return q;
}

ConservingUnitary sample_translation_invariant_unitary(const JointModel& model, const std::vector<EnergyBlock>& blocks,
                                                       LevelWindow window, std::uint64_t seed) {
    const LevelWindow interior = ladder_interior(model, blocks);
    if (window.lo > window.hi || window.lo < interior.lo || window.hi > interior.hi) {
        throw WindowError("window [" + std::to_string(window.lo) + ", " + std::to_string(window.hi) +
                          "] exceeds ladder interior [" + std::to_string(interior.lo) + ", " +
                          std::to_string(interior.hi) + "]");
    }
    const std::size_t quantum = max_work_quantum(model, blocks);
    if (window.width() < 3 * quantum) {
        throw WindowError("window of " + std::to_string(window.width()) + " levels is narrower than 3x the work quantum " +
                          std::to_string(quantum));
    }

    std::vector<ConservingUnitary::Block> out;
    std::size_t dim = 0;
    for (const EnergyBlock& b : blocks) {
        const std::size_t sz = b.indices.size();
        dim += sz;
        if (!block_complete(model, b)) {
            std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(b.key) * 2 + 1));
            out.push_back({b.indices, goe_exponential(sz, rng)});
            continue;
        }
        // Pattern hash: sectors and system levels of the members, in index order.
        std::uint64_t h = 0x51ed270b27a3c1d5ULL;
        std::vector<std::size_t> in_i, in_f;
        for (std::size_t p = 0; p < sz; ++p) {
            const BasisLabel lab = model.label(b.indices[p]);
            h = mix_seed(h, lab.n * 2 + static_cast<std::size_t>(lab.sector));
            (lab.sector == Sector::i ? in_i : in_f).push_back(p);
        }
        std::mt19937_64 rng(mix_seed(seed, h));
        if (in_i.size() != in_f.size() || in_i.empty()) {
            out.push_back({b.indices, goe_exponential(sz, rng)});
            continue;
        }
        const Matrix c = haar_unitary(in_i.size(), rng);
        const auto n = static_cast<Eigen::Index>(sz);
        Matrix u = Matrix::Zero(n, n);
        for (std::size_t r = 0; r < in_i.size(); ++r) {
            for (std::size_t s = 0; s < in_f.size(); ++s) {
                const auto a = static_cast<Eigen::Index>(in_i[r]);
                const auto z = static_cast<Eigen::Index>(in_f[s]);
                u(a, z) = c(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(s));
                u(z, a) = c(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(s));
            }
        }
        out.push_back({b.indices, std::move(u)});
    }
    return ConservingUnitary(dim, std::move(out), seed, window);
}

// ---------------------------------------------------------------- measurement statistics

double q_quantity(const MeasurementOperator& x, const DensityState& rho, const ConservingUnitary& u) {
    if (x.dim() != rho.dim() || x.dim() != u.dim()) {
        throw DimensionError("q_quantity: operator, state and unitary dimensions differ (" + std::to_string(x.dim()) +
                             ", " + std::to_string(rho.dim()) + ", " + std::to_string(u.dim()) + ")");
    }
    const Matrix evolved = u.conjugate(rho.matrix());
    const double q = x.matrix().transpose().cwiseProduct(evolved).sum().real();
    if (q < 0.0) {
        if (q < -1e-14) {
            throw DomainError("q_quantity: negative value " + std::to_string(q));
        }
        return 0.0;
    }
    return q;
}

Matrix battery_slice(const ConservingUnitary& u, const JointModel& model, BatteryLevel final_level,
                     BatteryLevel initial_level) {
    if (u.dim() != model.dim()) {
        throw DimensionError("battery_slice: unitary does not match model");
    }
    const std::size_t l = model.battery().ladder_dim;
    if (final_level.level >= l || initial_level.level >= l) {
        throw DimensionError("battery_slice: battery level outside ladder");
    }
    const auto ds = static_cast<Eigen::Index>(model.system_cutoff());
    Matrix a = Matrix::Zero(ds, ds);
    for (Eigen::Index n = 0; n < ds; ++n) {
        const std::size_t col = model.index(static_cast<std::size_t>(n), initial_level);
        const auto [b, pos] = u.locate(col);
        const auto& blk = u.blocks()[b];
        for (std::size_t r = 0; r < blk.indices.size(); ++r) {
            const BasisLabel lab = model.label(blk.indices[r]);
            if (lab.w == final_level.level && lab.sector == final_level.sector) {
                a(static_cast<Eigen::Index>(lab.n), n) = blk.u(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(pos));
            }
        }
    }
    return a;
}

double q_battery_eigen(const MeasurementOperator& x_s, const DensityState& rho_s, BatteryLevel final_level,
                       BatteryLevel initial_level, const ConservingUnitary& u, const JointModel& model) {
    const auto ds = model.system_cutoff();
    if (x_s.dim() != ds || rho_s.dim() != ds) {
        throw DimensionError("q_battery_eigen: system operators must match the system cutoff");
    }
    const Matrix a = battery_slice(u, model, final_level, initial_level);
    const Matrix evolved = a * rho_s.matrix() * a.adjoint();
    const double q = x_s.matrix().transpose().cwiseProduct(evolved).sum().real();
    return q < 0.0 && q >= -1e-14 ? 0.0 : q;
}

double transition_probability(BatteryLevel final_level, const DensityState& system_state, BatteryLevel initial_level,
                              const ConservingUnitary& u, const JointModel& model) {
    const auto ds = model.system_cutoff();
    if (system_state.dim() != ds) {
        throw DimensionError("transition_probability: system state must match the system cutoff");
    }
    const Matrix a = battery_slice(u, model, final_level, initial_level);
    const double p = (a * system_state.matrix() * a.adjoint()).trace().real();
    return p < 0.0 && p >= -1e-14 ? 0.0 : p;
}

ConditionalPhotonNumber conditional_photon_number(BatteryLevel final_level, const DensityState& system_state,
                                                  BatteryLevel initial_level, const ConservingUnitary& u,
                                                  const JointModel& model, PhotonCount which, double prob_floor) {
    const auto ds = model.system_cutoff();
    if (system_state.dim() != ds) {
        throw DimensionError("conditional_photon_number: system state must match the system cutoff");
    }
    const Matrix a = battery_slice(u, model, final_level, initial_level);
    const Matrix evolved = a * system_state.matrix() * a.adjoint();
    const double p = evolved.trace().real();
    if (!(p > prob_floor)) {
        throw UndefinedRatioError("conditional_photon_number: probability " + std::to_string(p) + " <= floor " +
                                  std::to_string(prob_floor));
    }
    const double offset = which == PhotonCount::n ? 0.0 : 1.0;
    double q = 0.0;
    for (Eigen::Index m = 0; m < evolved.rows(); ++m) {
        q += (static_cast<double>(m) + offset) * evolved(m, m).real();
    }
    return {q / p, p};
}

double WorkDistribution::total() const {
    double t = 0.0;
    for (const auto& [k, p] : probability) {
        t += p;
    }
    return t;
}

LevelTransitions level_transitions(const DensityState& system_state, BatteryLevel initial_level, Sector final_sector,
                                   const ConservingUnitary& u, const JointModel& model, PhotonCount which) {
    const std::size_t ds = model.system_cutoff();
    const std::size_t l = model.battery().ladder_dim;
    if (system_state.dim() != ds) {
        throw DimensionError("level_transitions: system state must match the system cutoff");
    }
    if (u.dim() != model.dim() || initial_level.level >= l) {
        throw DimensionError("level_transitions: unitary or battery level does not match model");
    }
    const Matrix& rho = system_state.matrix();
    const double offset = which == PhotonCount::n ? 0.0 : 1.0;
    LevelTransitions out{std::vector<double>(l, 0.0), std::vector<double>(l, 0.0)};
    const bool diagonal = (rho - Matrix(rho.diagonal().asDiagonal())).cwiseAbs().maxCoeff() == 0.0;
    if (diagonal) {
        for (std::size_t n = 0; n < ds; ++n) {
            const double weight = rho(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)).real();
            if (weight == 0.0) {
                continue;
            }
            const auto [b, pos] = u.locate(model.index(n, initial_level));
            const auto& blk = u.blocks()[b];
            for (std::size_t r = 0; r < blk.indices.size(); ++r) {
                const BasisLabel lab = model.label(blk.indices[r]);
                if (lab.sector != final_sector) {
                    continue;
                }
                const double p = weight * std::norm(blk.u(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(pos)));
                out.probability[lab.w] += p;
                out.weighted[lab.w] += (static_cast<double>(lab.n) + offset) * p;
            }
        }
        return out;
    }
    for (std::size_t w = 0; w < l; ++w) {
        const Matrix a = battery_slice(u, model, {w, final_sector}, initial_level);
        const Matrix evolved = a * rho * a.adjoint();
        for (Eigen::Index m = 0; m < evolved.rows(); ++m) {
            const double p = evolved(m, m).real();
            out.probability[w] += p;
            out.weighted[w] += (static_cast<double>(m) + offset) * p;
        }
    }
    return out;
}

WorkDistribution work_distribution(Direction dir, const DensityState& system_state, std::size_t reference_level,
                                   const ConservingUnitary& u, const JointModel& model) {
    if (!u.window() || !u.window()->contains(reference_level)) {
        throw WindowError("work_distribution: reference level " + std::to_string(reference_level) +
                          " is outside the translation-invariant window");
    }
    const Sector start = dir == Direction::forward ? Sector::i : Sector::f;
    const LevelTransitions t = level_transitions(system_state, {reference_level, start}, other(start), u, model);
    WorkDistribution out{model.battery().spacing.value(), {}};
    for (std::size_t w = 0; w < t.probability.size(); ++w) {
        if (t.probability[w] > 0.0) {
            out.probability[static_cast<long>(reference_level) - static_cast<long>(w)] = t.probability[w];
        }
    }
    return out;
}

}  // namespace qflux
