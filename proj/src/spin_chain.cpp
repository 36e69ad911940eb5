#include "qsc/spin_chain.hpp"

#include <Eigen/Eigenvalues>
#include <bit>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unsupported/Eigen/KroneckerProduct>

namespace qsc {

using namespace std::complex_literals;

void SpinChainSpec::validate() const {
    if (n_spins < 1 || n_spins > 8) {
        throw std::invalid_argument("SpinChainSpec: n_spins must be in [1, 8]");
    }
    if (!std::isfinite(coupling) || !std::isfinite(field_on_strength) || !std::isfinite(dt)) {
        throw std::invalid_argument("SpinChainSpec: coupling, field and dt must be finite");
    }
    if (noise_level < 0.0 || noise_level > 1.0) {
        throw std::invalid_argument("SpinChainSpec: noise_level must be in [0, 1]");
    }
    if (dt <= 0.0) {
        throw std::invalid_argument("SpinChainSpec: dt must be positive");
    }
}

void NoiseChannelSpec::validate() const {
    if (probability < 0.0 || probability > 1.0) {
        throw std::invalid_argument("NoiseChannelSpec: probability must be in [0, 1]");
    }
}

const char* noise_kind_name(NoiseKind kind) {
    switch (kind) {
        case NoiseKind::None: return "none";
        case NoiseKind::BitFlip: return "bit_flip";
        case NoiseKind::Depolarizing: return "depolarizing";
        case NoiseKind::PhaseFlip: return "phase_flip";
    }
    throw std::logic_error("noise_kind_name: unknown kind");
}

NoiseKind noise_kind_from_name(const std::string& name) {
    if (name == "none") return NoiseKind::None;
    if (name == "bit_flip") return NoiseKind::BitFlip;
    if (name == "depolarizing") return NoiseKind::Depolarizing;
    if (name == "phase_flip") return NoiseKind::PhaseFlip;
    throw std::invalid_argument("unknown noise channel kind: " + name);
}

Operator pauli_x() {
    Operator m(2, 2);
    m << 0, 1, 1, 0;
    return m;
}

Operator pauli_y() {
    Operator m(2, 2);
    m << 0.0 + 0.0i, 0.0 - 1.0i, 0.0 + 1.0i, 0.0 + 0.0i;
    return m;
}

Operator pauli_z() {
    Operator m(2, 2);
    m << 1, 0, 0, -1;
    return m;
}

Operator op_on_site(const Operator& single, int site, int n_spins) {
    if (site < 0 || site >= n_spins) {
        throw std::invalid_argument("op_on_site: site out of range");
    }
    Operator result = Operator::Identity(1, 1);
    for (int k = 0; k < n_spins; ++k) {
        const Operator& factor =
            (k == site) ? single : Operator(Operator::Identity(2, 2));
        result = Eigen::kroneckerProduct(result, factor).eval();
    }
    return result;
}

Operator build_hamiltonian(const SpinChainSpec& spec, const FieldVector& fields) {
    spec.validate();
    if (fields.size() != spec.n_spins) {
        throw std::invalid_argument("build_hamiltonian: fields length must equal n_spins");
    }
    if (!fields.allFinite()) {
        throw std::invalid_argument("build_hamiltonian: fields must be finite");
    }
    const int d = spec.dim();
    Operator h = Operator::Zero(d, d);
    const Operator sx = pauli_x();
    const Operator sy = pauli_y();
    const Operator sz = pauli_z();
    for (int n = 0; n + 1 < spec.n_spins; ++n) {
        h += 0.5 * spec.coupling *
             (op_on_site(sx, n, spec.n_spins) * op_on_site(sx, n + 1, spec.n_spins) +
              op_on_site(sy, n, spec.n_spins) * op_on_site(sy, n + 1, spec.n_spins));
    }
    for (int n = 0; n < spec.n_spins; ++n) {
        h += fields(n) * op_on_site(sz, n, spec.n_spins);
    }
    return h;
}

FieldVector perturb_fields(const FieldVector& fields, const SpinChainSpec& spec, Rng& rng) {
    spec.validate();
    if (spec.noise_level == 0.0) {
        return fields;
    }
    const double stddev = spec.noise_level * spec.field_on_strength;
    FieldVector out = fields;
    for (Eigen::Index n = 0; n < out.size(); ++n) {
        out(n) += rng.normal(0.0, stddev);
    }
    return out;
}

bool is_hermitian(const Operator& m, double tolerance) {
    if (m.rows() != m.cols()) {
        return false;
    }
    return (m - m.adjoint()).cwiseAbs().maxCoeff() <= tolerance;
}

StateVector evolve(const StateVector& state, const Operator& hamiltonian, double dt) {
    if (hamiltonian.rows() != state.size()) {
        throw std::invalid_argument("evolve: dimension mismatch");
    }
    if (!is_hermitian(hamiltonian)) {
        throw std::invalid_argument("evolve: hamiltonian is not Hermitian");
    }
    Eigen::SelfAdjointEigenSolver<Operator> solver(hamiltonian);
    const Eigen::VectorXd& eigenvalues = solver.eigenvalues();
    const Operator& vectors = solver.eigenvectors();
    Eigen::VectorXcd phases(eigenvalues.size());
    for (Eigen::Index k = 0; k < eigenvalues.size(); ++k) {
        phases(k) = std::exp(-1.0i * eigenvalues(k) * dt);
    }
    StateVector out = vectors * (phases.asDiagonal() * (vectors.adjoint() * state));
    out /= out.norm();  // removes O(eps) drift only; the propagator is unitary
    return out;
}

double fidelity(const StateVector& a, const StateVector& b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("fidelity: dimension mismatch");
    }
    return std::norm(b.dot(a));
}

namespace {

// Site k occupies bit (n_spins - 1 - k) of the basis index.
inline uint64_t site_bit(int site, int n_spins) {
    return uint64_t{1} << (n_spins - 1 - site);
}

}  // namespace

void apply_pauli_x(StateVector& state, int site, int n_spins) {
    const uint64_t bit = site_bit(site, n_spins);
    for (uint64_t i = 0; i < static_cast<uint64_t>(state.size()); ++i) {
        if ((i & bit) == 0) {
            std::swap(state(i), state(i | bit));
        }
    }
}

void apply_pauli_y(StateVector& state, int site, int n_spins) {
    const uint64_t bit = site_bit(site, n_spins);
    for (uint64_t i = 0; i < static_cast<uint64_t>(state.size()); ++i) {
        if ((i & bit) == 0) {
            // Y|0> = i|1>, Y|1> = -i|0>
            const std::complex<double> a0 = state(i);
            const std::complex<double> a1 = state(i | bit);
            state(i) = -1.0i * a1;
            state(i | bit) = 1.0i * a0;
        }
    }
}

void apply_pauli_z(StateVector& state, int site, int n_spins) {
    const uint64_t bit = site_bit(site, n_spins);
    for (uint64_t i = 0; i < static_cast<uint64_t>(state.size()); ++i) {
        if (i & bit) {
            state(i) = -state(i);
        }
    }
}

StateVector apply_noise_channel(const StateVector& state, const NoiseChannelSpec& channel, Rng& rng) {
    channel.validate();
    if (channel.kind == NoiseKind::None || channel.probability == 0.0) {
        return state;
    }
    const int n_spins = static_cast<int>(std::round(std::log2(static_cast<double>(state.size()))));
    const double p = channel.probability;
    StateVector out = state;
    for (int site = 0; site < n_spins; ++site) {
        const double u = rng.uniform01();
        switch (channel.kind) {
            case NoiseKind::BitFlip:
                if (u < p) apply_pauli_x(out, site, n_spins);
                break;
            case NoiseKind::PhaseFlip:
                if (u < p) apply_pauli_z(out, site, n_spins);
                break;
            case NoiseKind::Depolarizing:
                if (u < p / 3.0) {
                    apply_pauli_x(out, site, n_spins);
                } else if (u < 2.0 * p / 3.0) {
                    apply_pauli_y(out, site, n_spins);
                } else if (u < p) {
                    apply_pauli_z(out, site, n_spins);
                }
                break;
            case NoiseKind::None:
                break;
        }
    }
    return out;
}

namespace {

inline double hs_inner(const Operator& a, const Operator& b) {
    // Real for Hermitian a, b.
    return (a.adjoint() * b).trace().real();
}

}  // namespace

int lie_algebra_rank(const std::vector<Operator>& generators, double tolerance) {
    if (generators.empty()) {
        throw std::invalid_argument("lie_algebra_rank: empty generator list");
    }
    const Eigen::Index d = generators.front().rows();
    const int max_dim = static_cast<int>(d * d) - 1;

    std::vector<Operator> basis;  // orthonormal Hermitian representatives
    auto try_add = [&](const Operator& candidate) -> bool {
        const double original_norm = std::sqrt(hs_inner(candidate, candidate));
        if (original_norm < tolerance) {
            return false;
        }
        Operator residual = candidate;
        for (const Operator& b : basis) {
            residual -= hs_inner(b, residual) * b;
        }
        // Second orthogonalization pass keeps the basis numerically tight.
        for (const Operator& b : basis) {
            residual -= hs_inner(b, residual) * b;
        }
        const double residual_norm = std::sqrt(hs_inner(residual, residual));
        if (residual_norm < tolerance * original_norm) {
            return false;
        }
        basis.push_back(residual / residual_norm);
        return true;
    };

    for (const Operator& g : generators) {
        if (g.rows() != d || g.cols() != d) {
            throw std::invalid_argument("lie_algebra_rank: generators must share one dimension");
        }
        if (!is_hermitian(g, 1e-10)) {
            throw std::invalid_argument("lie_algebra_rank: generators must be Hermitian");
        }
        Operator traceless = g;
        traceless -= (g.trace() / static_cast<double>(d)) * Operator::Identity(d, d);
        try_add(traceless);
    }

    // Commutator closure: i[A, B] is Hermitian for Hermitian A, B.
    size_t frontier_begin = 0;
    while (frontier_begin < basis.size() && static_cast<int>(basis.size()) < max_dim) {
        const size_t frontier_end = basis.size();
        for (size_t j = frontier_begin; j < frontier_end; ++j) {
            for (size_t i = 0; i < frontier_end; ++i) {
                if (static_cast<int>(basis.size()) >= max_dim) {
                    break;
                }
                const Operator comm = 1.0i * (basis[i] * basis[j] - basis[j] * basis[i]);
                try_add(comm);
            }
        }
        frontier_begin = frontier_end;
    }
    return static_cast<int>(basis.size());
}

StateVector make_basis_state(int n_spins, int index) {
    if (n_spins < 1 || n_spins > 8) {
        throw std::invalid_argument("make_basis_state: n_spins must be in [1, 8]");
    }
    const int d = 1 << n_spins;
    if (index < 0 || index >= d) {
        throw std::out_of_range("make_basis_state: index out of range");
    }
    StateVector state = StateVector::Zero(d);
    state(index) = 1.0;
    return state;
}

StateVector make_w_state(int n_spins) {
    if (n_spins < 1 || n_spins > 8) {
        throw std::invalid_argument("make_w_state: n_spins must be in [1, 8]");
    }
    const int d = 1 << n_spins;
    StateVector state = StateVector::Zero(d);
    const double amp = 1.0 / std::sqrt(static_cast<double>(n_spins));
    for (int site = 0; site < n_spins; ++site) {
        state(site_bit(site, n_spins)) = amp;
    }
    return state;
}

double total_z_expectation(const StateVector& state) {
    const int n_spins = static_cast<int>(std::round(std::log2(static_cast<double>(state.size()))));
    double total = 0.0;
    for (uint64_t i = 0; i < static_cast<uint64_t>(state.size()); ++i) {
        const int ones = std::popcount(i);
        total += std::norm(state(i)) * static_cast<double>(n_spins - 2 * ones);
    }
    return total;
}

}  // namespace qsc
