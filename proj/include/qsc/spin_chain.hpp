#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "qsc/rng.hpp"

namespace qsc {

using StateVector = Eigen::VectorXcd;   // 2^N complex amplitudes, unit norm
using Operator = Eigen::MatrixXcd;      // 2^N x 2^N
using FieldVector = Eigen::VectorXd;    // one local z-field per site

// Open XY chain with on/off local z-control, hbar = 1.
struct SpinChainSpec {
    int n_spins = 3;
    double coupling = 1.0;           // J
    double field_on_strength = 5.0;  // B when a control bit is on
    double noise_level = 0.05;       // Gaussian std as a fraction of field_on_strength
    double dt = 1.0;                 // evolution time per environment step

    void validate() const;
    int dim() const { return 1 << n_spins; }
};

enum class NoiseKind { None, BitFlip, Depolarizing, PhaseFlip };

struct NoiseChannelSpec {
    NoiseKind kind = NoiseKind::None;
    double probability = 0.0;  // per qubit, per environment step

    void validate() const;
};

const char* noise_kind_name(NoiseKind kind);
NoiseKind noise_kind_from_name(const std::string& name);

// Pauli matrices and embeddings. Site 0 is the leftmost ket symbol, i.e. the
// most significant bit of the basis index.
Operator pauli_x();
Operator pauli_y();
Operator pauli_z();
Operator op_on_site(const Operator& single, int site, int n_spins);

// H = (J/2) sum_n (X_n X_{n+1} + Y_n Y_{n+1}) + sum_n B_n Z_n, open chain.
Operator build_hamiltonian(const SpinChainSpec& spec, const FieldVector& fields);

// fields + independent N(0, noise_level * field_on_strength) per site.
FieldVector perturb_fields(const FieldVector& fields, const SpinChainSpec& spec, Rng& rng);

// exp(-i H dt) |psi> via Hermitian eigendecomposition, renormalized.
StateVector evolve(const StateVector& state, const Operator& hamiltonian, double dt);

// |<b|a>|^2.
double fidelity(const StateVector& a, const StateVector& b);

// In-place single-qubit Paulis on the statevector (bit twiddling, no matrices).
void apply_pauli_x(StateVector& state, int site, int n_spins);
void apply_pauli_y(StateVector& state, int site, int n_spins);
void apply_pauli_z(StateVector& state, int site, int n_spins);

// Quantum-jump sampling of the channel: each qubit independently suffers the
// channel's Pauli error with probability p. Norm is preserved exactly.
StateVector apply_noise_channel(const StateVector& state, const NoiseChannelSpec& channel, Rng& rng);

// Real-linear dimension of the Lie algebra generated by {i G_k}. Generators
// are traceless-projected; closure grows by commutators, orthonormalized in
// the Hilbert-Schmidt inner product; components below `tolerance` (relative
// to the candidate's HS norm) are discarded.
int lie_algebra_rank(const std::vector<Operator>& generators, double tolerance = 1e-10);

StateVector make_basis_state(int n_spins, int index);
StateVector make_w_state(int n_spins);

// <psi| sum_n Z_n |psi>; conserved by XY + local-z evolution.
double total_z_expectation(const StateVector& state);

bool is_hermitian(const Operator& m, double tolerance = 1e-12);

}  // namespace qsc
