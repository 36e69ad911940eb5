#include "qsc/mpc.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

namespace qsc {

using namespace std::complex_literals;

void MpcConfig::validate(int n_actions) const {
    if (horizon < 1) {
        throw std::invalid_argument("MpcConfig: horizon must be >= 1");
    }
    double sequences = 1.0;
    for (int k = 0; k < horizon; ++k) {
        sequences *= static_cast<double>(n_actions);
        if (sequences > static_cast<double>(max_enumeration)) {
            throw std::invalid_argument("MpcConfig: enumeration budget exceeded");
        }
    }
}

DeterministicTwin::DeterministicTwin(const EnvConfig& config) : config_(config) {
    config_.spin_spec.noise_level = 0.0;
    config_.noise_channel = NoiseChannelSpec{};
    config_.validate();
    const int n = config_.spin_spec.n_spins;
    psi_init_ = make_basis_state(n, 1 << (n - 1));
    psi_target_ = make_w_state(n);
    mean_demands_ = Eigen::VectorXi::Constant(
        config_.n_warehouses, static_cast<int>(std::llround(config_.demand_rate)));

    propagators_.reserve(config_.n_actions());
    for (int mask = 0; mask < config_.n_actions(); ++mask) {
        const Operator h = build_hamiltonian(config_.spin_spec, fields_from_mask(mask, config_.spin_spec));
        Eigen::SelfAdjointEigenSolver<Operator> solver(h);
        Eigen::VectorXcd phases(solver.eigenvalues().size());
        for (Eigen::Index k = 0; k < phases.size(); ++k) {
            phases(k) = std::exp(-1.0i * solver.eigenvalues()(k) * config_.spin_spec.dt);
        }
        propagators_.push_back(solver.eigenvectors() * phases.asDiagonal() *
                               solver.eigenvectors().adjoint());
    }
}

EnvState DeterministicTwin::initial_state() const {
    EnvState state;
    state.psi = psi_init_;
    state.inventories =
        Eigen::VectorXi::Constant(config_.n_warehouses, config_.initial_inventory);
    state.security_score = 0.5;
    return state;
}

double DeterministicTwin::step_raw(EnvState& state, int action_mask) const {
    if (action_mask < 0 || action_mask >= config_.n_actions()) {
        throw std::invalid_argument("DeterministicTwin: action mask out of range");
    }
    apply_classical_step(state, action_mask, config_, mean_demands_);
    state.psi = propagators_[action_mask] * state.psi;
    state.psi /= state.psi.norm();
    state.t += 1;
    const double raw_f = fidelity(state.psi, psi_target_);
    const auto& w = config_.reward_weights;
    return w[0] * raw_f + w[1] * state.security_score - w[2] * state.co2_step;
}

int mpc_plan(const EnvState& state, const DeterministicTwin& twin, const MpcConfig& mpc) {
    const int n_actions = twin.config().n_actions();
    mpc.validate(n_actions);

    long sequences = 1;
    for (int k = 0; k < mpc.horizon; ++k) {
        sequences *= n_actions;
    }
    // First action in the most significant digit: ascending sequence order
    // then breaks ties toward the lowest first action.
    long stride = sequences / n_actions;

    double best_total = 0.0;
    int best_first = -1;
    for (long seq = 0; seq < sequences; ++seq) {
        EnvState rollout = state;
        double total = 0.0;
        long remaining = seq;
        long digit_stride = stride;
        for (int k = 0; k < mpc.horizon; ++k) {
            if (rollout.t >= twin.config().timesteps) {
                break;  // horizon truncated at the episode end
            }
            const int action = static_cast<int>(remaining / digit_stride);
            remaining %= digit_stride;
            digit_stride /= n_actions;
            total += twin.step_raw(rollout, action);
        }
        if (best_first < 0 || total > best_total) {
            best_total = total;
            best_first = static_cast<int>(seq / stride);
        }
    }
    return best_first;
}

int mpc_plan(const EnvState& state, const EnvConfig& config, const MpcConfig& mpc) {
    return mpc_plan(state, DeterministicTwin(config), mpc);
}

std::map<std::string, double> reference_lines() {
    return {{"GRAPE", 13.00}, {"MPC", 12.20}, {"Human", 13.10}};
}

}  // namespace qsc
