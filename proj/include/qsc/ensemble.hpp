#pragma once

#include <Eigen/Dense>
#include <deque>

#include "qsc/dqn.hpp"
#include "qsc/ppo.hpp"

namespace qsc {

// Return-driven mixture weight over the two sub-policies.
struct EnsembleState {
    int window = 20;
    std::deque<double> dqn_returns;
    std::deque<double> ppo_returns;
    double omega_dqn = 0.5;  // clamped to [0.1, 0.9]
};

// Greedy one-hot lifted to a distribution: (1 - eps) * onehot + eps / |A|.
Eigen::VectorXd soften_greedy(const Eigen::VectorXd& q_values, double eps = 0.05);

// omega * pi_dqn + (1 - omega) * pi_ppo.
Eigen::VectorXd ensemble_mixture(const Eigen::VectorXd& dqn_policy,
                                 const Eigen::VectorXd& ppo_policy, double omega_dqn);

int ensemble_act(const Eigen::VectorXd& obs, const MlpParams& q_net, const PpoAgent& ppo,
                 const EnsembleState& state, Rng& rng);

// Pushes both episode returns, then
// omega_dqn = clamp(m_dqn / (m_dqn + m_ppo), 0.1, 0.9) with m the window mean
// shifted positive (mean - global_min + 1). Equal means give 0.5.
double ensemble_reweight(EnsembleState& state, double dqn_return, double ppo_return);

}  // namespace qsc
