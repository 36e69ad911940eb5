#include "qsc/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qsc {

Eigen::VectorXd soften_greedy(const Eigen::VectorXd& q_values, double eps) {
    const int n = static_cast<int>(q_values.size());
    Eigen::VectorXd policy =
        Eigen::VectorXd::Constant(n, eps / static_cast<double>(n));
    policy(argmax_lowest(q_values)) += 1.0 - eps;
    return policy;
}

Eigen::VectorXd ensemble_mixture(const Eigen::VectorXd& dqn_policy,
                                 const Eigen::VectorXd& ppo_policy, double omega_dqn) {
    if (dqn_policy.size() != ppo_policy.size()) {
        throw std::invalid_argument("ensemble_mixture: policy size mismatch");
    }
    if (omega_dqn < 0.0 || omega_dqn > 1.0) {
        throw std::invalid_argument("ensemble_mixture: omega must be in [0, 1]");
    }
    return omega_dqn * dqn_policy + (1.0 - omega_dqn) * ppo_policy;
}

int ensemble_act(const Eigen::VectorXd& obs, const MlpParams& q_net, const PpoAgent& ppo,
                 const EnsembleState& state, Rng& rng) {
    const Eigen::VectorXd pi_dqn = soften_greedy(forward(q_net, obs));
    const Eigen::VectorXd pi_ppo = ppo.policy_probs(obs);
    return sample_categorical(ensemble_mixture(pi_dqn, pi_ppo, state.omega_dqn), rng);
}

namespace {

void push_capped(std::deque<double>& buffer, double value, int cap) {
    buffer.push_back(value);
    while (static_cast<int>(buffer.size()) > cap) {
        buffer.pop_front();
    }
}

double mean_of(const std::deque<double>& buffer) {
    double sum = 0.0;
    for (double v : buffer) sum += v;
    return sum / static_cast<double>(buffer.size());
}

}  // namespace

double ensemble_reweight(EnsembleState& state, double dqn_return, double ppo_return) {
    if (!std::isfinite(dqn_return) || !std::isfinite(ppo_return)) {
        throw std::invalid_argument("ensemble_reweight: returns must be finite");
    }
    push_capped(state.dqn_returns, dqn_return, state.window);
    push_capped(state.ppo_returns, ppo_return, state.window);

    double global_min = state.dqn_returns.front();
    for (double v : state.dqn_returns) global_min = std::min(global_min, v);
    for (double v : state.ppo_returns) global_min = std::min(global_min, v);

    const double m_dqn = mean_of(state.dqn_returns) - global_min + 1.0;
    const double m_ppo = mean_of(state.ppo_returns) - global_min + 1.0;
    state.omega_dqn = std::clamp(m_dqn / (m_dqn + m_ppo), 0.1, 0.9);
    return state.omega_dqn;
}

}  // namespace qsc
