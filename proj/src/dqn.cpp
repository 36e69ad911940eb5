#include "qsc/dqn.hpp"

#include <cmath>
#include <stdexcept>

namespace qsc {

int argmax_lowest(const Eigen::VectorXd& values) {
    int best = 0;
    for (Eigen::Index i = 1; i < values.size(); ++i) {
        if (values(i) > values(best)) {
            best = static_cast<int>(i);
        }
    }
    return best;
}

int dqn_act(const Eigen::VectorXd& obs, double epsilon, const MlpParams& q_net, Rng& rng) {
    if (epsilon < 0.0 || epsilon > 1.0) {
        throw std::invalid_argument("dqn_act: epsilon must be in [0, 1]");
    }
    const int n_actions = q_net.spec.output_size();
    if (epsilon > 0.0 && rng.uniform01() < epsilon) {
        return rng.uniform_int(n_actions);
    }
    return argmax_lowest(forward(q_net, obs));
}

Eigen::VectorXd dqn_targets(const std::vector<const Transition*>& batch,
                            const MlpParams& online, const MlpParams& target, double gamma) {
    if (batch.empty()) {
        throw std::invalid_argument("dqn_targets: empty batch");
    }
    Eigen::VectorXd targets(batch.size());
    for (size_t i = 0; i < batch.size(); ++i) {
        const Transition& t = *batch[i];
        if (t.done) {
            targets(i) = t.reward;
        } else {
            const int chosen = argmax_lowest(forward(online, t.next_state));
            targets(i) = t.reward + gamma * forward(target, t.next_state)(chosen);
        }
    }
    return targets;
}

double epsilon_at(int episodes_done, const DqnConfig& config) {
    return std::max(config.eps_min,
                    config.eps_start * std::pow(config.eps_decay, episodes_done));
}

DqnAgent::DqnAgent(int obs_dim, int n_actions, DqnConfig config)
    : config_(std::move(config)),
      n_actions_(n_actions),
      online_([&] {
          MlpSpec spec;
          spec.layer_sizes.push_back(obs_dim);
          for (int h : config_.hidden) spec.layer_sizes.push_back(h);
          spec.layer_sizes.push_back(n_actions);
          spec.seed = Rng::derive(config_.seed, 1);
          return make_mlp(spec);
      }()),
      target_(online_),
      opt_(make_adam(online_.spec, config_.lr)),
      buffer_(config_.buffer_capacity),
      rng_(Rng::derive(config_.seed, 2)),
      epsilon_(config_.eps_start) {}

int DqnAgent::act(const Eigen::VectorXd& obs) {
    return dqn_act(obs, epsilon_, online_, rng_);
}

int DqnAgent::act_greedy(const Eigen::VectorXd& obs) {
    return argmax_lowest(forward(online_, obs));
}

void DqnAgent::observe(Transition t) {
    buffer_.push(std::move(t));
}

std::optional<double> DqnAgent::learn() {
    if (buffer_.size() < config_.batch_size) {
        return std::nullopt;
    }
    const auto batch = buffer_.sample(config_.batch_size, rng_);
    const Eigen::VectorXd targets = dqn_targets(batch, online_, target_, config_.gamma);

    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(param_count(online_.spec));
    Eigen::VectorXd out_grad = Eigen::VectorXd::Zero(n_actions_);
    double loss = 0.0;
    for (size_t i = 0; i < batch.size(); ++i) {
        const Transition& t = *batch[i];
        const Eigen::VectorXd q = forward(online_, t.state);
        const double error = q(t.action) - targets(i);
        loss += error * error * inv_batch;
        out_grad.setZero();
        out_grad(t.action) = 2.0 * error * inv_batch;
        backward_into(online_, t.state, out_grad, grad);
    }
    const double grad_norm = grad.norm();
    if (config_.grad_clip > 0.0 && grad_norm > config_.grad_clip) {
        grad *= config_.grad_clip / grad_norm;
    }
    adam_step(opt_, online_, grad);

    learn_steps_ += 1;
    if (learn_steps_ % config_.target_update_period == 0) {
        hard_update(target_, online_);
    }
    return loss;
}

void DqnAgent::end_episode() {
    episodes_done_ += 1;
    epsilon_ = epsilon_at(episodes_done_, config_);
}

}  // namespace qsc
