#include "qsc/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace qsc {

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
    const Eigen::VectorXd shifted = logits.array() - logits.maxCoeff();
    Eigen::VectorXd probs = shifted.array().exp();
    return probs / probs.sum();
}

Eigen::VectorXd log_softmax(const Eigen::VectorXd& logits) {
    const double max = logits.maxCoeff();
    const double log_sum = std::log((logits.array() - max).exp().sum()) + max;
    return logits.array() - log_sum;
}

int sample_categorical(const Eigen::VectorXd& probs, Rng& rng) {
    const double u = rng.uniform01();
    double cumulative = 0.0;
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
        cumulative += probs(i);
        if (u < cumulative) {
            return static_cast<int>(i);
        }
    }
    return static_cast<int>(probs.size() - 1);
}

double clipped_surrogate(double ratio, double advantage, double clip) {
    const double clipped_ratio = std::clamp(ratio, 1.0 - clip, 1.0 + clip);
    return std::min(ratio * advantage, clipped_ratio * advantage);
}

double clipped_surrogate_grad_ratio(double ratio, double advantage, double clip) {
    const double clipped_ratio = std::clamp(ratio, 1.0 - clip, 1.0 + clip);
    const double unclipped = ratio * advantage;
    const double clipped = clipped_ratio * advantage;
    // The min picks the unclipped branch (or both coincide): gradient flows.
    return unclipped <= clipped ? advantage : 0.0;
}

GaeResult gae_advantages(const Eigen::VectorXd& rewards, const Eigen::VectorXd& values,
                         const std::vector<bool>& dones, double gamma, double lambda,
                         double bootstrap_value) {
    const Eigen::Index n = rewards.size();
    if (n == 0) {
        throw std::invalid_argument("gae_advantages: empty rollout");
    }
    if (values.size() != n || static_cast<Eigen::Index>(dones.size()) != n) {
        throw std::invalid_argument("gae_advantages: length mismatch");
    }
    GaeResult result;
    result.advantages.resize(n);
    result.returns.resize(n);
    double running = 0.0;
    for (Eigen::Index t = n - 1; t >= 0; --t) {
        const double next_value = (t + 1 < n) ? values(t + 1) : bootstrap_value;
        const double not_done = dones[t] ? 0.0 : 1.0;
        const double delta = rewards(t) + gamma * next_value * not_done - values(t);
        running = delta + gamma * lambda * running;
        result.advantages(t) = running;
    }
    result.returns = result.advantages + values;

    const double mean = result.advantages.mean();
    const double variance =
        (result.advantages.array() - mean).square().sum() / static_cast<double>(n);
    const double stddev = std::max(std::sqrt(variance), 1e-8);
    result.advantages = (result.advantages.array() - mean) / stddev;
    return result;
}

PpoAgent::PpoAgent(int obs_dim, int n_actions, PpoConfig config)
    : config_(std::move(config)),
      n_actions_(n_actions),
      policy_([&] {
          MlpSpec spec;
          spec.layer_sizes.push_back(obs_dim);
          for (int h : config_.hidden) spec.layer_sizes.push_back(h);
          spec.layer_sizes.push_back(n_actions);
          spec.seed = Rng::derive(config_.seed, 11);
          return make_mlp(spec);
      }()),
      value_([&] {
          MlpSpec spec;
          spec.layer_sizes.push_back(obs_dim);
          for (int h : config_.hidden) spec.layer_sizes.push_back(h);
          spec.layer_sizes.push_back(1);
          spec.seed = Rng::derive(config_.seed, 12);
          return make_mlp(spec);
      }()),
      policy_opt_(make_adam(policy_.spec, config_.lr)),
      value_opt_(make_adam(value_.spec, config_.lr)),
      rng_(Rng::derive(config_.seed, 13)) {}

std::tuple<int, double, double> PpoAgent::act(const Eigen::VectorXd& obs) {
    const Eigen::VectorXd log_probs = log_softmax(forward(policy_, obs));
    const Eigen::VectorXd probs = log_probs.array().exp();
    const int action = sample_categorical(probs, rng_);
    const double value = forward(value_, obs)(0);
    return {action, log_probs(action), value};
}

Eigen::VectorXd PpoAgent::policy_probs(const Eigen::VectorXd& obs) const {
    return softmax(forward(policy_, obs));
}

void PpoAgent::record(RolloutStep step) {
    rollout_.push_back(std::move(step));
}

PpoUpdateStats PpoAgent::update(double bootstrap_value) {
    if (rollout_.empty()) {
        throw std::logic_error("PpoAgent::update: empty rollout");
    }
    const int n = static_cast<int>(rollout_.size());
    Eigen::VectorXd rewards(n), values(n);
    std::vector<bool> dones(n);
    for (int i = 0; i < n; ++i) {
        rewards(i) = rollout_[i].reward;
        values(i) = rollout_[i].value;
        dones[i] = rollout_[i].done;
    }
    const GaeResult gae =
        gae_advantages(rewards, values, dones, config_.gamma, config_.gae_lambda, bootstrap_value);

    PpoUpdateStats stats;
    int stat_batches = 0;
    std::vector<int> order(rollout_.size());
    std::iota(order.begin(), order.end(), 0);

    Eigen::VectorXd policy_grad(param_count(policy_.spec));
    Eigen::VectorXd value_grad(param_count(value_.spec));
    for (int epoch = 0; epoch < config_.epochs; ++epoch) {
        // Fisher-Yates with the agent's own stream keeps updates reproducible.
        for (int i = n - 1; i > 0; --i) {
            std::swap(order[i], order[rng_.uniform_int(i + 1)]);
        }
        for (int start = 0; start < n; start += config_.minibatch) {
            const int count = std::min(config_.minibatch, n - start);
            const double inv = 1.0 / static_cast<double>(count);
            policy_grad.setZero();
            value_grad.setZero();
            double policy_loss = 0.0, value_loss = 0.0, entropy_sum = 0.0;

            for (int k = 0; k < count; ++k) {
                const RolloutStep& step = rollout_[order[start + k]];
                const double advantage = gae.advantages(order[start + k]);
                const double ret = gae.returns(order[start + k]);

                const Eigen::VectorXd logits = forward(policy_, step.obs);
                const Eigen::VectorXd log_probs = log_softmax(logits);
                const Eigen::VectorXd probs = log_probs.array().exp();
                const double ratio = std::exp(log_probs(step.action) - step.log_prob);
                const double surrogate = clipped_surrogate(ratio, advantage, config_.clip);
                const double dsurr_dratio =
                    clipped_surrogate_grad_ratio(ratio, advantage, config_.clip);
                const double entropy = -(probs.array() * log_probs.array()).sum();

                policy_loss += -surrogate * inv;
                entropy_sum += entropy * inv;

                // d(-surrogate - c_H * entropy) / d logits
                Eigen::VectorXd dlogits = dsurr_dratio * ratio * probs;
                dlogits(step.action) -= dsurr_dratio * ratio;
                dlogits += config_.entropy_coef *
                           (probs.array() * (log_probs.array() + entropy)).matrix();
                backward_into(policy_, step.obs, dlogits * inv, policy_grad);

                const double v = forward(value_, step.obs)(0);
                const double v_err = v - ret;
                value_loss += v_err * v_err * inv;
                Eigen::VectorXd dv(1);
                dv(0) = config_.value_coef * 2.0 * v_err * inv;
                backward_into(value_, step.obs, dv, value_grad);
            }

            for (auto* grad : {&policy_grad, &value_grad}) {
                const double norm = grad->norm();
                if (config_.grad_clip > 0.0 && norm > config_.grad_clip) {
                    *grad *= config_.grad_clip / norm;
                }
            }
            adam_step(policy_opt_, policy_, policy_grad);
            adam_step(value_opt_, value_, value_grad);

            stats.policy_loss += policy_loss;
            stats.value_loss += value_loss;
            stats.entropy += entropy_sum;
            stat_batches += 1;
        }
    }
    if (stat_batches > 0) {
        stats.policy_loss /= stat_batches;
        stats.value_loss /= stat_batches;
        stats.entropy /= stat_batches;
    }
    rollout_.clear();
    return stats;
}

}  // namespace qsc
