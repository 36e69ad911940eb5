#pragma once

#include <Eigen/Dense>
#include <tuple>
#include <vector>

#include "qsc/mlp.hpp"
#include "qsc/rng.hpp"

namespace qsc {

struct PpoConfig {
    double clip = 0.2;
    double gae_lambda = 0.95;
    double gamma = 0.95;
    int epochs = 4;
    int minibatch = 25;
    double entropy_coef = 0.01;
    double value_coef = 0.5;
    double lr = 5e-4;
    double grad_clip = 10.0;
    std::vector<int> hidden{64, 64};
    uint64_t seed = 0;
};

Eigen::VectorXd softmax(const Eigen::VectorXd& logits);
Eigen::VectorXd log_softmax(const Eigen::VectorXd& logits);
int sample_categorical(const Eigen::VectorXd& probs, Rng& rng);

// min(ratio * adv, clamp(ratio, 1 - clip, 1 + clip) * adv) and its derivative
// with respect to the ratio.
double clipped_surrogate(double ratio, double advantage, double clip);
double clipped_surrogate_grad_ratio(double ratio, double advantage, double clip);

struct GaeResult {
    Eigen::VectorXd advantages;  // normalized to zero mean, unit variance
    Eigen::VectorXd returns;     // raw advantages + values
};

// A_t = sum_k (gamma * lambda)^k delta_{t+k},
// delta_t = r_t + gamma * V(s_{t+1}) * (1 - done_t) - V(s_t).
GaeResult gae_advantages(const Eigen::VectorXd& rewards, const Eigen::VectorXd& values,
                         const std::vector<bool>& dones, double gamma, double lambda,
                         double bootstrap_value);

struct RolloutStep {
    Eigen::VectorXd obs;
    int action = 0;
    double reward = 0.0;
    double value = 0.0;
    double log_prob = 0.0;
    bool done = false;
};

struct PpoUpdateStats {
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
};

class PpoAgent {
  public:
    PpoAgent(int obs_dim, int n_actions, PpoConfig config);

    // Samples from softmax(policy logits); returns (action, log_prob, value).
    std::tuple<int, double, double> act(const Eigen::VectorXd& obs);
    Eigen::VectorXd policy_probs(const Eigen::VectorXd& obs) const;

    void record(RolloutStep step);
    bool rollout_empty() const { return rollout_.empty(); }

    // Clipped-surrogate update over the recorded rollout; clears it.
    PpoUpdateStats update(double bootstrap_value = 0.0);

    const MlpParams& policy() const { return policy_; }
    const MlpParams& value() const { return value_; }
    const PpoConfig& config() const { return config_; }
    int n_actions() const { return n_actions_; }

  private:
    PpoConfig config_;
    int n_actions_;
    MlpParams policy_;
    MlpParams value_;
    AdamState policy_opt_;
    AdamState value_opt_;
    std::vector<RolloutStep> rollout_;
    Rng rng_;
};

}  // namespace qsc
