#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "qsc/mlp.hpp"
#include "qsc/replay.hpp"
#include "qsc/rng.hpp"

namespace qsc {

struct DqnConfig {
    double gamma = 0.95;
    double lr = 5e-4;
    double eps_start = 1.0;
    double eps_min = 0.01;
    double eps_decay = 0.995;       // multiplicative, per episode
    int target_update_period = 200; // learner steps between hard updates
    int batch_size = 64;
    int buffer_capacity = 10000;
    std::vector<int> hidden{64, 64};
    double grad_clip = 10.0;
    uint64_t seed = 0;
};

// Epsilon-greedy over Q(obs, .); ties break to the lowest action index.
int dqn_act(const Eigen::VectorXd& obs, double epsilon, const MlpParams& q_net, Rng& rng);

int argmax_lowest(const Eigen::VectorXd& values);

// Double-DQN targets: y = r + gamma * Q_target(s', argmax_a Q_online(s', a))
// for non-terminal transitions, y = r otherwise.
Eigen::VectorXd dqn_targets(const std::vector<const Transition*>& batch,
                            const MlpParams& online, const MlpParams& target, double gamma);

double epsilon_at(int episodes_done, const DqnConfig& config);

class DqnAgent {
  public:
    DqnAgent(int obs_dim, int n_actions, DqnConfig config);

    int act(const Eigen::VectorXd& obs);
    int act_greedy(const Eigen::VectorXd& obs);
    void observe(Transition t);

    // One replay batch: MSE regression of Q(s, a) onto Double-DQN targets,
    // Adam step, periodic hard target sync. Returns the pre-step loss, or
    // nullopt while the buffer is below one batch.
    std::optional<double> learn();

    void end_episode();  // advances the epsilon schedule

    double epsilon() const { return epsilon_; }
    long learn_steps() const { return learn_steps_; }
    const MlpParams& online() const { return online_; }
    const MlpParams& target() const { return target_; }
    const DqnConfig& config() const { return config_; }
    ReplayBuffer& buffer() { return buffer_; }
    Rng& rng() { return rng_; }
    int n_actions() const { return n_actions_; }

  private:
    DqnConfig config_;
    int n_actions_;
    MlpParams online_;
    MlpParams target_;
    AdamState opt_;
    ReplayBuffer buffer_;
    Rng rng_;
    double epsilon_;
    int episodes_done_ = 0;
    long learn_steps_ = 0;
};

}  // namespace qsc
