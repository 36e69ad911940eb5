#pragma once

#include <map>
#include <string>
#include <vector>

#include "qsc/env.hpp"

namespace qsc {

struct MpcConfig {
    int horizon = 3;
    long max_enumeration = 1000000;  // cap on (2^N)^H sequences

    void validate(int n_actions) const;
};

// Certainty-equivalent copy of the environment: Poisson demand replaced by
// its rounded mean, field noise and channels off. One propagator per action
// mask is cached up front.
class DeterministicTwin {
  public:
    explicit DeterministicTwin(const EnvConfig& config);

    // Advances the state one step, returning the raw (un-normalized) reward
    // alpha_1 * F + alpha_2 * security - alpha_3 * co2_step.
    double step_raw(EnvState& state, int action_mask) const;

    EnvState initial_state() const;
    const EnvConfig& config() const { return config_; }

  private:
    EnvConfig config_;
    StateVector psi_init_;
    StateVector psi_target_;
    Eigen::VectorXi mean_demands_;
    std::vector<Operator> propagators_;
};

// Exhaustive receding-horizon search over the twin: best raw-reward sum over
// `horizon` steps, first action returned, lowest action index on ties.
int mpc_plan(const EnvState& state, const DeterministicTwin& twin, const MpcConfig& mpc);
int mpc_plan(const EnvState& state, const EnvConfig& config, const MpcConfig& mpc);

// Flat reference rows used as plot overlays only; never used in training.
std::map<std::string, double> reference_lines();

}  // namespace qsc
