#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <deque>
#include <string>

#include "qsc/rng.hpp"
#include "qsc/spin_chain.hpp"

namespace qsc {

// SecuredGreenSCSEnv configuration. One spin gates one warehouse.
struct EnvConfig {
    SpinChainSpec spin_spec;
    int n_warehouses = 3;
    int max_capacity = 100;
    int initial_inventory = 50;
    int timesteps = 50;
    double demand_rate = 5.0;     // Poisson mean, units per warehouse per step
    int replenish_amount = 10;    // units added per step while a field is on
    std::array<double, 3> reward_weights{1.0, 1.0, 0.5};  // alpha_1..alpha_3
    int window = 100;             // sliding normalization window W
    NoiseChannelSpec noise_channel{};
    double security_gain = 0.05;
    double security_decay = 0.02;
    double co2_per_field = 0.2;   // kg-equivalent per active field per step

    void validate() const;
    int n_actions() const { return 1 << spin_spec.n_spins; }
    int observation_dim() const {
        return 2 * spin_spec.dim() + n_warehouses + 2;
    }
};

EnvConfig env_config_from_json(const std::string& text);
std::string env_config_to_json(const EnvConfig& config);

struct EnvState {
    StateVector psi;
    Eigen::VectorXi inventories;
    double security_score = 0.5;
    double co2_cum = 0.0;
    double co2_step = 0.0;
    int t = 0;
};

struct RewardBreakdown {
    double raw_f = 0.0;
    double raw_sec = 0.0;
    double raw_co2 = 0.0;
    double norm_f = 0.0;
    double norm_sec = 0.0;
    double norm_co2 = 0.0;
    double total = 0.0;
};

// Ring buffers of recent raw fidelity / security / CO2 samples; min-max
// normalization over the window with a 0.5 fallback when max == min.
class NormalizationWindow {
  public:
    explicit NormalizationWindow(int capacity);

    void clear();
    void push(double raw_f, double raw_sec, double raw_co2);
    int size() const { return static_cast<int>(f_.size()); }

    double normalize_f(double x) const { return normalize(f_, x); }
    double normalize_sec(double x) const { return normalize(sec_, x); }
    double normalize_co2(double x) const { return normalize(co2_, x); }

  private:
    static double normalize(const std::deque<double>& buffer, double x);
    void push_one(std::deque<double>& buffer, double x);

    int capacity_;
    std::deque<double> f_, sec_, co2_;
};

// Min-max normalization of the current raw triple over the window (which must
// already contain it), weighted per Eq.-style total.
RewardBreakdown compute_reward(double raw_f, double raw_sec, double raw_co2,
                               const NormalizationWindow& window,
                               const std::array<double, 3>& weights);

// Feature layout: [Re psi, Im psi, inventories / max_capacity, security,
// co2_step / (co2_per_field * N)].
Eigen::VectorXd observation_of(const EnvState& state, const EnvConfig& config);

// Classical half of a step: demand draw, replenishment, security update and
// CO2 accounting. Exposed so the deterministic MPC twin shares it exactly.
void apply_classical_step(EnvState& state, int action_mask, const EnvConfig& config,
                          const Eigen::VectorXi& demands);

FieldVector fields_from_mask(int action_mask, const SpinChainSpec& spec);

struct StepOutcome {
    Eigen::VectorXd observation;
    RewardBreakdown reward;
    bool done = false;
};

class SecuredGreenSCSEnv {
  public:
    SecuredGreenSCSEnv(EnvConfig config, uint64_t seed);

    // Fresh episode: |psi_init> = |10...0>, full window clear. Deterministic
    // given the seed.
    Eigen::VectorXd reset(uint64_t seed);
    StepOutcome step(int action_mask);

    const EnvConfig& config() const { return config_; }
    const EnvState& state() const { return state_; }
    const StateVector& target() const { return psi_target_; }
    const NormalizationWindow& window() const { return window_; }
    int n_actions() const { return config_.n_actions(); }
    int observation_dim() const { return config_.observation_dim(); }

  private:
    EnvConfig config_;
    StateVector psi_init_;
    StateVector psi_target_;
    EnvState state_;
    NormalizationWindow window_;
    Rng rng_;
};

}  // namespace qsc
