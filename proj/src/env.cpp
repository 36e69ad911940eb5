#include "qsc/env.hpp"

#include <algorithm>
#include <bit>
#include <json.hpp>
#include <set>
#include <stdexcept>

namespace qsc {

void EnvConfig::validate() const {
    spin_spec.validate();
    noise_channel.validate();
    if (n_warehouses != spin_spec.n_spins) {
        throw std::invalid_argument("EnvConfig: n_warehouses must equal n_spins");
    }
    if (max_capacity < 1 || initial_inventory < 0 || initial_inventory > max_capacity) {
        throw std::invalid_argument("EnvConfig: inventory bounds invalid");
    }
    if (timesteps <= 0) {
        throw std::invalid_argument("EnvConfig: timesteps must be positive");
    }
    if (demand_rate < 0.0 || replenish_amount < 0) {
        throw std::invalid_argument("EnvConfig: demand and replenishment must be non-negative");
    }
    for (double w : reward_weights) {
        if (w < 0.0) {
            throw std::invalid_argument("EnvConfig: reward weights must be non-negative");
        }
    }
    if (window <= 0 || window > timesteps * 10) {
        throw std::invalid_argument("EnvConfig: window must be in (0, timesteps * 10]");
    }
    if (security_gain < 0.0 || security_decay < 0.0 || co2_per_field < 0.0) {
        throw std::invalid_argument("EnvConfig: rates must be non-negative");
    }
}

namespace {

void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
    for (const auto& item : j.items()) {
        if (!allowed.contains(item.key())) {
            throw std::invalid_argument("unknown key \"" + item.key() + "\" in " + where);
        }
    }
}

SpinChainSpec spin_spec_from_json(const nlohmann::json& j) {
    reject_unknown_keys(j, {"n_spins", "coupling", "field_on_strength", "noise_level", "dt"},
                        "spin_spec");
    SpinChainSpec spec;
    spec.n_spins = j.at("n_spins").get<int>();
    if (j.contains("coupling")) spec.coupling = j.at("coupling").get<double>();
    if (j.contains("field_on_strength")) spec.field_on_strength = j.at("field_on_strength").get<double>();
    if (j.contains("noise_level")) spec.noise_level = j.at("noise_level").get<double>();
    if (j.contains("dt")) spec.dt = j.at("dt").get<double>();
    return spec;
}

NoiseChannelSpec noise_channel_from_json(const nlohmann::json& j) {
    reject_unknown_keys(j, {"kind", "probability"}, "noise_channel");
    NoiseChannelSpec channel;
    channel.kind = noise_kind_from_name(j.at("kind").get<std::string>());
    if (j.contains("probability")) channel.probability = j.at("probability").get<double>();
    return channel;
}

EnvConfig env_config_from_json_value(const nlohmann::json& j) {
    reject_unknown_keys(j,
                        {"spin_spec", "n_warehouses", "max_capacity", "initial_inventory",
                         "timesteps", "demand_rate", "replenish_amount", "reward_weights",
                         "window", "noise_channel", "security_gain", "security_decay",
                         "co2_per_field"},
                        "env config");
    EnvConfig config;
    if (j.contains("spin_spec")) config.spin_spec = spin_spec_from_json(j.at("spin_spec"));
    if (j.contains("n_warehouses")) config.n_warehouses = j.at("n_warehouses").get<int>();
    if (j.contains("max_capacity")) config.max_capacity = j.at("max_capacity").get<int>();
    if (j.contains("initial_inventory")) config.initial_inventory = j.at("initial_inventory").get<int>();
    if (j.contains("timesteps")) config.timesteps = j.at("timesteps").get<int>();
    if (j.contains("demand_rate")) config.demand_rate = j.at("demand_rate").get<double>();
    if (j.contains("replenish_amount")) config.replenish_amount = j.at("replenish_amount").get<int>();
    if (j.contains("reward_weights")) {
        const auto weights = j.at("reward_weights").get<std::vector<double>>();
        if (weights.size() != 3) {
            throw std::invalid_argument("reward_weights must have exactly 3 entries");
        }
        std::copy(weights.begin(), weights.end(), config.reward_weights.begin());
    }
    if (j.contains("window")) config.window = j.at("window").get<int>();
    if (j.contains("noise_channel")) config.noise_channel = noise_channel_from_json(j.at("noise_channel"));
    if (j.contains("security_gain")) config.security_gain = j.at("security_gain").get<double>();
    if (j.contains("security_decay")) config.security_decay = j.at("security_decay").get<double>();
    if (j.contains("co2_per_field")) config.co2_per_field = j.at("co2_per_field").get<double>();
    config.validate();
    return config;
}

}  // namespace

EnvConfig env_config_from_json(const std::string& text) {
    return env_config_from_json_value(nlohmann::json::parse(text));
}

std::string env_config_to_json(const EnvConfig& config) {
    nlohmann::json j;
    j["spin_spec"] = {{"n_spins", config.spin_spec.n_spins},
                      {"coupling", config.spin_spec.coupling},
                      {"field_on_strength", config.spin_spec.field_on_strength},
                      {"noise_level", config.spin_spec.noise_level},
                      {"dt", config.spin_spec.dt}};
    j["n_warehouses"] = config.n_warehouses;
    j["max_capacity"] = config.max_capacity;
    j["initial_inventory"] = config.initial_inventory;
    j["timesteps"] = config.timesteps;
    j["demand_rate"] = config.demand_rate;
    j["replenish_amount"] = config.replenish_amount;
    j["reward_weights"] = config.reward_weights;
    j["window"] = config.window;
    j["noise_channel"] = {{"kind", noise_kind_name(config.noise_channel.kind)},
                          {"probability", config.noise_channel.probability}};
    j["security_gain"] = config.security_gain;
    j["security_decay"] = config.security_decay;
    j["co2_per_field"] = config.co2_per_field;
    return j.dump(2);
}

NormalizationWindow::NormalizationWindow(int capacity) : capacity_(capacity) {
    if (capacity < 1) {
        throw std::invalid_argument("NormalizationWindow: capacity must be >= 1");
    }
}

void NormalizationWindow::clear() {
    f_.clear();
    sec_.clear();
    co2_.clear();
}

void NormalizationWindow::push_one(std::deque<double>& buffer, double x) {
    buffer.push_back(x);
    if (static_cast<int>(buffer.size()) > capacity_) {
        buffer.pop_front();
    }
}

void NormalizationWindow::push(double raw_f, double raw_sec, double raw_co2) {
    push_one(f_, raw_f);
    push_one(sec_, raw_sec);
    push_one(co2_, raw_co2);
}

double NormalizationWindow::normalize(const std::deque<double>& buffer, double x) {
    if (buffer.empty()) {
        return 0.5;
    }
    const auto [lo_it, hi_it] = std::minmax_element(buffer.begin(), buffer.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    if (hi <= lo) {
        return 0.5;  // degenerate window
    }
    return (x - lo) / (hi - lo);
}

RewardBreakdown compute_reward(double raw_f, double raw_sec, double raw_co2,
                               const NormalizationWindow& window,
                               const std::array<double, 3>& weights) {
    RewardBreakdown r;
    r.raw_f = raw_f;
    r.raw_sec = raw_sec;
    r.raw_co2 = raw_co2;
    r.norm_f = window.normalize_f(raw_f);
    r.norm_sec = window.normalize_sec(raw_sec);
    r.norm_co2 = window.normalize_co2(raw_co2);
    r.total = weights[0] * r.norm_f + weights[1] * r.norm_sec - weights[2] * r.norm_co2;
    return r;
}

Eigen::VectorXd observation_of(const EnvState& state, const EnvConfig& config) {
    const int d = config.spin_spec.dim();
    Eigen::VectorXd features(config.observation_dim());
    features.segment(0, d) = state.psi.real();
    features.segment(d, d) = state.psi.imag();
    for (int w = 0; w < config.n_warehouses; ++w) {
        features(2 * d + w) =
            static_cast<double>(state.inventories(w)) / static_cast<double>(config.max_capacity);
    }
    features(2 * d + config.n_warehouses) = state.security_score;
    const double co2_scale = config.co2_per_field * static_cast<double>(config.spin_spec.n_spins);
    features(2 * d + config.n_warehouses + 1) =
        co2_scale > 0.0 ? state.co2_step / co2_scale : 0.0;
    return features;
}

FieldVector fields_from_mask(int action_mask, const SpinChainSpec& spec) {
    if (action_mask < 0 || action_mask >= (1 << spec.n_spins)) {
        throw std::invalid_argument("fields_from_mask: action mask out of range");
    }
    FieldVector fields = FieldVector::Zero(spec.n_spins);
    for (int n = 0; n < spec.n_spins; ++n) {
        if (action_mask & (1 << n)) {
            fields(n) = spec.field_on_strength;
        }
    }
    return fields;
}

void apply_classical_step(EnvState& state, int action_mask, const EnvConfig& config,
                          const Eigen::VectorXi& demands) {
    if (demands.size() != config.n_warehouses) {
        throw std::invalid_argument("apply_classical_step: demands length mismatch");
    }
    for (int w = 0; w < config.n_warehouses; ++w) {
        const int demand = std::min(demands(w), state.inventories(w));
        state.inventories(w) -= demand;
    }
    for (int w = 0; w < config.n_warehouses; ++w) {
        if (action_mask & (1 << w)) {
            state.inventories(w) =
                std::min(state.inventories(w) + config.replenish_amount, config.max_capacity);
            state.security_score += config.security_gain;
        } else {
            state.security_score -= config.security_decay;
        }
    }
    state.security_score = std::clamp(state.security_score, 0.0, 1.0);
    state.co2_step = config.co2_per_field * static_cast<double>(std::popcount(
                         static_cast<unsigned>(action_mask)));
    state.co2_cum += state.co2_step;
}

SecuredGreenSCSEnv::SecuredGreenSCSEnv(EnvConfig config, uint64_t seed)
    : config_(std::move(config)),
      psi_init_(make_basis_state(config_.spin_spec.n_spins,
                                 1 << (config_.spin_spec.n_spins - 1))),
      psi_target_(make_w_state(config_.spin_spec.n_spins)),
      window_(config_.window),
      rng_(seed) {
    config_.validate();
    reset(seed);
}

Eigen::VectorXd SecuredGreenSCSEnv::reset(uint64_t seed) {
    rng_ = Rng(seed);
    state_.psi = psi_init_;
    state_.inventories = Eigen::VectorXi::Constant(config_.n_warehouses, config_.initial_inventory);
    state_.security_score = 0.5;
    state_.co2_cum = 0.0;
    state_.co2_step = 0.0;
    state_.t = 0;
    window_.clear();
    return observation_of(state_, config_);
}

StepOutcome SecuredGreenSCSEnv::step(int action_mask) {
    if (state_.t >= config_.timesteps) {
        throw std::logic_error("SecuredGreenSCSEnv::step: episode already finished");
    }
    if (action_mask < 0 || action_mask >= n_actions()) {
        throw std::invalid_argument("SecuredGreenSCSEnv::step: action mask out of range");
    }

    Eigen::VectorXi demands(config_.n_warehouses);
    for (int w = 0; w < config_.n_warehouses; ++w) {
        demands(w) = rng_.poisson(config_.demand_rate);
    }
    apply_classical_step(state_, action_mask, config_, demands);

    const FieldVector fields =
        perturb_fields(fields_from_mask(action_mask, config_.spin_spec), config_.spin_spec, rng_);
    const Operator hamiltonian = build_hamiltonian(config_.spin_spec, fields);
    state_.psi = evolve(state_.psi, hamiltonian, config_.spin_spec.dt);
    state_.psi = apply_noise_channel(state_.psi, config_.noise_channel, rng_);

    const double raw_f = fidelity(state_.psi, psi_target_);
    const double raw_sec = state_.security_score;
    const double raw_co2 = state_.co2_step;
    window_.push(raw_f, raw_sec, raw_co2);

    StepOutcome outcome;
    outcome.reward = compute_reward(raw_f, raw_sec, raw_co2, window_, config_.reward_weights);
    state_.t += 1;
    outcome.done = state_.t == config_.timesteps;
    outcome.observation = observation_of(state_, config_);
    return outcome;
}

}  // namespace qsc
