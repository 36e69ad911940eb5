#include "qsc/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <functional>
#include <json.hpp>
#include <limits>
#include <memory>
#include <stdexcept>
#include <thread>

#include "qsc/csv.hpp"
#include "qsc/dqn.hpp"
#include "qsc/ensemble.hpp"
#include "qsc/mpc.hpp"
#include "qsc/ppo.hpp"
#include "qsc/svg.hpp"

namespace qsc {

namespace fs = std::filesystem;

const char* agent_kind_name(AgentKind kind) {
    switch (kind) {
        case AgentKind::Dqn: return "dqn";
        case AgentKind::Ppo: return "ppo";
        case AgentKind::Ensemble: return "ensemble";
        case AgentKind::Mpc: return "mpc";
        case AgentKind::Random: return "random";
    }
    throw std::logic_error("agent_kind_name: unknown kind");
}

AgentKind agent_kind_from_name(const std::string& name) {
    if (name == "dqn") return AgentKind::Dqn;
    if (name == "ppo") return AgentKind::Ppo;
    if (name == "ensemble") return AgentKind::Ensemble;
    if (name == "mpc") return AgentKind::Mpc;
    if (name == "random") return AgentKind::Random;
    throw std::invalid_argument("unknown agent kind: " + name);
}

void RunConfig::validate() const {
    env.validate();
    if (episodes < 1) {
        throw std::invalid_argument("RunConfig: episodes must be >= 1");
    }
    if (lr <= 0.0) {
        throw std::invalid_argument("RunConfig: lr must be positive");
    }
}

RunConfig run_config_from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    for (const auto& item : j.items()) {
        const std::string& key = item.key();
        if (key != "agent" && key != "env" && key != "episodes" && key != "seed" &&
            key != "lr" && key != "out_dir") {
            throw std::invalid_argument("unknown key \"" + key + "\" in run config");
        }
    }
    RunConfig config;
    if (j.contains("agent")) config.agent = agent_kind_from_name(j.at("agent").get<std::string>());
    if (j.contains("env")) config.env = env_config_from_json(j.at("env").dump());
    if (j.contains("episodes")) config.episodes = j.at("episodes").get<int>();
    if (j.contains("seed")) config.seed = j.at("seed").get<uint64_t>();
    if (j.contains("lr")) config.lr = j.at("lr").get<double>();
    if (j.contains("out_dir")) config.out_dir = j.at("out_dir").get<std::string>();
    config.validate();
    return config;
}

std::string run_config_to_json(const RunConfig& config) {
    nlohmann::json j;
    j["agent"] = agent_kind_name(config.agent);
    j["env"] = nlohmann::json::parse(env_config_to_json(config.env));
    j["episodes"] = config.episodes;
    j["seed"] = config.seed;
    j["lr"] = config.lr;
    j["out_dir"] = config.out_dir;
    return j.dump(2);
}

// ---------------------------------------------------------------------------
// Policy drivers
// ---------------------------------------------------------------------------

namespace {

// Frozen snapshot used by evaluation-only rollouts (noise study).
struct TrainedPolicy {
    AgentKind kind = AgentKind::Random;
    std::optional<MlpParams> q_net;
    std::optional<MlpParams> ppo_policy;
    double omega_dqn = 0.5;
};

class Driver {
  public:
    virtual ~Driver() = default;
    virtual int act(const Eigen::VectorXd& obs) = 0;
    virtual void observe(const Eigen::VectorXd& obs, int action, double reward,
                         const Eigen::VectorXd& next_obs, bool done) = 0;
    virtual void end_episode(double episode_return) = 0;
    virtual double epsilon() const { return 0.0; }
    virtual double omega() const { return 0.0; }
    virtual TrainedPolicy snapshot() const = 0;
};

class DqnDriver : public Driver {
  public:
    DqnDriver(int obs_dim, int n_actions, const RunConfig& run) : agent_([&] {
        DqnConfig config;
        config.lr = run.lr;
        config.seed = Rng::derive(run.seed, 101);
        return DqnAgent(obs_dim, n_actions, config);
    }()) {}

    int act(const Eigen::VectorXd& obs) override { return agent_.act(obs); }

    void observe(const Eigen::VectorXd& obs, int action, double reward,
                 const Eigen::VectorXd& next_obs, bool done) override {
        agent_.observe({obs, action, reward, next_obs, done});
        agent_.learn();
    }

    void end_episode(double) override { agent_.end_episode(); }
    double epsilon() const override { return agent_.epsilon(); }

    TrainedPolicy snapshot() const override {
        TrainedPolicy policy;
        policy.kind = AgentKind::Dqn;
        policy.q_net = agent_.online();
        return policy;
    }

  private:
    DqnAgent agent_;
};

class PpoDriver : public Driver {
  public:
    PpoDriver(int obs_dim, int n_actions, const RunConfig& run) : agent_([&] {
        PpoConfig config;
        config.lr = run.lr;
        config.seed = Rng::derive(run.seed, 102);
        return PpoAgent(obs_dim, n_actions, config);
    }()) {}

    int act(const Eigen::VectorXd& obs) override {
        std::tie(pending_action_, pending_log_prob_, pending_value_) = agent_.act(obs);
        return pending_action_;
    }

    void observe(const Eigen::VectorXd& obs, int action, double reward,
                 const Eigen::VectorXd&, bool done) override {
        agent_.record({obs, action, reward, pending_value_, pending_log_prob_, done});
        if (done) {
            agent_.update(0.0);
        }
    }

    void end_episode(double) override {}

    TrainedPolicy snapshot() const override {
        TrainedPolicy policy;
        policy.kind = AgentKind::Ppo;
        policy.ppo_policy = agent_.policy();
        return policy;
    }

  private:
    PpoAgent agent_;
    int pending_action_ = 0;
    double pending_log_prob_ = 0.0;
    double pending_value_ = 0.0;
};

// Mixture policy drives the recorded episode; each iteration the sub-agents
// additionally play one episode of their own (the DQN one feeds replay and
// the learner, the PPO one is its on-policy rollout), and the episode returns
// of those sub-agent episodes drive the mixture reweighting.
class EnsembleDriver : public Driver {
  public:
    EnsembleDriver(int obs_dim, int n_actions, const RunConfig& run)
        : run_seed_(run.seed),
          timesteps_(run.env.timesteps),
          dqn_([&] {
              DqnConfig config;
              config.lr = run.lr;
              config.seed = Rng::derive(run.seed, 103);
              return DqnAgent(obs_dim, n_actions, config);
          }()),
          ppo_([&] {
              PpoConfig config;
              config.lr = run.lr;
              config.seed = Rng::derive(run.seed, 104);
              return PpoAgent(obs_dim, n_actions, config);
          }()),
          mix_rng_(Rng::derive(run.seed, 105)),
          aux_env_(run.env, Rng::derive(run.seed, 106)) {}

    int act(const Eigen::VectorXd& obs) override {
        return ensemble_act(obs, dqn_.online(), ppo_, ens_, mix_rng_);
    }

    void observe(const Eigen::VectorXd& obs, int action, double reward,
                 const Eigen::VectorXd& next_obs, bool done) override {
        dqn_.observe({obs, action, reward, next_obs, done});
        dqn_.learn();
    }

    void end_episode(double) override {
        // DQN sub-episode.
        double dqn_return = 0.0;
        Eigen::VectorXd obs = aux_env_.reset(Rng::derive(run_seed_, 2000000 + episode_));
        for (int t = 0; t < timesteps_; ++t) {
            const int action = dqn_.act(obs);
            const StepOutcome out = aux_env_.step(action);
            dqn_.observe({obs, action, out.reward.total, out.observation, out.done});
            dqn_.learn();
            dqn_return += out.reward.total;
            obs = out.observation;
        }
        dqn_.end_episode();

        // PPO on-policy sub-episode.
        double ppo_return = 0.0;
        obs = aux_env_.reset(Rng::derive(run_seed_, 3000000 + episode_));
        for (int t = 0; t < timesteps_; ++t) {
            const auto [action, log_prob, value] = ppo_.act(obs);
            const StepOutcome out = aux_env_.step(action);
            ppo_.record({obs, action, out.reward.total, value, log_prob, out.done});
            dqn_.observe({obs, action, out.reward.total, out.observation, out.done});
            ppo_return += out.reward.total;
            obs = out.observation;
        }
        ppo_.update(0.0);

        ensemble_reweight(ens_, dqn_return, ppo_return);
        episode_ += 1;
    }

    double epsilon() const override { return dqn_.epsilon(); }
    double omega() const override { return ens_.omega_dqn; }

    TrainedPolicy snapshot() const override {
        TrainedPolicy policy;
        policy.kind = AgentKind::Ensemble;
        policy.q_net = dqn_.online();
        policy.ppo_policy = ppo_.policy();
        policy.omega_dqn = ens_.omega_dqn;
        return policy;
    }

  private:
    uint64_t run_seed_;
    int timesteps_;
    DqnAgent dqn_;
    PpoAgent ppo_;
    EnsembleState ens_;
    Rng mix_rng_;
    SecuredGreenSCSEnv aux_env_;
    int episode_ = 0;
};

class MpcDriver : public Driver {
  public:
    MpcDriver(const RunConfig& run, const SecuredGreenSCSEnv& env)
        : twin_(run.env), env_(env) {
        mpc_.validate(run.env.n_actions());
    }

    int act(const Eigen::VectorXd&) override { return mpc_plan(env_.state(), twin_, mpc_); }
    void observe(const Eigen::VectorXd&, int, double, const Eigen::VectorXd&, bool) override {}
    void end_episode(double) override {}

    TrainedPolicy snapshot() const override {
        TrainedPolicy policy;
        policy.kind = AgentKind::Mpc;
        return policy;
    }

  private:
    DeterministicTwin twin_;
    MpcConfig mpc_;
    const SecuredGreenSCSEnv& env_;
};

class RandomDriver : public Driver {
  public:
    RandomDriver(int n_actions, const RunConfig& run)
        : n_actions_(n_actions), rng_(Rng::derive(run.seed, 107)) {}

    int act(const Eigen::VectorXd&) override { return rng_.uniform_int(n_actions_); }
    void observe(const Eigen::VectorXd&, int, double, const Eigen::VectorXd&, bool) override {}
    void end_episode(double) override {}

    TrainedPolicy snapshot() const override {
        TrainedPolicy policy;
        policy.kind = AgentKind::Random;
        return policy;
    }

  private:
    int n_actions_;
    Rng rng_;
};

std::unique_ptr<Driver> make_driver(const RunConfig& config, const SecuredGreenSCSEnv& env) {
    const int obs_dim = config.env.observation_dim();
    const int n_actions = config.env.n_actions();
    switch (config.agent) {
        case AgentKind::Dqn: return std::make_unique<DqnDriver>(obs_dim, n_actions, config);
        case AgentKind::Ppo: return std::make_unique<PpoDriver>(obs_dim, n_actions, config);
        case AgentKind::Ensemble:
            return std::make_unique<EnsembleDriver>(obs_dim, n_actions, config);
        case AgentKind::Mpc: return std::make_unique<MpcDriver>(config, env);
        case AgentKind::Random: return std::make_unique<RandomDriver>(n_actions, config);
    }
    throw std::logic_error("make_driver: unknown agent kind");
}

std::vector<std::string> episode_csv_columns() {
    return {"episode", "return",      "mean_fidelity", "final_security",
            "episode_co2", "epsilon", "omega_dqn"};
}

std::vector<std::string> episode_csv_row(const EpisodeRecord& r) {
    return {std::to_string(r.episode),        format_double(r.ret),
            format_double(r.mean_fidelity),   format_double(r.final_security),
            format_double(r.episode_co2),     format_double(r.epsilon),
            format_double(r.omega_dqn)};
}

std::vector<EpisodeRecord> run_training_impl(const RunConfig& config, TrainedPolicy* out_policy) {
    config.validate();
    SecuredGreenSCSEnv env(config.env, config.seed);
    std::unique_ptr<Driver> driver = make_driver(config, env);

    std::optional<CsvWriter> csv;
    if (!config.out_dir.empty()) {
        fs::create_directories(config.out_dir);
        const std::string path = config.out_dir + "/" + agent_kind_name(config.agent) +
                                 "_seed" + std::to_string(config.seed) + ".csv";
        csv.emplace(path, episode_csv_columns());
    }

    std::vector<EpisodeRecord> records;
    records.reserve(config.episodes);
    for (int episode = 0; episode < config.episodes; ++episode) {
        Eigen::VectorXd obs = env.reset(Rng::derive(config.seed, 1000000 + episode));
        double episode_return = 0.0;
        double fidelity_sum = 0.0;
        for (int t = 0; t < config.env.timesteps; ++t) {
            const int action = driver->act(obs);
            const StepOutcome out = env.step(action);
            driver->observe(obs, action, out.reward.total, out.observation, out.done);
            episode_return += out.reward.total;
            fidelity_sum += out.reward.raw_f;
            obs = out.observation;
        }
        driver->end_episode(episode_return);

        EpisodeRecord record;
        record.episode = episode;
        record.ret = episode_return;
        record.mean_fidelity = fidelity_sum / static_cast<double>(config.env.timesteps);
        record.final_security = env.state().security_score;
        record.episode_co2 = env.state().co2_cum;
        record.epsilon = driver->epsilon();
        record.omega_dqn = driver->omega();
        records.push_back(record);
        if (csv) {
            csv->write_row(episode_csv_row(record));
        }
    }
    if (!config.out_dir.empty()) {
        const TrainedPolicy policy = driver->snapshot();
        const std::string stem = config.out_dir + "/" + agent_kind_name(config.agent) +
                                 "_seed" + std::to_string(config.seed);
        if (policy.q_net) {
            save_checkpoint(stem + "_qnet.ckpt", *policy.q_net);
        }
        if (policy.ppo_policy) {
            save_checkpoint(stem + "_policy.ckpt", *policy.ppo_policy);
        }
    }
    if (out_policy) {
        *out_policy = driver->snapshot();
    }
    return records;
}

}  // namespace

std::vector<EpisodeRecord> run_training(const RunConfig& config) {
    return run_training_impl(config, nullptr);
}

// ---------------------------------------------------------------------------
// Series statistics
// ---------------------------------------------------------------------------

std::vector<double> moving_average(const std::vector<double>& values, int window) {
    if (values.empty()) {
        throw std::invalid_argument("moving_average: empty input");
    }
    if (window < 1) {
        throw std::invalid_argument("moving_average: window must be >= 1");
    }
    const int n = static_cast<int>(values.size());
    const int pad_front = window / 2;
    const int pad_back = (window - 1) / 2;
    std::vector<double> padded;
    padded.reserve(n + window - 1);
    padded.insert(padded.end(), pad_front, values.front());
    padded.insert(padded.end(), values.begin(), values.end());
    padded.insert(padded.end(), pad_back, values.back());

    std::vector<double> out(n);
    double sum = 0.0;
    for (int i = 0; i < window; ++i) {
        sum += padded[i];
    }
    out[0] = sum / window;
    for (int i = 1; i < n; ++i) {
        sum += padded[i + window - 1] - padded[i - 1];
        out[i] = sum / window;
    }
    return out;
}

Summary summarize(const std::vector<double>& series) {
    if (series.size() < 10) {
        throw std::invalid_argument("summarize: need at least 10 samples");
    }
    const std::vector<double> ma = moving_average(series, 10);
    Summary s;
    s.mean_ma = 0.0;
    for (double v : ma) s.mean_ma += v;
    s.mean_ma /= static_cast<double>(ma.size());
    s.final10_ma = 0.0;
    for (size_t i = ma.size() - 10; i < ma.size(); ++i) s.final10_ma += ma[i];
    s.final10_ma /= 10.0;
    s.best_max_ma = *std::max_element(ma.begin(), ma.end());
    return s;
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

std::vector<double> default_lr_grid() {
    return {5e-3, 2.5e-3, 1e-3, 5e-4, 2.5e-4, 1e-4};
}

std::vector<int> default_n_grid() { return {2, 3, 4, 5, 6}; }

std::vector<std::array<double, 3>> default_alpha_rows() {
    return {{0.5, 1.0, 0.5}, {1.0, 1.0, 0.5}, {1.0, 0.5, 0.5}, {1.0, 1.0, 1.0},
            {2.0, 1.0, 0.5}, {1.0, 2.0, 0.5}, {0.1, 0.1, 0.1}, {2.0, 2.0, 2.0}};
}

std::vector<double> default_noise_grid() { return {0.0, 0.05, 0.1, 0.2, 0.3}; }

std::vector<NoiseKind> default_noise_channels() {
    return {NoiseKind::BitFlip, NoiseKind::Depolarizing, NoiseKind::PhaseFlip};
}

std::vector<uint64_t> derive_seeds(uint64_t base, int count) {
    std::vector<uint64_t> seeds;
    seeds.reserve(count);
    for (int i = 0; i < count; ++i) {
        seeds.push_back(Rng::derive(base, 500000 + i));
    }
    return seeds;
}

namespace {

void parallel_for(int n_tasks, int workers, const std::function<void(int)>& fn) {
    workers = std::max(1, std::min(workers, n_tasks));
    if (workers == 1) {
        for (int i = 0; i < n_tasks; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < n_tasks; i = next.fetch_add(1)) {
                fn(i);
            }
        });
    }
    for (auto& t : pool) t.join();
}

// Per-seed summaries averaged; falls back to the concatenated series when a
// seed has fewer than 10 episodes. load_sweep_from_csv applies the same rule
// so recomputed summaries match the originals.
Summary cell_summary(const std::vector<std::vector<EpisodeRecord>>& per_seed) {
    bool per_seed_ok = !per_seed.empty();
    for (const auto& series : per_seed) {
        if (series.size() < 10) per_seed_ok = false;
    }
    if (per_seed_ok) {
        Summary total;
        for (const auto& series : per_seed) {
            std::vector<double> returns;
            returns.reserve(series.size());
            for (const auto& r : series) returns.push_back(r.ret);
            const Summary s = summarize(returns);
            total.mean_ma += s.mean_ma;
            total.final10_ma += s.final10_ma;
            total.best_max_ma += s.best_max_ma;
        }
        const double n = static_cast<double>(per_seed.size());
        total.mean_ma /= n;
        total.final10_ma /= n;
        total.best_max_ma /= n;
        return total;
    }
    std::vector<double> all;
    for (const auto& series : per_seed) {
        for (const auto& r : series) all.push_back(r.ret);
    }
    return summarize(all);
}

void finalize_cell(CellResult& cell) {
    cell.n_seeds = static_cast<int>(cell.per_seed.size());
    if (cell.n_seeds == 0) {
        cell.failed = true;
        return;
    }
    size_t total_episodes = 0;
    for (const auto& series : cell.per_seed) total_episodes += series.size();
    if (total_episodes >= 10) {
        cell.summary = cell_summary(cell.per_seed);
    } else {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        cell.summary = {nan, nan, nan};
    }
    double sum = 0.0;
    int count = 0;
    for (const auto& series : cell.per_seed) {
        for (const auto& r : series) {
            sum += r.ret;
            count += 1;
        }
    }
    cell.mean_return = sum / count;
    double var = 0.0;
    for (const auto& series : cell.per_seed) {
        for (const auto& r : series) {
            var += (r.ret - cell.mean_return) * (r.ret - cell.mean_return);
        }
    }
    cell.std_return = std::sqrt(var / count);
}

// Runs every (cell, seed) training task, isolating failures per cell.
SweepResult run_sweep(const std::string& study, const std::vector<RunConfig>& cell_configs,
                      const std::vector<std::string>& cell_names,
                      const std::vector<uint64_t>& seeds, int workers) {
    const int n_cells = static_cast<int>(cell_configs.size());
    const int n_seeds = static_cast<int>(seeds.size());
    struct Slot {
        std::optional<std::vector<EpisodeRecord>> records;
        std::string error;
    };
    std::vector<std::vector<Slot>> slots(n_cells, std::vector<Slot>(n_seeds));

    parallel_for(n_cells * n_seeds, workers, [&](int task) {
        const int c = task / n_seeds;
        const int s = task % n_seeds;
        RunConfig config = cell_configs[c];
        config.seed = seeds[s];
        try {
            slots[c][s].records = run_training(config);
        } catch (const std::exception& e) {
            slots[c][s].error = e.what();
        }
    });

    SweepResult result;
    result.study = study;
    for (int c = 0; c < n_cells; ++c) {
        CellResult cell;
        cell.cell = cell_names[c];
        cell.agent = agent_kind_name(cell_configs[c].agent);
        for (int s = 0; s < n_seeds; ++s) {
            if (slots[c][s].records) {
                cell.per_seed.push_back(std::move(*slots[c][s].records));
            } else {
                cell.failed = true;
                cell.error = slots[c][s].error;
            }
        }
        finalize_cell(cell);
        result.cells.push_back(std::move(cell));
    }
    return result;
}

std::string cell_dir(const RunConfig& base, const std::string& study, const std::string& cell) {
    if (base.out_dir.empty()) {
        return "";
    }
    return base.out_dir + "/" + study + "/" + cell;
}

}  // namespace

SweepResult lr_sweep(const RunConfig& base, const std::vector<double>& lrs,
                     const std::vector<uint64_t>& seeds, int workers) {
    std::vector<RunConfig> configs;
    std::vector<std::string> names;
    for (double lr : lrs) {
        RunConfig config = base;
        config.lr = lr;
        names.push_back("lr=" + format_double(lr));
        config.out_dir = cell_dir(base, "lr_sweep", names.back());
        configs.push_back(std::move(config));
    }
    return run_sweep("lr_sweep", configs, names, seeds, workers);
}

SweepResult n_ablation(const RunConfig& base, const std::vector<int>& ns,
                       const std::vector<uint64_t>& seeds, int workers) {
    std::vector<RunConfig> configs;
    std::vector<std::string> names;
    for (int n : ns) {
        RunConfig config = base;
        config.env.spin_spec.n_spins = n;
        config.env.n_warehouses = n;  // spin n gates warehouse n
        names.push_back("N=" + std::to_string(n));
        config.out_dir = cell_dir(base, "n_ablation", names.back());
        configs.push_back(std::move(config));
    }
    return run_sweep("n_ablation", configs, names, seeds, workers);
}

SweepResult alpha_sweep(const RunConfig& base, const std::vector<std::array<double, 3>>& rows,
                        const std::vector<uint64_t>& seeds, int workers) {
    std::vector<RunConfig> configs;
    std::vector<std::string> names;
    for (const auto& row : rows) {
        RunConfig config = base;
        config.env.reward_weights = row;
        names.push_back("alpha=(" + format_double(row[0]) + "," + format_double(row[1]) + "," +
                        format_double(row[2]) + ")");
        config.out_dir = cell_dir(base, "alpha_sweep", names.back());
        configs.push_back(std::move(config));
    }
    return run_sweep("alpha_sweep", configs, names, seeds, workers);
}

// ---------------------------------------------------------------------------
// Noise study
// ---------------------------------------------------------------------------

namespace {

int eval_act(const TrainedPolicy& policy, const Eigen::VectorXd& obs, Rng& rng, int n_actions,
             const DeterministicTwin* twin, const MpcConfig* mpc, const EnvState* state) {
    switch (policy.kind) {
        case AgentKind::Dqn:
            return argmax_lowest(forward(*policy.q_net, obs));
        case AgentKind::Ppo:
            return sample_categorical(softmax(forward(*policy.ppo_policy, obs)), rng);
        case AgentKind::Ensemble: {
            const Eigen::VectorXd pi_dqn = soften_greedy(forward(*policy.q_net, obs));
            const Eigen::VectorXd pi_ppo = softmax(forward(*policy.ppo_policy, obs));
            return sample_categorical(ensemble_mixture(pi_dqn, pi_ppo, policy.omega_dqn), rng);
        }
        case AgentKind::Mpc:
            return mpc_plan(*state, *twin, *mpc);
        case AgentKind::Random:
            return rng.uniform_int(n_actions);
    }
    throw std::logic_error("eval_act: unknown agent kind");
}

EpisodeRecord eval_episode(const EnvConfig& env_config, const TrainedPolicy& policy,
                           uint64_t episode_seed, int episode_index,
                           const DeterministicTwin* twin, const MpcConfig* mpc) {
    SecuredGreenSCSEnv env(env_config, episode_seed);
    Rng act_rng(Rng::derive(episode_seed, 7));
    Eigen::VectorXd obs = env.reset(episode_seed);
    double total = 0.0;
    double fidelity_sum = 0.0;
    for (int t = 0; t < env_config.timesteps; ++t) {
        const int action = eval_act(policy, obs, act_rng, env_config.n_actions(), twin, mpc,
                                    &env.state());
        const StepOutcome out = env.step(action);
        total += out.reward.total;
        fidelity_sum += out.reward.raw_f;
        obs = out.observation;
    }
    EpisodeRecord record;
    record.episode = episode_index;
    record.ret = total;
    record.mean_fidelity = fidelity_sum / static_cast<double>(env_config.timesteps);
    record.final_security = env.state().security_score;
    record.episode_co2 = env.state().co2_cum;
    record.omega_dqn = policy.kind == AgentKind::Ensemble ? policy.omega_dqn : 0.0;
    return record;
}

}  // namespace

SweepResult noise_study(const RunConfig& base, const std::vector<NoiseKind>& channels,
                        const std::vector<double>& probabilities,
                        const std::vector<uint64_t>& seeds, int eval_episodes, int workers) {
    if (seeds.empty()) {
        throw std::invalid_argument("noise_study: need at least one seed");
    }
    // Train once with channels off.
    RunConfig train_config = base;
    train_config.env.noise_channel = NoiseChannelSpec{};
    if (!base.out_dir.empty()) {
        train_config.out_dir = base.out_dir + "/noise_study/train";
    }
    TrainedPolicy policy;
    run_training_impl(train_config, &policy);

    const int per_seed_episodes =
        std::max(1, eval_episodes / static_cast<int>(seeds.size()));

    struct Cell {
        NoiseKind kind;
        double p;
        std::string name;
    };
    std::vector<Cell> cells;
    for (NoiseKind kind : channels) {
        for (double p : probabilities) {
            cells.push_back({kind, p,
                             std::string(noise_kind_name(kind)) + "@p=" + format_double(p)});
        }
    }

    std::vector<std::vector<std::vector<EpisodeRecord>>> results(
        cells.size(), std::vector<std::vector<EpisodeRecord>>(seeds.size()));
    parallel_for(static_cast<int>(cells.size() * seeds.size()), workers, [&](int task) {
        const int c = task / static_cast<int>(seeds.size());
        const int s = task % static_cast<int>(seeds.size());
        EnvConfig env_config = base.env;
        env_config.noise_channel = NoiseChannelSpec{cells[c].kind, cells[c].p};
        std::optional<DeterministicTwin> twin;
        MpcConfig mpc;
        if (policy.kind == AgentKind::Mpc) {
            twin.emplace(env_config);
        }
        for (int e = 0; e < per_seed_episodes; ++e) {
            // Seed depends only on (seed, episode): cells are evaluation-paired.
            const uint64_t episode_seed = Rng::derive(seeds[s], 4000000 + e);
            results[c][s].push_back(eval_episode(env_config, policy, episode_seed,
                                                 s * per_seed_episodes + e,
                                                 twin ? &*twin : nullptr, &mpc));
        }
    });

    SweepResult result;
    result.study = "noise_study";
    for (size_t c = 0; c < cells.size(); ++c) {
        CellResult cell;
        cell.cell = cells[c].name;
        cell.agent = agent_kind_name(base.agent);
        for (size_t s = 0; s < seeds.size(); ++s) {
            cell.per_seed.push_back(std::move(results[c][s]));
        }
        finalize_cell(cell);
        result.cells.push_back(std::move(cell));
    }

    if (!base.out_dir.empty()) {
        const std::string dir = base.out_dir + "/noise_study";
        fs::create_directories(dir);
        for (const CellResult& cell : result.cells) {
            fs::create_directories(dir + "/" + cell.cell);
            int seed_index = 0;
            for (const auto& series : cell.per_seed) {
                CsvWriter csv(dir + "/" + cell.cell + "/" + cell.agent + "_seed" +
                                  std::to_string(seeds[seed_index]) + ".csv",
                              episode_csv_columns());
                for (const EpisodeRecord& r : series) {
                    csv.write_row(episode_csv_row(r));
                }
                seed_index += 1;
            }
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Outputs
// ---------------------------------------------------------------------------

void write_summary_csv(const SweepResult& result, const std::string& path) {
    CsvWriter csv(path, {"study", "cell", "agent", "mean_ma", "final10_ma", "best_max_ma",
                         "n_seeds"});
    for (const CellResult& cell : result.cells) {
        if (cell.n_seeds == 0) {
            csv.write_row({result.study, cell.cell, cell.agent, "nan", "nan", "nan", "0"});
        } else {
            csv.write_row({result.study, cell.cell, cell.agent,
                           format_double(cell.summary.mean_ma),
                           format_double(cell.summary.final10_ma),
                           format_double(cell.summary.best_max_ma),
                           std::to_string(cell.n_seeds)});
        }
    }
}

void write_lr_table_csv(const SweepResult& result, const std::string& path) {
    CsvWriter csv(path, {"method", "best_max", "avg_at_0.005", "avg_at_0.0001"});
    double best = std::numeric_limits<double>::quiet_NaN();
    double avg_high = best, avg_low = best;
    std::string agent = "agent";
    for (const CellResult& cell : result.cells) {
        if (cell.n_seeds == 0) continue;
        agent = cell.agent;
        if (std::isnan(best) || cell.summary.best_max_ma > best) {
            best = cell.summary.best_max_ma;
        }
        if (cell.cell == "lr=0.005") avg_high = cell.summary.mean_ma;
        if (cell.cell == "lr=0.0001") avg_low = cell.summary.mean_ma;
    }
    csv.write_row({agent, format_double(best), format_double(avg_high), format_double(avg_low)});
    for (const auto& [name, value] : reference_lines()) {
        csv.write_row({name, format_double(value), format_double(value), format_double(value)});
    }
}

void write_cell_stats_csv(const SweepResult& result, const std::string& path) {
    CsvWriter csv(path, {"study", "cell", "agent", "mean_return", "std_return", "episodes"});
    for (const CellResult& cell : result.cells) {
        int episodes = 0;
        for (const auto& series : cell.per_seed) episodes += static_cast<int>(series.size());
        csv.write_row({result.study, cell.cell, cell.agent, format_double(cell.mean_return),
                       format_double(cell.std_return), std::to_string(episodes)});
    }
}

PlotStatus emit_plots(const SweepResult& result, const std::string& out_dir) {
    SvgChart chart;
    chart.title = result.study;
    chart.x_label = "episode";
    chart.y_label = "return (10-episode MA)";
    for (const CellResult& cell : result.cells) {
        if (cell.n_seeds == 0) continue;
        size_t min_len = cell.per_seed.front().size();
        for (const auto& series : cell.per_seed) min_len = std::min(min_len, series.size());
        if (min_len == 0) continue;
        std::vector<double> mean_returns(min_len, 0.0);
        for (const auto& series : cell.per_seed) {
            for (size_t i = 0; i < min_len; ++i) mean_returns[i] += series[i].ret;
        }
        for (double& v : mean_returns) v /= static_cast<double>(cell.n_seeds);
        SvgSeries svg_series;
        svg_series.label = cell.cell;
        svg_series.ys = moving_average(mean_returns, 10);
        for (size_t i = 0; i < min_len; ++i) svg_series.xs.push_back(static_cast<double>(i));
        chart.series.push_back(std::move(svg_series));
    }
    if (chart.series.empty()) {
        return PlotStatus::NothingToPlot;
    }
    for (const auto& [name, value] : reference_lines()) {
        chart.ref_lines.push_back({name, value});
    }
    fs::create_directories(out_dir);
    write_svg_chart(out_dir + "/" + result.study + ".svg", chart);
    return PlotStatus::Written;
}

SweepResult load_sweep_from_csv(const std::string& study_dir) {
    SweepResult result;
    result.study = fs::path(study_dir).filename().string();
    if (!fs::is_directory(study_dir)) {
        throw std::invalid_argument("load_sweep_from_csv: not a directory: " + study_dir);
    }
    std::vector<std::string> cell_dirs;
    for (const auto& entry : fs::directory_iterator(study_dir)) {
        if (entry.is_directory()) {
            cell_dirs.push_back(entry.path().string());
        }
    }
    std::sort(cell_dirs.begin(), cell_dirs.end());
    for (const std::string& dir : cell_dirs) {
        CellResult cell;
        cell.cell = fs::path(dir).filename().string();
        std::vector<std::string> files;
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (entry.path().extension() == ".csv") {
                files.push_back(entry.path().string());
            }
        }
        std::sort(files.begin(), files.end());
        for (const std::string& file : files) {
            const std::string stem = fs::path(file).stem().string();
            const size_t seed_pos = stem.rfind("_seed");
            if (seed_pos == std::string::npos) continue;
            cell.agent = stem.substr(0, seed_pos);
            const CsvTable table = read_csv(file);
            const int ep_col = table.column("episode");
            const int ret_col = table.column("return");
            const int fid_col = table.column("mean_fidelity");
            const int sec_col = table.column("final_security");
            const int co2_col = table.column("episode_co2");
            const int eps_col = table.column("epsilon");
            const int omega_col = table.column("omega_dqn");
            std::vector<EpisodeRecord> series;
            for (const auto& row : table.rows) {
                EpisodeRecord r;
                r.episode = std::stoi(row.at(ep_col));
                r.ret = std::stod(row.at(ret_col));
                r.mean_fidelity = std::stod(row.at(fid_col));
                r.final_security = std::stod(row.at(sec_col));
                r.episode_co2 = std::stod(row.at(co2_col));
                r.epsilon = std::stod(row.at(eps_col));
                r.omega_dqn = std::stod(row.at(omega_col));
                series.push_back(r);
            }
            if (!series.empty()) {
                cell.per_seed.push_back(std::move(series));
            }
        }
        finalize_cell(cell);
        result.cells.push_back(std::move(cell));
    }
    return result;
}

}  // namespace qsc
