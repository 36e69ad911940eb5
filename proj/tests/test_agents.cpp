#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "qsc/dqn.hpp"
#include "qsc/ensemble.hpp"
#include "qsc/ppo.hpp"

using namespace qsc;

namespace {

// Builds a net whose output equals `values` for every input (zero weights,
// output biases carry the values).
MlpParams constant_net(int in, const Eigen::VectorXd& values) {
    MlpSpec spec;
    spec.layer_sizes = {in, static_cast<int>(values.size())};
    MlpParams params = make_mlp(spec);
    Eigen::VectorXd flat = Eigen::VectorXd::Zero(param_count(spec));
    flat.tail(values.size()) = values;
    unflatten(flat, params);
    return params;
}

double chi_squared_uniform(const std::vector<int>& counts, int total) {
    const double expected = static_cast<double>(total) / counts.size();
    double chi2 = 0.0;
    for (int c : counts) {
        chi2 += (c - expected) * (c - expected) / expected;
    }
    return chi2;
}

// Two-armed bandit: arm 0 pays 1, arm 1 pays 0; pulls grouped in episodes of
// ten. Shared by the PPO / ensemble convergence checks.
constexpr int kBanditEpisodeLen = 10;

DqnConfig bandit_dqn_config(uint64_t seed) {
    DqnConfig config;
    config.lr = 0.01;
    config.eps_decay = 0.95;
    config.eps_min = 0.05;
    config.batch_size = 16;
    config.buffer_capacity = 500;
    config.target_update_period = 50;
    config.hidden = {16};
    config.seed = seed;
    return config;
}

PpoConfig bandit_ppo_config(uint64_t seed) {
    PpoConfig config;
    config.lr = 0.02;
    config.minibatch = 5;
    config.hidden = {16};
    config.seed = seed;
    return config;
}

double bandit_reward(int action) { return action == 0 ? 1.0 : 0.0; }

double run_dqn_bandit_episode(DqnAgent& agent) {
    const Eigen::VectorXd obs = Eigen::VectorXd::Ones(1);
    double total = 0.0;
    for (int t = 0; t < kBanditEpisodeLen; ++t) {
        const int action = agent.act(obs);
        const double reward = bandit_reward(action);
        agent.observe({obs, action, reward, obs, true});
        agent.learn();
        total += reward;
    }
    agent.end_episode();
    return total;
}

double run_ppo_bandit_episode(PpoAgent& agent) {
    const Eigen::VectorXd obs = Eigen::VectorXd::Ones(1);
    double total = 0.0;
    for (int t = 0; t < kBanditEpisodeLen; ++t) {
        const auto [action, log_prob, value] = agent.act(obs);
        const double reward = bandit_reward(action);
        agent.record({obs, action, reward, value, log_prob, t == kBanditEpisodeLen - 1});
        total += reward;
    }
    agent.update(0.0);
    return total;
}

}  // namespace

// ---------------------------------------------------------------------------
// DQN
// ---------------------------------------------------------------------------

TEST_CASE("dqn_act: epsilon = 1 samples uniformly (chi-squared)") {
    const MlpParams q = constant_net(3, Eigen::VectorXd::Zero(8));
    Rng rng(5);
    std::vector<int> counts(8, 0);
    const int n_draws = 10000;
    for (int i = 0; i < n_draws; ++i) {
        counts[dqn_act(Eigen::VectorXd::Zero(3), 1.0, q, rng)] += 1;
    }
    // df = 7, p > 0.01 requires chi2 below 18.48.
    CHECK(chi_squared_uniform(counts, n_draws) < 18.48);
}

TEST_CASE("dqn_act: greedy ties break to the lowest index") {
    Eigen::VectorXd values(5);
    values << 0.1, 0.9, 0.9, 0.4, 0.9;
    const MlpParams q = constant_net(2, values);
    Rng rng(6);
    CHECK(dqn_act(Eigen::VectorXd::Zero(2), 0.0, q, rng) == 1);
}

TEST_CASE("dqn_act: greedy choice invariant to positive affine rescaling") {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        Eigen::VectorXd values(6);
        for (int i = 0; i < 6; ++i) values(i) = rng.normal();
        const double a = 0.1 + 5.0 * rng.uniform01();
        const double b = 10.0 * rng.normal();
        CHECK(argmax_lowest(values) == argmax_lowest((a * values.array() + b).matrix()));
    }
}

TEST_CASE("dqn_targets: terminal and Double-DQN arithmetic") {
    const Eigen::VectorXd s = Eigen::VectorXd::Zero(2);
    Transition done_t{s, 0, 1.0, s, true};
    Eigen::VectorXd online_values(2), target_values(2);
    online_values << 0.2, 0.5;   // online argmax selects action 1
    target_values << 1.0, 2.0;   // target evaluates it at 2.0
    const MlpParams online = constant_net(2, online_values);
    const MlpParams target = constant_net(2, target_values);

    Transition live_t{s, 0, 1.0, s, false};
    const std::vector<const Transition*> batch{&done_t, &live_t};
    const Eigen::VectorXd y = dqn_targets(batch, online, target, 0.95);
    CHECK(y(0) == doctest::Approx(1.0));
    CHECK(y(1) == doctest::Approx(1.0 + 0.95 * 2.0));
}

TEST_CASE("dqn_targets: selection follows the online net, not the target max") {
    const Eigen::VectorXd s = Eigen::VectorXd::Zero(2);
    Eigen::VectorXd online_values(2), target_values(2);
    online_values << 0.2, 0.5;  // online picks action 1
    target_values << 3.0, 2.0;  // naive max would take 3.0
    const MlpParams online = constant_net(2, online_values);
    const MlpParams target = constant_net(2, target_values);
    Transition t{s, 0, 1.0, s, false};
    const std::vector<const Transition*> batch{&t};
    CHECK(dqn_targets(batch, online, target, 0.95)(0) == doctest::Approx(1.0 + 0.95 * 2.0));
}

TEST_CASE("epsilon schedule reaches the floor at episode 919") {
    DqnConfig config;
    CHECK(epsilon_at(0, config) == 1.0);
    CHECK(epsilon_at(1, config) == doctest::Approx(0.995));
    CHECK(epsilon_at(918, config) > 0.01);
    CHECK(epsilon_at(919, config) == 0.01);
    CHECK(epsilon_at(5000, config) == 0.01);
}

TEST_CASE("ReplayBuffer: ring semantics and distinct batch indices") {
    ReplayBuffer buffer(5);
    Rng rng(8);
    for (int i = 0; i < 9; ++i) {
        Eigen::VectorXd s(1);
        s << static_cast<double>(i);
        buffer.push({s, i, 0.0, s, false});
        CHECK(buffer.size() == std::min(i + 1, 5));
    }
    // Entries 4..8 survive.
    for (int trial = 0; trial < 50; ++trial) {
        const auto batch = buffer.sample(5, rng);
        std::vector<int> actions;
        for (const Transition* t : batch) actions.push_back(t->action);
        std::sort(actions.begin(), actions.end());
        CHECK(actions == std::vector<int>{4, 5, 6, 7, 8});
    }
    CHECK_THROWS_AS(buffer.sample(6, rng), std::invalid_argument);
}

TEST_CASE("DqnAgent::learn: underfull buffer is a no-op signal") {
    DqnAgent agent(2, 2, bandit_dqn_config(1));
    CHECK(!agent.learn().has_value());
}

TEST_CASE("DqnAgent::learn: zero-error batches give zero loss and frozen params") {
    DqnConfig config = bandit_dqn_config(2);
    DqnAgent agent(1, 2, config);
    // Terminal transitions whose reward equals the current prediction: the
    // regression target is already met, so the update must be a no-op.
    const Eigen::VectorXd s = Eigen::VectorXd::Ones(1);
    const Eigen::VectorXd q = forward(agent.online(), s);
    for (int i = 0; i < 32; ++i) {
        agent.observe({s, i % 2, q(i % 2), s, true});
    }
    const Eigen::VectorXd before = flatten(agent.online());
    const auto loss = agent.learn();
    REQUIRE(loss.has_value());
    CHECK(*loss == doctest::Approx(0.0));
    CHECK((flatten(agent.online()) - before).norm() < 1e-6);
}

TEST_CASE("DqnAgent::learn: loss is non-negative and target syncs at 200 steps") {
    DqnConfig config;
    config.lr = 1e-3;
    config.batch_size = 8;
    config.target_update_period = 200;
    config.seed = 3;
    DqnAgent agent(2, 3, config);
    Rng rng(11);
    Eigen::VectorXd s(2);
    for (int i = 0; i < 16; ++i) {
        s << rng.normal(), rng.normal();
        agent.observe({s, rng.uniform_int(3), rng.normal(), s, rng.uniform01() < 0.2});
    }
    for (int step = 0; step < 200; ++step) {
        const auto loss = agent.learn();
        REQUIRE(loss.has_value());
        CHECK(*loss >= 0.0);
        if (step < 199) {
            CHECK(flatten(agent.target()) != flatten(agent.online()));
        }
    }
    CHECK(agent.learn_steps() == 200);
    CHECK(flatten(agent.target()) == flatten(agent.online()));
}

TEST_CASE("DQN reaches the value-iteration optimum on the 5-state chain") {
    const oracle::ChainMdp mdp;
    const Eigen::MatrixXd q_star = oracle::value_iteration(mdp);
    int successes = 0;
    for (uint64_t seed = 0; seed < 3; ++seed) {
        DqnConfig config;
        config.lr = 5e-3;
        config.eps_decay = 0.99;
        config.eps_min = 0.2;
        config.batch_size = 32;
        config.target_update_period = 100;
        config.hidden = {32};
        config.seed = seed;
        DqnAgent agent(5, 2, config);

        auto encode = [](int s) {
            Eigen::VectorXd obs = Eigen::VectorXd::Zero(5);
            obs(s) = 1.0;
            return obs;
        };
        int state = 0;
        int steps = 0;
        while (steps < 2000) {
            const Eigen::VectorXd obs = encode(state);
            const int action = agent.act(obs);
            const int next_state = mdp.step(state, action);
            const bool done = mdp.terminal(next_state);
            agent.observe({obs, action, mdp.reward(state, action), encode(next_state), done});
            agent.learn();
            steps += 1;
            if (done || steps % 40 == 0) {
                state = 0;
                agent.end_episode();
            } else {
                state = next_state;
            }
        }
        double worst = 0.0;
        for (int s = 0; s < 4; ++s) {  // terminal state carries no Q values
            const Eigen::VectorXd q = forward(agent.online(), encode(s));
            for (int a = 0; a < 2; ++a) {
                worst = std::max(worst, std::abs(q(a) - q_star(s, a)));
            }
        }
        if (worst <= 0.05) successes += 1;
    }
    CHECK(successes >= 2);
}

// ---------------------------------------------------------------------------
// PPO
// ---------------------------------------------------------------------------

TEST_CASE("ppo_act: uniform logits sample uniformly (chi-squared)") {
    PpoConfig config = bandit_ppo_config(4);
    PpoAgent agent(3, 8, config);
    // Freshly initialized biases are zero, so a zero input yields zero
    // logits: an exactly uniform policy.
    std::vector<int> counts(8, 0);
    const int n_draws = 10000;
    for (int i = 0; i < n_draws; ++i) {
        const auto [action, log_prob, value] = agent.act(Eigen::VectorXd::Zero(3));
        counts[action] += 1;
        CHECK(std::exp(log_prob) == doctest::Approx(0.125));
    }
    CHECK(chi_squared_uniform(counts, n_draws) < 18.48);
}

TEST_CASE("ppo_act: saturated logits pick the dominant action") {
    Eigen::VectorXd logits(4);
    logits << 10.0, -10.0, -10.0, -10.0;
    const Eigen::VectorXd probs = softmax(logits);
    CHECK(probs(0) > 0.999);
    CHECK(probs.sum() == doctest::Approx(1.0).epsilon(1e-12));

    Rng rng(9);
    int hits = 0;
    for (int i = 0; i < 10000; ++i) {
        if (sample_categorical(probs, rng) == 0) hits += 1;
    }
    CHECK(hits >= 9990);
}

TEST_CASE("ppo log probabilities are valid") {
    PpoAgent agent(2, 4, bandit_ppo_config(10));
    Rng rng(10);
    for (int trial = 0; trial < 100; ++trial) {
        Eigen::VectorXd obs(2);
        obs << rng.normal(), rng.normal();
        const auto [action, log_prob, value] = agent.act(obs);
        const double p = std::exp(log_prob);
        CHECK(p > 0.0);
        CHECK(p <= 1.0 + 1e-12);
    }
}

TEST_CASE("gae_advantages: lambda = 0 reduces to the TD residuals") {
    Eigen::VectorXd rewards(4), values(4);
    rewards << 1.0, -0.5, 2.0, 0.0;
    values << 0.3, 0.1, -0.2, 0.4;
    const std::vector<bool> dones{false, false, false, true};
    const GaeResult result = gae_advantages(rewards, values, dones, 0.95, 0.0, 7.0);
    for (int t = 0; t < 4; ++t) {
        const double next_value = t + 1 < 4 ? values(t + 1) : 7.0;
        const double delta =
            rewards(t) + 0.95 * next_value * (dones[t] ? 0.0 : 1.0) - values(t);
        // returns = raw advantages + values, so raw advantages are recoverable.
        CHECK(result.returns(t) - values(t) == doctest::Approx(delta).epsilon(1e-12));
    }
}

TEST_CASE("gae_advantages: zero rewards and values give zero advantages") {
    const Eigen::VectorXd zeros = Eigen::VectorXd::Zero(6);
    const std::vector<bool> dones(6, false);
    const GaeResult result = gae_advantages(zeros, zeros, dones, 0.95, 0.95, 0.0);
    CHECK(result.returns.cwiseAbs().maxCoeff() == 0.0);
    CHECK(result.advantages.cwiseAbs().maxCoeff() == 0.0);  // guarded normalization
}

TEST_CASE("gae_advantages matches the brute-force double loop") {
    Rng rng(12);
    Eigen::VectorXd rewards(50), values(50);
    std::vector<bool> dones(50, false);
    for (int t = 0; t < 50; ++t) {
        rewards(t) = rng.normal();
        values(t) = rng.normal();
        dones[t] = rng.uniform01() < 0.1;
    }
    dones[49] = true;
    const double bootstrap = rng.normal();
    const GaeResult result = gae_advantages(rewards, values, dones, 0.95, 0.95, bootstrap);
    const Eigen::VectorXd raw = result.returns - values;
    const Eigen::VectorXd expected =
        oracle::gae_brute_force(rewards, values, dones, 0.95, 0.95, bootstrap);
    CHECK((raw - expected).cwiseAbs().maxCoeff() < 1e-10);

    // And the normalization: zero mean, unit variance.
    CHECK(result.advantages.mean() == doctest::Approx(0.0).epsilon(1e-10));
    const double variance = result.advantages.squaredNorm() / 50.0;
    CHECK(variance == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("clipped surrogate: hand-computed values and saturation") {
    CHECK(clipped_surrogate(1.5, 2.0, 0.2) == doctest::Approx(2.4));
    CHECK(clipped_surrogate(1.0, 0.7, 0.2) == doctest::Approx(0.7));  // clip inactive at rho = 1

    // Positive advantage, ratio beyond 1 + 2 eps: clipped branch, zero slope.
    CHECK(clipped_surrogate_grad_ratio(1.4, 2.0, 0.2) == 0.0);
    const double at = clipped_surrogate(1.4, 2.0, 0.2);
    CHECK(clipped_surrogate(1.4 + 1e-6, 2.0, 0.2) == doctest::Approx(at));
    // Negative advantage keeps the unclipped branch active (pessimistic min).
    CHECK(clipped_surrogate_grad_ratio(1.4, -2.0, 0.2) == -2.0);
    CHECK(clipped_surrogate_grad_ratio(1.0, 3.0, 0.2) == 3.0);
}

TEST_CASE("ppo_update returns finite stats and keeps the policy valid") {
    PpoAgent agent(2, 3, bandit_ppo_config(13));
    Rng rng(13);
    Eigen::VectorXd obs(2);
    for (int t = 0; t < 25; ++t) {
        obs << rng.normal(), rng.normal();
        const auto [action, log_prob, value] = agent.act(obs);
        agent.record({obs, action, rng.normal(), value, log_prob, t == 24});
    }
    const PpoUpdateStats stats = agent.update(0.0);
    CHECK(std::isfinite(stats.policy_loss));
    CHECK(std::isfinite(stats.value_loss));
    CHECK(stats.value_loss >= 0.0);
    CHECK(stats.entropy >= 0.0);
    obs << 0.3, -0.4;
    const Eigen::VectorXd probs = agent.policy_probs(obs);
    CHECK(probs.minCoeff() >= 0.0);
    CHECK(probs.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(agent.update(0.0), std::logic_error);  // rollout consumed
}

TEST_CASE("PPO learns the better bandit arm") {
    int successes = 0;
    for (uint64_t seed = 0; seed < 3; ++seed) {
        PpoAgent agent(1, 2, bandit_ppo_config(seed));
        for (int update = 0; update < 200; ++update) {
            run_ppo_bandit_episode(agent);
        }
        if (agent.policy_probs(Eigen::VectorXd::Ones(1))(0) > 0.9) successes += 1;
    }
    CHECK(successes >= 2);
}

// ---------------------------------------------------------------------------
// Ensemble
// ---------------------------------------------------------------------------

TEST_CASE("ensemble mixture arithmetic") {
    Eigen::VectorXd q(8);
    q << 5.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0;  // argmax 0
    const Eigen::VectorXd pi_dqn = soften_greedy(q, 0.05);
    CHECK(pi_dqn(0) == doctest::Approx(0.95 + 0.05 / 8.0));
    const Eigen::VectorXd pi_ppo = Eigen::VectorXd::Constant(8, 0.125);
    const Eigen::VectorXd mix = ensemble_mixture(pi_dqn, pi_ppo, 0.5);
    CHECK(mix(0) == doctest::Approx(0.5 * (0.95 + 0.05 / 8.0) + 0.5 * 0.125));
    CHECK(mix.sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ensemble mixture at the omega = 1 boundary equals the softened greedy") {
    Eigen::VectorXd q(4);
    q << 0.0, 2.0, 1.0, -1.0;
    const Eigen::VectorXd pi_dqn = soften_greedy(q);
    const Eigen::VectorXd pi_ppo = Eigen::VectorXd::Constant(4, 0.25);
    CHECK(ensemble_mixture(pi_dqn, pi_ppo, 1.0) == pi_dqn);
}

TEST_CASE("ensemble mixture sums to one for random inputs") {
    Rng rng(14);
    for (int trial = 0; trial < 100; ++trial) {
        Eigen::VectorXd q(6), logits(6);
        for (int i = 0; i < 6; ++i) {
            q(i) = rng.normal();
            logits(i) = rng.normal();
        }
        const Eigen::VectorXd mix =
            ensemble_mixture(soften_greedy(q), softmax(logits), 0.1 + 0.8 * rng.uniform01());
        CHECK(std::abs(mix.sum() - 1.0) < 1e-12);
        CHECK(mix.minCoeff() >= 0.0);
    }
}

TEST_CASE("ensemble_reweight: symmetry, clamp and window behavior") {
    EnsembleState state;
    CHECK(ensemble_reweight(state, 5.0, 5.0) == doctest::Approx(0.5));

    EnsembleState lopsided;
    for (int i = 0; i < 10; ++i) {
        ensemble_reweight(lopsided, 100.0, 0.0);
    }
    CHECK(lopsided.omega_dqn == 0.9);  // clamped

    EnsembleState flipped;
    for (int i = 0; i < 10; ++i) {
        ensemble_reweight(flipped, 0.0, 100.0);
    }
    CHECK(flipped.omega_dqn == 0.1);

    EnsembleState capped;
    for (int i = 0; i < 50; ++i) {
        ensemble_reweight(capped, 1.0, 2.0);
    }
    CHECK(static_cast<int>(capped.dqn_returns.size()) == capped.window);
    CHECK(capped.omega_dqn >= 0.1);
    CHECK(capped.omega_dqn <= 0.9);
    CHECK_THROWS_AS(ensemble_reweight(capped, std::nan(""), 1.0), std::invalid_argument);
}

TEST_CASE("ensemble on the bandit stays within 0.05 of the weaker sub-agent") {
    int successes = 0;
    for (uint64_t seed = 0; seed < 2; ++seed) {
        // Standalone sub-agents.
        DqnAgent dqn_solo(1, 2, bandit_dqn_config(Rng::derive(seed, 1)));
        PpoAgent ppo_solo(1, 2, bandit_ppo_config(Rng::derive(seed, 2)));
        // Ensemble members.
        DqnAgent dqn_ens(1, 2, bandit_dqn_config(Rng::derive(seed, 3)));
        PpoAgent ppo_ens(1, 2, bandit_ppo_config(Rng::derive(seed, 4)));
        EnsembleState ens;
        Rng mix_rng(Rng::derive(seed, 5));
        const Eigen::VectorXd obs = Eigen::VectorXd::Ones(1);

        double solo_dqn_last = 0.0, solo_ppo_last = 0.0, ens_last = 0.0;
        int tail = 0;
        for (int episode = 0; episode < 200; ++episode) {
            const double r_dqn = run_dqn_bandit_episode(dqn_solo);
            const double r_ppo = run_ppo_bandit_episode(ppo_solo);

            // Ensemble: mixture episode plus both sub-agent episodes.
            double mixture_return = 0.0;
            for (int t = 0; t < kBanditEpisodeLen; ++t) {
                const int action = ensemble_act(obs, dqn_ens.online(), ppo_ens, ens, mix_rng);
                const double reward = bandit_reward(action);
                dqn_ens.observe({obs, action, reward, obs, true});
                dqn_ens.learn();
                mixture_return += reward;
            }
            const double dqn_ret = run_dqn_bandit_episode(dqn_ens);
            const double ppo_ret = run_ppo_bandit_episode(ppo_ens);
            ensemble_reweight(ens, dqn_ret, ppo_ret);

            if (episode >= 180) {
                solo_dqn_last += r_dqn;
                solo_ppo_last += r_ppo;
                ens_last += mixture_return;
                tail += 1;
            }
        }
        const double scale = 1.0 / (tail * kBanditEpisodeLen);
        const double floor = std::min(solo_dqn_last, solo_ppo_last) * scale - 0.05;
        if (ens_last * scale >= floor) successes += 1;
    }
    CHECK(successes == 2);
}
