#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qsc/env.hpp"
#include "qsc/mlp.hpp"

namespace qsc {

enum class AgentKind { Dqn, Ppo, Ensemble, Mpc, Random };

const char* agent_kind_name(AgentKind kind);
AgentKind agent_kind_from_name(const std::string& name);

struct RunConfig {
    AgentKind agent = AgentKind::Dqn;
    EnvConfig env;
    int episodes = 1000;
    uint64_t seed = 0;
    double lr = 5e-4;
    std::string out_dir;  // empty: keep records in memory only

    void validate() const;
};

RunConfig run_config_from_json(const std::string& text);
std::string run_config_to_json(const RunConfig& config);

struct EpisodeRecord {
    int episode = 0;
    double ret = 0.0;  // sum of r_t over the episode
    double mean_fidelity = 0.0;
    double final_security = 0.0;
    double episode_co2 = 0.0;
    double epsilon = 0.0;    // DQN exploration rate, 0 for other agents
    double omega_dqn = 0.0;  // ensemble mixture weight, 0 for other agents
};

// Seeded training loop (act, step, store, replay-update, record); writes the
// per-episode CSV incrementally when out_dir is set.
std::vector<EpisodeRecord> run_training(const RunConfig& config);

// Edge-padded sliding mean; output length equals input length. The window-1
// pad cells are split front-heavy (first/last values replicated).
std::vector<double> moving_average(const std::vector<double>& values, int window = 10);

struct Summary {
    double mean_ma = 0.0;
    double final10_ma = 0.0;
    double best_max_ma = 0.0;
};

// Statistics of the 10-episode moving average; needs >= 10 samples.
Summary summarize(const std::vector<double>& series);

struct CellResult {
    std::string cell;
    std::string agent;
    std::vector<std::vector<EpisodeRecord>> per_seed;  // completed runs only
    Summary summary;        // per-seed summaries averaged
    int n_seeds = 0;        // completed seed count
    double mean_return = 0.0;  // across all recorded episodes in the cell
    double std_return = 0.0;
    bool failed = false;
    std::string error;
};

struct SweepResult {
    std::string study;
    std::vector<CellResult> cells;
};

// Paper-grid defaults.
std::vector<double> default_lr_grid();          // {5e-3, 2.5e-3, 1e-3, 5e-4, 2.5e-4, 1e-4}
std::vector<int> default_n_grid();              // {2, 3, 4, 5, 6}
std::vector<std::array<double, 3>> default_alpha_rows();  // 8 coefficient triples
std::vector<double> default_noise_grid();       // {0, 0.05, 0.1, 0.2, 0.3}
std::vector<NoiseKind> default_noise_channels();
std::vector<uint64_t> derive_seeds(uint64_t base, int count);

SweepResult lr_sweep(const RunConfig& base, const std::vector<double>& lrs,
                     const std::vector<uint64_t>& seeds, int workers = 1);
SweepResult n_ablation(const RunConfig& base, const std::vector<int>& ns,
                       const std::vector<uint64_t>& seeds, int workers = 1);
SweepResult alpha_sweep(const RunConfig& base, const std::vector<std::array<double, 3>>& rows,
                        const std::vector<uint64_t>& seeds, int workers = 1);

// Trains once at p = 0, then evaluates the frozen policy under every
// (channel, probability) cell; roughly eval_episodes episodes per cell split
// across the seeds, seed-paired between cells.
SweepResult noise_study(const RunConfig& base, const std::vector<NoiseKind>& channels,
                        const std::vector<double>& probabilities,
                        const std::vector<uint64_t>& seeds, int eval_episodes = 100,
                        int workers = 1);

// study,cell,agent,mean_ma,final10_ma,best_max_ma,n_seeds
void write_summary_csv(const SweepResult& result, const std::string& path);

// Table-II-shaped view of an LR sweep: best over the grid plus the endpoint
// averages, with the flat GRAPE/MPC/Human reference rows.
void write_lr_table_csv(const SweepResult& result, const std::string& path);

// mean/std detail per cell (noise study).
void write_cell_stats_csv(const SweepResult& result, const std::string& path);

enum class PlotStatus { Written, NothingToPlot };

// One SVG line chart per study: 10-episode MA of returns per cell, dashed
// reference lines at the GRAPE/MPC/Human constants.
PlotStatus emit_plots(const SweepResult& result, const std::string& out_dir);

// Rebuilds a SweepResult from per-episode CSVs written by earlier runs
// (<dir>/<cell>/<agent>_seed<k>.csv).
SweepResult load_sweep_from_csv(const std::string& study_dir);

}  // namespace qsc
