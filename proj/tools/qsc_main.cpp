#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "qsc/csv.hpp"
#include "qsc/harness.hpp"

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open config file: " + path);
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

struct CommonFlags {
    std::string config_path;
    int64_t seed = -1;
    int episodes = -1;
    std::string agent;
    std::string out;
    int workers = 1;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "JSON run-config path");
    cmd->add_option("--seed", flags.seed, "base seed");
    cmd->add_option("--episodes", flags.episodes, "episodes per run");
    cmd->add_option("--agent", flags.agent, "agent kind: dqn|ppo|ensemble|mpc|random");
    cmd->add_option("--out", flags.out, "output directory");
    cmd->add_option("--workers", flags.workers, "worker threads for sweep cells");
}

qsc::RunConfig build_run_config(const CommonFlags& flags) {
    qsc::RunConfig config;
    if (!flags.config_path.empty()) {
        config = qsc::run_config_from_json(read_file(flags.config_path));
    }
    if (flags.seed >= 0) config.seed = static_cast<uint64_t>(flags.seed);
    if (flags.episodes > 0) config.episodes = flags.episodes;
    if (!flags.agent.empty()) config.agent = qsc::agent_kind_from_name(flags.agent);
    if (!flags.out.empty()) config.out_dir = flags.out;
    config.validate();
    return config;
}

void report_plots(qsc::PlotStatus status, const std::string& study) {
    if (status == qsc::PlotStatus::NothingToPlot) {
        std::cout << study << ": nothing to plot\n";
    } else {
        std::cout << study << ": plots written\n";
    }
}

void finish_sweep(const qsc::SweepResult& result, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    qsc::write_summary_csv(result, out_dir + "/" + result.study + "_summary.csv");
    report_plots(qsc::emit_plots(result, out_dir), result.study);
    for (const auto& cell : result.cells) {
        if (cell.failed) {
            std::cout << "cell " << cell.cell << " failed: " << cell.error << "\n";
        } else {
            std::cout << cell.cell << " (" << cell.agent << "): mean_ma="
                      << qsc::format_double(cell.summary.mean_ma)
                      << " final10_ma=" << qsc::format_double(cell.summary.final10_ma)
                      << " best_max_ma=" << qsc::format_double(cell.summary.best_max_ma) << "\n";
        }
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"qsc: spin-chain supply-control experiments"};
    app.require_subcommand(1);

    CommonFlags flags;
    int n_seeds = 10;

    CLI::App* train = app.add_subcommand("train", "single seeded training run");
    add_common_flags(train, flags);

    CLI::App* sweep_lr = app.add_subcommand("sweep-lr", "learning-rate sweep");
    add_common_flags(sweep_lr, flags);
    sweep_lr->add_option("--n-seeds", n_seeds, "seeds per cell");

    CLI::App* ablate_n = app.add_subcommand("ablate-n", "chain-size ablation");
    add_common_flags(ablate_n, flags);
    ablate_n->add_option("--n-seeds", n_seeds, "seeds per cell");

    CLI::App* sweep_alpha = app.add_subcommand("sweep-alpha", "reward-weight sweep");
    add_common_flags(sweep_alpha, flags);
    sweep_alpha->add_option("--n-seeds", n_seeds, "seeds per cell");

    CLI::App* noise = app.add_subcommand("noise", "noise-channel robustness study");
    add_common_flags(noise, flags);
    noise->add_option("--n-seeds", n_seeds, "evaluation seeds");

    CLI::App* report = app.add_subcommand("report", "recompute summaries and plots from CSVs");
    add_common_flags(report, flags);

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) {
            const qsc::RunConfig config = build_run_config(flags);
            const auto records = qsc::run_training(config);
            std::vector<double> returns;
            returns.reserve(records.size());
            for (const auto& r : records) returns.push_back(r.ret);
            if (returns.size() >= 10) {
                const qsc::Summary s = qsc::summarize(returns);
                std::cout << "mean_ma=" << qsc::format_double(s.mean_ma)
                          << " final10_ma=" << qsc::format_double(s.final10_ma)
                          << " best_max_ma=" << qsc::format_double(s.best_max_ma) << "\n";
            } else {
                std::cout << "completed " << returns.size() << " episodes\n";
            }
            return 0;
        }

        qsc::RunConfig base = build_run_config(flags);
        const std::vector<uint64_t> seeds = qsc::derive_seeds(base.seed, n_seeds);

        if (sweep_lr->parsed()) {
            const auto result = qsc::lr_sweep(base, qsc::default_lr_grid(), seeds, flags.workers);
            finish_sweep(result, base.out_dir.empty() ? "." : base.out_dir);
            qsc::write_lr_table_csv(result, (base.out_dir.empty() ? "." : base.out_dir) +
                                                "/lr_table.csv");
        } else if (ablate_n->parsed()) {
            const auto result =
                qsc::n_ablation(base, qsc::default_n_grid(), seeds, flags.workers);
            finish_sweep(result, base.out_dir.empty() ? "." : base.out_dir);
        } else if (sweep_alpha->parsed()) {
            const auto result =
                qsc::alpha_sweep(base, qsc::default_alpha_rows(), seeds, flags.workers);
            finish_sweep(result, base.out_dir.empty() ? "." : base.out_dir);
        } else if (noise->parsed()) {
            const auto result =
                qsc::noise_study(base, qsc::default_noise_channels(), qsc::default_noise_grid(),
                                 seeds, 100, flags.workers);
            const std::string out = base.out_dir.empty() ? "." : base.out_dir;
            finish_sweep(result, out);
            qsc::write_cell_stats_csv(result, out + "/noise_study_stats.csv");
        } else if (report->parsed()) {
            if (flags.out.empty()) {
                throw std::runtime_error("report: --out <study dir> is required");
            }
            const auto result = qsc::load_sweep_from_csv(flags.out);
            qsc::write_summary_csv(result, flags.out + "/" + result.study + "_summary.csv");
            report_plots(qsc::emit_plots(result, flags.out), result.study);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
