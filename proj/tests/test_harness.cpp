#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "qsc/csv.hpp"
#include "qsc/harness.hpp"

using namespace qsc;
namespace fs = std::filesystem;

namespace {

RunConfig tiny_run(AgentKind agent, int episodes = 12) {
    RunConfig config;
    config.agent = agent;
    config.episodes = episodes;
    config.env.timesteps = 10;
    config.env.window = 50;
    config.seed = 7;
    return config;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("moving_average: constants, identity window and oracle agreement") {
    const std::vector<double> constant(17, 3.25);
    CHECK(moving_average(constant, 10) == constant);

    const std::vector<double> arbitrary{4.0, -1.0, 0.5, 9.0, 2.0};
    CHECK(moving_average(arbitrary, 1) == arbitrary);

    const std::vector<double> step{0, 0, 0, 0, 0, 10, 10, 10, 10, 10};
    CHECK(moving_average(step, 10) == oracle::padded_moving_average(step, 10));

    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 1 + rng.uniform_int(40);
        const int window = 1 + rng.uniform_int(12);
        std::vector<double> series(n);
        for (double& v : series) v = rng.normal();
        const auto ours = moving_average(series, window);
        const auto expected = oracle::padded_moving_average(series, window);
        REQUIRE(ours.size() == expected.size());
        for (size_t i = 0; i < ours.size(); ++i) {
            CHECK(ours[i] == doctest::Approx(expected[i]).epsilon(1e-12));
        }
    }
    CHECK_THROWS_AS(moving_average({}, 10), std::invalid_argument);
}

TEST_CASE("summarize: constants and monotone series") {
    const Summary constant = summarize(std::vector<double>(25, 5.0));
    CHECK(constant.mean_ma == doctest::Approx(5.0));
    CHECK(constant.final10_ma == doctest::Approx(5.0));
    CHECK(constant.best_max_ma == doctest::Approx(5.0));

    std::vector<double> rising(30);
    for (int i = 0; i < 30; ++i) rising[i] = 0.5 * i;
    const auto ma = moving_average(rising, 10);
    const Summary s = summarize(rising);
    CHECK(s.best_max_ma == doctest::Approx(ma.back()));

    CHECK_THROWS_AS(summarize(std::vector<double>(9, 1.0)), std::invalid_argument);
}

TEST_CASE("run_training: random agent respects reward bounds per episode") {
    RunConfig config = tiny_run(AgentKind::Random, 10);
    const auto records = run_training(config);
    REQUIRE(records.size() == 10);
    const double horizon = config.env.timesteps;
    const auto& w = config.env.reward_weights;
    for (const auto& r : records) {
        CHECK(r.ret >= -w[2] * horizon - 1e-9);
        CHECK(r.ret <= (w[0] + w[1]) * horizon + 1e-9);
        CHECK(r.mean_fidelity >= 0.0);
        CHECK(r.mean_fidelity <= 1.0);
        CHECK(r.episode_co2 >= 0.0);
        CHECK(r.epsilon == 0.0);
    }
}

TEST_CASE("run_training: identical config and seed give byte-identical CSVs") {
    TempDir dir_a("qsc_repro_a");
    TempDir dir_b("qsc_repro_b");
    RunConfig config = tiny_run(AgentKind::Dqn, 6);
    config.out_dir = dir_a.path.string();
    run_training(config);
    config.out_dir = dir_b.path.string();
    run_training(config);
    const std::string name = "/dqn_seed7.csv";
    CHECK(slurp(dir_a.path.string() + name) == slurp(dir_b.path.string() + name));
}

TEST_CASE("run_training: per-episode CSV schema and epsilon decay") {
    TempDir dir("qsc_csv_schema");
    RunConfig config = tiny_run(AgentKind::Dqn, 8);
    config.out_dir = dir.path.string();
    const auto records = run_training(config);
    const CsvTable table = read_csv(dir.path.string() + "/dqn_seed7.csv");
    CHECK(table.header == std::vector<std::string>{"episode", "return", "mean_fidelity",
                                                   "final_security", "episode_co2", "epsilon",
                                                   "omega_dqn"});
    REQUIRE(table.rows.size() == 8);
    for (size_t i = 1; i < records.size(); ++i) {
        CHECK(records[i].epsilon < records[i - 1].epsilon);
    }
}

TEST_CASE("run_training writes reloadable net checkpoints") {
    TempDir dir("qsc_ckpt_out");
    RunConfig config = tiny_run(AgentKind::Ensemble, 3);
    config.out_dir = dir.path.string();
    run_training(config);
    const MlpParams q_net = load_checkpoint(dir.path.string() + "/ensemble_seed7_qnet.ckpt");
    CHECK(q_net.spec.input_size() == config.env.observation_dim());
    CHECK(q_net.spec.output_size() == config.env.n_actions());
    const MlpParams policy = load_checkpoint(dir.path.string() + "/ensemble_seed7_policy.ckpt");
    CHECK(policy.spec.output_size() == config.env.n_actions());
}

TEST_CASE("run_training: ensemble logs omega within its clamp") {
    RunConfig config = tiny_run(AgentKind::Ensemble, 4);
    const auto records = run_training(config);
    for (const auto& r : records) {
        CHECK(r.omega_dqn >= 0.1);
        CHECK(r.omega_dqn <= 0.9);
    }
}

TEST_CASE("run_training: mpc agent runs and is deterministic") {
    RunConfig config = tiny_run(AgentKind::Mpc, 2);
    const auto a = run_training(config);
    const auto b = run_training(config);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].ret == b[i].ret);
    }
}

TEST_CASE("RunConfig JSON round trip and unknown-key rejection") {
    RunConfig config = tiny_run(AgentKind::Ppo, 20);
    config.lr = 2.5e-4;
    config.out_dir = "somewhere";
    const RunConfig parsed = run_config_from_json(run_config_to_json(config));
    CHECK(parsed.agent == AgentKind::Ppo);
    CHECK(parsed.episodes == 20);
    CHECK(parsed.lr == 2.5e-4);
    CHECK(parsed.out_dir == "somewhere");
    CHECK(parsed.env.timesteps == 10);

    CHECK_THROWS_WITH_AS(static_cast<void>(run_config_from_json(R"({"episodes": 5, "typo": 1})")),
                         doctest::Contains("typo"), std::invalid_argument);
}

TEST_CASE("default grids match the experiment plan") {
    const auto lrs = default_lr_grid();
    REQUIRE(lrs.size() == 6);
    CHECK(lrs.front() == 5e-3);
    CHECK(lrs.back() == 1e-4);

    CHECK(default_n_grid() == std::vector<int>{2, 3, 4, 5, 6});

    const auto rows = default_alpha_rows();
    REQUIRE(rows.size() == 8);
    CHECK(rows[1] == std::array<double, 3>{1.0, 1.0, 0.5});
    CHECK(rows[6] == std::array<double, 3>{0.1, 0.1, 0.1});

    CHECK(default_noise_grid() == std::vector<double>{0.0, 0.05, 0.1, 0.2, 0.3});
    CHECK(default_noise_channels().size() == 3);
    CHECK(derive_seeds(42, 10).size() == 10);
}

TEST_CASE("observation dimension follows the layout formula across N") {
    for (int n = 2; n <= 6; ++n) {
        EnvConfig config;
        config.spin_spec.n_spins = n;
        config.n_warehouses = n;
        CHECK(config.observation_dim() == 2 * (1 << n) + n + 2);
    }
}

TEST_CASE("lr_sweep: summary CSV schema and recomputation consistency") {
    TempDir dir("qsc_lr_sweep");
    RunConfig base = tiny_run(AgentKind::Random, 14);
    base.out_dir = dir.path.string();
    const auto seeds = derive_seeds(1, 2);
    const SweepResult result = lr_sweep(base, {5e-3, 1e-4}, seeds, 1);
    REQUIRE(result.cells.size() == 2);
    CHECK(result.cells[0].cell == "lr=0.005");
    CHECK(result.cells[1].cell == "lr=0.0001");
    CHECK(result.cells[0].n_seeds == 2);

    const std::string summary_path = dir.path.string() + "/summary.csv";
    write_summary_csv(result, summary_path);
    const CsvTable table = read_csv(summary_path);
    CHECK(table.header == std::vector<std::string>{"study", "cell", "agent", "mean_ma",
                                                   "final10_ma", "best_max_ma", "n_seeds"});
    REQUIRE(table.rows.size() == 2);

    // Recompute the summary from the per-episode CSVs on disk.
    const SweepResult reloaded = load_sweep_from_csv(dir.path.string() + "/lr_sweep");
    REQUIRE(reloaded.cells.size() == 2);
    for (const auto& cell : result.cells) {
        bool found = false;
        for (const auto& loaded : reloaded.cells) {
            if (loaded.cell != cell.cell) continue;
            found = true;
            CHECK(loaded.summary.mean_ma ==
                  doctest::Approx(cell.summary.mean_ma).epsilon(1e-9));
            CHECK(loaded.summary.final10_ma ==
                  doctest::Approx(cell.summary.final10_ma).epsilon(1e-9));
            CHECK(loaded.summary.best_max_ma ==
                  doctest::Approx(cell.summary.best_max_ma).epsilon(1e-9));
        }
        CHECK(found);
    }

    // Table-II-shaped view includes the reference rows.
    const std::string table_path = dir.path.string() + "/lr_table.csv";
    write_lr_table_csv(result, table_path);
    const CsvTable lr_table = read_csv(table_path);
    REQUIRE(lr_table.rows.size() == 4);
    CHECK(lr_table.rows[0][0] == "random");
    CHECK(lr_table.rows[1][0] == "GRAPE");
    CHECK(lr_table.rows[1][1] == "13");
}

TEST_CASE("alpha_sweep: eight paper rows, cell naming, byte-stable summary") {
    TempDir dir("qsc_alpha_sweep");
    RunConfig base = tiny_run(AgentKind::Random, 12);
    const auto seeds = derive_seeds(2, 1);
    const SweepResult result = alpha_sweep(base, default_alpha_rows(), seeds, 1);
    REQUIRE(result.cells.size() == 8);
    CHECK(result.cells[1].cell == "alpha=(1,1,0.5)");

    const std::string path_a = dir.path.string() + "/alpha_a.csv";
    const std::string path_b = dir.path.string() + "/alpha_b.csv";
    write_summary_csv(result, path_a);
    write_summary_csv(alpha_sweep(base, default_alpha_rows(), seeds, 1), path_b);
    CHECK(slurp(path_a) == slurp(path_b));
}

TEST_CASE("n_ablation tracks warehouses to the chain size") {
    RunConfig base = tiny_run(AgentKind::Random, 12);
    const SweepResult result = n_ablation(base, {2, 4}, derive_seeds(8, 1), 1);
    REQUIRE(result.cells.size() == 2);
    CHECK(result.cells[0].cell == "N=2");
    CHECK(result.cells[1].cell == "N=4");
    CHECK(!result.cells[0].failed);
    CHECK(!result.cells[1].failed);
    CHECK(result.cells[1].n_seeds == 1);
}

TEST_CASE("sweep isolation: a failing cell leaves the others intact") {
    RunConfig base = tiny_run(AgentKind::Random, 12);
    const auto seeds = derive_seeds(3, 1);
    const SweepResult result = lr_sweep(base, {1e-3, -1.0}, seeds, 1);
    REQUIRE(result.cells.size() == 2);
    CHECK(!result.cells[0].failed);
    CHECK(result.cells[0].n_seeds == 1);
    CHECK(result.cells[1].failed);
    CHECK(result.cells[1].n_seeds == 0);
    CHECK(!result.cells[1].error.empty());
}

TEST_CASE("sweeps are worker-count invariant") {
    RunConfig base = tiny_run(AgentKind::Random, 12);
    const auto seeds = derive_seeds(4, 2);
    const SweepResult serial = lr_sweep(base, {1e-3, 1e-4}, seeds, 1);
    const SweepResult threaded = lr_sweep(base, {1e-3, 1e-4}, seeds, 3);
    REQUIRE(serial.cells.size() == threaded.cells.size());
    for (size_t c = 0; c < serial.cells.size(); ++c) {
        CHECK(serial.cells[c].summary.mean_ma == threaded.cells[c].summary.mean_ma);
        REQUIRE(serial.cells[c].per_seed.size() == threaded.cells[c].per_seed.size());
        for (size_t s = 0; s < serial.cells[c].per_seed.size(); ++s) {
            REQUIRE(serial.cells[c].per_seed[s].size() == threaded.cells[c].per_seed[s].size());
            for (size_t e = 0; e < serial.cells[c].per_seed[s].size(); ++e) {
                CHECK(serial.cells[c].per_seed[s][e].ret == threaded.cells[c].per_seed[s][e].ret);
            }
        }
    }
}

TEST_CASE("emit_plots: nothing-to-plot status and deterministic SVG bytes") {
    TempDir dir("qsc_plots");
    SweepResult empty;
    empty.study = "empty_study";
    CHECK(emit_plots(empty, dir.path.string()) == PlotStatus::NothingToPlot);
    CHECK(!fs::exists(dir.path / "empty_study.svg"));

    RunConfig base = tiny_run(AgentKind::Random, 15);
    const SweepResult result = lr_sweep(base, {1e-3}, derive_seeds(5, 1), 1);
    CHECK(emit_plots(result, dir.path.string()) == PlotStatus::Written);
    const std::string first = slurp((dir.path / "lr_sweep.svg").string());
    CHECK(first.find("GRAPE (13)") != std::string::npos);
    CHECK(first.find("<polyline") != std::string::npos);
    CHECK(emit_plots(result, dir.path.string()) == PlotStatus::Written);
    CHECK(slurp((dir.path / "lr_sweep.svg").string()) == first);
}

TEST_CASE("noise_study: paired seeds make the p=0 cell match the channel-free run") {
    RunConfig base = tiny_run(AgentKind::Random, 6);
    const auto seeds = derive_seeds(6, 2);
    const SweepResult result =
        noise_study(base, {NoiseKind::None, NoiseKind::BitFlip}, {0.0, 0.25}, seeds, 8, 1);
    REQUIRE(result.cells.size() == 4);

    auto find_cell = [&](const std::string& name) -> const CellResult& {
        for (const auto& cell : result.cells) {
            if (cell.cell == name) return cell;
        }
        REQUIRE(false);
        return result.cells.front();
    };
    const CellResult& none_0 = find_cell("none@p=0");
    const CellResult& flip_0 = find_cell("bit_flip@p=0");
    const CellResult& flip_25 = find_cell("bit_flip@p=0.25");
    REQUIRE(none_0.per_seed.size() == flip_0.per_seed.size());
    bool any_difference_at_p25 = false;
    for (size_t s = 0; s < none_0.per_seed.size(); ++s) {
        REQUIRE(none_0.per_seed[s].size() == flip_0.per_seed[s].size());
        for (size_t e = 0; e < none_0.per_seed[s].size(); ++e) {
            CHECK(none_0.per_seed[s][e].ret == flip_0.per_seed[s][e].ret);
            any_difference_at_p25 =
                any_difference_at_p25 ||
                flip_25.per_seed[s][e].ret != none_0.per_seed[s][e].ret;
        }
    }
    CHECK(any_difference_at_p25);
}
