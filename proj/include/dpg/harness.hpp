#pragma once

// Seeded multi-run experiment execution, the results CSV, the config file
// format and SVG learning curves.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dpg/agents.hpp"
#include "dpg/environments.hpp"

namespace dpg {

enum class ExperimentKind {
    actor_advisor,
    dqn_only,
    vanilla_pg,
    dpg_advice,
    override_advice,
    reward_shaping,
    transfer_fresh,
    transfer_seeded,
    transfer_advised,
    human_advice,
};

std::string_view to_string(ExperimentKind kind);
ExperimentKind parse_experiment_kind(std::string_view text);

enum class AdvisorKind { none, table_backup, table_heuristic, table_combined, human, transfer };

std::string_view to_string(AdvisorKind kind);
AdvisorKind parse_advisor_kind(std::string_view text);

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::vanilla_pg;
    std::string env = "grid1";     // table | grid1 | grid2 | five_rooms
    std::string map_file;          // overrides env with a map on disk
    bool options = false;          // drive map_file worlds through door/goal options
    AdvisorKind advisor = AdvisorKind::none;
    std::size_t runs = 8;
    std::size_t episodes = 1000;
    double gamma = 0.99;
    std::uint64_t seed = 1;

    // actor
    std::size_t hidden = Mlp::kDefaultHidden;
    double learning_rate = 1e-4;
    std::size_t update_period = 16;

    // critic
    double critic_learning_rate = 1e-3;
    std::size_t batch_size = 512;
    std::size_t buffer_capacity = 20000;
    std::size_t train_period = 16;
    std::size_t target_sync = 1000;
    double temperature = 0.1;

    // simulated human
    double human_availability = 0.05;
    double human_p_right = 1.0;
    std::optional<std::size_t> human_budget;

    // reward-shaping teacher
    double teacher_availability = 0.05;
    double teacher_penalty = -5.0;
    std::optional<std::size_t> teacher_budget;

    // transfer source policy
    std::string source_snapshot;
    std::string source_env = "grid1";
    std::size_t source_max_episodes = 5000;
    double source_entropy = 0.05;
    std::size_t source_window = 100;
    double source_learning_rate = 1e-4;
    std::size_t source_update_period = 16;
    std::size_t source_attempts = 1;  // fresh restarts when training does not converge

    // final-window length for the train summary
    std::size_t summary_window = 100;

    // Applies one "key = value" assignment; throws ConfigError on an unknown key or bad value.
    void set(std::string_view key, std::string_view value);
    // Rejects incompatible kind/advisor/environment combinations.
    void validate() const;
};

// Flat "key = value" lines with '#' comments.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

struct EpisodeRecord {
    std::size_t run = 0;
    std::size_t episode = 0;  // 1-based
    double episode_return = 0.0;  // undiscounted environment reward
    std::size_t steps = 0;        // primitive steps
    std::size_t decisions = 0;    // policy decisions (differs from steps under options)
    std::size_t interventions = 0;
    TerminalCause terminal = TerminalCause::none;

    bool operator==(const EpisodeRecord&) const = default;
};

struct RunnerOptions {
    std::size_t jobs = 1;
    // Invoked once per finished run (from the worker thread when jobs > 1).
    std::function<void(std::size_t run)> on_run_done;
};

// Executes cfg.runs independent runs with seeds cfg.seed + r and returns the
// records in run-major order.
std::vector<EpisodeRecord> run_experiment(const ExperimentConfig& cfg, const RunnerOptions& options = {});

// Trains a vanilla policy-gradient agent on cfg.source_env until the mean
// entropy over states visited in the last source_window episodes drops below
// cfg.source_entropy (or source_max_episodes is reached). Unconverged
// attempts are restarted from a fresh initialization up to source_attempts times.
struct SourcePolicy {
    Mlp net;
    std::size_t attempts = 0;
    std::size_t episodes = 0;
    double entropy = 0.0;
    bool converged = false;
};
SourcePolicy train_transfer_source(const ExperimentConfig& cfg);

// CSV with header run,episode,return,steps,decisions,interventions,terminal.
std::string records_to_csv(const std::vector<EpisodeRecord>& records);
std::vector<EpisodeRecord> parse_csv(std::string_view text);
void write_csv(const std::vector<EpisodeRecord>& records, const std::filesystem::path& path);
std::vector<EpisodeRecord> read_csv(const std::filesystem::path& path);

// Per-episode returns for one run (in episode order).
std::vector<double> run_returns(const std::vector<EpisodeRecord>& records, std::size_t run);
std::size_t run_count(const std::vector<EpisodeRecord>& records);
// Returns of every record with first <= episode <= last, pooled across runs.
std::vector<double> window_returns(const std::vector<EpisodeRecord>& records, std::size_t first, std::size_t last);
// Mean return per run over an inclusive episode window.
std::vector<double> per_run_window_means(const std::vector<EpisodeRecord>& records, std::size_t first,
                                         std::size_t last);

struct Curve {
    std::string name;
    std::vector<double> mean;
    std::vector<double> stderr_band;
};

// Mean and standard error across runs for each episode.
Curve curve_from_records(const std::string& name, const std::vector<EpisodeRecord>& records,
                         std::size_t smooth_window = 1);

// Standalone SVG (1000x600 viewBox) with axes, legend and shaded stderr bands.
std::string emit_curve_svg(const std::vector<Curve>& curves, const std::string& title);

}  // namespace dpg
