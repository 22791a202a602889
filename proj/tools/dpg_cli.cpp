// dpg: train, compare, gradcheck, oracle and plot subcommands.
//
// Exit codes: 0 ok, 1 configuration/usage error, 2 runtime error or failed
// check, 3 infeasible map (goal unreachable).

#include <CLI11.hpp>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "dpg/environments.hpp"
#include "dpg/error.hpp"
#include "dpg/gradcheck.hpp"
#include "dpg/harness.hpp"
#include "dpg/stats.hpp"

namespace fs = std::filesystem;
using namespace dpg;

namespace {

enum Exit : int { ok = 0, config_error = 1, runtime_error = 2, infeasible = 3 };

struct Globals {
    std::optional<std::uint64_t> seed;
    std::size_t jobs = 1;
    bool force = false;
};

void ensure_writable(const fs::path& path, bool force) {
    if (fs::exists(path) && !force) {
        throw ConfigError(path.string() + " exists (use --force to overwrite)");
    }
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

std::pair<std::size_t, std::size_t> parse_window(const std::string& text) {
    const auto colon = text.find(':');
    std::size_t a = 0, b = 0;
    const char* s = text.data();
    const auto ra = std::from_chars(s, s + (colon == std::string::npos ? 0 : colon), a);
    const auto rb = colon == std::string::npos ? ra : std::from_chars(s + colon + 1, s + text.size(), b);
    if (colon == std::string::npos || ra.ec != std::errc{} || rb.ec != std::errc{} ||
        ra.ptr != s + colon || rb.ptr != s + text.size() || a == 0 || b < a) {
        throw ConfigError("bad window '" + text + "' (expected A:B with 1 <= A <= B)");
    }
    return {a, b};
}

std::size_t max_episode(const std::vector<EpisodeRecord>& records) {
    std::size_t m = 0;
    for (const auto& r : records) m = std::max(m, r.episode);
    return m;
}

std::size_t min_episode(const std::vector<EpisodeRecord>& records) {
    std::size_t m = records.empty() ? 0 : records.front().episode;
    for (const auto& r : records) m = std::min(m, r.episode);
    return m;
}

int cmd_train(const Globals& g, const std::string& config_path, const std::string& out_dir,
              const std::vector<std::string>& overrides) {
    ExperimentConfig cfg = load_config(config_path);
    for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("override '" + kv + "' is not key=value");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (g.seed) cfg.seed = *g.seed;
    cfg.validate();
    std::cout << "seed " << cfg.seed << '\n';

    const fs::path out(out_dir);
    const fs::path csv = out / "records.csv";
    const fs::path svg = out / "curve.svg";
    ensure_writable(csv, g.force);
    ensure_writable(svg, g.force);

    RunnerOptions options;
    options.jobs = g.jobs;
    options.on_run_done = [](std::size_t run) { std::cerr << "run " << run << " done\n"; };
    const auto records = run_experiment(cfg, options);
    write_csv(records, csv);

    const std::string name(to_string(cfg.kind));
    write_text(svg, emit_curve_svg({curve_from_records(name, records)}, name + " on " +
                                   (cfg.map_file.empty() ? cfg.env : cfg.map_file)));

    const std::size_t last = cfg.episodes;
    const std::size_t first = last > cfg.summary_window ? last - cfg.summary_window + 1 : 1;
    const auto per_run = per_run_window_means(records, first, last);
    std::printf("%s: mean return over episodes [%zu, %zu] = %.6g (stderr %.3g, %zu runs)\n", name.c_str(), first,
                last, mean(per_run), per_run.size() > 1 ? standard_error(per_run) : 0.0, per_run.size());
    std::cout << "wrote " << csv.string() << " and " << svg.string() << '\n';
    return ok;
}

int cmd_compare(const Globals& g, const std::string& path_a, const std::string& path_b, const std::string& window) {
    if (g.seed) std::cout << "seed " << *g.seed << '\n';
    const auto a = read_csv(path_a);
    const auto b = read_csv(path_b);
    const auto [first, last] = parse_window(window);
    for (const auto* records : {&a, &b}) {
        if (records->empty() || first < min_episode(*records) || last > max_episode(*records)) {
            throw ConfigError("window " + window + " is outside the recorded episode range");
        }
    }
    const auto xa = window_returns(a, first, last);
    const auto xb = window_returns(b, first, last);
    const auto rank = wilcoxon_rank_sum(xa, xb);
    std::printf("window [%zu, %zu]\n", first, last);
    std::printf("A: %s  n=%zu  mean=%.6g\n", path_a.c_str(), xa.size(), mean(xa));
    std::printf("B: %s  n=%zu  mean=%.6g\n", path_b.c_str(), xb.size(), mean(xb));
    std::printf("wilcoxon rank-sum: U=%.6g p=%.6g%s\n", rank.u, rank.p_value, rank.exact ? " (exact)" : "");
    if (xa.size() >= 2 && xb.size() >= 2) {
        const auto t = welch_t_test(xa, xb);
        std::printf("welch t-test: t=%.6g df=%.6g p=%.6g\n", t.t, t.df, t.p_value);
    } else {
        std::printf("welch t-test: needs at least two samples per side\n");
    }
    return ok;
}

int cmd_gradcheck(const Globals& g, std::size_t trials, bool flip_sign) {
    GradcheckOptions options;
    options.seed = g.seed.value_or(1);
    options.trials = trials;
    options.flip_sign = flip_sign;
    std::cout << "seed " << options.seed << '\n';
    const auto report = run_gradcheck(options);
    const auto verdict = [](bool pass) { return pass ? "ok" : "FAIL"; };
    std::printf("finite differences: worst relative error %.3e (< %.0e) %s\n", report.worst_finite_diff,
                kFiniteDiffTolerance, verdict(report.finite_diff_ok()));
    std::printf("directive advice:   worst |grad| %.3e (<= %.0e) %s\n", report.worst_directive,
                kDirectiveTolerance, verdict(report.directive_ok()));
    std::printf("uniform advice:     worst |diff| %.3e (<= %.0e) %s\n", report.worst_uniform, kUniformTolerance,
                verdict(report.uniform_ok()));
    return report.passed() ? ok : runtime_error;
}

GridWorld load_any_map(const std::string& spec) {
    if (spec == "grid1" || spec == "grid2" || spec == "five_rooms") return builtin_map(spec);
    return load_map_file(spec);
}

int cmd_oracle(const Globals& g, const std::string& map) {
    if (g.seed) std::cout << "seed " << *g.seed << '\n';
    const GridWorld world = load_any_map(map);
    const auto length = bfs_shortest_path(world);
    std::printf("map %s: %d x %d (height x width)\n", world.name.empty() ? map.c_str() : world.name.c_str(),
                world.height, world.width);
    if (!length) {
        std::printf("goal unreachable from start\n");
        return infeasible;
    }
    std::printf("shortest path: %d\n", *length);
    std::printf("optimal return: %.6g\n", optimal_return(world, *length));
    const RoomLayout rooms = compute_rooms(world);
    std::printf("rooms: %d (goal room %d)\n", rooms.room_count, rooms.goal_room);
    for (std::size_t d = 0; d < world.doors.size(); ++d) {
        std::printf("door %zu at (%d, %d) joins rooms %d and %d%s\n", d, world.doors[d].row, world.doors[d].col,
                    rooms.door_rooms[d][0], rooms.door_rooms[d][1],
                    world.wrong_door == d ? " [wrong-advice door]" : "");
    }
    return ok;
}

int cmd_plot(const Globals& g, const std::vector<std::string>& inputs, const std::string& out, std::size_t smooth) {
    if (g.seed) std::cout << "seed " << *g.seed << '\n';
    if (smooth == 0) throw ConfigError("--smooth must be at least 1");
    std::vector<Curve> curves;
    std::optional<std::pair<std::size_t, std::size_t>> range;
    for (const auto& path : inputs) {
        const auto records = read_csv(path);
        if (records.empty()) throw ConfigError(path + " has no records");
        const std::pair<std::size_t, std::size_t> r{min_episode(records), max_episode(records)};
        if (range && *range != r) throw ConfigError("episode ranges differ between input files");
        range = r;
        curves.push_back(curve_from_records(fs::path(path).stem().string(), records, smooth));
    }
    ensure_writable(out, g.force);
    write_text(out, emit_curve_svg(curves, "mean return per episode"));
    std::cout << "wrote " << out << '\n';
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Directed policy gradient experiments"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    std::uint64_t seed = 0;
    auto* seed_opt = app.add_option("--seed", seed, "Base seed override")->capture_default_str();
    app.add_option("--jobs", g.jobs, "Parallel runs")->check(CLI::PositiveNumber);
    app.add_flag("--force", g.force, "Overwrite existing outputs");

    std::string config, out_dir = "out";
    std::vector<std::string> overrides;
    auto* train = app.add_subcommand("train", "Run an experiment and write records.csv and curve.svg");
    train->add_option("--config", config, "Config file")->required()->check(CLI::ExistingFile);
    train->add_option("--out", out_dir, "Output directory");
    train->add_option("--set", overrides, "key=value override (repeatable)");

    std::string csv_a, csv_b, window;
    auto* compare = app.add_subcommand("compare", "Compare returns of two record files over an episode window");
    compare->add_option("a", csv_a, "First CSV")->required();
    compare->add_option("b", csv_b, "Second CSV")->required();
    compare->add_option("--window", window, "Episode window A:B (inclusive)")->required();

    std::size_t trials = 100;
    bool flip_sign = false;
    auto* gradcheck = app.add_subcommand("gradcheck", "Verify the policy gradient");
    gradcheck->add_option("--trials", trials, "Random draws per suite")->check(CLI::PositiveNumber);
    gradcheck->add_flag("--inject-sign-flip", flip_sign, "Negate the analytic gradient (negative control)");

    std::string map;
    auto* oracle = app.add_subcommand("oracle", "Shortest path and optimal return of a map");
    oracle->add_option("map", map, "Map file or built-in name (grid1, grid2, five_rooms)")->required();

    std::vector<std::string> inputs;
    std::string svg_out = "curves.svg";
    std::size_t smooth = 1;
    auto* plot = app.add_subcommand("plot", "Plot mean and stderr curves from record files");
    plot->add_option("csv", inputs, "Record files")->required();
    plot->add_option("--out", svg_out, "Output SVG");
    plot->add_option("--smooth", smooth, "Moving-average window");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : config_error;
    }
    if (seed_opt->count() > 0) g.seed = seed;

    try {
        if (*train) return cmd_train(g, config, out_dir, overrides);
        if (*compare) return cmd_compare(g, csv_a, csv_b, window);
        if (*gradcheck) return cmd_gradcheck(g, trials, flip_sign);
        if (*oracle) return cmd_oracle(g, map);
        if (*plot) return cmd_plot(g, inputs, svg_out, smooth);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return config_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return runtime_error;
    }
    return ok;
}
