#include "dpg/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "dpg/advisors.hpp"
#include "dpg/error.hpp"
#include "dpg/stats.hpp"

namespace dpg {

namespace {

constexpr std::array<std::pair<ExperimentKind, std::string_view>, 10> kKindNames{{
    {ExperimentKind::actor_advisor, "actor_advisor"},
    {ExperimentKind::dqn_only, "dqn_only"},
    {ExperimentKind::vanilla_pg, "vanilla_pg"},
    {ExperimentKind::dpg_advice, "dpg_advice"},
    {ExperimentKind::override_advice, "override_advice"},
    {ExperimentKind::reward_shaping, "reward_shaping"},
    {ExperimentKind::transfer_fresh, "transfer_fresh"},
    {ExperimentKind::transfer_seeded, "transfer_seeded"},
    {ExperimentKind::transfer_advised, "transfer_advised"},
    {ExperimentKind::human_advice, "human_advice"},
}};

constexpr std::array<std::pair<AdvisorKind, std::string_view>, 6> kAdvisorNames{{
    {AdvisorKind::none, "none"},
    {AdvisorKind::table_backup, "table_backup"},
    {AdvisorKind::table_heuristic, "table_heuristic"},
    {AdvisorKind::table_combined, "table_combined"},
    {AdvisorKind::human, "human"},
    {AdvisorKind::transfer, "transfer"},
}};

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

double parse_double(std::string_view key, std::string_view text) {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value)) {
        throw ConfigError("bad number for " + std::string(key) + ": '" + std::string(text) + "'");
    }
    return value;
}

std::uint64_t parse_unsigned(std::string_view key, std::string_view text) {
    std::uint64_t value = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
        throw ConfigError("bad integer for " + std::string(key) + ": '" + std::string(text) + "'");
    }
    return value;
}

bool parse_bool(std::string_view key, std::string_view text) {
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    throw ConfigError("bad boolean for " + std::string(key) + ": '" + std::string(text) + "'");
}

std::optional<std::size_t> parse_budget(std::string_view key, std::string_view text) {
    if (text.empty() || text == "none") return std::nullopt;
    return static_cast<std::size_t>(parse_unsigned(key, text));
}

bool is_table(const ExperimentConfig& cfg) { return cfg.map_file.empty() && cfg.env == "table"; }

bool uses_options(const ExperimentConfig& cfg) {
    return cfg.map_file.empty() ? cfg.env == "five_rooms" : cfg.options;
}

GridWorld load_world(std::string_view env_or_path) {
    if (env_or_path == "grid1" || env_or_path == "grid2" || env_or_path == "five_rooms") {
        return builtin_map(env_or_path);
    }
    return load_map_file(std::filesystem::path(env_or_path));
}

GridWorld config_world(const ExperimentConfig& cfg) {
    return cfg.map_file.empty() ? load_world(cfg.env) : load_map_file(cfg.map_file);
}

struct EnvBundle {
    std::unique_ptr<Environment> env;
    std::optional<GridWorld> world;
    bool options = false;
};

EnvBundle make_environment(const ExperimentConfig& cfg) {
    EnvBundle b;
    if (is_table(cfg)) {
        b.env = std::make_unique<TableEnv>();
        return b;
    }
    b.world = config_world(cfg);
    b.options = uses_options(cfg);
    if (b.options) {
        b.env = std::make_unique<OptionGridEnv>(*b.world);
    } else {
        b.env = std::make_unique<GridEnv>(*b.world);
    }
    return b;
}

// Optimal action (or option) per cell for the simulated teachers.
std::vector<std::optional<std::size_t>> teacher_oracle(const EnvBundle& b) {
    if (b.options) return optimal_option_policy(*b.world, OptionSet(*b.world));
    return optimal_grid_policy(*b.world).action;
}

ActorConfig actor_config(const ExperimentConfig& cfg) {
    return ActorConfig{cfg.hidden, cfg.learning_rate, cfg.update_period};
}

DqnConfig dqn_config(const ExperimentConfig& cfg) {
    DqnConfig d;
    d.hidden = cfg.hidden;
    d.gamma = cfg.gamma;
    d.learning_rate = cfg.critic_learning_rate;
    d.train_period = cfg.train_period;
    d.batch_size = cfg.batch_size;
    d.target_sync = cfg.target_sync;
    d.buffer_capacity = cfg.buffer_capacity;
    return d;
}

std::unique_ptr<Advisor> make_advisor(const ExperimentConfig& cfg, const EnvBundle& b, const Mlp* source) {
    switch (cfg.advisor) {
        case AdvisorKind::none:
            return nullptr;
        case AdvisorKind::table_backup:
            return std::make_unique<TableAdvisor>(TableAdvisor::Mode::backup);
        case AdvisorKind::table_heuristic:
            return std::make_unique<TableAdvisor>(TableAdvisor::Mode::heuristic);
        case AdvisorKind::table_combined:
            return std::make_unique<TableAdvisor>(TableAdvisor::Mode::combined);
        case AdvisorKind::human: {
            SimulatedHumanConfig h;
            h.availability = cfg.human_availability;
            h.p_right = cfg.human_p_right;
            h.budget = cfg.human_budget;
            h.wrong_action = b.world->wrong_door.value_or(0);
            return std::make_unique<SimulatedHumanAdvisor>(*b.world, teacher_oracle(b), b.env->action_count(), h);
        }
        case AdvisorKind::transfer:
            return std::make_unique<TransferAdvisor>(*source);
    }
    return nullptr;
}

// Advisor implied by the experiment kind when the config leaves it unset.
AdvisorKind effective_advisor(const ExperimentConfig& cfg) {
    if (cfg.kind == ExperimentKind::human_advice && cfg.advisor == AdvisorKind::none) return AdvisorKind::human;
    if (cfg.kind == ExperimentKind::transfer_advised && cfg.advisor == AdvisorKind::none) return AdvisorKind::transfer;
    return cfg.advisor;
}

bool needs_source(ExperimentKind kind) {
    return kind == ExperimentKind::transfer_seeded || kind == ExperimentKind::transfer_advised;
}

std::vector<EpisodeRecord> run_single(const ExperimentConfig& cfg, std::size_t run, const Mlp* source) {
    Rng root(cfg.seed + run);
    Rng init_rng = root.split();
    Rng env_rng = root.split();
    Rng policy_rng = root.split();
    Rng advice_rng = root.split();
    Rng critic_rng = root.split();

    EnvBundle bundle = make_environment(cfg);
    Environment& env = *bundle.env;
    const std::size_t obs_dim = env.observation_dim();
    const std::size_t actions = env.action_count();
    const ExperimentKind kind = cfg.kind;

    std::optional<DpgActor> actor;
    if (kind == ExperimentKind::transfer_seeded) {
        actor.emplace(*source, actor_config(cfg));
    } else if (kind != ExperimentKind::dqn_only) {
        actor.emplace(obs_dim, actions, init_rng, actor_config(cfg));
    }

    std::optional<DoubleDqn> dqn;
    std::optional<ReplayBuffer> buffer;
    if (kind == ExperimentKind::actor_advisor || kind == ExperimentKind::dqn_only) {
        dqn.emplace(obs_dim, actions, init_rng, dqn_config(cfg));
        buffer.emplace(cfg.buffer_capacity);
    }

    ExperimentConfig advisor_cfg = cfg;
    advisor_cfg.advisor = effective_advisor(cfg);
    std::unique_ptr<Advisor> advisor = make_advisor(advisor_cfg, bundle, source);

    std::optional<RewardShapingTeacher> teacher;
    std::vector<std::optional<std::size_t>> oracle;
    if (kind == ExperimentKind::reward_shaping) {
        teacher.emplace(cfg.teacher_availability, cfg.teacher_penalty, cfg.teacher_budget);
        oracle = teacher_oracle(bundle);
    }

    std::vector<EpisodeRecord> records;
    records.reserve(cfg.episodes);
    std::uint64_t global_step = 0;

    for (std::size_t episode = 1; episode <= cfg.episodes; ++episode) {
        EpisodeRecord rec;
        rec.run = run;
        rec.episode = episode;

        if (kind == ExperimentKind::actor_advisor) {
            ActorAdvisorState state;
            state.observation = env.reset();
            state.global_step = global_step;
            state.temperature = cfg.temperature;
            for (;;) {
                const auto step = actor_advisor_step(*actor, *dqn, *buffer, env, state, policy_rng);
                rec.episode_return += step.result.reward;
                rec.steps += static_cast<std::size_t>(step.result.primitive_steps);
                ++rec.decisions;
                if (step.result.done) {
                    rec.terminal = step.result.cause;
                    break;
                }
            }
            global_step = state.global_step;
            actor->finish_episode(std::move(state.trajectory), cfg.gamma);
            records.push_back(rec);
            continue;
        }

        std::vector<double> obs = env.reset();
        Trajectory trajectory;
        for (;;) {
            std::size_t action = 0;
            std::optional<TrajectoryStep> step;
            if (kind == ExperimentKind::dqn_only) {
                action = sample(softmax(dqn->q_values(obs), cfg.temperature), policy_rng);
            } else {
                const AdviceVector advice = advisor ? advisor->advise(obs, advice_rng) : neutral_advice(actions);
                auto chosen = kind == ExperimentKind::override_advice ? actor->act_override(obs, advice, policy_rng)
                                                                      : actor->act(obs, advice, policy_rng);
                action = chosen.action;
                step = std::move(chosen.step);
            }

            const std::size_t cell = bundle.world ? bundle.world->index(cell_from_observation(*bundle.world, obs)) : 0;
            StepResult result = env.step(action, env_rng);
            ++global_step;
            rec.episode_return += result.reward;
            rec.steps += static_cast<std::size_t>(result.primitive_steps);
            ++rec.decisions;

            double learning_reward = result.reward;
            if (teacher && oracle[cell]) {
                if (const auto shaped = teacher->judge(action, *oracle[cell], advice_rng)) learning_reward += *shaped;
            }

            if (dqn) {
                Experience e{SparseState::from_dense(obs), action, learning_reward,
                             SparseState::from_dense(result.observation), ends_value(result)};
                dqn->observe(*buffer, std::move(e), global_step, critic_rng);
            }
            if (step) {
                step->reward = learning_reward;
                trajectory.steps.push_back(std::move(*step));
            }
            if (result.done) {
                rec.terminal = result.cause;
                break;
            }
            obs = std::move(result.observation);
        }
        if (actor) actor->finish_episode(std::move(trajectory), cfg.gamma);
        if (advisor) rec.interventions = advisor->interventions();
        if (teacher) rec.interventions = teacher->interventions();
        records.push_back(rec);
    }
    return records;
}

std::string format_g6(double v) {
    char buf[32];
    const int n = std::snprintf(buf, sizeof buf, "%.6g", v);
    return std::string(buf, static_cast<std::size_t>(n));
}

std::string xml_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

std::string_view to_string(ExperimentKind kind) {
    for (const auto& [k, name] : kKindNames) {
        if (k == kind) return name;
    }
    return "unknown";
}

ExperimentKind parse_experiment_kind(std::string_view text) {
    for (const auto& [k, name] : kKindNames) {
        if (name == text) return k;
    }
    throw ConfigError("unknown experiment kind '" + std::string(text) + "'");
}

std::string_view to_string(AdvisorKind kind) {
    for (const auto& [k, name] : kAdvisorNames) {
        if (k == kind) return name;
    }
    return "unknown";
}

AdvisorKind parse_advisor_kind(std::string_view text) {
    for (const auto& [k, name] : kAdvisorNames) {
        if (name == text) return k;
    }
    throw ConfigError("unknown advisor '" + std::string(text) + "'");
}

void ExperimentConfig::set(std::string_view key, std::string_view raw) {
    const std::string_view value = trim(raw);
    const auto size = [&] { return static_cast<std::size_t>(parse_unsigned(key, value)); };
    const auto real = [&] { return parse_double(key, value); };

    if (key == "kind") kind = parse_experiment_kind(value);
    else if (key == "env") env = std::string(value);
    else if (key == "map_file") map_file = std::string(value);
    else if (key == "options") options = parse_bool(key, value);
    else if (key == "advisor") advisor = parse_advisor_kind(value);
    else if (key == "runs") runs = size();
    else if (key == "episodes") episodes = size();
    else if (key == "gamma") gamma = real();
    else if (key == "seed") seed = parse_unsigned(key, value);
    else if (key == "hidden") hidden = size();
    else if (key == "learning_rate") learning_rate = real();
    else if (key == "update_period") update_period = size();
    else if (key == "critic_learning_rate") critic_learning_rate = real();
    else if (key == "batch_size") batch_size = size();
    else if (key == "buffer_capacity") buffer_capacity = size();
    else if (key == "train_period") train_period = size();
    else if (key == "target_sync") target_sync = size();
    else if (key == "temperature") temperature = real();
    else if (key == "human_availability") human_availability = real();
    else if (key == "human_p_right") human_p_right = real();
    else if (key == "human_budget") human_budget = parse_budget(key, value);
    else if (key == "teacher_availability") teacher_availability = real();
    else if (key == "teacher_penalty") teacher_penalty = real();
    else if (key == "teacher_budget") teacher_budget = parse_budget(key, value);
    else if (key == "source_snapshot") source_snapshot = std::string(value);
    else if (key == "source_env") source_env = std::string(value);
    else if (key == "source_max_episodes") source_max_episodes = size();
    else if (key == "source_entropy") source_entropy = real();
    else if (key == "source_window") source_window = size();
    else if (key == "source_learning_rate") source_learning_rate = real();
    else if (key == "source_update_period") source_update_period = size();
    else if (key == "source_attempts") source_attempts = size();
    else if (key == "summary_window") summary_window = size();
    else throw ConfigError("unknown config key '" + std::string(key) + "'");
}

void ExperimentConfig::validate() const {
    const auto fail = [](const std::string& msg) { throw ConfigError(msg); };
    if (runs == 0) fail("runs must be at least 1");
    if (episodes == 0) fail("episodes must be at least 1");
    if (!(gamma > 0.0 && gamma <= 1.0)) fail("gamma must lie in (0, 1]");
    if (hidden == 0) fail("hidden must be at least 1");
    if (!(learning_rate > 0.0) || !(critic_learning_rate > 0.0)) fail("learning rates must be positive");
    if (update_period == 0 || train_period == 0 || target_sync == 0 || batch_size == 0) {
        fail("periods and batch size must be at least 1");
    }
    if (buffer_capacity < batch_size) fail("buffer_capacity must hold at least one batch");
    if (!(temperature > 0.0)) fail("temperature must be positive");
    for (double p : {human_availability, human_p_right, teacher_availability}) {
        if (!(p >= 0.0 && p <= 1.0)) fail("probabilities must lie in [0, 1]");
    }
    if (summary_window == 0) fail("summary_window must be at least 1");
    if (source_window == 0 || source_update_period == 0 || source_attempts == 0 || !(source_learning_rate > 0.0)) {
        fail("source training settings must be positive");
    }

    const bool table = is_table(*this);
    if (map_file.empty() && env != "table" && env != "grid1" && env != "grid2" && env != "five_rooms") {
        fail("unknown env '" + env + "'");
    }
    if (table && options) fail("options are only defined for grid worlds");

    const AdvisorKind adv = effective_advisor(*this);
    const bool table_advisor = adv == AdvisorKind::table_backup || adv == AdvisorKind::table_heuristic ||
                               adv == AdvisorKind::table_combined;
    if (table_advisor && !table) fail("table advisors need env = table");
    if ((adv == AdvisorKind::human || adv == AdvisorKind::transfer) && table) {
        fail("advisor '" + std::string(to_string(adv)) + "' needs a grid world");
    }

    switch (kind) {
        case ExperimentKind::actor_advisor:
        case ExperimentKind::dqn_only:
        case ExperimentKind::vanilla_pg:
        case ExperimentKind::transfer_fresh:
        case ExperimentKind::transfer_seeded:
            if (adv != AdvisorKind::none) fail(std::string(to_string(kind)) + " takes no advisor");
            break;
        case ExperimentKind::dpg_advice:
        case ExperimentKind::override_advice:
            if (adv == AdvisorKind::none) fail(std::string(to_string(kind)) + " needs an advisor");
            break;
        case ExperimentKind::reward_shaping:
            if (adv != AdvisorKind::none) fail("reward_shaping takes no advisor");
            if (table) fail("reward_shaping needs a grid world");
            break;
        case ExperimentKind::transfer_advised:
            if (adv != AdvisorKind::transfer) fail("transfer_advised uses the transfer advisor");
            break;
        case ExperimentKind::human_advice:
            if (adv != AdvisorKind::human) fail("human_advice uses the human advisor");
            break;
    }
    if (adv == AdvisorKind::transfer && !needs_source(kind) && kind != ExperimentKind::dpg_advice &&
        kind != ExperimentKind::override_advice) {
        fail("transfer advisor used outside a transfer experiment");
    }
    if (adv == AdvisorKind::human && human_p_right < 1.0) {
        const GridWorld world = config_world(*this);
        if (!world.wrong_door) fail("wrong advice needs a map with wrong_door metadata");
        if (!uses_options(*this)) fail("wrong advice is defined at the option level only");
    }
}

ExperimentConfig parse_config(std::string_view text) {
    ExperimentConfig cfg;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        }
        cfg.set(trim(line.substr(0, eq)), line.substr(eq + 1));
    }
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

namespace {

SourcePolicy train_source_once(const ExperimentConfig& cfg, Rng& root) {
    Rng init_rng = root.split();
    Rng env_rng = root.split();
    Rng policy_rng = root.split();

    GridEnv env(load_world(cfg.source_env));
    const GridWorld& world = env.world();
    DpgActor actor(env.observation_dim(), env.action_count(), init_rng,
                   ActorConfig{cfg.hidden, cfg.source_learning_rate, cfg.source_update_period});
    const auto neutral = neutral_advice(env.action_count());

    std::vector<std::vector<std::size_t>> visited;  // distinct cells per recent episode
    SourcePolicy out{actor.net(), 1, 0, std::numeric_limits<double>::infinity(), false};
    for (std::size_t episode = 1; episode <= cfg.source_max_episodes; ++episode) {
        std::vector<double> obs = env.reset();
        Trajectory trajectory;
        std::vector<std::size_t> cells;
        for (;;) {
            cells.push_back(world.index(cell_from_observation(world, obs)));
            auto chosen = actor.act(obs, neutral, policy_rng);
            StepResult result = env.step(chosen.action, env_rng);
            chosen.step.reward = result.reward;
            trajectory.steps.push_back(std::move(chosen.step));
            if (result.done) break;
            obs = std::move(result.observation);
        }
        actor.finish_episode(std::move(trajectory), cfg.gamma);
        std::sort(cells.begin(), cells.end());
        cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
        visited.push_back(std::move(cells));
        if (visited.size() > cfg.source_window) visited.erase(visited.begin());

        out.episodes = episode;
        if (visited.size() == cfg.source_window && episode % cfg.source_update_period == 0) {
            std::set<std::size_t> distinct;
            for (const auto& ep : visited) distinct.insert(ep.begin(), ep.end());
            std::vector<std::vector<double>> states;
            for (std::size_t c : distinct) states.push_back(one_hot_observation(world, world.cell_at(c)));
            out.entropy = policy_entropy(actor.net(), states);
            if (out.entropy < cfg.source_entropy) {
                out.converged = true;
                break;
            }
        }
    }
    out.net = actor.net();
    return out;
}

}  // namespace

SourcePolicy train_transfer_source(const ExperimentConfig& cfg) {
    if (!cfg.source_snapshot.empty()) {
        return SourcePolicy{load_snapshot(std::filesystem::path(cfg.source_snapshot)), 0, 0, 0.0, true};
    }
    Rng root(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    SourcePolicy best{Mlp(1, 1, 1, OutputHead::sigmoid), 0, 0, std::numeric_limits<double>::infinity(), false};
    for (std::size_t attempt = 1; attempt <= cfg.source_attempts; ++attempt) {
        SourcePolicy s = train_source_once(cfg, root);
        s.attempts = attempt;
        const bool better = s.entropy < best.entropy;
        if (better) best = std::move(s);
        if (best.converged) break;
        best.attempts = attempt;
    }
    return best;
}

std::vector<EpisodeRecord> run_experiment(const ExperimentConfig& cfg, const RunnerOptions& options) {
    cfg.validate();
    std::optional<Mlp> source;
    if (needs_source(cfg.kind) || effective_advisor(cfg) == AdvisorKind::transfer) {
        source = train_transfer_source(cfg).net;
        EnvBundle probe = make_environment(cfg);
        if (source->input_dim() != probe.env->observation_dim() ||
            source->output_dim() != probe.env->action_count()) {
            throw ConfigError("source policy does not match the target environment");
        }
    }
    const Mlp* source_ptr = source ? &*source : nullptr;

    std::vector<std::vector<EpisodeRecord>> per_run(cfg.runs);
    const std::size_t jobs = std::clamp<std::size_t>(options.jobs, 1, cfg.runs);
    if (jobs == 1) {
        for (std::size_t r = 0; r < cfg.runs; ++r) {
            per_run[r] = run_single(cfg, r, source_ptr);
            if (options.on_run_done) options.on_run_done(r);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::mutex mutex;
        std::exception_ptr error;
        std::vector<std::thread> workers;
        for (std::size_t j = 0; j < jobs; ++j) {
            workers.emplace_back([&] {
                for (std::size_t r = next++; r < cfg.runs; r = next++) {
                    try {
                        per_run[r] = run_single(cfg, r, source_ptr);
                        if (options.on_run_done) {
                            std::lock_guard lock(mutex);
                            options.on_run_done(r);
                        }
                    } catch (...) {
                        std::lock_guard lock(mutex);
                        if (!error) error = std::current_exception();
                    }
                }
            });
        }
        for (auto& w : workers) w.join();
        if (error) std::rethrow_exception(error);
    }

    std::vector<EpisodeRecord> records;
    records.reserve(cfg.runs * cfg.episodes);
    for (auto& run : per_run) records.insert(records.end(), run.begin(), run.end());
    return records;
}

std::string records_to_csv(const std::vector<EpisodeRecord>& records) {
    std::string out = "run,episode,return,steps,decisions,interventions,terminal\n";
    for (const auto& r : records) {
        out += std::to_string(r.run);
        out += ',';
        out += std::to_string(r.episode);
        out += ',';
        out += format_g6(r.episode_return);
        out += ',';
        out += std::to_string(r.steps);
        out += ',';
        out += std::to_string(r.decisions);
        out += ',';
        out += std::to_string(r.interventions);
        out += ',';
        out += to_string(r.terminal);
        out += '\n';
    }
    return out;
}

std::vector<EpisodeRecord> parse_csv(std::string_view text) {
    constexpr std::string_view header = "run,episode,return,steps,decisions,interventions,terminal";
    std::vector<EpisodeRecord> records;
    std::size_t line_no = 0;
    bool seen_header = false;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        if (!seen_header) {
            if (line != header) throw ConfigError("CSV header mismatch");
            seen_header = true;
            continue;
        }
        std::array<std::string_view, 7> fields;
        std::size_t n = 0;
        for (;;) {
            const auto comma = line.find(',');
            if (n == fields.size()) throw ConfigError("CSV line " + std::to_string(line_no) + ": too many fields");
            fields[n++] = line.substr(0, comma);
            if (comma == std::string_view::npos) break;
            line = line.substr(comma + 1);
        }
        if (n != fields.size()) throw ConfigError("CSV line " + std::to_string(line_no) + ": expected 7 fields");
        EpisodeRecord r;
        r.run = static_cast<std::size_t>(parse_unsigned("run", fields[0]));
        r.episode = static_cast<std::size_t>(parse_unsigned("episode", fields[1]));
        r.episode_return = parse_double("return", fields[2]);
        r.steps = static_cast<std::size_t>(parse_unsigned("steps", fields[3]));
        r.decisions = static_cast<std::size_t>(parse_unsigned("decisions", fields[4]));
        r.interventions = static_cast<std::size_t>(parse_unsigned("interventions", fields[5]));
        r.terminal = parse_terminal_cause(fields[6]);
        records.push_back(r);
    }
    if (!seen_header) throw ConfigError("CSV is empty");
    return records;
}

void write_csv(const std::vector<EpisodeRecord>& records, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << records_to_csv(records);
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::vector<EpisodeRecord> read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_csv(ss.str());
}

std::vector<double> run_returns(const std::vector<EpisodeRecord>& records, std::size_t run) {
    std::vector<std::pair<std::size_t, double>> rows;
    for (const auto& r : records) {
        if (r.run == run) rows.emplace_back(r.episode, r.episode_return);
    }
    std::sort(rows.begin(), rows.end());
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& [episode, ret] : rows) out.push_back(ret);
    return out;
}

std::size_t run_count(const std::vector<EpisodeRecord>& records) {
    std::set<std::size_t> runs;
    for (const auto& r : records) runs.insert(r.run);
    return runs.size();
}

std::vector<double> window_returns(const std::vector<EpisodeRecord>& records, std::size_t first, std::size_t last) {
    std::vector<double> out;
    for (const auto& r : records) {
        if (r.episode >= first && r.episode <= last) out.push_back(r.episode_return);
    }
    return out;
}

std::vector<double> per_run_window_means(const std::vector<EpisodeRecord>& records, std::size_t first,
                                         std::size_t last) {
    std::set<std::size_t> runs;
    for (const auto& r : records) runs.insert(r.run);
    std::vector<double> out;
    for (std::size_t run : runs) {
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& r : records) {
            if (r.run == run && r.episode >= first && r.episode <= last) {
                sum += r.episode_return;
                ++n;
            }
        }
        if (n > 0) out.push_back(sum / static_cast<double>(n));
    }
    return out;
}

Curve curve_from_records(const std::string& name, const std::vector<EpisodeRecord>& records,
                         std::size_t smooth_window) {
    std::set<std::size_t> runs;
    for (const auto& r : records) runs.insert(r.run);
    if (runs.empty()) throw ConfigError("no records for curve '" + name + "'");

    std::vector<std::vector<double>> series;
    for (std::size_t run : runs) series.push_back(moving_average(run_returns(records, run), smooth_window));
    const std::size_t length = series.front().size();
    for (const auto& s : series) {
        if (s.size() != length) throw ConfigError("runs of '" + name + "' have different episode counts");
    }

    Curve c{name, std::vector<double>(length), std::vector<double>(length)};
    std::vector<double> column(series.size());
    for (std::size_t e = 0; e < length; ++e) {
        for (std::size_t r = 0; r < series.size(); ++r) column[r] = series[r][e];
        c.mean[e] = mean(column);
        c.stderr_band[e] = column.size() > 1 ? standard_error(column) : 0.0;
    }
    return c;
}

std::string emit_curve_svg(const std::vector<Curve>& curves, const std::string& title) {
    if (curves.empty()) throw ContractError("no curves to plot");
    const std::size_t length = curves.front().mean.size();
    if (length == 0) throw ContractError("curves are empty");
    for (const auto& c : curves) {
        require(c.mean.size() == length && c.stderr_band.size() == length, "curves must have equal length");
    }

    constexpr double width = 1000.0, height = 600.0;
    constexpr double left = 80.0, right = 220.0, top = 50.0, bottom = 60.0;
    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;

    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& c : curves) {
        for (std::size_t i = 0; i < length; ++i) {
            lo = std::min(lo, c.mean[i] - c.stderr_band[i]);
            hi = std::max(hi, c.mean[i] + c.stderr_band[i]);
        }
    }
    if (!std::isfinite(lo) || !std::isfinite(hi)) throw ContractError("curves contain non-finite values");
    if (hi - lo < 1e-9) {
        lo -= 1.0;
        hi += 1.0;
    }
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;

    const auto x_of = [&](std::size_t i) {
        return length == 1 ? left + plot_w / 2 : left + plot_w * static_cast<double>(i) / static_cast<double>(length - 1);
    };
    const auto y_of = [&](double v) { return top + plot_h * (hi - v) / (hi - lo); };
    const auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", v);
        return std::string(buf);
    };

    static constexpr std::array<std::string_view, 8> palette{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                             "#9467bd", "#8c564b", "#e377c2", "#17becf"};

    std::ostringstream svg;
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 1000 600\" width=\"1000\" height=\"600\">\n"
        << "<rect x=\"0\" y=\"0\" width=\"1000\" height=\"600\" fill=\"white\"/>\n"
        << "<text x=\"" << num(left + plot_w / 2) << "\" y=\"30\" text-anchor=\"middle\" font-size=\"18\">"
        << xml_escape(title) << "</text>\n";

    // axes and ticks
    svg << "<g stroke=\"black\" stroke-width=\"1\">\n"
        << "<line x1=\"" << num(left) << "\" y1=\"" << num(top + plot_h) << "\" x2=\"" << num(left + plot_w)
        << "\" y2=\"" << num(top + plot_h) << "\"/>\n"
        << "<line x1=\"" << num(left) << "\" y1=\"" << num(top) << "\" x2=\"" << num(left) << "\" y2=\""
        << num(top + plot_h) << "\"/>\n"
        << "</g>\n<g font-size=\"12\">\n";
    constexpr int ticks = 5;
    for (int t = 0; t <= ticks; ++t) {
        const double frac = static_cast<double>(t) / ticks;
        const double yv = lo + frac * (hi - lo);
        const double y = y_of(yv);
        svg << "<line x1=\"" << num(left - 5) << "\" y1=\"" << num(y) << "\" x2=\"" << num(left) << "\" y2=\""
            << num(y) << "\" stroke=\"black\"/>\n"
            << "<text x=\"" << num(left - 8) << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\">"
            << format_g6(std::round(yv * 100.0) / 100.0) << "</text>\n";
        const double episode = 1.0 + frac * static_cast<double>(length - 1);
        const double x = left + frac * plot_w;
        svg << "<line x1=\"" << num(x) << "\" y1=\"" << num(top + plot_h) << "\" x2=\"" << num(x) << "\" y2=\""
            << num(top + plot_h + 5) << "\" stroke=\"black\"/>\n"
            << "<text x=\"" << num(x) << "\" y=\"" << num(top + plot_h + 20) << "\" text-anchor=\"middle\">"
            << static_cast<long long>(std::llround(episode)) << "</text>\n";
    }
    svg << "<text x=\"" << num(left + plot_w / 2) << "\" y=\"" << num(height - 15)
        << "\" text-anchor=\"middle\">episode</text>\n"
        << "<text x=\"20\" y=\"" << num(top + plot_h / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 20 "
        << num(top + plot_h / 2) << ")\">return</text>\n</g>\n";

    for (std::size_t k = 0; k < curves.size(); ++k) {
        const auto& c = curves[k];
        const std::string_view color = palette[k % palette.size()];
        svg << "<polygon fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
        for (std::size_t i = 0; i < length; ++i) svg << num(x_of(i)) << ',' << num(y_of(c.mean[i] + c.stderr_band[i])) << ' ';
        for (std::size_t i = length; i-- > 0;) svg << num(x_of(i)) << ',' << num(y_of(c.mean[i] - c.stderr_band[i])) << ' ';
        svg << "\"/>\n";
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < length; ++i) svg << (i ? " " : "") << num(x_of(i)) << ',' << num(y_of(c.mean[i]));
        svg << "\"/>\n";
    }

    svg << "<g font-size=\"13\">\n";
    for (std::size_t k = 0; k < curves.size(); ++k) {
        const double y = top + 20.0 + 22.0 * static_cast<double>(k);
        const double x = left + plot_w + 20.0;
        svg << "<line x1=\"" << num(x) << "\" y1=\"" << num(y) << "\" x2=\"" << num(x + 25) << "\" y2=\"" << num(y)
            << "\" stroke=\"" << palette[k % palette.size()] << "\" stroke-width=\"3\"/>\n"
            << "<text x=\"" << num(x + 32) << "\" y=\"" << num(y + 4) << "\">" << xml_escape(curves[k].name)
            << "</text>\n";
    }
    svg << "</g>\n</svg>\n";
    return svg.str();
}

}  // namespace dpg
