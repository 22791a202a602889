#include "dpg/environments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <deque>
#include <fstream>
#include <numbers>
#include <sstream>

#include "dpg/error.hpp"

namespace dpg {

std::string_view to_string(TerminalCause cause) {
    switch (cause) {
        case TerminalCause::none: return "none";
        case TerminalCause::goal: return "goal";
        case TerminalCause::fell: return "fell";
        case TerminalCause::timeout: return "timeout";
    }
    return "none";
}

TerminalCause parse_terminal_cause(std::string_view text) {
    if (text == "none") return TerminalCause::none;
    if (text == "goal") return TerminalCause::goal;
    if (text == "fell") return TerminalCause::fell;
    if (text == "timeout") return TerminalCause::timeout;
    throw ConfigError("unknown terminal cause '" + std::string(text) + "'");
}

// ---------------------------------------------------------------- Table

double wrap_angle(double theta) {
    constexpr double pi = std::numbers::pi;
    double t = std::fmod(theta, 2.0 * pi);
    if (t > pi) t -= 2.0 * pi;
    if (t <= -pi) t += 2.0 * pi;
    return t;
}

double angular_distance(double a, double b) { return std::abs(wrap_angle(a - b)); }

TableState table_reset() { return TableState{}; }

bool table_docked(const TableState& s) {
    return std::abs(s.x - table::kDockCenter) <= table::kDockHalfWidth &&
           std::abs(s.y - table::kDockCenter) <= table::kDockHalfWidth &&
           angular_distance(s.theta, table::kDockAngle) <= table::kDockAngleTolerance;
}

StepResult table_step(TableState& state, std::size_t action) {
    switch (action) {
        case table::forward:
            state.x += table::kForwardStep * std::cos(state.theta);
            state.y += table::kForwardStep * std::sin(state.theta);
            break;
        case table::left: state.theta = wrap_angle(state.theta + table::kTurnStep); break;
        case table::right: state.theta = wrap_angle(state.theta - table::kTurnStep); break;
        default: throw ContractError("invalid Table action " + std::to_string(action));
    }
    StepResult r;
    const auto obs = state.observation();
    r.observation.assign(obs.begin(), obs.end());
    if (state.x < 0.0 || state.x > 1.0 || state.y < 0.0 || state.y > 1.0) {
        r.reward = table::kFallReward;
        r.done = true;
        r.cause = TerminalCause::fell;
    } else if (table_docked(state)) {
        r.reward = table::kGoalReward;
        r.done = true;
        r.cause = TerminalCause::goal;
    }
    return r;
}

std::vector<double> TableEnv::reset() {
    state_ = table_reset();
    steps_ = 0;
    const auto obs = state_.observation();
    return {obs.begin(), obs.end()};
}

StepResult TableEnv::step(std::size_t action, Rng&) {
    auto r = table_step(state_, action);
    ++steps_;
    if (!r.done && steps_ >= table::kMaxSteps) {
        r.done = true;
        r.cause = TerminalCause::timeout;
    }
    return r;
}

// ---------------------------------------------------------------- Maps

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

template <typename T>
T parse_number(std::string_view text, std::string_view key) {
    T value{};
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end) {
        throw ConfigError("map metadata '" + std::string(key) + "' has bad value '" + std::string(text) + "'");
    }
    return value;
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

constexpr std::array<std::array<int, 2>, 4> kMoves = {{{-1, 0}, {1, 0}, {0, -1}, {0, 1}}};

}  // namespace

GridWorld load_map(std::string_view text) {
    GridWorld w;
    std::vector<std::string> rows;
    bool have_start = false, have_goal = false;
    bool in_metadata = false;

    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

        if (!line.empty() && line.front() == ';') {
            in_metadata = true;
            auto body = trim(line.substr(1));
            if (body.empty()) continue;
            const auto eq = body.find('=');
            if (eq == std::string_view::npos) throw ConfigError("map metadata line lacks '=': " + std::string(line));
            const auto key = trim(body.substr(0, eq));
            const auto value = trim(body.substr(eq + 1));
            if (key == "name") {
                w.name = std::string(value);
            } else if (key == "step_penalty") {
                w.step_penalty = parse_number<double>(value, key);
            } else if (key == "goal_bonus") {
                w.goal_bonus = parse_number<double>(value, key);
            } else if (key == "max_steps") {
                w.max_steps = parse_number<int>(value, key);
            } else if (key == "door") {
                const auto comma = value.find(',');
                if (comma == std::string_view::npos) throw ConfigError("door must be 'row,col'");
                w.doors.push_back({parse_number<int>(trim(value.substr(0, comma)), key),
                                   parse_number<int>(trim(value.substr(comma + 1)), key)});
            } else if (key == "wrong_door") {
                w.wrong_door = parse_number<std::size_t>(value, key);
            } else {
                throw ConfigError("unknown map metadata key '" + std::string(key) + "'");
            }
            continue;
        }
        if (line.empty()) {
            if (pos >= text.size()) break;
            if (!rows.empty() && !in_metadata) in_metadata = true;
            continue;
        }
        if (in_metadata) throw ConfigError("map rows after metadata block");
        rows.emplace_back(line);
    }

    if (rows.empty()) throw ConfigError("map has no rows");
    w.height = static_cast<int>(rows.size());
    w.width = static_cast<int>(rows.front().size());
    w.walls.assign(w.cell_count(), false);
    for (int r = 0; r < w.height; ++r) {
        if (static_cast<int>(rows[r].size()) != w.width) {
            throw ConfigError("ragged map: row " + std::to_string(r) + " has " + std::to_string(rows[r].size()) +
                              " cells, expected " + std::to_string(w.width));
        }
        for (int c = 0; c < w.width; ++c) {
            const char ch = rows[r][c];
            switch (ch) {
                case '#': w.walls[w.index({r, c})] = true; break;
                case '.': break;
                case 'S':
                    if (have_start) throw ConfigError("map has more than one 'S'");
                    have_start = true;
                    w.start = {r, c};
                    break;
                case 'G':
                    if (have_goal) throw ConfigError("map has more than one 'G'");
                    have_goal = true;
                    w.goal = {r, c};
                    break;
                default: throw ConfigError(std::string("unexpected map character '") + ch + "'");
            }
        }
    }
    if (!have_start) throw ConfigError("map has no 'S'");
    if (!have_goal) throw ConfigError("map has no 'G'");
    for (std::size_t d = 0; d < w.doors.size(); ++d) {
        const Cell c = w.doors[d];
        if (!w.inside(c) || w.is_wall(c)) throw ConfigError("door " + std::to_string(d) + " is not a floor cell");
    }
    if (w.wrong_door && *w.wrong_door >= w.doors.size()) throw ConfigError("wrong_door index out of range");
    if (w.max_steps < 1) throw ConfigError("max_steps must be positive");
    return w;
}

GridWorld load_map_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open map " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return load_map(ss.str());
}

std::string render_map(const GridWorld& w) {
    std::string out;
    for (int r = 0; r < w.height; ++r) {
        for (int c = 0; c < w.width; ++c) {
            const Cell cell{r, c};
            if (cell == w.start) out += 'S';
            else if (cell == w.goal) out += 'G';
            else out += w.is_wall(cell) ? '#' : '.';
        }
        out += '\n';
    }
    if (!w.name.empty()) out += "; name=" + w.name + "\n";
    out += "; step_penalty=" + format_double(w.step_penalty) + "\n";
    out += "; goal_bonus=" + format_double(w.goal_bonus) + "\n";
    out += "; max_steps=" + std::to_string(w.max_steps) + "\n";
    for (const auto& d : w.doors) out += "; door=" + std::to_string(d.row) + "," + std::to_string(d.col) + "\n";
    if (w.wrong_door) out += "; wrong_door=" + std::to_string(*w.wrong_door) + "\n";
    return out;
}

GridWorld builtin_map(std::string_view name) { return load_map(builtin_map_text(name)); }

Cell grid_move(const GridWorld& world, Cell from, std::size_t action) {
    if (action >= grid::kMoveCount) throw ContractError("invalid grid action " + std::to_string(action));
    const Cell to{from.row + kMoves[action][0], from.col + kMoves[action][1]};
    if (!world.inside(to) || world.is_wall(to)) return from;
    return to;
}

std::vector<int> distance_field(const GridWorld& world, Cell target) {
    std::vector<int> dist(world.cell_count(), -1);
    if (!world.inside(target) || world.is_wall(target)) return dist;
    std::deque<Cell> queue{target};
    dist[world.index(target)] = 0;
    // Moves are reversible (no one-way cells), so BFS from the target gives
    // the distance to it.
    while (!queue.empty()) {
        const Cell c = queue.front();
        queue.pop_front();
        for (std::size_t a = 0; a < grid::kMoveCount; ++a) {
            const Cell n = grid_move(world, c, a);
            if (dist[world.index(n)] >= 0) continue;
            dist[world.index(n)] = dist[world.index(c)] + 1;
            queue.push_back(n);
        }
    }
    return dist;
}

std::optional<int> bfs_shortest_path(const GridWorld& world) {
    const auto dist = distance_field(world, world.goal);
    const int d = dist[world.index(world.start)];
    if (d < 0) return std::nullopt;
    return d;
}

double optimal_return(const GridWorld& world, int path_length) {
    return world.goal_bonus + world.step_penalty * path_length;
}

GridPolicyTable optimal_grid_policy(const GridWorld& world) {
    GridPolicyTable table;
    table.action.assign(world.cell_count(), std::nullopt);
    const auto dist = distance_field(world, world.goal);
    for (std::size_t i = 0; i < world.cell_count(); ++i) {
        const Cell c = world.cell_at(i);
        if (world.is_wall(c) || c == world.goal) continue;
        if (dist[i] < 0) {
            table.unreachable.push_back(c);
            continue;
        }
        for (std::size_t a = 0; a < grid::kMoveCount; ++a) {
            if (dist[world.index(grid_move(world, c, a))] == dist[i] - 1) {
                table.action[i] = a;
                break;
            }
        }
    }
    return table;
}

std::vector<double> one_hot_observation(const GridWorld& world, Cell cell) {
    std::vector<double> obs(world.cell_count(), 0.0);
    obs[world.index(cell)] = 1.0;
    return obs;
}

Cell cell_from_observation(const GridWorld& world, std::span<const double> observation) {
    require(observation.size() == world.cell_count(), "observation does not match grid size");
    const auto it = std::max_element(observation.begin(), observation.end());
    return world.cell_at(static_cast<std::size_t>(it - observation.begin()));
}

GridEnv::GridEnv(GridWorld world) : world_(std::move(world)), cell_(world_.start) {}

std::vector<double> GridEnv::reset() {
    cell_ = world_.start;
    steps_ = 0;
    return one_hot_observation(world_, cell_);
}

StepResult GridEnv::step(std::size_t action, Rng&) {
    cell_ = grid_move(world_, cell_, action);
    ++steps_;
    StepResult r;
    r.reward = world_.step_penalty;
    if (cell_ == world_.goal) {
        r.reward += world_.goal_bonus;
        r.done = true;
        r.cause = TerminalCause::goal;
    } else if (steps_ >= world_.max_steps) {
        r.done = true;
        r.cause = TerminalCause::timeout;
    }
    r.observation = one_hot_observation(world_, cell_);
    return r;
}

// ---------------------------------------------------------------- Options

std::vector<int> RoomLayout::rooms_of(const GridWorld& world, Cell c) const {
    const int own = room_of[world.index(c)];
    if (own >= 0) return {own};
    for (std::size_t d = 0; d < world.doors.size(); ++d) {
        if (world.doors[d] == c) return {door_rooms[d][0], door_rooms[d][1]};
    }
    return {};
}

RoomLayout compute_rooms(const GridWorld& world) {
    RoomLayout layout;
    layout.room_of.assign(world.cell_count(), -1);
    std::vector<bool> blocked = world.walls;
    for (const auto& d : world.doors) blocked[world.index(d)] = true;

    for (std::size_t i = 0; i < world.cell_count(); ++i) {
        if (blocked[i] || layout.room_of[i] >= 0) continue;
        const int id = layout.room_count++;
        std::deque<Cell> queue{world.cell_at(i)};
        layout.room_of[i] = id;
        while (!queue.empty()) {
            const Cell c = queue.front();
            queue.pop_front();
            for (const auto& m : kMoves) {
                const Cell n{c.row + m[0], c.col + m[1]};
                if (!world.inside(n)) continue;
                const auto ni = world.index(n);
                if (blocked[ni] || layout.room_of[ni] >= 0) continue;
                layout.room_of[ni] = id;
                queue.push_back(n);
            }
        }
    }

    for (std::size_t d = 0; d < world.doors.size(); ++d) {
        std::vector<int> adjacent;
        const Cell c = world.doors[d];
        for (const auto& m : kMoves) {
            const Cell n{c.row + m[0], c.col + m[1]};
            if (!world.inside(n)) continue;
            const int room = layout.room_of[world.index(n)];
            if (room >= 0 && std::find(adjacent.begin(), adjacent.end(), room) == adjacent.end()) {
                adjacent.push_back(room);
            }
        }
        if (adjacent.size() != 2) {
            throw ConfigError("door " + std::to_string(d) + " must join exactly two rooms, joins " +
                              std::to_string(adjacent.size()));
        }
        std::sort(adjacent.begin(), adjacent.end());
        layout.door_rooms.push_back({adjacent[0], adjacent[1]});
    }
    layout.goal_room = layout.room_of[world.index(world.goal)];
    if (layout.goal_room < 0) throw ConfigError("goal lies on a door cell");
    return layout;
}

OptionSet::OptionSet(const GridWorld& world) : rooms_(compute_rooms(world)) {
    if (world.doors.empty()) throw ConfigError("options need at least one door in the map metadata");
    for (std::size_t d = 0; d < world.doors.size(); ++d) {
        Option o;
        o.target = world.doors[d];
        o.rooms = {rooms_.door_rooms[d][0], rooms_.door_rooms[d][1]};
        o.distance = distance_field(world, o.target);
        options_.push_back(std::move(o));
    }
    Option goal;
    goal.target = world.goal;
    goal.goal_option = true;
    goal.rooms = {rooms_.goal_room};
    goal.distance = distance_field(world, world.goal);
    options_.push_back(std::move(goal));
}

bool OptionSet::applicable(const GridWorld& world, std::size_t option, Cell c) const {
    require(option < options_.size(), "option index out of range");
    const Option& o = options_[option];
    if (c == o.target) return false;
    for (int room : rooms_.rooms_of(world, c)) {
        if (std::find(o.rooms.begin(), o.rooms.end(), room) != o.rooms.end()) return true;
    }
    return false;
}

std::size_t OptionSet::next_move(const GridWorld& world, std::size_t option, Cell c) const {
    const Option& o = options_[option];
    const int here = o.distance[world.index(c)];
    for (std::size_t a = 0; a < grid::kMoveCount; ++a) {
        if (o.distance[world.index(grid_move(world, c, a))] == here - 1) return a;
    }
    throw ContractError("no move makes progress towards the option target");
}

std::vector<std::optional<std::size_t>> optimal_option_policy(const GridWorld& world, const OptionSet& options) {
    std::vector<std::optional<std::size_t>> table(world.cell_count());
    const auto to_goal = distance_field(world, world.goal);
    for (std::size_t i = 0; i < world.cell_count(); ++i) {
        const Cell c = world.cell_at(i);
        if (world.is_wall(c) || c == world.goal || to_goal[i] < 0) continue;
        int best_cost = -1;
        for (std::size_t o = 0; o < options.size(); ++o) {
            if (!options.applicable(world, o, c)) continue;
            const int reach = options[o].distance[i];
            const int rest = to_goal[world.index(options[o].target)];
            if (reach < 0 || rest < 0) continue;
            const int cost = reach + rest;
            if (best_cost < 0 || cost < best_cost) {
                best_cost = cost;
                table[i] = o;
            }
        }
    }
    return table;
}

OptionGridEnv::OptionGridEnv(GridWorld world) : world_(std::move(world)), options_(world_), cell_(world_.start) {}

std::vector<double> OptionGridEnv::reset() {
    cell_ = world_.start;
    steps_ = 0;
    return one_hot_observation(world_, cell_);
}

StepResult OptionGridEnv::step(std::size_t option, Rng& rng) {
    require(option < options_.size(), "option index out of range");
    StepResult r;
    r.primitive_steps = 0;
    auto primitive = [&](std::size_t move) {
        cell_ = grid_move(world_, cell_, move);
        ++steps_;
        ++r.primitive_steps;
        r.reward += world_.step_penalty;
        if (cell_ == world_.goal) {
            r.reward += world_.goal_bonus;
            r.done = true;
            r.cause = TerminalCause::goal;
        } else if (steps_ >= world_.max_steps) {
            r.done = true;
            r.cause = TerminalCause::timeout;
        }
    };

    if (options_.applicable(world_, option, cell_)) {
        while (!r.done && cell_ != options_[option].target) primitive(options_.next_move(world_, option, cell_));
    } else {
        primitive(rng.index(grid::kMoveCount));
    }
    r.observation = one_hot_observation(world_, cell_);
    return r;
}

}  // namespace dpg
