#pragma once

// Benchmark environments: the continuous Table docking task, the Five Rooms
// grid worlds (primitive moves), and the 29x27 Five Rooms variant driven by
// door/goal options. Also the map format and the shortest-path oracles.

#include <array>
#include <compare>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dpg/rng.hpp"

namespace dpg {

enum class TerminalCause { none, goal, fell, timeout };

std::string_view to_string(TerminalCause cause);
TerminalCause parse_terminal_cause(std::string_view text);

struct StepResult {
    std::vector<double> observation;
    double reward = 0.0;
    bool done = false;
    TerminalCause cause = TerminalCause::none;
    int primitive_steps = 1;
};

class Environment {
public:
    virtual ~Environment() = default;

    virtual std::size_t observation_dim() const = 0;
    virtual std::size_t action_count() const = 0;
    virtual std::vector<double> reset() = 0;
    virtual StepResult step(std::size_t action, Rng& rng) = 0;
};

// ---------------------------------------------------------------- Table

namespace table {
inline constexpr double kForwardStep = 0.005;
inline constexpr double kTurnStep = 0.1;
inline constexpr double kStartX = 0.1;
inline constexpr double kStartY = 0.1;
inline constexpr double kStartTheta = 0.1;
inline constexpr double kDockCenter = 0.5;
inline constexpr double kDockHalfWidth = 0.05;
inline constexpr double kDockAngle = 0.78539816339744830962;  // pi/4
inline constexpr double kDockAngleTolerance = 0.3;
inline constexpr double kGoalReward = 100.0;
inline constexpr double kFallReward = -50.0;
inline constexpr int kMaxSteps = 2000;

enum Action : std::size_t { forward = 0, left = 1, right = 2 };
}  // namespace table

struct TableState {
    double x = table::kStartX;
    double y = table::kStartY;
    double theta = table::kStartTheta;

    std::array<double, 3> observation() const { return {x, y, theta}; }
};

// Wraps to (-pi, pi].
double wrap_angle(double theta);
// |wrap(a - b)|, in [0, pi].
double angular_distance(double a, double b);

TableState table_reset();
bool table_docked(const TableState& s);

// One transition without the timeout (the step counter lives in TableEnv).
StepResult table_step(TableState& state, std::size_t action);

class TableEnv final : public Environment {
public:
    std::size_t observation_dim() const override { return 3; }
    std::size_t action_count() const override { return 3; }
    std::vector<double> reset() override;
    StepResult step(std::size_t action, Rng& rng) override;

    const TableState& state() const { return state_; }
    void set_state(const TableState& s) { state_ = s; }
    int steps() const { return steps_; }

private:
    TableState state_;
    int steps_ = 0;
};

// ---------------------------------------------------------------- Grids

struct Cell {
    int row = 0;
    int col = 0;
    auto operator<=>(const Cell&) const = default;
};

namespace grid {
enum Action : std::size_t { up = 0, down = 1, left = 2, right = 3 };
inline constexpr std::size_t kMoveCount = 4;
}  // namespace grid

struct GridWorld {
    std::string name;
    int width = 0;
    int height = 0;
    std::vector<bool> walls;  // row-major
    Cell start;
    Cell goal;
    double step_penalty = -1.0;
    double goal_bonus = 100.0;
    int max_steps = 500;
    std::vector<Cell> doors;
    std::optional<std::size_t> wrong_door;  // door leading into the dead-end room

    bool inside(Cell c) const { return c.row >= 0 && c.row < height && c.col >= 0 && c.col < width; }
    bool is_wall(Cell c) const { return walls[index(c)]; }
    std::size_t index(Cell c) const { return static_cast<std::size_t>(c.row * width + c.col); }
    Cell cell_at(std::size_t i) const { return {static_cast<int>(i) / width, static_cast<int>(i) % width}; }
    std::size_t cell_count() const { return static_cast<std::size_t>(width * height); }

    bool operator==(const GridWorld&) const = default;
};

// Parses the ASCII map format ('#', '.', 'S', 'G' rows followed by
// "; key=value" metadata lines). Throws ConfigError on malformed input.
GridWorld load_map(std::string_view text);
GridWorld load_map_file(const std::filesystem::path& path);
std::string render_map(const GridWorld& world);

// Built-in fixtures: "grid1", "grid2" (20 high x 18 wide) and "five_rooms" (29 x 27).
GridWorld builtin_map(std::string_view name);
std::string_view builtin_map_text(std::string_view name);

// Result of a primitive move: walls and the border leave the agent in place.
Cell grid_move(const GridWorld& world, Cell from, std::size_t action);

// Minimal number of primitive moves from S to G.
std::optional<int> bfs_shortest_path(const GridWorld& world);
// Distance (in moves) from every cell to target; -1 for walls and unreachable cells.
std::vector<int> distance_field(const GridWorld& world, Cell target);

double optimal_return(const GridWorld& world, int path_length);

// Per-cell action on a shortest path to the goal; nullopt for walls, the goal
// and cells that cannot reach it. Ties go to the lowest action index.
struct GridPolicyTable {
    std::vector<std::optional<std::size_t>> action;
    std::vector<Cell> unreachable;
};
GridPolicyTable optimal_grid_policy(const GridWorld& world);

class GridEnv final : public Environment {
public:
    explicit GridEnv(GridWorld world);

    std::size_t observation_dim() const override { return world_.cell_count(); }
    std::size_t action_count() const override { return grid::kMoveCount; }
    std::vector<double> reset() override;
    StepResult step(std::size_t action, Rng& rng) override;

    const GridWorld& world() const { return world_; }
    Cell cell() const { return cell_; }
    void set_cell(Cell c) { cell_ = c; }
    int steps() const { return steps_; }

private:
    GridWorld world_;
    Cell cell_;
    int steps_ = 0;
};

std::vector<double> one_hot_observation(const GridWorld& world, Cell cell);
// Inverse of one_hot_observation (index of the largest component).
Cell cell_from_observation(const GridWorld& world, std::span<const double> observation);

// ---------------------------------------------------------------- Options

// Rooms are the connected components of floor cells once doors are removed.
struct RoomLayout {
    std::vector<int> room_of;                // per cell; -1 for walls and doors
    int room_count = 0;
    std::vector<std::array<int, 2>> door_rooms;  // the two rooms each door joins
    int goal_room = -1;

    // Rooms a cell belongs to: its own room, or both rooms for a door cell.
    std::vector<int> rooms_of(const GridWorld& world, Cell c) const;
};
RoomLayout compute_rooms(const GridWorld& world);

struct Option {
    Cell target;
    bool goal_option = false;
    std::vector<int> rooms;      // applicable when the agent is in one of these rooms
    std::vector<int> distance;   // distance field to target
};

// One option per door, in door order, then the goal option.
class OptionSet {
public:
    explicit OptionSet(const GridWorld& world);

    std::size_t size() const { return options_.size(); }
    const Option& operator[](std::size_t i) const { return options_[i]; }
    const RoomLayout& rooms() const { return rooms_; }
    std::size_t goal_option() const { return options_.size() - 1; }

    bool applicable(const GridWorld& world, std::size_t option, Cell c) const;
    // Next primitive move along the option's shortest path (lowest index on ties).
    std::size_t next_move(const GridWorld& world, std::size_t option, Cell c) const;

private:
    RoomLayout rooms_;
    std::vector<Option> options_;
};

// Per-cell option whose execution lies on the cheapest route to the goal.
std::vector<std::optional<std::size_t>> optimal_option_policy(const GridWorld& world, const OptionSet& options);

class OptionGridEnv final : public Environment {
public:
    explicit OptionGridEnv(GridWorld world);

    std::size_t observation_dim() const override { return world_.cell_count(); }
    std::size_t action_count() const override { return options_.size(); }
    std::vector<double> reset() override;
    StepResult step(std::size_t option, Rng& rng) override;

    const GridWorld& world() const { return world_; }
    const OptionSet& options() const { return options_; }
    Cell cell() const { return cell_; }
    void set_cell(Cell c) { cell_ = c; }
    int steps() const { return steps_; }

private:
    GridWorld world_;
    OptionSet options_;
    Cell cell_;
    int steps_ = 0;
};

}  // namespace dpg
