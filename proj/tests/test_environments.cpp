#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <queue>
#include <set>

#include "dpg/environments.hpp"
#include "dpg/error.hpp"

using namespace dpg;

namespace {

constexpr double kPi = std::numbers::pi;

// Independent BFS over the raw map text, used to cross-check the library.
int text_bfs(const std::vector<std::string>& rows) {
    const int h = static_cast<int>(rows.size());
    const int w = static_cast<int>(rows[0].size());
    std::pair<int, int> s{}, g{};
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            if (rows[r][c] == 'S') s = {r, c};
            if (rows[r][c] == 'G') g = {r, c};
        }
    }
    std::vector<std::vector<int>> dist(h, std::vector<int>(w, -1));
    std::queue<std::pair<int, int>> q;
    dist[s.first][s.second] = 0;
    q.push(s);
    while (!q.empty()) {
        const auto [r, c] = q.front();
        q.pop();
        const int dr[] = {-1, 1, 0, 0}, dc[] = {0, 0, -1, 1};
        for (int k = 0; k < 4; ++k) {
            const int nr = r + dr[k], nc = c + dc[k];
            if (nr < 0 || nr >= h || nc < 0 || nc >= w || rows[nr][nc] == '#' || dist[nr][nc] >= 0) continue;
            dist[nr][nc] = dist[r][c] + 1;
            q.push({nr, nc});
        }
    }
    return dist[g.first][g.second];
}

std::vector<std::string> grid_rows(std::string_view text) {
    std::vector<std::string> rows;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        const auto line = text.substr(0, nl);
        if (!line.empty() && line[0] != ';') rows.emplace_back(line);
        if (nl == std::string_view::npos) break;
        text.remove_prefix(nl + 1);
    }
    return rows;
}

}  // namespace

TEST(Table, ForwardMovesAlongHeading) {
    TableState s{0.5, 0.5, 0.0};
    const auto r = table_step(s, table::forward);
    EXPECT_DOUBLE_EQ(s.x, 0.505);
    EXPECT_DOUBLE_EQ(s.y, 0.5);
    EXPECT_FALSE(r.done);
    EXPECT_EQ(r.reward, 0.0);
    EXPECT_EQ(r.observation, (std::vector<double>{s.x, s.y, s.theta}));

    TableState up{0.2, 0.2, kPi / 2};
    table_step(up, table::forward);
    EXPECT_NEAR(up.x, 0.2, 1e-15);
    EXPECT_NEAR(up.y, 0.205, 1e-15);
}

TEST(Table, TurnsChangeOnlyHeading) {
    TableState s{0.3, 0.4, 0.0};
    table_step(s, table::left);
    EXPECT_NEAR(s.theta, 0.1, 1e-15);
    table_step(s, table::right);
    table_step(s, table::right);
    EXPECT_NEAR(s.theta, -0.1, 1e-15);
    EXPECT_EQ(s.x, 0.3);
    EXPECT_EQ(s.y, 0.4);
}

TEST(Table, FallingOffTerminates) {
    TableState s{0.998, 0.5, 0.0};
    const auto r = table_step(s, table::forward);
    EXPECT_TRUE(r.done);
    EXPECT_EQ(r.cause, TerminalCause::fell);
    EXPECT_EQ(r.reward, -50.0);
}

TEST(Table, DockingTerminatesWithReward) {
    TableState s{0.5, 0.5, kPi / 4 - 0.35};
    auto r = table_step(s, table::left);  // now within 0.3 of pi/4
    EXPECT_TRUE(r.done);
    EXPECT_EQ(r.cause, TerminalCause::goal);
    EXPECT_EQ(r.reward, 100.0);

    EXPECT_TRUE(table_docked({0.52, 0.47, kPi / 4 + 2 * kPi}));
    EXPECT_FALSE(table_docked({0.56, 0.5, kPi / 4}));
    EXPECT_FALSE(table_docked({0.5, 0.5, kPi / 4 + 0.31}));
}

TEST(Table, TimeoutAfter2000Steps) {
    TableEnv env;
    Rng rng(1);
    env.reset();
    StepResult r;
    for (int t = 0; t < table::kMaxSteps; ++t) {
        ASSERT_FALSE(r.done) << "terminated early at step " << t;
        r = env.step(t % 2 == 0 ? table::left : table::right, rng);
    }
    EXPECT_TRUE(r.done);
    EXPECT_EQ(r.cause, TerminalCause::timeout);
    EXPECT_EQ(r.reward, 0.0);
}

TEST(Table, ResetObservation) {
    TableEnv env;
    EXPECT_EQ(env.reset(), (std::vector<double>{0.1, 0.1, 0.1}));
}

TEST(Table, RandomPlayStaysOnTableUntilTerminal) {
    TableEnv env;
    Rng rng(17);
    for (int episode = 0; episode < 20; ++episode) {
        env.reset();
        for (;;) {
            const auto r = env.step(rng.index(3), rng);
            if (r.done) {
                if (r.cause == TerminalCause::fell) EXPECT_EQ(r.reward, -50.0);
                break;
            }
            EXPECT_GE(r.observation[0], 0.0);
            EXPECT_LE(r.observation[0], 1.0);
            EXPECT_GE(r.observation[1], 0.0);
            EXPECT_LE(r.observation[1], 1.0);
        }
    }
}

TEST(WrapAngle, RangeAndValues) {
    EXPECT_DOUBLE_EQ(wrap_angle(kPi), kPi);
    EXPECT_DOUBLE_EQ(wrap_angle(-kPi), kPi);
    EXPECT_NEAR(wrap_angle(3 * kPi / 2), -kPi / 2, 1e-15);
    EXPECT_NEAR(wrap_angle(0.3 + 4 * kPi), 0.3, 1e-14);
    Rng rng(3);
    for (int i = 0; i < 1000; ++i) {
        const double t = wrap_angle(rng.uniform(-50.0, 50.0));
        EXPECT_GT(t, -kPi);
        EXPECT_LE(t, kPi);
    }
    EXPECT_NEAR(angular_distance(kPi - 0.1, -kPi + 0.1), 0.2, 1e-14);
}

TEST(Maps, BuiltinFixturesMeetPathConstraints) {
    const auto g1 = builtin_map("grid1");
    EXPECT_EQ(g1.height, 20);
    EXPECT_EQ(g1.width, 18);
    EXPECT_EQ(bfs_shortest_path(g1), 35);
    EXPECT_DOUBLE_EQ(optimal_return(g1, 35), 65.0);

    const auto g2 = builtin_map("grid2");
    EXPECT_EQ(g2.height, 20);
    EXPECT_EQ(g2.width, 18);
    EXPECT_TRUE(bfs_shortest_path(g2).has_value());
    EXPECT_NE(g1.doors, g2.doors);
    EXPECT_EQ(g1.walls.size(), g2.walls.size());

    const auto five = builtin_map("five_rooms");
    EXPECT_EQ(five.height, 29);
    EXPECT_EQ(five.width, 27);
    EXPECT_EQ(bfs_shortest_path(five), 54);
    EXPECT_NEAR(optimal_return(five, 54), 94.6, 1e-12);
}

TEST(Maps, LibraryBfsAgreesWithTextBfs) {
    for (const char* name : {"grid1", "grid2", "five_rooms"}) {
        const auto w = builtin_map(name);
        EXPECT_EQ(bfs_shortest_path(w), text_bfs(grid_rows(builtin_map_text(name)))) << name;
    }
}

TEST(Maps, FiveRoomLayoutHasFourDoors) {
    for (const char* name : {"grid1", "grid2", "five_rooms"}) {
        const auto w = builtin_map(name);
        const auto rooms = compute_rooms(w);
        EXPECT_EQ(rooms.room_count, 5) << name;
        EXPECT_EQ(w.doors.size(), 4u) << name;
        ASSERT_TRUE(w.wrong_door.has_value()) << name;
    }
}

TEST(Maps, OpenGridIsManhattan) {
    const auto w = load_map("S..\n...\n..G\n");
    EXPECT_EQ(bfs_shortest_path(w), 4);
}

TEST(Maps, SealedGoalIsUnreachable) {
    const auto w = load_map("S.#.\n..#G\n");
    EXPECT_FALSE(bfs_shortest_path(w).has_value());
}

TEST(Maps, RenderRoundTrip) {
    for (const char* name : {"grid1", "grid2", "five_rooms"}) {
        const auto w = builtin_map(name);
        EXPECT_EQ(load_map(render_map(w)), w) << name;
        EXPECT_EQ(render_map(w), builtin_map_text(name)) << name;
    }
}

TEST(Maps, MalformedInputIsRejected) {
    EXPECT_THROW(load_map("S..\n..\n..G\n"), ConfigError);           // ragged
    EXPECT_THROW(load_map("S.S\n..G\n"), ConfigError);                 // two starts
    EXPECT_THROW(load_map("...\n..G\n"), ConfigError);                 // no start
    EXPECT_THROW(load_map("S..\n...\n"), ConfigError);                 // no goal
    EXPECT_THROW(load_map("S.x\n..G\n"), ConfigError);                 // bad character
    EXPECT_THROW(load_map("S..\n..G\n; colour=blue\n"), ConfigError);  // unknown key
    EXPECT_THROW(load_map("S#.\n..G\n; door=0,1\n"), ConfigError);     // door on a wall
    EXPECT_THROW(load_map(""), ConfigError);
}

TEST(Maps, MetadataIsParsed) {
    const auto w = load_map("S.#.\n...G\n; name=tiny\n; step_penalty=-0.5\n; goal_bonus=10\n; max_steps=7\n; door=1,2\n");
    EXPECT_EQ(w.name, "tiny");
    EXPECT_EQ(w.step_penalty, -0.5);
    EXPECT_EQ(w.goal_bonus, 10.0);
    EXPECT_EQ(w.max_steps, 7);
    ASSERT_EQ(w.doors.size(), 1u);
    EXPECT_EQ(w.doors[0], (Cell{1, 2}));
}

TEST(GridEnv, MovesWallsAndBorders) {
    const auto w = load_map("S#.\n..G\n");
    EXPECT_EQ(grid_move(w, {0, 0}, grid::up), (Cell{0, 0}));
    EXPECT_EQ(grid_move(w, {0, 0}, grid::left), (Cell{0, 0}));
    EXPECT_EQ(grid_move(w, {0, 0}, grid::right), (Cell{0, 0}));
    EXPECT_EQ(grid_move(w, {0, 0}, grid::down), (Cell{1, 0}));
}

TEST(GridEnv, RewardsAndTermination) {
    GridEnv env(load_map("S.G\n; max_steps=5\n"));
    Rng rng(1);
    env.reset();
    auto r = env.step(grid::right, rng);
    EXPECT_EQ(r.reward, -1.0);
    EXPECT_FALSE(r.done);
    r = env.step(grid::right, rng);
    EXPECT_EQ(r.reward, 99.0);
    EXPECT_TRUE(r.done);
    EXPECT_EQ(r.cause, TerminalCause::goal);

    env.reset();
    for (int t = 0; t < 5; ++t) r = env.step(grid::left, rng);
    EXPECT_TRUE(r.done);
    EXPECT_EQ(r.cause, TerminalCause::timeout);
}

TEST(GridEnv, ObservationIsOneHot) {
    const auto w = builtin_map("grid1");
    const auto obs = one_hot_observation(w, {3, 4});
    double total = 0.0;
    for (double x : obs) total += x;
    EXPECT_EQ(total, 1.0);
    EXPECT_EQ(obs[w.index({3, 4})], 1.0);
    EXPECT_EQ(cell_from_observation(w, obs), (Cell{3, 4}));
}

TEST(OptimalPolicy, RolloutFollowsShortestPath) {
    for (const char* name : {"grid1", "grid2", "five_rooms"}) {
        const auto w = builtin_map(name);
        const auto table = optimal_grid_policy(w);
        EXPECT_TRUE(table.unreachable.empty()) << name;
        EXPECT_FALSE(table.action[w.index(w.goal)].has_value());

        GridEnv env(w);
        Rng rng(1);
        env.reset();
        double ret = 0.0;
        int steps = 0;
        for (;;) {
            const auto a = table.action[w.index(env.cell())];
            ASSERT_TRUE(a.has_value());
            const auto r = env.step(*a, rng);
            ret += r.reward;
            ++steps;
            if (r.done) {
                EXPECT_EQ(r.cause, TerminalCause::goal);
                break;
            }
        }
        EXPECT_EQ(steps, *bfs_shortest_path(w)) << name;
        EXPECT_NEAR(ret, optimal_return(w, steps), 1e-9) << name;
    }
}

TEST(OptimalPolicy, CellLeftOfGoalMovesRight) {
    const auto w = builtin_map("grid1");
    const auto table = optimal_grid_policy(w);
    EXPECT_EQ(table.action[w.index({w.goal.row, w.goal.col - 1})], grid::right);
}

TEST(Options, ApplicabilityFollowsRooms) {
    const auto w = builtin_map("five_rooms");
    const OptionSet options(w);
    ASSERT_EQ(options.size(), 5u);
    EXPECT_TRUE(options[options.goal_option()].goal_option);
    // From the start only the doors of the start room apply.
    std::set<std::size_t> applicable;
    for (std::size_t o = 0; o < options.size(); ++o) {
        if (options.applicable(w, o, w.start)) applicable.insert(o);
    }
    const auto start_rooms = options.rooms().rooms_of(w, w.start);
    ASSERT_EQ(start_rooms.size(), 1u);
    for (std::size_t d = 0; d < w.doors.size(); ++d) {
        const auto& joined = options.rooms().door_rooms[d];
        const bool touches = joined[0] == start_rooms[0] || joined[1] == start_rooms[0];
        EXPECT_EQ(applicable.count(d) == 1, touches) << "door " << d;
    }
    EXPECT_EQ(applicable.count(options.goal_option()), 0u);
    // The option of a door is not applicable on that door.
    EXPECT_FALSE(options.applicable(w, 0, w.doors[0]));
}

TEST(Options, StepConservesRewardAccounting) {
    const auto w = builtin_map("five_rooms");
    OptionGridEnv env(w);
    Rng rng(4);
    for (int episode = 0; episode < 20; ++episode) {
        env.reset();
        int total_steps = 0;
        for (;;) {
            const auto r = env.step(rng.index(env.action_count()), rng);
            total_steps += r.primitive_steps;
            double expected = w.step_penalty * r.primitive_steps;
            if (r.cause == TerminalCause::goal) expected += w.goal_bonus;
            EXPECT_NEAR(r.reward, expected, 1e-12);
            EXPECT_GE(r.primitive_steps, 1);
            if (r.done) break;
        }
        EXPECT_EQ(total_steps, env.steps());
        EXPECT_LE(total_steps, w.max_steps);
    }
}

TEST(Options, OptimalOptionPolicyReachesGoalInShortestPath) {
    const auto w = builtin_map("five_rooms");
    OptionGridEnv env(w);
    const auto table = optimal_option_policy(w, env.options());
    Rng rng(1);
    env.reset();
    double ret = 0.0;
    int steps = 0;
    for (int decisions = 0; decisions < 20; ++decisions) {
        const auto o = table[w.index(env.cell())];
        ASSERT_TRUE(o.has_value());
        const auto r = env.step(*o, rng);
        ret += r.reward;
        steps += r.primitive_steps;
        if (r.done) break;
    }
    EXPECT_EQ(steps, 54);
    EXPECT_NEAR(ret, 94.6, 1e-9);
}

TEST(Options, InapplicableOptionTakesOneRandomMove) {
    const auto w = builtin_map("five_rooms");
    OptionGridEnv env(w);
    Rng rng(2);
    env.reset();
    const auto r = env.step(env.options().goal_option(), rng);
    EXPECT_EQ(r.primitive_steps, 1);
    EXPECT_FALSE(r.done);
}

TEST(TerminalCause, StringRoundTrip) {
    for (auto c : {TerminalCause::none, TerminalCause::goal, TerminalCause::fell, TerminalCause::timeout}) {
        EXPECT_EQ(parse_terminal_cause(to_string(c)), c);
    }
    EXPECT_THROW(parse_terminal_cause("exploded"), ConfigError);
}
