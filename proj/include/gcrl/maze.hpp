#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <fstream>
#include <optional>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gcrl/rng.hpp"

namespace gcrl {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend bool operator==(Vec2 a, Vec2 b) { return a.x == b.x && a.y == b.y; }
    double norm() const { return std::hypot(x, y); }
};

inline double distance(Vec2 a, Vec2 b) { return (a - b).norm(); }

/// Occupancy-grid maze with three start clusters and three goal clusters.
/// Coordinates are continuous: cell (cx, cy) covers [cx, cx+1) x [cy, cy+1),
/// x grows along columns and y along rows.
struct MazeSpec {
    int width = 24;
    int height = 18;
    std::vector<std::uint8_t> walls; // row-major, 1 = wall
    std::array<Vec2, 3> start_centers{};
    std::array<Vec2, 3> goal_centers{};
    double cluster_radius = 0.5;
    double epsilon = 2.0;      // success distance threshold
    double action_bound = 2.0; // per-axis step limit
    int horizon = 60;

    bool wall(int cx, int cy) const {
        if (cx < 0 || cy < 0 || cx >= width || cy >= height) return true;
        return walls[static_cast<std::size_t>(cy) * width + cx] != 0;
    }

    bool wall_at(Vec2 p) const {
        return wall(static_cast<int>(std::floor(p.x)), static_cast<int>(std::floor(p.y)));
    }

    int cell_index(int cx, int cy) const { return cy * width + cx; }

    static MazeSpec from_text(std::string_view text);
    static MazeSpec from_file(const std::string& path);
    static MazeSpec default_layout();
    std::string to_text() const;
    void validate() const;
};

/// Rows of the default maze: three corridors leaving the left side that join
/// in an open chamber on the right where all three goal clusters sit.
inline constexpr std::string_view kDefaultMazeText =
    "########################\n"
    "#......................#\n"
    "#.A..................1.#\n"
    "#......................#\n"
    "#......................#\n"
    "#......................#\n"
    "#################......#\n"
    "#......................#\n"
    "#......................#\n"
    "#.B..................2.#\n"
    "#......................#\n"
    "#......................#\n"
    "#################......#\n"
    "#......................#\n"
    "#......................#\n"
    "#.C..................3.#\n"
    "#......................#\n"
    "########################\n";

inline MazeSpec MazeSpec::from_text(std::string_view text) {
    MazeSpec spec;
    std::vector<std::string> rows;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        if (nl > pos) rows.emplace_back(text.substr(pos, nl - pos));
        pos = nl + 1;
    }
    if (rows.empty()) throw std::runtime_error("maze layout: empty");
    spec.height = static_cast<int>(rows.size());
    spec.width = static_cast<int>(rows[0].size());
    spec.walls.assign(static_cast<std::size_t>(spec.width) * spec.height, 0);

    std::array<bool, 3> seen_start{}, seen_goal{};
    for (int r = 0; r < spec.height; ++r) {
        if (static_cast<int>(rows[r].size()) != spec.width)
            throw std::runtime_error("maze layout: ragged row " + std::to_string(r));
        for (int c = 0; c < spec.width; ++c) {
            char ch = rows[r][c];
            Vec2 here{static_cast<double>(c), static_cast<double>(r)};
            switch (ch) {
            case '#': spec.walls[static_cast<std::size_t>(r) * spec.width + c] = 1; break;
            case '.': break;
            case 'A': case 'B': case 'C': {
                int i = ch - 'A';
                if (seen_start[i]) throw std::runtime_error("maze layout: duplicate start marker");
                seen_start[i] = true;
                spec.start_centers[i] = here;
                break;
            }
            case '1': case '2': case '3': {
                int i = ch - '1';
                if (seen_goal[i]) throw std::runtime_error("maze layout: duplicate goal marker");
                seen_goal[i] = true;
                spec.goal_centers[i] = here;
                break;
            }
            default:
                throw std::runtime_error(std::string("maze layout: unknown char '") + ch + "'");
            }
        }
    }
    for (int i = 0; i < 3; ++i)
        if (!seen_start[i] || !seen_goal[i])
            throw std::runtime_error("maze layout: missing start or goal marker");
    spec.validate();
    return spec;
}

inline MazeSpec MazeSpec::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("maze layout: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_text(ss.str());
}

inline MazeSpec MazeSpec::default_layout() { return from_text(kDefaultMazeText); }

inline std::string MazeSpec::to_text() const {
    std::string out;
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
            char ch = wall(c, r) ? '#' : '.';
            for (int i = 0; i < 3; ++i) {
                if (start_centers[i].x == c && start_centers[i].y == r) ch = char('A' + i);
                if (goal_centers[i].x == c && goal_centers[i].y == r) ch = char('1' + i);
            }
            out += ch;
        }
        out += '\n';
    }
    return out;
}

inline void MazeSpec::validate() const {
    if (epsilon <= 0.0 || action_bound <= 0.0 || horizon < 1 || cluster_radius < 0.0)
        throw std::runtime_error("maze spec: invalid scalar parameter");
    for (int c = 0; c < width; ++c)
        if (!wall(c, 0) || !wall(c, height - 1))
            throw std::runtime_error("maze spec: border must be walls");
    for (int r = 0; r < height; ++r)
        if (!wall(0, r) || !wall(width - 1, r))
            throw std::runtime_error("maze spec: border must be walls");
    auto check_disk = [&](Vec2 center) {
        int lo_x = static_cast<int>(std::floor(center.x - cluster_radius));
        int hi_x = static_cast<int>(std::floor(center.x + cluster_radius));
        int lo_y = static_cast<int>(std::floor(center.y - cluster_radius));
        int hi_y = static_cast<int>(std::floor(center.y + cluster_radius));
        for (int cy = lo_y; cy <= hi_y; ++cy)
            for (int cx = lo_x; cx <= hi_x; ++cx)
                if (wall(cx, cy))
                    throw std::runtime_error("maze spec: cluster overlaps a wall");
    };
    for (const auto& c : start_centers) check_disk(c);
    for (const auto& c : goal_centers) check_disk(c);
}

struct EnvState {
    Vec2 position;
    int step_index = 0;
    Vec2 task_goal;
    int start_cluster = -1;
    int goal_cluster = -1;
};

namespace detail {
inline Vec2 sample_in_disk(Vec2 center, double radius, Rng& rng) {
    const double u = rng.uniform();
    const double theta = 2.0 * M_PI * rng.uniform();
    const double r = radius * std::sqrt(u);
    return {center.x + r * std::cos(theta), center.y + r * std::sin(theta)};
}
} // namespace detail

/// Place the agent in a start cluster and draw a task goal from a goal
/// cluster; nullopt picks the cluster uniformly at random.
inline EnvState reset(const MazeSpec& spec, Rng& rng,
                      std::optional<int> start_cluster = std::nullopt,
                      std::optional<int> goal_cluster = std::nullopt) {
    EnvState st;
    st.start_cluster = start_cluster ? *start_cluster : static_cast<int>(rng.index(3));
    st.goal_cluster = goal_cluster ? *goal_cluster : static_cast<int>(rng.index(3));
    if (st.start_cluster < 0 || st.start_cluster > 2 || st.goal_cluster < 0 || st.goal_cluster > 2)
        throw std::invalid_argument("reset: cluster index out of range");
    st.position = detail::sample_in_disk(spec.start_centers[st.start_cluster],
                                         spec.cluster_radius, rng);
    st.task_goal = detail::sample_in_disk(spec.goal_centers[st.goal_cluster],
                                          spec.cluster_radius, rng);
    st.step_index = 0;
    return st;
}

struct StepResult {
    EnvState next;
    double train_reward = -1.0; // 0 on success, -1 otherwise
    double eval_reward = 0.0;   // 1 on success, 0 otherwise
    bool done = false;          // success flag used for bootstrapping
};

namespace detail {
// Axis move with the displacement canceled if any cell the segment touches is
// a wall; checking the whole swept range rules out jumping across thin walls.
inline bool x_move_blocked(const MazeSpec& spec, double x0, double x1, double y) {
    const int row = static_cast<int>(std::floor(y));
    const int lo = static_cast<int>(std::floor(std::min(x0, x1)));
    const int hi = static_cast<int>(std::floor(std::max(x0, x1)));
    for (int c = lo; c <= hi; ++c)
        if (spec.wall(c, row)) return true;
    return false;
}

inline bool y_move_blocked(const MazeSpec& spec, double x, double y0, double y1) {
    const int col = static_cast<int>(std::floor(x));
    const int lo = static_cast<int>(std::floor(std::min(y0, y1)));
    const int hi = static_cast<int>(std::floor(std::max(y0, y1)));
    for (int r = lo; r <= hi; ++r)
        if (spec.wall(col, r)) return true;
    return false;
}
} // namespace detail

/// One environment step: clip the action per axis, resolve x then y movement
/// with slide behavior, then score against the task goal.
inline StepResult step(const MazeSpec& spec, const EnvState& st, Vec2 action) {
    if (st.step_index >= spec.horizon)
        throw std::logic_error("step: episode horizon exhausted");
    const double b = spec.action_bound;
    const double dx = std::clamp(action.x, -b, b);
    const double dy = std::clamp(action.y, -b, b);

    Vec2 pos = st.position;
    double nx = pos.x + dx;
    if (detail::x_move_blocked(spec, pos.x, nx, pos.y)) nx = pos.x;
    double ny = pos.y + dy;
    if (detail::y_move_blocked(spec, nx, pos.y, ny)) ny = pos.y;

    StepResult res;
    res.next = st;
    res.next.position = {nx, ny};
    res.next.step_index = st.step_index + 1;
    const bool success = distance(res.next.position, st.task_goal) < spec.epsilon;
    res.train_reward = success ? 0.0 : -1.0;
    res.eval_reward = success ? 1.0 : 0.0;
    res.done = success;
    return res;
}

// ---------------------------------------------------------------------------
// Grid search: A* planner used by the expert, BFS used as its oracle.
// ---------------------------------------------------------------------------

struct Cell {
    int x = 0;
    int y = 0;
    friend bool operator==(Cell a, Cell b) { return a.x == b.x && a.y == b.y; }
};

inline Cell cell_of(Vec2 p) {
    return {static_cast<int>(std::floor(p.x)), static_cast<int>(std::floor(p.y))};
}

/// Breadth-first shortest-path distance between two cells, -1 if unreachable.
inline int bfs_distance(const MazeSpec& spec, Cell from, Cell to) {
    if (spec.wall(from.x, from.y) || spec.wall(to.x, to.y)) return -1;
    std::vector<int> dist(static_cast<std::size_t>(spec.width) * spec.height, -1);
    std::deque<Cell> frontier{from};
    dist[spec.cell_index(from.x, from.y)] = 0;
    while (!frontier.empty()) {
        Cell c = frontier.front();
        frontier.pop_front();
        if (c == to) return dist[spec.cell_index(c.x, c.y)];
        const int d = dist[spec.cell_index(c.x, c.y)];
        const Cell nbrs[4] = {{c.x + 1, c.y}, {c.x - 1, c.y}, {c.x, c.y + 1}, {c.x, c.y - 1}};
        for (Cell n : nbrs) {
            if (spec.wall(n.x, n.y)) continue;
            int& dn = dist[spec.cell_index(n.x, n.y)];
            if (dn < 0) {
                dn = d + 1;
                frontier.push_back(n);
            }
        }
    }
    return -1;
}

/// A* on the free-cell grid: 4-connected, unit cost, Manhattan heuristic.
/// Ties prefer deeper nodes and vertical-before-horizontal progress, which
/// makes planned paths turn toward the goal row as early as the walls allow.
/// Throws when the goal is unreachable.
inline std::vector<Cell> astar_path(const MazeSpec& spec, Cell from, Cell to) {
    if (spec.wall(from.x, from.y) || spec.wall(to.x, to.y))
        throw std::runtime_error("astar: endpoint inside a wall");
    const int n = spec.width * spec.height;
    std::vector<int> g(n, -1), parent(n, -1);
    auto hfun = [&](Cell c) { return std::abs(c.x - to.x) + std::abs(c.y - to.y); };

    // priority: smallest f, then largest g, then smallest cell index
    using Node = std::tuple<int, int, int>; // (f, -g, cell)
    std::priority_queue<Node, std::vector<Node>, std::greater<>> open;
    g[spec.cell_index(from.x, from.y)] = 0;
    open.emplace(hfun(from), 0, spec.cell_index(from.x, from.y));

    while (!open.empty()) {
        auto [f, negg, ci] = open.top();
        open.pop();
        Cell c{ci % spec.width, ci / spec.width};
        if (-negg != g[ci]) continue; // stale entry
        if (c == to) break;

        const int sy = (to.y > c.y) ? 1 : -1;
        const int sx = (to.x > c.x) ? 1 : -1;
        const Cell nbrs[4] = {{c.x, c.y + sy}, {c.x + sx, c.y}, {c.x, c.y - sy}, {c.x - sx, c.y}};
        for (Cell nb : nbrs) {
            if (spec.wall(nb.x, nb.y)) continue;
            const int ni = spec.cell_index(nb.x, nb.y);
            const int ng = g[ci] + 1;
            if (g[ni] < 0 || ng < g[ni]) {
                g[ni] = ng;
                parent[ni] = ci;
                open.emplace(ng + hfun(nb), -ng, ni);
            }
        }
    }
    const int ti = spec.cell_index(to.x, to.y);
    if (g[ti] < 0) throw std::runtime_error("astar: goal unreachable, malformed maze");
    std::vector<Cell> path;
    for (int ci = ti; ci >= 0; ci = parent[ci])
        path.push_back({ci % spec.width, ci / spec.width});
    std::reverse(path.begin(), path.end());
    return path;
}

/// A*-backed expert: plans to the goal cell and steps toward a waypoint two
/// cells down the path, plus optional zero-mean uniform action noise.
inline Vec2 expert_action(const MazeSpec& spec, const EnvState& st, double noise_scale,
                          Rng& rng) {
    const Cell from = cell_of(st.position);
    const Cell to = cell_of(st.task_goal);
    const std::vector<Cell> path = astar_path(spec, from, to);

    Vec2 target;
    const std::size_t look = std::min<std::size_t>(2, path.size() - 1);
    if (look == path.size() - 1) {
        target = st.task_goal; // final approach aims at the exact goal point
    } else {
        const Cell wp = path[look];
        target = {wp.x + 0.5, wp.y + 0.5};
    }
    const double b = spec.action_bound;
    Vec2 a{std::clamp(target.x - st.position.x, -b, b),
           std::clamp(target.y - st.position.y, -b, b)};
    if (noise_scale > 0.0) {
        a.x += rng.uniform(-noise_scale, noise_scale);
        a.y += rng.uniform(-noise_scale, noise_scale);
        a.x = std::clamp(a.x, -b, b);
        a.y = std::clamp(a.y, -b, b);
    }
    return a;
}

} // namespace gcrl
