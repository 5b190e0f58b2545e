#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "gcrl/maze.hpp"
#include "gcrl/mlp.hpp"
#include "gcrl/rng.hpp"
#include "gcrl/stats.hpp"

namespace gcrl {

enum class EvalMode { random_combo, fixed_grid };

inline std::string to_string(EvalMode m) {
    return m == EvalMode::random_combo ? "random_combo" : "fixed_grid";
}

/// Rollout statistics for one policy snapshot: per-episode cumulative binary
/// rewards plus a 3x3 start-by-goal success-rate grid.
struct EvalReport {
    std::vector<double> episode_rewards;
    double mean = 0.0;
    double stddev = 0.0;
    std::array<std::array<double, 3>, 3> success_grid{}; // [start][goal]
    std::array<std::array<int, 3>, 3> grid_counts{};
    std::string algorithm;
    std::uint64_t seed = 0;
    std::string checkpoint_id;
    std::string mode;

    bool all_combos_succeed() const {
        for (const auto& row : success_grid)
            for (double v : row)
                if (v <= 0.0) return false;
        return true;
    }

    int combos_with_success() const {
        int n = 0;
        for (const auto& row : success_grid)
            for (double v : row) n += v > 0.0;
        return n;
    }
};

namespace detail {

struct EpisodeOutcome {
    double cum_reward = 0.0;
    bool success = false;
    int start_cluster = 0;
    int goal_cluster = 0;
};

inline EpisodeOutcome run_episode(const MlpParams& policy, const MazeSpec& spec,
                                  std::uint64_t seed, std::uint64_t episode,
                                  std::optional<int> start_cluster,
                                  std::optional<int> goal_cluster,
                                  const std::string& trace_path) {
    Rng rng = derive_rng(seed, {episode});
    EnvState st = reset(spec, rng, start_cluster, goal_cluster);
    EpisodeOutcome out;
    out.start_cluster = st.start_cluster;
    out.goal_cluster = st.goal_cluster;

    std::ofstream trace;
    if (!trace_path.empty()) {
        trace.open(trace_path);
        trace << "step,x,y,goal_x,goal_y,reward\n";
    }
    Vec obs(4);
    for (int t = 0; t < spec.horizon; ++t) {
        obs << st.position.x, st.position.y, st.task_goal.x, st.task_goal.y;
        const Vec a = forward(policy, obs);
        const StepResult r = step(spec, st, {a(0), a(1)});
        out.cum_reward += r.eval_reward;
        out.success = out.success || r.done;
        st = r.next;
        if (trace.is_open())
            trace << t << ',' << st.position.x << ',' << st.position.y << ','
                  << st.task_goal.x << ',' << st.task_goal.y << ',' << r.eval_reward << '\n';
    }
    return out;
}

} // namespace detail

/// Evaluate a policy snapshot with greedy full-horizon rollouts.
/// random_combo samples start and goal clusters uniformly per episode;
/// fixed_grid balances episodes exactly across the 9 combos (n_episodes is
/// rounded up to the next multiple of 9). Episodes use independent RNG
/// streams keyed by (seed, episode index), so reports do not depend on how
/// episodes are scheduled over threads.
inline EvalReport evaluate(const MlpParams& policy, const MazeSpec& spec, int n_episodes,
                           EvalMode mode, std::uint64_t seed, int jobs = 1,
                           const std::string& trace_dir = "") {
    if (policy.input_dim() != 4 || policy.output_dim() != 2)
        throw std::invalid_argument("evaluate: policy must map state+goal to an action pair");
    if (n_episodes < 1) throw std::invalid_argument("evaluate: n_episodes >= 1");

    int total = n_episodes;
    int per_combo = 0;
    if (mode == EvalMode::fixed_grid) {
        per_combo = (n_episodes + 8) / 9;
        total = per_combo * 9;
    }
    if (!trace_dir.empty()) std::filesystem::create_directories(trace_dir);

    std::vector<detail::EpisodeOutcome> outcomes(total);
    auto run_range = [&](int lo, int hi) {
        for (int e = lo; e < hi; ++e) {
            std::optional<int> sc, gc;
            if (mode == EvalMode::fixed_grid) {
                sc = (e / per_combo) / 3;
                gc = (e / per_combo) % 3;
            }
            std::string trace_path;
            if (!trace_dir.empty())
                trace_path = (std::filesystem::path(trace_dir) /
                              ("episode_" + std::to_string(e) + ".csv"))
                                 .string();
            outcomes[e] = detail::run_episode(policy, spec, seed,
                                              static_cast<std::uint64_t>(e), sc, gc,
                                              trace_path);
        }
    };

    jobs = std::max(1, jobs);
    if (jobs == 1) {
        run_range(0, total);
    } else {
        std::vector<std::thread> workers;
        const int chunk = (total + jobs - 1) / jobs;
        for (int j = 0; j < jobs; ++j) {
            const int lo = j * chunk, hi = std::min(total, lo + chunk);
            if (lo >= hi) break;
            workers.emplace_back(run_range, lo, hi);
        }
        for (auto& w : workers) w.join();
    }

    EvalReport rep;
    rep.mode = to_string(mode);
    rep.seed = seed;
    std::array<std::array<int, 3>, 3> successes{};
    for (const auto& o : outcomes) {
        rep.episode_rewards.push_back(o.cum_reward);
        rep.grid_counts[o.start_cluster][o.goal_cluster] += 1;
        successes[o.start_cluster][o.goal_cluster] += o.success ? 1 : 0;
    }
    for (int s = 0; s < 3; ++s)
        for (int g = 0; g < 3; ++g)
            rep.success_grid[s][g] = rep.grid_counts[s][g] > 0
                                         ? static_cast<double>(successes[s][g]) /
                                               rep.grid_counts[s][g]
                                         : 0.0;
    double sum = 0.0;
    for (double r : rep.episode_rewards) sum += r;
    rep.mean = sum / static_cast<double>(rep.episode_rewards.size());
    double sq = 0.0;
    for (double r : rep.episode_rewards) sq += (r - rep.mean) * (r - rep.mean);
    rep.stddev = rep.episode_rewards.size() > 1
                     ? std::sqrt(sq / static_cast<double>(rep.episode_rewards.size() - 1))
                     : 0.0;
    return rep;
}

inline void save_report(const std::string& path, const EvalReport& rep) {
    nlohmann::json j;
    j["episode_rewards"] = rep.episode_rewards;
    j["mean"] = rep.mean;
    j["stddev"] = rep.stddev;
    j["success_grid"] = rep.success_grid;
    j["grid_counts"] = rep.grid_counts;
    j["algorithm"] = rep.algorithm;
    j["seed"] = rep.seed;
    j["checkpoint_id"] = rep.checkpoint_id;
    j["mode"] = rep.mode;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_report: cannot open " + path);
    out << j.dump(2) << '\n';
}

inline EvalReport load_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_report: cannot open " + path);
    nlohmann::json j;
    in >> j;
    EvalReport rep;
    rep.episode_rewards = j.at("episode_rewards").get<std::vector<double>>();
    rep.mean = j.at("mean");
    rep.stddev = j.at("stddev");
    rep.success_grid = j.at("success_grid");
    rep.grid_counts = j.at("grid_counts");
    rep.algorithm = j.at("algorithm");
    rep.seed = j.at("seed");
    rep.checkpoint_id = j.at("checkpoint_id");
    rep.mode = j.at("mode");
    return rep;
}

inline void save_comparison(const std::string& path, const ComparisonResult& c) {
    nlohmann::json j;
    j["mean_diff"] = c.mean_diff;
    j["t"] = c.t;
    j["dof"] = c.dof;
    j["p"] = c.p;
    j["significant"] = c.significant;
    j["degenerate"] = c.degenerate;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_comparison: cannot open " + path);
    out << j.dump(2) << '\n';
}

} // namespace gcrl
