#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gcrl/maze.hpp"
#include "gcrl/mlp.hpp"
#include "gcrl/rng.hpp"

namespace gcrl {

/// One stored step. The achieved goals are the goal-space projections of the
/// states; for this environment the projection is the position itself.
struct Transition {
    Vec2 goal;
    Vec2 state;
    Vec2 achieved; // phi(state)
    Vec2 action;
    double reward = -1.0; // 0 or -1
    Vec2 next_state;
    Vec2 next_achieved; // phi(next_state)
    bool done = false;

    friend bool operator==(const Transition& a, const Transition& b) {
        return a.goal == b.goal && a.state == b.state && a.achieved == b.achieved &&
               a.action == b.action && a.reward == b.reward &&
               a.next_state == b.next_state && a.next_achieved == b.next_achieved &&
               a.done == b.done;
    }
};

struct Trajectory {
    std::vector<Transition> steps;
    Vec2 task_goal;
    std::string source = "expert"; // expert | random
    std::uint64_t seed = 0;        // in-memory provenance, not serialized
};

struct OfflineDataset {
    std::vector<Trajectory> trajectories;
    double epsilon = 2.0;
    std::string provenance;

    std::size_t transition_count() const {
        std::size_t n = 0;
        for (const auto& t : trajectories) n += t.steps.size();
        return n;
    }

    /// Flat (trajectory, step) index used for uniform sampling.
    struct FlatIndex {
        std::vector<std::uint32_t> traj, step;
    };
    FlatIndex flat_index() const {
        FlatIndex idx;
        idx.traj.reserve(transition_count());
        idx.step.reserve(transition_count());
        for (std::uint32_t ti = 0; ti < trajectories.size(); ++ti)
            for (std::uint32_t si = 0; si < trajectories[ti].steps.size(); ++si) {
                idx.traj.push_back(ti);
                idx.step.push_back(si);
            }
        return idx;
    }
};

// --------------------------------------------------------------------------
// Generation
// --------------------------------------------------------------------------

/// Roll out the noisy expert n_per_path times along each of the three fixed
/// start-goal pairings (A->3, B->2, C->1). Episodes end at first success or
/// at the horizon.
inline OfflineDataset generate_dataset(const MazeSpec& spec, int n_per_path,
                                       double noise_scale, std::uint64_t seed) {
    if (n_per_path < 1) throw std::invalid_argument("generate_dataset: n_per_path >= 1");
    static constexpr int kPairings[3][2] = {{0, 2}, {1, 1}, {2, 0}};

    OfflineDataset ds;
    ds.epsilon = spec.epsilon;
    ds.provenance = "expert astar, noise " + std::to_string(noise_scale);
    for (int pi = 0; pi < 3; ++pi) {
        for (int k = 0; k < n_per_path; ++k) {
            Rng rng = derive_rng(seed, {static_cast<std::uint64_t>(pi),
                                        static_cast<std::uint64_t>(k)});
            EnvState st = reset(spec, rng, kPairings[pi][0], kPairings[pi][1]);
            Trajectory traj;
            traj.task_goal = st.task_goal;
            traj.source = "expert";
            traj.seed = seed;
            for (int t = 0; t < spec.horizon; ++t) {
                const Vec2 a = expert_action(spec, st, noise_scale, rng);
                const StepResult r = step(spec, st, a);
                Transition tr;
                tr.goal = st.task_goal;
                tr.state = st.position;
                tr.achieved = st.position;
                tr.action = a;
                tr.reward = r.train_reward;
                tr.next_state = r.next.position;
                tr.next_achieved = r.next.position;
                tr.done = r.done;
                traj.steps.push_back(tr);
                st = r.next;
                if (r.done) break;
            }
            ds.trajectories.push_back(std::move(traj));
        }
    }
    return ds;
}

// --------------------------------------------------------------------------
// Serialization: JSON Lines, one trajectory per line.
// --------------------------------------------------------------------------

inline void save_dataset(const std::string& path, const OfflineDataset& ds) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_dataset: cannot open " + path);
    for (const auto& traj : ds.trajectories) {
        nlohmann::json line;
        line["task_goal"] = {traj.task_goal.x, traj.task_goal.y};
        line["source"] = traj.source;
        nlohmann::json steps = nlohmann::json::array();
        for (const auto& t : traj.steps) {
            steps.push_back({{"s", {t.state.x, t.state.y}},
                             {"a", {t.action.x, t.action.y}},
                             {"r", t.reward},
                             {"s2", {t.next_state.x, t.next_state.y}},
                             {"ag", {t.achieved.x, t.achieved.y}},
                             {"ag2", {t.next_achieved.x, t.next_achieved.y}},
                             {"d", t.done}});
        }
        line["steps"] = std::move(steps);
        out << line.dump() << '\n';
    }
    if (!out) throw std::runtime_error("save_dataset: write failed for " + path);
}

inline OfflineDataset load_dataset(const std::string& path, double epsilon = 2.0) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_dataset: cannot open " + path);
    OfflineDataset ds;
    ds.epsilon = epsilon;
    std::string line;
    auto vec2 = [](const nlohmann::json& j) { return Vec2{j.at(0), j.at(1)}; };
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        Trajectory traj;
        traj.task_goal = vec2(j.at("task_goal"));
        traj.source = j.at("source");
        for (const auto& s : j.at("steps")) {
            Transition t;
            t.state = vec2(s.at("s"));
            t.action = vec2(s.at("a"));
            t.reward = s.at("r");
            t.next_state = vec2(s.at("s2"));
            t.achieved = vec2(s.at("ag"));
            t.next_achieved = vec2(s.at("ag2"));
            t.done = s.at("d");
            t.goal = traj.task_goal;
            traj.steps.push_back(t);
        }
        ds.trajectories.push_back(std::move(traj));
    }
    if (ds.trajectories.empty()) throw std::runtime_error("load_dataset: empty dataset");
    return ds;
}

// --------------------------------------------------------------------------
// Augmentation
// --------------------------------------------------------------------------

inline double sparse_reward(Vec2 achieved_next, Vec2 goal, double epsilon) {
    return distance(achieved_next, goal) < epsilon ? 0.0 : -1.0;
}

/// Hindsight relabel of step t: the new goal is the achieved goal of the next
/// state of a uniformly chosen step i in [t, len-1]. Reward and done are
/// recomputed; state, action and successor are untouched.
inline Transition relabel_hindsight(const Trajectory& traj, std::size_t t, double epsilon,
                                    Rng& rng) {
    if (t >= traj.steps.size()) throw std::invalid_argument("relabel_hindsight: bad index");
    const std::size_t span = traj.steps.size() - t;
    const std::size_t i = t + rng.index(span);
    Transition out = traj.steps[t];
    out.goal = traj.steps[i].next_achieved;
    out.reward = sparse_reward(out.next_achieved, out.goal, epsilon);
    out.done = out.reward == 0.0;
    return out;
}

/// Goal swap: replace the commanded goal and recompute reward and done.
inline Transition swap_goal(const Transition& tr, Vec2 g_rand, double epsilon) {
    Transition out = tr;
    out.goal = g_rand;
    out.reward = sparse_reward(out.next_achieved, g_rand, epsilon);
    out.done = out.reward == 0.0;
    return out;
}

// --------------------------------------------------------------------------
// Minibatch sampling
// --------------------------------------------------------------------------

enum class RowTag : std::uint8_t { original = 0, hindsight = 1, swapped = 2 };

/// Where swapped goals come from: the task goal of a random trajectory, or
/// the achieved goal of a random stored state.
enum class SwapGoalSource { trajectory_task_goal, random_achieved_goal };

/// Column-block layout ready for the networks: row i of each matrix is one
/// transition.
struct MiniBatch {
    Mat state;         // B x 2
    Mat goal;          // B x 2
    Mat action;        // B x 2
    Mat next_state;    // B x 2
    Vec reward;        // B
    Vec not_done;      // B, 1 - done
    std::vector<RowTag> tag;

    int size() const { return static_cast<int>(state.rows()); }
};

struct SamplerOptions {
    int batch_size = 512;
    double her_ratio = 0.5;
    bool swap_enabled = true;
    SwapGoalSource swap_source = SwapGoalSource::trajectory_task_goal;
};

/// Uniform minibatch over all stored transitions. Rows are hindsight
/// relabeled with probability her_ratio; when swapping is on, exactly B/2
/// rows (a uniform subset) get a random trajectory's goal instead. The two
/// augmentations never stack on the same row.
inline MiniBatch sample_batch(const OfflineDataset& ds, const OfflineDataset::FlatIndex& idx,
                              const SamplerOptions& opt, Rng& rng) {
    const int B = opt.batch_size;
    if (ds.trajectories.empty() || idx.traj.empty())
        throw std::invalid_argument("sample_batch: empty dataset");
    if (B <= 0 || B % 2 != 0) throw std::invalid_argument("sample_batch: batch size must be even");
    if (opt.her_ratio < 0.0 || opt.her_ratio > 1.0)
        throw std::invalid_argument("sample_batch: her_ratio in [0,1]");

    MiniBatch mb;
    mb.state.resize(B, 2);
    mb.goal.resize(B, 2);
    mb.action.resize(B, 2);
    mb.next_state.resize(B, 2);
    mb.reward.resize(B);
    mb.not_done.resize(B);
    mb.tag.assign(B, RowTag::original);

    // Choose the swapped rows first: a uniform B/2-subset via partial shuffle.
    std::vector<int> order(B);
    for (int i = 0; i < B; ++i) order[i] = i;
    std::vector<bool> swap_row(B, false);
    if (opt.swap_enabled) {
        for (int i = 0; i < B / 2; ++i) {
            const int j = i + static_cast<int>(rng.index(B - i));
            std::swap(order[i], order[j]);
            swap_row[order[i]] = true;
        }
    }

    for (int i = 0; i < B; ++i) {
        const std::size_t flat = rng.index(idx.traj.size());
        const Trajectory& traj = ds.trajectories[idx.traj[flat]];
        const std::size_t step_i = idx.step[flat];

        Transition t;
        if (swap_row[i]) {
            Vec2 g_rand;
            if (opt.swap_source == SwapGoalSource::trajectory_task_goal) {
                g_rand = ds.trajectories[rng.index(ds.trajectories.size())].task_goal;
            } else {
                const std::size_t f2 = rng.index(idx.traj.size());
                g_rand = ds.trajectories[idx.traj[f2]].steps[idx.step[f2]].achieved;
            }
            t = swap_goal(traj.steps[step_i], g_rand, ds.epsilon);
            mb.tag[i] = RowTag::swapped;
        } else if (rng.bernoulli(opt.her_ratio)) {
            t = relabel_hindsight(traj, step_i, ds.epsilon, rng);
            mb.tag[i] = RowTag::hindsight;
        } else {
            t = traj.steps[step_i];
        }

        mb.state(i, 0) = t.state.x;
        mb.state(i, 1) = t.state.y;
        mb.goal(i, 0) = t.goal.x;
        mb.goal(i, 1) = t.goal.y;
        mb.action(i, 0) = t.action.x;
        mb.action(i, 1) = t.action.y;
        mb.next_state(i, 0) = t.next_state.x;
        mb.next_state(i, 1) = t.next_state.y;
        mb.reward(i) = t.reward;
        mb.not_done(i) = t.done ? 0.0 : 1.0;
    }
    return mb;
}

} // namespace gcrl
