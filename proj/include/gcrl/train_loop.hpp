#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "gcrl/agent.hpp"
#include "gcrl/baselines.hpp"
#include "gcrl/checkpoint.hpp"

namespace gcrl {

enum class Algo { dqapg, td3bc, gcsl };

inline std::string to_string(Algo a) {
    switch (a) {
    case Algo::dqapg: return "dqapg";
    case Algo::td3bc: return "td3bc";
    case Algo::gcsl: return "gcsl";
    }
    return "dqapg";
}

inline Algo algo_from_string(const std::string& s) {
    if (s == "dqapg") return Algo::dqapg;
    if (s == "td3bc") return Algo::td3bc;
    if (s == "gcsl") return Algo::gcsl;
    throw std::invalid_argument("unknown algorithm '" + s + "'");
}

inline nlohmann::json config_to_json(const TrainConfig& cfg) {
    return {{"gamma", cfg.gamma},
            {"horizon", cfg.horizon},
            {"batch_size", cfg.batch_size},
            {"learning_rate", cfg.learning_rate},
            {"polyak_rho", cfg.polyak_rho},
            {"target_update_every", cfg.target_update_every},
            {"her_ratio", cfg.her_ratio},
            {"swap_enabled", cfg.swap_enabled},
            {"adv_clip", cfg.adv_clip},
            {"total_steps", cfg.total_steps},
            {"seed", cfg.seed},
            {"v_target_mode",
             cfg.v_target_mode == VTargetMode::next_state ? "next_state" : "same_state"},
            {"swap_goal_source",
             cfg.swap_source == SwapGoalSource::trajectory_task_goal ? "task_goal"
                                                                     : "achieved"},
            {"hidden_dims", cfg.hidden_dims},
            {"action_bound", cfg.action_bound}};
}

/// Offline trainer for the three learners behind one stepping interface.
/// Owns the networks exclusively; policy snapshots are copied out by value.
class Trainer {
public:
    Trainer(Algo algo, const OfflineDataset& ds, const TrainConfig& cfg)
        : algo_(algo), cfg_(cfg), ds_(ds), idx_(ds.flat_index()),
          sample_rng_(derive_rng(cfg.seed, {2})) {
        cfg_.validate();
        if (algo_ == Algo::gcsl && cfg_.swap_enabled)
            throw std::invalid_argument("gcsl cannot use goal-swapping augmentation");
        Rng init = derive_rng(cfg_.seed, {1});
        switch (algo_) {
        case Algo::dqapg: dq_ = AgentNets::init(cfg_, init); break;
        case Algo::td3bc: td_ = Td3bcNets::init(cfg_, init); break;
        case Algo::gcsl: gc_ = GcslNets::init(cfg_, init); break;
        }
    }

    /// Run one training step; step indices are 1-based.
    StepMetrics step(long step_index) {
        if (dq_) return train_step(step_index, ds_, idx_, *dq_, cfg_, sample_rng_);
        const MiniBatch mb = sample_batch(ds_, idx_, cfg_.sampler_options(), sample_rng_);
        if (td_) return td3bc_step(step_index, mb, *td_, cfg_);
        return gcsl_step(step_index, mb, *gc_);
    }

    const MlpParams& policy() const {
        if (dq_) return dq_->policy;
        if (td_) return td_->policy;
        return gc_->policy;
    }

    Algo algo() const { return algo_; }
    const TrainConfig& config() const { return cfg_; }
    const AgentNets& agent_nets() const { return *dq_; }

    /// Write every network plus a manifest naming them and the config used.
    void save_checkpoint(const std::string& dir, long step) const {
        std::filesystem::create_directories(dir);
        nlohmann::json manifest;
        manifest["algorithm"] = to_string(algo_);
        manifest["step"] = step;
        manifest["train_config"] = config_to_json(cfg_);
        nlohmann::json nets = nlohmann::json::object();
        auto put = [&](const std::string& name, const MlpParams& p) {
            const std::string file = name + ".ckpt";
            save_mlp((std::filesystem::path(dir) / file).string(), p, cfg_.seed);
            nets[name] = file;
        };
        put("policy", policy());
        if (dq_) {
            put("q1", dq_->q1);
            put("q2", dq_->q2);
            put("v1", dq_->v1);
            put("v2", dq_->v2);
            put("q1_target", dq_->q1_t);
            put("q2_target", dq_->q2_t);
            put("v1_target", dq_->v1_t);
            put("v2_target", dq_->v2_t);
        } else if (td_) {
            put("q1", td_->q1);
            put("q2", td_->q2);
            put("q1_target", td_->q1_t);
            put("q2_target", td_->q2_t);
        }
        manifest["networks"] = std::move(nets);
        std::ofstream out(std::filesystem::path(dir) / "manifest.json");
        if (!out) throw std::runtime_error("save_checkpoint: cannot write manifest");
        out << manifest.dump(2) << '\n';
    }

private:
    Algo algo_;
    TrainConfig cfg_;
    OfflineDataset ds_;
    OfflineDataset::FlatIndex idx_;
    Rng sample_rng_;
    std::optional<AgentNets> dq_;
    std::optional<Td3bcNets> td_;
    std::optional<GcslNets> gc_;
};

struct LoadedCheckpoint {
    MlpParams policy;
    std::string algorithm;
    long step = 0;
};

inline LoadedCheckpoint load_checkpoint_policy(const std::string& dir) {
    std::ifstream in(std::filesystem::path(dir) / "manifest.json");
    if (!in) throw std::runtime_error("load_checkpoint: no manifest in " + dir);
    nlohmann::json manifest;
    in >> manifest;
    LoadedCheckpoint lc;
    lc.algorithm = manifest.at("algorithm");
    lc.step = manifest.at("step");
    const std::string file = manifest.at("networks").at("policy");
    lc.policy = load_mlp((std::filesystem::path(dir) / file).string());
    return lc;
}

inline std::string metrics_csv_header() {
    return "step,loss_q1,loss_q2,loss_v1,loss_v2,loss_pi,lambda,mean_w";
}

inline void append_metrics_csv(std::ostream& out, const StepMetrics& m) {
    out << m.step << ',' << m.loss_q1 << ',' << m.loss_q2 << ',' << m.loss_v1 << ','
        << m.loss_v2 << ',' << m.loss_pi << ',' << m.lambda << ',' << m.mean_w << '\n';
}

} // namespace gcrl
