#pragma once

#include "gcrl/agent.hpp"

namespace gcrl {

enum class BaselineKind { td3bc, gcsl };

/// TD3+BC-style learner: policy plus double Q with targets, no V nets.
struct Td3bcNets {
    MlpParams policy;
    MlpParams q1, q2, q1_t, q2_t;
    OptimizerState opt_policy, opt_q1, opt_q2;

    static Td3bcNets init(const TrainConfig& cfg, Rng& rng) {
        Td3bcNets n;
        n.policy = MlpParams::he_uniform(cfg.dims(4, 2), OutputActivation::tanh_scaled,
                                         cfg.action_bound, rng);
        n.q1 = MlpParams::he_uniform(cfg.dims(6, 1), OutputActivation::identity, 1.0, rng);
        n.q2 = MlpParams::he_uniform(cfg.dims(6, 1), OutputActivation::identity, 1.0, rng);
        n.q1_t = n.q1;
        n.q2_t = n.q2;
        n.opt_policy = OptimizerState::for_params(n.policy, cfg.learning_rate);
        n.opt_q1 = OptimizerState::for_params(n.q1, cfg.learning_rate);
        n.opt_q2 = OptimizerState::for_params(n.q2, cfg.learning_rate);
        return n;
    }
};

/// Clipped double-Q targets r + (1-d) * min Q_tar(s', g, pi(s', g)), clamped
/// into [-H, 0] like the rest of the value functions.
inline Vec td3bc_q_targets(const MiniBatch& mb, const Td3bcNets& nets,
                           const TrainConfig& cfg) {
    const Mat X2 = detail::hcat(mb.next_state, mb.goal);
    ForwardCache pc;
    const Mat a2 = forward_batch(nets.policy, X2, pc);
    const Mat Xq = detail::hcat(mb.next_state, mb.goal, a2);
    const Vec qt1 = detail::scalar_forward(nets.q1_t, Xq);
    const Vec qt2 = detail::scalar_forward(nets.q2_t, Xq);
    Vec y = mb.reward.array() + cfg.gamma * mb.not_done.array() * qt1.cwiseMin(qt2).array();
    detail::clamp_targets(y, cfg.horizon);
    return y;
}

/// One TD3+BC step: critic regression, then the shared policy objective with
/// unit behavior-cloning weights (the advantage-weighted objective with
/// w_A = 1), then delayed target blending.
inline StepMetrics td3bc_step(long step_index, const MiniBatch& mb, Td3bcNets& nets,
                              const TrainConfig& cfg) {
    StepMetrics m;
    m.step = step_index;
    const Vec y = td3bc_q_targets(mb, nets, cfg);
    const Mat Xq = detail::hcat(mb.state, mb.goal, mb.action);
    m.loss_q1 = detail::critic_mse_step(nets.q1, nets.opt_q1, Xq, y);
    m.loss_q2 = detail::critic_mse_step(nets.q2, nets.opt_q2, Xq, y);

    const Vec q = detail::scalar_forward(nets.q1, Xq);
    const double mean_abs = q.cwiseAbs().mean();
    m.lambda = mean_abs < 1e-8 ? 1.0 : 1.0 / mean_abs;
    Vec w = Vec::Ones(mb.size());
    m.mean_w = 1.0;
    m.loss_pi =
        policy_gradient_update(mb, nets.policy, nets.opt_policy, nets.q1, w, m.lambda);

    if (step_index % cfg.target_update_every == 0) {
        nets.q1_t = polyak_blend(nets.q1_t, nets.q1, cfg.polyak_rho);
        nets.q2_t = polyak_blend(nets.q2_t, nets.q2, cfg.polyak_rho);
    }
    return m;
}

/// Supervised goal-conditioned learner: plain behavior cloning on the
/// hindsight-relabeled rows of the batch. Never reads rewards or critics.
struct GcslNets {
    MlpParams policy;
    OptimizerState opt_policy;

    static GcslNets init(const TrainConfig& cfg, Rng& rng) {
        GcslNets n;
        n.policy = MlpParams::he_uniform(cfg.dims(4, 2), OutputActivation::tanh_scaled,
                                         cfg.action_bound, rng);
        n.opt_policy = OptimizerState::for_params(n.policy, cfg.learning_rate);
        return n;
    }
};

inline StepMetrics gcsl_step(long step_index, const MiniBatch& mb, GcslNets& nets) {
    StepMetrics m;
    m.step = step_index;
    std::vector<int> rows;
    for (int i = 0; i < mb.size(); ++i)
        if (mb.tag[i] == RowTag::hindsight) rows.push_back(i);
    if (rows.empty()) {
        m.skipped = true;
        return m;
    }
    const int n = static_cast<int>(rows.size());
    Mat X(n, 4), A(n, 2);
    for (int k = 0; k < n; ++k) {
        X(k, 0) = mb.state(rows[k], 0);
        X(k, 1) = mb.state(rows[k], 1);
        X(k, 2) = mb.goal(rows[k], 0);
        X(k, 3) = mb.goal(rows[k], 1);
        A.row(k) = mb.action.row(rows[k]);
    }
    ForwardCache pc;
    const Mat a_pi = forward_batch(nets.policy, X, pc);
    const Mat diff = a_pi - A;
    const int act_dim = static_cast<int>(a_pi.cols());
    m.loss_pi = diff.array().square().rowwise().mean().mean();
    Mat ga = diff * (2.0 / (act_dim * n));
    GradBundle grads = GradBundle::zeros_like(nets.policy);
    backward_batch(nets.policy, pc, ga, &grads);
    adam_step(nets.policy, grads, nets.opt_policy);
    return m;
}

} // namespace gcrl
