#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "gcrl/adam.hpp"
#include "gcrl/dataset.hpp"
#include "gcrl/mlp.hpp"
#include "gcrl/rng.hpp"

namespace gcrl {

enum class VTargetMode { next_state, same_state };

struct TrainConfig {
    double gamma = 1.0; // undiscounted; value bounds come from the horizon
    int horizon = 60;
    int batch_size = 512;
    double learning_rate = 1e-3;
    double polyak_rho = 0.95;
    int target_update_every = 10;
    double her_ratio = 0.5;
    bool swap_enabled = true;
    double adv_clip = 100.0;
    long total_steps = 20000;
    std::uint64_t seed = 0;
    VTargetMode v_target_mode = VTargetMode::next_state;
    SwapGoalSource swap_source = SwapGoalSource::trajectory_task_goal;
    std::vector<int> hidden_dims{256, 256};
    double action_bound = 2.0;

    void validate() const {
        if (gamma != 1.0) throw std::invalid_argument("config: gamma is fixed at 1");
        if (horizon < 1 || batch_size < 2 || batch_size % 2 != 0)
            throw std::invalid_argument("config: bad horizon or batch size");
        if (learning_rate <= 0 || polyak_rho < 0 || polyak_rho > 1)
            throw std::invalid_argument("config: bad learning rate or polyak weight");
        if (target_update_every < 1 || adv_clip <= 0 || total_steps < 1)
            throw std::invalid_argument("config: bad update interval, clip, or steps");
        if (her_ratio < 0 || her_ratio > 1)
            throw std::invalid_argument("config: her_ratio in [0,1]");
        if (hidden_dims.empty()) throw std::invalid_argument("config: no hidden layers");
        if (action_bound <= 0) throw std::invalid_argument("config: bad action bound");
    }

    SamplerOptions sampler_options() const {
        SamplerOptions s;
        s.batch_size = batch_size;
        s.her_ratio = her_ratio;
        s.swap_enabled = swap_enabled;
        s.swap_source = swap_source;
        return s;
    }

    std::vector<int> dims(int in, int out) const {
        std::vector<int> d{in};
        d.insert(d.end(), hidden_dims.begin(), hidden_dims.end());
        d.push_back(out);
        return d;
    }
};

/// Policy, double Q, double V, and their target copies, with one Adam state
/// per online network. Targets start as exact copies.
struct AgentNets {
    MlpParams policy;
    MlpParams q1, q2, v1, v2;
    MlpParams q1_t, q2_t, v1_t, v2_t;
    OptimizerState opt_policy, opt_q1, opt_q2, opt_v1, opt_v2;

    static AgentNets init(const TrainConfig& cfg, Rng& rng) {
        AgentNets n;
        n.policy = MlpParams::he_uniform(cfg.dims(4, 2), OutputActivation::tanh_scaled,
                                         cfg.action_bound, rng);
        n.q1 = MlpParams::he_uniform(cfg.dims(6, 1), OutputActivation::identity, 1.0, rng);
        n.q2 = MlpParams::he_uniform(cfg.dims(6, 1), OutputActivation::identity, 1.0, rng);
        n.v1 = MlpParams::he_uniform(cfg.dims(4, 1), OutputActivation::identity, 1.0, rng);
        n.v2 = MlpParams::he_uniform(cfg.dims(4, 1), OutputActivation::identity, 1.0, rng);
        n.q1_t = n.q1;
        n.q2_t = n.q2;
        n.v1_t = n.v1;
        n.v2_t = n.v2;
        n.opt_policy = OptimizerState::for_params(n.policy, cfg.learning_rate);
        n.opt_q1 = OptimizerState::for_params(n.q1, cfg.learning_rate);
        n.opt_q2 = OptimizerState::for_params(n.q2, cfg.learning_rate);
        n.opt_v1 = OptimizerState::for_params(n.v1, cfg.learning_rate);
        n.opt_v2 = OptimizerState::for_params(n.v2, cfg.learning_rate);
        return n;
    }
};

struct StepMetrics {
    long step = 0;
    double loss_q1 = 0.0, loss_q2 = 0.0, loss_v1 = 0.0, loss_v2 = 0.0;
    double loss_pi = 0.0;
    double lambda = 0.0;
    double mean_w = 0.0;
    bool skipped = false;
};

struct CriticLosses {
    double q1 = 0.0, q2 = 0.0, v1 = 0.0, v2 = 0.0;
};

namespace detail {

inline Mat hcat(const Mat& a, const Mat& b) {
    Mat out(a.rows(), a.cols() + b.cols());
    out.leftCols(a.cols()) = a;
    out.rightCols(b.cols()) = b;
    return out;
}

inline Mat hcat(const Mat& a, const Mat& b, const Mat& c) {
    Mat out(a.rows(), a.cols() + b.cols() + c.cols());
    out.leftCols(a.cols()) = a;
    out.middleCols(a.cols(), b.cols()) = b;
    out.rightCols(c.cols()) = c;
    return out;
}

inline Vec scalar_forward(const MlpParams& net, const Mat& X) {
    ForwardCache cache;
    return forward_batch(net, X, cache).col(0);
}

inline void clamp_targets(Vec& y, double horizon) {
    y = y.cwiseMax(-horizon).cwiseMin(0.0);
    if (!y.allFinite()) throw std::runtime_error("targets: non-finite network output");
}

/// Mean squared error of a scalar critic against targets y, with optional
/// exact parameter gradients. Targets are constants here.
inline double critic_loss_and_grad(const MlpParams& net, const Mat& X, const Vec& y,
                                   GradBundle* grads) {
    ForwardCache cache;
    const Vec pred = forward_batch(net, X, cache).col(0);
    const Vec err = pred - y;
    const double loss = err.squaredNorm() / static_cast<double>(err.size());
    if (grads) {
        Mat gout(err.size(), 1);
        gout.col(0) = 2.0 * err / static_cast<double>(err.size());
        backward_batch(net, cache, gout, grads);
    }
    return loss;
}

/// One Adam step of a scalar critic on mean squared error against y.
inline double critic_mse_step(MlpParams& net, OptimizerState& opt, const Mat& X,
                              const Vec& y) {
    GradBundle grads = GradBundle::zeros_like(net);
    const double loss = critic_loss_and_grad(net, X, y, &grads);
    adam_step(net, grads, opt);
    return loss;
}

} // namespace detail

/// Q regression targets: r + (1-d) * min of the target V nets at the next
/// state, clamped into [-H, 0].
inline Vec q_targets(const MiniBatch& mb, const AgentNets& nets, const TrainConfig& cfg) {
    const Mat X2 = detail::hcat(mb.next_state, mb.goal);
    const Vec vt1 = detail::scalar_forward(nets.v1_t, X2);
    const Vec vt2 = detail::scalar_forward(nets.v2_t, X2);
    Vec y = mb.reward.array() +
            cfg.gamma * mb.not_done.array() * vt1.cwiseMin(vt2).array();
    detail::clamp_targets(y, cfg.horizon);
    return y;
}

/// V regression targets. next_state mode bootstraps r + (1-d) * min of the
/// target Q nets at (s', g, pi(s', g)); same_state mode regresses directly on
/// min of the online Q nets at (s, g, pi(s, g)). Both clamp into [-H, 0].
inline Vec v_targets(const MiniBatch& mb, const AgentNets& nets, const TrainConfig& cfg) {
    Vec y;
    if (cfg.v_target_mode == VTargetMode::next_state) {
        const Mat X2 = detail::hcat(mb.next_state, mb.goal);
        ForwardCache pc;
        const Mat a2 = forward_batch(nets.policy, X2, pc);
        const Mat Xq = detail::hcat(mb.next_state, mb.goal, a2);
        const Vec qt1 = detail::scalar_forward(nets.q1_t, Xq);
        const Vec qt2 = detail::scalar_forward(nets.q2_t, Xq);
        y = mb.reward.array() +
            cfg.gamma * mb.not_done.array() * qt1.cwiseMin(qt2).array();
    } else {
        const Mat X = detail::hcat(mb.state, mb.goal);
        ForwardCache pc;
        const Mat a = forward_batch(nets.policy, X, pc);
        const Mat Xq = detail::hcat(mb.state, mb.goal, a);
        const Vec q1 = detail::scalar_forward(nets.q1, Xq);
        const Vec q2 = detail::scalar_forward(nets.q2, Xq);
        y = q1.cwiseMin(q2);
    }
    detail::clamp_targets(y, cfg.horizon);
    return y;
}

/// One Adam step for each of the four critics against frozen targets.
inline CriticLosses critic_update(const MiniBatch& mb, AgentNets& nets,
                                  const TrainConfig& cfg) {
    CriticLosses losses;
    const Vec yq = q_targets(mb, nets, cfg);
    const Mat Xq = detail::hcat(mb.state, mb.goal, mb.action);
    losses.q1 = detail::critic_mse_step(nets.q1, nets.opt_q1, Xq, yq);
    losses.q2 = detail::critic_mse_step(nets.q2, nets.opt_q2, Xq, yq);

    const Vec yv = v_targets(mb, nets, cfg);
    const Mat Xv = detail::hcat(mb.state, mb.goal);
    losses.v1 = detail::critic_mse_step(nets.v1, nets.opt_v1, Xv, yv);
    losses.v2 = detail::critic_mse_step(nets.v2, nets.opt_v2, Xv, yv);
    return losses;
}

/// Per-row advantage weights min(exp(Q1 - V1), clip). The exponent is capped
/// before exponentiation so overflow cannot occur; weights stay in (0, clip].
inline Vec advantage_weights(const MiniBatch& mb, const AgentNets& nets,
                             const TrainConfig& cfg) {
    const Vec q = detail::scalar_forward(nets.q1, detail::hcat(mb.state, mb.goal, mb.action));
    const Vec v = detail::scalar_forward(nets.v1, detail::hcat(mb.state, mb.goal));
    const double cap = std::log(cfg.adv_clip) + 1.0;
    return (q - v).cwiseMin(cap).array().exp().min(cfg.adv_clip);
}

/// Batch-adaptive scale for the policy gradient term: the inverse mean
/// absolute Q over the stored actions, 1 for degenerate batches.
inline double lambda_scale(const MiniBatch& mb, const AgentNets& nets) {
    const Vec q = detail::scalar_forward(nets.q1, detail::hcat(mb.state, mb.goal, mb.action));
    const double mean_abs = q.cwiseAbs().mean();
    return mean_abs < 1e-8 ? 1.0 : 1.0 / mean_abs;
}

/// Policy objective mean_i [ w_i * MSE(pi(s,g), a_i) - lambda * Q(s,g,pi(s,g)) ]
/// and its exact gradient with respect to the policy parameters. The
/// action-gradient of Q flows into the policy; Q's own parameters are left
/// untouched.
inline double policy_loss_and_grad(const MiniBatch& mb, const MlpParams& policy,
                                   const MlpParams& q_net, const Vec& weights,
                                   double lambda, GradBundle* grads) {
    const int B = mb.size();
    if (weights.size() != B) throw std::invalid_argument("policy update: weight length");
    const Mat X = detail::hcat(mb.state, mb.goal);
    ForwardCache pc;
    const Mat a_pi = forward_batch(policy, X, pc);
    const Mat diff = a_pi - mb.action;

    const Mat Xq = detail::hcat(mb.state, mb.goal, a_pi);
    ForwardCache qc;
    const Vec q_pred = forward_batch(q_net, Xq, qc).col(0);

    const int act_dim = static_cast<int>(a_pi.cols());
    const Vec mse_rows = diff.array().square().rowwise().mean();
    const double loss =
        (weights.array() * mse_rows.array()).mean() - lambda * q_pred.mean();
    if (!grads) return loss;

    // d loss / d a_pi: behavior-cloning term ...
    Mat ga = diff.array().colwise() * (weights.array() * (2.0 / (act_dim * B)));
    // ... plus the action-gradient of the Q term
    Mat gq(B, 1);
    gq.setConstant(-lambda / static_cast<double>(B));
    Mat dq_dinput;
    backward_batch(q_net, qc, gq, nullptr, &dq_dinput);
    ga += dq_dinput.rightCols(act_dim);

    backward_batch(policy, pc, ga, grads);
    return loss;
}

/// One Adam step on the shared policy objective. Returns the loss value.
inline double policy_gradient_update(const MiniBatch& mb, MlpParams& policy,
                                     OptimizerState& opt, const MlpParams& q_net,
                                     const Vec& weights, double lambda) {
    GradBundle grads = GradBundle::zeros_like(policy);
    const double loss = policy_loss_and_grad(mb, policy, q_net, weights, lambda, &grads);
    adam_step(policy, grads, opt);
    return loss;
}

/// DQAPG policy step: advantage-weighted behavior cloning plus the
/// lambda-scaled deterministic policy gradient through Q1. Shares one Q1
/// forward pass between the weights and the lambda scale; the values equal
/// advantage_weights() and lambda_scale() exactly.
inline double policy_update(const MiniBatch& mb, AgentNets& nets, const TrainConfig& cfg,
                            double* lambda_out = nullptr, double* mean_w_out = nullptr) {
    const Vec q = detail::scalar_forward(nets.q1, detail::hcat(mb.state, mb.goal, mb.action));
    const Vec v = detail::scalar_forward(nets.v1, detail::hcat(mb.state, mb.goal));
    const double cap = std::log(cfg.adv_clip) + 1.0;
    const Vec w = (q - v).cwiseMin(cap).array().exp().min(cfg.adv_clip);
    const double mean_abs = q.cwiseAbs().mean();
    const double lambda = mean_abs < 1e-8 ? 1.0 : 1.0 / mean_abs;
    if (lambda_out) *lambda_out = lambda;
    if (mean_w_out) *mean_w_out = w.mean();
    return policy_gradient_update(mb, nets.policy, nets.opt_policy, nets.q1, w, lambda);
}

/// One full training step, 1-based step_index: sample, update critics, update
/// the policy, and blend all four targets every target_update_every steps.
inline StepMetrics train_step(long step_index, const OfflineDataset& ds,
                              const OfflineDataset::FlatIndex& idx, AgentNets& nets,
                              const TrainConfig& cfg, Rng& rng) {
    const MiniBatch mb = sample_batch(ds, idx, cfg.sampler_options(), rng);
    StepMetrics m;
    m.step = step_index;
    const CriticLosses cl = critic_update(mb, nets, cfg);
    m.loss_q1 = cl.q1;
    m.loss_q2 = cl.q2;
    m.loss_v1 = cl.v1;
    m.loss_v2 = cl.v2;
    m.loss_pi = policy_update(mb, nets, cfg, &m.lambda, &m.mean_w);
    if (step_index % cfg.target_update_every == 0) {
        nets.q1_t = polyak_blend(nets.q1_t, nets.q1, cfg.polyak_rho);
        nets.q2_t = polyak_blend(nets.q2_t, nets.q2, cfg.polyak_rho);
        nets.v1_t = polyak_blend(nets.v1_t, nets.v1, cfg.polyak_rho);
        nets.v2_t = polyak_blend(nets.v2_t, nets.v2, cfg.polyak_rho);
    }
    return m;
}

} // namespace gcrl
