#pragma once

#include <cmath>
#include <stdexcept>

#include "gcrl/mlp.hpp"

namespace gcrl {

/// Adam moments for one network. Moment arrays mirror the parameter shapes.
struct OptimizerState {
    std::vector<Mat> m_weights, v_weights;
    std::vector<Vec> m_biases, v_biases;
    long step_count = 0;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static OptimizerState for_params(const MlpParams& p, double lr = 1e-3) {
        OptimizerState s;
        s.learning_rate = lr;
        for (int l = 0; l < p.num_layers(); ++l) {
            s.m_weights.push_back(Mat::Zero(p.weights[l].rows(), p.weights[l].cols()));
            s.v_weights.push_back(Mat::Zero(p.weights[l].rows(), p.weights[l].cols()));
            s.m_biases.push_back(Vec::Zero(p.biases[l].size()));
            s.v_biases.push_back(Vec::Zero(p.biases[l].size()));
        }
        return s;
    }
};

/// One bias-corrected Adam update in place. Rejects non-finite gradients
/// before touching any state.
inline void adam_step(MlpParams& p, const GradBundle& g, OptimizerState& opt) {
    if (static_cast<int>(g.weights.size()) != p.num_layers())
        throw std::invalid_argument("adam_step: gradient layer count mismatch");
    for (int l = 0; l < p.num_layers(); ++l) {
        if (g.weights[l].rows() != p.weights[l].rows() ||
            g.weights[l].cols() != p.weights[l].cols() ||
            g.biases[l].size() != p.biases[l].size())
            throw std::invalid_argument("adam_step: gradient shape mismatch");
    }
    if (!g.finite())
        throw std::runtime_error("adam_step: non-finite gradient, update rejected");

    opt.step_count += 1;
    const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step_count));
    const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step_count));

    // single fused pass per block: m and v moment updates plus the
    // bias-corrected parameter step
    const double b1 = opt.beta1, b2 = opt.beta2;
    const double lr_bc = opt.learning_rate / bc1;
    const double inv_sqrt_bc2 = 1.0 / std::sqrt(bc2);
    auto update = [&](double* __restrict pp, double* __restrict mp, double* __restrict vp,
                      const double* __restrict gp, Eigen::Index n) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const double gi = gp[i];
            const double mi = b1 * mp[i] + (1.0 - b1) * gi;
            const double vi = b2 * vp[i] + (1.0 - b2) * gi * gi;
            mp[i] = mi;
            vp[i] = vi;
            pp[i] -= lr_bc * mi / (std::sqrt(vi) * inv_sqrt_bc2 + opt.eps);
        }
    };
    for (int l = 0; l < p.num_layers(); ++l) {
        update(p.weights[l].data(), opt.m_weights[l].data(), opt.v_weights[l].data(),
               g.weights[l].data(), p.weights[l].size());
        update(p.biases[l].data(), opt.m_biases[l].data(), opt.v_biases[l].data(),
               g.biases[l].data(), p.biases[l].size());
    }
}

/// rho * target + (1 - rho) * online, element-wise over all parameters.
inline MlpParams polyak_blend(const MlpParams& target, const MlpParams& online, double rho) {
    if (!target.same_shape(online))
        throw std::invalid_argument("polyak_blend: shape mismatch");
    if (rho < 0.0 || rho > 1.0)
        throw std::invalid_argument("polyak_blend: rho must be in [0, 1]");
    MlpParams out = target;
    for (int l = 0; l < target.num_layers(); ++l) {
        out.weights[l] = rho * target.weights[l] + (1.0 - rho) * online.weights[l];
        out.biases[l] = rho * target.biases[l] + (1.0 - rho) * online.biases[l];
    }
    return out;
}

} // namespace gcrl
