#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gcrl/rng.hpp"

namespace gcrl {

// Row-major throughout: rows are batch samples and serialization is row-major.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

enum class OutputActivation { identity, tanh_scaled };

/// Parameters of a fixed-topology fully connected network with ReLU hidden
/// units. Weights are stored [out x in] per layer, so layer l maps
/// layer_dims[l] -> layer_dims[l+1] via y = W x + b.
struct MlpParams {
    std::vector<int> layer_dims;
    std::vector<Mat> weights;
    std::vector<Vec> biases;
    OutputActivation output_activation = OutputActivation::identity;
    double output_scale = 1.0; // tanh head emits output_scale * tanh(z)

    int num_layers() const { return static_cast<int>(weights.size()); }
    int input_dim() const { return layer_dims.front(); }
    int output_dim() const { return layer_dims.back(); }

    bool same_shape(const MlpParams& o) const {
        return layer_dims == o.layer_dims &&
               output_activation == o.output_activation &&
               output_scale == o.output_scale;
    }

    bool finite() const {
        for (const auto& w : weights)
            if (!w.allFinite()) return false;
        for (const auto& b : biases)
            if (!b.allFinite()) return false;
        return true;
    }

    static MlpParams zeros(std::vector<int> dims,
                           OutputActivation act = OutputActivation::identity,
                           double scale = 1.0) {
        check_dims(dims);
        MlpParams p;
        p.layer_dims = std::move(dims);
        p.output_activation = act;
        p.output_scale = scale;
        for (std::size_t l = 0; l + 1 < p.layer_dims.size(); ++l) {
            p.weights.push_back(Mat::Zero(p.layer_dims[l + 1], p.layer_dims[l]));
            p.biases.push_back(Vec::Zero(p.layer_dims[l + 1]));
        }
        return p;
    }

    /// Seeded uniform fan-in initialization, bound sqrt(6 / fan_in); zero biases.
    static MlpParams he_uniform(std::vector<int> dims, OutputActivation act,
                                double scale, Rng& rng) {
        MlpParams p = zeros(std::move(dims), act, scale);
        for (int l = 0; l < p.num_layers(); ++l) {
            const double bound = std::sqrt(6.0 / p.layer_dims[l]);
            for (Eigen::Index r = 0; r < p.weights[l].rows(); ++r)
                for (Eigen::Index c = 0; c < p.weights[l].cols(); ++c)
                    p.weights[l](r, c) = rng.uniform(-bound, bound);
        }
        return p;
    }

private:
    static void check_dims(const std::vector<int>& dims) {
        if (dims.size() < 2)
            throw std::invalid_argument("MlpParams: need at least input and output dims");
        for (int d : dims)
            if (d <= 0) throw std::invalid_argument("MlpParams: layer dims must be positive");
    }
};

/// Per-parameter gradients, shape-congruent with an MlpParams.
struct GradBundle {
    std::vector<Mat> weights;
    std::vector<Vec> biases;

    static GradBundle zeros_like(const MlpParams& p) {
        GradBundle g;
        for (int l = 0; l < p.num_layers(); ++l) {
            g.weights.push_back(Mat::Zero(p.weights[l].rows(), p.weights[l].cols()));
            g.biases.push_back(Vec::Zero(p.biases[l].size()));
        }
        return g;
    }

    bool finite() const {
        for (const auto& w : weights)
            if (!w.allFinite()) return false;
        for (const auto& b : biases)
            if (!b.allFinite()) return false;
        return true;
    }
};

/// Activations recorded by forward_batch, consumed by backward_batch.
/// acts[0] is the input batch; acts[l+1] the post-activation of layer l.
/// ReLU and the tanh head are both recoverable from post-activations alone.
struct ForwardCache {
    std::vector<Mat> acts;
};

namespace detail {
inline void apply_output_activation(const MlpParams& p, Mat& z) {
    if (p.output_activation == OutputActivation::tanh_scaled)
        z = p.output_scale * z.array().tanh();
}
} // namespace detail

/// Batched forward pass: X is [B x input_dim], returns [B x output_dim].
inline const Mat& forward_batch(const MlpParams& p, const Mat& X, ForwardCache& cache) {
    if (X.cols() != p.input_dim())
        throw std::invalid_argument("forward: input has " + std::to_string(X.cols()) +
                                    " columns, expected " + std::to_string(p.input_dim()));
    cache.acts.assign(1, X);
    cache.acts.reserve(p.num_layers() + 1);
    for (int l = 0; l < p.num_layers(); ++l) {
        Mat z = cache.acts.back() * p.weights[l].transpose();
        if (l + 1 < p.num_layers()) {
            z = (z.rowwise() + p.biases[l].transpose()).cwiseMax(0.0);
        } else {
            z.rowwise() += p.biases[l].transpose();
            detail::apply_output_activation(p, z);
        }
        cache.acts.push_back(std::move(z));
    }
    return cache.acts.back();
}

/// Reverse-mode gradients of sum_i output_i . Gout_i for a cached forward pass.
/// Writes parameter gradients into *grads when non-null and the gradient with
/// respect to the input batch into *input_grad when non-null.
inline void backward_batch(const MlpParams& p, const ForwardCache& cache, const Mat& Gout,
                           GradBundle* grads, Mat* input_grad = nullptr) {
    const int L = p.num_layers();
    if (static_cast<int>(cache.acts.size()) != L + 1)
        throw std::invalid_argument("backward: cache does not match network");
    if (Gout.rows() != cache.acts[0].rows() || Gout.cols() != p.output_dim())
        throw std::invalid_argument("backward: output grad shape mismatch");

    Mat g;
    if (p.output_activation == OutputActivation::tanh_scaled) {
        // y = s*tanh(z)  =>  dy/dz = s - y^2/s
        g = Gout.array() *
            (p.output_scale - cache.acts[L].array().square() / p.output_scale);
    } else {
        g = Gout;
    }

    for (int l = L - 1; l >= 0; --l) {
        if (grads) {
            grads->weights[l].noalias() = g.transpose() * cache.acts[l];
            grads->biases[l] = g.colwise().sum();
        }
        if (l > 0) {
            Mat gprev = g * p.weights[l];
            g = gprev.array() * (cache.acts[l].array() > 0.0).cast<double>();
        } else if (input_grad) {
            input_grad->noalias() = g * p.weights[0];
        }
    }
}

/// Single-vector forward pass.
inline Vec forward(const MlpParams& p, const Vec& input) {
    ForwardCache cache;
    Mat X(1, input.size());
    X.row(0) = input.transpose();
    return forward_batch(p, X, cache).row(0).transpose();
}

/// Single-vector reverse pass: gradients of output . output_grad with respect
/// to every parameter and to the input.
inline GradBundle backward(const MlpParams& p, const Vec& input, const Vec& output_grad,
                           Vec* input_grad = nullptr) {
    ForwardCache cache;
    Mat X(1, input.size());
    X.row(0) = input.transpose();
    forward_batch(p, X, cache);
    Mat G(1, output_grad.size());
    if (output_grad.size() != p.output_dim())
        throw std::invalid_argument("backward: output grad length mismatch");
    G.row(0) = output_grad.transpose();
    GradBundle grads = GradBundle::zeros_like(p);
    Mat din;
    backward_batch(p, cache, G, &grads, input_grad ? &din : nullptr);
    if (input_grad) *input_grad = din.row(0).transpose();
    return grads;
}

} // namespace gcrl
