#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "gcrl/mlp.hpp"

namespace gcrl {

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are little-endian");

/// Network checkpoint: a short text header (dims, activation tags, seed)
/// followed by every parameter as a flat little-endian f64 blob, layer by
/// layer, weights then biases, row-major. Round-trips bit-exactly.
inline void save_mlp(const std::string& path, const MlpParams& p, std::uint64_t seed = 0) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_mlp: cannot open " + path);
    out << "mlpckpt v1\n";
    out << "dims:";
    for (int d : p.layer_dims) out << ' ' << d;
    out << "\nhidden: relu\n";
    if (p.output_activation == OutputActivation::tanh_scaled) {
        std::ostringstream s;
        s.precision(17);
        s << p.output_scale;
        out << "output: tanh " << s.str() << "\n";
    } else {
        out << "output: identity\n";
    }
    out << "seed: " << seed << "\n---\n";
    for (int l = 0; l < p.num_layers(); ++l) {
        out.write(reinterpret_cast<const char*>(p.weights[l].data()),
                  static_cast<std::streamsize>(sizeof(double) * p.weights[l].size()));
        out.write(reinterpret_cast<const char*>(p.biases[l].data()),
                  static_cast<std::streamsize>(sizeof(double) * p.biases[l].size()));
    }
    if (!out) throw std::runtime_error("save_mlp: write failed for " + path);
}

inline MlpParams load_mlp(const std::string& path, std::uint64_t* seed_out = nullptr) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_mlp: cannot open " + path);
    std::string line;
    auto next_line = [&]() {
        if (!std::getline(in, line))
            throw std::runtime_error("load_mlp: truncated header in " + path);
        return line;
    };
    if (next_line() != "mlpckpt v1")
        throw std::runtime_error("load_mlp: bad magic in " + path);

    std::vector<int> dims;
    {
        std::istringstream s(next_line());
        std::string tag;
        s >> tag;
        if (tag != "dims:") throw std::runtime_error("load_mlp: expected dims line");
        int d;
        while (s >> d) dims.push_back(d);
    }
    if (next_line() != "hidden: relu")
        throw std::runtime_error("load_mlp: unsupported hidden activation");

    OutputActivation act = OutputActivation::identity;
    double scale = 1.0;
    {
        std::istringstream s(next_line());
        std::string tag, kind;
        s >> tag >> kind;
        if (tag != "output:") throw std::runtime_error("load_mlp: expected output line");
        if (kind == "tanh") {
            act = OutputActivation::tanh_scaled;
            s >> scale;
        } else if (kind != "identity") {
            throw std::runtime_error("load_mlp: unknown output activation '" + kind + "'");
        }
    }
    std::uint64_t seed = 0;
    {
        std::istringstream s(next_line());
        std::string tag;
        s >> tag >> seed;
        if (tag != "seed:") throw std::runtime_error("load_mlp: expected seed line");
    }
    if (next_line() != "---")
        throw std::runtime_error("load_mlp: expected header terminator");

    MlpParams p = MlpParams::zeros(dims, act, scale);
    for (int l = 0; l < p.num_layers(); ++l) {
        in.read(reinterpret_cast<char*>(p.weights[l].data()),
                static_cast<std::streamsize>(sizeof(double) * p.weights[l].size()));
        in.read(reinterpret_cast<char*>(p.biases[l].data()),
                static_cast<std::streamsize>(sizeof(double) * p.biases[l].size()));
    }
    if (!in) throw std::runtime_error("load_mlp: truncated blob in " + path);
    if (seed_out) *seed_out = seed;
    return p;
}

} // namespace gcrl
