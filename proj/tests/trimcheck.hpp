#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "ctsr/network.hpp"
#include "ctsr/ops.hpp"
#include "ctsr/rng.hpp"
#include "ctsr/trimmer.hpp"

namespace testutil {

// Fan-in scaled weights so activations stay in the pixel range; the
// sigma 0.001 initialisation would make every comparison trivially small.
inline ctsr::NetworkModel random_net(std::size_t depth, std::uint64_t seed,
                                     std::size_t first = 64, std::size_t mid = 32) {
    ctsr::Rng rng(seed);
    ctsr::NetworkModel net = ctsr::build_network(depth, first, mid, rng);
    for (std::size_t i = 0; i < net.depth(); ++i) {
        const double a = 1.0 / std::sqrt(double(net.layer(i).weights.shape().filter_size()));
        for (float& v : net.weights(i).data()) v = static_cast<float>(a * (2 * rng.uniform() - 1));
        for (float& v : net.bias(i)) v = static_cast<float>(0.1 * (2 * rng.uniform() - 1));
    }
    return net;
}

// Forward pass of the untrimmed net with the post-activation outputs of the
// listed filters forced to zero, layer by layer.
inline ctsr::Tensor4 masked_forward(const ctsr::NetworkModel& net,
                                    const std::map<std::size_t, std::vector<std::size_t>>& zeroed,
                                    const ctsr::Tensor4& input) {
    ctsr::Tensor4 x = input;
    for (std::size_t i = 0; i < net.depth(); ++i) {
        const ctsr::Layer& l = net.layer(i);
        x = ctsr::conv2d_forward(x, l.weights, l.bias, l.spec.pad);
        if (l.spec.activation == ctsr::Activation::rectifier) ctsr::relu_inplace(x);
        if (const auto it = zeroed.find(i); it != zeroed.end()) {
            for (std::size_t n = 0; n < x.n(); ++n)
                for (std::size_t f : it->second)
                    for (float& v : x.plane(n, f)) v = 0.0f;
        }
    }
    return x;
}

inline ctsr::Tensor4 masked_forward(const ctsr::NetworkModel& net, std::size_t layer,
                                    const std::vector<std::size_t>& zeroed,
                                    const ctsr::Tensor4& input) {
    return masked_forward(net, {{layer, zeroed}}, input);
}

}  // namespace testutil
