#pragma once

#include <cmath>
#include <initializer_list>
#include <vector>

#include "cart/circuits.hpp"
#include "cart/data.hpp"
#include "cart/mlp.hpp"
#include "cart/rng.hpp"

namespace cart::test {

inline Mat mat(int rows, int cols, std::initializer_list<double> values) {
    Mat m(rows, cols);
    size_t i = 0;
    for (double v : values) {
        m.a[i++] = v;
    }
    return m;
}

// 2-3-1 net with fixed weights; forward([0.4, -1.2]) under tanh is
// 0.21491388069654399, under relu 0.36299999999999993, under identity
// 0.23299999999999993.
inline RewardNet tiny_net(Nonlinearity nl = Nonlinearity::Tanh) {
    RewardNet net;
    net.layer_dims = {2, 3, 1};
    net.nonlinearity = nl;
    net.weights.push_back(mat(3, 2, {0.3, -0.2, 0.5, 0.1, -0.4, 0.25}));
    net.weights.push_back(mat(1, 3, {0.7, -0.3, 0.5}));
    net.biases.push_back({0.1, -0.05, 0.2});
    net.biases.push_back({0.05});
    return net;
}

// Identity net computing reward = w . x, one hidden neuron per coordinate.
// Patching hidden neuron j by delta moves the reward by w[j] * delta.
inline RewardNet linear_readout_net(const Vec& w) {
    const int d = static_cast<int>(w.size());
    RewardNet net;
    net.layer_dims = {d, d, 1};
    net.nonlinearity = Nonlinearity::Identity;
    Mat eye(d, d);
    for (int i = 0; i < d; ++i) {
        eye.at(i, i) = 1.0;
    }
    net.weights.push_back(std::move(eye));
    Mat out(1, d);
    for (int i = 0; i < d; ++i) {
        out.at(0, i) = w[static_cast<size_t>(i)];
    }
    net.weights.push_back(std::move(out));
    net.biases.push_back(Vec(static_cast<size_t>(d), 0.0));
    net.biases.push_back({0.0});
    return net;
}

inline CircuitSet one_circuit(std::vector<NeuronRef> members, double readout = 1.0) {
    CircuitSet set;
    Circuit c;
    c.id = "c0";
    c.members = std::move(members);
    c.readout_weight = readout;
    set.circuits.push_back(std::move(c));
    set.tail_ids.push_back("c0");
    return set;
}

// Relu net with three hidden units wired to fire only on the tail cluster.
// Ground truth for discovery: the planted units carry nearly all of the
// head/tail reward difference, the other 13 units are low-gain noise.
struct PlantedCase {
    RewardNet net;
    std::vector<NeuronRef> planted;
    MixtureSpec spec;
};

inline PlantedCase make_planted(uint64_t seed) {
    const int d = 8;
    const int hidden = 16;
    Rng rng(derive_seed(seed, 0xbeef));

    Vec u(d);
    double n2 = 0.0;
    for (double& v : u) {
        v = rng.normal();
        n2 += v * v;
    }
    for (double& v : u) {
        v /= std::sqrt(n2);
    }

    PlantedCase out;
    out.spec.alpha = 0.9;
    out.spec.input_dim = d;
    out.spec.label_fn = LabelKind::RadialQuadratic;
    Cluster head;
    head.center = Vec(d, 0.0);
    head.stdev = 0.3;
    head.offset = 1.0;
    Cluster tail;
    tail.center = u;
    for (double& v : tail.center) {
        v *= 3.0;
    }
    tail.stdev = 0.3;
    tail.offset = -1.0;
    out.spec.head_clusters = {head};
    out.spec.tail_clusters = {tail};

    RewardNet net;
    net.layer_dims = {d, hidden, 1};
    net.nonlinearity = Nonlinearity::Relu;
    Mat w0(hidden, d);
    Vec b0(hidden, 0.0);
    Mat w1(1, hidden);
    for (int j = 0; j < hidden; ++j) {
        if (j < 3) {
            const double gain = 2.0 + 0.2 * j;
            for (int i = 0; i < d; ++i) {
                w0.at(j, i) = gain * u[static_cast<size_t>(i)];
            }
            b0[static_cast<size_t>(j)] = -1.5 * gain;
            w1.at(0, j) = 1.0;
            out.planted.push_back({0, j});
        } else {
            for (int i = 0; i < d; ++i) {
                w0.at(j, i) = 0.05 * rng.normal();
            }
            b0[static_cast<size_t>(j)] = 0.05 * rng.normal();
            w1.at(0, j) = 0.02 * rng.normal();
        }
    }
    net.weights = {std::move(w0), std::move(w1)};
    net.biases = {std::move(b0), {0.0}};
    out.net = std::move(net);
    return out;
}

inline double rel_err(double got, double want) {
    const double denom = std::max(std::abs(want), 1e-8);
    return std::abs(got - want) / denom;
}

inline bool grad_close(const GradientBundle& a, const GradientBundle& b, double rel_tol,
                       double abs_floor) {
    for (size_t l = 0; l < a.weight_grads.size(); ++l) {
        for (size_t i = 0; i < a.weight_grads[l].a.size(); ++i) {
            const double x = a.weight_grads[l].a[i];
            const double y = b.weight_grads[l].a[i];
            if (std::abs(x - y) > abs_floor + rel_tol * std::max(std::abs(x), std::abs(y))) {
                return false;
            }
        }
        for (size_t i = 0; i < a.bias_grads[l].size(); ++i) {
            const double x = a.bias_grads[l][i];
            const double y = b.bias_grads[l][i];
            if (std::abs(x - y) > abs_floor + rel_tol * std::max(std::abs(x), std::abs(y))) {
                return false;
            }
        }
    }
    return true;
}

}  // namespace cart::test
