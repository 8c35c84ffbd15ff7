#include "cart/mlp.hpp"

#include <cmath>
#include <stdexcept>

#include "cart/error.hpp"
#include "cart/jsonio.hpp"
#include "cart/rng.hpp"

namespace cart {

std::string nonlinearity_name(Nonlinearity nl) {
    switch (nl) {
        case Nonlinearity::Tanh:
            return "tanh";
        case Nonlinearity::Relu:
            return "relu";
        case Nonlinearity::Identity:
            return "identity";
    }
    throw std::logic_error("unknown nonlinearity");
}

Nonlinearity nonlinearity_from_name(const std::string& name) {
    if (name == "tanh") {
        return Nonlinearity::Tanh;
    }
    if (name == "relu") {
        return Nonlinearity::Relu;
    }
    if (name == "identity") {
        return Nonlinearity::Identity;
    }
    throw ConfigError("unknown nonlinearity: " + name);
}

double apply_nonlinearity(Nonlinearity nl, double z) {
    switch (nl) {
        case Nonlinearity::Tanh:
            return std::tanh(z);
        case Nonlinearity::Relu:
            return z > 0.0 ? z : 0.0;
        case Nonlinearity::Identity:
            return z;
    }
    throw std::logic_error("unknown nonlinearity");
}

double nonlinearity_deriv(Nonlinearity nl, double h) {
    switch (nl) {
        case Nonlinearity::Tanh:
            return 1.0 - h * h;
        case Nonlinearity::Relu:
            return h > 0.0 ? 1.0 : 0.0;
        case Nonlinearity::Identity:
            return 1.0;
    }
    throw std::logic_error("unknown nonlinearity");
}

RewardNet make_net(const std::vector<int>& layer_dims, Nonlinearity nl, uint64_t seed) {
    if (layer_dims.size() < 2) {
        throw std::invalid_argument("make_net: need at least input and output dims");
    }
    if (layer_dims.back() != 1) {
        throw std::invalid_argument("make_net: output dim must be 1");
    }
    for (int d : layer_dims) {
        if (d <= 0) {
            throw std::invalid_argument("make_net: layer dims must be positive");
        }
    }
    RewardNet net;
    net.layer_dims = layer_dims;
    net.nonlinearity = nl;
    net.init_seed = seed;
    Rng rng(derive_seed(seed, 0x11));
    for (size_t l = 0; l + 1 < layer_dims.size(); ++l) {
        const int fan_in = layer_dims[l];
        const int fan_out = layer_dims[l + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        Mat w(fan_out, fan_in);
        for (double& v : w.a) {
            v = rng.uniform(-bound, bound);
        }
        Vec b(fan_out);
        for (double& v : b) {
            v = rng.uniform(-bound, bound);
        }
        net.weights.push_back(std::move(w));
        net.biases.push_back(std::move(b));
    }
    return net;
}

void GradientBundle::scale(double s) {
    for (auto& w : weight_grads) {
        for (double& v : w.a) {
            v *= s;
        }
    }
    for (auto& b : bias_grads) {
        for (double& v : b) {
            v *= s;
        }
    }
}

void GradientBundle::accumulate(const GradientBundle& other, double s) {
    for (size_t l = 0; l < weight_grads.size(); ++l) {
        for (size_t i = 0; i < weight_grads[l].a.size(); ++i) {
            weight_grads[l].a[i] += s * other.weight_grads[l].a[i];
        }
        for (size_t i = 0; i < bias_grads[l].size(); ++i) {
            bias_grads[l][i] += s * other.bias_grads[l][i];
        }
    }
}

GradientBundle zero_gradients(const RewardNet& net) {
    GradientBundle g;
    for (int l = 0; l < net.num_layers(); ++l) {
        g.weight_grads.emplace_back(net.weights[l].rows, net.weights[l].cols);
        g.bias_grads.emplace_back(net.biases[l].size(), 0.0);
    }
    return g;
}

ActivationTrace forward_with_trace(const RewardNet& net, const Vec& x) {
    if (static_cast<int>(x.size()) != net.input_dim()) {
        throw std::invalid_argument("forward: input dim mismatch");
    }
    ActivationTrace trace;
    trace.input = x;
    const Vec* cur = &x;
    const int layers = net.num_layers();
    for (int l = 0; l < layers; ++l) {
        Vec z = matvec(net.weights[l], *cur);
        for (size_t i = 0; i < z.size(); ++i) {
            z[i] += net.biases[l][i];
        }
        if (l + 1 < layers) {
            for (double& v : z) {
                v = apply_nonlinearity(net.nonlinearity, v);
            }
        }
        trace.post.push_back(std::move(z));
        cur = &trace.post.back();
    }
    return trace;
}

double forward(const RewardNet& net, const Vec& x) {
    return forward_with_trace(net, x).output();
}

GradientBundle backward_multi(const RewardNet& net, const ActivationTrace& trace, double d_output,
                              const std::vector<Vec>& hidden_seeds) {
    const int layers = net.num_layers();
    GradientBundle g = zero_gradients(net);
    Vec delta = {d_output};  // dLoss/dz at the current layer
    for (int l = layers - 1; l >= 0; --l) {
        const Vec& below = l == 0 ? trace.input : trace.post[l - 1];
        Mat& gw = g.weight_grads[l];
        for (int r = 0; r < gw.rows; ++r) {
            for (int c = 0; c < gw.cols; ++c) {
                gw.at(r, c) = delta[r] * below[c];
            }
            g.bias_grads[l][r] = delta[r];
        }
        if (l == 0) {
            break;
        }
        Vec u = matvec_transposed(net.weights[l], delta);
        if (static_cast<size_t>(l - 1) < hidden_seeds.size() && !hidden_seeds[l - 1].empty()) {
            const Vec& seed = hidden_seeds[l - 1];
            if (seed.size() != u.size()) {
                throw std::invalid_argument("backward_multi: hidden seed dim mismatch");
            }
            for (size_t i = 0; i < u.size(); ++i) {
                u[i] += seed[i];
            }
        }
        const Vec& h = trace.post[l - 1];
        for (size_t i = 0; i < u.size(); ++i) {
            u[i] *= nonlinearity_deriv(net.nonlinearity, h[i]);
        }
        delta = std::move(u);
    }
    return g;
}

GradientBundle backward(const RewardNet& net, const ActivationTrace& trace, double d_output) {
    return backward_multi(net, trace, d_output, {});
}

size_t num_params(const RewardNet& net) {
    size_t n = 0;
    for (int l = 0; l < net.num_layers(); ++l) {
        n += net.weights[l].a.size() + net.biases[l].size();
    }
    return n;
}

void axpy_params(RewardNet& net, double scale, const GradientBundle& grads) {
    for (int l = 0; l < net.num_layers(); ++l) {
        for (size_t i = 0; i < net.weights[l].a.size(); ++i) {
            net.weights[l].a[i] += scale * grads.weight_grads[l].a[i];
        }
        for (size_t i = 0; i < net.biases[l].size(); ++i) {
            net.biases[l][i] += scale * grads.bias_grads[l][i];
        }
    }
}

GradientBundle finite_difference_grad(const RewardNet& net,
                                      const std::function<double(const RewardNet&)>& loss,
                                      double h) {
    RewardNet probe = net;
    GradientBundle g = zero_gradients(net);
    auto central = [&](double& slot) {
        const double orig = slot;
        slot = orig + h;
        const double up = loss(probe);
        slot = orig - h;
        const double down = loss(probe);
        slot = orig;
        return (up - down) / (2.0 * h);
    };
    for (int l = 0; l < net.num_layers(); ++l) {
        for (size_t i = 0; i < probe.weights[l].a.size(); ++i) {
            g.weight_grads[l].a[i] = central(probe.weights[l].a[i]);
        }
        for (size_t i = 0; i < probe.biases[l].size(); ++i) {
            g.bias_grads[l][i] = central(probe.biases[l][i]);
        }
    }
    return g;
}

void save_checkpoint(const RewardNet& net, const std::string& path) {
    Json doc;
    doc["schema_version"] = 1;
    doc["layer_dims"] = net.layer_dims;
    doc["nonlinearity"] = nonlinearity_name(net.nonlinearity);
    doc["init_seed"] = net.init_seed;
    Json weights = Json::array();
    Json biases = Json::array();
    for (int l = 0; l < net.num_layers(); ++l) {
        weights.push_back(net.weights[l].a);
        biases.push_back(net.biases[l]);
    }
    doc["weights"] = std::move(weights);
    doc["biases"] = std::move(biases);
    save_json_file(path, doc);
}

RewardNet load_checkpoint(const std::string& path) {
    const Json doc = load_json_file(path);
    check_schema(doc, 1, "checkpoint " + path);
    for (const char* key : {"layer_dims", "nonlinearity", "weights", "biases"}) {
        if (!doc.contains(key)) {
            throw SchemaError("checkpoint " + path + ": missing " + key);
        }
    }
    RewardNet net;
    net.layer_dims = doc["layer_dims"].get<std::vector<int>>();
    net.nonlinearity = nonlinearity_from_name(doc["nonlinearity"].get<std::string>());
    net.init_seed = doc.value("init_seed", uint64_t{0});
    if (net.layer_dims.size() < 2 || net.layer_dims.back() != 1) {
        throw SchemaError("checkpoint " + path + ": bad layer_dims");
    }
    const auto& jw = doc["weights"];
    const auto& jb = doc["biases"];
    const size_t layers = net.layer_dims.size() - 1;
    if (jw.size() != layers || jb.size() != layers) {
        throw SchemaError("checkpoint " + path + ": layer count mismatch");
    }
    for (size_t l = 0; l < layers; ++l) {
        const int rows = net.layer_dims[l + 1];
        const int cols = net.layer_dims[l];
        Mat w(rows, cols);
        const auto flat = jw[l].get<std::vector<double>>();
        if (flat.size() != w.a.size()) {
            throw SchemaError("checkpoint " + path + ": weight size mismatch at layer " +
                              std::to_string(l));
        }
        w.a = flat;
        Vec b = jb[l].get<std::vector<double>>();
        if (static_cast<int>(b.size()) != rows) {
            throw SchemaError("checkpoint " + path + ": bias size mismatch at layer " +
                              std::to_string(l));
        }
        net.weights.push_back(std::move(w));
        net.biases.push_back(std::move(b));
    }
    return net;
}

}  // namespace cart
