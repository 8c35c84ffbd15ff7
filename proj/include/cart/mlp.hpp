#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cart/linalg.hpp"

namespace cart {

enum class Nonlinearity { Tanh, Relu, Identity };

std::string nonlinearity_name(Nonlinearity nl);
Nonlinearity nonlinearity_from_name(const std::string& name);

double apply_nonlinearity(Nonlinearity nl, double z);
// derivative expressed through the post-activation value
double nonlinearity_deriv(Nonlinearity nl, double h);

// Fully connected scalar-output network. Hidden layers share one
// nonlinearity, the output layer is linear with width 1.
struct RewardNet {
    std::vector<int> layer_dims;  // input, hidden..., output
    std::vector<Mat> weights;     // weights[l]: layer_dims[l+1] x layer_dims[l]
    std::vector<Vec> biases;
    Nonlinearity nonlinearity = Nonlinearity::Tanh;
    uint64_t init_seed = 0;

    int num_layers() const { return static_cast<int>(weights.size()); }
    int input_dim() const { return layer_dims.front(); }
};

RewardNet make_net(const std::vector<int>& layer_dims, Nonlinearity nl, uint64_t seed);

// Post-activation values per layer; the final entry is the linear output.
struct ActivationTrace {
    Vec input;
    std::vector<Vec> post;

    double output() const { return post.back()[0]; }
};

struct GradientBundle {
    std::vector<Mat> weight_grads;
    std::vector<Vec> bias_grads;

    void scale(double s);
    void accumulate(const GradientBundle& other, double s = 1.0);
};

GradientBundle zero_gradients(const RewardNet& net);

double forward(const RewardNet& net, const Vec& x);
ActivationTrace forward_with_trace(const RewardNet& net, const Vec& x);

// d_output is dLoss/dR evaluated at the traced input.
GradientBundle backward(const RewardNet& net, const ActivationTrace& trace, double d_output);

// Like backward but also seeds dLoss/dh for hidden post-activations.
// hidden_seeds[l] matches post[l] for l in [0, num_layers-2]; empty vectors
// mean no direct dependence on that layer.
GradientBundle backward_multi(const RewardNet& net, const ActivationTrace& trace, double d_output,
                              const std::vector<Vec>& hidden_seeds);

size_t num_params(const RewardNet& net);

// net.params += scale * grads
void axpy_params(RewardNet& net, double scale, const GradientBundle& grads);

// Central-difference gradient of an arbitrary scalar functional of the net.
GradientBundle finite_difference_grad(const RewardNet& net,
                                      const std::function<double(const RewardNet&)>& loss,
                                      double h);

void save_checkpoint(const RewardNet& net, const std::string& path);
RewardNet load_checkpoint(const std::string& path);

}  // namespace cart
