#pragma once

#include <string>
#include <vector>

#include "cart/circuits.hpp"
#include "cart/data.hpp"
#include "cart/mlp.hpp"

namespace cart {

struct BoundInputs {
    double l_head = 0.0;
    long n_tail = 1;
    int k_tail = 0;
    double delta_conf = 0.05;
    double c_const = 1.0;
    double beta_coef = 1.0;
    double div = 0.0;

    void validate() const;
};

inline constexpr const char* kDivDefinition = "mean |E_tail[a_c] - E_head[a_c]|";

struct DivergenceResult {
    double value = 0.0;
    bool empty_tail_set = false;
};

// Mean over tail circuits of the absolute gap between expected activations
// under the two distributions.
DivergenceResult divergence(const RewardNet& net, const CircuitSet& circuits,
                            const std::vector<LabeledExample>& head,
                            const std::vector<LabeledExample>& tail);

// l_head + c_const * sqrt(k_tail * ln(1/delta_conf)) / sqrt(n_tail)
//        + beta_coef * div
double bound_value(const BoundInputs& inputs);

Json bound_report_to_json(const BoundInputs& inputs, double empirical_tail_loss);

}  // namespace cart
