#include "cart/bound.hpp"

#include <cmath>
#include <stdexcept>

#include "cart/error.hpp"

namespace cart {

void BoundInputs::validate() const {
    if (n_tail < 1) {
        throw ConfigError("bound.n_tail must be at least 1");
    }
    if (k_tail < 0) {
        throw ConfigError("bound.k_tail must be nonnegative");
    }
    if (!(delta_conf > 0.0 && delta_conf < 1.0)) {
        throw ConfigError("bound.delta_conf must lie strictly inside (0, 1)");
    }
    if (c_const <= 0.0) {
        throw ConfigError("bound.c_const must be positive");
    }
    if (beta_coef < 0.0) {
        throw ConfigError("bound.beta_coef must be nonnegative");
    }
    if (div < 0.0) {
        throw ConfigError("bound.div must be nonnegative");
    }
}

DivergenceResult divergence(const RewardNet& net, const CircuitSet& circuits,
                            const std::vector<LabeledExample>& head,
                            const std::vector<LabeledExample>& tail) {
    if (head.empty() || tail.empty()) {
        throw std::invalid_argument("divergence: example lists must be nonempty");
    }
    if (circuits.tail_ids.empty()) {
        return {0.0, true};
    }
    double total = 0.0;
    for (const auto& id : circuits.tail_ids) {
        const Circuit* c = circuits.find(id);
        if (c == nullptr) {
            throw std::invalid_argument("divergence: unknown tail circuit id " + id);
        }
        double head_mean = 0.0;
        for (const auto& ex : head) {
            head_mean += circuit_activation(net, *c, ex.x);
        }
        head_mean /= static_cast<double>(head.size());
        double tail_mean = 0.0;
        for (const auto& ex : tail) {
            tail_mean += circuit_activation(net, *c, ex.x);
        }
        tail_mean /= static_cast<double>(tail.size());
        total += std::fabs(tail_mean - head_mean);
    }
    return {total / static_cast<double>(circuits.tail_ids.size()), false};
}

double bound_value(const BoundInputs& inputs) {
    inputs.validate();
    const double complexity =
        inputs.c_const *
        std::sqrt(static_cast<double>(inputs.k_tail) * std::log(1.0 / inputs.delta_conf)) /
        std::sqrt(static_cast<double>(inputs.n_tail));
    return inputs.l_head + complexity + inputs.beta_coef * inputs.div;
}

Json bound_report_to_json(const BoundInputs& inputs, double empirical_tail_loss) {
    Json doc;
    Json in;
    in["l_head"] = inputs.l_head;
    in["n_tail"] = inputs.n_tail;
    in["k_tail"] = inputs.k_tail;
    in["delta_conf"] = inputs.delta_conf;
    in["c_const"] = inputs.c_const;
    in["beta_coef"] = inputs.beta_coef;
    in["div"] = inputs.div;
    doc["inputs"] = std::move(in);
    doc["bound_value"] = bound_value(inputs);
    doc["empirical_tail_loss"] = empirical_tail_loss;
    doc["div_definition"] = kDivDefinition;
    return doc;
}

}  // namespace cart
