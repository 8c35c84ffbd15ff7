#pragma once

#include <compare>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cart/data.hpp"
#include "cart/jsonio.hpp"
#include "cart/mlp.hpp"

namespace cart {

// Addresses one hidden neuron; layer 0 is the first hidden layer.
struct NeuronRef {
    int layer = 0;
    int index = 0;

    auto operator<=>(const NeuronRef&) const = default;
};

struct Circuit {
    std::string id;
    std::vector<NeuronRef> members;  // sorted, unique
    double readout_weight = 0.0;
};

struct CircuitSet {
    std::vector<Circuit> circuits;
    std::vector<std::string> tail_ids;

    const Circuit* find(const std::string& id) const;
    void validate(const RewardNet& net) const;
};

void validate_member(const RewardNet& net, const NeuronRef& m);

double circuit_activation_from_trace(const Circuit& circuit, const ActivationTrace& trace);
double circuit_activation(const RewardNet& net, const Circuit& circuit, const Vec& x);

struct Decomposition {
    std::vector<double> terms;  // w_i * a_i(x), in circuit order
    double residual = 0.0;
    double reward = 0.0;
};

// reward == sum(terms) + residual by construction
Decomposition decompose(const RewardNet& net, const CircuitSet& circuits, const Vec& x);

std::map<NeuronRef, double> differential_activation(const RewardNet& net,
                                                    const std::vector<LabeledExample>& head,
                                                    const std::vector<LabeledExample>& tail);

// I(a, b | tail) - I(a, b | head), plug-in estimate on equal-width 2-D
// histograms, natural log. Each example list needs at least 10*bins entries.
double coherence(const RewardNet& net, const NeuronRef& a, const NeuronRef& b,
                 const std::vector<LabeledExample>& head, const std::vector<LabeledExample>& tail,
                 int bins);

// Forward pass with selected hidden activations overwritten after their
// nonlinearity; downstream layers see the patched values.
double forward_with_overrides(const RewardNet& net, const Vec& x,
                              const std::vector<std::pair<NeuronRef, double>>& overrides);

double patch_activations(const RewardNet& net, const Vec& x, const Circuit& circuit,
                         double replacement);
double patch_activations(const RewardNet& net, const Vec& x, const Circuit& circuit,
                         const Vec& replacement);

// Reward after shifting every member activation by delta, which moves the
// circuit mean by exactly delta.
double patched_reward_shift(const RewardNet& net, const Vec& x, const Circuit& circuit,
                            double delta);

struct SpecializationResult {
    double gap = 0.0;
    bool specialized = false;
};

SpecializationResult specialization_gap(const RewardNet& net, const Circuit& circuit,
                                        const std::vector<LabeledExample>& head,
                                        const std::vector<LabeledExample>& tail, double tau);

struct DiscoveryConfig {
    double top_q = 0.2;              // candidate fraction by |delta|
    int coherence_bins = 8;
    double coherence_threshold = 0.1;  // nats
    double patch_threshold_factor = 0.05;  // of reward stdev
    int threads = 1;
};

struct CoherenceEdge {
    NeuronRef a;
    NeuronRef b;
    double value = 0.0;
};

struct DiscoveryReport {
    std::map<NeuronRef, double> delta;
    std::vector<CoherenceEdge> coherence_edges;
    CircuitSet circuits_found;
    std::map<std::string, double> patch_effects;
    std::map<std::string, double> specialization;  // gap per circuit
    double patch_threshold = 0.0;
    bool empty_warning = false;
};

DiscoveryReport discover_circuits(const RewardNet& net, const std::vector<LabeledExample>& head,
                                  const std::vector<LabeledExample>& tail,
                                  const DiscoveryConfig& config);

Json circuit_set_to_json(const CircuitSet& circuits);
CircuitSet circuit_set_from_json(const Json& doc, const std::string& what);
void save_circuit_set(const CircuitSet& circuits, const std::string& path);
CircuitSet load_circuit_set(const std::string& path);

Json discovery_report_to_json(const DiscoveryReport& report);

}  // namespace cart
