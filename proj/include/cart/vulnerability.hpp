#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cart/circuits.hpp"
#include "cart/data.hpp"
#include "cart/mlp.hpp"

namespace cart {

struct VulnWeights {
    double alpha_w = 1.0 / 3.0;
    double beta_w = 1.0 / 3.0;
    double gamma_w = 1.0 / 3.0;

    void validate() const;  // all >= 0, at least one > 0
};

struct ConsistencyResult {
    double value = 1.0;
    bool degenerate = false;  // all activations zero
};

ConsistencyResult consistency(const RewardNet& net, const Circuit& circuit,
                              const Neighborhood& neighborhood);

struct SensSearchConfig {
    int steps = 20;
    int restarts = 4;           // 0, +eps, -eps, then random
    double step_factor = 0.25;  // ascent step as a fraction of epsilon
    double fd_step = 1e-5;
    uint64_t seed = 0;
    int max_examples = 0;  // 0 = use all tail examples
};

// Mean over tail examples of the largest |reward change| found when the
// circuit activation is shifted by a scalar within [-epsilon, epsilon].
// Projected gradient ascent, so the result is a lower bound on the true max.
double sensitivity(const RewardNet& net, const Circuit& circuit,
                   const std::vector<LabeledExample>& tail_examples, double epsilon_bound,
                   const SensSearchConfig& config);

double coverage(const RewardNet& net, const Circuit& circuit,
                const std::vector<LabeledExample>& tail_examples, double tau_act);

double vulnerability_score(double consist, double sens, double cov, const VulnWeights& weights);

struct CircuitAssessment {
    double consist = 1.0;
    bool consist_degenerate = false;
    double sens_raw = 0.0;
    double sens = 0.0;  // the value used in vuln (normalized when enabled)
    double cov = 0.0;
    double vuln = 0.0;
    double tau_act = 0.0;
    bool unassessed = false;
};

struct VulnerabilityReport {
    std::map<std::string, CircuitAssessment> per_circuit;
    VulnWeights weights;
    double epsilon_bound = 0.0;
    bool sens_normalized = true;
    SensSearchConfig search;
    int neighborhood_m = 0;
    double neighborhood_radius = 0.0;
};

struct AssessConfig {
    VulnWeights weights;
    double epsilon_bound = 0.5;
    std::optional<double> tau_act;  // unset: 0.1 x 95th-percentile head |a_c|
    bool normalize_sens = true;
    SensSearchConfig search;
    int neighborhood_m = 8;
    double neighborhood_radius = 0.25;
};

struct AssessInputs {
    std::vector<LabeledExample> head_examples;  // tau_act calibration
    std::vector<LabeledExample> tail_examples;
    std::map<std::string, Neighborhood> neighborhoods;  // keyed by circuit id
};

VulnerabilityReport assess(const RewardNet& net, const CircuitSet& circuits,
                           const AssessInputs& inputs, const AssessConfig& config);

// Circuits with no neighborhood supplied are built one here: the anchor is
// the tail example with the largest |a_c|.
std::map<std::string, Neighborhood> build_neighborhoods(const RewardNet& net,
                                                        const CircuitSet& circuits,
                                                        const MixtureSpec& spec,
                                                        const std::vector<LabeledExample>& tail,
                                                        int m, double radius, uint64_t seed);

Json vulnerability_report_to_json(const VulnerabilityReport& report);
VulnerabilityReport vulnerability_report_from_json(const Json& doc, const std::string& what);
std::string vulnerability_report_to_csv(const VulnerabilityReport& report);

}  // namespace cart
