#include "cart/vulnerability.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cart/error.hpp"
#include "cart/rng.hpp"

namespace cart {

void VulnWeights::validate() const {
    if (alpha_w < 0.0 || beta_w < 0.0 || gamma_w < 0.0) {
        throw ConfigError("vuln weights must be nonnegative");
    }
    if (alpha_w + beta_w + gamma_w <= 0.0) {
        throw ConfigError("at least one vuln weight must be positive");
    }
}

ConsistencyResult consistency(const RewardNet& net, const Circuit& circuit,
                              const Neighborhood& neighborhood) {
    const size_t m = neighborhood.members.size();
    if (m < 2) {
        throw std::invalid_argument("consistency: neighborhood needs at least 2 members");
    }
    Vec acts;
    acts.reserve(m);
    for (const auto& member : neighborhood.members) {
        acts.push_back(circuit_activation(net, circuit, member.x));
    }
    double max_abs = 0.0;
    for (double a : acts) {
        max_abs = std::max(max_abs, std::fabs(a));
    }
    if (max_abs == 0.0) {
        return {1.0, true};
    }
    const double bar = mean(acts);
    double dev = 0.0;
    for (double a : acts) {
        dev += std::fabs(a - bar);
    }
    dev /= static_cast<double>(m);
    return {1.0 - dev / max_abs, false};
}

namespace {

std::vector<size_t> strided_subset(size_t n, int cap) {
    std::vector<size_t> idx;
    if (cap <= 0 || static_cast<size_t>(cap) >= n) {
        idx.resize(n);
        for (size_t i = 0; i < n; ++i) {
            idx[i] = i;
        }
        return idx;
    }
    idx.reserve(static_cast<size_t>(cap));
    for (int k = 0; k < cap; ++k) {
        idx.push_back(static_cast<size_t>(k) * n / static_cast<size_t>(cap));
    }
    return idx;
}

}  // namespace

double sensitivity(const RewardNet& net, const Circuit& circuit,
                   const std::vector<LabeledExample>& tail_examples, double epsilon_bound,
                   const SensSearchConfig& config) {
    if (epsilon_bound <= 0.0) {
        throw std::invalid_argument("sensitivity: epsilon_bound must be positive");
    }
    if (tail_examples.empty()) {
        throw std::invalid_argument("sensitivity: tail example list is empty");
    }
    const double eps = epsilon_bound;
    const auto subset = strided_subset(tail_examples.size(), config.max_examples);
    double total = 0.0;
    for (size_t si = 0; si < subset.size(); ++si) {
        const Vec& x = tail_examples[subset[si]].x;
        const double f0 = forward(net, x);
        auto f = [&](double delta) { return patched_reward_shift(net, x, circuit, delta); };
        Rng rng(derive_seed(config.seed, 0x5e00 + si));
        double best = 0.0;
        for (int r = 0; r < config.restarts; ++r) {
            double delta;
            if (r == 0) {
                delta = 0.0;
            } else if (r == 1) {
                delta = eps;
            } else if (r == 2) {
                delta = -eps;
            } else {
                delta = rng.uniform(-eps, eps);
            }
            double fd_val = f(delta);
            best = std::max(best, std::fabs(fd_val - f0));
            for (int step = 1; step <= config.steps; ++step) {
                const double g =
                    (f(delta + config.fd_step) - f(delta - config.fd_step)) /
                    (2.0 * config.fd_step);
                const double sign = fd_val - f0 >= 0.0 ? 1.0 : -1.0;
                const double dir = sign * g;
                if (dir == 0.0) {
                    break;
                }
                const double lr = config.step_factor * eps / std::sqrt(static_cast<double>(step));
                delta = std::clamp(delta + lr * (dir > 0.0 ? 1.0 : -1.0), -eps, eps);
                fd_val = f(delta);
                best = std::max(best, std::fabs(fd_val - f0));
            }
        }
        total += best;
    }
    return total / static_cast<double>(subset.size());
}

double coverage(const RewardNet& net, const Circuit& circuit,
                const std::vector<LabeledExample>& tail_examples, double tau_act) {
    if (tail_examples.empty()) {
        throw std::invalid_argument("coverage: tail example list is empty");
    }
    if (tau_act < 0.0) {
        throw std::invalid_argument("coverage: tau_act must be nonnegative");
    }
    int hits = 0;
    for (const auto& ex : tail_examples) {
        if (std::fabs(circuit_activation(net, circuit, ex.x)) > tau_act) {
            ++hits;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(tail_examples.size());
}

double vulnerability_score(double consist, double sens, double cov, const VulnWeights& weights) {
    return weights.alpha_w * (1.0 - consist) + weights.beta_w * sens +
           weights.gamma_w * (1.0 - cov);
}

std::map<std::string, Neighborhood> build_neighborhoods(const RewardNet& net,
                                                        const CircuitSet& circuits,
                                                        const MixtureSpec& spec,
                                                        const std::vector<LabeledExample>& tail,
                                                        int m, double radius, uint64_t seed) {
    if (tail.empty()) {
        throw std::invalid_argument("build_neighborhoods: tail example list is empty");
    }
    std::map<std::string, Neighborhood> out;
    for (size_t k = 0; k < circuits.tail_ids.size(); ++k) {
        const std::string& id = circuits.tail_ids[k];
        const Circuit* circuit = circuits.find(id);
        if (circuit == nullptr) {
            throw std::invalid_argument("build_neighborhoods: unknown circuit id " + id);
        }
        size_t anchor_idx = 0;
        double best = -1.0;
        for (size_t i = 0; i < tail.size(); ++i) {
            const double a = std::fabs(circuit_activation(net, *circuit, tail[i].x));
            if (a > best) {
                best = a;
                anchor_idx = i;
            }
        }
        out[id] = make_neighborhood(spec, tail[anchor_idx], m, radius,
                                    derive_seed(seed, 0x300 + k));
    }
    return out;
}

VulnerabilityReport assess(const RewardNet& net, const CircuitSet& circuits,
                           const AssessInputs& inputs, const AssessConfig& config) {
    config.weights.validate();
    if (circuits.tail_ids.empty()) {
        throw std::invalid_argument("assess: circuit set has no tail circuits");
    }
    if (inputs.head_examples.empty() || inputs.tail_examples.empty()) {
        throw std::invalid_argument("assess: head and tail example lists must be nonempty");
    }
    VulnerabilityReport report;
    report.weights = config.weights;
    report.epsilon_bound = config.epsilon_bound;
    report.sens_normalized = config.normalize_sens;
    report.search = config.search;
    report.neighborhood_m = config.neighborhood_m;
    report.neighborhood_radius = config.neighborhood_radius;

    for (size_t k = 0; k < circuits.tail_ids.size(); ++k) {
        const std::string& id = circuits.tail_ids[k];
        const Circuit* circuit = circuits.find(id);
        if (circuit == nullptr) {
            throw std::invalid_argument("assess: unknown tail circuit id " + id);
        }
        CircuitAssessment a;
        const auto nb = inputs.neighborhoods.find(id);
        if (nb == inputs.neighborhoods.end()) {
            a.unassessed = true;
            report.per_circuit[id] = a;
            continue;
        }
        if (config.tau_act.has_value()) {
            a.tau_act = *config.tau_act;
        } else {
            Vec abs_acts;
            abs_acts.reserve(inputs.head_examples.size());
            for (const auto& ex : inputs.head_examples) {
                abs_acts.push_back(std::fabs(circuit_activation(net, *circuit, ex.x)));
            }
            std::sort(abs_acts.begin(), abs_acts.end());
            const size_t n = abs_acts.size();
            const size_t idx = std::min(
                n - 1, static_cast<size_t>(std::ceil(0.95 * static_cast<double>(n))) - 1);
            a.tau_act = 0.1 * abs_acts[idx];
        }
        const ConsistencyResult c = consistency(net, *circuit, nb->second);
        a.consist = c.value;
        a.consist_degenerate = c.degenerate;
        SensSearchConfig search = config.search;
        search.seed = derive_seed(config.search.seed, 0x500 + k);
        a.sens_raw = sensitivity(net, *circuit, inputs.tail_examples, config.epsilon_bound,
                                 search);
        a.cov = coverage(net, *circuit, inputs.tail_examples, a.tau_act);
        report.per_circuit[id] = a;
    }

    // bring sens onto the same [0,1] footing as the other two terms
    double lo = 0.0;
    double hi = 0.0;
    bool first = true;
    for (const auto& [id, a] : report.per_circuit) {
        if (a.unassessed) {
            continue;
        }
        if (first) {
            lo = hi = a.sens_raw;
            first = false;
        } else {
            lo = std::min(lo, a.sens_raw);
            hi = std::max(hi, a.sens_raw);
        }
    }
    for (auto& [id, a] : report.per_circuit) {
        if (a.unassessed) {
            continue;
        }
        if (config.normalize_sens) {
            a.sens = hi > lo ? (a.sens_raw - lo) / (hi - lo) : 0.0;
        } else {
            a.sens = a.sens_raw;
        }
        a.vuln = vulnerability_score(a.consist, a.sens, a.cov, config.weights);
    }
    return report;
}

Json vulnerability_report_to_json(const VulnerabilityReport& report) {
    Json doc;
    doc["schema_version"] = 1;
    Json weights;
    weights["alpha_w"] = report.weights.alpha_w;
    weights["beta_w"] = report.weights.beta_w;
    weights["gamma_w"] = report.weights.gamma_w;
    doc["weights"] = std::move(weights);
    doc["epsilon_bound"] = report.epsilon_bound;
    doc["sens_normalized"] = report.sens_normalized;
    doc["sens_note"] = "projected gradient ascent, lower bound on the true maximum";
    Json search;
    search["steps"] = report.search.steps;
    search["restarts"] = report.search.restarts;
    search["step_factor"] = report.search.step_factor;
    search["fd_step"] = report.search.fd_step;
    search["seed"] = report.search.seed;
    search["max_examples"] = report.search.max_examples;
    doc["search"] = std::move(search);
    Json nb;
    nb["m"] = report.neighborhood_m;
    nb["radius"] = report.neighborhood_radius;
    doc["neighborhood"] = std::move(nb);
    Json per = Json::object();
    for (const auto& [id, a] : report.per_circuit) {
        Json row;
        row["consist"] = a.consist;
        row["consist_degenerate"] = a.consist_degenerate;
        row["sens_raw"] = a.sens_raw;
        row["sens"] = a.sens;
        row["cov"] = a.cov;
        row["vuln"] = a.vuln;
        row["tau_act"] = a.tau_act;
        row["unassessed"] = a.unassessed;
        per[id] = std::move(row);
    }
    doc["per_circuit"] = std::move(per);
    return doc;
}

VulnerabilityReport vulnerability_report_from_json(const Json& doc, const std::string& what) {
    check_schema(doc, 1, what);
    VulnerabilityReport report;
    const Json& w = doc.at("weights");
    report.weights.alpha_w = w.at("alpha_w").get<double>();
    report.weights.beta_w = w.at("beta_w").get<double>();
    report.weights.gamma_w = w.at("gamma_w").get<double>();
    report.epsilon_bound = doc.at("epsilon_bound").get<double>();
    report.sens_normalized = doc.at("sens_normalized").get<bool>();
    const Json& s = doc.at("search");
    report.search.steps = s.at("steps").get<int>();
    report.search.restarts = s.at("restarts").get<int>();
    report.search.step_factor = s.at("step_factor").get<double>();
    report.search.fd_step = s.at("fd_step").get<double>();
    report.search.seed = s.at("seed").get<uint64_t>();
    report.search.max_examples = s.at("max_examples").get<int>();
    report.neighborhood_m = doc.at("neighborhood").at("m").get<int>();
    report.neighborhood_radius = doc.at("neighborhood").at("radius").get<double>();
    for (const auto& [id, row] : doc.at("per_circuit").items()) {
        CircuitAssessment a;
        a.consist = row.at("consist").get<double>();
        a.consist_degenerate = row.at("consist_degenerate").get<bool>();
        a.sens_raw = row.at("sens_raw").get<double>();
        a.sens = row.at("sens").get<double>();
        a.cov = row.at("cov").get<double>();
        a.vuln = row.at("vuln").get<double>();
        a.tau_act = row.at("tau_act").get<double>();
        a.unassessed = row.at("unassessed").get<bool>();
        report.per_circuit[id] = a;
    }
    return report;
}

std::string vulnerability_report_to_csv(const VulnerabilityReport& report) {
    std::string csv = "circuit_id,consist,sens,cov,vuln\n";
    for (const auto& [id, a] : report.per_circuit) {
        csv += id + "," + format_double(a.consist) + "," + format_double(a.sens) + "," +
               format_double(a.cov) + "," + format_double(a.vuln) + "\n";
    }
    return csv;
}

}  // namespace cart
