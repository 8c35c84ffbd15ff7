#include "cart/circuits.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <set>
#include <stdexcept>

#include "cart/error.hpp"
#include "cart/parallel.hpp"

namespace cart {

void validate_member(const RewardNet& net, const NeuronRef& m) {
    const int hidden_layers = net.num_layers() - 1;
    if (m.layer < 0 || m.layer >= hidden_layers) {
        throw std::out_of_range("neuron layer " + std::to_string(m.layer) +
                                " outside hidden range [0, " + std::to_string(hidden_layers) +
                                ")");
    }
    const int width = net.layer_dims[m.layer + 1];
    if (m.index < 0 || m.index >= width) {
        throw std::out_of_range("neuron index " + std::to_string(m.index) +
                                " outside layer width " + std::to_string(width));
    }
}

const Circuit* CircuitSet::find(const std::string& id) const {
    for (const auto& c : circuits) {
        if (c.id == id) {
            return &c;
        }
    }
    return nullptr;
}

void CircuitSet::validate(const RewardNet& net) const {
    std::set<std::string> ids;
    for (const auto& c : circuits) {
        if (c.members.empty()) {
            throw std::invalid_argument("circuit " + c.id + " has no members");
        }
        if (!ids.insert(c.id).second) {
            throw std::invalid_argument("duplicate circuit id " + c.id);
        }
        std::set<NeuronRef> seen;
        for (const auto& m : c.members) {
            validate_member(net, m);
            if (!seen.insert(m).second) {
                throw std::invalid_argument("circuit " + c.id + " has duplicate members");
            }
        }
    }
    for (const auto& id : tail_ids) {
        if (!ids.count(id)) {
            throw std::invalid_argument("tail id " + id + " not among circuits");
        }
    }
}

double circuit_activation_from_trace(const Circuit& circuit, const ActivationTrace& trace) {
    double s = 0.0;
    for (const auto& m : circuit.members) {
        s += trace.post[static_cast<size_t>(m.layer)][static_cast<size_t>(m.index)];
    }
    return s / static_cast<double>(circuit.members.size());
}

double circuit_activation(const RewardNet& net, const Circuit& circuit, const Vec& x) {
    for (const auto& m : circuit.members) {
        validate_member(net, m);
    }
    return circuit_activation_from_trace(circuit, forward_with_trace(net, x));
}

Decomposition decompose(const RewardNet& net, const CircuitSet& circuits, const Vec& x) {
    const ActivationTrace trace = forward_with_trace(net, x);
    Decomposition d;
    d.reward = trace.output();
    double covered = 0.0;
    for (const auto& c : circuits.circuits) {
        const double term = c.readout_weight * circuit_activation_from_trace(c, trace);
        d.terms.push_back(term);
        covered += term;
    }
    d.residual = d.reward - covered;
    return d;
}

std::map<NeuronRef, double> differential_activation(const RewardNet& net,
                                                    const std::vector<LabeledExample>& head,
                                                    const std::vector<LabeledExample>& tail) {
    if (head.empty()) {
        throw std::invalid_argument("differential_activation: head example list is empty");
    }
    if (tail.empty()) {
        throw std::invalid_argument("differential_activation: tail example list is empty");
    }
    auto mean_acts = [&](const std::vector<LabeledExample>& xs) {
        std::vector<Vec> sums;
        for (const auto& ex : xs) {
            const ActivationTrace tr = forward_with_trace(net, ex.x);
            if (sums.empty()) {
                sums.assign(tr.post.size() - 1, Vec());
                for (size_t l = 0; l + 1 < tr.post.size(); ++l) {
                    sums[l].assign(tr.post[l].size(), 0.0);
                }
            }
            for (size_t l = 0; l + 1 < tr.post.size(); ++l) {
                for (size_t i = 0; i < tr.post[l].size(); ++i) {
                    sums[l][i] += tr.post[l][i];
                }
            }
        }
        for (auto& layer : sums) {
            for (double& v : layer) {
                v /= static_cast<double>(xs.size());
            }
        }
        return sums;
    };
    const auto head_mean = mean_acts(head);
    const auto tail_mean = mean_acts(tail);
    std::map<NeuronRef, double> delta;
    for (size_t l = 0; l < head_mean.size(); ++l) {
        for (size_t i = 0; i < head_mean[l].size(); ++i) {
            delta[NeuronRef{static_cast<int>(l), static_cast<int>(i)}] =
                tail_mean[l][i] - head_mean[l][i];
        }
    }
    return delta;
}

namespace {

Vec neuron_activations(const RewardNet& net, const NeuronRef& n,
                       const std::vector<LabeledExample>& xs) {
    Vec out;
    out.reserve(xs.size());
    for (const auto& ex : xs) {
        const ActivationTrace tr = forward_with_trace(net, ex.x);
        out.push_back(tr.post[static_cast<size_t>(n.layer)][static_cast<size_t>(n.index)]);
    }
    return out;
}

// plug-in MI on an equal-width bins x bins histogram, natural log
double plugin_mi(const Vec& xs, const Vec& ys, int bins) {
    const size_t n = xs.size();
    auto bin_of = [bins](double v, double lo, double hi) {
        if (hi <= lo) {
            return 0;
        }
        const int b = static_cast<int>((v - lo) / (hi - lo) * bins);
        return std::clamp(b, 0, bins - 1);
    };
    const auto [xlo_it, xhi_it] = std::minmax_element(xs.begin(), xs.end());
    const auto [ylo_it, yhi_it] = std::minmax_element(ys.begin(), ys.end());
    const double xlo = *xlo_it, xhi = *xhi_it, ylo = *ylo_it, yhi = *yhi_it;
    std::vector<double> joint(static_cast<size_t>(bins) * bins, 0.0);
    Vec px(bins, 0.0), py(bins, 0.0);
    const double w = 1.0 / static_cast<double>(n);
    for (size_t k = 0; k < n; ++k) {
        const int bx = bin_of(xs[k], xlo, xhi);
        const int by = bin_of(ys[k], ylo, yhi);
        joint[static_cast<size_t>(bx) * bins + by] += w;
        px[bx] += w;
        py[by] += w;
    }
    double mi = 0.0;
    for (int bx = 0; bx < bins; ++bx) {
        for (int by = 0; by < bins; ++by) {
            const double p = joint[static_cast<size_t>(bx) * bins + by];
            if (p > 0.0) {
                mi += p * std::log(p / (px[bx] * py[by]));
            }
        }
    }
    return mi;
}

}  // namespace

double coherence(const RewardNet& net, const NeuronRef& a, const NeuronRef& b,
                 const std::vector<LabeledExample>& head, const std::vector<LabeledExample>& tail,
                 int bins) {
    if (bins < 2) {
        throw std::invalid_argument("coherence: bins must be at least 2");
    }
    const size_t floor_n = static_cast<size_t>(10) * static_cast<size_t>(bins);
    if (head.size() < floor_n || tail.size() < floor_n) {
        throw std::invalid_argument("coherence: each example list needs at least " +
                                    std::to_string(floor_n) + " entries");
    }
    validate_member(net, a);
    validate_member(net, b);
    // canonical order makes Coh(a,b) and Coh(b,a) bit-identical
    const NeuronRef lo = std::min(a, b);
    const NeuronRef hi = std::max(a, b);
    const Vec tail_lo = neuron_activations(net, lo, tail);
    const Vec tail_hi = neuron_activations(net, hi, tail);
    const Vec head_lo = neuron_activations(net, lo, head);
    const Vec head_hi = neuron_activations(net, hi, head);
    return plugin_mi(tail_lo, tail_hi, bins) - plugin_mi(head_lo, head_hi, bins);
}

double forward_with_overrides(const RewardNet& net, const Vec& x,
                              const std::vector<std::pair<NeuronRef, double>>& overrides) {
    for (const auto& [ref, value] : overrides) {
        validate_member(net, ref);
        if (!std::isfinite(value)) {
            throw std::invalid_argument("override value must be finite");
        }
    }
    Vec cur = x;
    const int layers = net.num_layers();
    for (int l = 0; l < layers; ++l) {
        Vec z = matvec(net.weights[l], cur);
        for (size_t i = 0; i < z.size(); ++i) {
            z[i] += net.biases[l][i];
        }
        if (l + 1 < layers) {
            for (double& v : z) {
                v = apply_nonlinearity(net.nonlinearity, v);
            }
            for (const auto& [ref, value] : overrides) {
                if (ref.layer == l) {
                    z[static_cast<size_t>(ref.index)] = value;
                }
            }
        }
        cur = std::move(z);
    }
    return cur[0];
}

double patch_activations(const RewardNet& net, const Vec& x, const Circuit& circuit,
                         double replacement) {
    std::vector<std::pair<NeuronRef, double>> overrides;
    for (const auto& m : circuit.members) {
        overrides.emplace_back(m, replacement);
    }
    return forward_with_overrides(net, x, overrides);
}

double patch_activations(const RewardNet& net, const Vec& x, const Circuit& circuit,
                         const Vec& replacement) {
    if (replacement.size() != circuit.members.size()) {
        throw std::invalid_argument("patch_activations: replacement has " +
                                    std::to_string(replacement.size()) + " values for " +
                                    std::to_string(circuit.members.size()) + " members");
    }
    std::vector<std::pair<NeuronRef, double>> overrides;
    for (size_t k = 0; k < circuit.members.size(); ++k) {
        overrides.emplace_back(circuit.members[k], replacement[k]);
    }
    return forward_with_overrides(net, x, overrides);
}

double patched_reward_shift(const RewardNet& net, const Vec& x, const Circuit& circuit,
                            double delta) {
    const ActivationTrace trace = forward_with_trace(net, x);
    std::vector<std::pair<NeuronRef, double>> overrides;
    for (const auto& m : circuit.members) {
        const double clean =
            trace.post[static_cast<size_t>(m.layer)][static_cast<size_t>(m.index)];
        overrides.emplace_back(m, clean + delta);
    }
    return forward_with_overrides(net, x, overrides);
}

SpecializationResult specialization_gap(const RewardNet& net, const Circuit& circuit,
                                        const std::vector<LabeledExample>& head,
                                        const std::vector<LabeledExample>& tail, double tau) {
    if (head.empty() || tail.empty()) {
        throw std::invalid_argument("specialization_gap: example lists must be nonempty");
    }
    auto mean_abs = [&](const std::vector<LabeledExample>& xs) {
        double s = 0.0;
        for (const auto& ex : xs) {
            s += std::fabs(circuit_activation(net, circuit, ex.x));
        }
        return s / static_cast<double>(xs.size());
    };
    SpecializationResult r;
    r.gap = mean_abs(tail) - mean_abs(head);
    r.specialized = r.gap > tau;
    return r;
}

namespace {

// per-member mean activation over a sample; used as the patch source
Vec member_means(const RewardNet& net, const std::vector<NeuronRef>& members,
                 const std::vector<LabeledExample>& xs) {
    Vec sums(members.size(), 0.0);
    for (const auto& ex : xs) {
        const ActivationTrace tr = forward_with_trace(net, ex.x);
        for (size_t k = 0; k < members.size(); ++k) {
            sums[k] += tr.post[static_cast<size_t>(members[k].layer)]
                              [static_cast<size_t>(members[k].index)];
        }
    }
    for (double& v : sums) {
        v /= static_cast<double>(xs.size());
    }
    return sums;
}

std::vector<double> fit_readout_weights(const RewardNet& net,
                                        const std::vector<Circuit>& circuits,
                                        const std::vector<LabeledExample>& calibration) {
    const int k = static_cast<int>(circuits.size());
    const int cols = k + 1;  // intercept absorbed by the residual
    const int n = static_cast<int>(calibration.size());
    Mat design(n, cols);
    Vec target(n, 0.0);
    for (int r = 0; r < n; ++r) {
        const ActivationTrace tr = forward_with_trace(net, calibration[r].x);
        for (int c = 0; c < k; ++c) {
            design.at(r, c) = circuit_activation_from_trace(circuits[c], tr);
        }
        design.at(r, k) = 1.0;
        target[r] = tr.output();
    }
    Mat normal(cols, cols);
    Vec rhs(cols, 0.0);
    for (int i = 0; i < cols; ++i) {
        for (int j = 0; j < cols; ++j) {
            double s = 0.0;
            for (int r = 0; r < n; ++r) {
                s += design.at(r, i) * design.at(r, j);
            }
            normal.at(i, j) = s;
        }
        normal.at(i, i) += 1e-9;
        double s = 0.0;
        for (int r = 0; r < n; ++r) {
            s += design.at(r, i) * target[r];
        }
        rhs[i] = s;
    }
    const Vec solution = solve_dense(normal, rhs);
    return Vec(solution.begin(), solution.begin() + k);
}

}  // namespace

DiscoveryReport discover_circuits(const RewardNet& net, const std::vector<LabeledExample>& head,
                                  const std::vector<LabeledExample>& tail,
                                  const DiscoveryConfig& config) {
    if (!(config.top_q > 0.0 && config.top_q <= 1.0)) {
        throw std::invalid_argument("discover_circuits: top_q must lie in (0, 1]");
    }
    DiscoveryReport report;
    report.delta = differential_activation(net, head, tail);

    std::vector<NeuronRef> candidates;
    {
        std::vector<std::pair<NeuronRef, double>> nonzero;
        for (const auto& [ref, d] : report.delta) {
            if (d != 0.0) {
                nonzero.emplace_back(ref, std::fabs(d));
            }
        }
        std::sort(nonzero.begin(), nonzero.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) {
                return a.second > b.second;
            }
            return a.first < b.first;
        });
        const size_t keep = static_cast<size_t>(
            std::ceil(config.top_q * static_cast<double>(report.delta.size())));
        for (size_t i = 0; i < nonzero.size() && i < keep; ++i) {
            candidates.push_back(nonzero[i].first);
        }
        std::sort(candidates.begin(), candidates.end());
    }

    if (candidates.empty()) {
        report.empty_warning = true;
        return report;
    }

    const int nc = static_cast<int>(candidates.size());
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < nc; ++i) {
        for (int j = i + 1; j < nc; ++j) {
            pairs.emplace_back(i, j);
        }
    }
    Vec coh_values(pairs.size(), 0.0);
    parallel_for(static_cast<int>(pairs.size()), config.threads, [&](int p) {
        const auto [i, j] = pairs[static_cast<size_t>(p)];
        coh_values[static_cast<size_t>(p)] =
            coherence(net, candidates[i], candidates[j], head, tail, config.coherence_bins);
    });

    std::vector<int> parent(nc);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find_root = [&](int v) {
        while (parent[v] != v) {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        return v;
    };
    for (size_t p = 0; p < pairs.size(); ++p) {
        const auto [i, j] = pairs[p];
        report.coherence_edges.push_back({candidates[i], candidates[j], coh_values[p]});
        if (coh_values[p] > config.coherence_threshold) {
            parent[find_root(i)] = find_root(j);
        }
    }

    std::map<int, std::vector<NeuronRef>> components;
    for (int i = 0; i < nc; ++i) {
        components[find_root(i)].push_back(candidates[i]);
    }
    std::vector<std::vector<NeuronRef>> ordered;
    for (auto& [root, members] : components) {
        std::sort(members.begin(), members.end());
        ordered.push_back(std::move(members));
    }
    std::sort(ordered.begin(), ordered.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });

    // causal validation: tail-side activations replaced by head means
    Vec rewards;
    for (const auto& ex : head) {
        rewards.push_back(forward(net, ex.x));
    }
    for (const auto& ex : tail) {
        rewards.push_back(forward(net, ex.x));
    }
    report.patch_threshold = config.patch_threshold_factor * std::sqrt(variance(rewards));

    std::vector<Circuit> survivors;
    std::vector<double> survivor_effects;
    for (const auto& members : ordered) {
        Circuit c;
        c.members = members;
        const Vec head_mean = member_means(net, members, head);
        double effect = 0.0;
        for (const auto& ex : tail) {
            const double clean = forward(net, ex.x);
            const double patched = patch_activations(net, ex.x, c, head_mean);
            effect += std::fabs(patched - clean);
        }
        effect /= static_cast<double>(tail.size());
        if (effect > report.patch_threshold) {
            survivors.push_back(std::move(c));
            survivor_effects.push_back(effect);
        }
    }

    if (survivors.empty()) {
        report.empty_warning = true;
        return report;
    }

    const Vec weights = [&] {
        std::vector<LabeledExample> calibration = head;
        calibration.insert(calibration.end(), tail.begin(), tail.end());
        return fit_readout_weights(net, survivors, calibration);
    }();
    for (size_t k = 0; k < survivors.size(); ++k) {
        survivors[k].id = "c" + std::to_string(k);
        survivors[k].readout_weight = weights[k];
        report.patch_effects[survivors[k].id] = survivor_effects[k];
        report.specialization[survivors[k].id] =
            specialization_gap(net, survivors[k], head, tail, 0.0).gap;
        report.circuits_found.tail_ids.push_back(survivors[k].id);
    }
    report.circuits_found.circuits = std::move(survivors);
    return report;
}

Json circuit_set_to_json(const CircuitSet& circuits) {
    Json doc;
    doc["schema_version"] = 1;
    Json arr = Json::array();
    for (const auto& c : circuits.circuits) {
        Json jc;
        jc["id"] = c.id;
        Json members = Json::array();
        for (const auto& m : c.members) {
            members.push_back(Json::array({m.layer, m.index}));
        }
        jc["members"] = std::move(members);
        jc["readout_weight"] = c.readout_weight;
        arr.push_back(std::move(jc));
    }
    doc["circuits"] = std::move(arr);
    doc["tail_ids"] = circuits.tail_ids;
    return doc;
}

CircuitSet circuit_set_from_json(const Json& doc, const std::string& what) {
    check_schema(doc, 1, what);
    if (!doc.contains("circuits") || !doc.contains("tail_ids")) {
        throw SchemaError(what + ": missing circuits or tail_ids");
    }
    CircuitSet out;
    for (const auto& jc : doc["circuits"]) {
        Circuit c;
        c.id = jc.at("id").get<std::string>();
        for (const auto& jm : jc.at("members")) {
            c.members.push_back(NeuronRef{jm.at(0).get<int>(), jm.at(1).get<int>()});
        }
        c.readout_weight = jc.at("readout_weight").get<double>();
        out.circuits.push_back(std::move(c));
    }
    out.tail_ids = doc["tail_ids"].get<std::vector<std::string>>();
    return out;
}

void save_circuit_set(const CircuitSet& circuits, const std::string& path) {
    save_json_file(path, circuit_set_to_json(circuits));
}

CircuitSet load_circuit_set(const std::string& path) {
    return circuit_set_from_json(load_json_file(path), "circuit set " + path);
}

Json discovery_report_to_json(const DiscoveryReport& report) {
    Json doc;
    doc["schema_version"] = 1;
    Json delta = Json::array();
    for (const auto& [ref, d] : report.delta) {
        Json row;
        row["layer"] = ref.layer;
        row["index"] = ref.index;
        row["delta"] = d;
        delta.push_back(std::move(row));
    }
    doc["delta"] = std::move(delta);
    Json edges = Json::array();
    for (const auto& e : report.coherence_edges) {
        Json row;
        row["a"] = Json::array({e.a.layer, e.a.index});
        row["b"] = Json::array({e.b.layer, e.b.index});
        row["coherence"] = e.value;
        edges.push_back(std::move(row));
    }
    doc["coherence_edges"] = std::move(edges);
    doc["patch_threshold"] = report.patch_threshold;
    Json effects = Json::object();
    for (const auto& [id, v] : report.patch_effects) {
        effects[id] = v;
    }
    doc["patch_effects"] = std::move(effects);
    Json gaps = Json::object();
    for (const auto& [id, v] : report.specialization) {
        gaps[id] = v;
    }
    doc["specialization_gap"] = std::move(gaps);
    doc["empty_warning"] = report.empty_warning;
    doc["circuits"] = circuit_set_to_json(report.circuits_found);
    return doc;
}

}  // namespace cart
