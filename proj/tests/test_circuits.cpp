#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "cart/circuits.hpp"
#include "cart/error.hpp"
#include "cart/jsonio.hpp"
#include "cart/rng.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace cart;
using namespace cart::test;

namespace {

std::vector<LabeledExample> points(const std::vector<Vec>& xs, bool tail) {
    std::vector<LabeledExample> out;
    for (const auto& x : xs) {
        LabeledExample e;
        e.x = x;
        e.is_tail = tail;
        e.cluster_id = tail ? 1 : 0;
        out.push_back(std::move(e));
    }
    return out;
}

std::set<NeuronRef> member_union(const CircuitSet& set) {
    std::set<NeuronRef> out;
    for (const auto& c : set.circuits) {
        out.insert(c.members.begin(), c.members.end());
    }
    return out;
}

double jaccard(const std::set<NeuronRef>& a, const std::set<NeuronRef>& b) {
    if (a.empty() && b.empty()) {
        return 1.0;
    }
    size_t inter = 0;
    for (const auto& m : a) {
        inter += b.count(m);
    }
    return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

}  // namespace

TEST_CASE("circuit set validation catches structural mistakes") {
    const RewardNet net = tiny_net();
    CircuitSet ok = one_circuit({{0, 0}, {0, 2}});
    CHECK_NOTHROW(ok.validate(net));
    CHECK(ok.find("c0") != nullptr);
    CHECK(ok.find("nope") == nullptr);

    CircuitSet dup = ok;
    dup.circuits.push_back(dup.circuits[0]);
    CHECK_THROWS_AS(dup.validate(net), std::invalid_argument);

    CircuitSet empty_members = ok;
    empty_members.circuits[0].members.clear();
    CHECK_THROWS_AS(empty_members.validate(net), std::invalid_argument);

    CircuitSet bad_tail = ok;
    bad_tail.tail_ids = {"ghost"};
    CHECK_THROWS_AS(bad_tail.validate(net), std::invalid_argument);

    // the output layer is not a hidden layer
    CHECK_THROWS_AS(validate_member(net, NeuronRef{1, 0}), std::out_of_range);
    CHECK_THROWS_AS(validate_member(net, NeuronRef{0, 3}), std::out_of_range);
    CHECK_NOTHROW(validate_member(net, NeuronRef{0, 1}));
}

TEST_CASE("circuit activation is the mean member activation") {
    const RewardNet net = linear_readout_net({1.0, 1.0, 1.0, 1.0});
    Circuit c;
    c.id = "c0";
    c.members = {{0, 0}, {0, 2}};
    const Vec x = {2.0, 5.0, 4.0, -1.0};
    CHECK(circuit_activation(net, c, x) == doctest::Approx(3.0).epsilon(1e-15));
    const ActivationTrace tr = forward_with_trace(net, x);
    CHECK(circuit_activation_from_trace(c, tr) == circuit_activation(net, c, x));
}

TEST_CASE("decomposition reconstructs the reward to near machine precision") {
    Rng rng(2024);
    for (uint64_t seed = 0; seed < 20; ++seed) {
        const RewardNet net = make_net({5, 8, 6, 1},
                                       seed % 2 == 0 ? Nonlinearity::Tanh : Nonlinearity::Relu,
                                       seed);
        CircuitSet set;
        set.circuits.resize(3);
        for (int k = 0; k < 3; ++k) {
            set.circuits[k].id = "c" + std::to_string(k);
            set.circuits[k].members = {{0, static_cast<int>((seed + k) % 8)},
                                       {1, static_cast<int>((seed + 2 * k) % 6)}};
            set.circuits[k].readout_weight = rng.uniform(-2.0, 2.0);
        }
        set.tail_ids = {"c0", "c2"};
        for (int rep = 0; rep < 10; ++rep) {
            Vec x(5);
            for (double& v : x) {
                v = rng.uniform(-2.0, 2.0);
            }
            const Decomposition d = decompose(net, set, x);
            REQUIRE(d.terms.size() == 3);
            double sum = d.residual;
            for (double t : d.terms) {
                sum += t;
            }
            CHECK(std::abs(d.reward - sum) <= 1e-12);
            CHECK(d.reward == forward(net, x));
            // each term is the readout weight times the mean member activation
            const ActivationTrace tr = forward_with_trace(net, x);
            for (int k = 0; k < 3; ++k) {
                CHECK(d.terms[static_cast<size_t>(k)] ==
                      doctest::Approx(set.circuits[static_cast<size_t>(k)].readout_weight *
                                      circuit_activation_from_trace(
                                          set.circuits[static_cast<size_t>(k)], tr))
                          .epsilon(1e-14));
            }
        }
    }
}

TEST_CASE("differential activation is the signed mean gap per neuron") {
    const RewardNet net = linear_readout_net({1.0, -1.0});
    const auto head = points({{1.0, 0.0}, {3.0, 2.0}}, false);  // means (2, 1)
    const auto tail = points({{5.0, -1.0}, {9.0, -3.0}}, true);  // means (7, -2)
    const auto delta = differential_activation(net, head, tail);
    CHECK(delta.at({0, 0}) == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(delta.at({0, 1}) == doctest::Approx(-3.0).epsilon(1e-15));
    CHECK_THROWS_AS(differential_activation(net, {}, tail), std::invalid_argument);
    CHECK_THROWS_AS(differential_activation(net, head, {}), std::invalid_argument);
}

TEST_CASE("coherence matches hand-computed mutual information") {
    const RewardNet net = linear_readout_net({1.0, 1.0});
    // tail: perfectly coupled bits -> MI = ln 2; head: all four combinations
    // equally often -> MI = 0
    std::vector<Vec> tail_xs, head_xs;
    for (int i = 0; i < 10; ++i) {
        tail_xs.push_back({0.0, 0.0});
        tail_xs.push_back({1.0, 1.0});
        head_xs.push_back({0.0, 0.0});
        head_xs.push_back({0.0, 1.0});
        head_xs.push_back({1.0, 0.0});
        head_xs.push_back({1.0, 1.0});
    }
    const auto head = points(head_xs, false);
    const auto tail = points(tail_xs, true);
    const double coh = coherence(net, {0, 0}, {0, 1}, head, tail, 2);
    CHECK(coh == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    // canonical member order makes the estimate exactly symmetric
    CHECK(coherence(net, {0, 1}, {0, 0}, head, tail, 2) == coh);

    CHECK_THROWS_AS(coherence(net, {0, 0}, {0, 1}, head, tail, 1), std::invalid_argument);
    const auto few = points({{0.0, 0.0}}, false);
    CHECK_THROWS_AS(coherence(net, {0, 0}, {0, 1}, few, tail, 2), std::invalid_argument);
}

TEST_CASE("constant activations carry zero mutual information") {
    const RewardNet net = linear_readout_net({1.0, 1.0});
    std::vector<Vec> xs(25, Vec{3.0, 3.0});
    const auto side = points(xs, false);
    CHECK(coherence(net, {0, 0}, {0, 1}, side, side, 2) == 0.0);
}

TEST_CASE("overrides replace post-activation values mid-forward") {
    const RewardNet net = tiny_net(Nonlinearity::Identity);
    const Vec x = {0.4, -1.2};
    // hidden pre-activations are (0.46, 0.03, -0.26); override the middle one
    const double patched = forward_with_overrides(net, x, {{{0, 1}, 10.0}});
    // output = 0.7*0.46 - 0.3*10 + 0.5*(-0.26) + 0.05
    CHECK(patched == doctest::Approx(0.322 - 3.0 - 0.13 + 0.05).epsilon(1e-12));
    CHECK(forward_with_overrides(net, x, {}) == forward(net, x));
    CHECK_THROWS_AS(forward_with_overrides(net, x, {{{5, 0}, 1.0}}), std::out_of_range);
}

TEST_CASE("patching shifts linear rewards by the readout times delta") {
    const Vec w = {0.7, -0.3, 0.5};
    const RewardNet net = linear_readout_net(w);
    const Vec x = {1.0, 2.0, -1.0};
    Circuit c;
    c.id = "c0";
    c.members = {{0, 0}, {0, 2}};
    const double base = forward(net, x);
    const double shifted = patched_reward_shift(net, x, c, 0.25);
    CHECK(shifted - base == doctest::Approx((0.7 + 0.5) * 0.25).epsilon(1e-12));

    // scalar replacement pins every member to the same value
    const double pinned = patch_activations(net, x, c, 0.0);
    CHECK(pinned == doctest::Approx(base - 0.7 * 1.0 - 0.5 * (-1.0)).epsilon(1e-12));

    CHECK_THROWS_AS(patch_activations(net, x, c, Vec{1.0}), std::invalid_argument);
    const double vec_patched = patch_activations(net, x, c, Vec{2.0, 3.0});
    CHECK(vec_patched == doctest::Approx(base + 0.7 * (2.0 - 1.0) + 0.5 * (3.0 - (-1.0)))
                             .epsilon(1e-12));
}

TEST_CASE("specialization gap separates planted circuits from noise") {
    const PlantedCase planted = make_planted(3);
    const auto head = sample_side(planted.spec, 120, false, 51);
    const auto tail = sample_side(planted.spec, 120, true, 52);
    Circuit c;
    c.id = "c0";
    c.members = planted.planted;
    const SpecializationResult r = specialization_gap(planted.net, c, head, tail, 0.5);
    CHECK(r.gap > 1.0);
    CHECK(r.specialized);

    Circuit noise;
    noise.id = "n";
    noise.members = {{0, 7}, {0, 9}};
    const SpecializationResult rn = specialization_gap(planted.net, noise, head, tail, 0.5);
    CHECK(std::abs(rn.gap) < 0.5);
    CHECK_FALSE(rn.specialized);
}

TEST_CASE("discovery recovers a planted circuit") {
    const PlantedCase planted = make_planted(17);
    const auto head = sample_side(planted.spec, 150, false, 61);
    const auto tail = sample_side(planted.spec, 150, true, 62);
    DiscoveryConfig cfg;
    cfg.top_q = 0.2;
    cfg.coherence_bins = 8;
    // perfectly coupled units sit near ln(bins) nats; incidental correlation
    // and plug-in bias stay well under half a nat at this sample size
    cfg.coherence_threshold = 0.5;
    cfg.patch_threshold_factor = 0.05;
    const DiscoveryReport report = discover_circuits(planted.net, head, tail, cfg);

    REQUIRE_FALSE(report.circuits_found.circuits.empty());
    CHECK_FALSE(report.empty_warning);
    const std::set<NeuronRef> truth(planted.planted.begin(), planted.planted.end());
    CHECK(jaccard(member_union(report.circuits_found), truth) >= 0.8);
    for (const auto& c : report.circuits_found.circuits) {
        CHECK(report.patch_effects.at(c.id) >= report.patch_threshold);
    }
    // every discovered circuit is flagged tail-specialized by construction
    CHECK(report.circuits_found.tail_ids.size() == report.circuits_found.circuits.size());
    // the planted units read out onto the reward with combined weight near 3
    bool found_plant = false;
    for (const auto& c : report.circuits_found.circuits) {
        if (std::set<NeuronRef>(c.members.begin(), c.members.end()) == truth) {
            found_plant = true;
            CHECK(c.readout_weight == doctest::Approx(3.0).epsilon(0.5));
        }
    }
    CHECK(found_plant);

    const DiscoveryReport again = discover_circuits(planted.net, head, tail, cfg);
    CHECK(discovery_report_to_json(again) == discovery_report_to_json(report));
}

TEST_CASE("an impossible coherence threshold leaves singleton circuits") {
    const PlantedCase planted = make_planted(23);
    const auto head = sample_side(planted.spec, 150, false, 71);
    const auto tail = sample_side(planted.spec, 150, true, 72);
    DiscoveryConfig cfg;
    cfg.coherence_threshold = 1e9;
    const DiscoveryReport report = discover_circuits(planted.net, head, tail, cfg);
    for (const auto& c : report.circuits_found.circuits) {
        CHECK(c.members.size() == 1);
    }
    const std::set<NeuronRef> truth(planted.planted.begin(), planted.planted.end());
    CHECK(jaccard(member_union(report.circuits_found), truth) >= 0.8);
}

TEST_CASE("a constant network yields no circuits and a warning") {
    RewardNet net = make_net({4, 6, 1}, Nonlinearity::Tanh, 5);
    for (auto& w : net.weights) {
        std::fill(w.a.begin(), w.a.end(), 0.0);
    }
    for (auto& b : net.biases) {
        std::fill(b.begin(), b.end(), 0.0);
    }
    std::vector<Vec> hx, tx;
    Rng rng(9);
    for (int i = 0; i < 100; ++i) {
        Vec a(4), b(4);
        for (double& v : a) {
            v = rng.normal();
        }
        for (double& v : b) {
            v = rng.normal() + 2.0;
        }
        hx.push_back(a);
        tx.push_back(b);
    }
    const DiscoveryReport report =
        discover_circuits(net, points(hx, false), points(tx, true), DiscoveryConfig{});
    CHECK(report.circuits_found.circuits.empty());
    CHECK(report.empty_warning);
}

TEST_CASE("discovery rejects a bad candidate fraction") {
    const PlantedCase planted = make_planted(1);
    const auto head = sample_side(planted.spec, 90, false, 1);
    const auto tail = sample_side(planted.spec, 90, true, 2);
    DiscoveryConfig cfg;
    cfg.top_q = 0.0;
    CHECK_THROWS_AS(discover_circuits(planted.net, head, tail, cfg), std::invalid_argument);
    cfg.top_q = 1.5;
    CHECK_THROWS_AS(discover_circuits(planted.net, head, tail, cfg), std::invalid_argument);
}

TEST_CASE("circuit sets survive a save and load round trip") {
    CircuitSet set;
    set.circuits.resize(2);
    set.circuits[0].id = "c0";
    set.circuits[0].members = {{0, 1}, {0, 4}, {1, 2}};
    set.circuits[0].readout_weight = -1.25;
    set.circuits[1].id = "c1";
    set.circuits[1].members = {{1, 0}};
    set.circuits[1].readout_weight = 0.5;
    set.tail_ids = {"c1"};

    const std::string path =
        (std::filesystem::temp_directory_path() / "cart_circuits_test.json").string();
    save_circuit_set(set, path);
    const CircuitSet back = load_circuit_set(path);
    REQUIRE(back.circuits.size() == 2);
    CHECK(back.circuits[0].id == "c0");
    CHECK(back.circuits[0].members == set.circuits[0].members);
    CHECK(back.circuits[0].readout_weight == set.circuits[0].readout_weight);
    CHECK(back.tail_ids == set.tail_ids);
    std::filesystem::remove(path);

    CHECK_THROWS_AS(load_circuit_set("/nonexistent/circuits.json"), MissingArtifactError);

    Json doc = circuit_set_to_json(set);
    doc["schema_version"] = 99;
    CHECK_THROWS_AS(circuit_set_from_json(doc, "test"), SchemaError);
}

TEST_CASE("discovery reports serialize with the expected fields") {
    const PlantedCase planted = make_planted(29);
    const auto head = sample_side(planted.spec, 100, false, 81);
    const auto tail = sample_side(planted.spec, 100, true, 82);
    const DiscoveryReport report =
        discover_circuits(planted.net, head, tail, DiscoveryConfig{});
    const Json doc = discovery_report_to_json(report);
    for (const char* key : {"schema_version", "delta", "coherence_edges", "patch_threshold",
                            "patch_effects", "specialization_gap", "empty_warning", "circuits"}) {
        CHECK(doc.contains(key));
    }
}
