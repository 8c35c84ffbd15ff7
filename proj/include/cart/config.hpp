#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cart/circuits.hpp"
#include "cart/data.hpp"
#include "cart/interventions.hpp"
#include "cart/jsonio.hpp"
#include "cart/vulnerability.hpp"

namespace cart {

struct ClusterConfig {
    std::optional<Vec> center;
    std::optional<double> stdev;
    std::optional<double> offset;
};

struct MixtureConfig {
    double alpha = 0.9;
    int input_dim = 16;
    std::string label_fn = "radial_quadratic";
    int n_head_clusters = 2;
    int n_tail_clusters = 3;
    double head_stdev = 0.5;
    double tail_stdev = 0.5;
    double cluster_center_scale = 3.0;
    // explicit cluster tables take precedence over the counts above
    std::vector<ClusterConfig> head_clusters;
    std::vector<ClusterConfig> tail_clusters;
};

struct SynthConfig {
    int n_train = 5000;
    int n_eval_head = 500;
    int n_eval_tail = 500;
};

struct NetConfig {
    std::vector<int> hidden = {32, 16};
    std::string nonlinearity = "tanh";
};

struct TrainSection {
    double learning_rate = 0.01;
    int epochs = 30;
    int batch_size = 32;
    int checkpoint_interval = 0;
};

struct VulnSection {
    VulnWeights weights;
    double epsilon_bound = 0.5;
    std::optional<double> tau_act;
    bool normalize_sens = true;
    int sens_steps = 20;
    int sens_restarts = 4;
    double sens_step_factor = 0.25;
    double sens_fd_step = 1e-5;
    int sens_max_examples = 64;
    int neighborhood_m = 8;
    double neighborhood_radius = 0.25;
};

struct CartSection {
    double lambda_reg = 0.1;
    double eta_curriculum = 0.01;
    int augment_candidates = 64;
    std::string strategy = "gaussian_jitter";
    double strength = 0.1;
    int augment_per_epoch = 128;
    int aug_batch_size = 8;
    std::optional<int> top_k = 3;
    std::optional<double> vuln_threshold;
    bool prog_tail_only = false;
    double scale_head = 1.0;
    double scale_aug = 1.0;
    double scale_circuit = 1.0;
    double scale_prog = 1.0;
};

struct EnsembleSection {
    int members = 3;
    int iterations = 2000;
    int calibration_n = 500;
};

struct BoundSection {
    double c_const = 1.0;
    double beta_coef = 1.0;
    double delta_conf = 0.05;
};

struct RunConfig {
    uint64_t seed = 1;
    int threads = 0;  // 0 = hardware count
    MixtureConfig mixture;
    SynthConfig synth;
    NetConfig net;
    TrainSection train;
    DiscoveryConfig discover;
    VulnSection vuln;
    CartSection cart;
    EnsembleSection ensemble;
    BoundSection bound;
};

// Parses, rejects unknown keys by dotted path, and validates ranges.
RunConfig load_run_config(const std::string& path);

// Fills in auto-generated cluster centers and offsets; deterministic in seed.
MixtureSpec resolve_mixture(const RunConfig& config, uint64_t seed);

// Fully resolved echo of the config for manifests.
Json config_snapshot(const RunConfig& config, uint64_t seed, int threads);

CartConfig make_cart_config(const RunConfig& config, uint64_t seed);
AssessConfig make_assess_config(const RunConfig& config, uint64_t seed);

}  // namespace cart
