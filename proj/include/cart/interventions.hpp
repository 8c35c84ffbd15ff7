#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cart/circuits.hpp"
#include "cart/data.hpp"
#include "cart/mlp.hpp"
#include "cart/vulnerability.hpp"

namespace cart {

struct SelectRule {
    std::optional<int> top_k;
    std::optional<double> threshold;  // inclusive on vuln
};

// Ranks by vuln descending, ties by id ascending. Unassessed circuits are
// never selected.
std::vector<std::string> select_vulnerable(const VulnerabilityReport& report,
                                           const SelectRule& rule);

struct GenConfig {
    GenStrategy strategy = GenStrategy::GaussianJitter;
    double strength = 0.1;
    int candidates = 64;
};

// One augmented example per base: the candidate maximizing the summed
// activation of the selected circuits, labeled by the ground-truth label_fn.
std::vector<LabeledExample> augment(const RewardNet& net, const CircuitSet& circuits,
                                    const std::vector<std::string>& selected,
                                    const std::vector<LabeledExample>& base,
                                    const MixtureSpec& spec, const GenConfig& gen, uint64_t seed);

double loss_aug(const RewardNet& net, const std::vector<LabeledExample>& augmented);

// lambda times the summed population variance of selected circuit
// activations over the tail sample; needs at least 2 tail examples.
double loss_circuit(const RewardNet& net, const CircuitSet& circuits,
                    const std::vector<std::string>& selected,
                    const std::vector<LabeledExample>& tail, double lambda);

double curriculum_weight(long t, bool is_tail, double eta);

double loss_prog(const RewardNet& net, const std::vector<LabeledExample>& batch, long t,
                 double eta);

struct CartBatch {
    std::vector<LabeledExample> head;
    std::vector<LabeledExample> combined;   // curriculum batch
    std::vector<LabeledExample> tail;       // variance-regularizer batch
    std::vector<LabeledExample> augmented;
};

struct CartLossBreakdown {
    double head = 0.0;
    double aug = 0.0;
    double circuit = 0.0;
    double prog = 0.0;
    double total = 0.0;
};

struct CartConfig {
    double lambda_reg = 0.1;
    double eta_curriculum = 0.01;
    GenConfig gen;
    int augment_per_epoch = 128;  // base points per epoch, 0 = all tails
    int aug_batch_size = 8;
    SelectRule select{3, std::nullopt};
    double learning_rate = 1e-2;
    int epochs = 30;
    int batch_size = 32;
    uint64_t seed = 1;
    double scale_head = 1.0;
    double scale_aug = 1.0;
    double scale_circuit = 1.0;
    double scale_prog = 1.0;
    bool prog_tail_only = false;
    int checkpoint_interval = 0;  // epochs, 0 = off

    void validate() const;
};

CartLossBreakdown loss_cart(const RewardNet& net, const CartBatch& batch,
                            const CircuitSet& circuits, const std::vector<std::string>& selected,
                            const CartConfig& config, long t);

GradientBundle cart_gradient(const RewardNet& net, const CartBatch& batch,
                             const CircuitSet& circuits, const std::vector<std::string>& selected,
                             const CartConfig& config, long t);

double mse(const RewardNet& net, const std::vector<LabeledExample>& examples);

enum class TrainObjective { Baseline, Cart };

struct EpochStats {
    int epoch = 0;
    double loss_head = 0.0;
    double loss_aug = 0.0;
    double loss_circuit = 0.0;
    double loss_prog = 0.0;
    double loss_total = 0.0;
    double tail_mse = 0.0;
    double head_mse = 0.0;
};

struct TrainData {
    std::vector<LabeledExample> train;
    std::vector<LabeledExample> eval_head;
    std::vector<LabeledExample> eval_tail;
};

struct TrainResult {
    RewardNet net;
    std::vector<EpochStats> history;
    bool aborted = false;
    std::string last_good_checkpoint;
    long final_step = 0;
};

// Minibatch SGD. Baseline minimizes plain MSE over each full minibatch;
// Cart minimizes the four-part objective with per-epoch augmentation
// regenerated against the current parameters.
TrainResult train(const RewardNet& init, const TrainData& data, const CircuitSet& circuits,
                  const std::vector<std::string>& selected, const MixtureSpec& spec,
                  const CartConfig& config, TrainObjective objective,
                  const std::string& checkpoint_dir = "");

std::string history_to_csv(const std::vector<EpochStats>& history);

struct EnsembleWeights {
    Vec alphas;

    void validate() const;  // simplex within 1e-9
};

Vec project_to_simplex(Vec v);

double ensemble_predict(const std::vector<RewardNet>& models, const EnsembleWeights& weights,
                        const Vec& x);

struct EnsembleResult {
    EnsembleWeights weights;
    double achieved_tail_mse = 0.0;
};

// Projected gradient descent from uniform weights with a Lipschitz step.
EnsembleResult optimize_ensemble(const std::vector<RewardNet>& models,
                                 const std::vector<LabeledExample>& tail, int iterations);

}  // namespace cart
