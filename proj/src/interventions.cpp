#include "cart/interventions.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>

#include "cart/error.hpp"
#include "cart/rng.hpp"

namespace cart {

std::vector<std::string> select_vulnerable(const VulnerabilityReport& report,
                                           const SelectRule& rule) {
    if (!rule.top_k.has_value() && !rule.threshold.has_value()) {
        throw ConfigError("select_vulnerable: need top_k or threshold");
    }
    std::vector<std::pair<std::string, double>> ranked;
    for (const auto& [id, a] : report.per_circuit) {
        if (!a.unassessed) {
            ranked.emplace_back(id, a.vuln);
        }
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) {
            return a.second > b.second;
        }
        return a.first < b.first;
    });
    std::vector<std::string> out;
    for (const auto& [id, vuln] : ranked) {
        if (rule.threshold.has_value() && vuln < *rule.threshold) {
            continue;
        }
        out.push_back(id);
    }
    if (rule.top_k.has_value() && static_cast<int>(out.size()) > *rule.top_k) {
        out.resize(static_cast<size_t>(std::max(0, *rule.top_k)));
    }
    return out;
}

namespace {

double selected_score(const RewardNet& net, const CircuitSet& circuits,
                      const std::vector<std::string>& selected, const Vec& x) {
    const ActivationTrace trace = forward_with_trace(net, x);
    double s = 0.0;
    for (const auto& id : selected) {
        const Circuit* c = circuits.find(id);
        if (c == nullptr) {
            throw std::invalid_argument("unknown selected circuit id " + id);
        }
        s += circuit_activation_from_trace(*c, trace);
    }
    return s;
}

}  // namespace

std::vector<LabeledExample> augment(const RewardNet& net, const CircuitSet& circuits,
                                    const std::vector<std::string>& selected,
                                    const std::vector<LabeledExample>& base,
                                    const MixtureSpec& spec, const GenConfig& gen, uint64_t seed) {
    if (gen.candidates < 1) {
        throw std::invalid_argument("augment: candidate count must be at least 1");
    }
    std::vector<Vec> pool;
    pool.reserve(base.size());
    for (const auto& ex : base) {
        pool.push_back(ex.x);
    }
    std::vector<LabeledExample> out;
    out.reserve(base.size());
    for (size_t i = 0; i < base.size(); ++i) {
        const auto candidates = generative_transform(base[i].x, gen.strategy, gen.strength,
                                                     gen.candidates, derive_seed(seed, i), pool);
        size_t best = 0;
        double best_score = selected_score(net, circuits, selected, candidates[0]);
        for (size_t k = 1; k < candidates.size(); ++k) {
            const double score = selected_score(net, circuits, selected, candidates[k]);
            if (score > best_score) {
                best_score = score;
                best = k;
            }
        }
        LabeledExample ex;
        ex.x = candidates[best];
        ex.cluster_id = base[i].cluster_id;
        ex.is_tail = base[i].is_tail;
        ex.y = label_value(spec, ex.cluster_id, ex.x);
        out.push_back(std::move(ex));
    }
    return out;
}

double mse(const RewardNet& net, const std::vector<LabeledExample>& examples) {
    if (examples.empty()) {
        return 0.0;
    }
    double s = 0.0;
    for (const auto& ex : examples) {
        const double e = forward(net, ex.x) - ex.y;
        s += e * e;
    }
    return s / static_cast<double>(examples.size());
}

double loss_aug(const RewardNet& net, const std::vector<LabeledExample>& augmented) {
    return mse(net, augmented);
}

double loss_circuit(const RewardNet& net, const CircuitSet& circuits,
                    const std::vector<std::string>& selected,
                    const std::vector<LabeledExample>& tail, double lambda) {
    if (tail.size() < 2) {
        throw std::invalid_argument("loss_circuit: needs at least 2 tail examples");
    }
    if (lambda == 0.0 || selected.empty()) {
        return 0.0;
    }
    double total = 0.0;
    for (const auto& id : selected) {
        const Circuit* c = circuits.find(id);
        if (c == nullptr) {
            throw std::invalid_argument("unknown selected circuit id " + id);
        }
        Vec acts;
        acts.reserve(tail.size());
        for (const auto& ex : tail) {
            acts.push_back(circuit_activation(net, *c, ex.x));
        }
        total += variance(acts);
    }
    return lambda * total;
}

double curriculum_weight(long t, bool is_tail, double eta) {
    if (t < 0) {
        throw std::invalid_argument("curriculum_weight: t must be nonnegative");
    }
    if (eta <= 0.0) {
        throw std::invalid_argument("curriculum_weight: eta must be positive");
    }
    if (!is_tail) {
        return 0.0;
    }
    return std::min(1.0, eta * static_cast<double>(t));
}

double loss_prog(const RewardNet& net, const std::vector<LabeledExample>& batch, long t,
                 double eta) {
    if (batch.empty()) {
        throw std::invalid_argument("loss_prog: batch is empty");
    }
    double s = 0.0;
    for (const auto& ex : batch) {
        const double w = curriculum_weight(t, ex.is_tail, eta);
        if (w == 0.0) {
            continue;
        }
        const double e = forward(net, ex.x) - ex.y;
        s += w * e * e;
    }
    return s / static_cast<double>(batch.size());
}

void CartConfig::validate() const {
    if (lambda_reg < 0.0) {
        throw ConfigError("cart.lambda_reg must be nonnegative");
    }
    if (eta_curriculum <= 0.0) {
        throw ConfigError("cart.eta_curriculum must be positive");
    }
    if (gen.candidates < 1) {
        throw ConfigError("cart.augment_candidates must be at least 1");
    }
    if (gen.strength < 0.0) {
        throw ConfigError("cart.strength must be nonnegative");
    }
    if (augment_per_epoch < 0) {
        throw ConfigError("cart.augment_per_epoch must be nonnegative");
    }
    if (aug_batch_size < 1) {
        throw ConfigError("cart.aug_batch_size must be at least 1");
    }
    if (learning_rate <= 0.0) {
        throw ConfigError("cart.learning_rate must be positive");
    }
    if (epochs < 0) {
        throw ConfigError("cart.epochs must be nonnegative");
    }
    if (batch_size < 1) {
        throw ConfigError("cart.batch_size must be at least 1");
    }
    if (scale_head < 0.0 || scale_aug < 0.0 || scale_circuit < 0.0 || scale_prog < 0.0) {
        throw ConfigError("cart loss scales must be nonnegative");
    }
    if (checkpoint_interval < 0) {
        throw ConfigError("cart.checkpoint_interval must be nonnegative");
    }
}

CartLossBreakdown loss_cart(const RewardNet& net, const CartBatch& batch,
                            const CircuitSet& circuits, const std::vector<std::string>& selected,
                            const CartConfig& config, long t) {
    if (batch.head.empty()) {
        throw std::invalid_argument("loss_cart: head batch is empty");
    }
    CartLossBreakdown b;
    b.head = config.scale_head * mse(net, batch.head);
    b.aug = config.scale_aug * loss_aug(net, batch.augmented);
    if (config.lambda_reg > 0.0 && !selected.empty() && batch.tail.size() >= 2) {
        b.circuit =
            config.scale_circuit * loss_circuit(net, circuits, selected, batch.tail,
                                                config.lambda_reg);
    }
    if (!batch.combined.empty()) {
        b.prog = config.scale_prog * loss_prog(net, batch.combined, t, config.eta_curriculum);
    }
    b.total = b.head + b.aug + b.circuit + b.prog;
    return b;
}

namespace {

void accumulate_mse_grad(const RewardNet& net, const std::vector<LabeledExample>& examples,
                         double scale, GradientBundle& grads) {
    if (examples.empty() || scale == 0.0) {
        return;
    }
    const double inv_n = 1.0 / static_cast<double>(examples.size());
    for (const auto& ex : examples) {
        const ActivationTrace trace = forward_with_trace(net, ex.x);
        const double d_out = scale * 2.0 * (trace.output() - ex.y) * inv_n;
        grads.accumulate(backward(net, trace, d_out));
    }
}

void accumulate_prog_grad(const RewardNet& net, const std::vector<LabeledExample>& batch,
                          long t, double eta, double scale, GradientBundle& grads) {
    if (batch.empty() || scale == 0.0) {
        return;
    }
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    for (const auto& ex : batch) {
        const double w = curriculum_weight(t, ex.is_tail, eta);
        if (w == 0.0) {
            continue;
        }
        const ActivationTrace trace = forward_with_trace(net, ex.x);
        const double d_out = scale * 2.0 * w * (trace.output() - ex.y) * inv_n;
        grads.accumulate(backward(net, trace, d_out));
    }
}

void accumulate_circuit_grad(const RewardNet& net, const CircuitSet& circuits,
                             const std::vector<std::string>& selected,
                             const std::vector<LabeledExample>& tail, double lambda, double scale,
                             GradientBundle& grads) {
    if (lambda == 0.0 || scale == 0.0 || selected.empty() || tail.size() < 2) {
        return;
    }
    const size_t n = tail.size();
    std::vector<ActivationTrace> traces;
    traces.reserve(n);
    for (const auto& ex : tail) {
        traces.push_back(forward_with_trace(net, ex.x));
    }
    struct Term {
        const Circuit* circuit;
        Vec acts;
        double mean_act;
    };
    std::vector<Term> terms;
    for (const auto& id : selected) {
        const Circuit* c = circuits.find(id);
        if (c == nullptr) {
            throw std::invalid_argument("unknown selected circuit id " + id);
        }
        Term term;
        term.circuit = c;
        term.acts.reserve(n);
        for (const auto& trace : traces) {
            term.acts.push_back(circuit_activation_from_trace(*c, trace));
        }
        term.mean_act = mean(term.acts);
        terms.push_back(std::move(term));
    }
    const int hidden_layers = net.num_layers() - 1;
    for (size_t i = 0; i < n; ++i) {
        std::vector<Vec> seeds(static_cast<size_t>(hidden_layers));
        bool any = false;
        for (const auto& term : terms) {
            const double coef = scale * lambda * 2.0 / static_cast<double>(n) *
                                (term.acts[i] - term.mean_act) /
                                static_cast<double>(term.circuit->members.size());
            if (coef == 0.0) {
                continue;
            }
            for (const auto& m : term.circuit->members) {
                auto& layer = seeds[static_cast<size_t>(m.layer)];
                if (layer.empty()) {
                    layer.assign(static_cast<size_t>(net.layer_dims[m.layer + 1]), 0.0);
                }
                layer[static_cast<size_t>(m.index)] += coef;
                any = true;
            }
        }
        if (any) {
            grads.accumulate(backward_multi(net, traces[i], 0.0, seeds));
        }
    }
}

}  // namespace

GradientBundle cart_gradient(const RewardNet& net, const CartBatch& batch,
                             const CircuitSet& circuits, const std::vector<std::string>& selected,
                             const CartConfig& config, long t) {
    GradientBundle grads = zero_gradients(net);
    accumulate_mse_grad(net, batch.head, config.scale_head, grads);
    accumulate_mse_grad(net, batch.augmented, config.scale_aug, grads);
    accumulate_circuit_grad(net, circuits, selected, batch.tail, config.lambda_reg,
                            config.scale_circuit, grads);
    accumulate_prog_grad(net, batch.combined, t, config.eta_curriculum, config.scale_prog, grads);
    return grads;
}

namespace {

bool params_finite(const RewardNet& net) {
    for (int l = 0; l < net.num_layers(); ++l) {
        for (double v : net.weights[l].a) {
            if (!std::isfinite(v)) {
                return false;
            }
        }
        for (double v : net.biases[l]) {
            if (!std::isfinite(v)) {
                return false;
            }
        }
    }
    return true;
}

}  // namespace

TrainResult train(const RewardNet& init, const TrainData& data, const CircuitSet& circuits,
                  const std::vector<std::string>& selected, const MixtureSpec& spec,
                  const CartConfig& config, TrainObjective objective,
                  const std::string& checkpoint_dir) {
    config.validate();
    if (data.train.empty()) {
        throw std::invalid_argument("train: training set is empty");
    }
    TrainResult result;
    result.net = init;
    RewardNet last_good = init;

    const bool cart = objective == TrainObjective::Cart;
    std::vector<LabeledExample> tail_bases;
    if (cart) {
        tail_bases = filter_side(data.train, true);
    }

    Rng shuffle_rng(derive_seed(config.seed, 0x200));
    std::vector<size_t> order(data.train.size());
    for (size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }

    long t = 0;
    std::vector<LabeledExample> augmented;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        if (cart && !selected.empty() && !tail_bases.empty()) {
            std::vector<LabeledExample> bases;
            if (config.augment_per_epoch > 0 &&
                static_cast<size_t>(config.augment_per_epoch) < tail_bases.size()) {
                bases.reserve(static_cast<size_t>(config.augment_per_epoch));
                const size_t start = static_cast<size_t>(epoch) *
                                     static_cast<size_t>(config.augment_per_epoch);
                for (int k = 0; k < config.augment_per_epoch; ++k) {
                    bases.push_back(tail_bases[(start + static_cast<size_t>(k)) %
                                               tail_bases.size()]);
                }
            } else {
                bases = tail_bases;
            }
            augmented = augment(result.net, circuits, selected, bases, spec, config.gen,
                                derive_seed(config.seed, 0x9000 + static_cast<uint64_t>(epoch)));
        }

        for (size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[static_cast<size_t>(shuffle_rng.uniform_int(
                                        static_cast<int>(i)))]);
        }

        size_t aug_cursor = 0;
        const size_t steps =
            (order.size() + static_cast<size_t>(config.batch_size) - 1) /
            static_cast<size_t>(config.batch_size);
        for (size_t s = 0; s < steps; ++s) {
            const size_t lo = s * static_cast<size_t>(config.batch_size);
            const size_t hi = std::min(order.size(), lo + static_cast<size_t>(config.batch_size));
            CartBatch batch;
            if (cart) {
                for (size_t i = lo; i < hi; ++i) {
                    const LabeledExample& ex = data.train[order[i]];
                    (ex.is_tail ? batch.tail : batch.head).push_back(ex);
                    if (!config.prog_tail_only || ex.is_tail) {
                        batch.combined.push_back(ex);
                    }
                }
                if (!augmented.empty()) {
                    const size_t take =
                        std::min(augmented.size(), static_cast<size_t>(config.aug_batch_size));
                    for (size_t k = 0; k < take; ++k) {
                        batch.augmented.push_back(augmented[aug_cursor]);
                        aug_cursor = (aug_cursor + 1) % augmented.size();
                    }
                }
            } else {
                for (size_t i = lo; i < hi; ++i) {
                    batch.head.push_back(data.train[order[i]]);
                }
            }
            const GradientBundle grads =
                cart_gradient(result.net, batch, circuits, selected, config, t);
            axpy_params(result.net, -config.learning_rate, grads);
            ++t;
            if (!params_finite(result.net)) {
                result.aborted = true;
                result.net = last_good;
                result.final_step = t;
                return result;
            }
        }

        EpochStats stats;
        stats.epoch = epoch;
        if (cart) {
            CartBatch full;
            full.head = filter_side(data.train, false);
            full.tail = tail_bases;
            full.combined = config.prog_tail_only ? tail_bases : data.train;
            full.augmented = augmented;
            const CartLossBreakdown b =
                loss_cart(result.net, full, circuits, selected, config, t);
            stats.loss_head = b.head;
            stats.loss_aug = b.aug;
            stats.loss_circuit = b.circuit;
            stats.loss_prog = b.prog;
            stats.loss_total = b.total;
        } else {
            stats.loss_head = config.scale_head * mse(result.net, data.train);
            stats.loss_total = stats.loss_head;
        }
        stats.tail_mse = mse(result.net, data.eval_tail);
        stats.head_mse = mse(result.net, data.eval_head);
        result.history.push_back(stats);
        last_good = result.net;

        if (config.checkpoint_interval > 0 && !checkpoint_dir.empty() &&
            (epoch + 1) % config.checkpoint_interval == 0) {
            const std::string path = (std::filesystem::path(checkpoint_dir) /
                                      ("checkpoint_epoch_" + std::to_string(epoch) + ".json"))
                                         .string();
            save_checkpoint(result.net, path);
            result.last_good_checkpoint = path;
        }
    }
    result.final_step = t;
    return result;
}

std::string history_to_csv(const std::vector<EpochStats>& history) {
    std::string csv =
        "epoch,loss_head,loss_aug,loss_circuit,loss_prog,loss_total,tail_mse,head_mse\n";
    for (const auto& s : history) {
        csv += std::to_string(s.epoch) + "," + format_double(s.loss_head) + "," +
               format_double(s.loss_aug) + "," + format_double(s.loss_circuit) + "," +
               format_double(s.loss_prog) + "," + format_double(s.loss_total) + "," +
               format_double(s.tail_mse) + "," + format_double(s.head_mse) + "\n";
    }
    return csv;
}

void EnsembleWeights::validate() const {
    if (alphas.empty()) {
        throw std::invalid_argument("ensemble weights are empty");
    }
    double sum = 0.0;
    for (double a : alphas) {
        if (a < 0.0) {
            throw std::invalid_argument("ensemble weight below zero");
        }
        sum += a;
    }
    if (std::fabs(sum - 1.0) > 1e-9) {
        throw std::invalid_argument("ensemble weights must sum to 1");
    }
}

Vec project_to_simplex(Vec v) {
    const size_t k = v.size();
    Vec u = v;
    std::sort(u.begin(), u.end(), std::greater<double>());
    double cumsum = 0.0;
    double tau = 0.0;
    for (size_t j = 0; j < k; ++j) {
        cumsum += u[j];
        const double candidate = (1.0 - cumsum) / static_cast<double>(j + 1);
        if (u[j] + candidate > 0.0) {
            tau = candidate;
        }
    }
    for (double& x : v) {
        x = std::max(0.0, x + tau);
    }
    // renormalization guards the sum against accumulated rounding
    double sum = 0.0;
    for (double x : v) {
        sum += x;
    }
    if (sum > 0.0) {
        for (double& x : v) {
            x /= sum;
        }
    }
    return v;
}

double ensemble_predict(const std::vector<RewardNet>& models, const EnsembleWeights& weights,
                        const Vec& x) {
    if (models.empty() || models.size() != weights.alphas.size()) {
        throw std::invalid_argument("ensemble_predict: model and weight counts differ");
    }
    double s = 0.0;
    for (size_t k = 0; k < models.size(); ++k) {
        s += weights.alphas[k] * forward(models[k], x);
    }
    return s;
}

EnsembleResult optimize_ensemble(const std::vector<RewardNet>& models,
                                 const std::vector<LabeledExample>& tail, int iterations) {
    if (models.empty()) {
        throw std::invalid_argument("optimize_ensemble: no models");
    }
    if (tail.empty()) {
        throw std::invalid_argument("optimize_ensemble: tail set is empty");
    }
    if (iterations < 0) {
        throw std::invalid_argument("optimize_ensemble: iterations must be nonnegative");
    }
    const size_t k = models.size();
    const size_t n = tail.size();
    EnsembleResult result;
    // predictions matrix, n rows by k columns
    Mat preds(static_cast<int>(n), static_cast<int>(k));
    Vec targets(n, 0.0);
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < k; ++j) {
            preds.at(static_cast<int>(i), static_cast<int>(j)) = forward(models[j], tail[i].x);
        }
        targets[i] = tail[i].y;
    }
    auto loss_of = [&](const Vec& alphas) {
        double s = 0.0;
        for (size_t i = 0; i < n; ++i) {
            double pred = 0.0;
            for (size_t j = 0; j < k; ++j) {
                pred += alphas[j] * preds.at(static_cast<int>(i), static_cast<int>(j));
            }
            const double e = pred - targets[i];
            s += e * e;
        }
        return s / static_cast<double>(n);
    };
    Vec alphas(k, 1.0 / static_cast<double>(k));
    if (k == 1) {
        result.weights.alphas = alphas;
        result.achieved_tail_mse = loss_of(alphas);
        return result;
    }
    // hessian of the quadratic is (2/n) P^T P; its top eigenvalue sets the step
    Mat h(static_cast<int>(k), static_cast<int>(k));
    for (size_t a = 0; a < k; ++a) {
        for (size_t b = 0; b < k; ++b) {
            double s = 0.0;
            for (size_t i = 0; i < n; ++i) {
                s += preds.at(static_cast<int>(i), static_cast<int>(a)) *
                     preds.at(static_cast<int>(i), static_cast<int>(b));
            }
            h.at(static_cast<int>(a), static_cast<int>(b)) = 2.0 * s / static_cast<double>(n);
        }
    }
    Vec eigvec(k, 1.0);
    double eig = 0.0;
    for (int it = 0; it < 100; ++it) {
        Vec next = matvec(h, eigvec);
        const double norm = norm2(next);
        if (norm == 0.0) {
            break;
        }
        for (double& v : next) {
            v /= norm;
        }
        eigvec = std::move(next);
        eig = norm;
    }
    const double lr = eig > 0.0 ? 1.0 / eig : 1.0;
    for (int it = 0; it < iterations; ++it) {
        Vec grad(k, 0.0);
        for (size_t i = 0; i < n; ++i) {
            double pred = 0.0;
            for (size_t j = 0; j < k; ++j) {
                pred += alphas[j] * preds.at(static_cast<int>(i), static_cast<int>(j));
            }
            const double e = 2.0 * (pred - targets[i]) / static_cast<double>(n);
            for (size_t j = 0; j < k; ++j) {
                grad[j] += e * preds.at(static_cast<int>(i), static_cast<int>(j));
            }
        }
        for (size_t j = 0; j < k; ++j) {
            alphas[j] -= lr * grad[j];
        }
        alphas = project_to_simplex(std::move(alphas));
    }
    // keep whichever is better, the descent endpoint or a pure vertex, so a
    // single strong member is never diluted
    double best = loss_of(alphas);
    for (size_t j = 0; j < k; ++j) {
        Vec vertex(k, 0.0);
        vertex[j] = 1.0;
        const double v = loss_of(vertex);
        if (v < best) {
            best = v;
            alphas = std::move(vertex);
        }
    }
    result.weights.alphas = alphas;
    result.achieved_tail_mse = best;
    return result;
}

}  // namespace cart
