#include "cart/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <vector>

#include "cart/bound.hpp"
#include "cart/circuits.hpp"
#include "cart/config.hpp"
#include "cart/data.hpp"
#include "cart/error.hpp"
#include "cart/interventions.hpp"
#include "cart/jsonio.hpp"
#include "cart/manifest.hpp"
#include "cart/mlp.hpp"
#include "cart/parallel.hpp"
#include "cart/rng.hpp"
#include "cart/version.hpp"
#include "cart/vulnerability.hpp"

namespace cart {

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct StageContext {
    StageOptions options;
    RunConfig config;
    uint64_t seed = 0;
    int threads = 1;
    fs::path run_dir;
    Clock::time_point start;

    fs::path dir(const char* stage) const { return run_dir / stage; }

    double elapsed() const {
        return std::chrono::duration<double>(Clock::now() - start).count();
    }

    void say(const std::string& line) const {
        if (!options.quiet) {
            std::cout << line << "\n";
        }
    }
};

StageContext make_context(const StageOptions& options) {
    StageContext ctx;
    ctx.options = options;
    ctx.config = load_run_config(options.config_path);
    ctx.seed = options.seed_override.value_or(ctx.config.seed);
    ctx.threads = resolve_threads(options.threads_override.value_or(ctx.config.threads));
    ctx.run_dir = options.out_dir;
    ctx.start = Clock::now();
    return ctx;
}

std::string path_str(const fs::path& p) { return p.string(); }

void require_artifact(const fs::path& p) {
    if (!fs::exists(p)) {
        throw MissingArtifactError("missing artifact: " + p.string() +
                                   " (run the upstream stage first)");
    }
}

void write_stage_manifest(const StageContext& ctx, const std::string& command,
                          const fs::path& stage_dir, std::vector<std::string> inputs,
                          std::vector<std::string> outputs) {
    RunManifest m;
    m.command = command;
    m.config_path = ctx.options.config_path;
    m.config_snapshot = config_snapshot(ctx.config, ctx.seed, ctx.threads);
    m.seed = ctx.seed;
    m.inputs = std::move(inputs);
    m.outputs = std::move(outputs);
    m.tool_version = kToolVersion;
    m.wall_clock_seconds = ctx.elapsed();
    save_manifest(m, path_str(stage_dir / "manifest.json"));
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

std::vector<int> net_dims(const RunConfig& config) {
    std::vector<int> dims;
    dims.push_back(config.mixture.input_dim);
    for (int h : config.net.hidden) {
        dims.push_back(h);
    }
    dims.push_back(1);
    return dims;
}

TrainData load_train_data(const StageContext& ctx) {
    const fs::path data = ctx.dir("data");
    require_artifact(data / "train.jsonl");
    require_artifact(data / "eval_head.jsonl");
    require_artifact(data / "eval_tail.jsonl");
    TrainData d;
    d.train = read_jsonl(path_str(data / "train.jsonl"));
    d.eval_head = read_jsonl(path_str(data / "eval_head.jsonl"));
    d.eval_tail = read_jsonl(path_str(data / "eval_tail.jsonl"));
    return d;
}

RewardNet load_model(const fs::path& path) {
    require_artifact(path);
    return load_checkpoint(path_str(path));
}

CircuitSet load_circuits(const StageContext& ctx) {
    const fs::path p = ctx.dir("discover") / "circuits.json";
    require_artifact(p);
    return load_circuit_set(path_str(p));
}

VulnerabilityReport load_vuln_report(const StageContext& ctx) {
    const fs::path p = ctx.dir("assess") / "vulnerability.json";
    require_artifact(p);
    return vulnerability_report_from_json(load_json_file(path_str(p)), path_str(p));
}

void report_training(const StageContext& ctx, const char* label, const TrainResult& result) {
    if (result.aborted) {
        ctx.say(std::string(label) + ": diverged, restored last finite parameters");
    }
    if (!result.history.empty()) {
        const EpochStats& last = result.history.back();
        ctx.say(std::string(label) + ": " + std::to_string(result.history.size()) +
                " epochs, head mse " + fmt(last.head_mse) + ", tail mse " + fmt(last.tail_mse));
    }
}

}  // namespace

void run_synth(const StageOptions& options) {
    StageContext ctx = make_context(options);
    const fs::path stage = ctx.dir("data");
    const MixtureSpec spec = resolve_mixture(ctx.config, ctx.seed);

    const auto train = sample(spec, ctx.config.synth.n_train, derive_seed(ctx.seed, 0x1));
    const auto eval_head =
        sample_side(spec, ctx.config.synth.n_eval_head, false, derive_seed(ctx.seed, 0x2));
    const auto eval_tail =
        sample_side(spec, ctx.config.synth.n_eval_tail, true, derive_seed(ctx.seed, 0x3));

    write_jsonl(path_str(stage / "train.jsonl"), train);
    write_jsonl(path_str(stage / "eval_head.jsonl"), eval_head);
    write_jsonl(path_str(stage / "eval_tail.jsonl"), eval_tail);

    long tails = 0;
    for (const auto& e : train) {
        tails += e.is_tail ? 1 : 0;
    }
    ctx.say("synth: " + std::to_string(train.size()) + " train (" + std::to_string(tails) +
            " tail), " + std::to_string(eval_head.size()) + "+" +
            std::to_string(eval_tail.size()) + " eval");

    write_stage_manifest(ctx, "synth", stage, {ctx.options.config_path},
                         {path_str(stage / "train.jsonl"), path_str(stage / "eval_head.jsonl"),
                          path_str(stage / "eval_tail.jsonl")});
}

void run_train_baseline(const StageOptions& options) {
    StageContext ctx = make_context(options);
    const fs::path stage = ctx.dir("baseline");
    const TrainData data = load_train_data(ctx);
    const MixtureSpec spec = resolve_mixture(ctx.config, ctx.seed);

    const RewardNet init =
        make_net(net_dims(ctx.config), nonlinearity_from_name(ctx.config.net.nonlinearity),
                 derive_seed(ctx.seed, 0x10));
    const CartConfig tc = make_cart_config(ctx.config, ctx.seed);
    const CircuitSet no_circuits;
    const TrainResult result = train(init, data, no_circuits, {}, spec, tc,
                                     TrainObjective::Baseline, path_str(stage));

    save_checkpoint(result.net, path_str(stage / "model.json"));
    write_text_file(path_str(stage / "history.csv"), history_to_csv(result.history));
    report_training(ctx, "baseline", result);

    write_stage_manifest(ctx, "train-baseline", stage,
                         {path_str(ctx.dir("data") / "train.jsonl"),
                          path_str(ctx.dir("data") / "eval_head.jsonl"),
                          path_str(ctx.dir("data") / "eval_tail.jsonl")},
                         {path_str(stage / "model.json"), path_str(stage / "history.csv")});
}

void run_discover(const StageOptions& options) {
    StageContext ctx = make_context(options);
    const fs::path stage = ctx.dir("discover");
    const fs::path model_path = ctx.dir("baseline") / "model.json";
    const RewardNet net = load_model(model_path);
    const auto eval_head = read_jsonl(path_str(ctx.dir("data") / "eval_head.jsonl"));
    const auto eval_tail = read_jsonl(path_str(ctx.dir("data") / "eval_tail.jsonl"));

    DiscoveryConfig dc = ctx.config.discover;
    dc.threads = ctx.threads;
    const DiscoveryReport report = discover_circuits(net, eval_head, eval_tail, dc);

    save_circuit_set(report.circuits_found, path_str(stage / "circuits.json"));
    save_json_file(path_str(stage / "discovery.json"), discovery_report_to_json(report));

    std::string line = "discover: " + std::to_string(report.circuits_found.circuits.size()) +
                       " circuits past patch threshold " + fmt(report.patch_threshold);
    if (report.empty_warning) {
        line += " (warning: none survived)";
    }
    ctx.say(line);

    write_stage_manifest(ctx, "discover", stage,
                         {path_str(model_path), path_str(ctx.dir("data") / "eval_head.jsonl"),
                          path_str(ctx.dir("data") / "eval_tail.jsonl")},
                         {path_str(stage / "circuits.json"), path_str(stage / "discovery.json")});
}

void run_assess(const StageOptions& options) {
    StageContext ctx = make_context(options);
    const fs::path stage = ctx.dir("assess");
    const fs::path model_path = ctx.dir("baseline") / "model.json";
    const RewardNet net = load_model(model_path);
    const CircuitSet circuits = load_circuits(ctx);
    const auto eval_head = read_jsonl(path_str(ctx.dir("data") / "eval_head.jsonl"));
    const auto eval_tail = read_jsonl(path_str(ctx.dir("data") / "eval_tail.jsonl"));
    const MixtureSpec spec = resolve_mixture(ctx.config, ctx.seed);

    const AssessConfig ac = make_assess_config(ctx.config, ctx.seed);
    AssessInputs inputs;
    inputs.head_examples = eval_head;
    inputs.tail_examples = eval_tail;
    inputs.neighborhoods =
        build_neighborhoods(net, circuits, spec, eval_tail, ac.neighborhood_m,
                            ac.neighborhood_radius, derive_seed(ctx.seed, 0x20));
    const VulnerabilityReport report = assess(net, circuits, inputs, ac);

    save_json_file(path_str(stage / "vulnerability.json"),
                   vulnerability_report_to_json(report));
    write_text_file(path_str(stage / "vulnerability.csv"),
                    vulnerability_report_to_csv(report));

    std::string worst;
    double worst_v = -1.0;
    for (const auto& [id, a] : report.per_circuit) {
        if (!a.unassessed && a.vuln > worst_v) {
            worst_v = a.vuln;
            worst = id;
        }
    }
    ctx.say("assess: " + std::to_string(report.per_circuit.size()) + " circuits" +
            (worst.empty() ? std::string(", none assessable")
                           : ", most vulnerable " + worst + " (" + fmt(worst_v) + ")"));

    write_stage_manifest(ctx, "assess", stage,
                         {path_str(model_path), path_str(ctx.dir("discover") / "circuits.json"),
                          path_str(ctx.dir("data") / "eval_head.jsonl"),
                          path_str(ctx.dir("data") / "eval_tail.jsonl")},
                         {path_str(stage / "vulnerability.json"),
                          path_str(stage / "vulnerability.csv")});
}

void run_train_cart(const StageOptions& options) {
    StageContext ctx = make_context(options);
    const fs::path stage = ctx.dir("cart");
    const TrainData data = load_train_data(ctx);
    const CircuitSet circuits = load_circuits(ctx);
    const VulnerabilityReport vuln = load_vuln_report(ctx);
    const MixtureSpec spec = resolve_mixture(ctx.config, ctx.seed);

    const CartConfig cc = make_cart_config(ctx.config, ctx.seed);
    const std::vector<std::string> selected = select_vulnerable(vuln, cc.select);

    // shares the baseline's initialization so the comparison is paired
    const RewardNet init =
        make_net(net_dims(ctx.config), nonlinearity_from_name(ctx.config.net.nonlinearity),
                 derive_seed(ctx.seed, 0x10));
    const TrainResult result =
        train(init, data, circuits, selected, spec, cc, TrainObjective::Cart, path_str(stage));

    save_checkpoint(result.net, path_str(stage / "model.json"));
    write_text_file(path_str(stage / "history.csv"), history_to_csv(result.history));

    Json sel_doc;
    sel_doc["schema_version"] = kSchemaVersion;
    sel_doc["selected"] = selected;
    save_json_file(path_str(stage / "selected.json"), sel_doc);

    // final-state augmentation snapshot, seeded like the epoch after the
    // last one trained
    std::vector<LabeledExample> bases = filter_side(data.train, true);
    if (cc.augment_per_epoch > 0 &&
        static_cast<int>(bases.size()) > cc.augment_per_epoch) {
        bases.resize(static_cast<size_t>(cc.augment_per_epoch));
    }
    const auto augmented =
        augment(result.net, circuits, selected, bases, spec, cc.gen,
                derive_seed(cc.seed, 0x9000 + static_cast<uint64_t>(cc.epochs)));
    write_jsonl(path_str(stage / "augmented.jsonl"), augmented);

    ctx.say("cart: selected " + std::to_string(selected.size()) + " of " +
            std::to_string(circuits.circuits.size()) + " circuits");
    report_training(ctx, "cart", result);

    write_stage_manifest(
        ctx, "train-cart", stage,
        {path_str(ctx.dir("data") / "train.jsonl"),
         path_str(ctx.dir("discover") / "circuits.json"),
         path_str(ctx.dir("assess") / "vulnerability.json")},
        {path_str(stage / "model.json"), path_str(stage / "history.csv"),
         path_str(stage / "selected.json"), path_str(stage / "augmented.jsonl")});
}

void run_ensemble(const StageOptions& options) {
    StageContext ctx = make_context(options);
    const fs::path stage = ctx.dir("ensemble");
    const TrainData data = load_train_data(ctx);
    const CircuitSet circuits = load_circuits(ctx);
    const VulnerabilityReport vuln = load_vuln_report(ctx);
    const MixtureSpec spec = resolve_mixture(ctx.config, ctx.seed);

    const CartConfig base_cc = make_cart_config(ctx.config, ctx.seed);
    const std::vector<std::string> selected = select_vulnerable(vuln, base_cc.select);
    const int k_members = ctx.config.ensemble.members;

    std::vector<RewardNet> members;
    std::vector<std::string> member_paths;
    for (int k = 0; k < k_members; ++k) {
        // members differ by initialization, data order, and circuit subset
        std::vector<std::string> subset;
        for (size_t i = 0; i < selected.size(); ++i) {
            if (static_cast<int>(i % static_cast<size_t>(k_members)) == k) {
                subset.push_back(selected[i]);
            }
        }
        if (subset.empty()) {
            subset = selected;
        }
        CartConfig ck = base_cc;
        ck.seed = derive_seed(ctx.seed, 0x7200 + static_cast<uint64_t>(k));
        const RewardNet init = make_net(
            net_dims(ctx.config), nonlinearity_from_name(ctx.config.net.nonlinearity),
            derive_seed(ctx.seed, 0x7000 + static_cast<uint64_t>(k)));
        const TrainResult result =
            train(init, data, circuits, subset, spec, ck, TrainObjective::Cart, "");
        const fs::path member_path = stage / ("member_" + std::to_string(k) + ".json");
        save_checkpoint(result.net, path_str(member_path));
        members.push_back(result.net);
        member_paths.push_back(path_str(member_path));
    }

    const auto calibration = sample_side(spec, ctx.config.ensemble.calibration_n, true,
                                         derive_seed(ctx.seed, 0x7100));
    const EnsembleResult er =
        optimize_ensemble(members, calibration, ctx.config.ensemble.iterations);

    Json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["weights"] = er.weights.alphas;
    doc["achieved_tail_mse"] = er.achieved_tail_mse;
    Json member_mse = Json::array();
    for (const auto& m : members) {
        member_mse.push_back(mse(m, calibration));
    }
    doc["member_tail_mse"] = std::move(member_mse);
    doc["members"] = member_paths;
    doc["iterations"] = ctx.config.ensemble.iterations;
    save_json_file(path_str(stage / "ensemble.json"), doc);

    ctx.say("ensemble: " + std::to_string(k_members) + " members, combined tail mse " +
            fmt(er.achieved_tail_mse));

    std::vector<std::string> outputs = member_paths;
    outputs.push_back(path_str(stage / "ensemble.json"));
    write_stage_manifest(ctx, "ensemble", stage,
                         {path_str(ctx.dir("data") / "train.jsonl"),
                          path_str(ctx.dir("discover") / "circuits.json"),
                          path_str(ctx.dir("assess") / "vulnerability.json")},
                         std::move(outputs));
}

void run_report(const StageOptions& options) {
    StageContext ctx = make_context(options);
    const fs::path stage = ctx.dir("report");
    const fs::path base_path = ctx.dir("baseline") / "model.json";
    const fs::path cart_path = ctx.dir("cart") / "model.json";
    const RewardNet base_net = load_model(base_path);
    const RewardNet cart_net = load_model(cart_path);
    const CircuitSet circuits = load_circuits(ctx);
    const TrainData data = load_train_data(ctx);
    const MixtureSpec spec = resolve_mixture(ctx.config, ctx.seed);

    const double base_head = mse(base_net, data.eval_head);
    const double base_tail = mse(base_net, data.eval_tail);
    const double cart_head = mse(cart_net, data.eval_head);
    const double cart_tail = mse(cart_net, data.eval_tail);

    // one set of neighborhoods, anchored by the baseline net, so identical
    // checkpoints score identically
    const AssessConfig ac = make_assess_config(ctx.config, ctx.seed);
    AssessInputs inputs;
    inputs.head_examples = data.eval_head;
    inputs.tail_examples = data.eval_tail;
    inputs.neighborhoods =
        build_neighborhoods(base_net, circuits, spec, data.eval_tail, ac.neighborhood_m,
                            ac.neighborhood_radius, derive_seed(ctx.seed, 0x20));
    const VulnerabilityReport vb = assess(base_net, circuits, inputs, ac);
    const VulnerabilityReport vc = assess(cart_net, circuits, inputs, ac);

    long n_tail_train = 0;
    for (const auto& e : data.train) {
        n_tail_train += e.is_tail ? 1 : 0;
    }
    const DivergenceResult div_b = divergence(base_net, circuits, data.eval_head, data.eval_tail);
    const DivergenceResult div_c = divergence(cart_net, circuits, data.eval_head, data.eval_tail);
    BoundInputs bi;
    bi.n_tail = std::max<long>(1, n_tail_train);
    bi.k_tail = static_cast<int>(circuits.tail_ids.size());
    bi.delta_conf = ctx.config.bound.delta_conf;
    bi.c_const = ctx.config.bound.c_const;
    bi.beta_coef = ctx.config.bound.beta_coef;
    BoundInputs bi_base = bi;
    bi_base.l_head = base_head;
    bi_base.div = div_b.value;
    BoundInputs bi_cart = bi;
    bi_cart.l_head = cart_head;
    bi_cart.div = div_c.value;

    Json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["seed"] = ctx.seed;
    Json baseline;
    baseline["head_mse"] = base_head;
    baseline["tail_mse"] = base_tail;
    doc["baseline"] = std::move(baseline);
    Json cart_side;
    cart_side["head_mse"] = cart_head;
    cart_side["tail_mse"] = cart_tail;
    doc["cart"] = std::move(cart_side);
    Json delta;
    delta["head_mse"] = cart_head - base_head;
    delta["tail_mse"] = cart_tail - base_tail;
    delta["head_rel_change"] = base_head > 0.0 ? (cart_head - base_head) / base_head : 0.0;
    delta["tail_improved"] = cart_tail < base_tail;
    doc["delta"] = std::move(delta);

    Json vuln_doc;
    double delta_sum = 0.0;
    long delta_n = 0;
    Json per = Json::object();
    for (const auto& [id, a] : vb.per_circuit) {
        const auto it = vc.per_circuit.find(id);
        if (it == vc.per_circuit.end()) {
            continue;
        }
        Json row;
        row["baseline"] = a.vuln;
        row["cart"] = it->second.vuln;
        row["delta"] = it->second.vuln - a.vuln;
        if (!a.unassessed && !it->second.unassessed) {
            delta_sum += it->second.vuln - a.vuln;
            delta_n += 1;
        }
        per[id] = std::move(row);
    }
    vuln_doc["per_circuit"] = std::move(per);
    vuln_doc["mean_delta"] = delta_n > 0 ? delta_sum / static_cast<double>(delta_n) : 0.0;
    doc["vulnerability"] = std::move(vuln_doc);

    Json bound_doc;
    bound_doc["baseline"] = bound_report_to_json(bi_base, base_tail);
    bound_doc["cart"] = bound_report_to_json(bi_cart, cart_tail);
    doc["bound"] = std::move(bound_doc);
    doc["div_definition"] = kDivDefinition;

    save_json_file(path_str(stage / "report.json"), doc);

    ctx.say("report: tail mse " + fmt(base_tail) + " -> " + fmt(cart_tail) + ", head mse " +
            fmt(base_head) + " -> " + fmt(cart_head));

    write_stage_manifest(ctx, "report", stage,
                         {path_str(base_path), path_str(cart_path),
                          path_str(ctx.dir("discover") / "circuits.json"),
                          path_str(ctx.dir("data") / "eval_head.jsonl"),
                          path_str(ctx.dir("data") / "eval_tail.jsonl")},
                         {path_str(stage / "report.json")});
}

}  // namespace cart
