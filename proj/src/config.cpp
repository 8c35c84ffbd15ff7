#include "cart/config.hpp"

#include <cmath>
#include <set>

#include "cart/error.hpp"
#include "cart/rng.hpp"
#include "cart/toml.hpp"

namespace cart {

namespace {

const Json* find_path(const Json& root, const std::string& dotted) {
    const Json* node = &root;
    size_t start = 0;
    while (true) {
        const size_t dot = dotted.find('.', start);
        const std::string key =
            dot == std::string::npos ? dotted.substr(start) : dotted.substr(start, dot - start);
        if (!node->is_object()) {
            return nullptr;
        }
        const auto it = node->find(key);
        if (it == node->end()) {
            return nullptr;
        }
        node = &*it;
        if (dot == std::string::npos) {
            return node;
        }
        start = dot + 1;
    }
}

class Reader {
public:
    Reader(const Json& root, std::string filename)
        : root_(root), filename_(std::move(filename)) {}

    void allow_table(const std::string& path) { touched_.insert(path); }

    double get_double(const std::string& path, double def) {
        const Json* v = touch_find(path);
        if (v == nullptr) {
            return def;
        }
        return as_double(*v, path);
    }

    std::optional<double> get_opt_double(const std::string& path) {
        const Json* v = touch_find(path);
        if (v == nullptr) {
            return std::nullopt;
        }
        return as_double(*v, path);
    }

    int get_int(const std::string& path, int def) {
        const Json* v = touch_find(path);
        if (v == nullptr) {
            return def;
        }
        return as_int(*v, path);
    }

    std::optional<int> get_opt_int(const std::string& path) {
        const Json* v = touch_find(path);
        if (v == nullptr) {
            return std::nullopt;
        }
        return as_int(*v, path);
    }

    uint64_t get_uint64(const std::string& path, uint64_t def) {
        const Json* v = touch_find(path);
        if (v == nullptr) {
            return def;
        }
        if (!v->is_number_integer() || v->get<long long>() < 0) {
            fail(path, "must be a nonnegative integer");
        }
        return v->get<uint64_t>();
    }

    bool get_bool(const std::string& path, bool def) {
        const Json* v = touch_find(path);
        if (v == nullptr) {
            return def;
        }
        if (!v->is_boolean()) {
            fail(path, "must be a boolean");
        }
        return v->get<bool>();
    }

    std::string get_string(const std::string& path, const std::string& def) {
        const Json* v = touch_find(path);
        if (v == nullptr) {
            return def;
        }
        if (!v->is_string()) {
            fail(path, "must be a string");
        }
        return v->get<std::string>();
    }

    std::vector<int> get_int_array(const std::string& path, std::vector<int> def) {
        const Json* v = touch_find(path);
        if (v == nullptr) {
            return def;
        }
        if (!v->is_array()) {
            fail(path, "must be an array of integers");
        }
        std::vector<int> out;
        for (const auto& e : *v) {
            if (!e.is_number_integer()) {
                fail(path, "must be an array of integers");
            }
            out.push_back(e.get<int>());
        }
        return out;
    }

    // nullptr when absent; the entries are read by the caller
    const Json* get_table_array(const std::string& path) {
        const Json* v = touch_find(path);
        if (v == nullptr) {
            return nullptr;
        }
        if (!v->is_array()) {
            fail(path, "must be an array of tables");
        }
        return v;
    }

    double entry_double(const Json& entry, const std::string& prefix, const std::string& key,
                        double def) {
        touched_.insert(prefix);
        const auto it = entry.find(key);
        if (it == entry.end()) {
            return def;
        }
        touched_.insert(prefix + "." + key);
        return as_double(*it, prefix + "." + key);
    }

    std::optional<double> entry_opt_double(const Json& entry, const std::string& prefix,
                                           const std::string& key) {
        touched_.insert(prefix);
        const auto it = entry.find(key);
        if (it == entry.end()) {
            return std::nullopt;
        }
        touched_.insert(prefix + "." + key);
        return as_double(*it, prefix + "." + key);
    }

    std::optional<Vec> entry_opt_vec(const Json& entry, const std::string& prefix,
                                     const std::string& key) {
        touched_.insert(prefix);
        const auto it = entry.find(key);
        if (it == entry.end()) {
            return std::nullopt;
        }
        const std::string path = prefix + "." + key;
        touched_.insert(path);
        if (!it->is_array()) {
            fail(path, "must be an array of numbers");
        }
        Vec out;
        for (const auto& e : *it) {
            if (!e.is_number()) {
                fail(path, "must be an array of numbers");
            }
            out.push_back(e.get<double>());
        }
        return out;
    }

    void check_unknown() const { walk(root_, ""); }

    [[noreturn]] void fail(const std::string& path, const std::string& message) const {
        throw ConfigError(filename_ + ": " + path + " " + message);
    }

private:
    const Json* touch_find(const std::string& path) {
        // intermediate tables become known once any key under them is read
        size_t dot = path.find('.');
        while (dot != std::string::npos) {
            touched_.insert(path.substr(0, dot));
            dot = path.find('.', dot + 1);
        }
        touched_.insert(path);
        return find_path(root_, path);
    }

    double as_double(const Json& v, const std::string& path) const {
        if (!v.is_number()) {
            fail(path, "must be a number");
        }
        return v.get<double>();
    }

    int as_int(const Json& v, const std::string& path) const {
        if (!v.is_number_integer()) {
            fail(path, "must be an integer");
        }
        return v.get<int>();
    }

    void walk(const Json& node, const std::string& path) const {
        if (node.is_object()) {
            if (node.empty() && !path.empty() && !touched_.count(path)) {
                throw ConfigError(filename_ + ": unknown config table: " + path);
            }
            for (auto it = node.begin(); it != node.end(); ++it) {
                walk(it.value(), path.empty() ? it.key() : path + "." + it.key());
            }
            return;
        }
        if (node.is_array() && !node.empty() && node.front().is_object()) {
            for (size_t i = 0; i < node.size(); ++i) {
                walk(node[i], path + "[" + std::to_string(i) + "]");
            }
            return;
        }
        if (!touched_.count(path)) {
            throw ConfigError(filename_ + ": unknown config key: " + path);
        }
    }

    const Json& root_;
    std::string filename_;
    std::set<std::string> touched_;
};

std::vector<ClusterConfig> read_clusters(Reader& r, const Json* arr, const std::string& prefix) {
    std::vector<ClusterConfig> out;
    if (arr == nullptr) {
        return out;
    }
    for (size_t i = 0; i < arr->size(); ++i) {
        const std::string entry_prefix = prefix + "[" + std::to_string(i) + "]";
        const Json& entry = (*arr)[i];
        if (!entry.is_object()) {
            throw ConfigError(entry_prefix + " must be a table");
        }
        ClusterConfig c;
        c.center = r.entry_opt_vec(entry, entry_prefix, "center");
        c.stdev = r.entry_opt_double(entry, entry_prefix, "stdev");
        c.offset = r.entry_opt_double(entry, entry_prefix, "offset");
        out.push_back(std::move(c));
    }
    return out;
}

void validate_config(const RunConfig& c) {
    if (!(c.mixture.alpha > 0.0 && c.mixture.alpha < 1.0)) {
        throw ConfigError("mixture.alpha must lie strictly inside (0, 1)");
    }
    if (c.mixture.input_dim <= 0) {
        throw ConfigError("mixture.input_dim must be positive");
    }
    label_kind_from_name(c.mixture.label_fn);
    if (c.mixture.head_clusters.empty() && c.mixture.n_head_clusters < 1) {
        throw ConfigError("mixture.n_head_clusters must be at least 1");
    }
    if (c.mixture.tail_clusters.empty() && c.mixture.n_tail_clusters < 1) {
        throw ConfigError("mixture.n_tail_clusters must be at least 1");
    }
    if (c.mixture.head_stdev <= 0.0 || c.mixture.tail_stdev <= 0.0) {
        throw ConfigError("mixture.head_stdev and mixture.tail_stdev must be positive");
    }
    if (c.synth.n_train < 1 || c.synth.n_eval_head < 1 || c.synth.n_eval_tail < 1) {
        throw ConfigError("synth sample counts must be positive");
    }
    if (c.net.hidden.empty()) {
        throw ConfigError("net.hidden must list at least one layer width");
    }
    for (int w : c.net.hidden) {
        if (w < 1) {
            throw ConfigError("net.hidden widths must be positive");
        }
    }
    nonlinearity_from_name(c.net.nonlinearity);
    if (c.train.learning_rate <= 0.0) {
        throw ConfigError("train.learning_rate must be positive");
    }
    if (c.train.epochs < 0) {
        throw ConfigError("train.epochs must be nonnegative");
    }
    if (c.train.batch_size < 1) {
        throw ConfigError("train.batch_size must be at least 1");
    }
    if (!(c.discover.top_q > 0.0 && c.discover.top_q <= 1.0)) {
        throw ConfigError("discover.top_q must lie in (0, 1]");
    }
    if (c.discover.coherence_bins < 2) {
        throw ConfigError("discover.coherence_bins must be at least 2");
    }
    if (c.discover.patch_threshold_factor < 0.0) {
        throw ConfigError("discover.patch_threshold_factor must be nonnegative");
    }
    c.vuln.weights.validate();
    if (c.vuln.epsilon_bound <= 0.0) {
        throw ConfigError("vuln.epsilon_bound must be positive");
    }
    if (c.vuln.tau_act.has_value() && *c.vuln.tau_act < 0.0) {
        throw ConfigError("vuln.tau_act must be nonnegative");
    }
    if (c.vuln.sens_steps < 1 || c.vuln.sens_restarts < 1) {
        throw ConfigError("vuln.sens_steps and vuln.sens_restarts must be at least 1");
    }
    if (c.vuln.sens_step_factor <= 0.0 || c.vuln.sens_fd_step <= 0.0) {
        throw ConfigError("vuln sens step sizes must be positive");
    }
    if (c.vuln.sens_max_examples < 0) {
        throw ConfigError("vuln.sens_max_examples must be nonnegative");
    }
    if (c.vuln.neighborhood_m < 2) {
        throw ConfigError("vuln.neighborhood_m must be at least 2");
    }
    if (c.vuln.neighborhood_radius <= 0.0) {
        throw ConfigError("vuln.neighborhood_radius must be positive");
    }
    gen_strategy_from_name(c.cart.strategy);
    if (c.cart.top_k.has_value() && *c.cart.top_k < 0) {
        throw ConfigError("cart.top_k must be nonnegative");
    }
    if (c.ensemble.members < 1) {
        throw ConfigError("ensemble.members must be at least 1");
    }
    if (c.ensemble.iterations < 1) {
        throw ConfigError("ensemble.iterations must be at least 1");
    }
    if (c.ensemble.calibration_n < 1) {
        throw ConfigError("ensemble.calibration_n must be at least 1");
    }
    if (c.bound.c_const <= 0.0) {
        throw ConfigError("bound.c_const must be positive");
    }
    if (c.bound.beta_coef < 0.0) {
        throw ConfigError("bound.beta_coef must be nonnegative");
    }
    if (!(c.bound.delta_conf > 0.0 && c.bound.delta_conf < 1.0)) {
        throw ConfigError("bound.delta_conf must lie strictly inside (0, 1)");
    }
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
    const Json doc = load_toml_file(path);
    Reader r(doc, path);

    const int schema = r.get_int("schema_version", 1);
    if (schema != 1) {
        throw SchemaError(path + ": schema_version " + std::to_string(schema) + ", expected 1");
    }

    RunConfig c;
    c.seed = r.get_uint64("seed", 1);
    c.threads = r.get_int("threads", 0);

    for (const char* table : {"mixture", "synth", "net", "train", "discover", "vuln", "cart",
                              "ensemble", "bound"}) {
        r.allow_table(table);
    }

    c.mixture.alpha = r.get_double("mixture.alpha", c.mixture.alpha);
    c.mixture.input_dim = r.get_int("mixture.input_dim", c.mixture.input_dim);
    c.mixture.label_fn = r.get_string("mixture.label_fn", c.mixture.label_fn);
    c.mixture.n_head_clusters = r.get_int("mixture.n_head_clusters", c.mixture.n_head_clusters);
    c.mixture.n_tail_clusters = r.get_int("mixture.n_tail_clusters", c.mixture.n_tail_clusters);
    c.mixture.head_stdev = r.get_double("mixture.head_stdev", c.mixture.head_stdev);
    c.mixture.tail_stdev = r.get_double("mixture.tail_stdev", c.mixture.tail_stdev);
    c.mixture.cluster_center_scale =
        r.get_double("mixture.cluster_center_scale", c.mixture.cluster_center_scale);
    c.mixture.head_clusters =
        read_clusters(r, r.get_table_array("mixture.head_cluster"), "mixture.head_cluster");
    c.mixture.tail_clusters =
        read_clusters(r, r.get_table_array("mixture.tail_cluster"), "mixture.tail_cluster");

    c.synth.n_train = r.get_int("synth.n_train", c.synth.n_train);
    c.synth.n_eval_head = r.get_int("synth.n_eval_head", c.synth.n_eval_head);
    c.synth.n_eval_tail = r.get_int("synth.n_eval_tail", c.synth.n_eval_tail);

    c.net.hidden = r.get_int_array("net.hidden", c.net.hidden);
    c.net.nonlinearity = r.get_string("net.nonlinearity", c.net.nonlinearity);

    c.train.learning_rate = r.get_double("train.learning_rate", c.train.learning_rate);
    c.train.epochs = r.get_int("train.epochs", c.train.epochs);
    c.train.batch_size = r.get_int("train.batch_size", c.train.batch_size);
    c.train.checkpoint_interval =
        r.get_int("train.checkpoint_interval", c.train.checkpoint_interval);

    c.discover.top_q = r.get_double("discover.top_q", c.discover.top_q);
    c.discover.coherence_bins = r.get_int("discover.coherence_bins", c.discover.coherence_bins);
    c.discover.coherence_threshold =
        r.get_double("discover.coherence_threshold", c.discover.coherence_threshold);
    c.discover.patch_threshold_factor =
        r.get_double("discover.patch_threshold_factor", c.discover.patch_threshold_factor);

    c.vuln.weights.alpha_w = r.get_double("vuln.alpha_w", c.vuln.weights.alpha_w);
    c.vuln.weights.beta_w = r.get_double("vuln.beta_w", c.vuln.weights.beta_w);
    c.vuln.weights.gamma_w = r.get_double("vuln.gamma_w", c.vuln.weights.gamma_w);
    c.vuln.epsilon_bound = r.get_double("vuln.epsilon_bound", c.vuln.epsilon_bound);
    c.vuln.tau_act = r.get_opt_double("vuln.tau_act");
    c.vuln.normalize_sens = r.get_bool("vuln.normalize_sens", c.vuln.normalize_sens);
    c.vuln.sens_steps = r.get_int("vuln.sens_steps", c.vuln.sens_steps);
    c.vuln.sens_restarts = r.get_int("vuln.sens_restarts", c.vuln.sens_restarts);
    c.vuln.sens_step_factor = r.get_double("vuln.sens_step_factor", c.vuln.sens_step_factor);
    c.vuln.sens_fd_step = r.get_double("vuln.sens_fd_step", c.vuln.sens_fd_step);
    c.vuln.sens_max_examples = r.get_int("vuln.sens_max_examples", c.vuln.sens_max_examples);
    c.vuln.neighborhood_m = r.get_int("vuln.neighborhood_m", c.vuln.neighborhood_m);
    c.vuln.neighborhood_radius =
        r.get_double("vuln.neighborhood_radius", c.vuln.neighborhood_radius);

    c.cart.lambda_reg = r.get_double("cart.lambda_reg", c.cart.lambda_reg);
    c.cart.eta_curriculum = r.get_double("cart.eta_curriculum", c.cart.eta_curriculum);
    c.cart.augment_candidates = r.get_int("cart.augment_candidates", c.cart.augment_candidates);
    c.cart.strategy = r.get_string("cart.strategy", c.cart.strategy);
    c.cart.strength = r.get_double("cart.strength", c.cart.strength);
    c.cart.augment_per_epoch = r.get_int("cart.augment_per_epoch", c.cart.augment_per_epoch);
    c.cart.aug_batch_size = r.get_int("cart.aug_batch_size", c.cart.aug_batch_size);
    {
        const auto k = r.get_opt_int("cart.top_k");
        if (k.has_value()) {
            c.cart.top_k = k;
        }
    }
    c.cart.vuln_threshold = r.get_opt_double("cart.vuln_threshold");
    c.cart.prog_tail_only = r.get_bool("cart.prog_tail_only", c.cart.prog_tail_only);
    c.cart.scale_head = r.get_double("cart.scale_head", c.cart.scale_head);
    c.cart.scale_aug = r.get_double("cart.scale_aug", c.cart.scale_aug);
    c.cart.scale_circuit = r.get_double("cart.scale_circuit", c.cart.scale_circuit);
    c.cart.scale_prog = r.get_double("cart.scale_prog", c.cart.scale_prog);

    c.ensemble.members = r.get_int("ensemble.members", c.ensemble.members);
    c.ensemble.iterations = r.get_int("ensemble.iterations", c.ensemble.iterations);
    c.ensemble.calibration_n = r.get_int("ensemble.calibration_n", c.ensemble.calibration_n);

    c.bound.c_const = r.get_double("bound.c_const", c.bound.c_const);
    c.bound.beta_coef = r.get_double("bound.beta_coef", c.bound.beta_coef);
    c.bound.delta_conf = r.get_double("bound.delta_conf", c.bound.delta_conf);

    r.check_unknown();
    validate_config(c);
    return c;
}

namespace {

Vec auto_center(int dim, double scale, uint64_t stream_seed) {
    Rng rng(stream_seed);
    Vec v(dim);
    double n2 = 0.0;
    for (double& x : v) {
        x = rng.normal();
        n2 += x * x;
    }
    const double factor = n2 > 0.0 ? scale / std::sqrt(n2) : 0.0;
    for (double& x : v) {
        x *= factor;
    }
    return v;
}

}  // namespace

MixtureSpec resolve_mixture(const RunConfig& config, uint64_t seed) {
    const MixtureConfig& m = config.mixture;
    MixtureSpec spec;
    spec.alpha = m.alpha;
    spec.input_dim = m.input_dim;
    spec.label_fn = label_kind_from_name(m.label_fn);
    auto build = [&](bool tail) {
        const auto& explicit_clusters = tail ? m.tail_clusters : m.head_clusters;
        const int count = explicit_clusters.empty()
                              ? (tail ? m.n_tail_clusters : m.n_head_clusters)
                              : static_cast<int>(explicit_clusters.size());
        const double side_stdev = tail ? m.tail_stdev : m.head_stdev;
        std::vector<Cluster> out;
        for (int i = 0; i < count; ++i) {
            const ClusterConfig* cc =
                i < static_cast<int>(explicit_clusters.size()) ? &explicit_clusters[i] : nullptr;
            Cluster cluster;
            if (cc != nullptr && cc->center.has_value()) {
                cluster.center = *cc->center;
            } else {
                cluster.center = auto_center(
                    m.input_dim, m.cluster_center_scale,
                    derive_seed(seed, 0x100 + (tail ? 1000u : 0u) + static_cast<uint64_t>(i)));
            }
            cluster.stdev = cc != nullptr && cc->stdev.has_value() ? *cc->stdev : side_stdev;
            cluster.offset = cc != nullptr && cc->offset.has_value()
                                 ? *cc->offset
                                 : (tail ? -1.0 - i : 1.0 + i);
            out.push_back(std::move(cluster));
        }
        return out;
    };
    spec.head_clusters = build(false);
    spec.tail_clusters = build(true);
    spec.validate();
    return spec;
}

CartConfig make_cart_config(const RunConfig& config, uint64_t seed) {
    CartConfig cc;
    cc.lambda_reg = config.cart.lambda_reg;
    cc.eta_curriculum = config.cart.eta_curriculum;
    cc.gen.strategy = gen_strategy_from_name(config.cart.strategy);
    cc.gen.strength = config.cart.strength;
    cc.gen.candidates = config.cart.augment_candidates;
    cc.augment_per_epoch = config.cart.augment_per_epoch;
    cc.aug_batch_size = config.cart.aug_batch_size;
    cc.select.top_k = config.cart.top_k;
    cc.select.threshold = config.cart.vuln_threshold;
    cc.learning_rate = config.train.learning_rate;
    cc.epochs = config.train.epochs;
    cc.batch_size = config.train.batch_size;
    cc.seed = derive_seed(seed, 0x30);
    cc.scale_head = config.cart.scale_head;
    cc.scale_aug = config.cart.scale_aug;
    cc.scale_circuit = config.cart.scale_circuit;
    cc.scale_prog = config.cart.scale_prog;
    cc.prog_tail_only = config.cart.prog_tail_only;
    cc.checkpoint_interval = config.train.checkpoint_interval;
    cc.validate();
    return cc;
}

AssessConfig make_assess_config(const RunConfig& config, uint64_t seed) {
    AssessConfig ac;
    ac.weights = config.vuln.weights;
    ac.epsilon_bound = config.vuln.epsilon_bound;
    ac.tau_act = config.vuln.tau_act;
    ac.normalize_sens = config.vuln.normalize_sens;
    ac.search.steps = config.vuln.sens_steps;
    ac.search.restarts = config.vuln.sens_restarts;
    ac.search.step_factor = config.vuln.sens_step_factor;
    ac.search.fd_step = config.vuln.sens_fd_step;
    ac.search.max_examples = config.vuln.sens_max_examples;
    ac.search.seed = derive_seed(seed, 0x21);
    ac.neighborhood_m = config.vuln.neighborhood_m;
    ac.neighborhood_radius = config.vuln.neighborhood_radius;
    return ac;
}

namespace {

Json cluster_to_json(const Cluster& c) {
    Json jc;
    jc["center"] = c.center;
    jc["stdev"] = c.stdev;
    jc["offset"] = c.offset;
    return jc;
}

}  // namespace

Json config_snapshot(const RunConfig& config, uint64_t seed, int threads) {
    const MixtureSpec spec = resolve_mixture(config, seed);
    Json doc;
    doc["schema_version"] = 1;
    doc["seed"] = seed;
    doc["threads"] = threads;
    Json mixture;
    mixture["alpha"] = spec.alpha;
    mixture["input_dim"] = spec.input_dim;
    mixture["label_fn"] = label_kind_name(spec.label_fn);
    Json heads = Json::array();
    for (const auto& cl : spec.head_clusters) {
        heads.push_back(cluster_to_json(cl));
    }
    Json tails = Json::array();
    for (const auto& cl : spec.tail_clusters) {
        tails.push_back(cluster_to_json(cl));
    }
    mixture["head_clusters"] = std::move(heads);
    mixture["tail_clusters"] = std::move(tails);
    doc["mixture"] = std::move(mixture);
    Json synth;
    synth["n_train"] = config.synth.n_train;
    synth["n_eval_head"] = config.synth.n_eval_head;
    synth["n_eval_tail"] = config.synth.n_eval_tail;
    doc["synth"] = std::move(synth);
    Json net;
    net["hidden"] = config.net.hidden;
    net["nonlinearity"] = config.net.nonlinearity;
    doc["net"] = std::move(net);
    Json train;
    train["learning_rate"] = config.train.learning_rate;
    train["epochs"] = config.train.epochs;
    train["batch_size"] = config.train.batch_size;
    train["checkpoint_interval"] = config.train.checkpoint_interval;
    doc["train"] = std::move(train);
    Json discover;
    discover["top_q"] = config.discover.top_q;
    discover["coherence_bins"] = config.discover.coherence_bins;
    discover["coherence_threshold"] = config.discover.coherence_threshold;
    discover["patch_threshold_factor"] = config.discover.patch_threshold_factor;
    doc["discover"] = std::move(discover);
    Json vuln;
    vuln["alpha_w"] = config.vuln.weights.alpha_w;
    vuln["beta_w"] = config.vuln.weights.beta_w;
    vuln["gamma_w"] = config.vuln.weights.gamma_w;
    vuln["epsilon_bound"] = config.vuln.epsilon_bound;
    if (config.vuln.tau_act.has_value()) {
        vuln["tau_act"] = *config.vuln.tau_act;
    } else {
        vuln["tau_act"] = "auto";
    }
    vuln["normalize_sens"] = config.vuln.normalize_sens;
    vuln["sens_steps"] = config.vuln.sens_steps;
    vuln["sens_restarts"] = config.vuln.sens_restarts;
    vuln["sens_step_factor"] = config.vuln.sens_step_factor;
    vuln["sens_fd_step"] = config.vuln.sens_fd_step;
    vuln["sens_max_examples"] = config.vuln.sens_max_examples;
    vuln["neighborhood_m"] = config.vuln.neighborhood_m;
    vuln["neighborhood_radius"] = config.vuln.neighborhood_radius;
    doc["vuln"] = std::move(vuln);
    Json cart;
    cart["lambda_reg"] = config.cart.lambda_reg;
    cart["eta_curriculum"] = config.cart.eta_curriculum;
    cart["augment_candidates"] = config.cart.augment_candidates;
    cart["strategy"] = config.cart.strategy;
    cart["strength"] = config.cart.strength;
    cart["augment_per_epoch"] = config.cart.augment_per_epoch;
    cart["aug_batch_size"] = config.cart.aug_batch_size;
    if (config.cart.top_k.has_value()) {
        cart["top_k"] = *config.cart.top_k;
    }
    if (config.cart.vuln_threshold.has_value()) {
        cart["vuln_threshold"] = *config.cart.vuln_threshold;
    }
    cart["prog_tail_only"] = config.cart.prog_tail_only;
    cart["scale_head"] = config.cart.scale_head;
    cart["scale_aug"] = config.cart.scale_aug;
    cart["scale_circuit"] = config.cart.scale_circuit;
    cart["scale_prog"] = config.cart.scale_prog;
    doc["cart"] = std::move(cart);
    Json ensemble;
    ensemble["members"] = config.ensemble.members;
    ensemble["iterations"] = config.ensemble.iterations;
    ensemble["calibration_n"] = config.ensemble.calibration_n;
    doc["ensemble"] = std::move(ensemble);
    Json bound;
    bound["c_const"] = config.bound.c_const;
    bound["beta_coef"] = config.bound.beta_coef;
    bound["delta_conf"] = config.bound.delta_conf;
    doc["bound"] = std::move(bound);
    return doc;
}

}  // namespace cart
