#include "cart/data.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "cart/error.hpp"
#include "cart/jsonio.hpp"
#include "cart/rng.hpp"

namespace cart {

std::string label_kind_name(LabelKind k) {
    switch (k) {
        case LabelKind::RadialQuadratic:
            return "radial_quadratic";
        case LabelKind::RadialGaussian:
            return "radial_gaussian";
    }
    throw std::logic_error("unknown label kind");
}

LabelKind label_kind_from_name(const std::string& name) {
    if (name == "radial_quadratic") {
        return LabelKind::RadialQuadratic;
    }
    if (name == "radial_gaussian") {
        return LabelKind::RadialGaussian;
    }
    throw ConfigError("unknown label_fn: " + name);
}

const Cluster& MixtureSpec::cluster(int cluster_id) const {
    const int h = static_cast<int>(head_clusters.size());
    if (cluster_id < 0 || cluster_id >= num_clusters()) {
        throw std::out_of_range("cluster_id out of range: " + std::to_string(cluster_id));
    }
    return cluster_id < h ? head_clusters[cluster_id] : tail_clusters[cluster_id - h];
}

void MixtureSpec::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw ConfigError("mixture.alpha must lie strictly inside (0, 1), got " +
                          format_double(alpha));
    }
    if (input_dim <= 0) {
        throw ConfigError("mixture.input_dim must be positive");
    }
    if (head_clusters.empty()) {
        throw ConfigError("mixture.head_cluster list is empty");
    }
    if (tail_clusters.empty()) {
        throw ConfigError("mixture.tail_cluster list is empty");
    }
    auto check = [&](const char* side, const std::vector<Cluster>& cs) {
        for (size_t i = 0; i < cs.size(); ++i) {
            const std::string where =
                std::string("mixture.") + side + "_cluster[" + std::to_string(i) + "]";
            if (static_cast<int>(cs[i].center.size()) != input_dim) {
                throw ConfigError(where + ".center dimension != input_dim");
            }
            if (!(cs[i].stdev > 0.0)) {
                throw ConfigError(where + ".stdev must be positive");
            }
        }
    };
    check("head", head_clusters);
    check("tail", tail_clusters);
}

double label_value(const MixtureSpec& spec, int cluster_id, const Vec& x) {
    const Cluster& c = spec.cluster(cluster_id);
    double d2 = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - c.center[i];
        d2 += d * d;
    }
    switch (spec.label_fn) {
        case LabelKind::RadialQuadratic:
            return c.offset - d2;
        case LabelKind::RadialGaussian:
            return c.offset * std::exp(-d2 / (2.0 * c.stdev * c.stdev));
    }
    throw std::logic_error("unknown label kind");
}

namespace {

LabeledExample draw_from_cluster(const MixtureSpec& spec, int cluster_id, Rng& rng) {
    const Cluster& c = spec.cluster(cluster_id);
    LabeledExample ex;
    ex.x.resize(spec.input_dim);
    for (int j = 0; j < spec.input_dim; ++j) {
        ex.x[j] = c.center[j] + c.stdev * rng.normal();
    }
    ex.y = label_value(spec, cluster_id, ex.x);
    ex.is_tail = spec.cluster_is_tail(cluster_id);
    ex.cluster_id = cluster_id;
    return ex;
}

}  // namespace

std::vector<LabeledExample> sample(const MixtureSpec& spec, int n, uint64_t seed) {
    spec.validate();
    if (n <= 0) {
        throw std::invalid_argument("sample: n must be positive");
    }
    const int h = static_cast<int>(spec.head_clusters.size());
    const int t = static_cast<int>(spec.tail_clusters.size());
    Rng rng(seed);
    std::vector<LabeledExample> out;
    out.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const bool tail = rng.uniform() >= spec.alpha;
        const int local = tail ? rng.uniform_int(t) : rng.uniform_int(h);
        const int cluster_id = tail ? h + local : local;
        out.push_back(draw_from_cluster(spec, cluster_id, rng));
    }
    return out;
}

std::vector<LabeledExample> sample_side(const MixtureSpec& spec, int n, bool tail, uint64_t seed) {
    spec.validate();
    if (n <= 0) {
        throw std::invalid_argument("sample_side: n must be positive");
    }
    const int h = static_cast<int>(spec.head_clusters.size());
    const int t = static_cast<int>(spec.tail_clusters.size());
    Rng rng(seed);
    std::vector<LabeledExample> out;
    out.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int local = tail ? rng.uniform_int(t) : rng.uniform_int(h);
        out.push_back(draw_from_cluster(spec, tail ? h + local : local, rng));
    }
    return out;
}

Neighborhood make_neighborhood(const MixtureSpec& spec, const LabeledExample& anchor, int m,
                               double radius, uint64_t seed) {
    if (radius <= 0.0) {
        throw std::invalid_argument("make_neighborhood: radius must be positive");
    }
    if (m < 2) {
        throw std::invalid_argument("make_neighborhood: m must be at least 2");
    }
    const int dim = static_cast<int>(anchor.x.size());
    Rng rng(seed);
    Neighborhood nb;
    nb.anchor = anchor;
    nb.members.reserve(static_cast<size_t>(m));
    for (int k = 0; k < m; ++k) {
        Vec dir(dim);
        double n2 = 0.0;
        for (int j = 0; j < dim; ++j) {
            dir[j] = rng.normal();
            n2 += dir[j] * dir[j];
        }
        // uniform in the L2 ball of the given radius
        const double r =
            radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(dim));
        const double scale = n2 > 0.0 ? r / std::sqrt(n2) : 0.0;
        LabeledExample member;
        member.x.resize(dim);
        for (int j = 0; j < dim; ++j) {
            member.x[j] = anchor.x[j] + scale * dir[j];
        }
        member.cluster_id = anchor.cluster_id;
        member.is_tail = anchor.is_tail;
        member.y = label_value(spec, member.cluster_id, member.x);
        nb.members.push_back(std::move(member));
    }
    return nb;
}

std::string gen_strategy_name(GenStrategy s) {
    switch (s) {
        case GenStrategy::GaussianJitter:
            return "gaussian_jitter";
        case GenStrategy::PairwiseInterpolation:
            return "pairwise_interpolation";
        case GenStrategy::CoordinateDropout:
            return "coordinate_dropout";
    }
    throw std::logic_error("unknown strategy");
}

GenStrategy gen_strategy_from_name(const std::string& name) {
    if (name == "gaussian_jitter") {
        return GenStrategy::GaussianJitter;
    }
    if (name == "pairwise_interpolation") {
        return GenStrategy::PairwiseInterpolation;
    }
    if (name == "coordinate_dropout") {
        return GenStrategy::CoordinateDropout;
    }
    throw ConfigError("unknown generative strategy: " + name);
}

std::vector<Vec> generative_transform(const Vec& x, GenStrategy strategy, double strength,
                                      int count, uint64_t seed, const std::vector<Vec>& pool) {
    if (strength < 0.0) {
        throw std::invalid_argument("generative_transform: strength must be nonnegative");
    }
    if (count < 1) {
        throw std::invalid_argument("generative_transform: count must be at least 1");
    }
    Rng rng(seed);
    std::vector<Vec> out;
    out.reserve(static_cast<size_t>(count));
    out.push_back(x);
    for (int k = 1; k < count; ++k) {
        Vec cand = x;
        switch (strategy) {
            case GenStrategy::GaussianJitter:
                for (double& v : cand) {
                    v += strength * rng.normal();
                }
                break;
            case GenStrategy::PairwiseInterpolation: {
                const Vec& ref =
                    pool.empty() ? x : pool[rng.uniform_int(static_cast<int>(pool.size()))];
                const double t = rng.uniform(0.0, std::min(1.0, strength));
                for (size_t j = 0; j < cand.size(); ++j) {
                    cand[j] += t * (ref[j] - cand[j]);
                }
                break;
            }
            case GenStrategy::CoordinateDropout: {
                const double p = std::min(1.0, strength);
                for (double& v : cand) {
                    if (rng.uniform() < p) {
                        v = 0.0;
                    }
                }
                break;
            }
        }
        out.push_back(std::move(cand));
    }
    return out;
}

namespace {

std::string jsonl_line(const LabeledExample& ex) {
    std::string line = "{\"x\": [";
    for (size_t j = 0; j < ex.x.size(); ++j) {
        if (j > 0) {
            line += ", ";
        }
        line += format_double(ex.x[j]);
    }
    line += "], \"y\": " + format_double(ex.y);
    line += std::string(", \"is_tail\": ") + (ex.is_tail ? "true" : "false");
    line += ", \"cluster_id\": " + std::to_string(ex.cluster_id) + "}";
    return line;
}

}  // namespace

void write_jsonl(const std::string& path, const std::vector<LabeledExample>& examples) {
    std::string body;
    for (const auto& ex : examples) {
        body += jsonl_line(ex);
        body += "\n";
    }
    write_text_file(path, body);
}

std::vector<LabeledExample> read_jsonl(const std::string& path) {
    const std::string text = read_text_file(path);
    std::vector<LabeledExample> out;
    std::istringstream in(text);
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        Json row;
        try {
            row = Json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad JSONL: " +
                                     e.what());
        }
        LabeledExample ex;
        ex.x = row.at("x").get<Vec>();
        ex.y = row.at("y").get<double>();
        ex.is_tail = row.at("is_tail").get<bool>();
        ex.cluster_id = row.at("cluster_id").get<int>();
        out.push_back(std::move(ex));
    }
    return out;
}

std::vector<LabeledExample> filter_side(const std::vector<LabeledExample>& examples, bool tail) {
    std::vector<LabeledExample> out;
    for (const auto& ex : examples) {
        if (ex.is_tail == tail) {
            out.push_back(ex);
        }
    }
    return out;
}

}  // namespace cart
