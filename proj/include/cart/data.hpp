#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cart/linalg.hpp"

namespace cart {

enum class LabelKind { RadialQuadratic, RadialGaussian };

std::string label_kind_name(LabelKind k);
LabelKind label_kind_from_name(const std::string& name);

struct Cluster {
    Vec center;
    double stdev = 1.0;
    double offset = 0.0;
};

// Head/tail mixture over Gaussian clusters. Cluster ids number head
// clusters first, then tail clusters.
struct MixtureSpec {
    double alpha = 0.9;
    int input_dim = 16;
    LabelKind label_fn = LabelKind::RadialQuadratic;
    std::vector<Cluster> head_clusters;
    std::vector<Cluster> tail_clusters;

    int num_clusters() const {
        return static_cast<int>(head_clusters.size() + tail_clusters.size());
    }
    const Cluster& cluster(int cluster_id) const;
    bool cluster_is_tail(int cluster_id) const {
        return cluster_id >= static_cast<int>(head_clusters.size());
    }
    void validate() const;  // ConfigError naming the offending field
};

struct LabeledExample {
    Vec x;
    double y = 0.0;
    bool is_tail = false;
    int cluster_id = 0;
};

struct Neighborhood {
    LabeledExample anchor;
    std::vector<LabeledExample> members;  // size m >= 2, same cluster as anchor
};

double label_value(const MixtureSpec& spec, int cluster_id, const Vec& x);

std::vector<LabeledExample> sample(const MixtureSpec& spec, int n, uint64_t seed);

// Draws only from one side of the mixture; used for eval splits.
std::vector<LabeledExample> sample_side(const MixtureSpec& spec, int n, bool tail, uint64_t seed);

Neighborhood make_neighborhood(const MixtureSpec& spec, const LabeledExample& anchor, int m,
                               double radius, uint64_t seed);

enum class GenStrategy { GaussianJitter, PairwiseInterpolation, CoordinateDropout };

std::string gen_strategy_name(GenStrategy s);
GenStrategy gen_strategy_from_name(const std::string& name);

// Candidate inputs near x. Candidate 0 is always the unperturbed x so a
// downstream argmax can keep the original point. Interpolation draws
// partners from pool and degrades to x itself when pool is empty.
std::vector<Vec> generative_transform(const Vec& x, GenStrategy strategy, double strength,
                                      int count, uint64_t seed, const std::vector<Vec>& pool = {});

void write_jsonl(const std::string& path, const std::vector<LabeledExample>& examples);
std::vector<LabeledExample> read_jsonl(const std::string& path);

std::vector<LabeledExample> filter_side(const std::vector<LabeledExample>& examples, bool tail);

}  // namespace cart
