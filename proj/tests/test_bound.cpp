#include <algorithm>
#include <cmath>

#include "cart/bound.hpp"
#include "cart/error.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace cart;
using namespace cart::test;

TEST_CASE("degenerate inputs collapse the bound to the head loss") {
    BoundInputs in;
    in.l_head = 0.42;
    in.k_tail = 0;
    in.div = 0.7;
    in.beta_coef = 0.0;
    CHECK(bound_value(in) == 0.42);

    in.beta_coef = 2.0;
    in.div = 0.0;
    CHECK(bound_value(in) == 0.42);
}

TEST_CASE("reference evaluation agrees with an independent recomputation") {
    BoundInputs in;
    in.l_head = 0.1;
    in.n_tail = 100;
    in.k_tail = 4;
    in.delta_conf = 0.05;
    in.c_const = 1.0;
    in.beta_coef = 1.0;
    in.div = 0.1;
    // 0.1 + sqrt(4 ln 20)/10 + 0.1, evaluated once by hand and frozen
    const double frozen = 0.54616367652045705;
    CHECK(bound_value(in) == doctest::Approx(frozen).epsilon(1e-15));
    const double recomputed =
        0.1 + std::sqrt(4.0 * std::log(20.0)) / std::sqrt(100.0) + 1.0 * 0.1;
    CHECK(bound_value(in) == recomputed);
}

TEST_CASE("the bound moves the right way along each input") {
    BoundInputs base;
    base.l_head = 0.2;
    base.n_tail = 50;
    base.k_tail = 3;
    base.delta_conf = 0.05;
    base.c_const = 1.5;
    base.beta_coef = 0.8;
    base.div = 0.3;
    const double ref = bound_value(base);

    // more tail data shrinks it
    double prev = ref;
    for (long n : {100L, 400L, 1600L, 10000L}) {
        BoundInputs in = base;
        in.n_tail = n;
        const double v = bound_value(in);
        CHECK(v < prev);
        prev = v;
    }

    // more circuits, more divergence, a larger beta, or a smaller
    // confidence delta all grow it
    for (int k : {4, 8, 20}) {
        BoundInputs in = base;
        in.k_tail = k;
        CHECK(bound_value(in) > ref);
    }
    for (double d : {0.4, 1.0, 5.0}) {
        BoundInputs in = base;
        in.div = d;
        CHECK(bound_value(in) > ref);
    }
    for (double b : {1.0, 2.0}) {
        BoundInputs in = base;
        in.beta_coef = b;
        CHECK(bound_value(in) > ref);
    }
    for (double d : {0.01, 0.001}) {
        BoundInputs in = base;
        in.delta_conf = d;
        CHECK(bound_value(in) > ref);
    }
}

TEST_CASE("input validation names the offending field") {
    BoundInputs in;
    in.n_tail = 0;
    CHECK_THROWS_WITH_AS(bound_value(in), "bound.n_tail must be at least 1", ConfigError);
    in = BoundInputs{};
    in.k_tail = -1;
    CHECK_THROWS_AS(in.validate(), ConfigError);
    in = BoundInputs{};
    in.delta_conf = 1.0;
    CHECK_THROWS_AS(in.validate(), ConfigError);
    in = BoundInputs{};
    in.delta_conf = 0.0;
    CHECK_THROWS_AS(in.validate(), ConfigError);
    in = BoundInputs{};
    in.c_const = 0.0;
    CHECK_THROWS_AS(in.validate(), ConfigError);
    in = BoundInputs{};
    in.beta_coef = -0.5;
    CHECK_THROWS_AS(in.validate(), ConfigError);
    in = BoundInputs{};
    in.div = -0.1;
    CHECK_THROWS_AS(in.validate(), ConfigError);
}

TEST_CASE("divergence of identical populations is zero") {
    const PlantedCase planted = make_planted(23);
    const CircuitSet set = one_circuit(planted.planted);
    const auto sample_a = sample_side(planted.spec, 40, true, 5);

    const DivergenceResult same = divergence(planted.net, set, sample_a, sample_a);
    CHECK(same.value == 0.0);
    CHECK_FALSE(same.empty_tail_set);
}

TEST_CASE("divergence separates head from tail on the planted circuit") {
    const PlantedCase planted = make_planted(29);
    const CircuitSet set = one_circuit(planted.planted);
    const auto head = sample_side(planted.spec, 60, false, 7);
    const auto tail = sample_side(planted.spec, 60, true, 8);

    const DivergenceResult r = divergence(planted.net, set, head, tail);
    CHECK(r.value > 1.0);

    // hand recomputation of the same mean gap
    double hm = 0.0;
    for (const auto& ex : head) {
        hm += circuit_activation(planted.net, set.circuits[0], ex.x);
    }
    hm /= static_cast<double>(head.size());
    double tm = 0.0;
    for (const auto& ex : tail) {
        tm += circuit_activation(planted.net, set.circuits[0], ex.x);
    }
    tm /= static_cast<double>(tail.size());
    CHECK(r.value == std::fabs(tm - hm));

    // order of the example lists only flips the sign inside the bars
    const DivergenceResult swapped = divergence(planted.net, set, tail, head);
    CHECK(swapped.value == r.value);
}

TEST_CASE("an empty tail circuit list is reported, not scored") {
    const PlantedCase planted = make_planted(31);
    CircuitSet set = one_circuit(planted.planted);
    set.tail_ids.clear();
    const auto head = sample_side(planted.spec, 10, false, 1);
    const auto tail = sample_side(planted.spec, 10, true, 2);

    const DivergenceResult r = divergence(planted.net, set, head, tail);
    CHECK(r.value == 0.0);
    CHECK(r.empty_tail_set);

    CHECK_THROWS_AS(divergence(planted.net, set, {}, tail), std::invalid_argument);
    CHECK_THROWS_AS(divergence(planted.net, set, head, {}), std::invalid_argument);

    set.tail_ids = {"ghost"};
    CHECK_THROWS_AS(divergence(planted.net, set, head, tail), std::invalid_argument);
}

TEST_CASE("the bound report carries its inputs and the divergence definition") {
    BoundInputs in;
    in.l_head = 0.1;
    in.n_tail = 100;
    in.k_tail = 4;
    in.delta_conf = 0.05;
    in.div = 0.25;
    const Json doc = bound_report_to_json(in, 0.37);
    CHECK(doc["inputs"]["l_head"].get<double>() == 0.1);
    CHECK(doc["inputs"]["n_tail"].get<long>() == 100);
    CHECK(doc["inputs"]["k_tail"].get<int>() == 4);
    CHECK(doc["inputs"]["delta_conf"].get<double>() == 0.05);
    CHECK(doc["inputs"]["div"].get<double>() == 0.25);
    CHECK(doc["bound_value"].get<double>() == bound_value(in));
    CHECK(doc["empirical_tail_loss"].get<double>() == 0.37);
    CHECK(doc["div_definition"].get<std::string>() ==
          "mean |E_tail[a_c] - E_head[a_c]|");
}
