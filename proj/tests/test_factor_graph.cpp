#include <doctest.h>

#include <algorithm>
#include <stdexcept>

#include "lsp/factor_graph.hpp"
#include "lsp/instances.hpp"
#include "lsp/rng.hpp"

using namespace lsp;

TEST_CASE("single edge graph") {
    const FactorGraph g = build_graph({2, 2}, {{0, 1}});
    CHECK(g.num_vars() == 2);
    CHECK(g.num_factors() == 1);
    CHECK(g.var_factors[0] == std::vector<int>{0});
    CHECK(g.var_factors[1] == std::vector<int>{0});
    CHECK(g.factor_vars[0] == std::vector<int>{0, 1});
    CHECK(g.factor_sizes[0] == 4);
    CHECK(g.factor_strides[0] == std::vector<std::size_t>{2, 1});
    CHECK(g.num_edges() == 2);
}

TEST_CASE("14x40 grid has 560 variables and 1066 factors") {
    // 14*39 horizontal + 13*40 vertical edges
    std::vector<int> cards(560, 5);
    std::vector<std::vector<int>> scopes;
    for (int r = 0; r < 14; ++r)
        for (int c = 0; c < 40; ++c) {
            const int i = r * 40 + c;
            if (c + 1 < 40) scopes.push_back({i, i + 1});
            if (r + 1 < 14) scopes.push_back({i, i + 40});
        }
    const FactorGraph g = build_graph(cards, scopes);
    CHECK(g.num_vars() == 560);
    CHECK(g.num_factors() == 1066);
}

TEST_CASE("invalid scopes are rejected with a diagnostic") {
    CHECK_THROWS_WITH_AS(build_graph({2}, {{0, 0}}),
                         "factor 0: duplicate variable in scope", std::invalid_argument);
    CHECK_THROWS_WITH_AS(build_graph({2, 2}, {{0, 1}, {}}), "factor 1: empty scope",
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(build_graph({2, 2}, {{0, 2}}),
                         "factor 0: variable index out of range", std::invalid_argument);
    CHECK_THROWS_AS(build_graph({}, {}), std::invalid_argument);
    CHECK_THROWS_AS(build_graph({0}, {}), std::invalid_argument);
}

TEST_CASE("scope order fixes the table layout, neighbor lists are sorted") {
    const FactorGraph g = build_graph({2, 3}, {{1, 0}});
    CHECK(g.factor_vars[0] == std::vector<int>{0, 1});  // sorted
    CHECK(g.scopes[0] == std::vector<int>{1, 0});       // as given
    // row-major over (var1, var0): stride of slot 0 is |S_0| = 2
    CHECK(g.factor_strides[0] == std::vector<std::size_t>{2, 1});
    CHECK(g.slot_state(0, 0, 5) == 2);  // index 5 -> (s_1=2, s_0=1)
    CHECK(g.slot_state(0, 1, 5) == 1);
}

TEST_CASE("hidden subgraph of a chain") {
    const FactorGraph g = build_graph({2, 2, 2}, {{0, 1}, {1, 2}});
    const HiddenSubgraph sub = hidden_subgraph(g, {1});
    CHECK(sub.active_factors == std::vector<int>{0, 1});
    CHECK(sub.hidden_slots[0] == std::vector<int>{1});  // slot of var 1 in (0,1)
    CHECK(sub.observed_slots[0] == std::vector<int>{0});
    CHECK(sub.reduced.num_vars() == 1);
    CHECK(sub.reduced.num_factors() == 2);  // both edges reduce to unary factors
    CHECK(sub.reduced.scopes[0] == std::vector<int>{0});
}

TEST_CASE("hidden subgraph edge cases") {
    const FactorGraph g = build_graph({2, 2, 2}, {{0, 1}, {1, 2}});
    CHECK(hidden_subgraph(g, {}).empty());
    CHECK(hidden_subgraph(g, {}).active_factors.empty());

    const HiddenSubgraph all = hidden_subgraph(g, {0, 1, 2});
    CHECK(all.active_factors == std::vector<int>{0, 1});
    CHECK(all.observed_slots[0].empty());
    CHECK(all.observed_slots[1].empty());
    CHECK(all.reduced.num_vars() == 3);

    CHECK_THROWS_AS(hidden_subgraph(g, {3}), std::invalid_argument);
    CHECK_THROWS_AS(hidden_subgraph(g, {-1}), std::invalid_argument);
}

TEST_CASE("neighbor indices reconstruct each other on random graphs") {
    Rng rng(7);
    for (int t = 0; t < 50; ++t) {
        const auto inst = instances::random_instance(rng);
        const auto& g = *inst.data.graph;
        for (int i = 0; i < g.num_vars(); ++i) {
            CHECK(std::is_sorted(g.var_factors[i].begin(), g.var_factors[i].end()));
            for (int a : g.var_factors[i]) {
                const auto& nv = g.factor_vars[a];
                CHECK(std::find(nv.begin(), nv.end(), i) != nv.end());
            }
        }
        for (int a = 0; a < g.num_factors(); ++a) {
            CHECK(std::is_sorted(g.factor_vars[a].begin(), g.factor_vars[a].end()));
            for (int i : g.factor_vars[a]) {
                const auto& nf = g.var_factors[i];
                CHECK(std::find(nf.begin(), nf.end(), a) != nf.end());
            }
        }
        CHECK(g.num_edges() == static_cast<int>(g.edge_var.size()));
    }
}

TEST_CASE("active factors are monotone under hidden-set inclusion") {
    Rng rng(8);
    for (int t = 0; t < 50; ++t) {
        const auto inst = instances::random_instance(rng);
        const auto& g = *inst.data.graph;
        std::vector<int> small, large;
        for (int i = 0; i < g.num_vars(); ++i) {
            const bool in_small = rng.bernoulli(0.3);
            if (in_small) small.push_back(i);
            if (in_small || rng.bernoulli(0.3)) large.push_back(i);
        }
        const auto sub_small = hidden_subgraph(g, small);
        const auto sub_large = hidden_subgraph(g, large);
        CHECK(std::includes(sub_large.active_factors.begin(), sub_large.active_factors.end(),
                            sub_small.active_factors.begin(), sub_small.active_factors.end()));
    }
}
