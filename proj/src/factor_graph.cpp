#include "lsp/factor_graph.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace lsp {

namespace {

std::string factor_msg(int a, const char* what) {
    return "factor " + std::to_string(a) + ": " + what;
}

}  // namespace

FactorGraph build_graph(std::vector<int> cardinalities,
                        std::vector<std::vector<int>> scopes) {
    if (cardinalities.empty())
        throw std::invalid_argument("graph must have at least one variable");
    for (std::size_t i = 0; i < cardinalities.size(); ++i) {
        if (cardinalities[i] < 1)
            throw std::invalid_argument("variable " + std::to_string(i) +
                                        ": cardinality must be >= 1");
    }

    FactorGraph g;
    g.cardinalities = std::move(cardinalities);
    g.scopes = std::move(scopes);

    const int n = g.num_vars();
    const int m = g.num_factors();

    g.var_factors.assign(n, {});
    g.factor_vars.resize(m);
    g.factor_sizes.resize(m);
    g.factor_strides.resize(m);

    for (int a = 0; a < m; ++a) {
        const auto& scope = g.scopes[a];
        if (scope.empty()) throw std::invalid_argument(factor_msg(a, "empty scope"));
        for (int v : scope) {
            if (v < 0 || v >= n)
                throw std::invalid_argument(factor_msg(a, "variable index out of range"));
        }
        auto sorted = scope;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw std::invalid_argument(factor_msg(a, "duplicate variable in scope"));
        g.factor_vars[a] = std::move(sorted);
        for (int v : g.factor_vars[a]) g.var_factors[v].push_back(a);

        // row-major strides: last slot fastest
        const int k = static_cast<int>(scope.size());
        g.factor_strides[a].assign(k, 1);
        for (int t = k - 2; t >= 0; --t)
            g.factor_strides[a][t] =
                g.factor_strides[a][t + 1] *
                static_cast<std::size_t>(g.cardinalities[scope[t + 1]]);
        g.factor_sizes[a] = g.factor_strides[a][0] *
                            static_cast<std::size_t>(g.cardinalities[scope[0]]);
    }
    // var_factors lists are ascending already (factors visited in order)

    // edge ids, var-major
    g.var_edges.assign(n, {});
    int e = 0;
    for (int i = 0; i < n; ++i) {
        g.var_edges[i].reserve(g.var_factors[i].size());
        for (int a : g.var_factors[i]) {
            g.edge_var.push_back(i);
            g.edge_factor.push_back(a);
            g.var_edges[i].push_back(e++);
        }
    }
    g.factor_edges.resize(m);
    for (int a = 0; a < m; ++a) {
        g.factor_edges[a].reserve(g.scopes[a].size());
        for (int v : g.scopes[a]) {
            const auto& nf = g.var_factors[v];
            const auto it = std::lower_bound(nf.begin(), nf.end(), a);
            g.factor_edges[a].push_back(g.var_edges[v][it - nf.begin()]);
        }
    }
    return g;
}

HiddenSubgraph hidden_subgraph(const FactorGraph& g, const std::vector<int>& hidden) {
    HiddenSubgraph sub;
    sub.parent = &g;
    sub.var_rank.assign(g.num_vars(), -1);
    sub.factor_active_idx.assign(g.num_factors(), -1);

    sub.hidden_vars = hidden;
    std::sort(sub.hidden_vars.begin(), sub.hidden_vars.end());
    sub.hidden_vars.erase(
        std::unique(sub.hidden_vars.begin(), sub.hidden_vars.end()),
        sub.hidden_vars.end());
    for (int v : sub.hidden_vars) {
        if (v < 0 || v >= g.num_vars())
            throw std::invalid_argument("hidden variable index out of range: " +
                                        std::to_string(v));
    }
    for (std::size_t r = 0; r < sub.hidden_vars.size(); ++r)
        sub.var_rank[sub.hidden_vars[r]] = static_cast<int>(r);

    if (sub.hidden_vars.empty()) return sub;  // reduced graph stays empty

    std::vector<int> reduced_cards(sub.hidden_vars.size());
    for (std::size_t r = 0; r < sub.hidden_vars.size(); ++r)
        reduced_cards[r] = g.cardinalities[sub.hidden_vars[r]];

    std::vector<std::vector<int>> reduced_scopes;
    for (int a = 0; a < g.num_factors(); ++a) {
        const auto& scope = g.scopes[a];
        std::vector<int> hs, os, rscope;
        for (int t = 0; t < static_cast<int>(scope.size()); ++t) {
            if (sub.var_rank[scope[t]] >= 0) {
                hs.push_back(t);
                rscope.push_back(sub.var_rank[scope[t]]);
            } else {
                os.push_back(t);
            }
        }
        if (hs.empty()) continue;
        sub.factor_active_idx[a] = static_cast<int>(sub.active_factors.size());
        sub.active_factors.push_back(a);
        sub.hidden_slots.push_back(std::move(hs));
        sub.observed_slots.push_back(std::move(os));
        reduced_scopes.push_back(std::move(rscope));
    }
    sub.reduced = build_graph(std::move(reduced_cards), std::move(reduced_scopes));
    return sub;
}

}  // namespace lsp
