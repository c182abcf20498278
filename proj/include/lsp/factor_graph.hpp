#ifndef LSP_FACTOR_GRAPH_HPP
#define LSP_FACTOR_GRAPH_HPP

#include <cstddef>
#include <vector>

namespace lsp {

using Table = std::vector<double>;

// Immutable bipartite factor-graph topology. Factor scopes are ordered tuples;
// a factor table is laid out row-major over its scope (last scope slot varies
// fastest). Neighbor lists are sorted ascending. Safe for concurrent reads.
struct FactorGraph {
    std::vector<int> cardinalities;               // |S_i| per variable
    std::vector<std::vector<int>> scopes;         // factor -> ordered variable tuple
    std::vector<std::vector<int>> var_factors;    // N(i), ascending factor ids
    std::vector<std::vector<int>> factor_vars;    // N(alpha), ascending variable ids

    // Edge indexing. Edges are the (variable, factor) incidences, numbered
    // var-major: all edges of variable 0 first (factors ascending), then 1, ...
    std::vector<int> edge_var;
    std::vector<int> edge_factor;
    std::vector<std::vector<int>> var_edges;      // aligned with var_factors
    std::vector<std::vector<int>> factor_edges;   // aligned with scopes (slot order)

    // Table geometry per factor.
    std::vector<std::size_t> factor_sizes;                 // prod of scope cards
    std::vector<std::vector<std::size_t>> factor_strides;  // per slot, row-major

    int num_vars() const { return static_cast<int>(cardinalities.size()); }
    int num_factors() const { return static_cast<int>(scopes.size()); }
    int num_edges() const { return static_cast<int>(edge_var.size()); }
    int degree(int var) const { return static_cast<int>(var_factors[var].size()); }

    // state of scope slot `slot` inside flat table index `idx` of factor `a`
    int slot_state(int a, int slot, std::size_t idx) const {
        return static_cast<int>((idx / factor_strides[a][slot]) %
                                static_cast<std::size_t>(cardinalities[scopes[a][slot]]));
    }
};

// Validates and builds the graph with both neighbor indices populated.
// Throws std::invalid_argument naming the offending factor on: empty scope,
// duplicate variable in scope, out-of-range variable index.
FactorGraph build_graph(std::vector<int> cardinalities,
                        std::vector<std::vector<int>> scopes);

// Restriction of a graph to a hidden variable set. `reduced` is a standalone
// factor graph over the hidden variables (rank-indexed); its factor f is
// parent factor active_factors[f] restricted to its hidden slots, preserving
// slot order, so reduced tables are row-major over the hidden slots.
struct HiddenSubgraph {
    const FactorGraph* parent = nullptr;
    std::vector<int> hidden_vars;                // sorted
    std::vector<int> active_factors;             // sorted, >=1 hidden slot each
    std::vector<int> var_rank;                   // parent var -> hidden rank or -1
    std::vector<int> factor_active_idx;          // parent factor -> active idx or -1
    std::vector<std::vector<int>> hidden_slots;    // per active factor, slot positions
    std::vector<std::vector<int>> observed_slots;  // complement, slot positions
    FactorGraph reduced;

    bool empty() const { return hidden_vars.empty(); }
    bool is_hidden(int var) const { return var_rank[var] >= 0; }
};

// Throws std::invalid_argument on an out-of-range hidden index.
HiddenSubgraph hidden_subgraph(const FactorGraph& g, const std::vector<int>& hidden);

}  // namespace lsp

#endif
