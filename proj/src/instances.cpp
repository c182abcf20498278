#include "lsp/instances.hpp"

#include <memory>

namespace lsp::instances {

RandomInstance random_instance(Rng& rng, const InstanceOptions& opts) {
    const int n = rng.uniform_int(opts.min_vars, opts.max_vars);
    std::vector<int> cards(n);
    for (int i = 0; i < n; ++i) cards[i] = rng.uniform_int(opts.min_states, opts.max_states);

    std::vector<std::vector<int>> scopes;
    for (int v = 1; v < n; ++v) {
        const int u = rng.uniform_int(0, v - 1);
        if (rng.bernoulli(0.5))
            scopes.push_back({u, v});
        else
            scopes.push_back({v, u});
    }
    if (opts.extra_cycle_edge && n >= 3 && rng.bernoulli(0.4)) {
        const int u = rng.uniform_int(0, n - 1);
        int v = rng.uniform_int(0, n - 2);
        if (v >= u) ++v;
        scopes.push_back({u, v});
    }
    if (opts.unary_factors && rng.bernoulli(0.3))
        scopes.push_back({rng.uniform_int(0, n - 1)});
    if (opts.triple_factors && n >= 3 && rng.bernoulli(0.25)) {
        auto vars = rng.sample_without_replacement(n, 3);
        scopes.push_back({vars[0], vars[1], vars[2]});
    }

    RandomInstance inst;
    inst.data.graph = std::make_shared<const FactorGraph>(
        build_graph(std::move(cards), std::move(scopes)));
    const auto& g = *inst.data.graph;
    inst.data.num_features = 2;

    Example ex;
    ex.graph = inst.data.graph;
    ex.observation.assign(g.num_vars(), 0.0);
    ex.feat_node.assign(2, std::vector<Table>(g.num_vars()));
    ex.feat_factor.assign(2, std::vector<Table>(g.num_factors()));
    for (int r = 0; r < 2; ++r) {
        for (int i = 0; i < g.num_vars(); ++i) {
            if (!rng.bernoulli(opts.table_present_prob)) continue;
            Table t(g.cardinalities[i]);
            for (double& v : t) v = rng.uniform(-opts.table_range, opts.table_range);
            ex.feat_node[r][i] = std::move(t);
        }
        for (int a = 0; a < g.num_factors(); ++a) {
            if (!rng.bernoulli(opts.table_present_prob)) continue;
            Table t(g.factor_sizes[a]);
            for (double& v : t) v = rng.uniform(-opts.table_range, opts.table_range);
            ex.feat_factor[r][a] = std::move(t);
        }
    }

    ex.labels.resize(g.num_vars());
    for (int i = 0; i < g.num_vars(); ++i)
        ex.labels[i] = rng.uniform_int(0, g.cardinalities[i] - 1);
    const double hidden_prob[] = {0.0, 0.4, 0.7, 1.0};
    const double p = hidden_prob[rng.uniform_int(0, 3)];
    ex.hidden.assign(g.num_vars(), 0);
    for (int i = 0; i < g.num_vars(); ++i) ex.hidden[i] = rng.bernoulli(p) ? 1 : 0;

    const int observed = ex.num_observed();
    if (observed > 0) set_hamming_loss(ex, 1.0 / static_cast<double>(observed));
    inst.data.train.push_back(std::move(ex));

    inst.params.weights.resize(2);
    for (double& w : inst.params.weights)
        w = rng.uniform(-opts.weight_range, opts.weight_range);
    return inst;
}

}  // namespace lsp::instances
