#ifndef LSP_INSTANCES_HPP
#define LSP_INSTANCES_HPP

#include "lsp/model.hpp"
#include "lsp/rng.hpp"

// Small random instances for self-checks: random tree-plus-extras topologies,
// two dense random features, a random partial labeling with Hamming loss, and
// random weights. Sized for the enumeration oracle.
namespace lsp::instances {

struct InstanceOptions {
    int min_vars = 1;
    int max_vars = 5;
    int min_states = 2;
    int max_states = 3;
    double table_range = 1.0;   // feature entries ~ U[-range, range]
    double weight_range = 2.0;  // weights ~ U[-range, range]
    double table_present_prob = 0.85;
    bool extra_cycle_edge = true;
    bool unary_factors = true;
    bool triple_factors = true;
};

struct RandomInstance {
    Dataset data;  // exactly one training example
    ModelParams params;

    const Example& example() const { return data.train.front(); }
};

RandomInstance random_instance(Rng& rng, const InstanceOptions& opts = {});

}  // namespace lsp::instances

#endif
