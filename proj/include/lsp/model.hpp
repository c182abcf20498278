#ifndef LSP_MODEL_HPP
#define LSP_MODEL_HPP

#include <cstdint>
#include <memory>
#include <vector>

#include "lsp/factor_graph.hpp"

namespace lsp {

struct ModelParams {
    std::vector<double> weights;  // w, one per feature
    int num_features() const { return static_cast<int>(weights.size()); }
};

// All knobs of the training objective and the solver schedule. Strict
// positivity of epsilon and the counting numbers is what buys convexity of
// the subproblems and the descent guarantee, so validate() enforces it.
struct HyperParams {
    double epsilon = 1.0;                 // temperature; 1 = likelihood-like, ->0 = margin-like
    double c_reg = 1.0;                   // C, weight of the squared-norm regularizer
    int norm_order = 2;                   // p; only 2 is supported
    double counting_node = 1.0;           // c_i   (loss-augmented side)
    double counting_factor = 1.0;         // c_alpha
    double counting_latent_node = 1.0;    // c-hat_i (latent side)
    double counting_latent_factor = 1.0;  // c-hat_alpha
    int outer_iters = 200;
    int inner_iters = 1000;               // sweep cap for one latent-subproblem solve
    int msg_sweeps = 1;                   // lambda sweeps per outer iteration
    double tolerance = 1e-6;              // outer stop: |delta F| < tolerance
    double latent_tolerance = 1e-10;      // latent stop: marginalization residual
    std::uint64_t seed = 1;

    void validate() const;  // throws std::invalid_argument citing the violated requirement
};

// One training or test instance. Feature and loss tables are dense per-node /
// per-factor tables on the graph; an empty table means identically zero.
// Read-only during training; examples may be processed in parallel.
struct Example {
    std::shared_ptr<const FactorGraph> graph;
    std::vector<double> observation;        // one real per variable (synthetic channel)
    std::vector<int> labels;                // ground truth; meaningful where !hidden
    std::vector<char> hidden;               // mask of the latent variables

    // [feature r][node i] -> table over S_i, [feature r][factor a] -> table over S_a
    std::vector<std::vector<Table>> feat_node;
    std::vector<std::vector<Table>> feat_factor;

    std::vector<Table> loss_node;           // per node, over S_i
    std::vector<Table> loss_factor;         // per factor, over S_a
    std::vector<Table> latent_loss_node;    // per node (hidden only), over S_i
    std::vector<Table> latent_loss_factor;  // per factor, over its hidden slots

    int num_features() const { return static_cast<int>(feat_node.size()); }
    int num_observed() const;
    std::vector<int> hidden_indices() const;

    void validate() const;  // table sizes, label ranges; throws std::invalid_argument
};

// Node/factor potential tables, dense on one graph (the full graph for the
// loss-augmented side, the reduced hidden graph for the latent side).
struct PotentialSet {
    std::vector<Table> node;
    std::vector<Table> factor;
};

struct Dataset {
    std::shared_ptr<const FactorGraph> graph;
    int num_features = 0;
    std::vector<Example> train;
    std::vector<Example> test;
};

// theta_i = loss_i + sum_r w_r feat_{r,i}, theta_a likewise. `include_loss`
// off gives the plain score potentials used by test-time decoding.
PotentialSet reparameterize(const Example& ex, const ModelParams& params,
                            bool include_loss = true);

// Latent-side potentials on sub.reduced: observed slots are clamped to the
// example's labels, tables range over hidden slots only.
PotentialSet latent_potentials(const Example& ex, const ModelParams& params,
                               const HiddenSubgraph& sub);

// Normalized Hamming loss on the observed variables: loss_i(s) = scale*[s != y_i]
// for observed i, zero tables for hidden nodes and all factors.
void set_hamming_loss(Example& ex, double scale);

// Per-feature expectation of the example under latent beliefs `d` (tables on
// sub.reduced): observed nodes/slots contribute their clamped feature value,
// hidden ones their belief-weighted average. With no hidden variables this is
// the exact feature vector at the observed labeling.
std::vector<double> feature_expectations(const Example& ex, const HiddenSubgraph& sub,
                                         const struct BeliefSet& d);

}  // namespace lsp

#endif
