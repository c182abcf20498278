#ifndef LSP_ORACLE_HPP
#define LSP_ORACLE_HPP

#include <cstddef>
#include <functional>
#include <vector>

#include "lsp/factor_graph.hpp"
#include "lsp/inference.hpp"
#include "lsp/model.hpp"

// Brute-force and generic-minimizer ground truth for tiny instances. Used by
// the test suites and the `verify` CLI mode only; every routine here is coded
// independently of the message-passing implementation it certifies, and
// refuses instances beyond the enumeration limit instead of sampling.
namespace lsp::oracle {

struct EnumerationLimit {
    std::size_t max_joint_configs = 2'000'000;
};

// eps * ln sum_{s in S} exp((w.phi(x,s) + loss(s)) / eps) by full enumeration,
// evaluated through the reparameterized potential tables.
double exact_loss_augmented_term(const Example& ex, const ModelParams& params, double eps,
                                 EnumerationLimit lim = {});

// Same value computed a second way (raw feature tables, different traversal);
// the two paths agree to 1e-12 and cross-check each other.
double exact_loss_augmented_term_alt(const Example& ex, const ModelParams& params, double eps,
                                     EnumerationLimit lim = {});

// eps * ln sum_{h in H} exp((w.phi(x,(y,h)) + latent_loss(y,h)) / eps) with the
// observed variables clamped to their labels. Empty hidden set -> the clamped
// score itself.
double exact_latent_term(const Example& ex, const ModelParams& params, double eps,
                         EnumerationLimit lim = {});

// C/2 ||w||^2 + sum_ex [loss-augmented term - latent term]
double exact_objective(const std::vector<Example>& examples, const ModelParams& params,
                       const HyperParams& hyper, EnumerationLimit lim = {});

// Generic smooth convex minimizer (L-BFGS with backtracking). fg returns the
// value and fills the gradient.
struct MinimizeResult {
    std::vector<double> x;
    double value = 0.0;
    double grad_norm = 0.0;  // max-norm at the end
    int iters = 0;
    bool converged = false;
};
MinimizeResult minimize_lbfgs(
    const std::function<double(const std::vector<double>&, std::vector<double>&)>& fg,
    std::vector<double> x0, double grad_tol = 1e-10, int max_iters = 20000);

// Independent evaluation of the dual data term; lambda is given per edge in
// the graph's edge order.
double reference_dual(const FactorGraph& g, const PotentialSet& theta,
                      const std::vector<Table>& lambda, double eps, double c_node,
                      double c_factor);

// Numeric minimization of the dual over one variable's message block.
struct BlockMinResult {
    std::vector<Table> block;  // per neighbor of `var`
    double dual = 0.0;
    double grad_norm = 0.0;
    bool converged = false;
};
BlockMinResult block_min(const FactorGraph& g, const PotentialSet& theta,
                         const MessageSet& msgs, int var, double eps, double c_node,
                         double c_factor);

// Numeric solution of the latent variable prediction problem: minimizes the
// dual of the entropy-regularized program over all multipliers with L-BFGS
// and recovers the (unique) primal beliefs.
struct LatentSolveResult {
    BeliefSet beliefs;
    double value = 0.0;
    double grad_norm = 0.0;
    bool converged = false;
};
LatentSolveResult latent_solve(const HiddenSubgraph& sub, const PotentialSet& theta_hat,
                               double eps, double c_node, double c_factor);

}  // namespace lsp::oracle

#endif
