#ifndef LSP_INFERENCE_HPP
#define LSP_INFERENCE_HPP

#include <cstddef>
#include <vector>

#include "lsp/factor_graph.hpp"
#include "lsp/model.hpp"

namespace lsp {

// Lagrange multipliers lambda_{i->a}(s_i), one table per (variable, factor)
// edge, flat storage in edge-id order. Zero-initialized.
struct MessageSet {
    std::vector<double> values;
    std::vector<std::size_t> offsets;  // per edge; size num_edges+1

    static MessageSet zeros(const FactorGraph& g);
    double* edge(int e) { return values.data() + offsets[e]; }
    const double* edge(int e) const { return values.data() + offsets[e]; }
    void reset() { values.assign(values.size(), 0.0); }
};

// Node/factor probability tables. For latent beliefs the factor tables range
// over hidden slots only (they live on a reduced graph).
struct BeliefSet {
    std::vector<Table> node;
    std::vector<Table> factor;
};

// Scratch buffers for the message-passing inner loops; one per worker.
struct InferenceWork {
    std::vector<double> factor_sum;  // theta_a + incoming lambda, per factor table
    std::vector<double> incoming;    // m_{a->i} for all neighbors of one variable
    std::vector<double> node_acc;    // theta_i - sum lambda, or the mean field mu
};

// The dual data term of the loss-augmented side:
//   D(lambda) = sum_i eps*c_i * LSE_{s_i}[(theta_i(s_i) - sum_{a in N(i)} lambda_{i->a}(s_i)) / (eps*c_i)]
//             + sum_a eps*c_a * LSE_{s_a}[(theta_a(s_a) + sum_{i in N(a)} lambda_{i->a}(s_i)) / (eps*c_a)]
// computed with max-shifted log-sum-exp. Throws std::runtime_error naming the
// offending table if a term comes out non-finite.
double dual_value(const FactorGraph& g, const PotentialSet& theta, const MessageSet& msgs,
                  double eps, double c_node, double c_factor);

// Closed-form block-coordinate minimizer of D over {lambda_{i->a}}_{a in N(i)}:
//   m_{a->i}(s_i) = eps*c_a * LSE_{s_a: s_a[i]=s_i}[(theta_a(s_a) + sum_{j != i} lambda_{j->a}(s_j)) / (eps*c_a)]
//   cbar_i       = c_i + sum_{b in N(i)} c_b
//   lambda_{i->a}(s_i) = (c_a/cbar_i) * (theta_i(s_i) + sum_b m_{b->i}(s_i)) - m_{a->i}(s_i)
// Leaves the block gradient of D at zero; D never increases. No-op for a
// variable with no factors.
void update_messages_block(const FactorGraph& g, const PotentialSet& theta, MessageSet& msgs,
                           int var, double eps, double c_node, double c_factor,
                           InferenceWork& work);

// One block update per variable, ascending index.
void sweep_messages(const FactorGraph& g, const PotentialSet& theta, MessageSet& msgs,
                    double eps, double c_node, double c_factor, InferenceWork& work);

// Soft-max marginals of the dual:
//   b_i(s_i) ~ exp[(theta_i(s_i) - sum_a lambda_{i->a}(s_i)) / (eps*c_i)]
//   b_a(s_a) ~ exp[(theta_a(s_a) + sum_i lambda_{i->a}(s_i)) / (eps*c_a)]
BeliefSet local_beliefs(const FactorGraph& g, const PotentialSet& theta, const MessageSet& msgs,
                        double eps, double c_node, double c_factor, InferenceWork& work);

// max_{a, slot, state} | sum_{s_a \ s_i} b_a - b_i(s_i) |
double marginalization_residual(const FactorGraph& g, const BeliefSet& b);

// Entropy with probabilities clamped to >= 1e-300 before the log.
double entropy(const Table& p);

struct LatentSolution {
    BeliefSet beliefs;     // d, on the reduced graph
    double value = 0.0;    // -<theta_hat, d> - eps * sum c-hat * H(d)
    double residual = 0.0;
    int sweeps = 0;
    bool converged = true;
};

// The latent variable prediction problem: minimize
//   -sum_i <theta_hat_i, d_i> - sum_a <theta_hat_a, d_a>
//   - eps * sum_i chat_i H(d_i) - eps * sum_a chat_a H(d_a)
// over the local polytope of sub.reduced, by message passing of the same form
// as update_messages_block. Sweeps until the marginalization residual drops
// below tol or max_sweeps is hit; `warm`, when given, carries the dual state
// across calls. Empty hidden set -> empty beliefs, value 0.
LatentSolution solve_latent_subproblem(const HiddenSubgraph& sub, const PotentialSet& theta_hat,
                                       double eps, double c_node, double c_factor,
                                       double tol, int max_sweeps,
                                       MessageSet* warm = nullptr);

// Approximate MAP labeling: message sweeps at a small temperature on loss-free
// potentials, then per-variable argmax of the node beliefs; ties break to the
// lowest state index.
std::vector<int> decode_map(const FactorGraph& g, const PotentialSet& theta,
                            double eps_decode = 0.01, int max_sweeps = 500,
                            double tol = 1e-8);

}  // namespace lsp

#endif
