#ifndef LSP_LEARNING_HPP
#define LSP_LEARNING_HPP

#include <functional>
#include <vector>

#include "lsp/factor_graph.hpp"
#include "lsp/inference.hpp"
#include "lsp/model.hpp"

namespace lsp {

struct LineSearchConfig {
    double initial_step = 1.0;
    double shrink = 0.5;
    double sufficient_decrease = 1e-4;  // Armijo coefficient
    int max_halvings = 40;

    void validate() const;
};

// One training-log record per outer iteration.
struct IterRecord {
    int iter = 0;
    double total = 0.0, f1 = 0.0, f2 = 0.0, f3 = 0.0;
    double grad_norm = 0.0;        // ||grad(f1+f2)||_2 before the step
    double eta = 0.0;              // accepted step size
    double latent_residual = 0.0;  // max marginalization residual over examples
};

// Objective snapshot after one stage of one outer iteration; recorded when
// monotonicity verification is on. Stages: 'a' latent beliefs, 'b' messages,
// 'c' weight step.
struct StageRecord {
    int iter = 0;
    char stage = 'a';
    double total = 0.0, f1 = 0.0, f2 = 0.0, f3 = 0.0;
};

enum class TrainStatus { converged, max_iters, stalled };

struct TrainOptions {
    LineSearchConfig line_search;
    int threads = 1;
    // invoked after every outer iteration with the fresh history record
    std::function<void(const IterRecord&)> on_iteration;
    // Recompute the objective after every stage and fail hard (std::logic_error)
    // if it ever increases by more than the descent slack.
    bool verify_monotone = false;
    // Skip the latent stage entirely; only valid when no example has hidden
    // variables. Exists to check that the latent machinery reduces exactly to
    // the fully-observed training path.
    bool disable_latent_stage = false;
};

constexpr double kDescentSlack = 1e-8;

// Per-example mutable training state; owned by one worker at a time.
struct ExampleState {
    HiddenSubgraph sub;
    MessageSet lambda;            // loss-augmented side, full graph
    MessageSet latent_msgs;       // latent side, reduced graph (warm start)
    BeliefSet d;                  // latent beliefs
    double latent_residual = 0.0;
    bool latent_converged = true;
    std::vector<double> feat_exp;  // feature expectations under d
};

struct TrainState {
    ModelParams params;
    std::vector<ExampleState> examples;
    std::vector<IterRecord> history;
    std::vector<StageRecord> stage_history;  // verify_monotone only
    double last_eta = 0.0;
    int outer_iters_used = 0;
    TrainStatus status = TrainStatus::max_iters;
};

struct ObjectiveParts {
    double total = 0.0, f1 = 0.0, f2 = 0.0, f3 = 0.0;
};

// Per-example state at the given weights: subgraphs, zero messages, beliefs
// at the zero latent dual (uniform when theta_hat is flat), cached feature
// expectations. The starting point of the alternation.
TrainState make_state(const Dataset& data, const HyperParams& hyper,
                      const ModelParams& params, int threads = 1);

// Stage (a): solve every example's latent subproblem at the current weights
// (warm-started) and refresh the cached feature expectations.
void refresh_latent_beliefs(const std::vector<Example>& data, TrainState& state,
                            const HyperParams& hyper, int threads = 1);

// Stage (b): `sweeps` message sweeps on every example.
void sweep_all_messages(const std::vector<Example>& data, TrainState& state,
                        const HyperParams& hyper, int sweeps, int threads = 1);

// f1 = C/2 ||w||^2 + sum_ex D(lambda_ex), f2 = -sum_r w_r * sum_ex featexp_r,
// f3 = -sum_ex [<latent loss, d> + eps * sum c-hat * H(d)]. Uses the cached
// feature expectations, so stage (a) must have refreshed them for the current d.
ObjectiveParts objective(const std::vector<Example>& data, const TrainState& state,
                         const HyperParams& hyper, int threads = 1);

// f1 + f2 at weights w with messages and beliefs held fixed; the function the
// line search probes and the w-gradient differentiates.
double objective_f1_f2(const std::vector<Example>& data, const TrainState& state,
                       const HyperParams& hyper, const std::vector<double>& w,
                       int threads = 1);

// grad_r = C w_r + sum_ex [<b_i, phi_{r,i}> + <b_a, phi_{r,a}>] - sum_ex featexp_r
// with b the soft-max marginals at the current messages; accumulated in
// ascending example order.
std::vector<double> weight_gradient(const std::vector<Example>& data, const TrainState& state,
                                    const HyperParams& hyper, int threads = 1);

// Backtracking line search on f1+f2 as a function of w, messages and beliefs
// held fixed. Returns the largest admissible eta; 0 with *stalled = true when
// max_halvings is exhausted.
double line_search(const std::vector<Example>& data, const TrainState& state,
                   const HyperParams& hyper, const std::vector<double>& grad,
                   const LineSearchConfig& cfg, int threads, bool* stalled);

// The alternating training loop: per outer iteration (a) solve every
// example's latent subproblem to tolerance, (b) msg_sweeps message sweeps per
// example, (c) one gradient step on w with line search. Stops when |delta F|
// < hyper.tolerance, on outer_iters, or after two consecutive stalled line
// searches.
TrainState train(const Dataset& data, const HyperParams& hyper, const TrainOptions& opts = {});

}  // namespace lsp

#endif
