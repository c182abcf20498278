#include "lsp/learning.hpp"

#include <cmath>
#include <iostream>
#include <stdexcept>
#include <string>

#include "lsp/parallel.hpp"

namespace lsp {

namespace {

// latent-loss linear term <l^c, d> plus eps-weighted entropies of d
double latent_value_terms(const Example& ex, const ExampleState& st, const HyperParams& hyper) {
    if (st.sub.empty()) return 0.0;
    const auto& rg = st.sub.reduced;
    double linear = 0.0, ent = 0.0;
    for (int ri = 0; ri < rg.num_vars(); ++ri) {
        const int i = st.sub.hidden_vars[ri];
        const auto& di = st.d.node[ri];
        if (i < static_cast<int>(ex.latent_loss_node.size()) && !ex.latent_loss_node[i].empty())
            for (std::size_t s = 0; s < di.size(); ++s)
                linear += ex.latent_loss_node[i][s] * di[s];
        ent += hyper.counting_latent_node * entropy(di);
    }
    for (int f = 0; f < rg.num_factors(); ++f) {
        const int a = st.sub.active_factors[f];
        const auto& da = st.d.factor[f];
        if (a < static_cast<int>(ex.latent_loss_factor.size()) && !ex.latent_loss_factor[a].empty())
            for (std::size_t s = 0; s < da.size(); ++s)
                linear += ex.latent_loss_factor[a][s] * da[s];
        ent += hyper.counting_latent_factor * entropy(da);
    }
    return linear + hyper.epsilon * ent;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

void check_descent(double before, double after, int iter, char stage) {
    if (after > before + kDescentSlack)
        throw std::logic_error("objective increased at iteration " + std::to_string(iter) +
                               " stage " + stage + ": " + std::to_string(before) + " -> " +
                               std::to_string(after));
}

}  // namespace

void LineSearchConfig::validate() const {
    if (!(initial_step > 0.0)) throw std::invalid_argument("line search initial step must be > 0");
    if (!(shrink > 0.0 && shrink < 1.0))
        throw std::invalid_argument("line search shrink factor must be in (0,1)");
    if (!(sufficient_decrease > 0.0 && sufficient_decrease < 1.0))
        throw std::invalid_argument("sufficient-decrease coefficient must be in (0,1)");
    if (max_halvings < 0) throw std::invalid_argument("max_halvings must be >= 0");
}

TrainState make_state(const Dataset& data, const HyperParams& hyper,
                      const ModelParams& params, int threads) {
    TrainState state;
    state.params = params;
    state.examples.resize(data.train.size());
    for (const auto& ex : data.train) ex.validate();
    parallel_for(static_cast<int>(data.train.size()), threads, [&](int x) {
        const Example& ex = data.train[x];
        ExampleState& st = state.examples[x];
        st.sub = hidden_subgraph(*ex.graph, ex.hidden_indices());
        st.lambda = MessageSet::zeros(*ex.graph);
        if (!st.sub.empty()) {
            st.latent_msgs = MessageSet::zeros(st.sub.reduced);
            InferenceWork work;
            const PotentialSet theta_hat = latent_potentials(ex, state.params, st.sub);
            st.d = local_beliefs(st.sub.reduced, theta_hat, st.latent_msgs, hyper.epsilon,
                                 hyper.counting_latent_node, hyper.counting_latent_factor, work);
        }
        st.feat_exp = feature_expectations(ex, st.sub, st.d);
    });
    return state;
}

void refresh_latent_beliefs(const std::vector<Example>& data, TrainState& state,
                            const HyperParams& hyper, int threads) {
    parallel_for(static_cast<int>(data.size()), threads, [&](int x) {
        ExampleState& st = state.examples[x];
        const PotentialSet theta_hat = latent_potentials(data[x], state.params, st.sub);
        LatentSolution sol = solve_latent_subproblem(
            st.sub, theta_hat, hyper.epsilon, hyper.counting_latent_node,
            hyper.counting_latent_factor, hyper.latent_tolerance, hyper.inner_iters,
            &st.latent_msgs);
        if (!st.sub.empty()) st.d = std::move(sol.beliefs);
        st.latent_residual = sol.residual;
        st.latent_converged = sol.converged;
        st.feat_exp = feature_expectations(data[x], st.sub, st.d);
    });
}

void sweep_all_messages(const std::vector<Example>& data, TrainState& state,
                        const HyperParams& hyper, int sweeps, int threads) {
    parallel_for(static_cast<int>(data.size()), threads, [&](int x) {
        const Example& ex = data[x];
        const PotentialSet theta = reparameterize(ex, state.params);
        InferenceWork work;
        for (int s = 0; s < sweeps; ++s)
            sweep_messages(*ex.graph, theta, state.examples[x].lambda, hyper.epsilon,
                           hyper.counting_node, hyper.counting_factor, work);
    });
}

ObjectiveParts objective(const std::vector<Example>& data, const TrainState& state,
                         const HyperParams& hyper, int threads) {
    ObjectiveParts parts;
    const auto& w = state.params.weights;

    std::vector<double> duals(data.size(), 0.0);
    parallel_for(static_cast<int>(data.size()), threads, [&](int x) {
        const PotentialSet theta = reparameterize(data[x], state.params);
        duals[x] = dual_value(*data[x].graph, theta, state.examples[x].lambda, hyper.epsilon,
                              hyper.counting_node, hyper.counting_factor);
    });

    parts.f1 = 0.5 * hyper.c_reg * dot(w, w);
    for (double v : duals) parts.f1 += v;
    for (std::size_t x = 0; x < data.size(); ++x) {
        parts.f2 -= dot(w, state.examples[x].feat_exp);
        parts.f3 -= latent_value_terms(data[x], state.examples[x], hyper);
    }
    parts.total = parts.f1 + parts.f2 + parts.f3;
    if (!std::isfinite(parts.total)) throw std::runtime_error("objective is not finite");
    return parts;
}

double objective_f1_f2(const std::vector<Example>& data, const TrainState& state,
                       const HyperParams& hyper, const std::vector<double>& w, int threads) {
    const ModelParams trial{w};
    std::vector<double> duals(data.size(), 0.0);
    parallel_for(static_cast<int>(data.size()), threads, [&](int x) {
        const PotentialSet theta = reparameterize(data[x], trial);
        duals[x] = dual_value(*data[x].graph, theta, state.examples[x].lambda, hyper.epsilon,
                              hyper.counting_node, hyper.counting_factor);
    });
    double value = 0.5 * hyper.c_reg * dot(w, w);
    for (double v : duals) value += v;
    for (std::size_t x = 0; x < data.size(); ++x)
        value -= dot(w, state.examples[x].feat_exp);
    return value;
}

std::vector<double> weight_gradient(const std::vector<Example>& data, const TrainState& state,
                                    const HyperParams& hyper, int threads) {
    const int F = state.params.num_features();
    std::vector<std::vector<double>> partial(data.size());
    parallel_for(static_cast<int>(data.size()), threads, [&](int x) {
        const Example& ex = data[x];
        const auto& g = *ex.graph;
        const PotentialSet theta = reparameterize(ex, state.params);
        InferenceWork work;
        const BeliefSet b = local_beliefs(g, theta, state.examples[x].lambda, hyper.epsilon,
                                          hyper.counting_node, hyper.counting_factor, work);
        std::vector<double> acc(F, 0.0);
        for (int r = 0; r < F; ++r) {
            for (int i = 0; i < g.num_vars(); ++i) {
                const auto& ft = ex.feat_node[r][i];
                if (ft.empty()) continue;
                for (std::size_t s = 0; s < ft.size(); ++s) acc[r] += b.node[i][s] * ft[s];
            }
            for (int a = 0; a < g.num_factors(); ++a) {
                const auto& ft = ex.feat_factor[r][a];
                if (ft.empty()) continue;
                for (std::size_t s = 0; s < ft.size(); ++s) acc[r] += b.factor[a][s] * ft[s];
            }
            acc[r] -= state.examples[x].feat_exp[r];
        }
        partial[x] = std::move(acc);
    });

    std::vector<double> grad(F);
    for (int r = 0; r < F; ++r) grad[r] = hyper.c_reg * state.params.weights[r];
    for (std::size_t x = 0; x < data.size(); ++x)
        for (int r = 0; r < F; ++r) grad[r] += partial[x][r];
    return grad;
}

double line_search(const std::vector<Example>& data, const TrainState& state,
                   const HyperParams& hyper, const std::vector<double>& grad,
                   const LineSearchConfig& cfg, int threads, bool* stalled) {
    if (stalled) *stalled = false;
    const auto& w = state.params.weights;
    const double base = objective_f1_f2(data, state, hyper, w, threads);
    const double gg = dot(grad, grad);

    double eta = cfg.initial_step;
    std::vector<double> trial(w.size());
    for (int k = 0; k <= cfg.max_halvings; ++k) {
        for (std::size_t r = 0; r < w.size(); ++r) trial[r] = w[r] - eta * grad[r];
        const double value = objective_f1_f2(data, state, hyper, trial, threads);
        if (value <= base - cfg.sufficient_decrease * eta * gg) return eta;
        eta *= cfg.shrink;
    }
    if (stalled) *stalled = true;
    return 0.0;
}

TrainState train(const Dataset& data, const HyperParams& hyper, const TrainOptions& opts) {
    hyper.validate();
    opts.line_search.validate();

    ModelParams init;
    init.weights.assign(data.num_features, 0.0);
    TrainState state = make_state(data, hyper, init, opts.threads);
    if (opts.disable_latent_stage)
        for (const auto& st : state.examples)
            if (!st.sub.empty())
                throw std::invalid_argument("disable_latent_stage requires fully observed examples");

    ObjectiveParts cur = objective(data.train, state, hyper, opts.threads);
    state.history.push_back({0, cur.total, cur.f1, cur.f2, cur.f3, 0.0, 0.0, 0.0});

    int consecutive_stalls = 0;
    bool warned_unconverged = false;
    for (int iter = 1; iter <= hyper.outer_iters; ++iter) {
        const double f_prev = cur.total;

        // (a) latent variable prediction problem, independently per example
        if (!opts.disable_latent_stage) {
            refresh_latent_beliefs(data.train, state, hyper, opts.threads);
            if (!warned_unconverged) {
                for (const auto& st : state.examples) {
                    if (st.latent_converged) continue;
                    std::cerr << "note: latent subproblem hit the sweep cap at iteration "
                              << iter << " (residual " << st.latent_residual
                              << "); proceeding\n";
                    warned_unconverged = true;
                    break;
                }
            }
            if (opts.verify_monotone) {
                const ObjectiveParts parts = objective(data.train, state, hyper, opts.threads);
                check_descent(cur.total, parts.total, iter, 'a');
                state.stage_history.push_back({iter, 'a', parts.total, parts.f1, parts.f2, parts.f3});
                cur = parts;
            }
        }

        // (b) message passing update
        sweep_all_messages(data.train, state, hyper, hyper.msg_sweeps, opts.threads);
        if (opts.verify_monotone) {
            const ObjectiveParts parts = objective(data.train, state, hyper, opts.threads);
            check_descent(cur.total, parts.total, iter, 'b');
            state.stage_history.push_back({iter, 'b', parts.total, parts.f1, parts.f2, parts.f3});
            cur = parts;
        }

        // (c) gradient step with line search
        const std::vector<double> grad = weight_gradient(data.train, state, hyper, opts.threads);
        bool stalled = false;
        const double eta = line_search(data.train, state, hyper, grad, opts.line_search,
                                       opts.threads, &stalled);
        if (eta > 0.0)
            for (std::size_t r = 0; r < state.params.weights.size(); ++r)
                state.params.weights[r] -= eta * grad[r];
        state.last_eta = eta;
        consecutive_stalls = stalled ? consecutive_stalls + 1 : 0;

        const ObjectiveParts parts = objective(data.train, state, hyper, opts.threads);
        if (opts.verify_monotone) {
            check_descent(cur.total, parts.total, iter, 'c');
            state.stage_history.push_back({iter, 'c', parts.total, parts.f1, parts.f2, parts.f3});
        }
        cur = parts;

        double residual = 0.0;
        for (const auto& st : state.examples)
            residual = std::max(residual, st.latent_residual);
        state.history.push_back({iter, cur.total, cur.f1, cur.f2, cur.f3,
                                 std::sqrt(dot(grad, grad)), eta, residual});
        state.outer_iters_used = iter;
        if (opts.on_iteration) opts.on_iteration(state.history.back());

        if (std::abs(f_prev - cur.total) < hyper.tolerance) {
            state.status = TrainStatus::converged;
            return state;
        }
        if (consecutive_stalls >= 2) {
            state.status = TrainStatus::stalled;
            return state;
        }
    }
    state.status = TrainStatus::max_iters;
    return state;
}

}  // namespace lsp
