#include "lsp/verify.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "lsp/instances.hpp"
#include "lsp/learning.hpp"
#include "lsp/oracle.hpp"
#include "lsp/rng.hpp"
#include "lsp/text_format.hpp"

namespace lsp::verify {

namespace {

using instances::random_instance;

MessageSet random_messages(const FactorGraph& g, Rng& rng, double range) {
    MessageSet m = MessageSet::zeros(g);
    for (double& v : m.values) v = rng.uniform(-range, range);
    return m;
}

double pick_eps(Rng& rng) { return rng.bernoulli(0.5) ? 1.0 : 0.1; }

CheckResult enum_cross_check(Rng& rng) {
    double max_dev = 0.0;
    for (int t = 0; t < 30; ++t) {
        const auto inst = random_instance(rng);
        const double eps = pick_eps(rng);
        const double a = oracle::exact_loss_augmented_term(inst.example(), inst.params, eps);
        const double b = oracle::exact_loss_augmented_term_alt(inst.example(), inst.params, eps);
        max_dev = std::max(max_dev, std::abs(a - b));
    }
    return {"enum-cross-check", max_dev <= 1e-12, "max deviation " + format_double(max_dev)};
}

CheckResult dual_upper_bound(Rng& rng) {
    double worst = 1e300;  // smallest slack D - exact
    for (int t = 0; t < 30; ++t) {
        const auto inst = random_instance(rng);
        const double eps = pick_eps(rng);
        const auto& ex = inst.example();
        const PotentialSet theta = reparameterize(ex, inst.params);
        const MessageSet msgs = random_messages(*ex.graph, rng, 1.0);
        const double dual = dual_value(*ex.graph, theta, msgs, eps, 1.0, 1.0);
        const double exact = oracle::exact_loss_augmented_term(ex, inst.params, eps);
        worst = std::min(worst, dual - exact);
    }
    return {"dual-upper-bound", worst >= -1e-8, "min slack " + format_double(worst)};
}

CheckResult block_update_vs_oracle(Rng& rng, CheckResult* companion) {
    double max_value_gap = 0.0, max_fd_grad = 0.0, max_ascent = 0.0;
    for (int t = 0; t < 15; ++t) {
        const auto inst = random_instance(rng);
        const double eps = pick_eps(rng);
        const auto& ex = inst.example();
        const auto& g = *ex.graph;
        const PotentialSet theta = reparameterize(ex, inst.params);
        MessageSet msgs = random_messages(g, rng, 1.0);
        int var = rng.uniform_int(0, g.num_vars() - 1);
        if (g.degree(var) == 0) {
            var = -1;
            for (int i = 0; i < g.num_vars(); ++i)
                if (g.degree(i) > 0) var = i;
            if (var < 0) continue;
        }

        const double before = dual_value(g, theta, msgs, eps, 1.0, 1.0);
        const auto oracle_res = oracle::block_min(g, theta, msgs, var, eps, 1.0, 1.0);
        InferenceWork work;
        update_messages_block(g, theta, msgs, var, eps, 1.0, 1.0, work);
        const double after = dual_value(g, theta, msgs, eps, 1.0, 1.0);

        max_ascent = std::max(max_ascent, after - before);
        max_value_gap = std::max(max_value_gap, std::abs(after - oracle_res.dual));

        // finite-difference gradient of D in the updated block
        const double h = 1e-5;
        for (int e : g.var_edges[var]) {
            for (int s = 0; s < g.cardinalities[var]; ++s) {
                const double keep = msgs.edge(e)[s];
                msgs.edge(e)[s] = keep + h;
                const double up = dual_value(g, theta, msgs, eps, 1.0, 1.0);
                msgs.edge(e)[s] = keep - h;
                const double down = dual_value(g, theta, msgs, eps, 1.0, 1.0);
                msgs.edge(e)[s] = keep;
                max_fd_grad = std::max(max_fd_grad, std::abs((up - down) / (2 * h)));
            }
        }
    }
    if (companion)
        *companion = {"block-stationarity", max_fd_grad < 1e-6,
                      "max |dD/dlambda| " + format_double(max_fd_grad)};
    const bool ok = max_value_gap <= 1e-6 && max_ascent <= 1e-10;
    return {"block-update-oracle", ok,
            "max value gap " + format_double(max_value_gap) + ", max ascent " +
                format_double(max_ascent)};
}

CheckResult latent_vs_oracle(Rng& rng) {
    double max_value_gap = 0.0, max_belief_gap = 0.0, max_residual = 0.0;
    int done = 0;
    while (done < 15) {
        const auto inst = random_instance(rng);
        const auto& ex = inst.example();
        const auto sub = hidden_subgraph(*ex.graph, ex.hidden_indices());
        if (sub.empty()) continue;
        ++done;
        const double eps = pick_eps(rng);
        const PotentialSet theta_hat = latent_potentials(ex, inst.params, sub);
        const auto mp = solve_latent_subproblem(sub, theta_hat, eps, 1.0, 1.0, 1e-10, 50000);
        const auto oc = oracle::latent_solve(sub, theta_hat, eps, 1.0, 1.0);
        max_value_gap = std::max(max_value_gap, std::abs(mp.value - oc.value));
        max_residual = std::max(max_residual, mp.residual);
        for (std::size_t i = 0; i < mp.beliefs.node.size(); ++i)
            for (std::size_t s = 0; s < mp.beliefs.node[i].size(); ++s)
                max_belief_gap = std::max(
                    max_belief_gap, std::abs(mp.beliefs.node[i][s] - oc.beliefs.node[i][s]));
        for (std::size_t a = 0; a < mp.beliefs.factor.size(); ++a)
            for (std::size_t s = 0; s < mp.beliefs.factor[a].size(); ++s)
                max_belief_gap = std::max(
                    max_belief_gap, std::abs(mp.beliefs.factor[a][s] - oc.beliefs.factor[a][s]));
    }
    const bool ok = max_value_gap <= 1e-5 && max_belief_gap <= 1e-4 && max_residual < 1e-6;
    return {"latent-subproblem-oracle", ok,
            "value gap " + format_double(max_value_gap) + ", belief gap " +
                format_double(max_belief_gap) + ", residual " + format_double(max_residual)};
}

CheckResult gradient_fd(Rng& rng) {
    double worst_rel = 0.0;
    for (int t = 0; t < 10; ++t) {
        const auto inst = random_instance(rng);
        HyperParams hyper;
        hyper.epsilon = pick_eps(rng);
        TrainState state = make_state(inst.data, hyper, inst.params);
        refresh_latent_beliefs(inst.data.train, state, hyper);
        sweep_all_messages(inst.data.train, state, hyper, 3);

        const auto grad = weight_gradient(inst.data.train, state, hyper);
        const double h = 1e-5;
        double max_abs = 1.0, max_err = 0.0;
        for (std::size_t r = 0; r < grad.size(); ++r) {
            auto w = state.params.weights;
            w[r] += h;
            const double up = objective_f1_f2(inst.data.train, state, hyper, w);
            w[r] -= 2 * h;
            const double down = objective_f1_f2(inst.data.train, state, hyper, w);
            const double fd = (up - down) / (2 * h);
            max_err = std::max(max_err, std::abs(fd - grad[r]));
            max_abs = std::max(max_abs, std::abs(grad[r]));
        }
        worst_rel = std::max(worst_rel, max_err / max_abs);
    }
    return {"gradient-finite-difference", worst_rel <= 1e-5,
            "max relative error " + format_double(worst_rel)};
}

CheckResult monotone_descent(Rng& rng) {
    for (int t = 0; t < 3; ++t) {
        const auto inst = random_instance(rng);
        HyperParams hyper;
        hyper.epsilon = pick_eps(rng);
        hyper.outer_iters = 15;
        hyper.inner_iters = 5000;
        hyper.tolerance = 1e-14;
        TrainOptions opts;
        opts.verify_monotone = true;
        try {
            (void)train(inst.data, hyper, opts);
        } catch (const std::logic_error& e) {
            return {"monotone-descent", false, e.what()};
        }
    }
    return {"monotone-descent", true, "objective non-increasing across all stages"};
}

CheckResult single_node_exact(Rng& rng) {
    instances::InstanceOptions opts;
    opts.min_vars = opts.max_vars = 1;
    opts.table_present_prob = 1.0;
    auto inst = random_instance(rng, opts);
    inst.data.train.front().hidden.assign(1, 0);  // fully observed
    set_hamming_loss(inst.data.train.front(), 1.0);

    HyperParams hyper;
    hyper.outer_iters = 500;
    hyper.tolerance = 1e-13;
    const TrainState state = train(inst.data, hyper);
    const double exact = oracle::exact_objective(inst.data.train, state.params, hyper);
    const double gap = std::abs(state.history.back().total - exact);
    return {"single-node-exact", gap <= 1e-9,
            "program vs exact objective gap " + format_double(gap)};
}

}  // namespace

std::vector<CheckResult> run_all(std::uint64_t seed) {
    Rng rng(seed);
    std::vector<CheckResult> results;
    results.push_back(enum_cross_check(rng));
    results.push_back(dual_upper_bound(rng));
    CheckResult stationarity;
    results.push_back(block_update_vs_oracle(rng, &stationarity));
    results.push_back(stationarity);
    results.push_back(latent_vs_oracle(rng));
    results.push_back(gradient_fd(rng));
    results.push_back(monotone_descent(rng));
    results.push_back(single_node_exact(rng));
    return results;
}

}  // namespace lsp::verify
