#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "lsp/inference.hpp"
#include "lsp/instances.hpp"
#include "lsp/oracle.hpp"
#include "lsp/rng.hpp"

using namespace lsp;

namespace {

const double kLn1pe = std::log(1.0 + std::exp(1.0));  // 1.3132616875182228

PotentialSet zero_potentials(const FactorGraph& g) {
    PotentialSet theta;
    theta.node.resize(g.num_vars());
    theta.factor.resize(g.num_factors());
    for (int i = 0; i < g.num_vars(); ++i) theta.node[i].assign(g.cardinalities[i], 0.0);
    for (int a = 0; a < g.num_factors(); ++a) theta.factor[a].assign(g.factor_sizes[a], 0.0);
    return theta;
}

double table_max_abs_diff(const Table& a, const Table& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace

TEST_CASE("dual value of a single variable") {
    const FactorGraph g = build_graph({4}, {});
    PotentialSet theta = zero_potentials(g);
    const MessageSet msgs = MessageSet::zeros(g);
    CHECK(dual_value(g, theta, msgs, 1.0, 1.0, 1.0) == doctest::Approx(std::log(4.0)));

    const FactorGraph g2 = build_graph({2}, {});
    PotentialSet theta2 = zero_potentials(g2);
    theta2.node[0] = {1.0, 0.0};
    const MessageSet msgs2 = MessageSet::zeros(g2);
    CHECK(dual_value(g2, theta2, msgs2, 1.0, 1.0, 1.0) == doctest::Approx(kLn1pe));
}

TEST_CASE("dual value of a two-variable chain matches the two-sum formula") {
    Rng rng(21);
    const FactorGraph g = build_graph({2, 3}, {{0, 1}});
    PotentialSet theta = zero_potentials(g);
    for (auto& t : theta.node)
        for (double& v : t) v = rng.uniform(-2, 2);
    for (double& v : theta.factor[0]) v = rng.uniform(-2, 2);
    const MessageSet msgs = MessageSet::zeros(g);

    // independent restatement: sum of node LSEs plus the factor LSE
    auto lse = [](const Table& t, double c) {
        const double m = *std::max_element(t.begin(), t.end());
        double acc = 0.0;
        for (double v : t) acc += std::exp((v - m) / c);
        return m + c * std::log(acc);
    };
    const double expected = lse(theta.node[0], 1.0) + lse(theta.node[1], 1.0) +
                            lse(theta.factor[0], 1.0);
    CHECK(dual_value(g, theta, msgs, 1.0, 1.0, 1.0) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("block update with symmetric potentials keeps beliefs uniform") {
    const FactorGraph g = build_graph({3, 3, 3}, {{0, 1}, {1, 2}});
    PotentialSet theta = zero_potentials(g);
    MessageSet msgs = MessageSet::zeros(g);
    InferenceWork work;
    update_messages_block(g, theta, msgs, 1, 1.0, 1.0, 1.0, work);
    // lambda constant across states
    for (int e : g.var_edges[1]) {
        const double* lam = msgs.edge(e);
        CHECK(lam[1] == doctest::Approx(lam[0]).epsilon(1e-14));
        CHECK(lam[2] == doctest::Approx(lam[0]).epsilon(1e-14));
    }
    const BeliefSet b = local_beliefs(g, theta, msgs, 1.0, 1.0, 1.0, work);
    for (const auto& t : b.node)
        for (double v : t) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-12));
}

TEST_CASE("block update without factors is a no-op") {
    const FactorGraph g = build_graph({4}, {});
    PotentialSet theta = zero_potentials(g);
    theta.node[0] = {1, 2, 3, 4};
    MessageSet msgs = MessageSet::zeros(g);
    InferenceWork work;
    const double before = dual_value(g, theta, msgs, 1.0, 1.0, 1.0);
    update_messages_block(g, theta, msgs, 0, 1.0, 1.0, 1.0, work);
    CHECK(dual_value(g, theta, msgs, 1.0, 1.0, 1.0) == before);
    CHECK(msgs.values.empty());
}

TEST_CASE("local beliefs: uniform and two-state softmax") {
    const FactorGraph g = build_graph({2}, {});
    PotentialSet theta = zero_potentials(g);
    MessageSet msgs = MessageSet::zeros(g);
    InferenceWork work;
    BeliefSet b = local_beliefs(g, theta, msgs, 1.0, 1.0, 1.0, work);
    CHECK(b.node[0][0] == doctest::Approx(0.5));

    theta.node[0] = {1.0, 0.0};
    b = local_beliefs(g, theta, msgs, 1.0, 1.0, 1.0, work);
    CHECK(b.node[0][0] == doctest::Approx(0.7310585786300049).epsilon(1e-12));
    CHECK(b.node[0][1] == doctest::Approx(0.2689414213699951).epsilon(1e-12));
}

TEST_CASE("small epsilon sharpens beliefs onto the argmax") {
    Rng rng(22);
    for (int t = 0; t < 20; ++t) {
        const auto inst = instances::random_instance(rng);
        const auto& g = *inst.data.graph;
        const PotentialSet theta = reparameterize(inst.example(), inst.params);
        MessageSet msgs = MessageSet::zeros(g);
        for (double& v : msgs.values) v = rng.uniform(-0.5, 0.5);
        InferenceWork work;
        const BeliefSet b = local_beliefs(g, theta, msgs, 0.01, 1.0, 1.0, work);
        for (int i = 0; i < g.num_vars(); ++i) {
            // argmax of b_i equals argmax of theta_i - sum lambda
            Table acc = theta.node[i];
            for (int e : g.var_edges[i])
                for (std::size_t s = 0; s < acc.size(); ++s) acc[s] -= msgs.edge(e)[s];
            const auto arg_acc = std::max_element(acc.begin(), acc.end()) - acc.begin();
            const auto arg_b = std::max_element(b.node[i].begin(), b.node[i].end()) -
                               b.node[i].begin();
            CHECK(arg_acc == arg_b);
        }
    }
}

TEST_CASE("dual upper-bounds the exact log-partition for any messages") {
    Rng rng(23);
    instances::InstanceOptions opts;
    opts.max_vars = 6;
    for (int t = 0; t < 40; ++t) {
        const auto inst = instances::random_instance(rng, opts);
        const auto& g = *inst.data.graph;
        const double eps = rng.bernoulli(0.5) ? 1.0 : 0.1;
        const PotentialSet theta = reparameterize(inst.example(), inst.params);
        MessageSet msgs = MessageSet::zeros(g);
        for (double& v : msgs.values) v = rng.uniform(-1, 1);
        const double dual = dual_value(g, theta, msgs, eps, 1.0, 1.0);
        const double exact =
            oracle::exact_loss_augmented_term(inst.example(), inst.params, eps);
        CHECK(dual >= exact - 1e-8);
    }
}

TEST_CASE("block sweeps never increase the dual and end stationary") {
    Rng rng(24);
    for (int t = 0; t < 15; ++t) {
        const auto inst = instances::random_instance(rng);
        const auto& g = *inst.data.graph;
        const double eps = rng.bernoulli(0.5) ? 1.0 : 0.3;
        const PotentialSet theta = reparameterize(inst.example(), inst.params);
        MessageSet msgs = MessageSet::zeros(g);
        for (double& v : msgs.values) v = rng.uniform(-1, 1);
        InferenceWork work;
        double prev = dual_value(g, theta, msgs, eps, 1.0, 1.0);
        for (int sweep = 0; sweep < 30; ++sweep) {
            sweep_messages(g, theta, msgs, eps, 1.0, 1.0, work);
            const double cur = dual_value(g, theta, msgs, eps, 1.0, 1.0);
            CHECK(cur <= prev + 1e-10);
            prev = cur;
        }
        // finite-difference stationarity after convergence
        const double h = 1e-5;
        for (int e = 0; e < g.num_edges(); ++e) {
            for (int s = 0; s < g.cardinalities[g.edge_var[e]]; ++s) {
                const double keep = msgs.edge(e)[s];
                msgs.edge(e)[s] = keep + h;
                const double up = dual_value(g, theta, msgs, eps, 1.0, 1.0);
                msgs.edge(e)[s] = keep - h;
                const double down = dual_value(g, theta, msgs, eps, 1.0, 1.0);
                msgs.edge(e)[s] = keep;
                CHECK(std::abs((up - down) / (2 * h)) < 1e-6);
            }
        }
    }
}

TEST_CASE("adding a constant to a potential table shifts the dual, not the beliefs") {
    Rng rng(25);
    for (int t = 0; t < 10; ++t) {
        const auto inst = instances::random_instance(rng);
        const auto& g = *inst.data.graph;
        PotentialSet theta = reparameterize(inst.example(), inst.params);
        MessageSet msgs = MessageSet::zeros(g);
        for (double& v : msgs.values) v = rng.uniform(-1, 1);
        InferenceWork work;
        const double base = dual_value(g, theta, msgs, 1.0, 1.0, 1.0);
        const BeliefSet before = local_beliefs(g, theta, msgs, 1.0, 1.0, 1.0, work);

        const double shift = 0.8315;
        const int i = rng.uniform_int(0, g.num_vars() - 1);
        for (double& v : theta.node[i]) v += shift;
        CHECK(dual_value(g, theta, msgs, 1.0, 1.0, 1.0) ==
              doctest::Approx(base + shift).epsilon(1e-12));
        const BeliefSet after = local_beliefs(g, theta, msgs, 1.0, 1.0, 1.0, work);
        for (int v = 0; v < g.num_vars(); ++v)
            CHECK(table_max_abs_diff(before.node[v], after.node[v]) < 1e-10);
        for (int a = 0; a < g.num_factors(); ++a)
            CHECK(table_max_abs_diff(before.factor[a], after.factor[a]) < 1e-10);
    }
}

TEST_CASE("latent subproblem: single hidden variable is an exact softmax") {
    const FactorGraph parent = build_graph({2}, {});
    const HiddenSubgraph sub = hidden_subgraph(parent, {0});
    PotentialSet theta_hat;
    theta_hat.node = {Table{1.0, 0.0}};
    const auto sol = solve_latent_subproblem(sub, theta_hat, 1.0, 1.0, 1.0, 1e-10, 100);
    CHECK(sol.converged);
    CHECK(sol.beliefs.node[0][0] == doctest::Approx(0.7310585786300049).epsilon(1e-10));
    CHECK(sol.beliefs.node[0][1] == doctest::Approx(0.2689414213699951).epsilon(1e-10));
    CHECK(sol.value == doctest::Approx(-kLn1pe).epsilon(1e-10));
}

TEST_CASE("latent subproblem: empty hidden set") {
    const FactorGraph parent = build_graph({2, 2}, {{0, 1}});
    const HiddenSubgraph sub = hidden_subgraph(parent, {});
    const auto sol = solve_latent_subproblem(sub, PotentialSet{}, 1.0, 1.0, 1.0, 1e-10, 100);
    CHECK(sol.converged);
    CHECK(sol.value == 0.0);
    CHECK(sol.beliefs.node.empty());
}

TEST_CASE("latent subproblem matches the oracle on a hidden chain") {
    Rng rng(26);
    auto graph = std::make_shared<const FactorGraph>(
        build_graph({3, 3, 3}, {{0, 1}, {1, 2}}));
    for (int t = 0; t < 10; ++t) {
        const HiddenSubgraph sub = hidden_subgraph(*graph, {0, 1, 2});
        PotentialSet theta_hat;
        theta_hat.node.resize(3);
        theta_hat.factor.resize(2);
        for (auto& tb : theta_hat.node) {
            tb.assign(3, 0.0);
            for (double& v : tb) v = rng.uniform(-2, 2);
        }
        for (auto& tb : theta_hat.factor) {
            tb.assign(9, 0.0);
            for (double& v : tb) v = rng.uniform(-2, 2);
        }
        const double eps = rng.bernoulli(0.5) ? 1.0 : 0.2;
        const auto mp = solve_latent_subproblem(sub, theta_hat, eps, 1.0, 1.0, 1e-9, 50000);
        const auto oc = oracle::latent_solve(sub, theta_hat, eps, 1.0, 1.0);
        CHECK(mp.converged);
        CHECK(mp.value == doctest::Approx(oc.value).epsilon(1e-6));
        for (int i = 0; i < 3; ++i)
            CHECK(table_max_abs_diff(mp.beliefs.node[i], oc.beliefs.node[i]) < 1e-5);
    }
}

TEST_CASE("latent subproblem satisfies constraints and improves on the uniform start") {
    Rng rng(27);
    int done = 0;
    while (done < 15) {
        const auto inst = instances::random_instance(rng);
        const auto& ex = inst.example();
        const auto hidden = ex.hidden_indices();
        if (hidden.empty()) continue;
        ++done;
        const auto sub = hidden_subgraph(*ex.graph, hidden);
        const auto& rg = sub.reduced;
        const PotentialSet theta_hat = latent_potentials(ex, inst.params, sub);

        // value at uniform beliefs, a feasible point of the local polytope
        double uniform_value = 0.0;
        for (int i = 0; i < rg.num_vars(); ++i) {
            for (double v : theta_hat.node[i]) uniform_value -= v / theta_hat.node[i].size();
            uniform_value -= std::log(static_cast<double>(theta_hat.node[i].size()));
        }
        for (int a = 0; a < rg.num_factors(); ++a) {
            for (double v : theta_hat.factor[a]) uniform_value -= v / theta_hat.factor[a].size();
            uniform_value -= std::log(static_cast<double>(theta_hat.factor[a].size()));
        }

        const auto sol = solve_latent_subproblem(sub, theta_hat, 1.0, 1.0, 1.0, 1e-9, 50000);
        CHECK(sol.converged);
        CHECK(sol.residual < 1e-9);
        CHECK(sol.value <= uniform_value + 1e-9);
        for (const auto& t : sol.beliefs.node) {
            double sum = 0.0;
            for (double v : t) {
                CHECK(v >= 0.0);
                sum += v;
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
        }
        CHECK(marginalization_residual(sub.reduced, sol.beliefs) < 1e-9);
    }
}

TEST_CASE("belief entropy is non-increasing as epsilon decreases") {
    Rng rng(28);
    for (int t = 0; t < 10; ++t) {
        const auto inst = instances::random_instance(rng);
        const auto& g = *inst.data.graph;
        const PotentialSet theta = reparameterize(inst.example(), inst.params);
        const MessageSet msgs = MessageSet::zeros(g);
        InferenceWork work;
        std::vector<double> prev(g.num_vars(), 1e300);
        for (double eps : {1.0, 0.5, 0.1, 0.01}) {
            const BeliefSet b = local_beliefs(g, theta, msgs, eps, 1.0, 1.0, work);
            for (int i = 0; i < g.num_vars(); ++i) {
                const double h = entropy(b.node[i]);
                CHECK(h <= prev[i] + 1e-12);
                prev[i] = h;
            }
        }
    }
}

TEST_CASE("decode: argmax, ties, and a smoothed grid against enumeration") {
    // single variable argmax
    const FactorGraph g1 = build_graph({3}, {});
    PotentialSet t1 = zero_potentials(g1);
    t1.node[0] = {0.5, 1.2, -0.3};
    CHECK(decode_map(g1, t1) == std::vector<int>{1});

    // exact tie goes to the lowest state
    const FactorGraph g2 = build_graph({2}, {});
    PotentialSet t2 = zero_potentials(g2);
    t2.node[0] = {1.0, 1.0};
    CHECK(decode_map(g2, t2) == std::vector<int>{0});

    // 2x2 grid, 5 labels, strong attractive pairwise, 3 unaries favor label 3
    const FactorGraph g3 =
        build_graph({5, 5, 5, 5}, {{0, 1}, {0, 2}, {1, 3}, {2, 3}});
    PotentialSet t3 = zero_potentials(g3);
    for (int i = 0; i < 3; ++i) t3.node[i][3] = 1.0;
    t3.node[3][0] = 0.4;  // pulls the last pixel elsewhere, smoothing must win
    for (int a = 0; a < 4; ++a)
        for (int si = 0; si < 5; ++si)
            for (int sj = 0; sj < 5; ++sj)
                t3.factor[a][si * 5 + sj] = si == sj ? 2.0 : 0.0;
    const auto decoded = decode_map(g3, t3, 0.01);
    CHECK(decoded == std::vector<int>{3, 3, 3, 3});

    // exhaustive argmax over 5^4 configurations agrees
    std::vector<int> best(4, 0), s(4, 0);
    double best_score = -1e300;
    for (int c0 = 0; c0 < 5; ++c0)
        for (int c1 = 0; c1 < 5; ++c1)
            for (int c2 = 0; c2 < 5; ++c2)
                for (int c3 = 0; c3 < 5; ++c3) {
                    s = {c0, c1, c2, c3};
                    double score = 0.0;
                    for (int i = 0; i < 4; ++i) score += t3.node[i][s[i]];
                    for (int a = 0; a < 4; ++a)
                        score += t3.factor[a][s[g3.scopes[a][0]] * 5 + s[g3.scopes[a][1]]];
                    if (score > best_score) {
                        best_score = score;
                        best = s;
                    }
                }
    CHECK(decoded == best);
}

TEST_CASE("cardinality-one variables are handled throughout") {
    Rng rng(29);
    const FactorGraph g = build_graph({1, 3}, {{0, 1}});
    PotentialSet theta = zero_potentials(g);
    theta.node[1] = {0.4, -1.0, 0.2};
    for (double& v : theta.factor[0]) v = rng.uniform(-1, 1);
    MessageSet msgs = MessageSet::zeros(g);
    InferenceWork work;
    double prev = dual_value(g, theta, msgs, 1.0, 1.0, 1.0);
    for (int sweep = 0; sweep < 20; ++sweep) {
        sweep_messages(g, theta, msgs, 1.0, 1.0, 1.0, work);
        const double cur = dual_value(g, theta, msgs, 1.0, 1.0, 1.0);
        CHECK(cur <= prev + 1e-10);
        prev = cur;
    }
    const BeliefSet b = local_beliefs(g, theta, msgs, 1.0, 1.0, 1.0, work);
    CHECK(b.node[0][0] == doctest::Approx(1.0));
    CHECK(marginalization_residual(g, b) < 1e-8);
    CHECK(decode_map(g, theta)[0] == 0);
}

TEST_CASE("dual overflow raises a diagnostic instead of returning inf") {
    const FactorGraph g = build_graph({2}, {});
    PotentialSet theta = zero_potentials(g);
    theta.node[0] = {std::numeric_limits<double>::infinity(), 0.0};
    const MessageSet msgs = MessageSet::zeros(g);
    CHECK_THROWS_AS(dual_value(g, theta, msgs, 1.0, 1.0, 1.0), std::runtime_error);
}
