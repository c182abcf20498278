#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <memory>

#include "lsp/instances.hpp"
#include "lsp/oracle.hpp"
#include "lsp/rng.hpp"

using namespace lsp;

namespace {

const double kLn1pe = std::log(1.0 + std::exp(1.0));

instances::RandomInstance single_var_instance() {
    instances::RandomInstance inst;
    inst.data.graph = std::make_shared<const FactorGraph>(build_graph({2}, {}));
    inst.data.num_features = 1;
    Example ex;
    ex.graph = inst.data.graph;
    ex.labels = {0};
    ex.hidden = {0};
    ex.feat_node.assign(1, std::vector<Table>(1));
    ex.feat_factor.assign(1, std::vector<Table>{});
    set_hamming_loss(ex, 1.0);
    inst.data.train.push_back(std::move(ex));
    inst.params.weights = {0.0};
    return inst;
}

}  // namespace

TEST_CASE("exact loss-augmented term: single variable with Hamming loss") {
    const auto inst = single_var_instance();
    CHECK(oracle::exact_loss_augmented_term(inst.example(), inst.params, 1.0) ==
          doctest::Approx(kLn1pe).epsilon(1e-14));
}

TEST_CASE("small epsilon approaches the max score") {
    Rng rng(31);
    for (int t = 0; t < 10; ++t) {
        const auto inst = instances::random_instance(rng);
        const auto& ex = inst.example();
        const double soft = oracle::exact_loss_augmented_term(ex, inst.params, 0.001);
        // brute-force max score
        const auto& g = *ex.graph;
        const PotentialSet theta = reparameterize(ex, inst.params);
        std::vector<int> s(g.num_vars(), 0);
        double best = -1e300;
        for (;;) {
            double score = 0.0;
            for (int i = 0; i < g.num_vars(); ++i) score += theta.node[i][s[i]];
            for (int a = 0; a < g.num_factors(); ++a) {
                std::size_t idx = 0;
                for (std::size_t u = 0; u < g.scopes[a].size(); ++u)
                    idx += static_cast<std::size_t>(s[g.scopes[a][u]]) * g.factor_strides[a][u];
                score += theta.factor[a][idx];
            }
            best = std::max(best, score);
            int i = g.num_vars() - 1;
            while (i >= 0 && ++s[i] == g.cardinalities[i]) s[i--] = 0;
            if (i < 0) break;
        }
        CHECK(soft >= best);
        CHECK(soft - best < 0.01);
    }
}

TEST_CASE("the two enumeration paths agree to 1e-12") {
    Rng rng(32);
    for (int t = 0; t < 40; ++t) {
        const auto inst = instances::random_instance(rng);
        const double eps = rng.bernoulli(0.5) ? 1.0 : 0.1;
        const double a = oracle::exact_loss_augmented_term(inst.example(), inst.params, eps);
        const double b = oracle::exact_loss_augmented_term_alt(inst.example(), inst.params, eps);
        CHECK(std::abs(a - b) <= 1e-12);
    }
}

TEST_CASE("exact latent term reductions") {
    // no hidden variables: the clamped score itself
    Rng rng(33);
    for (int t = 0; t < 10; ++t) {
        auto inst = instances::random_instance(rng);
        auto& ex = inst.data.train.front();
        ex.hidden.assign(ex.graph->num_vars(), 0);
        const double latent = oracle::exact_latent_term(ex, inst.params, 0.37);
        // single term: eps*ln(exp(score/eps)) = score, via the other enumerator at the labels
        Example clamped = ex;
        for (int i = 0; i < ex.graph->num_vars(); ++i) {
            Table point(ex.graph->cardinalities[i], -1e100);
            point[ex.labels[i]] = 0.0;
            // pin every variable to its label through the loss channel
            clamped.loss_node.resize(ex.graph->num_vars());
            clamped.loss_node[i] = point;
        }
        const double pinned = oracle::exact_loss_augmented_term_alt(clamped, inst.params, 0.37);
        CHECK(latent == doctest::Approx(pinned).epsilon(1e-9));
    }

    // everything hidden: equals the loss-augmented term with l^c in place of l
    for (int t = 0; t < 10; ++t) {
        auto inst = instances::random_instance(rng);
        auto& ex = inst.data.train.front();
        ex.hidden.assign(ex.graph->num_vars(), 1);
        ex.loss_node.clear();
        ex.latent_loss_node.assign(ex.graph->num_vars(), {});
        for (int i = 0; i < ex.graph->num_vars(); ++i) {
            Table t2(ex.graph->cardinalities[i]);
            for (double& v : t2) v = rng.uniform(-1, 1);
            ex.latent_loss_node[i] = t2;
        }
        const double latent = oracle::exact_latent_term(ex, inst.params, 1.0);
        Example swapped = ex;
        swapped.loss_node = ex.latent_loss_node;
        swapped.latent_loss_node.clear();
        const double loss_aug = oracle::exact_loss_augmented_term(swapped, inst.params, 1.0);
        CHECK(latent == doctest::Approx(loss_aug).epsilon(1e-12));
    }
}

TEST_CASE("exact objective reductions") {
    HyperParams hyper;
    CHECK(oracle::exact_objective({}, ModelParams{{}}, hyper) == 0.0);

    const auto inst = single_var_instance();
    Example observed = inst.example();
    observed.hidden = {0};
    CHECK(oracle::exact_objective({observed}, inst.params, hyper) ==
          doctest::Approx(kLn1pe).epsilon(1e-14));
}

TEST_CASE("enumeration limit is enforced") {
    auto graph = std::make_shared<const FactorGraph>(
        build_graph(std::vector<int>(25, 5), {}));
    Example ex;
    ex.graph = graph;
    ex.labels.assign(25, 0);
    ex.hidden.assign(25, 0);
    ex.feat_node.assign(1, std::vector<Table>(25));
    ex.feat_factor.assign(1, std::vector<Table>{});
    CHECK_THROWS_AS(oracle::exact_loss_augmented_term(ex, ModelParams{{0.0}}, 1.0),
                    std::invalid_argument);
}

TEST_CASE("lbfgs minimizes a quadratic") {
    auto fg = [](const std::vector<double>& x, std::vector<double>& g) {
        g = {2 * (x[0] - 3), 8 * (x[1] + 1)};
        return (x[0] - 3) * (x[0] - 3) + 4 * (x[1] + 1) * (x[1] + 1);
    };
    const auto res = oracle::minimize_lbfgs(fg, {0.0, 0.0});
    CHECK(res.converged);
    CHECK(res.x[0] == doctest::Approx(3.0).epsilon(1e-8));
    CHECK(res.x[1] == doctest::Approx(-1.0).epsilon(1e-8));
}

TEST_CASE("block minimizer: symmetric case stays at the zero-message value") {
    const FactorGraph g = build_graph({3, 3}, {{0, 1}});
    PotentialSet theta;
    theta.node = {Table(3, 0.0), Table(3, 0.0)};
    theta.factor = {Table(9, 0.0)};
    const MessageSet msgs = MessageSet::zeros(g);
    const double at_zero = oracle::reference_dual(
        g, theta, {Table(3, 0.0), Table(3, 0.0)}, 1.0, 1.0, 1.0);
    const auto res = oracle::block_min(g, theta, msgs, 0, 1.0, 1.0, 1.0);
    CHECK(res.converged);
    CHECK(res.dual == doctest::Approx(at_zero).epsilon(1e-9));
    // minimizer constant across states
    CHECK(res.block[0][0] == doctest::Approx(res.block[0][1]).epsilon(1e-7));
    CHECK(res.block[0][0] == doctest::Approx(res.block[0][2]).epsilon(1e-7));
}

TEST_CASE("closed form reproduces the oracle exactly on a one-neighbor variable") {
    Rng rng(34);
    for (int t = 0; t < 10; ++t) {
        const FactorGraph g = build_graph({3, 2}, {{0, 1}});
        PotentialSet theta;
        theta.node = {Table(3), Table(2)};
        theta.factor = {Table(6)};
        for (auto& tb : theta.node)
            for (double& v : tb) v = rng.uniform(-2, 2);
        for (double& v : theta.factor[0]) v = rng.uniform(-2, 2);
        MessageSet msgs = MessageSet::zeros(g);
        for (double& v : msgs.values) v = rng.uniform(-1, 1);

        const auto numeric = oracle::block_min(g, theta, msgs, 0, 1.0, 1.0, 1.0);
        InferenceWork work;
        update_messages_block(g, theta, msgs, 0, 1.0, 1.0, 1.0, work);
        const double closed = dual_value(g, theta, msgs, 1.0, 1.0, 1.0);
        CHECK(closed == doctest::Approx(numeric.dual).epsilon(1e-9));
    }
}

TEST_CASE("oracle latent solve: closed forms for separable cases") {
    // single hidden variable: softmax
    const FactorGraph parent = build_graph({3}, {});
    const HiddenSubgraph sub = hidden_subgraph(parent, {0});
    PotentialSet theta_hat;
    theta_hat.node = {Table{0.3, -0.7, 1.1}};
    const auto res = oracle::latent_solve(sub, theta_hat, 1.0, 1.0, 1.0);
    double z = 0.0;
    for (double v : theta_hat.node[0]) z += std::exp(v);
    for (int s = 0; s < 3; ++s)
        CHECK(res.beliefs.node[0][s] ==
              doctest::Approx(std::exp(theta_hat.node[0][s]) / z).epsilon(1e-9));
    CHECK(res.value == doctest::Approx(-std::log(z)).epsilon(1e-9));

    // disconnected hidden variables: product of independent softmaxes
    const FactorGraph parent2 = build_graph({2, 2}, {});
    const HiddenSubgraph sub2 = hidden_subgraph(parent2, {0, 1});
    PotentialSet th2;
    th2.node = {Table{1.0, 0.0}, Table{-0.5, 0.5}};
    const auto res2 = oracle::latent_solve(sub2, th2, 1.0, 1.0, 1.0);
    for (int i = 0; i < 2; ++i) {
        double zi = std::exp(th2.node[i][0]) + std::exp(th2.node[i][1]);
        CHECK(res2.beliefs.node[i][0] ==
              doctest::Approx(std::exp(th2.node[i][0]) / zi).epsilon(1e-9));
    }
}

TEST_CASE("oracle outputs are deterministic") {
    Rng rng1(35), rng2(35);
    const auto a = instances::random_instance(rng1);
    const auto b = instances::random_instance(rng2);
    const double ea = oracle::exact_loss_augmented_term(a.example(), a.params, 0.1);
    const double eb = oracle::exact_loss_augmented_term(b.example(), b.params, 0.1);
    CHECK(ea == eb);  // bitwise
    const double la = oracle::exact_latent_term(a.example(), a.params, 0.1);
    const double lb = oracle::exact_latent_term(b.example(), b.params, 0.1);
    CHECK(la == lb);
}
