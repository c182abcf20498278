#include "lsp/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace lsp::oracle {

namespace {

std::size_t joint_size(const std::vector<int>& cards, const EnumerationLimit& lim) {
    std::size_t total = 1;
    for (int k : cards) {
        total *= static_cast<std::size_t>(k);
        if (total > lim.max_joint_configs)
            throw std::invalid_argument("enumeration limit exceeded");
    }
    return total;
}

// odometer increment over a state vector; returns false once wrapped
bool advance(std::vector<int>& state, const std::vector<int>& cards) {
    for (int i = static_cast<int>(state.size()) - 1; i >= 0; --i) {
        if (++state[i] < cards[i]) return true;
        state[i] = 0;
    }
    return false;
}

std::size_t flat_index(const FactorGraph& g, int a, const std::vector<int>& full_state) {
    std::size_t idx = 0;
    for (std::size_t t = 0; t < g.scopes[a].size(); ++t)
        idx = idx * static_cast<std::size_t>(g.cardinalities[g.scopes[a][t]]) +
              static_cast<std::size_t>(full_state[g.scopes[a][t]]);
    return idx;
}

double table_at(const Table& t, std::size_t idx) { return t.empty() ? 0.0 : t[idx]; }

double entropy_ref(const Table& p) {
    double h = 0.0;
    for (double q : p) {
        const double qc = std::max(q, 1e-300);
        h -= qc * std::log(qc);
    }
    return h;
}

}  // namespace

double exact_loss_augmented_term(const Example& ex, const ModelParams& params, double eps,
                                 EnumerationLimit lim) {
    const auto& g = *ex.graph;
    joint_size(g.cardinalities, lim);
    const PotentialSet theta = reparameterize(ex, params, /*include_loss=*/true);

    std::vector<double> scores;
    std::vector<int> s(g.num_vars(), 0);
    do {
        double score = 0.0;
        for (int i = 0; i < g.num_vars(); ++i) score += theta.node[i][s[i]];
        for (int a = 0; a < g.num_factors(); ++a) score += theta.factor[a][flat_index(g, a, s)];
        scores.push_back(score);
    } while (advance(s, g.cardinalities));

    const double m = *std::max_element(scores.begin(), scores.end());
    double acc = 0.0;
    for (double v : scores) acc += std::exp((v - m) / eps);
    return m + eps * std::log(acc);
}

double exact_loss_augmented_term_alt(const Example& ex, const ModelParams& params, double eps,
                                     EnumerationLimit lim) {
    const auto& g = *ex.graph;
    joint_size(g.cardinalities, lim);

    // streaming two-pass over raw feature and loss tables
    auto score_of = [&](const std::vector<int>& s) {
        double score = 0.0;
        for (int r = 0; r < params.num_features(); ++r) {
            double phi = 0.0;
            for (int i = 0; i < g.num_vars(); ++i) phi += table_at(ex.feat_node[r][i], s[i]);
            for (int a = 0; a < g.num_factors(); ++a)
                phi += table_at(ex.feat_factor[r][a], flat_index(g, a, s));
            score += params.weights[r] * phi;
        }
        for (int i = 0; i < g.num_vars(); ++i)
            if (i < static_cast<int>(ex.loss_node.size()))
                score += table_at(ex.loss_node[i], s[i]);
        for (int a = 0; a < g.num_factors(); ++a)
            if (a < static_cast<int>(ex.loss_factor.size()))
                score += table_at(ex.loss_factor[a], flat_index(g, a, s));
        return score;
    };

    double m = -std::numeric_limits<double>::infinity();
    std::vector<int> s(g.num_vars(), 0);
    do {
        m = std::max(m, score_of(s));
    } while (advance(s, g.cardinalities));
    double acc = 0.0;
    s.assign(g.num_vars(), 0);
    do {
        acc += std::exp((score_of(s) - m) / eps);
    } while (advance(s, g.cardinalities));
    return m + eps * std::log(acc);
}

double exact_latent_term(const Example& ex, const ModelParams& params, double eps,
                         EnumerationLimit lim) {
    const auto& g = *ex.graph;
    const std::vector<int> hidden = ex.hidden_indices();
    std::vector<int> hidden_cards;
    for (int i : hidden) hidden_cards.push_back(g.cardinalities[i]);
    joint_size(hidden_cards, lim);

    std::vector<int> full(g.num_vars(), 0);
    for (int i = 0; i < g.num_vars(); ++i)
        if (!ex.hidden[i]) full[i] = ex.labels[i];

    auto score_of = [&]() {
        double score = 0.0;
        for (int r = 0; r < params.num_features(); ++r) {
            double phi = 0.0;
            for (int i = 0; i < g.num_vars(); ++i) phi += table_at(ex.feat_node[r][i], full[i]);
            for (int a = 0; a < g.num_factors(); ++a)
                phi += table_at(ex.feat_factor[r][a], flat_index(g, a, full));
            score += params.weights[r] * phi;
        }
        for (int i : hidden)
            if (i < static_cast<int>(ex.latent_loss_node.size()))
                score += table_at(ex.latent_loss_node[i], full[i]);
        for (int a = 0; a < g.num_factors(); ++a) {
            if (a >= static_cast<int>(ex.latent_loss_factor.size()) ||
                ex.latent_loss_factor[a].empty())
                continue;
            // table over the factor's hidden slots, row-major in slot order
            std::size_t idx = 0;
            bool any_hidden = false;
            for (int v : g.scopes[a]) {
                if (!ex.hidden[v]) continue;
                any_hidden = true;
                idx = idx * static_cast<std::size_t>(g.cardinalities[v]) +
                      static_cast<std::size_t>(full[v]);
            }
            if (any_hidden) score += ex.latent_loss_factor[a][idx];
        }
        return score;
    };

    std::vector<double> scores;
    std::vector<int> h(hidden.size(), 0);
    do {
        for (std::size_t u = 0; u < hidden.size(); ++u) full[hidden[u]] = h[u];
        scores.push_back(score_of());
    } while (!hidden.empty() && advance(h, hidden_cards));

    const double m = *std::max_element(scores.begin(), scores.end());
    double acc = 0.0;
    for (double v : scores) acc += std::exp((v - m) / eps);
    return m + eps * std::log(acc);
}

double exact_objective(const std::vector<Example>& examples, const ModelParams& params,
                       const HyperParams& hyper, EnumerationLimit lim) {
    double obj = 0.0;
    for (double w : params.weights) obj += 0.5 * hyper.c_reg * w * w;
    for (const auto& ex : examples)
        obj += exact_loss_augmented_term(ex, params, hyper.epsilon, lim) -
               exact_latent_term(ex, params, hyper.epsilon, lim);
    return obj;
}

namespace {

// dual value and gradient, coded against per-edge lambda tables
double dual_and_grad(const FactorGraph& g, const PotentialSet& theta,
                     const std::vector<Table>& lambda, double eps, double c_node,
                     double c_factor, std::vector<Table>* grad) {
    double total = 0.0;
    if (grad) {
        grad->resize(g.num_edges());
        for (int e = 0; e < g.num_edges(); ++e)
            (*grad)[e].assign(g.cardinalities[g.edge_var[e]], 0.0);
    }

    for (int i = 0; i < g.num_vars(); ++i) {
        Table acc = theta.node[i];
        for (int e : g.var_edges[i])
            for (std::size_t s = 0; s < acc.size(); ++s) acc[s] -= lambda[e][s];
        const double m = *std::max_element(acc.begin(), acc.end());
        double z = 0.0;
        for (double v : acc) z += std::exp((v - m) / (eps * c_node));
        total += m + eps * c_node * std::log(z);
        if (grad) {
            for (int e : g.var_edges[i])
                for (std::size_t s = 0; s < acc.size(); ++s)
                    (*grad)[e][s] -= std::exp((acc[s] - m) / (eps * c_node)) / z;
        }
    }

    for (int a = 0; a < g.num_factors(); ++a) {
        const auto& scope = g.scopes[a];
        Table acc(g.factor_sizes[a]);
        std::vector<int> s(scope.size(), 0);
        std::vector<int> cards(scope.size());
        for (std::size_t t = 0; t < scope.size(); ++t) cards[t] = g.cardinalities[scope[t]];
        std::size_t idx = 0;
        do {
            double v = theta.factor[a][idx];
            for (std::size_t t = 0; t < scope.size(); ++t)
                v += lambda[g.factor_edges[a][t]][s[t]];
            acc[idx++] = v;
        } while (advance(s, cards));
        const double m = *std::max_element(acc.begin(), acc.end());
        double z = 0.0;
        for (double v : acc) z += std::exp((v - m) / (eps * c_factor));
        total += m + eps * c_factor * std::log(z);
        if (grad) {
            s.assign(scope.size(), 0);
            idx = 0;
            do {
                const double p = std::exp((acc[idx] - m) / (eps * c_factor)) / z;
                for (std::size_t t = 0; t < scope.size(); ++t)
                    (*grad)[g.factor_edges[a][t]][s[t]] += p;
                ++idx;
            } while (advance(s, cards));
        }
    }
    return total;
}

}  // namespace

double reference_dual(const FactorGraph& g, const PotentialSet& theta,
                      const std::vector<Table>& lambda, double eps, double c_node,
                      double c_factor) {
    return dual_and_grad(g, theta, lambda, eps, c_node, c_factor, nullptr);
}

MinimizeResult minimize_lbfgs(
    const std::function<double(const std::vector<double>&, std::vector<double>&)>& fg,
    std::vector<double> x0, double grad_tol, int max_iters) {
    MinimizeResult res;
    res.x = std::move(x0);
    const std::size_t n = res.x.size();
    std::vector<double> g(n);
    res.value = fg(res.x, g);
    if (n == 0) {
        res.converged = true;
        return res;
    }

    const int history = 10;
    std::deque<std::vector<double>> s_hist, y_hist;
    std::deque<double> rho_hist;
    std::vector<double> d(n), x_new(n), g_new(n), alpha(history);

    auto max_norm = [](const std::vector<double>& v) {
        double m = 0.0;
        for (double x : v) m = std::max(m, std::abs(x));
        return m;
    };
    auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
        double acc = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
        return acc;
    };

    for (int iter = 0; iter < max_iters; ++iter) {
        res.grad_norm = max_norm(g);
        res.iters = iter;
        if (res.grad_norm <= grad_tol) {
            res.converged = true;
            return res;
        }

        // two-loop recursion
        for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];
        const int h = static_cast<int>(s_hist.size());
        for (int k = h - 1; k >= 0; --k) {
            alpha[k] = rho_hist[k] * dot(s_hist[k], d);
            for (std::size_t i = 0; i < n; ++i) d[i] -= alpha[k] * y_hist[k][i];
        }
        if (h > 0) {
            const double gamma = dot(s_hist[h - 1], y_hist[h - 1]) /
                                 std::max(dot(y_hist[h - 1], y_hist[h - 1]), 1e-300);
            for (std::size_t i = 0; i < n; ++i) d[i] *= gamma;
        }
        for (int k = 0; k < h; ++k) {
            const double beta = rho_hist[k] * dot(y_hist[k], d);
            for (std::size_t i = 0; i < n; ++i) d[i] += s_hist[k][i] * (alpha[k] - beta);
        }

        double dir = dot(d, g);
        if (!(dir < 0.0)) {  // not a descent direction; fall back to steepest
            for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];
            dir = -dot(g, g);
        }

        double t = (iter == 0) ? 1.0 / std::max(1.0, res.grad_norm) : 1.0;
        double f_new = 0.0;
        bool accepted = false;
        for (int bt = 0; bt < 60; ++bt) {
            for (std::size_t i = 0; i < n; ++i) x_new[i] = res.x[i] + t * d[i];
            f_new = fg(x_new, g_new);
            if (f_new <= res.value + 1e-4 * t * dir) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) return res;  // numerically stuck; caller inspects grad_norm

        std::vector<double> s_vec(n), y_vec(n);
        for (std::size_t i = 0; i < n; ++i) {
            s_vec[i] = x_new[i] - res.x[i];
            y_vec[i] = g_new[i] - g[i];
        }
        const double sy = dot(s_vec, y_vec);
        if (sy > 1e-12 * max_norm(s_vec) * max_norm(y_vec)) {
            s_hist.push_back(std::move(s_vec));
            y_hist.push_back(std::move(y_vec));
            rho_hist.push_back(1.0 / sy);
            if (static_cast<int>(s_hist.size()) > history) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
        }
        res.x.swap(x_new);
        g.swap(g_new);
        res.value = f_new;
    }
    res.grad_norm = max_norm(g);
    return res;
}

BlockMinResult block_min(const FactorGraph& g, const PotentialSet& theta,
                         const MessageSet& msgs, int var, double eps, double c_node,
                         double c_factor) {
    BlockMinResult res;
    std::vector<Table> lambda(g.num_edges());
    for (int e = 0; e < g.num_edges(); ++e) {
        const double* p = msgs.edge(e);
        lambda[e].assign(p, p + g.cardinalities[g.edge_var[e]]);
    }
    const auto& edges = g.var_edges[var];
    const std::size_t k = static_cast<std::size_t>(g.cardinalities[var]);
    if (edges.empty()) {
        res.dual = dual_and_grad(g, theta, lambda, eps, c_node, c_factor, nullptr);
        res.converged = true;
        return res;
    }

    std::vector<Table> grad_full;
    auto fg = [&](const std::vector<double>& x, std::vector<double>& grad) {
        for (std::size_t n = 0; n < edges.size(); ++n)
            for (std::size_t s = 0; s < k; ++s) lambda[edges[n]][s] = x[n * k + s];
        const double v = dual_and_grad(g, theta, lambda, eps, c_node, c_factor, &grad_full);
        grad.resize(x.size());
        for (std::size_t n = 0; n < edges.size(); ++n)
            for (std::size_t s = 0; s < k; ++s) grad[n * k + s] = grad_full[edges[n]][s];
        return v;
    };

    std::vector<double> x0(edges.size() * k);
    for (std::size_t n = 0; n < edges.size(); ++n)
        for (std::size_t s = 0; s < k; ++s) x0[n * k + s] = lambda[edges[n]][s];

    auto min_res = minimize_lbfgs(fg, std::move(x0), 1e-10, 20000);
    res.dual = min_res.value;
    res.grad_norm = min_res.grad_norm;
    res.converged = min_res.converged || min_res.grad_norm < 1e-9;
    res.block.resize(edges.size());
    for (std::size_t n = 0; n < edges.size(); ++n)
        res.block[n].assign(min_res.x.begin() + static_cast<long>(n * k),
                            min_res.x.begin() + static_cast<long>((n + 1) * k));
    return res;
}

LatentSolveResult latent_solve(const HiddenSubgraph& sub, const PotentialSet& theta_hat,
                               double eps, double c_node, double c_factor) {
    LatentSolveResult res;
    if (sub.empty()) {
        res.converged = true;
        return res;
    }
    const auto& g = sub.reduced;
    std::vector<Table> lambda(g.num_edges());
    std::vector<std::size_t> off(g.num_edges() + 1, 0);
    for (int e = 0; e < g.num_edges(); ++e) {
        lambda[e].assign(g.cardinalities[g.edge_var[e]], 0.0);
        off[e + 1] = off[e] + lambda[e].size();
    }

    std::vector<Table> grad_full;
    auto fg = [&](const std::vector<double>& x, std::vector<double>& grad) {
        for (int e = 0; e < g.num_edges(); ++e)
            for (std::size_t s = 0; s < lambda[e].size(); ++s) lambda[e][s] = x[off[e] + s];
        const double v = dual_and_grad(g, theta_hat, lambda, eps, c_node, c_factor, &grad_full);
        grad.resize(x.size());
        for (int e = 0; e < g.num_edges(); ++e)
            for (std::size_t s = 0; s < lambda[e].size(); ++s) grad[off[e] + s] = grad_full[e][s];
        return v;
    };

    auto min_res = minimize_lbfgs(fg, std::vector<double>(off.back(), 0.0), 1e-10, 50000);
    res.converged = min_res.converged || min_res.grad_norm < 1e-9;
    res.grad_norm = min_res.grad_norm;
    for (int e = 0; e < g.num_edges(); ++e)
        for (std::size_t s = 0; s < lambda[e].size(); ++s) lambda[e][s] = min_res.x[off[e] + s];

    // recover beliefs as the soft-max marginals of the optimal dual
    res.beliefs.node.resize(g.num_vars());
    res.beliefs.factor.resize(g.num_factors());
    for (int i = 0; i < g.num_vars(); ++i) {
        Table acc = theta_hat.node[i];
        for (int e : g.var_edges[i])
            for (std::size_t s = 0; s < acc.size(); ++s) acc[s] -= lambda[e][s];
        const double m = *std::max_element(acc.begin(), acc.end());
        double z = 0.0;
        for (double& v : acc) {
            v = std::exp((v - m) / (eps * c_node));
            z += v;
        }
        for (double& v : acc) v /= z;
        res.beliefs.node[i] = std::move(acc);
    }
    for (int a = 0; a < g.num_factors(); ++a) {
        const auto& scope = g.scopes[a];
        Table acc(g.factor_sizes[a]);
        std::vector<int> s(scope.size(), 0);
        std::vector<int> cards(scope.size());
        for (std::size_t t = 0; t < scope.size(); ++t) cards[t] = g.cardinalities[scope[t]];
        std::size_t idx = 0;
        do {
            double v = theta_hat.factor[a][idx];
            for (std::size_t t = 0; t < scope.size(); ++t)
                v += lambda[g.factor_edges[a][t]][s[t]];
            acc[idx++] = v;
        } while (advance(s, cards));
        const double m = *std::max_element(acc.begin(), acc.end());
        double z = 0.0;
        for (double& v : acc) {
            v = std::exp((v - m) / (eps * c_factor));
            z += v;
        }
        for (double& v : acc) v /= z;
        res.beliefs.factor[a] = std::move(acc);
    }

    double value = 0.0;
    for (int i = 0; i < g.num_vars(); ++i) {
        for (std::size_t s = 0; s < res.beliefs.node[i].size(); ++s)
            value -= res.beliefs.node[i][s] * theta_hat.node[i][s];
        value -= eps * c_node * entropy_ref(res.beliefs.node[i]);
    }
    for (int a = 0; a < g.num_factors(); ++a) {
        for (std::size_t s = 0; s < res.beliefs.factor[a].size(); ++s)
            value -= res.beliefs.factor[a][s] * theta_hat.factor[a][s];
        value -= eps * c_factor * entropy_ref(res.beliefs.factor[a]);
    }
    res.value = value;
    return res;
}

}  // namespace lsp::oracle
