#include "lsp/inference.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace lsp {

namespace {

constexpr double kProbFloor = 1e-300;

// eps*c * log sum_s exp(x[s] / (eps*c)), max-shifted
double scaled_lse(const double* x, std::size_t n, double eps_c) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < n; ++s) m = std::max(m, x[s]);
    double acc = 0.0;
    for (std::size_t s = 0; s < n; ++s) acc += std::exp((x[s] - m) / eps_c);
    return m + eps_c * std::log(acc);
}

void softmax_inplace(double* x, std::size_t n, double eps_c) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < n; ++s) m = std::max(m, x[s]);
    double z = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
        x[s] = std::exp((x[s] - m) / eps_c);
        z += x[s];
    }
    for (std::size_t s = 0; s < n; ++s) x[s] /= z;
}

// theta_a plus the lambda of every scope slot except `skip_slot` (-1 = none),
// written into work.factor_sum
void fill_factor_sum(const FactorGraph& g, const PotentialSet& theta, const MessageSet& msgs,
                     int a, int skip_slot, std::vector<double>& out) {
    const std::size_t size = g.factor_sizes[a];
    out.assign(theta.factor[a].begin(), theta.factor[a].end());
    assert(out.size() == size);
    (void)size;
    const auto& scope = g.scopes[a];
    for (int t = 0; t < static_cast<int>(scope.size()); ++t) {
        if (t == skip_slot) continue;
        const double* lam = msgs.edge(g.factor_edges[a][t]);
        const std::size_t stride = g.factor_strides[a][t];
        const std::size_t card = static_cast<std::size_t>(g.cardinalities[scope[t]]);
        for (std::size_t idx = 0; idx < out.size(); ++idx)
            out[idx] += lam[(idx / stride) % card];
    }
}

// theta_i minus the outgoing lambda of every edge of i, into work.node_acc
void fill_node_acc(const FactorGraph& g, const PotentialSet& theta, const MessageSet& msgs,
                   int i, std::vector<double>& out) {
    out.assign(theta.node[i].begin(), theta.node[i].end());
    for (int e : g.var_edges[i]) {
        const double* lam = msgs.edge(e);
        for (std::size_t s = 0; s < out.size(); ++s) out[s] -= lam[s];
    }
}

}  // namespace

MessageSet MessageSet::zeros(const FactorGraph& g) {
    MessageSet m;
    m.offsets.resize(g.num_edges() + 1);
    std::size_t off = 0;
    for (int e = 0; e < g.num_edges(); ++e) {
        m.offsets[e] = off;
        off += static_cast<std::size_t>(g.cardinalities[g.edge_var[e]]);
    }
    m.offsets[g.num_edges()] = off;
    m.values.assign(off, 0.0);
    return m;
}

double dual_value(const FactorGraph& g, const PotentialSet& theta, const MessageSet& msgs,
                  double eps, double c_node, double c_factor) {
    InferenceWork work;
    double total = 0.0;
    for (int i = 0; i < g.num_vars(); ++i) {
        fill_node_acc(g, theta, msgs, i, work.node_acc);
        const double v = scaled_lse(work.node_acc.data(), work.node_acc.size(), eps * c_node);
        if (!std::isfinite(v))
            throw std::runtime_error("dual term overflow at variable " + std::to_string(i));
        total += v;
    }
    for (int a = 0; a < g.num_factors(); ++a) {
        fill_factor_sum(g, theta, msgs, a, -1, work.factor_sum);
        const double v = scaled_lse(work.factor_sum.data(), work.factor_sum.size(), eps * c_factor);
        if (!std::isfinite(v))
            throw std::runtime_error("dual term overflow at factor " + std::to_string(a));
        total += v;
    }
    return total;
}

void update_messages_block(const FactorGraph& g, const PotentialSet& theta, MessageSet& msgs,
                           int var, double eps, double c_node, double c_factor,
                           InferenceWork& work) {
    const int deg = g.degree(var);
    if (deg == 0) return;
    const std::size_t k = static_cast<std::size_t>(g.cardinalities[var]);
    const double eps_cf = eps * c_factor;

    // incoming m_{a->i}(s_i) for every neighbor, marginalizing the factor sum
    work.incoming.assign(static_cast<std::size_t>(deg) * k, 0.0);
    for (int n = 0; n < deg; ++n) {
        const int a = g.var_factors[var][n];
        const auto& scope = g.scopes[a];
        int slot = 0;
        while (scope[slot] != var) ++slot;
        fill_factor_sum(g, theta, msgs, a, slot, work.factor_sum);

        const std::size_t stride = g.factor_strides[a][slot];
        double* m_in = work.incoming.data() + static_cast<std::size_t>(n) * k;
        if (work.factor_sum.size() == k) {
            // unary factor: the sum is the message
            for (std::size_t s = 0; s < k; ++s) m_in[s] = work.factor_sum[s];
            continue;
        }
        // bucketed max then sum-exp over {s_a : s_a[slot] = s_i}
        work.node_acc.assign(k, -std::numeric_limits<double>::infinity());
        for (std::size_t idx = 0; idx < work.factor_sum.size(); ++idx) {
            const std::size_t s = (idx / stride) % k;
            work.node_acc[s] = std::max(work.node_acc[s], work.factor_sum[idx]);
        }
        for (std::size_t s = 0; s < k; ++s) m_in[s] = 0.0;
        for (std::size_t idx = 0; idx < work.factor_sum.size(); ++idx) {
            const std::size_t s = (idx / stride) % k;
            m_in[s] += std::exp((work.factor_sum[idx] - work.node_acc[s]) / eps_cf);
        }
        for (std::size_t s = 0; s < k; ++s)
            m_in[s] = work.node_acc[s] + eps_cf * std::log(m_in[s]);
    }

    // mu = theta_i + sum of incoming; redistribute with weight c_a / cbar_i
    const double cbar = c_node + static_cast<double>(deg) * c_factor;
    work.node_acc.assign(theta.node[var].begin(), theta.node[var].end());
    for (int n = 0; n < deg; ++n) {
        const double* m_in = work.incoming.data() + static_cast<std::size_t>(n) * k;
        for (std::size_t s = 0; s < k; ++s) work.node_acc[s] += m_in[s];
    }
    const double ratio = c_factor / cbar;
    for (int n = 0; n < deg; ++n) {
        double* lam = msgs.edge(g.var_edges[var][n]);
        const double* m_in = work.incoming.data() + static_cast<std::size_t>(n) * k;
        for (std::size_t s = 0; s < k; ++s) lam[s] = ratio * work.node_acc[s] - m_in[s];
    }
}

void sweep_messages(const FactorGraph& g, const PotentialSet& theta, MessageSet& msgs,
                    double eps, double c_node, double c_factor, InferenceWork& work) {
    for (int i = 0; i < g.num_vars(); ++i)
        update_messages_block(g, theta, msgs, i, eps, c_node, c_factor, work);
}

BeliefSet local_beliefs(const FactorGraph& g, const PotentialSet& theta, const MessageSet& msgs,
                        double eps, double c_node, double c_factor, InferenceWork& work) {
    BeliefSet b;
    b.node.resize(g.num_vars());
    b.factor.resize(g.num_factors());
    for (int i = 0; i < g.num_vars(); ++i) {
        fill_node_acc(g, theta, msgs, i, work.node_acc);
        softmax_inplace(work.node_acc.data(), work.node_acc.size(), eps * c_node);
        b.node[i] = work.node_acc;
    }
    for (int a = 0; a < g.num_factors(); ++a) {
        fill_factor_sum(g, theta, msgs, a, -1, work.factor_sum);
        softmax_inplace(work.factor_sum.data(), work.factor_sum.size(), eps * c_factor);
        b.factor[a] = work.factor_sum;
    }
    return b;
}

double marginalization_residual(const FactorGraph& g, const BeliefSet& b) {
    double res = 0.0;
    std::vector<double> marg;
    for (int a = 0; a < g.num_factors(); ++a) {
        const auto& scope = g.scopes[a];
        for (int t = 0; t < static_cast<int>(scope.size()); ++t) {
            const int i = scope[t];
            const std::size_t k = static_cast<std::size_t>(g.cardinalities[i]);
            const std::size_t stride = g.factor_strides[a][t];
            marg.assign(k, 0.0);
            for (std::size_t idx = 0; idx < b.factor[a].size(); ++idx)
                marg[(idx / stride) % k] += b.factor[a][idx];
            for (std::size_t s = 0; s < k; ++s)
                res = std::max(res, std::abs(marg[s] - b.node[i][s]));
        }
    }
    return res;
}

double entropy(const Table& p) {
    double h = 0.0;
    for (double q : p) {
        const double qc = std::max(q, kProbFloor);
        h -= qc * std::log(qc);
    }
    return h;
}

LatentSolution solve_latent_subproblem(const HiddenSubgraph& sub, const PotentialSet& theta_hat,
                                       double eps, double c_node, double c_factor,
                                       double tol, int max_sweeps, MessageSet* warm) {
    LatentSolution sol;
    if (sub.empty()) return sol;
    const auto& g = sub.reduced;

    MessageSet local;
    MessageSet& msgs = warm ? *warm : local;
    if (msgs.values.empty() && g.num_edges() > 0) msgs = MessageSet::zeros(g);

    InferenceWork work;
    sol.converged = false;
    for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
        sweep_messages(g, theta_hat, msgs, eps, c_node, c_factor, work);
        sol.beliefs = local_beliefs(g, theta_hat, msgs, eps, c_node, c_factor, work);
        sol.residual = marginalization_residual(g, sol.beliefs);
        sol.sweeps = sweep;
        if (sol.residual < tol) {
            sol.converged = true;
            break;
        }
    }
    if (max_sweeps == 0) {
        sol.beliefs = local_beliefs(g, theta_hat, msgs, eps, c_node, c_factor, work);
        sol.residual = marginalization_residual(g, sol.beliefs);
        sol.converged = sol.residual < tol;
    }

    double value = 0.0;
    for (int i = 0; i < g.num_vars(); ++i) {
        const auto& d = sol.beliefs.node[i];
        for (std::size_t s = 0; s < d.size(); ++s) value -= d[s] * theta_hat.node[i][s];
        value -= eps * c_node * entropy(d);
    }
    for (int a = 0; a < g.num_factors(); ++a) {
        const auto& d = sol.beliefs.factor[a];
        for (std::size_t s = 0; s < d.size(); ++s) value -= d[s] * theta_hat.factor[a][s];
        value -= eps * c_factor * entropy(d);
    }
    sol.value = value;
    return sol;
}

std::vector<int> decode_map(const FactorGraph& g, const PotentialSet& theta,
                            double eps_decode, int max_sweeps, double tol) {
    MessageSet msgs = MessageSet::zeros(g);
    InferenceWork work;
    BeliefSet b;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        sweep_messages(g, theta, msgs, eps_decode, 1.0, 1.0, work);
        b = local_beliefs(g, theta, msgs, eps_decode, 1.0, 1.0, work);
        if (marginalization_residual(g, b) < tol) break;
    }
    if (max_sweeps == 0) b = local_beliefs(g, theta, msgs, eps_decode, 1.0, 1.0, work);

    std::vector<int> labels(g.num_vars(), 0);
    for (int i = 0; i < g.num_vars(); ++i) {
        const auto& t = b.node[i];
        int best = 0;
        for (int s = 1; s < static_cast<int>(t.size()); ++s)
            if (t[s] > t[best]) best = s;
        labels[i] = best;
    }
    return labels;
}

}  // namespace lsp
