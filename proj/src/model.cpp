#include "lsp/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "lsp/inference.hpp"

namespace lsp {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

// adds w-weighted feature tables into `out` (sized already); empty = zero
void axpy_table(Table& out, const Table& t, double w) {
    if (t.empty()) return;
    require(t.size() == out.size(), "feature/loss table size mismatch");
    for (std::size_t s = 0; s < t.size(); ++s) out[s] += w * t[s];
}

}  // namespace

void HyperParams::validate() const {
    require(epsilon > 0.0, "epsilon must be > 0 (use a small epsilon such as 0.01 "
                           "to approach the max-margin limit)");
    require(c_reg >= 0.0, "c_reg must be >= 0");
    require(norm_order == 2, "only the p=2 regularizer is supported");
    require(counting_node > 0.0 && counting_factor > 0.0 &&
                counting_latent_node > 0.0 && counting_latent_factor > 0.0,
            "all counting numbers must be > 0");
    require(outer_iters >= 1, "outer_iters must be >= 1");
    require(inner_iters >= 1, "inner_iters must be >= 1");
    require(msg_sweeps >= 0, "msg_sweeps must be >= 0");
    require(tolerance > 0.0, "tolerance must be > 0");
    require(latent_tolerance > 0.0, "latent_tolerance must be > 0");
}

int Example::num_observed() const {
    int n = 0;
    for (char h : hidden) n += h ? 0 : 1;
    return n;
}

std::vector<int> Example::hidden_indices() const {
    std::vector<int> idx;
    for (int i = 0; i < static_cast<int>(hidden.size()); ++i)
        if (hidden[i]) idx.push_back(i);
    return idx;
}

void Example::validate() const {
    require(graph != nullptr, "example has no graph");
    const auto& g = *graph;
    const auto n = static_cast<std::size_t>(g.num_vars());
    require(hidden.size() == n, "hidden mask size mismatch");
    require(labels.size() == n, "label vector size mismatch");
    require(observation.empty() || observation.size() == n, "observation size mismatch");
    for (int i = 0; i < g.num_vars(); ++i) {
        if (!hidden[i])
            require(labels[i] >= 0 && labels[i] < g.cardinalities[i],
                    "observed label out of range at variable " + std::to_string(i));
    }
    auto check_node_tables = [&](const std::vector<Table>& ts, const char* what) {
        require(ts.empty() || ts.size() == n, std::string(what) + ": node table count mismatch");
        for (std::size_t i = 0; i < ts.size(); ++i)
            require(ts[i].empty() || ts[i].size() == static_cast<std::size_t>(g.cardinalities[i]),
                    std::string(what) + ": node table size mismatch at variable " + std::to_string(i));
    };
    auto check_factor_tables = [&](const std::vector<Table>& ts, const char* what) {
        require(ts.empty() || ts.size() == static_cast<std::size_t>(g.num_factors()),
                std::string(what) + ": factor table count mismatch");
        for (std::size_t a = 0; a < ts.size(); ++a)
            require(ts[a].empty() || ts[a].size() == g.factor_sizes[a],
                    std::string(what) + ": factor table size mismatch at factor " + std::to_string(a));
    };
    for (const auto& per_feat : feat_node) check_node_tables(per_feat, "feature");
    for (const auto& per_feat : feat_factor) check_factor_tables(per_feat, "feature");
    check_node_tables(loss_node, "loss");
    check_factor_tables(loss_factor, "loss");
    check_node_tables(latent_loss_node, "latent loss");
    // latent_loss_factor tables range over hidden slots; checked in latent_potentials
}

PotentialSet reparameterize(const Example& ex, const ModelParams& params,
                            bool include_loss) {
    const auto& g = *ex.graph;
    PotentialSet theta;
    theta.node.resize(g.num_vars());
    theta.factor.resize(g.num_factors());

    for (int i = 0; i < g.num_vars(); ++i) {
        auto& t = theta.node[i];
        t.assign(g.cardinalities[i], 0.0);
        if (include_loss && i < static_cast<int>(ex.loss_node.size()))
            axpy_table(t, ex.loss_node[i], 1.0);
        for (int r = 0; r < params.num_features(); ++r)
            if (r < static_cast<int>(ex.feat_node.size()))
                axpy_table(t, ex.feat_node[r][i], params.weights[r]);
    }
    for (int a = 0; a < g.num_factors(); ++a) {
        auto& t = theta.factor[a];
        t.assign(g.factor_sizes[a], 0.0);
        if (include_loss && a < static_cast<int>(ex.loss_factor.size()))
            axpy_table(t, ex.loss_factor[a], 1.0);
        for (int r = 0; r < params.num_features(); ++r)
            if (r < static_cast<int>(ex.feat_factor.size()))
                axpy_table(t, ex.feat_factor[r][a], params.weights[r]);
    }
    return theta;
}

PotentialSet latent_potentials(const Example& ex, const ModelParams& params,
                               const HiddenSubgraph& sub) {
    PotentialSet theta;
    if (sub.empty()) return theta;
    const auto& g = *ex.graph;
    const auto& rg = sub.reduced;
    theta.node.resize(rg.num_vars());
    theta.factor.resize(rg.num_factors());

    for (int r_i = 0; r_i < rg.num_vars(); ++r_i) {
        const int i = sub.hidden_vars[r_i];
        auto& t = theta.node[r_i];
        t.assign(g.cardinalities[i], 0.0);
        if (i < static_cast<int>(ex.latent_loss_node.size()))
            axpy_table(t, ex.latent_loss_node[i], 1.0);
        for (int r = 0; r < params.num_features(); ++r)
            if (r < static_cast<int>(ex.feat_node.size()))
                axpy_table(t, ex.feat_node[r][i], params.weights[r]);
    }

    for (int f = 0; f < rg.num_factors(); ++f) {
        const int a = sub.active_factors[f];
        auto& t = theta.factor[f];
        t.assign(rg.factor_sizes[f], 0.0);
        if (a < static_cast<int>(ex.latent_loss_factor.size()) &&
            !ex.latent_loss_factor[a].empty()) {
            if (ex.latent_loss_factor[a].size() != t.size())
                throw std::invalid_argument("latent loss table size mismatch at factor " +
                                            std::to_string(a));
            axpy_table(t, ex.latent_loss_factor[a], 1.0);
        }

        // parent-table offset contributed by the clamped observed slots
        std::size_t base = 0;
        for (int slot : sub.observed_slots[f]) {
            const int v = g.scopes[a][slot];
            const int y = ex.labels[v];
            if (ex.hidden[v] || y < 0 || y >= g.cardinalities[v])
                throw std::invalid_argument("clamp label out of range at variable " +
                                            std::to_string(v));
            base += static_cast<std::size_t>(y) * g.factor_strides[a][slot];
        }
        for (std::size_t h = 0; h < t.size(); ++h) {
            std::size_t full = base;
            for (std::size_t u = 0; u < sub.hidden_slots[f].size(); ++u)
                full += static_cast<std::size_t>(rg.slot_state(f, static_cast<int>(u), h)) *
                        g.factor_strides[a][sub.hidden_slots[f][u]];
            for (int r = 0; r < params.num_features(); ++r) {
                if (r >= static_cast<int>(ex.feat_factor.size())) continue;
                const auto& ft = ex.feat_factor[r][a];
                if (!ft.empty()) t[h] += params.weights[r] * ft[full];
            }
        }
    }
    return theta;
}

void set_hamming_loss(Example& ex, double scale) {
    if (scale <= 0.0) throw std::invalid_argument("Hamming loss scale must be > 0");
    const auto& g = *ex.graph;
    ex.loss_node.assign(g.num_vars(), {});
    ex.loss_factor.clear();  // pairwise loss identically zero
    for (int i = 0; i < g.num_vars(); ++i) {
        if (ex.hidden[i]) continue;  // hidden variables carry no supervised loss
        Table t(g.cardinalities[i], scale);
        t[ex.labels[i]] = 0.0;
        ex.loss_node[i] = std::move(t);
    }
}

std::vector<double> feature_expectations(const Example& ex, const HiddenSubgraph& sub,
                                         const BeliefSet& d) {
    const auto& g = *ex.graph;
    const int F = ex.num_features();
    std::vector<double> out(F, 0.0);

    if (!sub.empty()) {
        if (d.node.size() != static_cast<std::size_t>(sub.reduced.num_vars()) ||
            d.factor.size() != static_cast<std::size_t>(sub.reduced.num_factors()))
            throw std::invalid_argument("belief dimension mismatch");
        for (const auto& t : d.node)
            for (double p : t)
                if (p < -1e-9 || p > 1.0 + 1e-9)
                    throw std::invalid_argument("belief entry outside [0,1]");
        for (const auto& t : d.factor)
            for (double p : t)
                if (p < -1e-9 || p > 1.0 + 1e-9)
                    throw std::invalid_argument("belief entry outside [0,1]");
    }

    for (int r = 0; r < F; ++r) {
        double acc = 0.0;
        // observed nodes at their labels, hidden nodes under d_i
        for (int i = 0; i < g.num_vars(); ++i) {
            const auto& ft = ex.feat_node[r][i];
            if (ft.empty()) continue;
            if (!ex.hidden[i]) {
                acc += ft[ex.labels[i]];
            } else {
                const auto& di = d.node[sub.var_rank[i]];
                if (di.size() != ft.size()) throw std::invalid_argument("belief dimension mismatch");
                for (std::size_t s = 0; s < ft.size(); ++s) acc += di[s] * ft[s];
            }
        }
        // factors: fully observed ones contribute a constant, active ones the
        // d_a-weighted average with observed slots clamped
        for (int a = 0; a < g.num_factors(); ++a) {
            const auto& ft = ex.feat_factor[r][a];
            if (ft.empty()) continue;
            const int f = sub.empty() ? -1 : sub.factor_active_idx[a];
            if (f < 0) {
                std::size_t idx = 0;
                for (std::size_t t = 0; t < g.scopes[a].size(); ++t)
                    idx += static_cast<std::size_t>(ex.labels[g.scopes[a][t]]) *
                           g.factor_strides[a][t];
                acc += ft[idx];
            } else {
                const auto& rg = sub.reduced;
                const auto& da = d.factor[f];
                if (da.size() != rg.factor_sizes[f])
                    throw std::invalid_argument("belief dimension mismatch");
                std::size_t base = 0;
                for (int slot : sub.observed_slots[f])
                    base += static_cast<std::size_t>(ex.labels[g.scopes[a][slot]]) *
                            g.factor_strides[a][slot];
                for (std::size_t h = 0; h < da.size(); ++h) {
                    std::size_t full = base;
                    for (std::size_t u = 0; u < sub.hidden_slots[f].size(); ++u)
                        full += static_cast<std::size_t>(
                                    rg.slot_state(f, static_cast<int>(u), h)) *
                                g.factor_strides[a][sub.hidden_slots[f][u]];
                    acc += da[h] * ft[full];
                }
            }
        }
        out[r] = acc;
    }
    return out;
}

}  // namespace lsp
