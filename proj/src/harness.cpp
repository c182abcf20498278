#include "lsp/harness.hpp"

#include <chrono>
#include <cmath>
#include <memory>
#include <stdexcept>

#include "lsp/inference.hpp"
#include "lsp/parallel.hpp"
#include "lsp/rng.hpp"
#include "lsp/text_format.hpp"

namespace lsp::harness {

namespace {

// 14x40 ground-truth fixture; '.' is background 0, letters are labels 1..4.
constexpr const char* kIcmlTag[14] = {
    "........................................",
    "........................................",
    "..IIIIII..CCCCCCC..MM.....MM..LL........",
    "..IIIIII..CCCCCCC..MMMM.MMMM..LL........",
    "....II....CC.......MMMM.MMMM..LL........",
    "....II....CC.......MM.MMM.MM..LL........",
    "....II....CC.......MM.MMM.MM..LL........",
    "....II....CC.......MM.....MM..LL........",
    "....II....CC.......MM.....MM..LL........",
    "....II....CC.......MM.....MM..LL........",
    "..IIIIII..CCCCCCC..MM.....MM..LLLLLL....",
    "..IIIIII..CCCCCCC..MM.....MM..LLLLLL....",
    "........................................",
    "........................................",
};

int tag_label(char c) {
    switch (c) {
        case 'I': return 1;
        case 'C': return 2;
        case 'M': return 3;
        case 'L': return 4;
        default: return 0;
    }
}

Example make_instance(const std::shared_ptr<const FactorGraph>& graph,
                      const std::vector<int>& truth, const GridSpec& spec, Rng& rng,
                      bool with_hidden) {
    const auto& g = *graph;
    Example ex;
    ex.graph = graph;
    ex.labels = truth;
    ex.hidden.assign(g.num_vars(), 0);
    ex.observation.resize(g.num_vars());
    for (int i = 0; i < g.num_vars(); ++i)
        ex.observation[i] = static_cast<double>(truth[i] + 1) +
                            rng.uniform(-spec.noise_amplitude, spec.noise_amplitude);
    if (with_hidden && spec.latent_fraction > 0.0) {
        const int count = static_cast<int>(
            std::llround(spec.latent_fraction * static_cast<double>(g.num_vars())));
        for (int i : rng.sample_without_replacement(g.num_vars(), count)) ex.hidden[i] = 1;
    }

    attach_grid_features(ex, spec.num_labels);

    const int observed = ex.num_observed();
    if (observed > 0) set_hamming_loss(ex, 1.0 / static_cast<double>(observed));
    return ex;
}

double mean_of(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
}

double stddev_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

std::string sanitize(std::string s) {
    for (char& c : s)
        if (c == ',' || c == '\n' || c == '\r') c = ';';
    return s;
}

}  // namespace

void GridSpec::validate() const {
    if (height < 1 || width < 1) throw std::invalid_argument("grid dimensions must be positive");
    if (num_labels < 2) throw std::invalid_argument("num_labels must be >= 2");
    if (noise_amplitude < 0.0) throw std::invalid_argument("noise_amplitude must be >= 0");
    if (latent_fraction < 0.0 || latent_fraction > 1.0)
        throw std::invalid_argument("latent_fraction must be in [0,1]");
    if (n_train < 0 || n_test < 0) throw std::invalid_argument("instance counts must be >= 0");
}

std::vector<int> generate_icml_tag() {
    std::vector<int> grid;
    grid.reserve(14 * 40);
    for (const char* row : kIcmlTag)
        for (int c = 0; c < 40; ++c) grid.push_back(tag_label(row[c]));
    return grid;
}

FactorGraph build_grid_graph(int height, int width, int num_labels) {
    std::vector<int> cards(static_cast<std::size_t>(height) * width, num_labels);
    std::vector<std::vector<int>> scopes;
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
            const int i = r * width + c;
            if (c + 1 < width) scopes.push_back({i, i + 1});
            if (r + 1 < height) scopes.push_back({i, i + width});
        }
    }
    return build_graph(std::move(cards), std::move(scopes));
}

void attach_grid_features(Example& ex, int num_labels) {
    const auto& g = *ex.graph;
    // F = 2: unary observation match and pairwise label smoothness
    ex.feat_node.assign(2, std::vector<Table>(g.num_vars()));
    ex.feat_factor.assign(2, std::vector<Table>(g.num_factors()));
    for (int i = 0; i < g.num_vars(); ++i) {
        Table t(num_labels);
        for (int s = 0; s < num_labels; ++s)
            t[s] = -std::abs(ex.observation[i] - static_cast<double>(s + 1));
        ex.feat_node[0][i] = std::move(t);
    }
    Table pair_table(static_cast<std::size_t>(num_labels) * num_labels);
    for (int si = 0; si < num_labels; ++si)
        for (int sj = 0; sj < num_labels; ++sj)
            pair_table[static_cast<std::size_t>(si) * num_labels + sj] = -std::abs(si - sj);
    for (int a = 0; a < g.num_factors(); ++a) ex.feat_factor[1][a] = pair_table;
}

Dataset synthesize_dataset(const GridSpec& spec) {
    spec.validate();
    if (spec.height != 14 || spec.width != 40)
        throw std::invalid_argument("the committed tag fixture is 14x40");
    const std::vector<int> truth = generate_icml_tag();

    Dataset ds;
    ds.graph = std::make_shared<const FactorGraph>(
        build_grid_graph(spec.height, spec.width, spec.num_labels));
    ds.num_features = 2;

    Rng rng(spec.seed);
    for (int t = 0; t < spec.n_train; ++t)
        ds.train.push_back(make_instance(ds.graph, truth, spec, rng, /*with_hidden=*/true));
    for (int t = 0; t < spec.n_test; ++t)
        ds.test.push_back(make_instance(ds.graph, truth, spec, rng, /*with_hidden=*/false));
    return ds;
}

double evaluate_accuracy(const ModelParams& params, const std::vector<Example>& test,
                         double eps_decode) {
    long correct = 0, total = 0;
    for (const auto& ex : test) {
        const PotentialSet theta = reparameterize(ex, params, /*include_loss=*/false);
        const std::vector<int> pred = decode_map(*ex.graph, theta, eps_decode);
        for (int i = 0; i < ex.graph->num_vars(); ++i) {
            correct += pred[i] == ex.labels[i] ? 1 : 0;
            ++total;
        }
    }
    return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

std::vector<SweepRow> sweep(const SweepConfig& cfg) {
    const int cells = static_cast<int>(cfg.latent_fractions.size() * cfg.epsilons.size());
    const int items = cells * cfg.runs;
    std::vector<SweepRow> rows(items);

    parallel_for(items, cfg.threads, [&](int idx) {
        const int cell = idx / cfg.runs;
        const double fraction =
            cfg.latent_fractions[cell / static_cast<int>(cfg.epsilons.size())];
        const double epsilon = cfg.epsilons[cell % static_cast<int>(cfg.epsilons.size())];
        const std::uint64_t seed = mix_seed(cfg.base_seed, static_cast<std::uint64_t>(idx));

        SweepRow& row = rows[idx];
        row.run_id = std::to_string(idx);
        row.latent_fraction = fraction;
        row.epsilon = epsilon;
        row.seed = std::to_string(seed);

        const auto t0 = std::chrono::steady_clock::now();
        try {
            GridSpec gs = cfg.grid;
            gs.latent_fraction = fraction;
            gs.seed = seed;
            HyperParams hp = cfg.hyper;
            hp.epsilon = epsilon;
            hp.seed = seed;

            const Dataset ds = synthesize_dataset(gs);
            TrainOptions topts;  // per-run single thread; parallelism is across runs
            const TrainState state = train(ds, hp, topts);

            row.accuracy = evaluate_accuracy(state.params, ds.test, cfg.eps_decode);
            row.objective_final = state.history.back().total;
            row.outer_iters_used = state.outer_iters_used;
            row.w_unary = state.params.weights.size() > 0 ? state.params.weights[0] : 0.0;
            row.w_pair = state.params.weights.size() > 1 ? state.params.weights[1] : 0.0;
            row.status = "ok";
        } catch (const std::exception& e) {
            row.status = sanitize(std::string("error: ") + e.what());
        }
        if (cfg.measure_time) {
            const auto t1 = std::chrono::steady_clock::now();
            row.wall_ms =
                std::chrono::duration_cast<std::chrono::microseconds>(t1 - t0).count() / 1000.0;
        }
    });

    // mean/stddev summaries per cell, over the successful runs
    for (int cell = 0; cell < cells; ++cell) {
        const double fraction =
            cfg.latent_fractions[cell / static_cast<int>(cfg.epsilons.size())];
        const double epsilon = cfg.epsilons[cell % static_cast<int>(cfg.epsilons.size())];
        std::vector<double> acc, obj, iters, wall, w0, w1;
        for (int run = 0; run < cfg.runs; ++run) {
            const SweepRow& r = rows[cell * cfg.runs + run];
            if (r.status != "ok") continue;
            acc.push_back(r.accuracy);
            obj.push_back(r.objective_final);
            iters.push_back(r.outer_iters_used);
            wall.push_back(r.wall_ms);
            w0.push_back(r.w_unary);
            w1.push_back(r.w_pair);
        }
        for (const char* kind : {"mean", "stddev"}) {
            const bool mean = kind[0] == 'm';
            SweepRow s;
            s.run_id = kind;
            s.latent_fraction = fraction;
            s.epsilon = epsilon;
            s.accuracy = mean ? mean_of(acc) : stddev_of(acc);
            s.objective_final = mean ? mean_of(obj) : stddev_of(obj);
            s.outer_iters_used = mean ? mean_of(iters) : stddev_of(iters);
            s.wall_ms = mean ? mean_of(wall) : stddev_of(wall);
            s.w_unary = mean ? mean_of(w0) : stddev_of(w0);
            s.w_pair = mean ? mean_of(w1) : stddev_of(w1);
            s.status = "summary";
            rows.push_back(std::move(s));
        }
    }
    return rows;
}

std::string sweep_csv_header() {
    return "run_id,latent_fraction,epsilon,seed,accuracy,objective_final,"
           "outer_iters_used,wall_ms,w_unary,w_pair,status";
}

std::string sweep_row_csv(const SweepRow& row) {
    std::string out;
    out += row.run_id;
    out += ',';
    out += format_double(row.latent_fraction);
    out += ',';
    out += format_double(row.epsilon);
    out += ',';
    out += row.seed;
    out += ',';
    out += format_double(row.accuracy);
    out += ',';
    out += format_double(row.objective_final);
    out += ',';
    out += format_double(row.outer_iters_used);
    out += ',';
    out += format_double(row.wall_ms);
    out += ',';
    out += format_double(row.w_unary);
    out += ',';
    out += format_double(row.w_pair);
    out += ',';
    out += row.status;
    return out;
}

}  // namespace lsp::harness
