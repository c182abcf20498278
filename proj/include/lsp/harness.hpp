#ifndef LSP_HARNESS_HPP
#define LSP_HARNESS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "lsp/learning.hpp"
#include "lsp/model.hpp"

namespace lsp::harness {

// Constants of the synthetic weakly-labeled segmentation experiment: a
// 14x40 five-label tag image, observations = label value + uniform noise,
// a random fraction of the training pixels hidden.
struct GridSpec {
    int height = 14;
    int width = 40;
    int num_labels = 5;
    double noise_amplitude = 2.0;
    double latent_fraction = 0.0;
    int n_train = 10;
    int n_test = 10;
    std::uint64_t seed = 1;

    void validate() const;
};

// The committed ground-truth bitmap: background 0, letters I,C,M,L as labels
// 1..4, row-major height x width.
std::vector<int> generate_icml_tag();

// 4-neighbor grid graph with uniform label count.
FactorGraph build_grid_graph(int height, int width, int num_labels);

// Draws the train/test instances: x_i = (y_i + 1) + Uniform(-a, a), hidden
// masks fresh per training instance, F=2 features (unary -|x_i - (s+1)|,
// pairwise -|s_i - s_j|), Hamming loss normalized by the observed count.
Dataset synthesize_dataset(const GridSpec& spec);

// Rebuilds the F=2 feature tables from the observation channel; also used by
// the dataset loader, which stores observations and masks only.
void attach_grid_features(Example& ex, int num_labels);

// Fraction of correctly decoded pixels over all test instances.
double evaluate_accuracy(const ModelParams& params, const std::vector<Example>& test,
                         double eps_decode = 0.01);

struct SweepRow {
    std::string run_id;  // sequential index, or "mean"/"stddev" for summaries
    double latent_fraction = 0.0;
    double epsilon = 0.0;
    std::string seed;  // empty for summaries
    double accuracy = 0.0;
    double objective_final = 0.0;
    double outer_iters_used = 0.0;
    double wall_ms = 0.0;
    double w_unary = 0.0;
    double w_pair = 0.0;
    std::string status;  // "ok", "summary", or an error note
};

struct SweepConfig {
    std::vector<double> latent_fractions;
    std::vector<double> epsilons;
    int runs = 5;
    std::uint64_t base_seed = 1;
    GridSpec grid;          // latent_fraction and seed are overridden per cell
    HyperParams hyper;      // epsilon is overridden per cell
    int threads = 1;        // cells are independent; parallelism never changes rows
    bool measure_time = true;  // off -> wall_ms column fixed at 0 for byte-stable output
    double eps_decode = 0.01;
};

// One row per (fraction, epsilon, run) in grid order, then mean/stddev
// summary rows per (fraction, epsilon). Seeds derive from base_seed and the
// cell index, so results are independent of execution order.
std::vector<SweepRow> sweep(const SweepConfig& cfg);

std::string sweep_csv_header();
std::string sweep_row_csv(const SweepRow& row);

}  // namespace lsp::harness

#endif
