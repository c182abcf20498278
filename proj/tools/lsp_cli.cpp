// Command-line front end: dataset generation, training, prediction,
// evaluation, the latent-fraction sweep, and the oracle self-check.
//
// Exit codes: 0 success, 1 usage/validation error, 2 runtime failure,
// 3 verification failure.

#include <cstdint>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lsp/harness.hpp"
#include "lsp/learning.hpp"
#include "lsp/serialize.hpp"
#include "lsp/verify.hpp"

namespace {

struct CommonHyperFlags {
    lsp::HyperParams hyper;
    double counting_all = 1.0;
    bool counting_all_set = false;

    void add_to(CLI::App* cmd, bool with_epsilon) {
        if (with_epsilon)
            cmd->add_option("--epsilon", hyper.epsilon, "temperature of the soft-max family");
        cmd->add_option("--c-reg", hyper.c_reg, "regularization constant C");
        cmd->add_option("--counting", counting_all,
                        "set all four counting numbers at once")
            ->each([this](const std::string&) { counting_all_set = true; });
        cmd->add_option("--counting-node", hyper.counting_node, "c_i");
        cmd->add_option("--counting-factor", hyper.counting_factor, "c_alpha");
        cmd->add_option("--counting-latent-node", hyper.counting_latent_node, "c-hat_i");
        cmd->add_option("--counting-latent-factor", hyper.counting_latent_factor, "c-hat_alpha");
        cmd->add_option("--outer-iters", hyper.outer_iters, "outer iteration cap");
        cmd->add_option("--inner-iters", hyper.inner_iters,
                        "sweep cap of one latent-subproblem solve");
        cmd->add_option("--msg-sweeps", hyper.msg_sweeps, "message sweeps per outer iteration");
        cmd->add_option("--tolerance", hyper.tolerance, "outer stop: |delta F| threshold");
        cmd->add_option("--latent-tolerance", hyper.latent_tolerance,
                        "latent stop: marginalization residual threshold");
    }

    lsp::HyperParams resolve(CLI::App* cmd) {
        lsp::HyperParams h = hyper;
        if (counting_all_set) {
            h.counting_node = h.counting_factor = counting_all;
            h.counting_latent_node = h.counting_latent_factor = counting_all;
            // individual flags still win when given explicitly
            if (cmd->count("--counting-node")) h.counting_node = hyper.counting_node;
            if (cmd->count("--counting-factor")) h.counting_factor = hyper.counting_factor;
            if (cmd->count("--counting-latent-node"))
                h.counting_latent_node = hyper.counting_latent_node;
            if (cmd->count("--counting-latent-factor"))
                h.counting_latent_factor = hyper.counting_latent_factor;
        }
        return h;
    }
};

int run(int argc, char** argv) {
    CLI::App app{"structured prediction with latent variables on discrete factor graphs"};
    app.require_subcommand(1);

    // --- gen ---
    auto* gen = app.add_subcommand("gen", "write a synthetic tag-segmentation dataset");
    lsp::harness::GridSpec grid;
    std::string gen_out;
    gen->add_option("--height", grid.height, "grid height");
    gen->add_option("--width", grid.width, "grid width");
    gen->add_option("--labels", grid.num_labels, "label count");
    gen->add_option("--noise", grid.noise_amplitude, "uniform noise amplitude");
    gen->add_option("--latent-frac", grid.latent_fraction, "fraction of hidden training pixels");
    gen->add_option("--n-train", grid.n_train, "training instances");
    gen->add_option("--n-test", grid.n_test, "test instances");
    gen->add_option("--seed", grid.seed, "generator seed");
    gen->add_option("--out", gen_out, "output dataset path")->required();

    // --- train ---
    auto* tr = app.add_subcommand("train", "train a model on a dataset file");
    std::string tr_data, tr_out, tr_log;
    CommonHyperFlags tr_flags;
    int tr_threads = 1;
    bool tr_verify_monotone = false;
    tr->add_option("--data", tr_data, "dataset path")->required();
    tr->add_option("--out", tr_out, "output model path")->required();
    tr->add_option("--log", tr_log, "training-log CSV path");
    tr_flags.add_to(tr, /*with_epsilon=*/true);
    tr->add_option("--seed", tr_flags.hyper.seed, "seed recorded with the model");
    tr->add_option("--threads", tr_threads, "worker threads across examples");
    tr->add_flag("--verify-monotone", tr_verify_monotone,
                 "check the per-stage descent guarantee while training");
    bool tr_verbose = false;
    tr->add_flag("-v,--verbose", tr_verbose, "print one progress line per iteration");

    // --- predict ---
    auto* pr = app.add_subcommand("predict", "decode labelings with a trained model");
    std::string pr_data, pr_model, pr_out, pr_split = "test";
    double pr_eps = 0.01;
    pr->add_option("--data", pr_data, "dataset path")->required();
    pr->add_option("--model", pr_model, "model path")->required();
    pr->add_option("--out", pr_out, "output JSON path")->required();
    pr->add_option("--split", pr_split, "test or train")
        ->check(CLI::IsMember({"test", "train"}));
    pr->add_option("--eps-decode", pr_eps, "decoding temperature");

    // --- eval ---
    auto* ev = app.add_subcommand("eval", "pixel accuracy of a model on the test split");
    std::string ev_data, ev_model, ev_out;
    double ev_eps = 0.01;
    ev->add_option("--data", ev_data, "dataset path")->required();
    ev->add_option("--model", ev_model, "model path")->required();
    ev->add_option("--out", ev_out, "optional JSON output path");
    ev->add_option("--eps-decode", ev_eps, "decoding temperature");

    // --- sweep ---
    auto* sw = app.add_subcommand("sweep", "latent-fraction / epsilon grid of training runs");
    lsp::harness::SweepConfig sweep_cfg;
    sweep_cfg.latent_fractions = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    sweep_cfg.epsilons = {1.0, 0.1, 0.01};
    std::string sw_out, sw_timing = "real";
    CommonHyperFlags sw_flags;
    sw->add_option("--fractions", sweep_cfg.latent_fractions, "latent fractions")
        ->delimiter(',');
    sw->add_option("--epsilons", sweep_cfg.epsilons, "epsilon values")->delimiter(',');
    sw->add_option("--runs", sweep_cfg.runs, "runs per cell");
    sw->add_option("--seed", sweep_cfg.base_seed, "base seed; per-run seeds derive from it");
    sw->add_option("--out", sw_out, "output CSV path")->required();
    sw->add_option("--threads", sweep_cfg.threads, "parallel runs");
    sw->add_option("--timing", sw_timing, "real: measure wall time; off: emit 0 for "
                                          "byte-stable output")
        ->check(CLI::IsMember({"real", "off"}));
    sw->add_option("--noise", sweep_cfg.grid.noise_amplitude, "uniform noise amplitude");
    sw->add_option("--n-train", sweep_cfg.grid.n_train, "training instances per run");
    sw->add_option("--n-test", sweep_cfg.grid.n_test, "test instances per run");
    sw->add_option("--eps-decode", sweep_cfg.eps_decode, "decoding temperature");
    sw_flags.add_to(sw, /*with_epsilon=*/false);

    // --- verify ---
    auto* vf = app.add_subcommand("verify", "oracle self-check on built-in tiny instances");
    std::uint64_t vf_seed = 20120626;
    vf->add_option("--seed", vf_seed, "seed of the built-in instances");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);  // prints the message; 0 for --help
        return rc == 0 ? 0 : 1;
    }

    if (gen->parsed()) {
        grid.validate();
        const lsp::Dataset data = lsp::harness::synthesize_dataset(grid);
        lsp::save_dataset(gen_out, data, "grid", grid);
        std::cout << "wrote " << gen_out << " (" << data.train.size() << " train, "
                  << data.test.size() << " test)\n";
        return 0;
    }

    if (tr->parsed()) {
        const lsp::HyperParams hyper = tr_flags.resolve(tr);
        hyper.validate();
        const lsp::DatasetFile file = lsp::load_dataset(tr_data);
        lsp::TrainOptions opts;
        opts.threads = tr_threads;
        opts.verify_monotone = tr_verify_monotone;
        if (tr_verbose)
            opts.on_iteration = [](const lsp::IterRecord& rec) {
                std::cerr << "iter " << rec.iter << "  F " << rec.total << "  |grad| "
                          << rec.grad_norm << "  eta " << rec.eta << "  residual "
                          << rec.latent_residual << "\n";
            };
        const lsp::TrainState state = lsp::train(file.data, hyper, opts);

        lsp::ModelFile model;
        model.params = state.params;
        model.hyper = hyper;
        model.num_features = file.data.num_features;
        model.dataset_digest = file.digest;
        lsp::save_model(tr_out, model);
        if (!tr_log.empty()) lsp::atomic_write_file(tr_log, lsp::training_log_csv(state.history));

        const char* status = state.status == lsp::TrainStatus::converged ? "converged"
                             : state.status == lsp::TrainStatus::stalled ? "stalled"
                                                                         : "max-iters";
        std::cout << "trained " << state.outer_iters_used << " iterations (" << status
                  << "), F = " << state.history.back().total << ", wrote " << tr_out << "\n";
        return 0;
    }

    if (pr->parsed() || ev->parsed()) {
        const bool predicting = pr->parsed();
        const lsp::DatasetFile file = lsp::load_dataset(predicting ? pr_data : ev_data);
        const lsp::ModelFile model = lsp::load_model(predicting ? pr_model : ev_model);
        if (model.num_features != file.data.num_features)
            throw std::runtime_error("model/dataset feature count mismatch");
        if (model.dataset_digest != file.digest)
            std::cerr << "note: model was trained on a dataset with a different digest\n";

        if (predicting) {
            const auto& split = pr_split == "train" ? file.data.train : file.data.test;
            nlohmann::json out;
            out["format_version"] = 1;
            nlohmann::json preds = nlohmann::json::array();
            for (const auto& ex : split) {
                const lsp::PotentialSet theta =
                    lsp::reparameterize(ex, model.params, /*include_loss=*/false);
                preds.push_back(lsp::decode_map(*ex.graph, theta, pr_eps));
            }
            out["predictions"] = std::move(preds);
            lsp::atomic_write_file(pr_out, out.dump() + "\n");
            std::cout << "wrote " << pr_out << "\n";
        } else {
            const double acc =
                lsp::harness::evaluate_accuracy(model.params, file.data.test, ev_eps);
            std::cout << "accuracy " << acc << "\n";
            if (!ev_out.empty()) {
                nlohmann::json out;
                out["accuracy"] = acc;
                lsp::atomic_write_file(ev_out, out.dump() + "\n");
            }
        }
        return 0;
    }

    if (sw->parsed()) {
        sweep_cfg.hyper = sw_flags.resolve(sw);
        sweep_cfg.hyper.validate();
        sweep_cfg.grid.validate();
        sweep_cfg.measure_time = sw_timing == "real";
        const auto rows = lsp::harness::sweep(sweep_cfg);
        std::string csv = lsp::harness::sweep_csv_header() + "\n";
        for (const auto& row : rows) csv += lsp::harness::sweep_row_csv(row) + "\n";
        lsp::atomic_write_file(sw_out, csv);
        std::cout << "wrote " << sw_out << " (" << rows.size() << " rows)\n";
        return 0;
    }

    if (vf->parsed()) {
        const auto results = lsp::verify::run_all(vf_seed);
        bool all_pass = true;
        for (const auto& r : results) {
            std::cout << (r.pass ? "PASS " : "FAIL ") << r.name << " — " << r.detail << "\n";
            all_pass = all_pass && r.pass;
        }
        return all_pass ? 0 : 3;
    }
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
