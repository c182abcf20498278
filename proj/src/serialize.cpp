#include "lsp/serialize.hpp"

#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <stdexcept>

#include <json.hpp>

#include "lsp/text_format.hpp"

namespace lsp {

using nlohmann::json;

namespace {

constexpr int kDatasetVersion = 1;
constexpr int kModelVersion = 1;

[[noreturn]] void schema_error(const std::string& what) {
    throw std::runtime_error("schema error: " + what);
}

const json& need(const json& j, const char* key, const char* where) {
    const auto it = j.find(key);
    if (it == j.end())
        schema_error(std::string("missing key '") + key + "' in " + where);
    return *it;
}

json example_to_json(const Example& ex, bool is_test) {
    json j;
    j["observation"] = ex.observation;
    if (is_test) {
        j["labels"] = ex.labels;
    } else {
        json observed = json::object();
        std::vector<int> hidden;
        for (int i = 0; i < static_cast<int>(ex.hidden.size()); ++i) {
            if (ex.hidden[i])
                hidden.push_back(i);
            else
                observed[std::to_string(i)] = ex.labels[i];
        }
        j["observed"] = std::move(observed);
        j["hidden"] = std::move(hidden);
    }
    return j;
}

json tables_to_json(const std::vector<Table>& tables) {
    json out = json::array();
    for (int i = 0; i < static_cast<int>(tables.size()); ++i)
        if (!tables[i].empty()) out.push_back(json::array({i, tables[i]}));
    return out;
}

void tables_from_json(const json& j, std::vector<Table>& tables, std::size_t count,
                      const char* where) {
    tables.assign(count, {});
    for (const auto& entry : j) {
        if (!entry.is_array() || entry.size() != 2)
            schema_error(std::string("expected [index, table] pair in ") + where);
        const int idx = entry[0].get<int>();
        if (idx < 0 || idx >= static_cast<int>(count))
            schema_error(std::string("index out of range in ") + where);
        tables[idx] = entry[1].get<Table>();
    }
}

json feature_tables_to_json(const std::vector<std::vector<Table>>& per_feature) {
    json out = json::array();
    for (int r = 0; r < static_cast<int>(per_feature.size()); ++r)
        for (int i = 0; i < static_cast<int>(per_feature[r].size()); ++i)
            if (!per_feature[r][i].empty())
                out.push_back(json::array({r, i, per_feature[r][i]}));
    return out;
}

void feature_tables_from_json(const json& j, std::vector<std::vector<Table>>& per_feature,
                              int num_features, std::size_t count, const char* where) {
    per_feature.assign(num_features, std::vector<Table>(count));
    for (const auto& entry : j) {
        if (!entry.is_array() || entry.size() != 3)
            schema_error(std::string("expected [feature, index, table] triple in ") + where);
        const int r = entry[0].get<int>();
        const int idx = entry[1].get<int>();
        if (r < 0 || r >= num_features)
            schema_error(std::string("feature index out of range in ") + where);
        if (idx < 0 || idx >= static_cast<int>(count))
            schema_error(std::string("index out of range in ") + where);
        per_feature[r][idx] = entry[2].get<Table>();
    }
}

}  // namespace

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string digest_string(const std::string& bytes) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "fnv1a64:%016llx",
                  static_cast<unsigned long long>(fnv1a64(bytes)));
    return std::string(buf);
}

void atomic_write_file(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open for writing: " + tmp);
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) {
            out.close();
            std::error_code ec;
            std::filesystem::remove(tmp, ec);
            throw std::runtime_error("write failed: " + tmp);
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw std::runtime_error("rename failed for: " + path);
    }
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw std::runtime_error("read failed: " + path);
    return bytes;
}

std::string serialize_dataset(const Dataset& data, const std::string& kind,
                              const std::optional<harness::GridSpec>& grid) {
    json j;
    j["format_version"] = kDatasetVersion;
    j["kind"] = kind;
    j["num_features"] = data.num_features;
    j["graph"]["cardinalities"] = data.graph->cardinalities;
    j["graph"]["scopes"] = data.graph->scopes;
    if (grid) {
        json g;
        g["height"] = grid->height;
        g["width"] = grid->width;
        g["num_labels"] = grid->num_labels;
        g["noise_amplitude"] = grid->noise_amplitude;
        g["latent_fraction"] = grid->latent_fraction;
        g["n_train"] = grid->n_train;
        g["n_test"] = grid->n_test;
        g["seed"] = grid->seed;
        j["grid"] = std::move(g);
    }

    json train = json::array();
    for (const auto& ex : data.train) {
        json je = example_to_json(ex, /*is_test=*/false);
        if (kind == "explicit") {
            je["features"]["node"] = feature_tables_to_json(ex.feat_node);
            je["features"]["factor"] = feature_tables_to_json(ex.feat_factor);
            je["losses"]["node"] = tables_to_json(ex.loss_node);
            je["losses"]["factor"] = tables_to_json(ex.loss_factor);
            je["losses"]["latent_node"] = tables_to_json(ex.latent_loss_node);
            je["losses"]["latent_factor"] = tables_to_json(ex.latent_loss_factor);
        }
        train.push_back(std::move(je));
    }
    j["train"] = std::move(train);

    json test = json::array();
    for (const auto& ex : data.test) {
        json je = example_to_json(ex, /*is_test=*/true);
        if (kind == "explicit") {
            je["features"]["node"] = feature_tables_to_json(ex.feat_node);
            je["features"]["factor"] = feature_tables_to_json(ex.feat_factor);
        }
        test.push_back(std::move(je));
    }
    j["test"] = std::move(test);
    return j.dump() + "\n";
}

namespace {

Example example_from_json(const json& je, const std::shared_ptr<const FactorGraph>& graph,
                          const std::string& kind, int num_features, bool is_test,
                          int num_labels) {
    const auto& g = *graph;
    Example ex;
    ex.graph = graph;
    ex.observation = need(je, "observation", "example").get<std::vector<double>>();
    if (ex.observation.size() != static_cast<std::size_t>(g.num_vars()))
        schema_error("observation length does not match the graph");

    if (is_test) {
        ex.labels = need(je, "labels", "test example").get<std::vector<int>>();
        if (ex.labels.size() != static_cast<std::size_t>(g.num_vars()))
            schema_error("label vector length does not match the graph");
        ex.hidden.assign(g.num_vars(), 0);
    } else {
        ex.labels.assign(g.num_vars(), -1);
        ex.hidden.assign(g.num_vars(), 1);
        const json& observed = need(je, "observed", "train example");
        for (auto it = observed.begin(); it != observed.end(); ++it) {
            const int i = std::stoi(it.key());
            if (i < 0 || i >= g.num_vars()) schema_error("observed variable index out of range");
            ex.labels[i] = it.value().get<int>();
            ex.hidden[i] = 0;
        }
        // the hidden list is redundant with the observed map; cross-check it
        const auto hidden = need(je, "hidden", "train example").get<std::vector<int>>();
        for (int i : hidden) {
            if (i < 0 || i >= g.num_vars()) schema_error("hidden variable index out of range");
            if (!ex.hidden[i]) schema_error("variable listed both observed and hidden");
        }
        if (static_cast<int>(hidden.size()) != g.num_vars() - ex.num_observed())
            schema_error("hidden list does not cover the unobserved variables");
    }

    bool explicit_losses = false;
    if (kind == "explicit") {
        const json& feats = need(je, "features", "explicit example");
        feature_tables_from_json(need(feats, "node", "features"), ex.feat_node, num_features,
                                 g.num_vars(), "features.node");
        feature_tables_from_json(need(feats, "factor", "features"), ex.feat_factor, num_features,
                                 g.num_factors(), "features.factor");
        if (!is_test && je.contains("losses")) {
            const json& losses = je["losses"];
            tables_from_json(need(losses, "node", "losses"), ex.loss_node, g.num_vars(),
                             "losses.node");
            tables_from_json(need(losses, "factor", "losses"), ex.loss_factor, g.num_factors(),
                             "losses.factor");
            tables_from_json(need(losses, "latent_node", "losses"), ex.latent_loss_node,
                             g.num_vars(), "losses.latent_node");
            tables_from_json(need(losses, "latent_factor", "losses"), ex.latent_loss_factor,
                             g.num_factors(), "losses.latent_factor");
            explicit_losses = true;
        }
    } else {
        harness::attach_grid_features(ex, num_labels);
    }

    if (!is_test && !explicit_losses) {
        const int observed = ex.num_observed();
        if (observed > 0) set_hamming_loss(ex, 1.0 / static_cast<double>(observed));
    }
    ex.validate();
    return ex;
}

}  // namespace

DatasetFile deserialize_dataset(const std::string& bytes) {
    json j;
    try {
        j = json::parse(bytes);
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("dataset parse error: ") + e.what());
    }
    const int version = need(j, "format_version", "dataset").get<int>();
    if (version != kDatasetVersion)
        throw std::runtime_error("unsupported dataset format version " +
                                 std::to_string(version) + "; this build reads version " +
                                 std::to_string(kDatasetVersion));

    DatasetFile out;
    out.kind = need(j, "kind", "dataset").get<std::string>();
    if (out.kind != "grid" && out.kind != "explicit")
        schema_error("kind must be 'grid' or 'explicit'");
    out.data.num_features = need(j, "num_features", "dataset").get<int>();
    if (out.data.num_features < 1) schema_error("num_features must be >= 1");

    const json& jg = need(j, "graph", "dataset");
    auto cards = need(jg, "cardinalities", "graph").get<std::vector<int>>();
    auto scopes = need(jg, "scopes", "graph").get<std::vector<std::vector<int>>>();
    try {
        out.data.graph =
            std::make_shared<const FactorGraph>(build_graph(std::move(cards), std::move(scopes)));
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error(std::string("dataset graph invalid: ") + e.what());
    }

    int num_labels = out.data.graph->cardinalities[0];
    if (j.contains("grid")) {
        harness::GridSpec gs;
        const json& g = j["grid"];
        gs.height = need(g, "height", "grid").get<int>();
        gs.width = need(g, "width", "grid").get<int>();
        gs.num_labels = need(g, "num_labels", "grid").get<int>();
        gs.noise_amplitude = need(g, "noise_amplitude", "grid").get<double>();
        gs.latent_fraction = need(g, "latent_fraction", "grid").get<double>();
        gs.n_train = need(g, "n_train", "grid").get<int>();
        gs.n_test = need(g, "n_test", "grid").get<int>();
        gs.seed = need(g, "seed", "grid").get<std::uint64_t>();
        num_labels = gs.num_labels;
        out.grid = gs;
    } else if (out.kind == "grid") {
        schema_error("missing key 'grid' in dataset of kind 'grid'");
    }

    for (const auto& je : need(j, "train", "dataset"))
        out.data.train.push_back(example_from_json(je, out.data.graph, out.kind,
                                                   out.data.num_features, false, num_labels));
    for (const auto& je : need(j, "test", "dataset"))
        out.data.test.push_back(example_from_json(je, out.data.graph, out.kind,
                                                  out.data.num_features, true, num_labels));
    out.digest = digest_string(bytes);
    return out;
}

void save_dataset(const std::string& path, const Dataset& data, const std::string& kind,
                  const std::optional<harness::GridSpec>& grid) {
    atomic_write_file(path, serialize_dataset(data, kind, grid));
}

DatasetFile load_dataset(const std::string& path) {
    const std::string bytes = read_file(path);  // names the path on I/O errors
    try {
        return deserialize_dataset(bytes);
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
}

std::string serialize_model(const ModelFile& model) {
    json j;
    j["format_version"] = kModelVersion;
    j["num_features"] = model.num_features;
    json hex = json::array(), readable = json::array();
    for (double w : model.params.weights) {
        hex.push_back(format_double_hex(w));
        readable.push_back(w);
    }
    j["weights_hex"] = std::move(hex);
    j["weights"] = std::move(readable);  // informational; the hex values are authoritative
    json h;
    h["epsilon"] = model.hyper.epsilon;
    h["c_reg"] = model.hyper.c_reg;
    h["norm_order"] = model.hyper.norm_order;
    h["counting_node"] = model.hyper.counting_node;
    h["counting_factor"] = model.hyper.counting_factor;
    h["counting_latent_node"] = model.hyper.counting_latent_node;
    h["counting_latent_factor"] = model.hyper.counting_latent_factor;
    h["outer_iters"] = model.hyper.outer_iters;
    h["inner_iters"] = model.hyper.inner_iters;
    h["msg_sweeps"] = model.hyper.msg_sweeps;
    h["tolerance"] = model.hyper.tolerance;
    h["latent_tolerance"] = model.hyper.latent_tolerance;
    h["seed"] = model.hyper.seed;
    j["hyper"] = std::move(h);
    j["dataset_digest"] = model.dataset_digest;
    return j.dump() + "\n";
}

ModelFile deserialize_model(const std::string& bytes) {
    json j;
    try {
        j = json::parse(bytes);
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("model parse error: ") + e.what());
    }
    const int version = need(j, "format_version", "model").get<int>();
    if (version != kModelVersion)
        throw std::runtime_error("unsupported model format version " + std::to_string(version) +
                                 "; this build reads version " + std::to_string(kModelVersion) +
                                 " — retrain or convert the model file");
    ModelFile out;
    out.num_features = need(j, "num_features", "model").get<int>();
    for (const auto& s : need(j, "weights_hex", "model")) {
        const std::string hex = s.get<std::string>();
        errno = 0;
        char* end = nullptr;
        const double w = std::strtod(hex.c_str(), &end);
        if (errno != 0 || end == hex.c_str() || *end != '\0')
            schema_error("bad hex float in weights_hex: " + hex);
        out.params.weights.push_back(w);
    }
    if (static_cast<int>(out.params.weights.size()) != out.num_features)
        schema_error("weights_hex length does not match num_features");

    const json& h = need(j, "hyper", "model");
    out.hyper.epsilon = need(h, "epsilon", "hyper").get<double>();
    out.hyper.c_reg = need(h, "c_reg", "hyper").get<double>();
    out.hyper.norm_order = need(h, "norm_order", "hyper").get<int>();
    out.hyper.counting_node = need(h, "counting_node", "hyper").get<double>();
    out.hyper.counting_factor = need(h, "counting_factor", "hyper").get<double>();
    out.hyper.counting_latent_node = need(h, "counting_latent_node", "hyper").get<double>();
    out.hyper.counting_latent_factor = need(h, "counting_latent_factor", "hyper").get<double>();
    out.hyper.outer_iters = need(h, "outer_iters", "hyper").get<int>();
    out.hyper.inner_iters = need(h, "inner_iters", "hyper").get<int>();
    out.hyper.msg_sweeps = need(h, "msg_sweeps", "hyper").get<int>();
    out.hyper.tolerance = need(h, "tolerance", "hyper").get<double>();
    out.hyper.latent_tolerance = need(h, "latent_tolerance", "hyper").get<double>();
    out.hyper.seed = need(h, "seed", "hyper").get<std::uint64_t>();
    out.hyper.validate();
    out.dataset_digest = need(j, "dataset_digest", "model").get<std::string>();
    return out;
}

void save_model(const std::string& path, const ModelFile& model) {
    atomic_write_file(path, serialize_model(model));
}

ModelFile load_model(const std::string& path) {
    const std::string bytes = read_file(path);
    try {
        return deserialize_model(bytes);
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
}

std::string training_log_csv(const std::vector<IterRecord>& history) {
    std::string out = "iter,F,f1,f2,f3,grad_norm,eta,latent_residual\n";
    for (const auto& rec : history) {
        out += std::to_string(rec.iter);
        out += ',';
        out += format_double(rec.total);
        out += ',';
        out += format_double(rec.f1);
        out += ',';
        out += format_double(rec.f2);
        out += ',';
        out += format_double(rec.f3);
        out += ',';
        out += format_double(rec.grad_norm);
        out += ',';
        out += format_double(rec.eta);
        out += ',';
        out += format_double(rec.latent_residual);
        out += '\n';
    }
    return out;
}

}  // namespace lsp
