#ifndef LSP_SERIALIZE_HPP
#define LSP_SERIALIZE_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lsp/harness.hpp"
#include "lsp/learning.hpp"
#include "lsp/model.hpp"

namespace lsp {

// FNV-1a 64-bit content digest; hex-encoded with a scheme prefix.
std::uint64_t fnv1a64(const std::string& bytes);
std::string digest_string(const std::string& bytes);

// Writes via a temp file and an atomic rename, so failures never leave a
// partial output behind. Throws std::runtime_error on I/O errors.
void atomic_write_file(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

// Dataset files: one JSON document, kind "grid" (observations and masks only,
// features regenerated from the observation channel) or "explicit" (feature
// and loss tables spelled out per example). Serialization is canonical:
// parse -> dump round-trips byte-identically.
struct DatasetFile {
    Dataset data;
    std::string kind;                              // "grid" or "explicit"
    std::optional<harness::GridSpec> grid;         // provenance for grid kind
    std::string digest;                            // of the file bytes as read/written
};

std::string serialize_dataset(const Dataset& data, const std::string& kind,
                              const std::optional<harness::GridSpec>& grid);
DatasetFile deserialize_dataset(const std::string& bytes);

void save_dataset(const std::string& path, const Dataset& data, const std::string& kind,
                  const std::optional<harness::GridSpec>& grid = std::nullopt);
DatasetFile load_dataset(const std::string& path);

// Model files: weights stored as hex floats (bit-exact), plus the
// hyperparameters and the digest of the training data.
struct ModelFile {
    ModelParams params;
    HyperParams hyper;
    int num_features = 0;
    std::string dataset_digest;
};

std::string serialize_model(const ModelFile& model);
ModelFile deserialize_model(const std::string& bytes);
void save_model(const std::string& path, const ModelFile& model);
ModelFile load_model(const std::string& path);

// Training-log CSV: iter,F,f1,f2,f3,grad_norm,eta,latent_residual.
std::string training_log_csv(const std::vector<IterRecord>& history);

}  // namespace lsp

#endif
